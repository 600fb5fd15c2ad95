from typing import Iterable, List, Sequence, Tuple

import numpy as np

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)

# Widest rank whose masks fit the uint64 kernels; larger ranks use object arrays of Python ints.
UINT64_MAX_BITS = 63


def bit_count64(arr: np.ndarray) -> np.ndarray:
    """SWAR population count of a uint64 array."""
    arr = arr.astype(np.uint64, copy=True)
    arr -= (arr >> np.uint64(1)) & _M1
    arr = (arr & _M2) + ((arr >> np.uint64(2)) & _M2)
    arr += arr >> np.uint64(4)
    arr &= _M4
    arr *= _H01
    arr >>= np.uint64(56)
    return arr.astype(np.int64)


def single_bit(arr: np.ndarray) -> np.ndarray:
    """True where exactly one bit is set; works on uint64 and object arrays alike."""
    one = np.uint64(1) if arr.dtype == np.uint64 else 1
    return (arr != 0) & ((arr & (arr - one)) == 0)


def to_mask(indices: Iterable[int]) -> int:
    """1-based indices to a Python int bitmask (bit i-1 for index i)."""
    mask = 0
    for i in indices:
        mask |= 1 << (i - 1)
    return mask


def from_mask(mask: int) -> List[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def occurrence_masks(word: Sequence[int]) -> Tuple[int, int]:
    """(indices occurring exactly once, indices occurring at least twice), signs ignored."""
    once = 0
    multi = 0
    for letter in word:
        bit = 1 << (abs(letter) - 1)
        if multi & bit:
            continue
        if once & bit:
            once &= ~bit
            multi |= bit
        else:
            once |= bit
    return once, multi


def as_mask_array(values: Sequence[int], width: int) -> np.ndarray:
    if width <= UINT64_MAX_BITS:
        return np.array(values, dtype=np.uint64)
    arr = np.empty(len(values), dtype=object)
    arr[:] = list(values)
    return arr
