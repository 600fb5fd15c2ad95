import hashlib

import numpy as np


def _label_words(label: str) -> list:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, label: str) -> np.random.Generator:
    """
    Independent generator for one (seed, label) pair.

    Args:
        seed: run seed recorded in the manifest
        label: dotted substream name, e.g. "constructions.syndrome.attempt3"

    Returns:
        numpy Generator, identical for identical arguments
    """
    seed = int(seed)
    entropy = [abs(seed), *_label_words(label)]
    if seed < 0:
        # one extra word keeps -s apart from s
        entropy.append(1)
    return np.random.default_rng(np.random.SeedSequence(entropy))
