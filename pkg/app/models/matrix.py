from typing import Iterator, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    """Rank over F_p by Gaussian elimination on a copy of the rows."""
    work = [[int(x) % p for x in row] for row in rows]
    if not work:
        return 0
    width = len(work[0])
    rank = 0
    for col in range(width):
        pivot = next((r for r in range(rank, len(work)) if work[r][col]), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        inv = pow(work[rank][col], -1, p)
        work[rank] = [(x * inv) % p for x in work[rank]]
        for r in range(len(work)):
            if r != rank and work[r][col]:
                factor = work[r][col]
                work[r] = [(a - factor * b) % p for a, b in zip(work[r], work[rank])]
        rank += 1
        if rank == len(work):
            break
    return rank


class IntMatrix(BaseModel):
    """Arbitrary-precision integer matrix, row-major. A kernel basis may have zero columns."""

    model_config = ConfigDict(frozen=True)

    rows: int = Field(ge=0)
    cols: int = Field(ge=0)
    entries: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def _check_shape(self) -> "IntMatrix":
        if len(self.entries) != self.rows:
            raise ValueError(f"expected {self.rows} rows, got {len(self.entries)}")
        for i, row in enumerate(self.entries):
            if len(row) != self.cols:
                raise ValueError(f"row {i} has {len(row)} entries, expected {self.cols}")
        return self

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int = None) -> "IntMatrix":
        rows = [tuple(int(x) for x in r) for r in rows]
        width = cols if cols is not None else (len(rows[0]) if rows else 0)
        return cls(rows=len(rows), cols=width, entries=tuple(rows))

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]], rows: int) -> "IntMatrix":
        entries = tuple(tuple(int(col[i]) for col in columns) for i in range(rows))
        return cls(rows=rows, cols=len(columns), entries=entries)

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls.from_rows([[1 if i == j else 0 for j in range(n)] for i in range(n)], cols=n)

    def column(self, j: int) -> Tuple[int, ...]:
        return tuple(row[j] for row in self.entries)

    def columns(self) -> List[Tuple[int, ...]]:
        return [self.column(j) for j in range(self.cols)]

    def transpose(self) -> "IntMatrix":
        return IntMatrix.from_columns(list(self.entries), rows=self.cols)

    def matmul(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        other_cols = other.columns()
        entries = tuple(
            tuple(sum(a * b for a, b in zip(row, col)) for col in other_cols) for row in self.entries
        )
        return IntMatrix(rows=self.rows, cols=other.cols, entries=entries)

    def is_zero(self) -> bool:
        return all(x == 0 for row in self.entries for x in row)

    @property
    def max_bitsize(self) -> int:
        return max((abs(x).bit_length() for row in self.entries for x in row), default=0)

    def mod(self, p: int) -> np.ndarray:
        """Entries reduced mod p as an int64 array."""
        return np.array([[x % p for x in row] for row in self.entries], dtype=np.int64).reshape(
            self.rows, self.cols
        )


def projective_count(p: int, k: int) -> int:
    """Number of nonzero vectors of F_p^k up to scalar multiples."""
    return (p ** k - 1) // (p - 1)


def projective_blocks(p: int, k: int, block: int) -> Iterator[np.ndarray]:
    """
    Nonzero vectors of F_p^k whose first nonzero coordinate is 1, in blocks of
    at most `block` rows. Each block is an int64 array of shape (rows, k).
    """
    for lead in range(k):
        rest = k - lead - 1
        total = p ** rest
        for start in range(0, total, block):
            values = np.arange(start, min(start + block, total), dtype=np.int64)
            out = np.zeros((len(values), k), dtype=np.int64)
            out[:, lead] = 1
            for j in range(k - 1, lead, -1):
                out[:, j] = values % p
                values = values // p
            yield out
