from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BipartiteGraph(BaseModel):
    """
    Left-regular bipartite graph. Left vertices 1..n, right vertices 1..m.

    adj[v-1] lists the right endpoints of the d edges at left vertex v, sorted,
    repeated once per parallel edge.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    m: int = Field(ge=1)
    d: int = Field(ge=0)
    adj: Tuple[Tuple[int, ...], ...]

    @field_validator("adj")
    @classmethod
    def _sort_neighbors(cls, adj):
        return tuple(tuple(sorted(row)) for row in adj)

    @model_validator(mode="after")
    def _check_shape(self) -> "BipartiteGraph":
        if len(self.adj) != self.n:
            raise ValueError(f"adjacency has {len(self.adj)} rows, expected n={self.n}")
        for v, row in enumerate(self.adj, start=1):
            if len(row) != self.d:
                raise ValueError(f"left vertex {v} has degree {len(row)}, expected d={self.d}")
            for w in row:
                if not 1 <= w <= self.m:
                    raise ValueError(f"left vertex {v} has neighbor {w} outside 1..{self.m}")
        return self

    @property
    def edge_count(self) -> int:
        return self.n * self.d

    def right_neighborhoods(self) -> List[List[int]]:
        """Left vertices adjacent to each right vertex, in L-order, one entry per edge."""
        result: List[List[int]] = [[] for _ in range(self.m)]
        for v, row in enumerate(self.adj, start=1):
            for w in row:
                result[w - 1].append(v)
        return result

    def multiplicities(self) -> np.ndarray:
        """n x m array of edge multiplicities."""
        counts = np.zeros((self.n, self.m), dtype=np.int64)
        for v, row in enumerate(self.adj):
            for w in row:
                counts[v, w - 1] += 1
        return counts
