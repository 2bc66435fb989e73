"""Exact inner-product search over unit-norm vectors."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from vccscan.embed import NORM_TOLERANCE, EmbeddingVector, norm
from vccscan.errors import DimensionMismatch, DuplicateId, EmptyInput


class VectorIndex:
    """Immutable exhaustive index.

    Scores are accumulated one dimension at a time over all rows, i.e. each
    score is the left-to-right sum ``((q0*e0 + q1*e1) + q2*e2) + ...``. That is
    the same arithmetic a naive per-row loop performs, so results agree with a
    brute-force scan bit for bit and do not depend on the BLAS build.
    """

    def __init__(self, vectors: Sequence[EmbeddingVector]):
        if not vectors:
            raise EmptyInput("cannot build an index from no vectors")
        dim = vectors[0].dim
        ids: list[str] = []
        seen: set[str] = set()
        for v in vectors:
            if v.dim != dim:
                raise DimensionMismatch(f"vector {v.source_id!r} has dim {v.dim}, expected {dim}")
            if v.source_id in seen:
                raise DuplicateId(f"duplicate source id {v.source_id!r}")
            if abs(norm(v.values) - 1.0) > NORM_TOLERANCE:
                raise ValueError(f"vector {v.source_id!r} is not unit-norm")
            seen.add(v.source_id)
            ids.append(v.source_id)
        self.dimension = dim
        self.ids: tuple[str, ...] = tuple(ids)
        self._positions = {sid: i for i, sid in enumerate(ids)}
        self._rows = np.stack([v.values for v in vectors])
        self._rows.setflags(write=False)
        # Column-major copy: each accumulation step reads one contiguous column.
        self._columns = np.ascontiguousarray(self._rows.T)
        self._columns.setflags(write=False)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, source_id: str) -> bool:
        return source_id in self._positions

    def vector(self, source_id: str) -> np.ndarray:
        return self._rows[self._positions[source_id]]

    def entries(self) -> Iterable[tuple[str, np.ndarray]]:
        return zip(self.ids, self._rows)

    def scores(self, q) -> np.ndarray:
        q = np.asarray(q.values if isinstance(q, EmbeddingVector) else q, dtype=np.float64)
        if q.shape != (self.dimension,):
            raise DimensionMismatch(f"query has dim {q.shape[0] if q.ndim == 1 else q.shape}, index has {self.dimension}")
        acc = np.zeros(len(self.ids), dtype=np.float64)
        for j in range(self.dimension):
            acc += self._columns[j] * q[j]
        return acc

    def _ordered(self, scores: np.ndarray, mask=None) -> np.ndarray:
        order = np.arange(len(scores))
        if mask is not None:
            order = order[mask]
        # lexsort: last key is primary; ties fall back to insertion position.
        return order[np.lexsort((order, -scores[order]))]

    def query_threshold(self, q, t: float) -> list[tuple[str, float]]:
        """Every entry scoring at least ``t``, best first."""
        scores = self.scores(q)
        picked = self._ordered(scores, scores >= t)
        return [(self.ids[i], float(scores[i])) for i in picked]

    def query_topk(self, q, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        scores = self.scores(q)
        picked = self._ordered(scores)[:k]
        return [(self.ids[i], float(scores[i])) for i in picked]


def build(vectors: Sequence[EmbeddingVector]) -> VectorIndex:
    return VectorIndex(vectors)


def query_threshold(index: VectorIndex, q, t: float) -> list[tuple[str, float]]:
    return index.query_threshold(q, t)


def query_topk(index: VectorIndex, q, k: int) -> list[tuple[str, float]]:
    return index.query_topk(q, k)
