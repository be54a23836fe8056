"""Exact (brute-force) similarity search and vector arithmetic over tagged vectors."""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .docs import APP_PREFIX, USER_PREFIX
from .errors import DimensionMismatch, UnknownTag, ZeroVector

FILTERS = ("apps", "users", "all")


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine is undefined for a zero vector")
    # the product na * nb is symmetric, so cosine(a, b) == cosine(b, a) bit for bit
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class VectorSpace:
    """Immutable tag -> vector map with row-normalized storage for cosine search."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        tags = sorted(vectors)
        if not tags:
            self.tags: list[str] = []
            self.dim = 0
            self._M = np.zeros((0, 0))
            self._unit = self._M
            self._index: dict[str, int] = {}
            return
        M = np.stack([np.asarray(vectors[t], dtype=np.float64) for t in tags])
        if M.ndim != 2:
            raise DimensionMismatch("vectors must share one dimension")
        if not np.isfinite(M).all():
            raise ValueError("non-finite vector")
        norms = np.linalg.norm(M, axis=1)
        zero = [t for t, n in zip(tags, norms) if n == 0]
        if zero:
            raise ZeroVector(f"zero vector for {zero[0]}")
        self.tags = tags
        self.dim = M.shape[1]
        self._M = M
        self._M.setflags(write=False)
        self._unit = M / norms[:, None]
        self._index = {t: i for i, t in enumerate(tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def __contains__(self, tag: object) -> bool:
        return tag in self._index

    def __getitem__(self, tag: str) -> np.ndarray:
        try:
            return self._M[self._index[tag]]
        except KeyError:
            raise UnknownTag(tag) from None

    def _candidates(self, kind: str) -> np.ndarray:
        if kind not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}")
        if kind == "all":
            return np.arange(len(self.tags))
        prefix = APP_PREFIX if kind == "apps" else USER_PREFIX
        return np.array([i for i, t in enumerate(self.tags) if t.startswith(prefix)], dtype=np.int64)

    def top_k(self, query, k: int = 10, kind: str = "all", exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
        """Most cosine-similar tags to ``query`` (a tag or a raw vector).

        A tag query never returns itself. Ties are broken by tag, ascending.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        excluded = set(exclude)
        if isinstance(query, str):
            q = self[query]
            excluded.add(query)
        else:
            q = np.asarray(query, dtype=np.float64)
            if q.shape != (self.dim,):
                raise DimensionMismatch(f"query has shape {q.shape}, space dim {self.dim}")
        qn = np.linalg.norm(q)
        if qn == 0:
            raise ZeroVector("query vector is zero")
        cand = self._candidates(kind)
        if excluded:
            cand = np.array([i for i in cand if self.tags[i] not in excluded], dtype=np.int64)
        if cand.size == 0:
            return []
        # a row-wise reduction rather than a BLAS matvec: gemv may round identical rows
        # differently depending on their position, which would break exact ties
        sims = np.clip((self._unit[cand] * (q / qn)).sum(axis=1), -1.0, 1.0)
        # tags are sorted, so a stable sort on -sim keeps ties in tag order
        order = np.argsort(-sims, kind="stable")[:k]
        return [(self.tags[cand[i]], float(sims[i])) for i in order]


def top_k(space: VectorSpace, query, k: int = 10, kind: str = "all") -> list[tuple[str, float]]:
    return space.top_k(query, k, kind)


def vector_arith(space: VectorSpace, expression: Sequence[tuple[int, str]] | Sequence[str]) -> np.ndarray:
    """Signed sum of vectors. Terms are (sign, tag) pairs or strings like ``"+user:a"``."""
    out = np.zeros(space.dim)
    for term in expression:
        if isinstance(term, str):
            sign = -1 if term.startswith("-") else 1
            tag = term[1:] if term[:1] in "+-" else term
        else:
            sign, tag = term
        out += sign * space[tag]
    return out


def is_usable(vec: np.ndarray) -> bool:
    """Whether a vector can be used as a cosine query (non-zero and finite)."""
    return bool(np.isfinite(vec).all() and np.linalg.norm(vec) > 0)


def precision_at_k(space: VectorSpace, labels: Mapping[str, str], k: int = 3, kind: str = "apps") -> float:
    """Mean fraction of each item's top-k neighbours that share its label."""
    scores = []
    for tag in space.tags:
        if tag not in labels:
            continue
        if kind != "all" and not tag.startswith(APP_PREFIX if kind == "apps" else USER_PREFIX):
            continue
        hits = space.top_k(tag, k, kind)
        if hits:
            scores.append(sum(labels.get(t) == labels[tag] for t, _ in hits) / len(hits))
    return float(np.mean(scores)) if scores else 0.0
