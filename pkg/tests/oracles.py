"""Slow, obviously-correct reference implementations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def jacobi_singular_values(A: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """One-sided Jacobi: rotate column pairs until all columns are mutually orthogonal.

    The singular values are then the column norms. Works on the orientation with
    fewer columns. Returned in descending order.
    """
    U = np.array(A, dtype=np.float64)
    if U.shape[1] > U.shape[0]:
        U = U.T.copy()
    n = U.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p, q in itertools.combinations(range(n), 2):
            alpha = U[:, p] @ U[:, p]
            beta = U[:, q] @ U[:, q]
            gamma = U[:, p] @ U[:, q]
            if abs(gamma) <= tol * np.sqrt(alpha * beta):
                continue
            rotated = True
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta != 0 else 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            up = U[:, p].copy()
            U[:, p] = c * up - s * U[:, q]
            U[:, q] = s * up + c * U[:, q]
        if not rotated:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def brute_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def brute_top_k(vectors: dict, query: np.ndarray, k: int, exclude=()) -> list[tuple[str, float]]:
    """Score every candidate, sort by (-cosine, tag)."""
    q = query / np.linalg.norm(query)
    scored = []
    for tag, v in vectors.items():
        if tag in exclude:
            continue
        scored.append((-(float(q @ (v / np.linalg.norm(v)))), tag))
    scored.sort()
    return [(tag, -negsim) for negsim, tag in scored[:k]]


def central_diff(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x`` (modified in place and restored)."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12))
