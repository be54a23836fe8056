"""Classical representation baselines: TF-IDF, LSA, LDA and word2vec centroids.

Item-level vectors are fitted on app description documents; users are always the
centroid of the vectors of the apps they used.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

from .docs import DocCorpus, app_tag, user_tag
from .errors import AllTokensOOV, EmptyCorpus, RankDeficient
from .ingest import AppMetadata, InteractionSet
from .text import DEFAULT_TEXT_CONFIG, TextConfig, normalize_text

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- TF-IDF

@dataclass
class TfidfModel:
    terms: list[str]
    idf: np.ndarray
    matrix: sp.csr_matrix  # docs x terms, rows L2-normalized when ``norm``
    tags: list[str]
    smooth_idf: bool = True
    norm: bool = True

    def sparse_vector(self, tag: str) -> dict[int, float]:
        row = self.matrix.getrow(self.tags.index(tag))
        return dict(zip(row.indices.tolist(), row.data.tolist()))

    def transform(self, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
        index = {t: i for i, t in enumerate(self.terms)}
        rows, cols, vals = [], [], []
        for r, toks in enumerate(docs):
            counts: dict[int, int] = {}
            for t in toks:
                j = index.get(t)
                if j is not None:
                    counts[j] = counts.get(j, 0) + 1
            for j, c in sorted(counts.items()):
                rows.append(r)
                cols.append(j)
                vals.append(c * self.idf[j])
        X = sp.csr_matrix((vals, (rows, cols)), shape=(len(docs), len(self.terms)), dtype=np.float64)
        return _l2_rows(X) if self.norm else X

    def vectors(self) -> dict[str, np.ndarray]:
        dense = self.matrix.toarray()
        return {t: dense[i] for i, t in enumerate(self.tags)}


def _l2_rows(X: sp.csr_matrix) -> sp.csr_matrix:
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    out = sp.diags(1.0 / norms) @ X
    out = sp.csr_matrix(out)
    out.eliminate_zeros()
    return out


def tfidf_fit(docs: DocCorpus, smooth_idf: bool = True, norm: bool = True) -> TfidfModel:
    """weight = raw count * idf, idf = ln((1 + D) / (1 + df)) + 1 (or ln(D / df) + 1 unsmoothed)."""
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("tfidf needs at least one document")
    terms = sorted({t for d in docs for t in d.tokens})
    if not terms:
        raise EmptyCorpus("all documents are empty")
    index = {t: i for i, t in enumerate(terms)}
    df = np.zeros(len(terms))
    for d in docs:
        for t in set(d.tokens):
            df[index[t]] += 1
    n = len(docs)
    if smooth_idf:
        idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    else:
        idf = np.log(n / df) + 1.0
    model = TfidfModel(terms, idf, sp.csr_matrix((0, len(terms))), [d.tag for d in docs], smooth_idf, norm)
    model.matrix = model.transform([d.tokens for d in docs])
    return model


def centroid_matrix(interactions: InteractionSet, item_tags: Sequence[str]) -> tuple[sp.csr_matrix, list[str]]:
    """Row-stochastic users x items averaging operator over items that have a vector."""
    index = {t: i for i, t in enumerate(item_tags)}
    rows, cols, vals, users = [], [], [], []
    for u, apps in interactions.items():
        idx = [index[app_tag(a)] for a in apps if app_tag(a) in index]
        if not idx:
            log.warning("user %s has no app with a vector; dropped", u)
            continue
        r = len(users)
        users.append(user_tag(u))
        rows.extend([r] * len(idx))
        cols.extend(idx)
        vals.extend([1.0 / len(idx)] * len(idx))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(users), len(item_tags)))
    return A, users


def tfidf_user_vectors(interactions: InteractionSet, app_tfidf: TfidfModel) -> dict[str, np.ndarray]:
    A, users = centroid_matrix(interactions, app_tfidf.tags)
    M = (A @ app_tfidf.matrix).toarray()
    return {u: M[i] for i, u in enumerate(users)}


# ---------------------------------------------------------------- LSA

@dataclass
class LsaModel:
    components: np.ndarray  # k x terms (V_k^T)
    singular_values: np.ndarray
    doc_vectors: np.ndarray  # docs x k (U_k * S_k)
    tags: list[str]

    def project(self, X) -> np.ndarray:
        return np.asarray(X @ self.components.T)

    def vectors(self) -> dict[str, np.ndarray]:
        return {t: self.doc_vectors[i] for i, t in enumerate(self.tags)}


def randomized_svd(X, k: int, n_oversamples: int = 30, n_iter: int = 4, seed: int = 0):
    """Rank-k SVD by randomized range finding with ``n_iter`` power iterations.

    Returns (U, s, Vt) with k components.
    """
    m, n = X.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} must lie in [1, min{X.shape}]")
    rng = np.random.default_rng(seed)
    ell = min(k + n_oversamples, m, n)
    Q, _ = np.linalg.qr(np.asarray(X @ rng.standard_normal((n, ell))))
    for _ in range(n_iter):
        Q, _ = np.linalg.qr(np.asarray(X.T @ Q))
        Q, _ = np.linalg.qr(np.asarray(X @ Q))
    B = np.asarray((X.T @ Q).T)
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    U = Q @ Ub
    # fix signs so the largest-magnitude entry of each right vector is positive
    flip = np.sign(Vt[np.arange(Vt.shape[0]), np.argmax(np.abs(Vt), axis=1)])
    flip[flip == 0] = 1.0
    return U[:, :k] * flip[:k], s[:k], Vt[:k] * flip[:k, None]


def lsa_fit(app_tfidf: TfidfModel, k: int = 100, n_oversamples: int = 30, n_iter: int = 4,
            seed: int = 0) -> LsaModel:
    X = app_tfidf.matrix
    k = min(k, min(X.shape))
    U, s, Vt = randomized_svd(X, k, n_oversamples, n_iter, seed)
    if s[-1] < 1e-10:
        raise RankDeficient(f"singular value {s[-1]:.3g} inside the top-{k}")
    return LsaModel(Vt, s, U * s, list(app_tfidf.tags))


def centroid_user_vectors(interactions: InteractionSet, item_vectors: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Mean of the vectors of each user's apps (apps without a vector are ignored)."""
    tags = sorted(item_vectors)
    A, users = centroid_matrix(interactions, tags)
    M = A @ np.stack([item_vectors[t] for t in tags])
    return {u: np.asarray(M[i]).ravel() for i, u in enumerate(users)}


# ---------------------------------------------------------------- LDA

@dataclass
class TopicModel:
    K: int
    alpha: float
    beta: float
    terms: list[str]
    topic_word: np.ndarray  # K x V counts
    doc_topic: np.ndarray  # D x K counts
    topic_totals: np.ndarray
    assignments: np.ndarray
    tags: list[str]
    seed: int = 0

    def doc_topics(self, i: int) -> np.ndarray:
        row = self.doc_topic[i].astype(np.float64)
        return (row + self.alpha) / (row.sum() + self.K * self.alpha)

    def vectors(self) -> dict[str, np.ndarray]:
        return {t: self.doc_topics(i) for i, t in enumerate(self.tags)}


@njit(cache=True)
def _gibbs_init(words, doc_of, z, ndk, nkw, nk, seed):
    np.random.seed(seed)
    K = nk.shape[0]
    for i in range(words.shape[0]):
        k = np.random.randint(K)
        z[i] = k
        ndk[doc_of[i], k] += 1
        nkw[k, words[i]] += 1
        nk[k] += 1


@njit(cache=True)
def _gibbs_sweep(words, doc_of, z, ndk, nkw, nk, alpha, beta, seed, update_topics):
    np.random.seed(seed)
    V = nkw.shape[1]
    K = nk.shape[0]
    p = np.empty(K)
    vb = V * beta
    for i in range(words.shape[0]):
        w = words[i]
        d = doc_of[i]
        k = z[i]
        ndk[d, k] -= 1
        if update_topics:
            nkw[k, w] -= 1
            nk[k] -= 1
        tot = 0.0
        for kk in range(K):
            tot += (ndk[d, kk] + alpha) * (nkw[kk, w] + beta) / (nk[kk] + vb)
            p[kk] = tot
        u = np.random.random() * tot
        k = np.searchsorted(p, u, side="right")
        if k >= K:
            k = K - 1
        z[i] = k
        ndk[d, k] += 1
        if update_topics:
            nkw[k, w] += 1
            nk[k] += 1


def _flatten(docs: Sequence[Sequence[int]]):
    words = np.fromiter((w for d in docs for w in d), dtype=np.int64)
    doc_of = np.fromiter((i for i, d in enumerate(docs) for _ in d), dtype=np.int64)
    return words, doc_of


def lda_fit(docs: DocCorpus, K: int = 50, alpha: float | None = None, beta: float = 0.01,
            iters: int = 500, seed: int = 0,
            on_sweep: Callable[[int, TopicModel], None] | None = None) -> TopicModel:
    """Collapsed Gibbs sampling; ``alpha`` defaults to 50/K."""
    if K < 2:
        raise ValueError("K must be >= 2")
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("lda needs documents")
    alpha = 50.0 / K if alpha is None else alpha
    terms = sorted({t for d in docs for t in d.tokens})
    index = {t: i for i, t in enumerate(terms)}
    words, doc_of = _flatten([[index[t] for t in d.tokens] for d in docs])
    z = np.zeros(len(words), dtype=np.int64)
    ndk = np.zeros((len(docs), K), dtype=np.int64)
    nkw = np.zeros((K, len(terms)), dtype=np.int64)
    nk = np.zeros(K, dtype=np.int64)
    _gibbs_init(words, doc_of, z, ndk, nkw, nk, seed)
    model = TopicModel(K, alpha, beta, terms, nkw, ndk, nk, z, [d.tag for d in docs], seed)
    for it in range(iters):
        _gibbs_sweep(words, doc_of, z, ndk, nkw, nk, alpha, beta, (seed * 7919 + it + 1) % 2**32, True)
        if on_sweep is not None:
            on_sweep(it, model)
    return model


def lda_doc_topics(model: TopicModel, doc, iters: int = 50) -> np.ndarray:
    """Topic proportions of a training doc (by index) or a new token sequence.

    New documents are folded in by Gibbs sampling with the topic-word counts frozen.
    """
    if isinstance(doc, (int, np.integer)):
        return model.doc_topics(int(doc))
    index = {t: i for i, t in enumerate(model.terms)}
    seq = [index[t] for t in getattr(doc, "tokens", doc) if t in index]
    if not seq:
        return np.full(model.K, 1.0 / model.K)
    words, doc_of = _flatten([seq])
    z = np.zeros(len(words), dtype=np.int64)
    ndk = np.zeros((1, model.K), dtype=np.int64)
    nkw = model.topic_word.copy()
    nk = model.topic_totals.copy()
    rng = np.random.default_rng(model.seed)
    z[:] = rng.integers(model.K, size=len(words))
    for k in z:
        ndk[0, k] += 1
    for it in range(iters):
        _gibbs_sweep(words, doc_of, z, ndk, nkw, nk, model.alpha, model.beta, (model.seed + it) % 2**32, False)
    row = ndk[0].astype(np.float64)
    return (row + model.alpha) / (row.sum() + model.K * model.alpha)


# ---------------------------------------------------------------- word2vec centroid

def w2v_centroid_user_vectors(interactions: InteractionSet, catalog: Mapping[str, AppMetadata],
                              model, cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> dict[str, np.ndarray]:
    """Mean word vector over all in-vocabulary tokens of the user's app descriptions."""
    desc: dict[str, list[int]] = {}
    out = {}
    for u, apps in interactions.items():
        idx: list[int] = []
        for a in apps:
            if a not in desc:
                desc[a] = model.vocab.encode(normalize_text(catalog[a].description, cfg))
            idx.extend(desc[a])
        if not idx:
            log.warning("dropping user %s: %s", u, AllTokensOOV(u))
            continue
        out[user_tag(u)] = model.W[idx].astype(np.float64).mean(axis=0)
    return out


def vector_dims(vectors: Mapping[str, np.ndarray]) -> int:
    return 0 if not vectors else int(next(iter(vectors.values())).shape[0])

