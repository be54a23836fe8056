"""Dense numpy reference for the forward pass, exact-softmax loss and its gradients.

The compiled SGD kernels in ``_kernels`` implement the same arithmetic; this module
is what the gradient checks and the corpus likelihood are computed with.
"""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from ..errors import IndexOutOfRange, UnknownTag

Example = tuple[tuple[int, ...], int, int]  # (input word indices, doc index or -1, target)


def iter_examples(mode: str, seq: Sequence[int], doc: int, window: int) -> Iterator[Example]:
    """Enumerate training pairs of one encoded document with a fixed full window."""
    n = len(seq)
    for t in range(n):
        ctx = tuple(seq[max(0, t - window):t]) + tuple(seq[t + 1:t + 1 + window])
        if mode == "cbow":
            if ctx:
                yield ctx, -1, seq[t]
        elif mode == "dm":
            yield ctx, doc, seq[t]
        elif mode == "sg":
            for c in ctx:
                yield (seq[t],), -1, c
        elif mode == "dbow":
            yield (), doc, seq[t]
        else:
            raise ValueError(mode)


def corpus_examples(model, corpus) -> list[Example]:
    docs_needed = model.mode in ("dm", "dbow")
    index = model._doc_index() if docs_needed else {}
    out: list[Example] = []
    for doc in corpus:
        d = -1
        if docs_needed:
            if doc.tag not in index:
                raise UnknownTag(doc.tag)
            d = index[doc.tag]
        out.extend(iter_examples(model.mode, model.vocab.encode(doc.tokens), d, model.config.window))
    return out


def hidden(W: np.ndarray, D: np.ndarray | None, inputs: Sequence[int], doc: int) -> np.ndarray:
    """Mean of the input word vectors and, when ``doc >= 0``, the document vector."""
    rows = [W[i] for i in inputs]
    if doc >= 0:
        rows.append(D[doc])
    if not rows:
        raise ValueError("example has no inputs")
    return np.mean(np.asarray(rows, dtype=np.float64), axis=0)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = np.max(z, axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def forward_softmax(model, context: Sequence[int], doc: int | None = None) -> np.ndarray:
    """Distribution over the vocabulary predicted from ``context`` (and ``doc``).

    For sg ``context`` is the single centre word; for dbow only ``doc`` is used.
    """
    V = len(model.vocab)
    for i in context:
        if not 0 <= i < V:
            raise IndexOutOfRange(f"token index {i} not in [0, {V})")
    d = -1
    if doc is not None and model.mode in ("dm", "dbow"):
        if not 0 <= doc < model.D.shape[0]:
            raise IndexOutOfRange(f"doc index {doc} not in [0, {model.D.shape[0]})")
        d = doc
    inputs = () if model.mode == "dbow" else tuple(context)
    if model.mode == "dbow" and d < 0:
        raise IndexOutOfRange("dbow needs a document index")
    b = hidden(model.W, model.D, inputs, d)
    z = model.W_out.astype(np.float64) @ b
    return softmax(z)


def example_loss_grads(W, W_out, D, inputs, doc, target):
    """Negative log-likelihood of one example and dense gradients (gW, gW_out, gD)."""
    b = hidden(W, D, inputs, doc)
    z = W_out @ b
    p = softmax(z)
    loss = -np.log(p[target])
    dz = p.copy()
    dz[target] -= 1.0
    gW_out = np.outer(dz, b)
    db = W_out.T @ dz
    n_in = len(inputs) + (doc >= 0)
    gW = np.zeros_like(W, dtype=np.float64)
    for i in inputs:
        gW[i] += db / n_in
    gD = None if D is None else np.zeros_like(D, dtype=np.float64)
    if doc >= 0:
        gD[doc] += db / n_in
    return loss, gW, gW_out, gD


def loss_and_grads(W, W_out, D, examples):
    total = 0.0
    gW = np.zeros_like(W, dtype=np.float64)
    gWo = np.zeros_like(W_out, dtype=np.float64)
    gD = None if D is None else np.zeros_like(D, dtype=np.float64)
    for inputs, doc, target in examples:
        loss, a, b, c = example_loss_grads(W, W_out, D, inputs, doc, target)
        total += loss
        gW += a
        gWo += b
        if c is not None:
            gD += c
    return total, gW, gWo, gD


def ns_example_loss_grads(W, W_out, D, inputs, doc, target, negatives):
    """Negative-sampling loss -log s(u_t.b) - sum log s(-u_n.b) and its gradients."""
    b = hidden(W, D, inputs, doc)
    gW_out = np.zeros_like(W_out, dtype=np.float64)
    db = np.zeros_like(b)
    loss = 0.0
    for j, label in [(target, 1.0)] + [(n, 0.0) for n in negatives]:
        f = 1.0 / (1.0 + np.exp(-(W_out[j] @ b)))
        loss -= np.log(f if label else 1.0 - f)
        g = f - label
        gW_out[j] += g * b
        db += g * W_out[j]
    n_in = len(inputs) + (doc >= 0)
    gW = np.zeros_like(W, dtype=np.float64)
    for i in inputs:
        gW[i] += db / n_in
    gD = None if D is None else np.zeros_like(D, dtype=np.float64)
    if doc >= 0:
        gD[doc] += db / n_in
    return loss, gW, gW_out, gD


def corpus_log_likelihood(model, corpus, batch: int = 4096) -> float:
    """Sum of log P(target | inputs) over every full-window pair of ``corpus``."""
    examples = corpus_examples(model, corpus)
    if not examples:
        return 0.0
    W = model.W.astype(np.float64)
    Wo = model.W_out.astype(np.float64)
    D = None if model.D is None else model.D.astype(np.float64)
    total = 0.0
    for start in range(0, len(examples), batch):
        chunk = examples[start:start + batch]
        H = np.stack([hidden(W, D, inp, d) for inp, d, _ in chunk])
        logp = log_softmax(H @ Wo.T)
        targets = np.fromiter((t for _, _, t in chunk), dtype=np.int64, count=len(chunk))
        total += float(logp[np.arange(len(chunk)), targets].sum())
    return total
