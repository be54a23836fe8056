from __future__ import annotations

import logging
import zlib
from typing import Iterable

import numba
import numpy as np

from ..errors import AllTokensOOV, ConfigInvalid, EmptyCorpus, NonFiniteUpdate
from . import _kernels as K
from .model import DOC_MODES, EmbeddingModel, TrainConfig
from .vocab import Vocabulary, build_vocab

log = logging.getLogger(__name__)


def noise_distribution(vocab: Vocabulary, exponent: float = 0.75) -> np.ndarray:
    """Cumulative unigram^exponent distribution used to draw negatives."""
    w = vocab.freqs.astype(np.float64) ** exponent
    cum = np.cumsum(w / w.sum())
    cum[-1] = 1.0
    return cum


def keep_probabilities(vocab: Vocabulary, sample: float) -> np.ndarray:
    if sample <= 0:
        return np.ones(len(vocab))
    f = vocab.freqs.astype(np.float64)
    thresh = sample * f.sum()
    return np.minimum(1.0, (np.sqrt(f / thresh) + 1.0) * thresh / f)


def encode_corpus(vocab: Vocabulary, docs: Iterable) -> tuple[np.ndarray, np.ndarray]:
    seqs = [vocab.encode(getattr(d, "tokens", d)) for d in docs]
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(s) for s in seqs])
    tokens = np.fromiter((t for s in seqs for t in s), dtype=np.int64, count=int(offsets[-1]))
    return tokens, offsets


def init_weights(config: TrainConfig, n_vocab: int, n_docs: int, dtype=np.float32):
    rng = np.random.default_rng(config.seed)
    bound = 0.5 / config.dim
    W = rng.uniform(-bound, bound, size=(n_vocab, config.dim)).astype(dtype)
    W_out = np.zeros((n_vocab, config.dim), dtype=dtype)
    D = None
    if config.mode in DOC_MODES:
        D = rng.uniform(-bound, bound, size=(n_docs, config.dim)).astype(dtype)
    return W, W_out, D


def _run(W, W_out, D, tokens, offsets, config, cum, keep, epochs, lr_start, lr_end, state,
         upd_w, upd_out, upd_d, workers=1):
    mode = K.MODE_CODES[config.mode]
    obj = K.OBJECTIVE_CODES[config.objective]
    P = offsets.shape[0] - 1
    doc_ids = np.arange(P, dtype=np.int64)
    Dk = D if D is not None else np.zeros((1, W.shape[1]), dtype=W.dtype)
    k = config.negative if config.objective == "negative_sampling" else 0
    if workers <= 1 or P < 2:
        stats = np.zeros((epochs, 3))
        err = K.train_serial(W, W_out, Dk, tokens, offsets, doc_ids, mode, obj, config.window, k,
                             cum, keep, lr_start, lr_end, epochs, state, upd_w, upd_out, upd_d, stats)
    else:
        n_chunks = min(workers, P)
        numba.set_num_threads(min(n_chunks, numba.config.NUMBA_NUM_THREADS))
        bounds = np.linspace(0, P, n_chunks + 1).astype(np.int64)
        states = np.concatenate([K.seed_state(int(state[0]) + c) for c in range(n_chunks)])
        cstats = np.zeros((epochs, n_chunks, 3))
        err = K.train_parallel(W, W_out, Dk, tokens, offsets, doc_ids, bounds, mode, obj,
                               config.window, k, cum, keep, lr_start, lr_end, epochs, states,
                               upd_w, upd_out, upd_d, cstats)
        stats = cstats.sum(axis=1)
    if err >= 0:
        raise NonFiniteUpdate(f"non-finite update at step {err}; learning rate too high?")
    return stats


def train(corpus, config: TrainConfig | None = None, vocab: Vocabulary | None = None) -> EmbeddingModel:
    """Train a cbow/sg/dm/dbow model on a DocCorpus (or any sequence of TokenDocs)."""
    config = (config or TrainConfig()).validate()
    docs = list(corpus)
    if not docs:
        raise EmptyCorpus("cannot train on an empty corpus")
    if vocab is None:
        vocab = build_vocab(docs, config.min_count)
    if config.objective == "negative_sampling" and len(vocab) < 2:
        raise ConfigInvalid("negative sampling needs at least two vocabulary entries")
    tokens, offsets = encode_corpus(vocab, docs)
    W, W_out, D = init_weights(config, len(vocab), len(docs))
    stats = _run(W, W_out, D, tokens, offsets, config, noise_distribution(vocab, config.ns_exponent),
                 keep_probabilities(vocab, config.sample), config.epochs, config.lr_start,
                 config.lr_end, K.seed_state(config.seed), True, True, True, config.workers)
    tags = [d.tag for d in docs] if D is not None else None
    model = EmbeddingModel(config, vocab, W, W_out, D, tags)
    model.stats = {
        "epoch_loss": stats[:, 0].tolist(),
        "pairs": int(stats[:, 1].sum()),
        "output_updates": int(stats[:, 2].sum()),
        "tokens_per_epoch": int(offsets[-1]),
    }
    log.info("trained %s/%s: |V|=%d, %d docs, %d pairs", config.mode, config.objective,
             len(vocab), len(docs), model.stats["pairs"])
    return model


def _doc_seed(seed: int, tag: str) -> int:
    return (int(seed) * 1_000_003 + zlib.crc32(tag.encode("utf-8"))) & 0xFFFFFFFF


def infer_doc(model: EmbeddingModel, doc, infer_epochs: int | None = None,
              infer_lr: float | None = None, seed: int | None = None) -> np.ndarray:
    """Fit a fresh document vector for ``doc`` with all model weights frozen.

    The starting vector and sampling stream depend only on ``seed`` and the doc tag.
    """
    cfg = model.config
    if cfg.mode not in DOC_MODES:
        raise ConfigInvalid(f"inference needs a document mode, model is {cfg.mode}")
    tag = getattr(doc, "tag", "")
    seq = model.vocab.encode(getattr(doc, "tokens", doc))
    if not seq:
        raise AllTokensOOV(tag or "document")
    epochs = infer_epochs if infer_epochs is not None else cfg.epochs
    lr = infer_lr if infer_lr is not None else cfg.lr_start
    s = _doc_seed(cfg.seed if seed is None else seed, tag)
    rng = np.random.default_rng(s)
    bound = 0.5 / cfg.dim
    D = rng.uniform(-bound, bound, size=(1, cfg.dim)).astype(model.W.dtype)
    tokens = np.asarray(seq, dtype=np.int64)
    offsets = np.array([0, len(seq)], dtype=np.int64)
    cum = getattr(model, "_cum", None)
    if cum is None:
        cum = noise_distribution(model.vocab, cfg.ns_exponent)
        model._cum = cum
    _run(model.W, model.W_out, D, tokens, offsets, cfg, cum, np.ones(len(model.vocab)),
         epochs, lr, min(cfg.lr_end, lr), K.seed_state(s), False, False, True)
    return D[0]


def infer_docs(model: EmbeddingModel, docs, **kw) -> dict[str, np.ndarray]:
    """Infer every doc; docs that are entirely out of vocabulary are skipped with a warning."""
    out = {}
    for d in docs:
        try:
            out[d.tag] = infer_doc(model, d, **kw)
        except AllTokensOOV:
            log.warning("skipping %s: all tokens out of vocabulary", d.tag)
    return out
