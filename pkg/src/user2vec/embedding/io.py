"""Binary model files.

Layout (little-endian): magic ``NPLM``, version u32, mode u8, objective u8, N u32,
|V| u32, |P| u32; vocabulary entries (u32 length, UTF-8 bytes, u64 frequency);
W (|V| x N), W' (N x |V|), D (|P| x N) as row-major f32; then document tags
(u32 length + UTF-8 each) and the train config as length-prefixed JSON.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatVersionMismatch, IoFailure
from .model import MODES, OBJECTIVES, EmbeddingModel, TrainConfig
from .vocab import Vocabulary

MAGIC = b"NPLM"
VERSION = 1
_HEADER = struct.Struct("<4sIBBIII")


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def to_bytes(model: EmbeddingModel) -> bytes:
    V, N = model.W.shape
    P = 0 if model.D is None else model.D.shape[0]
    parts = [_HEADER.pack(MAGIC, VERSION, MODES.index(model.mode), OBJECTIVES.index(model.objective), N, V, P)]
    for tok, freq in zip(model.vocab.tokens, model.vocab.freqs):
        parts.append(_pack_str(tok) + struct.pack("<Q", int(freq)))
    parts.append(np.ascontiguousarray(model.W, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(model.W_out.T, dtype="<f4").tobytes())
    if P:
        parts.append(np.ascontiguousarray(model.D, dtype="<f4").tobytes())
        parts.extend(_pack_str(t) for t in model.doc_tags)
    parts.append(_pack_str(json.dumps(model.config.to_dict(), sort_keys=True)))
    return b"".join(parts)


def save_model(model: EmbeddingModel, path) -> None:
    try:
        Path(path).write_bytes(to_bytes(model))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise IoFailure("truncated model file")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        raw = self.take(rows * cols * 4)
        return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float32)


def read_header(path) -> dict:
    """Parse only the fixed header; ``compatible`` tells whether this reader can load it."""
    try:
        raw = Path(path).read_bytes()[:_HEADER.size]
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(raw) < _HEADER.size:
        raise IoFailure("truncated model header")
    magic, version, mode, obj, N, V, P = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatVersionMismatch(f"bad magic {magic!r}")
    return {"version": version, "mode": MODES[mode] if mode < len(MODES) else mode,
            "objective": OBJECTIVES[obj] if obj < len(OBJECTIVES) else obj,
            "dim": N, "vocab_size": V, "n_docs": P, "compatible": version == VERSION}


def from_bytes(buf: bytes) -> EmbeddingModel:
    r = _Reader(buf)
    if len(buf) < _HEADER.size:
        raise IoFailure("truncated model header")
    magic, version, mode, obj, N, V, P = r.unpack(_HEADER.format)
    if magic != MAGIC:
        raise FormatVersionMismatch(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatVersionMismatch(f"file version {version}, reader version {VERSION}")
    tokens, freqs = [], []
    for _ in range(V):
        tokens.append(r.string())
        freqs.append(r.unpack("<Q")[0])
    W = r.matrix(V, N)
    W_out = np.ascontiguousarray(r.matrix(N, V).T)
    D, tags = None, None
    if P:
        D = r.matrix(P, N)
        tags = [r.string() for _ in range(P)]
    config = TrainConfig.from_dict(json.loads(r.string()))
    if r.pos != len(buf):
        raise FormatVersionMismatch("trailing bytes after model payload")
    if config.mode != MODES[mode] or config.objective != OBJECTIVES[obj]:
        raise FormatVersionMismatch("header and embedded config disagree")
    vocab = Vocabulary(tokens, np.array(freqs, dtype=np.int64), config.min_count)
    return EmbeddingModel(config, vocab, W, W_out, D, tags)


def load_model(path) -> EmbeddingModel:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return from_bytes(buf)
