from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigInvalid, UnknownTag
from .vocab import Vocabulary

MODES = ("cbow", "sg", "dm", "dbow")
DOC_MODES = ("dm", "dbow")
OBJECTIVES = ("softmax", "negative_sampling")


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "dbow"
    objective: str = "negative_sampling"
    dim: int = 100
    window: int = 5
    epochs: int = 20
    lr_start: float = 0.025
    lr_end: float = 0.0001
    min_count: int = 5
    negative: int = 5
    ns_exponent: float = 0.75
    # frequent-token subsampling threshold; 0 disables it
    sample: float = 0.0
    seed: int = 1
    workers: int = 1

    def validate(self) -> "TrainConfig":
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}")
        if self.objective not in OBJECTIVES:
            problems.append(f"objective must be one of {OBJECTIVES}")
        if self.dim < 1:
            problems.append("dim must be >= 1")
        if self.window < 1:
            problems.append("window must be >= 1")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.objective == "negative_sampling" and self.negative < 1:
            problems.append("negative must be >= 1 for negative sampling")
        if not (self.lr_start > 0 and 0 <= self.lr_end <= self.lr_start):
            problems.append("need lr_start > 0 and 0 <= lr_end <= lr_start")
        if self.min_count < 1:
            problems.append("min_count must be >= 1")
        if self.sample < 0:
            problems.append("sample must be >= 0")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigInvalid(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EmbeddingModel:
    """Vocabulary plus the three weight matrices of one trained model.

    ``W`` holds input word vectors (|V| x N). Output vectors are stored row-wise in
    ``W_out`` (|V| x N); ``W_prime`` gives the N x |V| orientation. ``D`` holds one
    row per training document and is ``None`` for the word-only modes.
    """

    config: TrainConfig
    vocab: Vocabulary
    W: np.ndarray
    W_out: np.ndarray
    D: np.ndarray | None = None
    doc_tags: list[str] | None = None

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def objective(self) -> str:
        return self.config.objective

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def W_prime(self) -> np.ndarray:
        return self.W_out.T

    def is_finite(self) -> bool:
        mats = [self.W, self.W_out] + ([self.D] if self.D is not None else [])
        return all(bool(np.isfinite(m).all()) for m in mats)

    def word_vector(self, token: str) -> np.ndarray:
        try:
            return self.W[self.vocab.index[token]]
        except KeyError:
            raise UnknownTag(token) from None

    def doc_vector(self, tag: str) -> np.ndarray:
        if self.D is None:
            raise UnknownTag(f"{tag} (model has no document vectors)")
        try:
            return self.D[self._doc_index()[tag]]
        except KeyError:
            raise UnknownTag(tag) from None

    def _doc_index(self) -> dict[str, int]:
        idx = getattr(self, "_doc_idx_cache", None)
        if idx is None:
            idx = {t: i for i, t in enumerate(self.doc_tags or [])}
            self._doc_idx_cache = idx
        return idx

    def doc_vectors(self) -> dict[str, np.ndarray]:
        if self.D is None:
            return {}
        return {t: self.D[i] for i, t in enumerate(self.doc_tags)}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingModel):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()

        return (
            self.config == other.config
            and self.vocab == other.vocab
            and same(self.W, other.W)
            and same(self.W_out, other.W_out)
            and same(self.D, other.D)
            and self.doc_tags == other.doc_tags
        )
