from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import EmptyVocabulary


@dataclass
class Vocabulary:
    tokens: list[str]
    freqs: np.ndarray  # int64, aligned with tokens
    min_count: int = 1
    index: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=np.int64)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.tokens == other.tokens
            and np.array_equal(self.freqs, other.freqs)
            and self.min_count == other.min_count
        )

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to indices, silently skipping out-of-vocabulary ones."""
        idx = self.index
        return [idx[t] for t in tokens if t in idx]


def build_vocab(corpus, min_count: int = 5) -> Vocabulary:
    """Count tokens over ``corpus`` (a DocCorpus or any iterable of token sequences).

    Order is by descending frequency, ties broken by the token string.
    """
    counts: Counter = Counter()
    n_docs = 0
    for doc in corpus:
        counts.update(getattr(doc, "tokens", doc))
        n_docs += 1
    if n_docs == 0:
        raise EmptyVocabulary("empty corpus")
    kept = sorted(((t, c) for t, c in counts.items() if c >= min_count), key=lambda tc: (-tc[1], tc[0]))
    if not kept:
        raise EmptyVocabulary(f"no token reaches min_count={min_count}")
    return Vocabulary([t for t, _ in kept], np.array([c for _, c in kept], dtype=np.int64), min_count)
