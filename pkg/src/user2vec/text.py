"""Description tokenization/normalization and metadata binning into tokens."""
from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable

from .ingest import AppMetadata, UserMetadata
from .stemmer import stem

META_PREFIX = "__"

_WORD_RE = re.compile(r"\w+")
_SPACE_RE = re.compile(r"\s+")


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    text = resources.files("user2vec").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


@dataclass(frozen=True)
class TextConfig:
    min_token_len: int = 3
    # price bins: 0 -> free, (0, e1] -> low, (e1, e2] -> mid, > e2 -> high
    price_edges: tuple[float, float] = (1.0, 5.0)
    price_labels: tuple[str, str, str, str] = ("free", "low", "mid", "high")
    rating_step: float = 0.5
    pop_base: int = 10
    max_stem_passes: int = 10
    extra_stopwords: frozenset[str] = field(default_factory=frozenset)


DEFAULT_TEXT_CONFIG = TextConfig()


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text)


def _stem_fixpoint(token: str, passes: int) -> str:
    for _ in range(passes):
        nxt = stem(token)
        if nxt == token:
            break
        token = nxt
    return token


def _keep(token: str, cfg: TextConfig, stop: frozenset[str]) -> bool:
    return (
        len(token) >= cfg.min_token_len
        and not token.isdigit()
        and token not in stop
        and token not in cfg.extra_stopwords
    )


def normalize(candidates: Iterable[str], cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> list[str]:
    """Lowercase, drop stopwords/short/numeric tokens, stem.

    Stemming is iterated to a fixed point and the filters are re-applied after it,
    which makes the function idempotent. Tokens containing the reserved metadata
    prefix are dropped.
    """
    stop = stopwords()
    out = []
    for raw in candidates:
        tok = raw.lower()
        if META_PREFIX in tok or tok.isdigit() or tok in stop:
            continue
        tok = _stem_fixpoint(tok, cfg.max_stem_passes)
        if _keep(tok, cfg, stop):
            out.append(tok)
    return out


def normalize_text(text: str, cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> list[str]:
    return normalize(tokenize(text), cfg)


def _slug(value: str) -> str:
    return _SPACE_RE.sub("_", value.strip().lower())


def price_bin(price: float, cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> str:
    if price <= 0.0:
        return cfg.price_labels[0]
    # bisect_left gives right-closed intervals: 1.0 -> low, 5.0 -> mid
    return cfg.price_labels[1 + bisect.bisect_left(cfg.price_edges, price)]


def rating_bin(avg_rating: float, cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> str:
    step = cfg.rating_step
    return f"{math.floor(avg_rating / step + 0.5) * step:.1f}"


def popularity_bin(num_ratings: int, cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> str:
    if cfg.pop_base == 10:
        # exact integer floor(log10(n + 1))
        return str(len(str(num_ratings + 1)) - 1)
    return str(math.floor(math.log(num_ratings + 1, cfg.pop_base)))


def bin_app_metadata(meta: AppMetadata, cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> list[str]:
    return [
        f"{META_PREFIX}genre={_slug(meta.genre)}",
        f"{META_PREFIX}price={price_bin(meta.price, cfg)}",
        f"{META_PREFIX}rating={rating_bin(meta.avg_rating, cfg)}",
        f"{META_PREFIX}pop={popularity_bin(meta.num_ratings, cfg)}",
    ]


def bin_user_metadata(meta: UserMetadata) -> list[str]:
    return [f"{META_PREFIX}os={_slug(meta.os)}", f"{META_PREFIX}city={_slug(meta.city)}"]
