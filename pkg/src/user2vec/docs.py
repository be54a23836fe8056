"""Builders for the per-user documents of the cf / user2vec / context2vec schemes."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import EmptyDocument, MalformedRecord, MissingUserMetadata, UnknownApp
from .ingest import AppMetadata, InteractionSet, UserMetadata
from .text import DEFAULT_TEXT_CONFIG, TextConfig, bin_app_metadata, bin_user_metadata, normalize_text

log = logging.getLogger(__name__)

SCHEMES = ("cf", "user2vec", "context2vec", "descriptions")
USER_PREFIX = "user:"
APP_PREFIX = "app:"


def user_tag(user: str) -> str:
    return USER_PREFIX + user


def app_tag(app: str) -> str:
    return APP_PREFIX + app


def strip_tag(tag: str) -> str:
    return tag.split(":", 1)[1] if ":" in tag else tag


@dataclass(frozen=True)
class TokenDoc:
    tag: str
    tokens: tuple[str, ...]


@dataclass
class DocCorpus:
    docs: list[TokenDoc]
    scheme: str
    vocab_hint: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if len({d.tag for d in self.docs}) != len(self.docs):
            raise ValueError("document tags must be unique")
        if not self.vocab_hint:
            for d in self.docs:
                self.vocab_hint.update(d.tokens)

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)

    @property
    def tags(self) -> list[str]:
        return [d.tag for d in self.docs]

    @property
    def n_tokens(self) -> int:
        return sum(len(d.tokens) for d in self.docs)

    def to_text(self) -> str:
        return "".join(f"{d.tag}\t{' '.join(d.tokens)}\n" for d in self.docs)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path, scheme: str = "unknown") -> "DocCorpus":
        docs = []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                tag, sep, body = line.partition("\t")
                if not sep or not tag:
                    raise MalformedRecord(path, i, "expected tag<TAB>tokens")
                docs.append(TokenDoc(tag, tuple(body.split())))
        return cls(docs, scheme)


class _DescriptionCache:
    def __init__(self, catalog: Mapping[str, AppMetadata], cfg: TextConfig):
        self.catalog = catalog
        self.cfg = cfg
        self._cache: dict[str, tuple[str, ...]] = {}

    def __getitem__(self, app: str) -> tuple[str, ...]:
        toks = self._cache.get(app)
        if toks is None:
            if app not in self.catalog:
                raise UnknownApp(app)
            toks = tuple(normalize_text(self.catalog[app].description, self.cfg))
            self._cache[app] = toks
        return toks


def build_cf_docs(interactions: InteractionSet) -> DocCorpus:
    return DocCorpus([TokenDoc(user_tag(u), tuple(apps)) for u, apps in interactions.items()], "cf")


def build_description_docs(catalog: Mapping[str, AppMetadata], cfg: TextConfig = DEFAULT_TEXT_CONFIG,
                           apps: Sequence[str] | None = None) -> DocCorpus:
    """One document per app; apps whose description normalizes to nothing are skipped."""
    desc = _DescriptionCache(catalog, cfg)
    docs = []
    for app in sorted(apps if apps is not None else catalog):
        toks = desc[app]
        if toks:
            docs.append(TokenDoc(app_tag(app), toks))
        else:
            log.warning("app %s has an empty normalized description", app)
    return DocCorpus(docs, "descriptions")


def _user_docs(interactions, unit, scheme, suffix=None) -> DocCorpus:
    docs = []
    for u, apps in interactions.items():
        toks: list[str] = []
        for a in apps:
            toks.extend(unit(a))
        if not any(not t.startswith("__") for t in toks):
            log.warning("dropping user %s: %s", u, EmptyDocument(u))
            continue
        if suffix is not None:
            toks.extend(suffix(u))
        docs.append(TokenDoc(user_tag(u), tuple(toks)))
    return DocCorpus(docs, scheme)


def build_user2vec_docs(interactions: InteractionSet, catalog: Mapping[str, AppMetadata],
                        cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> DocCorpus:
    desc = _DescriptionCache(catalog, cfg)
    return _user_docs(interactions, lambda a: desc[a], "user2vec")


def build_context2vec_docs(interactions: InteractionSet, catalog: Mapping[str, AppMetadata],
                           user_meta: Mapping[str, UserMetadata],
                           cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> DocCorpus:
    missing = [u for u in interactions.users if u not in user_meta]
    if missing:
        raise MissingUserMetadata(missing[0])
    desc = _DescriptionCache(catalog, cfg)
    app_meta = {}

    def unit(a):
        if a not in app_meta:
            app_meta[a] = bin_app_metadata(catalog[a], cfg)
        return list(desc[a]) + app_meta[a]

    return _user_docs(interactions, unit, "context2vec", lambda u: bin_user_metadata(user_meta[u]))


def build_item_doc(app: str, scheme: str, catalog: Mapping[str, AppMetadata],
                   cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> TokenDoc:
    if app not in catalog:
        raise UnknownApp(app)
    if scheme == "cf":
        toks: tuple[str, ...] = (app,)
    elif scheme in ("user2vec", "descriptions"):
        toks = tuple(normalize_text(catalog[app].description, cfg))
    elif scheme == "context2vec":
        toks = tuple(normalize_text(catalog[app].description, cfg)) + tuple(bin_app_metadata(catalog[app], cfg))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return TokenDoc(app_tag(app), toks)


def build_corpus(scheme: str, interactions: InteractionSet, catalog=None, user_meta=None,
                 cfg: TextConfig = DEFAULT_TEXT_CONFIG) -> DocCorpus:
    if scheme == "cf":
        return build_cf_docs(interactions)
    if scheme == "user2vec":
        return build_user2vec_docs(interactions, catalog, cfg)
    if scheme == "context2vec":
        return build_context2vec_docs(interactions, catalog, user_meta, cfg)
    if scheme == "descriptions":
        return build_description_docs(catalog, cfg, apps=interactions.apps)
    raise ValueError(f"unknown scheme {scheme!r}")
