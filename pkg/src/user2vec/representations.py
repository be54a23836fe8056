"""Turn a loaded dataset into per-user vector sets, one per representation method."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from . import baselines
from .docs import build_corpus, build_description_docs, build_item_doc
from .embedding import EmbeddingModel, TrainConfig, infer_docs, train
from .ingest import (
    AppMetadata,
    InteractionSet,
    SeedLabelSet,
    UserMetadata,
    join_and_prune,
    load_app_metadata,
    load_interactions,
    load_seed_labels,
    load_user_metadata,
)
from .lookalike import MetaContext
from .text import DEFAULT_TEXT_CONFIG, TextConfig

log = logging.getLogger(__name__)

DOC2VEC_METHODS = {"d2v_cf": "cf", "user2vec": "user2vec", "context2vec": "context2vec"}
BASE_METHODS = ("tfidf", "lsa", "lda", "word2vec") + tuple(DOC2VEC_METHODS)


@dataclass
class Dataset:
    interactions: InteractionSet
    catalog: Mapping[str, AppMetadata]
    user_meta: Mapping[str, UserMetadata] = field(default_factory=dict)
    labels: SeedLabelSet = field(default_factory=SeedLabelSet)

    @property
    def meta(self) -> MetaContext:
        return MetaContext(self.interactions, self.catalog, self.user_meta)


def load_dataset(interactions, app_meta, user_meta=None, labels=None, min_apps: int = 3) -> Dataset:
    inter = load_interactions(interactions, min_apps)
    catalog = load_app_metadata(app_meta)
    inter = join_and_prune(inter, catalog, min_apps)
    umeta = load_user_metadata(user_meta) if user_meta else {}
    seeds = load_seed_labels(labels, inter) if labels else SeedLabelSet()
    return Dataset(inter, catalog, umeta, seeds)


def load_dataset_dir(path, min_apps: int = 3) -> Dataset:
    p = Path(path)
    return load_dataset(p / "interactions.csv", p / "app_meta.csv", p / "user_meta.csv",
                        p / "labels.csv", min_apps)


@dataclass(frozen=True)
class RepresentationSettings:
    text: TextConfig = DEFAULT_TEXT_CONFIG
    doc2vec: TrainConfig = TrainConfig()
    word2vec: TrainConfig = TrainConfig(mode="sg", min_count=2)
    lsa_k: int = 100
    lsa_seed: int = 0
    lda_k: int = 50
    lda_iters: int = 500
    lda_seed: int = 0
    # per-method overrides of the doc2vec config, e.g. {"d2v_cf": {"min_count": 2}}
    overrides: Mapping[str, Mapping] = field(default_factory=dict)

    def embed_config(self, method: str) -> TrainConfig:
        base = self.word2vec if method == "word2vec" else self.doc2vec
        return replace(base, **dict(self.overrides.get(method, {})))


def description_corpus(ds: Dataset, settings: RepresentationSettings):
    return build_description_docs(ds.catalog, settings.text, apps=ds.interactions.apps)


def train_doc2vec(method: str, ds: Dataset, settings: RepresentationSettings) -> EmbeddingModel:
    corpus = build_corpus(DOC2VEC_METHODS[method], ds.interactions, ds.catalog, ds.user_meta, settings.text)
    return train(corpus, settings.embed_config(method))


def build_representation(method: str, ds: Dataset, settings: RepresentationSettings | None = None,
                         return_model: bool = False):
    """User vectors (keyed by user tag) for one base method."""
    settings = settings or RepresentationSettings()
    model = None
    if method in DOC2VEC_METHODS:
        model = train_doc2vec(method, ds, settings)
        vecs = {t: v.astype(np.float64) for t, v in model.doc_vectors().items()}
    elif method == "word2vec":
        model = train(description_corpus(ds, settings), settings.embed_config("word2vec"))
        vecs = baselines.w2v_centroid_user_vectors(ds.interactions, ds.catalog, model, settings.text)
    elif method in ("tfidf", "lsa"):
        model = baselines.tfidf_fit(description_corpus(ds, settings))
        if method == "tfidf":
            vecs = baselines.tfidf_user_vectors(ds.interactions, model)
        else:
            model = baselines.lsa_fit(model, settings.lsa_k, seed=settings.lsa_seed)
            vecs = baselines.centroid_user_vectors(ds.interactions, model.vectors())
    elif method == "lda":
        model = baselines.lda_fit(description_corpus(ds, settings), settings.lda_k, iters=settings.lda_iters,
                                  seed=settings.lda_seed)
        vecs = baselines.centroid_user_vectors(ds.interactions, model.vectors())
    else:
        raise ValueError(f"unknown representation {method!r}; choose from {BASE_METHODS}")
    return (vecs, model) if return_model else vecs


def item_vectors(model: EmbeddingModel, scheme: str, ds: Dataset,
                 settings: RepresentationSettings | None = None, **infer_kw) -> dict[str, np.ndarray]:
    """Inferred vectors for every app in the interaction set, keyed by app tag."""
    settings = settings or RepresentationSettings()
    docs = [build_item_doc(a, scheme, ds.catalog, settings.text) for a in ds.interactions.apps]
    return infer_docs(model, docs, **infer_kw)
