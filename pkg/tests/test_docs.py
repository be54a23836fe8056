import pytest

from user2vec.docs import (DocCorpus, TokenDoc, build_cf_docs, build_context2vec_docs, build_corpus,
                           build_item_doc, build_user2vec_docs)
from user2vec.errors import MissingUserMetadata, UnknownApp
from user2vec.ingest import AppMetadata, InteractionSet, UserMetadata
from user2vec.text import bin_app_metadata, normalize_text


def catalog(**descs):
    return {a: AppMetadata(a, d, "Games", 4.0, 50, 0.0, "google") for a, d in descs.items()}


CAT = catalog(a1="cat game fun", a2="dog game", a3="fast flashlight tool")
UMETA = {"u1": UserMetadata("u1", "ios", "London"), "u2": UserMetadata("u2", "android", "Leeds")}


def test_cf_docs():
    c = build_cf_docs(InteractionSet({"u1": ["a3", "a1", "a2"]}))
    assert len(c) == 1
    assert c.docs[0] == TokenDoc("user:u1", ("a1", "a2", "a3"))
    assert c.scheme == "cf"


def test_cf_vocabulary_is_app_set(small_dataset):
    c = build_cf_docs(small_dataset.interactions)
    assert {t for d in c for t in d.tokens} == set(small_dataset.interactions.apps)
    assert c.n_tokens == len(small_dataset.interactions)
    assert len(c) == small_dataset.interactions.n_users


def test_user2vec_concatenation():
    c = build_user2vec_docs(InteractionSet({"u1": ["a1", "a2"]}), CAT)
    assert c.docs[0].tokens == ("cat", "game", "fun", "dog", "game")


def test_user2vec_single_app_identity():
    c = build_user2vec_docs(InteractionSet({"u1": ["a3"]}), CAT)
    assert list(c.docs[0].tokens) == normalize_text("fast flashlight tool")


def test_user2vec_lengths_recount(small_dataset):
    c = build_user2vec_docs(small_dataset.interactions, small_dataset.catalog)
    for d in c:
        apps = small_dataset.interactions.apps_of(d.tag[len("user:"):])
        assert len(d.tokens) == sum(len(normalize_text(small_dataset.catalog[a].description)) for a in apps)


def test_context2vec_structure():
    c = build_context2vec_docs(InteractionSet({"u1": ["a1"]}), CAT, UMETA)
    toks = c.docs[0].tokens
    assert toks[:3] == ("cat", "game", "fun")
    assert toks[3:7] == tuple(bin_app_metadata(CAT["a1"]))
    assert toks[7:] == ("__os=ios", "__city=london")


def test_context2vec_two_apps_user_tokens_once():
    toks = build_context2vec_docs(InteractionSet({"u1": ["a1", "a2"]}), CAT, UMETA).docs[0].tokens
    assert toks.count("__os=ios") == 1 and toks[-2:] == ("__os=ios", "__city=london")
    assert sum(t.startswith("__genre=") for t in toks) == 2


def test_context2vec_missing_metadata():
    with pytest.raises(MissingUserMetadata):
        build_context2vec_docs(InteractionSet({"u3": ["a1"]}), CAT, UMETA)


def test_context2vec_contains_user2vec(small_dataset):
    ds = small_dataset
    u2v = {d.tag: d.tokens for d in build_user2vec_docs(ds.interactions, ds.catalog)}
    c2v = build_context2vec_docs(ds.interactions, ds.catalog, ds.user_meta)
    for d in c2v:
        assert tuple(t for t in d.tokens if not t.startswith("__")) == u2v[d.tag]
        apps = ds.interactions.apps_of(d.tag[len("user:"):])
        assert len(d.tokens) == sum(len(normalize_text(ds.catalog[a].description)) + 4 for a in apps) + 2


def test_item_docs():
    assert build_item_doc("a1", "cf", CAT).tokens == ("a1",)
    assert build_item_doc("a1", "user2vec", CAT).tokens == ("cat", "game", "fun")
    assert build_item_doc("a1", "context2vec", CAT).tokens == ("cat", "game", "fun") + tuple(bin_app_metadata(CAT["a1"]))
    with pytest.raises(UnknownApp):
        build_item_doc("zz", "cf", CAT)


def test_empty_user_documents_dropped(caplog):
    cat = catalog(a1="the and of", a2="42 is", a3="cat game")
    c = build_user2vec_docs(InteractionSet({"u1": ["a1", "a2"], "u2": ["a3"]}), cat)
    assert c.tags == ["user:u2"]
    assert "dropping user u1" in caplog.text


def test_builders_deterministic_and_round_trip(small_dataset, tmp_path):
    ds = small_dataset
    for scheme in ("cf", "user2vec", "context2vec", "descriptions"):
        a = build_corpus(scheme, ds.interactions, ds.catalog, ds.user_meta)
        b = build_corpus(scheme, ds.interactions, ds.catalog, ds.user_meta)
        assert a.to_text() == b.to_text()
        a.save(tmp_path / f"{scheme}.tsv")
        back = DocCorpus.load(tmp_path / f"{scheme}.tsv", scheme)
        assert back.docs == a.docs


def test_duplicate_tags_rejected():
    with pytest.raises(ValueError):
        DocCorpus([TokenDoc("user:u1", ("a",)), TokenDoc("user:u1", ("b",))], "cf")
