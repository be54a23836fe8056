import csv
import hashlib
import json
from collections import Counter

import numpy as np
import pytest

from user2vec.errors import InfeasibleConfig
from user2vec.ingest import AGE_GROUPS, GENDERS, TASKS, load_interactions, load_seed_labels, load_user_metadata
from user2vec.lookalike import auc_roc
from user2vec.synth import SynthConfig, generate, n_archetypes, oracle_scores, task_posterior


def rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))[1:]


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth_default")
    data = generate(SynthConfig())
    data.write(d)
    return d, data


def test_zero_users(tmp_path):
    data = generate(SynthConfig(n_users=0))
    paths = data.write(tmp_path)
    assert rows(paths["interactions.csv"]) == [] and rows(paths["labels.csv"]) == []
    m = json.loads(paths["manifest.json"].read_text())
    assert m["users"] == {} and m["n_interactions"] == 0 and len(m["app_genre"]) == 300


def test_identity_affinity_gives_single_genre_users():
    cfg = SynthConfig(n_users=100, n_apps=200, n_genres=n_archetypes(),
                      affinity=tuple(np.eye(n_archetypes()).ravel()), seed=2)
    data = generate(cfg)
    genre = data.manifest["app_genre"]
    by_user: dict[str, set] = {}
    for u, a in data.interactions:
        by_user.setdefault(u, set()).add(genre[a])
    assert all(len(g) == 1 for g in by_user.values())


def test_infeasible_configs():
    with pytest.raises(InfeasibleConfig):
        generate(SynthConfig(n_apps=10, apps_max=12))
    with pytest.raises(InfeasibleConfig):
        generate(SynthConfig(apps_min=2))
    # only one genre reachable, holding 2 apps, while users need up to 12
    with pytest.raises(InfeasibleConfig):
        generate(SynthConfig(n_apps=20, n_genres=10, affinity=tuple(np.eye(10).ravel())))


def test_same_seed_byte_identical(tmp_path):
    digests = []
    for run in ("a", "b"):
        paths = generate(SynthConfig(n_users=200, n_apps=50, seed=9)).write(tmp_path / run)
        digests.append({n: hashlib.sha256(p.read_bytes()).hexdigest() for n, p in paths.items()})
    assert digests[0] == digests[1]
    other = generate(SynthConfig(n_users=200, n_apps=50, seed=10)).files()
    assert hashlib.sha256(other["interactions.csv"].encode()).hexdigest() != digests[0]["interactions.csv"]


def test_every_user_has_min_apps(default_run):
    d, data = default_run
    counts = Counter(u for u, _ in rows(d / "interactions.csv"))
    assert len(counts) == 2000 and min(counts.values()) >= 3
    assert load_interactions(d / "interactions.csv", min_apps=3).n_users == 2000


def test_label_marginals_near_priors(default_run):
    d, data = default_run
    labs = rows(d / "labels.csv")
    assert len(labs) == 600
    cfg = SynthConfig()
    for g, p in zip(GENDERS, cfg.gender_priors):
        assert abs(sum(r[1] == g for r in labs) / len(labs) - p) <= 0.03
    for a, p in zip(AGE_GROUPS, cfg.age_priors):
        assert abs(sum(r[2] == a for r in labs) / len(labs) - p) <= 0.03


def test_manifest_matches_csvs(default_run):
    d, data = default_run
    m = json.loads((d / "manifest.json").read_text())
    apps = rows(d / "app_meta.csv")
    assert {r[0]: r[2] for r in apps} == m["app_genre"]
    assert dict(Counter(r[2] for r in apps)) == m["genre_counts"]
    assert len(rows(d / "interactions.csv")) == m["n_interactions"]
    labs = rows(d / "labels.csv")
    recount = Counter(r[1] for r in labs) + Counter(r[2] for r in labs)
    assert {k: recount.get(k, 0) for k in m["label_counts"]} == m["label_counts"]
    for ifa, g, a in labs:
        u = m["users"][ifa]
        assert u["labeled"] and (u["gender"], u["age_group"]) == (g, a)
    assert sum(u["labeled"] for u in m["users"].values()) == len(labs)


def test_genres_round_robin_and_descriptions_normalize(default_run):
    _, data = default_run
    genres = data.manifest["genres"]
    assert [a["genre"] for a in data.apps[:12]] == genres * 2
    words = set(data.manifest["noise_words"]) | {w for ws in data.manifest["genre_words"].values() for w in ws}
    for a in data.apps[:20]:
        assert set(a["description"].split()) <= words


def test_genre_word_fraction(default_run):
    _, data = default_run
    vocab = {g: set(ws) for g, ws in data.manifest["genre_words"].items()}
    hit = total = 0
    for a in data.apps:
        toks = a["description"].split()
        hit += sum(t in vocab[a["genre"]] for t in toks)
        total += len(toks)
    assert abs(hit / total - 0.7) < 0.02


def test_oracle_ceiling_near_target(default_run):
    d, data = default_run
    inter = load_interactions(d / "interactions.csv")
    labels = load_seed_labels(d / "labels.csv", inter)
    users = list(labels.users)
    post = oracle_scores(data.manifest, inter, load_user_metadata(d / "user_meta.csv"), users)["posterior"]
    assert np.allclose(post.sum(axis=1), 1.0)
    aucs = [auc_roc(task_posterior(post, t), labels.task_vector(t, users)) for t in TASKS]
    assert 0.8 <= np.mean(aucs) <= 0.9
