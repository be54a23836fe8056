import json

import numpy as np
import pytest

from oracles import brute_auc, central_diff
from user2vec.errors import EmptyIntersection, FoldClassStarvation, SingleClassEvalSet, SingleClassTrainingSet
from user2vec.ingest import TASKS, InteractionSet
from user2vec.lookalike import (ExperimentReport, SuiteConfig, assemble_features, auc_roc, grid_search_cv,
                                logistic_grad, logistic_loss, parse_method, run_suite, split_train_test,
                                stratified_folds, train_logreg)


# ------------------------------------------------------------------ AUC

def test_auc_examples():
    assert auc_roc([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == 0.75
    assert auc_roc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    assert auc_roc([5, 4, 3, 2], [1, 1, 0, 0]) == 1.0
    with pytest.raises(SingleClassEvalSet):
        auc_roc([1, 2], [1, 1])


def test_auc_matches_pairwise_oracle_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = rng.integers(0, 6, n).astype(float)
        assert auc_roc(s, y) == brute_auc(s, y)


def test_auc_monotone_invariance_and_complement():
    rng = np.random.default_rng(1)
    s = rng.standard_normal(40)
    y = np.arange(40) % 2
    a = auc_roc(s, y)
    assert auc_roc(np.exp(3 * s) + 7, y) == a
    assert auc_roc(-s, y) + a == pytest.approx(1.0, abs=1e-15)


# ------------------------------------------------------------------ logistic regression

def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 5))
    y = (rng.random(30) < 0.4).astype(float)
    theta = rng.standard_normal(6)
    for lam in (0.0, 0.7):
        num = central_diff(lambda: logistic_loss(theta, X, y, lam), theta)
        ana = logistic_grad(theta, X, y, lam)
        assert np.linalg.norm(num - ana) / np.linalg.norm(ana) < 1e-5


def test_separable_two_points():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0, 1])
    m = train_logreg(X, y, lam=1.0)
    assert m.converged
    assert list(m.predict_proba(X) > 0.5) == [False, True]
    assert m.loss_final <= m.loss_init


def test_separable_set_fully_classified():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 3))
    y = (X @ np.array([2.0, -1.0, 0.5]) > 0).astype(int)
    m = train_logreg(X, y, lam=0.01, max_iters=2000)
    assert np.all((m.decision_function(X) > 0) == y.astype(bool))


def test_heavy_regularization_leaves_prior_intercept():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((200, 4))
    y = (rng.random(200) < 0.3).astype(int)
    m = train_logreg(X, y, lam=1e6)
    assert np.linalg.norm(m.weights) < 1e-2
    assert m.predict_proba(np.zeros((1, 4)))[0] == pytest.approx(y.mean(), abs=1e-3)


def test_single_class_rejected_and_nonconvergence_flagged():
    with pytest.raises(SingleClassTrainingSet):
        train_logreg(np.ones((3, 1)), np.zeros(3), 1.0)
    rng = np.random.default_rng(5)
    X = rng.standard_normal((50, 3))
    y = (X[:, 0] > 0).astype(int)
    m = train_logreg(X, y, lam=1e-6, max_iters=3)
    assert not m.converged and m.n_iter == 3 and m.loss_final < m.loss_init


# ------------------------------------------------------------------ CV

def noisy_task(n=400, d=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    y = (X @ w + rng.standard_normal(n) * 2.0 > 0).astype(int)
    return X, y


def test_folds_stratified_and_deterministic():
    y = np.array([0] * 23 + [1] * 12)
    f1, f2 = stratified_folds(y, 5, 9), stratified_folds(y, 5, 9)
    assert np.array_equal(f1, f2)
    for f in range(5):
        assert (y[f1 == f] == 1).sum() in (2, 3)
    with pytest.raises(FoldClassStarvation):
        stratified_folds(np.array([0] * 10 + [1] * 2), 5, 0)


def test_grid_singleton_and_duplicates():
    X, y = noisy_task(120)
    assert grid_search_cv(X, y, [3.0])[0] == 3.0
    a = grid_search_cv(X, y, [0.1, 1.0, 10.0])
    b = grid_search_cv(X, y, [10.0, 0.1, 1.0, 1.0, 0.1])
    assert a[0] == b[0] and a[1] == b[1]


def test_cv_choice_close_to_best_on_test():
    X, y = noisy_task(600, seed=7)
    tr, te = np.arange(600) < 450, np.arange(600) >= 450
    grid = (0.01, 0.1, 1.0, 10.0, 100.0)
    best, _ = grid_search_cv(X[tr], y[tr], grid)
    test_auc = {lam: auc_roc(train_logreg(X[tr], y[tr], lam).decision_function(X[te]), y[te]) for lam in grid}
    assert max(test_auc.values()) - test_auc[best] <= 0.03


# ------------------------------------------------------------------ features

INTER = InteractionSet({"u1": ["a", "b", "c"], "u2": ["a", "b", "c", "d"], "u3": ["a", "b", "c", "d", "e"]})


def test_none_condition_is_baseline_only():
    fm = assemble_features(["u1", "u2", "u3"], {}, False, INTER)
    assert fm.blocks == [("baseline", 0, 1)]
    assert fm.X.shape == (3, 1)


def test_block_widths_and_order():
    rng = np.random.default_rng(0)
    srcs = {"tfidf": {f"user:u{i}": rng.standard_normal(8) for i in (1, 2, 3)},
            "d2v_cf": {f"user:u{i}": rng.standard_normal(16) for i in (1, 2, 3)}}
    fm = assemble_features(["u1", "u2", "u3"], srcs, False, INTER)
    assert fm.blocks == [("baseline", 0, 1), ("tfidf", 1, 9), ("d2v_cf", 9, 25)]
    assert fm.X.shape == (3, 25)


def test_standardized_on_train_rows_only():
    rng = np.random.default_rng(1)
    users = [f"u{i}" for i in range(40)]
    inter = InteractionSet({u: [f"a{j}" for j in range(3 + i % 5)] for i, u in enumerate(users)})
    src = {"v": {f"user:{u}": rng.standard_normal(3) * 4 + 2 for u in users}}
    train_rows = np.arange(30)
    fm = assemble_features(users, src, False, inter, train_rows=train_rows)
    tr = fm.X[train_rows]
    assert np.all(np.abs(tr.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(tr.var(axis=0) - 1) < 1e-6)
    assert np.abs(fm.X[30:].mean(axis=0)).max() > 1e-6


def test_users_missing_from_a_source_are_dropped():
    src = {"v": {"user:u1": np.ones(2), "user:u3": np.ones(2) * 2}}
    assert assemble_features(["u1", "u2", "u3"], src, False, INTER).users == ["u1", "u3"]
    with pytest.raises(EmptyIntersection):
        assemble_features(["u2"], src, False, INTER)


def test_meta_block(small_dataset):
    ds = small_dataset
    users = list(ds.labels.users)[:20]
    fm = assemble_features(users, {}, True, ds.interactions, ds.meta)
    meta = fm.block("meta")
    onehot = ~fm.continuous[1:]
    # each user has exactly one os and one city
    assert np.all(meta[:, onehot].sum(axis=1) == 2)
    assert fm.column_names[1].startswith("os=") and "mean_price" in fm.column_names


def test_parse_method():
    assert parse_method("tfidf+d2v_cf+meta") == (["tfidf", "d2v_cf"], True)
    assert parse_method("none") == ([], False)


# ------------------------------------------------------------------ suite

def test_split_is_seeded_and_stratified(small_dataset):
    users = list(small_dataset.labels.users)
    a = split_train_test(users, small_dataset.labels, 0.2, 3)
    assert np.array_equal(a, split_train_test(users, small_dataset.labels, 0.2, 3))
    assert abs(a.mean() - 0.2) < 0.05


@pytest.fixture(scope="module")
def suite_report(small_dataset):
    ds = small_dataset
    rng = np.random.default_rng(0)
    reps = {"rand": {f"user:{u}": rng.standard_normal(4) for u in ds.interactions.users}}
    return run_suite(SuiteConfig(methods=("none", "rand", "rand+meta"), folds=3), ds.labels, ds.interactions,
                     reps, ds.meta)


def test_suite_layout(suite_report):
    r = suite_report
    assert r.methods == ["none", "rand", "rand+meta"]
    assert r.tasks == list(TASKS) and len(TASKS) == 9
    assert all(r.delta("none", t) == 0 for t in r.tasks)
    for m in r.methods:
        assert r.mean_delta(m) == pytest.approx(np.mean([r.auc[m][t] - r.auc["none"][t] for t in r.tasks]))
    lines = r.to_csv().strip().splitlines()
    assert len(lines) == 1 + 9 + 1 and lines[-1].startswith("Average")
    assert len(r.to_csv("delta").strip().splitlines()) == 11


def test_report_round_trip_and_pretty(suite_report):
    d = json.loads(suite_report.to_json())
    back = ExperimentReport.from_dict(d)
    assert back.to_json() == suite_report.to_json()
    text = suite_report.pretty()
    assert "| AUC-ROC" in text and "Average" in text and "zero-baseline" in text


def test_none_only_suite(small_dataset):
    ds = small_dataset
    r = run_suite(SuiteConfig(methods=("none",), folds=3), ds.labels, ds.interactions, {})
    assert r.methods == ["none"]
    assert all(r.delta("none", t) == 0 for t in r.tasks)


def test_common_split_across_methods(small_dataset):
    # a source that covers only half the users shrinks every method's rows, not just its own
    ds = small_dataset
    half = {f"user:{u}": np.ones(2) + i for i, u in enumerate(ds.interactions.users) if i % 2 == 0}
    r = run_suite(SuiteConfig(methods=("none", "half"), folds=3), ds.labels, ds.interactions, {"half": half})
    assert r.n_train + r.n_test == sum(1 for u in ds.labels.users if f"user:{u}" in half)
