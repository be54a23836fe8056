"""Supervised look-alike evaluation: 9 binary logistic-regression tasks scored by AUC-ROC."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .docs import user_tag
from .errors import (
    EmptyIntersection,
    FoldClassStarvation,
    SingleClassEvalSet,
    SingleClassTrainingSet,
    SourceMissingUser,
)
from .ingest import AGE_GROUPS, GENDERS, TASKS, AppMetadata, InteractionSet, SeedLabelSet, UserMetadata

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
BASELINE_DESCRIPTION = (
    "zero-baseline 'none': model intercept + log(1 + number of distinct apps used); "
    "every other method adds its feature blocks on top of this block"
)


# ---------------------------------------------------------------- logistic regression

def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss(theta: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """(1/n) * (sum of log-losses + lam/2 * |w|^2); the intercept theta[-1] is unpenalized."""
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    nll = np.logaddexp(0.0, z) - y * z
    return float((nll.sum() + 0.5 * lam * (w @ w)) / len(y))


def logistic_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    w, b = theta[:-1], theta[-1]
    r = _sigmoid(X @ w + b) - y
    g = np.empty_like(theta)
    g[:-1] = (X.T @ r + lam * w) / len(y)
    g[-1] = r.sum() / len(y)
    return g


@dataclass
class LogRegModel:
    weights: np.ndarray
    intercept: float
    lam: float
    n_iter: int
    converged: bool
    loss_init: float
    loss_final: float
    grad_norm: float

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(X))


def train_logreg(X: np.ndarray, y: np.ndarray, lam: float, max_iters: int = 500, tol: float = 1e-6) -> LogRegModel:
    """Full-batch gradient descent with Armijo backtracking, starting from zero.

    The step is scaled per coordinate by the loss's curvature bound
    (x_j^2 / 4 + lam) / n, so a large penalty on the weights does not starve the
    unpenalized intercept of step size. Stops when the gradient norm drops below
    ``tol``; hitting ``max_iters`` first leaves ``converged=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet(f"only class {y[0] if len(y) else None!r} present")
    n = len(y)
    precond = np.empty(X.shape[1] + 1)
    precond[:-1] = 1.0 / (0.25 * (X * X).sum(axis=0) / n + lam / n + 1e-12)
    precond[-1] = 4.0
    theta = np.zeros(X.shape[1] + 1)
    f = logistic_loss(theta, X, y, lam)
    f0 = f
    step = 1.0
    it = 0
    g = logistic_grad(theta, X, y, lam)
    gn = float(np.linalg.norm(g))
    while gn >= tol and it < max_iters:
        d = precond * g
        slope = float(g @ d)
        step *= 2.0
        while True:
            cand = theta - step * d
            fc = logistic_loss(cand, X, y, lam)
            if fc <= f - 0.5 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if fc > f:
            break
        theta, f = cand, fc
        g = logistic_grad(theta, X, y, lam)
        gn = float(np.linalg.norm(g))
        it += 1
    converged = gn < tol
    if not converged:
        log.debug("logreg lam=%g stopped after %d iterations, |grad|=%.2e", lam, it, gn)
    return LogRegModel(theta[:-1].copy(), float(theta[-1]), lam, it, converged, f0, f, gn)


# ---------------------------------------------------------------- AUC

def auc_roc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie), from the Mann-Whitney rank sum."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassEvalSet("AUC needs both classes")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    ranks = np.empty(len(s))
    i = 0
    while i < len(ss):
        j = i
        while j + 1 < len(ss) and ss[j + 1] == ss[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0  # mean of 1-based ranks i+1 .. j+1
        i = j + 1
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# ---------------------------------------------------------------- CV

def stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    if k < 2:
        raise ValueError("k_folds must be >= 2")
    y = np.asarray(y)
    folds = np.empty(len(y), dtype=np.int64)
    rng = np.random.default_rng(seed)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise FoldClassStarvation(f"class {cls} has {len(idx)} rows for {k} folds")
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = np.arange(len(idx)) % k
    return folds


def grid_search_cv(X, y, lambdas: Sequence[float] = DEFAULT_LAMBDA_GRID, k_folds: int = 5, seed: int = 0,
                   max_iters: int = 500, tol: float = 1e-6) -> tuple[float, dict[float, list[float]]]:
    """Pick the lambda with the best mean validation AUC; ties go to the smaller lambda."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    folds = stratified_folds(y, k_folds, seed)
    table: dict[float, list[float]] = {}
    for lam in sorted(set(float(v) for v in lambdas)):
        aucs = []
        for f in range(k_folds):
            tr, va = folds != f, folds == f
            m = train_logreg(X[tr], y[tr], lam, max_iters, tol)
            aucs.append(auc_roc(m.decision_function(X[va]), y[va]))
        table[lam] = aucs
    best = max(table, key=lambda lam: (np.mean(table[lam]), -lam))
    return best, table


# ---------------------------------------------------------------- features

@dataclass
class FeatureMatrix:
    users: list[str]
    X: np.ndarray
    blocks: list[tuple[str, int, int]]
    column_names: list[str]
    continuous: np.ndarray  # bool mask
    labels: dict[str, np.ndarray] = field(default_factory=dict)

    def block(self, name: str) -> np.ndarray:
        for b, s, e in self.blocks:
            if b == name:
                return self.X[:, s:e]
        raise KeyError(name)


@dataclass
class MetaContext:
    interactions: InteractionSet
    catalog: Mapping[str, AppMetadata]
    user_meta: Mapping[str, UserMetadata]


def meta_features(users: Sequence[str], ctx: MetaContext) -> tuple[np.ndarray, list[str], np.ndarray]:
    """One-hot os and city, plus means of price / rating / log10(ratings+1) and a genre histogram."""
    oses = sorted({m.os.lower() for m in ctx.user_meta.values()})
    cities = sorted({m.city.lower() for m in ctx.user_meta.values()})
    genres = sorted({m.genre.lower() for m in ctx.catalog.values()})
    names = ([f"os={o}" for o in oses] + [f"city={c}" for c in cities]
             + ["mean_price", "mean_rating", "mean_log_ratings"] + [f"genre_count={g}" for g in genres])
    cont = np.array([False] * (len(oses) + len(cities)) + [True] * (3 + len(genres)))
    oi = {o: i for i, o in enumerate(oses)}
    ci = {c: i for i, c in enumerate(cities)}
    gi = {g: i for i, g in enumerate(genres)}
    rows = np.zeros((len(users), len(names)))
    off_c = len(oses)
    off_m = off_c + len(cities)
    off_g = off_m + 3
    for r, u in enumerate(users):
        um = ctx.user_meta.get(u)
        if um is not None:
            rows[r, oi[um.os.lower()]] = 1.0
            rows[r, off_c + ci[um.city.lower()]] = 1.0
        apps = [ctx.catalog[a] for a in ctx.interactions.apps_of(u) if a in ctx.catalog]
        if apps:
            rows[r, off_m] = np.mean([a.price for a in apps])
            rows[r, off_m + 1] = np.mean([a.avg_rating for a in apps])
            rows[r, off_m + 2] = np.mean([math.log10(a.num_ratings + 1) for a in apps])
        for a in apps:
            rows[r, off_g + gi[a.genre.lower()]] += 1.0
    return rows, names, cont


def standardize(X: np.ndarray, continuous: np.ndarray, train_rows: np.ndarray) -> np.ndarray:
    X = X.copy()
    if not continuous.any():
        return X
    sub = X[np.ix_(train_rows, continuous)]
    mu = sub.mean(axis=0)
    sd = sub.std(axis=0)
    sd[sd == 0] = 1.0
    X[:, continuous] = (X[:, continuous] - mu) / sd
    return X


def assemble_features(users: Sequence[str], sources: Mapping[str, Mapping[str, np.ndarray]],
                      include_meta: bool, interactions: InteractionSet, meta: MetaContext | None = None,
                      train_rows: np.ndarray | None = None, strict: bool = False) -> FeatureMatrix:
    """Stack [baseline | source blocks in order | meta] for the users every source covers.

    ``users`` are raw user ids; sources are keyed by user tag. Continuous columns
    are standardized with statistics from ``train_rows`` (all rows by default).
    """
    kept = []
    for u in users:
        missing = [name for name, vecs in sources.items() if user_tag(u) not in vecs]
        if missing:
            if strict:
                raise SourceMissingUser(f"{u} missing from {missing}")
            log.info("user %s dropped: no vector in %s", u, missing)
            continue
        kept.append(u)
    if not kept:
        raise EmptyIntersection("no user is covered by every source")

    blocks, cols, names = [], [], []
    cont = []
    base = np.log1p([len(interactions.apps_of(u)) for u in kept])[:, None]
    cols.append(base)
    names.append("log1p_n_apps")
    cont.append([True])
    blocks.append(("baseline", 0, 1))
    pos = 1
    for name, vecs in sources.items():
        M = np.stack([np.asarray(vecs[user_tag(u)], dtype=np.float64) for u in kept])
        cols.append(M)
        names.extend(f"{name}[{i}]" for i in range(M.shape[1]))
        cont.append([True] * M.shape[1])
        blocks.append((name, pos, pos + M.shape[1]))
        pos += M.shape[1]
    if include_meta:
        if meta is None:
            raise ValueError("include_meta needs a MetaContext")
        M, mnames, mcont = meta_features(kept, meta)
        cols.append(M)
        names.extend(mnames)
        cont.append(list(mcont))
        blocks.append(("meta", pos, pos + M.shape[1]))
    X = np.hstack(cols)
    mask = np.array([c for part in cont for c in part], dtype=bool)
    rows = np.arange(len(kept)) if train_rows is None else np.asarray(train_rows)
    X = standardize(X, mask, rows)
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    return FeatureMatrix(kept, X, blocks, names, mask)


# ---------------------------------------------------------------- suite

@dataclass(frozen=True)
class SuiteConfig:
    methods: tuple[str, ...] = ("none",)
    lambdas: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    folds: int = 5
    test_fraction: float = 0.2
    split_seed: int = 0
    cv_seed: int = 0
    max_iters: int = 500
    tol: float = 1e-6


def parse_method(method: str) -> tuple[list[str], bool]:
    """'tfidf+d2v_cf+meta' -> (['tfidf', 'd2v_cf'], True); 'none' -> ([], False)."""
    parts = [p.strip() for p in method.split("+") if p.strip()]
    include_meta = "meta" in parts
    sources = [p for p in parts if p not in ("meta", "none")]
    return sources, include_meta


def split_train_test(users: Sequence[str], labels: SeedLabelSet, test_fraction: float, seed: int) -> np.ndarray:
    """Boolean test mask, stratified on the (gender, age group) cell."""
    rng = np.random.default_rng(seed)
    test = np.zeros(len(users), dtype=bool)
    cells: dict[tuple[str, str], list[int]] = {}
    for i, u in enumerate(users):
        lab = labels.labels[u]
        cells.setdefault((lab.gender, lab.age_group), []).append(i)
    for key in sorted(cells):
        idx = np.array(cells[key])
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test[idx[:n_test]] = True
    return test


@dataclass
class ExperimentReport:
    methods: list[str]
    tasks: list[str]
    auc: dict[str, dict[str, float]]
    lambdas: dict[str, dict[str, float]]
    n_train: int
    n_test: int
    feature_dims: dict[str, int]
    notes: list[str] = field(default_factory=list)

    def delta(self, method: str, task: str) -> float:
        return self.auc[method][task] - self.auc["none"][task]

    def mean_auc(self, method: str) -> float:
        return float(np.mean([self.auc[method][t] for t in self.tasks]))

    def mean_delta(self, method: str) -> float:
        return float(np.mean([self.delta(method, t) for t in self.tasks]))

    def to_dict(self) -> dict:
        return {
            "baseline": BASELINE_DESCRIPTION,
            "notes": self.notes,
            "methods": self.methods,
            "tasks": self.tasks,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "feature_dims": self.feature_dims,
            "auc": self.auc,
            "delta": {m: {t: self.delta(m, t) for t in self.tasks} for m in self.methods},
            "average": {m: {"auc": self.mean_auc(m), "delta": self.mean_delta(m)} for m in self.methods},
            "lambda": self.lambdas,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(d["methods"], d["tasks"], d["auc"], d["lambda"], d["n_train"], d["n_test"],
                   d["feature_dims"], d.get("notes", []))

    def to_csv(self, kind: str = "auc") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task"] + self.methods)
        cell = (lambda m, t: self.auc[m][t]) if kind == "auc" else self.delta
        for t in self.tasks:
            w.writerow([t] + [f"{cell(m, t):.6f}" for m in self.methods])
        avg = self.mean_auc if kind == "auc" else self.mean_delta
        w.writerow(["Average"] + [f"{avg(m):.6f}" for m in self.methods])
        return buf.getvalue()

    def pretty(self) -> str:
        """None as absolute AUC, every other method as the change against it (percent)."""
        headers = ["AUC-ROC"] + ["None" if m == "none" else m for m in self.methods]
        rows = []
        for t in self.tasks:
            row = [t]
            for m in self.methods:
                row.append(f"{100 * self.auc[m][t]:.2f}%" if m == "none" else f"{100 * self.delta(m, t):+.2f}%")
            rows.append(row)
        rows.append(["Average"] + [f"{100 * self.mean_auc(m):.2f}%" if m == "none"
                                   else f"{100 * self.mean_delta(m):+.2f}%" for m in self.methods])
        widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
        line = lambda r: "| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |"
        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        out = [f"# {BASELINE_DESCRIPTION}"] + [f"# {n}" for n in self.notes]
        out += [line(headers), sep] + [line(r) for r in rows]
        return "\n".join(out) + "\n"


def run_suite(config: SuiteConfig, labels: SeedLabelSet, interactions: InteractionSet,
              representations: Mapping[str, Mapping[str, np.ndarray]],
              meta: MetaContext | None = None, tasks: Sequence[str] = TASKS) -> ExperimentReport:
    """Evaluate every method on every task with one shared train/test split.

    ``representations`` maps a base method name (e.g. 'tfidf') to user vectors.
    Rows are restricted to seed users covered by every representation in use, so
    all methods are compared on identical users, folds and split.
    """
    methods = list(dict.fromkeys(["none"] + list(config.methods)))
    parsed = {m: parse_method(m) for m in methods}
    needed = sorted({s for srcs, _ in parsed.values() for s in srcs})
    missing = [s for s in needed if s not in representations]
    if missing:
        raise KeyError(f"no representation for {missing}")
    users = [u for u in labels.users if u in interactions
             and all(user_tag(u) in representations[s] for s in needed)]
    if not users:
        raise EmptyIntersection("no seed user is covered by every representation")
    dropped = len(labels) - len(users)
    test = split_train_test(users, labels, config.test_fraction, config.split_seed)
    train_rows = np.flatnonzero(~test)

    auc: dict[str, dict[str, float]] = {m: {} for m in methods}
    lam_sel: dict[str, dict[str, float]] = {m: {} for m in methods}
    dims: dict[str, int] = {}
    for m in methods:
        srcs, with_meta = parsed[m]
        fm = assemble_features(users, {s: representations[s] for s in srcs}, with_meta, interactions,
                               meta, train_rows=train_rows)
        dims[m] = fm.X.shape[1]
        Xtr, Xte = fm.X[~test], fm.X[test]
        for t in tasks:
            y = np.array(labels.task_vector(t, users))
            ytr, yte = y[~test], y[test]
            lam, _ = grid_search_cv(Xtr, ytr, config.lambdas, config.folds, config.cv_seed,
                                    config.max_iters, config.tol)
            model = train_logreg(Xtr, ytr, lam, config.max_iters, config.tol)
            auc[m][t] = auc_roc(model.decision_function(Xte), yte)
            lam_sel[m][t] = lam
        log.info("%s: mean test AUC %.4f", m, np.mean(list(auc[m].values())))
    notes = ["one stratified train/test split and one fold assignment shared by all methods"]
    if dropped:
        notes.append(f"{dropped} seed users without a vector in some representation were excluded")
    return ExperimentReport(methods, list(tasks), auc, lam_sel, int((~test).sum()), int(test.sum()), dims, notes)


def tune_embeddings(candidates: Sequence, make_vectors: Callable[[object], Mapping[str, np.ndarray]],
                    method: str, config: SuiteConfig, labels: SeedLabelSet, interactions: InteractionSet,
                    fixed: Mapping[str, Mapping[str, np.ndarray]] | None = None,
                    meta: MetaContext | None = None):
    """Pick the embedding config whose vectors maximize the mean AUC over the 9 tasks.

    ``method`` may combine the tuned representation (named 'tuned') with fixed ones,
    e.g. 'tfidf+tuned'. Returns (best candidate, [(candidate, mean AUC), ...]).
    """
    scores = []
    for cand in candidates:
        reps = dict(fixed or {})
        reps["tuned"] = make_vectors(cand)
        rep = run_suite(SuiteConfig(**{**config.__dict__, "methods": (method,)}), labels, interactions, reps, meta)
        scores.append((cand, rep.mean_auc(method)))
    best = max(range(len(scores)), key=lambda i: (scores[i][1], -i))
    return scores[best][0], scores


__all__ = [
    "AGE_GROUPS", "GENDERS", "TASKS", "ExperimentReport", "FeatureMatrix", "LogRegModel", "MetaContext",
    "SuiteConfig", "assemble_features", "auc_roc", "grid_search_cv", "logistic_grad", "logistic_loss",
    "run_suite", "stratified_folds", "train_logreg", "tune_embeddings",
]
