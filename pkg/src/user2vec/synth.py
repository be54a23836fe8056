"""Synthetic interactions, app/user metadata and seed labels with planted structure.

Every user belongs to one (gender, age group) archetype. Archetypes prefer genres
through ``exp(temperature * score)`` where each genre carries a (gender, age)
profile; os and city are drawn from archetype-conditional distributions. The
manifest records the ground truth needed to check recoveries.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleConfig
from .ingest import AGE_GROUPS, APP_META_HEADER, COARSE_AGE, GENDERS, INTERACTIONS_HEADER, LABELS_HEADER, USER_META_HEADER
from .text import normalize

DEFAULT_GENRES = ("Sports", "Racing", "Fashion", "Puzzle", "Finance", "News")
# (gender axis: + male / - female, age axis: + older / - younger)
DEFAULT_GENRE_PROFILES = ((1.0, 0.0), (0.6, -1.0), (-1.0, -0.6), (-0.6, 1.0), (0.4, 1.0), (-0.2, 0.2))
OSES = ("ios", "android")
CITIES = ("London", "Manchester", "Birmingham", "Leeds", "Glasgow")

_CONS = "bcdfgklmnprstvz"
_VOWELS = "aiou"


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 2000
    n_apps: int = 300
    n_genres: int = 6
    genre_vocab: int = 40
    noise_vocab: int = 120
    desc_len_min: int = 30
    desc_len_max: int = 50
    genre_word_frac: float = 0.7
    apps_min: int = 4
    apps_max: int = 12
    temperature: float = 0.5
    gender_priors: tuple[float, ...] = (0.5, 0.5)
    age_priors: tuple[float, ...] = (0.22, 0.28, 0.2, 0.16, 0.14)
    # P(ios) = os_base + os_gender_shift * (+1 female / -1 male) + os_age_shift * age position in [-1, 1]
    os_base: float = 0.5
    os_gender_shift: float = 0.2
    os_age_shift: float = -0.15
    # city logits: city i gets city_age_slope * age position * (i - centre)
    city_age_slope: float = 1.0
    label_fraction: float = 0.3
    popularity_skew: bool = False
    # optional explicit archetype x genre affinity, row-major, 10 * n_genres values
    affinity: tuple[float, ...] | None = None
    seed: int = 0

    def validate(self) -> "SynthConfig":
        problems = []
        if self.n_users < 0 or self.n_apps < 1 or self.n_genres < 1:
            problems.append("need n_users >= 0, n_apps >= 1, n_genres >= 1")
        if not 3 <= self.apps_min <= self.apps_max:
            problems.append("apps-per-user range must satisfy 3 <= min <= max")
        if self.apps_max > self.n_apps:
            problems.append("apps_max exceeds n_apps")
        if not 1 <= self.desc_len_min <= self.desc_len_max:
            problems.append("bad description length range")
        if not 0.0 <= self.genre_word_frac <= 1.0 or not 0.0 <= self.label_fraction <= 1.0:
            problems.append("fractions must lie in [0, 1]")
        if len(self.gender_priors) != len(GENDERS) or len(self.age_priors) != len(AGE_GROUPS):
            problems.append("prior vectors have the wrong length")
        if any(p < 0 for p in self.gender_priors + self.age_priors):
            problems.append("negative prior")
        if self.affinity is not None and len(self.affinity) != n_archetypes() * self.n_genres:
            problems.append(f"affinity needs {n_archetypes() * self.n_genres} values")
        if problems:
            raise InfeasibleConfig("; ".join(problems))
        return self


def n_archetypes() -> int:
    return len(GENDERS) * len(AGE_GROUPS)


def archetype_of(gender: str, age_group: str) -> int:
    return GENDERS.index(gender) * len(AGE_GROUPS) + AGE_GROUPS.index(age_group)


def _age_position(a: int) -> float:
    return -1.0 + 2.0 * a / (len(AGE_GROUPS) - 1)


def genre_names(cfg: SynthConfig) -> list[str]:
    if cfg.n_genres == len(DEFAULT_GENRES):
        return list(DEFAULT_GENRES)
    return [f"Genre{i}" for i in range(cfg.n_genres)]


def affinity_matrix(cfg: SynthConfig) -> np.ndarray:
    """Archetype x genre affinity (unnormalized)."""
    if cfg.affinity is not None:
        return np.asarray(cfg.affinity, dtype=np.float64).reshape(n_archetypes(), cfg.n_genres)
    if cfg.n_genres == len(DEFAULT_GENRE_PROFILES):
        prof = np.array(DEFAULT_GENRE_PROFILES)
    else:
        ang = 2 * np.pi * np.arange(cfg.n_genres) / cfg.n_genres
        prof = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    out = np.zeros((n_archetypes(), cfg.n_genres))
    for g, gender in enumerate(GENDERS):
        gs = 1.0 if gender == "male" else -1.0
        for a in range(len(AGE_GROUPS)):
            score = gs * prof[:, 0] + _age_position(a) * prof[:, 1]
            out[archetype_of(gender, AGE_GROUPS[a])] = np.exp(cfg.temperature * score)
    return out


def os_distribution(cfg: SynthConfig) -> np.ndarray:
    out = np.zeros((n_archetypes(), len(OSES)))
    for gender in GENDERS:
        gs = 1.0 if gender == "female" else -1.0
        for a, age in enumerate(AGE_GROUPS):
            p = cfg.os_base + cfg.os_gender_shift * gs + cfg.os_age_shift * _age_position(a)
            p = min(max(p, 0.02), 0.98)
            out[archetype_of(gender, age)] = (p, 1.0 - p)
    return out


def city_distribution(cfg: SynthConfig) -> np.ndarray:
    centre = (len(CITIES) - 1) / 2
    out = np.zeros((n_archetypes(), len(CITIES)))
    for gender in GENDERS:
        for a, age in enumerate(AGE_GROUPS):
            logits = cfg.city_age_slope * _age_position(a) * (np.arange(len(CITIES)) - centre)
            p = np.exp(logits)
            out[archetype_of(gender, age)] = p / p.sum()
    return out


def _pseudo_words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    """Distinct pronounceable words that survive text normalization unchanged."""
    out: list[str] = []
    while len(out) < n:
        n_syl = int(rng.integers(2, 4))
        w = "".join(_CONS[rng.integers(len(_CONS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n_syl))
        w += _CONS[rng.integers(len(_CONS))]
        if w in taken or normalize([w]) != [w]:
            continue
        taken.add(w)
        out.append(w)
    return out


@dataclass
class SynthData:
    interactions: list[tuple[str, str]]
    apps: list[dict]
    users: list[dict]
    labels: list[tuple[str, str, str]]
    manifest: dict = field(default_factory=dict)

    def files(self) -> dict[str, str]:
        return {
            "interactions.csv": _csv(INTERACTIONS_HEADER, self.interactions),
            "app_meta.csv": _csv(APP_META_HEADER, [
                (a["bundle_id"], a["description"], a["genre"], f"{a['avg_rating']:.1f}", a["num_ratings"],
                 f"{a['price']:.2f}", a["store"]) for a in self.apps]),
            "user_meta.csv": _csv(USER_META_HEADER, [(u["ifa"], u["os"], u["city"]) for u in self.users]),
            "labels.csv": _csv(LABELS_HEADER, self.labels),
            "manifest.json": json.dumps(self.manifest, indent=1, sort_keys=True) + "\n",
        }

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, text in self.files().items():
            p = out / name
            p.write_text(text, encoding="utf-8")
            paths[name] = p
        return paths


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def generate(cfg: SynthConfig | None = None) -> SynthData:
    cfg = (cfg or SynthConfig()).validate()
    rng = np.random.default_rng(cfg.seed)
    genres = genre_names(cfg)
    aff = affinity_matrix(cfg)

    taken: set[str] = set()
    genre_words = [_pseudo_words(rng, cfg.genre_vocab, taken) for _ in genres]
    noise_words = _pseudo_words(rng, cfg.noise_vocab, taken)

    apps = []
    app_genre = np.arange(cfg.n_apps) % cfg.n_genres
    for j in range(cfg.n_apps):
        g = int(app_genre[j])
        n_words = int(rng.integers(cfg.desc_len_min, cfg.desc_len_max + 1))
        from_genre = rng.random(n_words) < cfg.genre_word_frac
        words = [genre_words[g][rng.integers(cfg.genre_vocab)] if fg else noise_words[rng.integers(cfg.noise_vocab)]
                 for fg in from_genre]
        paid = rng.random() < 0.4
        apps.append({
            "bundle_id": f"com.synth.a{j:04d}",
            "description": " ".join(words),
            "genre": genres[g],
            "avg_rating": float(np.round(rng.uniform(1.0, 5.0), 1)),
            "num_ratings": int(10 ** rng.uniform(0, 6)),
            "price": float(rng.choice([0.99, 1.99, 2.99, 4.99, 9.99])) if paid else 0.0,
            "store": "apple" if rng.random() < 0.5 else "google",
        })
    popularity = rng.pareto(1.5, cfg.n_apps) + 1.0 if cfg.popularity_skew else np.ones(cfg.n_apps)

    arch_prior = np.outer(cfg.gender_priors, cfg.age_priors).ravel()
    arch_prior = arch_prior / arch_prior.sum()
    os_p = os_distribution(cfg)
    city_p = city_distribution(cfg)
    for arch in range(n_archetypes()):
        if np.count_nonzero(aff[arch][app_genre]) < cfg.apps_max:
            raise InfeasibleConfig(f"archetype {arch} can reach fewer than apps_max={cfg.apps_max} apps")

    users, interactions, labels = [], [], []
    n_labeled = int(round(cfg.label_fraction * cfg.n_users))
    labeled = set(rng.permutation(cfg.n_users)[:n_labeled].tolist()) if cfg.n_users else set()
    for i in range(cfg.n_users):
        arch = int(rng.choice(n_archetypes(), p=arch_prior))
        gender = GENDERS[arch // len(AGE_GROUPS)]
        age = AGE_GROUPS[arch % len(AGE_GROUPS)]
        k = int(rng.integers(cfg.apps_min, cfg.apps_max + 1))
        w = aff[arch][app_genre] * popularity
        chosen = rng.choice(cfg.n_apps, size=k, replace=False, p=w / w.sum())
        ifa = f"u{i:05d}"
        for j in sorted(chosen.tolist()):
            interactions.append((ifa, apps[j]["bundle_id"]))
        os_ = OSES[int(rng.choice(len(OSES), p=os_p[arch]))]
        city = CITIES[int(rng.choice(len(CITIES), p=city_p[arch]))]
        users.append({"ifa": ifa, "os": os_, "city": city, "archetype": arch, "gender": gender,
                      "age_group": age, "labeled": i in labeled})
        if i in labeled:
            labels.append((ifa, gender, age))

    manifest = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "genres": genres,
        "app_genre": {a["bundle_id"]: a["genre"] for a in apps},
        "genre_counts": {g: int((app_genre == i).sum()) for i, g in enumerate(genres)},
        "genre_words": dict(zip(genres, genre_words)),
        "noise_words": noise_words,
        "affinity": aff.tolist(),
        "archetype_prior": arch_prior.tolist(),
        "os_given_archetype": os_p.tolist(),
        "city_given_archetype": city_p.tolist(),
        "oses": list(OSES),
        "cities": list(CITIES),
        "popularity": popularity.tolist(),
        "users": {u["ifa"]: {"archetype": u["archetype"], "gender": u["gender"], "age_group": u["age_group"],
                             "labeled": u["labeled"]} for u in users},
        "n_interactions": len(interactions),
        "label_counts": _label_counts(labels),
    }
    return SynthData(interactions, apps, users, labels, manifest)


def _label_counts(labels) -> dict[str, int]:
    counts = {g: 0 for g in GENDERS} | {a: 0 for a in AGE_GROUPS}
    for _, g, a in labels:
        counts[g] += 1
        counts[a] += 1
    return counts


def oracle_scores(manifest: dict, interactions, user_meta=None, users=None) -> dict[str, np.ndarray]:
    """Posterior archetype probabilities under the true generative model.

    App draws are treated as independent multinomial draws (the without-replacement
    correction is ignored). Returns {"users": [...], "posterior": n x 10 array}.
    """
    genres = manifest["genres"]
    gidx = {g: i for i, g in enumerate(genres)}
    app_genre = {a: gidx[g] for a, g in manifest["app_genre"].items()}
    aff = np.asarray(manifest["affinity"])
    pop = np.asarray(manifest["popularity"])
    apps_sorted = sorted(manifest["app_genre"])
    app_pos = {a: i for i, a in enumerate(apps_sorted)}
    genre_vec = np.array([app_genre[a] for a in apps_sorted])
    Z = (aff[:, genre_vec] * pop[None, :]).sum(axis=1)
    log_prior = np.log(np.asarray(manifest["archetype_prior"]))
    os_p = np.asarray(manifest["os_given_archetype"])
    city_p = np.asarray(manifest["city_given_archetype"])
    oses = manifest["oses"]
    cities = [c.lower() for c in manifest["cities"]]
    users = list(users if users is not None else interactions.users)
    post = np.zeros((len(users), aff.shape[0]))
    with np.errstate(divide="ignore"):
        log_aff = np.log(aff)
    for r, u in enumerate(users):
        lp = log_prior.copy()
        for a in interactions.apps_of(u):
            lp += log_aff[:, app_genre[a]] + math.log(pop[app_pos[a]]) - np.log(Z)
        if user_meta is not None and u in user_meta:
            lp += np.log(os_p[:, oses.index(user_meta[u].os.lower())])
            lp += np.log(city_p[:, cities.index(user_meta[u].city.lower())])
        lp -= lp.max()
        p = np.exp(lp)
        post[r] = p / p.sum()
    return {"users": users, "posterior": post}


def task_posterior(posterior: np.ndarray, task: str) -> np.ndarray:
    """Collapse archetype posteriors to P(task positive)."""
    cols = []
    for arch in range(n_archetypes()):
        gender = GENDERS[arch // len(AGE_GROUPS)]
        age = AGE_GROUPS[arch % len(AGE_GROUPS)]
        if task in GENDERS:
            hit = gender == task
        elif task in AGE_GROUPS:
            hit = age == task
        else:
            hit = age in COARSE_AGE[task]
        if hit:
            cols.append(arch)
    return posterior[:, cols].sum(axis=1)
