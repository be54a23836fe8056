"""Loading and validation of interaction, app-metadata, user-metadata and seed-label CSVs."""
from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping

from .errors import (
    DuplicateAppId,
    EmptyDataset,
    FieldOutOfRange,
    MalformedRecord,
    UnknownLabelValue,
)

log = logging.getLogger(__name__)

DEFAULT_MIN_APPS = 3

INTERACTIONS_HEADER = ("ifa", "bundle_id")
APP_META_HEADER = ("bundle_id", "description", "genre", "avg_rating", "num_ratings", "price", "store")
USER_META_HEADER = ("ifa", "os", "city")
LABELS_HEADER = ("ifa", "gender", "age_group")

GENDERS = ("male", "female")
AGE_GROUPS = ("18-24", "25-34", "35-44", "45-54", "55+")
STORES = ("google", "apple")
COARSE_AGE = {
    "18-34": ("18-24", "25-34"),
    "35+": ("35-44", "45-54", "55+"),
}
# row order of every report
TASKS = ("male", "female") + AGE_GROUPS + tuple(COARSE_AGE)


@dataclass(frozen=True, order=True)
class Interaction:
    user: str
    app: str


class InteractionSet:
    """Deduplicated (user, app) pairs. Users and their app lists are kept sorted."""

    def __init__(self, by_user: Mapping[str, Iterable[str]]):
        self._by_user: dict[str, tuple[str, ...]] = {
            u: tuple(sorted(set(apps))) for u, apps in sorted(by_user.items())
        }

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "InteractionSet":
        by_user: dict[str, set[str]] = defaultdict(set)
        for u, a in pairs:
            by_user[u].add(a)
        return cls(by_user)

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(self._by_user)

    @property
    def apps(self) -> tuple[str, ...]:
        return tuple(sorted({a for apps in self._by_user.values() for a in apps}))

    @property
    def interactions(self) -> list[Interaction]:
        return [Interaction(u, a) for u, apps in self._by_user.items() for a in apps]

    def apps_of(self, user: str) -> tuple[str, ...]:
        return self._by_user[user]

    def items(self) -> Iterator[tuple[str, tuple[str, ...]]]:
        return iter(self._by_user.items())

    def __contains__(self, user: object) -> bool:
        return user in self._by_user

    def __len__(self) -> int:
        return sum(len(a) for a in self._by_user.values())

    @property
    def n_users(self) -> int:
        return len(self._by_user)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InteractionSet) and self._by_user == other._by_user

    def filter_min_apps(self, min_apps: int) -> "InteractionSet":
        return InteractionSet({u: a for u, a in self._by_user.items() if len(a) >= min_apps})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(INTERACTIONS_HEADER)
        for u, apps in self._by_user.items():
            for a in apps:
                w.writerow((u, a))
        return buf.getvalue()


@dataclass(frozen=True)
class AppMetadata:
    app: str
    description: str
    genre: str
    avg_rating: float
    num_ratings: int
    price: float
    store: str


@dataclass(frozen=True)
class UserMetadata:
    user: str
    os: str
    city: str


AppCatalog = dict  # AppId -> AppMetadata


@dataclass(frozen=True)
class SeedLabel:
    user: str
    gender: str
    age_group: str

    def positive(self, task: str) -> bool:
        if task in GENDERS:
            return self.gender == task
        if task in AGE_GROUPS:
            return self.age_group == task
        if task in COARSE_AGE:
            return self.age_group in COARSE_AGE[task]
        raise KeyError(task)


@dataclass
class SeedLabelSet:
    labels: dict[str, SeedLabel] = field(default_factory=dict)

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(sorted(self.labels))

    def task_vector(self, task: str, users: Iterable[str]) -> list[int]:
        return [int(self.labels[u].positive(task)) for u in users]

    def positives(self, task: str) -> int:
        return sum(lab.positive(task) for lab in self.labels.values())

    def __len__(self) -> int:
        return len(self.labels)


def _read_rows(path, header: tuple[str, ...]) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, fields) for data rows after checking the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: empty file") from None
        if tuple(c.strip() for c in first) != header:
            raise MalformedRecord(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row:
                continue
            # reader.line_num accounts for quoted multi-line fields
            if len(row) != len(header) or any(not c.strip() for c in row):
                raise MalformedRecord(path, reader.line_num)
            yield reader.line_num, [c.strip() for c in row]


def load_interactions(path, min_apps: int = DEFAULT_MIN_APPS) -> InteractionSet:
    pairs = [(u, a) for _, (u, a) in _read_rows(path, INTERACTIONS_HEADER)]
    if not pairs:
        raise EmptyDataset(f"{path}: no interactions")
    out = InteractionSet.from_pairs(pairs).filter_min_apps(min_apps)
    log.info("loaded %d interactions for %d users from %s", len(out), out.n_users, path)
    return out


def load_app_metadata(path, keep: Callable[[AppMetadata], bool] | None = None) -> AppCatalog:
    """Load the app catalog.

    ``keep`` is a hook for dropping apps, e.g. a language-identification predicate
    on the description; by default every valid app is kept.
    """
    catalog: AppCatalog = {}
    for line, row in _read_rows(path, APP_META_HEADER):
        app, desc, genre, rating, n_ratings, price, store = row
        where = f"{path}:{line}: "
        try:
            rating_f = float(rating)
            n_int = int(n_ratings)
            price_f = float(price)
        except ValueError:
            raise MalformedRecord(path, line, "non-numeric field") from None
        if not 0.0 <= rating_f <= 5.0:
            raise FieldOutOfRange("avg_rating", rating_f, where)
        if n_int < 0:
            raise FieldOutOfRange("num_ratings", n_int, where)
        if not price_f >= 0.0:
            raise FieldOutOfRange("price", price_f, where)
        if store.lower() not in STORES:
            raise FieldOutOfRange("store", store, where)
        if app in catalog:
            raise DuplicateAppId(app)
        meta = AppMetadata(app, desc, genre, rating_f, n_int, price_f, store.lower())
        if keep is not None and not keep(meta):
            continue
        catalog[app] = meta
    return dict(sorted(catalog.items()))


def load_user_metadata(path) -> dict[str, UserMetadata]:
    """One (os, city) per user; on repeated rows the first occurrence wins."""
    out: dict[str, UserMetadata] = {}
    for _, (user, os_, city) in _read_rows(path, USER_META_HEADER):
        out.setdefault(user, UserMetadata(user, os_, city))
    return dict(sorted(out.items()))


def join_and_prune(interactions: InteractionSet, catalog: Mapping[str, AppMetadata],
                   min_apps: int = DEFAULT_MIN_APPS) -> InteractionSet:
    pruned = InteractionSet({u: [a for a in apps if a in catalog] for u, apps in interactions.items()})
    out = pruned.filter_min_apps(min_apps)
    if out.n_users == 0:
        raise EmptyDataset("no users survive the catalog join")
    return out


def load_seed_labels(path, interactions: InteractionSet) -> SeedLabelSet:
    labels: dict[str, SeedLabel] = {}
    dropped = 0
    for _, (user, gender, age) in _read_rows(path, LABELS_HEADER):
        gender = gender.lower()
        if gender not in GENDERS:
            raise UnknownLabelValue(gender)
        if age not in AGE_GROUPS:
            raise UnknownLabelValue(age)
        if user not in interactions:
            dropped += 1
            continue
        labels[user] = SeedLabel(user, gender, age)
    if dropped:
        log.warning("dropped %d seed labels of users absent from the interaction set", dropped)
    return SeedLabelSet(dict(sorted(labels.items())))
