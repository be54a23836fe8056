"""Command-line entry point: one subcommand per pipeline stage plus ``pipeline``.

Every subcommand writes ``<subcommand>.manifest.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import build, load_kv, section
from .errors import User2VecError

log = logging.getLogger("user2vec")

EXIT_DATA = 1
EXIT_USAGE = 2

SCHEMES = ("cf", "user2vec", "context2vec", "descriptions")
BASELINE_METHODS = ("tfidf", "lsa", "lda", "word2vec")
DATA_FILES = ("interactions.csv", "app_meta.csv", "user_meta.csv", "labels.csv")


class UsageError(Exception):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    def __init__(self, subcommand: str, args: argparse.Namespace):
        self.subcommand = subcommand
        self.args = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
        self.config: dict = {}
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.seeds: dict[str, int] = {}
        self._t0 = time.time()

    def input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"input file not found: {p}")
        self.inputs[str(p)] = sha256(p)
        return p

    def output(self, path) -> Path:
        self.outputs.append(str(path))
        return Path(path)

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "version": __version__,
            "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in self.args.items()},
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "output_digests": {o: sha256(o) for o in self.outputs if Path(o).is_file()},
            "seeds": self.seeds,
            "wall_clock_seconds": round(time.time() - self._t0, 3),
        }

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / f"{self.subcommand}.manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    return obj


def _kv(args) -> dict[str, str]:
    return load_kv(args.config) if getattr(args, "config", None) else {}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_paths(args, man: RunManifest, need_labels: bool = False, need_user_meta: bool = False) -> dict:
    """Resolve dataset files from --data plus per-file overrides."""
    base = Path(args.data) if getattr(args, "data", None) else None
    paths = {}
    for name, attr in zip(DATA_FILES, ("interactions", "app_meta", "user_meta", "labels")):
        p = getattr(args, attr, None) or (base / name if base else None)
        paths[attr] = p
    if paths["interactions"] is None or paths["app_meta"] is None:
        raise UsageError("need --data DIR or both --interactions and --app-meta")
    if need_labels and paths["labels"] is None:
        raise UsageError("labels path required (--labels or --data)")
    for k in ("interactions", "app_meta"):
        man.input(paths[k])
    for k, needed in (("user_meta", need_user_meta), ("labels", need_labels)):
        p = paths[k]
        if p is not None and (needed or Path(p).is_file()):
            man.input(p)
        else:
            paths[k] = None
    return paths


def _load_dataset(args, man: RunManifest, need_labels=False, need_user_meta=False):
    from .representations import load_dataset

    p = _data_paths(args, man, need_labels, need_user_meta)
    return load_dataset(p["interactions"], p["app_meta"], p["user_meta"], p["labels"], args.min_apps)


def _text_config(kv):
    from .text import DEFAULT_TEXT_CONFIG, TextConfig

    return build(TextConfig, section(kv, "text"), DEFAULT_TEXT_CONFIG)


def _train_config(kv, args, prefix="embed", base=None):
    from .embedding import TrainConfig

    overrides = {k: v for k, v in (("mode", args.mode), ("objective", getattr(args, "objective", None)),
                                   ("dim", getattr(args, "dim", None)), ("epochs", getattr(args, "epochs", None)))
                 if v is not None}
    cfg = build(TrainConfig, section(kv, prefix), base)
    cfg = dataclasses.replace(cfg, **overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    return cfg.validate()


def _settings(kv, args):
    from .embedding import TrainConfig
    from .representations import RepresentationSettings

    s = RepresentationSettings()
    d2v = _train_config(kv, argparse.Namespace(mode=None, seed=args.seed, workers=args.workers), "embed", s.doc2vec)
    w2v = _train_config(kv, argparse.Namespace(mode=None, seed=args.seed, workers=args.workers), "word2vec",
                        s.word2vec)
    overrides = {}
    for method in ("d2v_cf", "user2vec", "context2vec"):
        sec = section(kv, f"embed.{method}")
        if sec:
            overrides[method] = dataclasses.asdict(build(TrainConfig, sec, d2v))
    rest = section(kv, "repr")
    s = build(RepresentationSettings, rest, s) if rest else s
    return dataclasses.replace(s, text=_text_config(kv), doc2vec=d2v, word2vec=w2v, overrides=overrides)


# ---------------------------------------------------------------- subcommands

def cmd_gen_data(args) -> int:
    from .synth import SynthConfig, generate

    kv = _kv(args)
    man = RunManifest("gen-data", args)
    cfg = build(SynthConfig, section(kv, "synth") or {k: v for k, v in kv.items() if "." not in k})
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    data = generate(cfg)
    out = _out_dir(args)
    for path in data.write(out).values():
        man.output(path)
    man.config = _jsonable(cfg)
    man.seeds["synth"] = cfg.seed
    man.write(out)
    return 0


def cmd_build_corpus(args) -> int:
    from .docs import build_corpus

    kv = _kv(args)
    man = RunManifest("build-corpus", args)
    ds = _load_dataset(args, man, need_user_meta=args.scheme == "context2vec")
    text = _text_config(kv)
    corpus = build_corpus(args.scheme, ds.interactions, ds.catalog, ds.user_meta, text)
    out = _out_dir(args)
    corpus.save(man.output(out / "corpus.tsv"))
    man.config = {"scheme": args.scheme, "text": _jsonable(text), "min_apps": args.min_apps}
    man.write(out)
    log.info("%d documents, %d tokens", len(corpus), corpus.n_tokens)
    return 0


def cmd_train_embed(args) -> int:
    from .docs import DocCorpus
    from .embedding import save_model, train
    from .representations import item_vectors
    from .vectors import save_vectors

    kv = _kv(args)
    man = RunManifest("train-embed", args)
    cfg = _train_config(kv, args)
    corpus = DocCorpus.load(man.input(args.corpus), args.scheme or "unknown")
    model = train(corpus, cfg)
    out = _out_dir(args)
    save_model(model, man.output(out / "model.bin"))
    vecs = {}
    if model.D is not None:
        vecs.update(model.doc_vectors())
    else:
        vecs.update({t: model.word_vector(t) for t in model.vocab.tokens})
    if args.items:
        if cfg.mode not in ("dm", "dbow") or not args.scheme:
            raise UsageError("--items needs a doc2vec mode (dm/dbow) and --scheme")
        ds = _load_dataset(args, man, need_user_meta=args.scheme == "context2vec")
        vecs.update(item_vectors(model, args.scheme, ds, _settings(kv, args),
                                 infer_epochs=args.infer_epochs))
    save_vectors(vecs, man.output(out / "vectors.txt"))
    man.config = {"train": cfg.to_dict(), "scheme": args.scheme}
    man.seeds["train"] = cfg.seed
    stats = getattr(model, "stats", {})
    (out / "train_stats.json").write_text(json.dumps(_jsonable(stats), indent=2) + "\n", encoding="utf-8")
    man.output(out / "train_stats.json")
    man.write(out)
    return 0


def cmd_fit_baseline(args) -> int:
    from .representations import build_representation
    from .vectors import save_vectors

    kv = _kv(args)
    man = RunManifest("fit-baseline", args)
    ds = _load_dataset(args, man)
    settings = _settings(kv, args)
    if args.seed is not None:
        settings = dataclasses.replace(settings, lsa_seed=args.seed, lda_seed=args.seed)
    users, model = build_representation(args.method, ds, settings, return_model=True)
    vecs = dict(users)
    if args.method in ("tfidf", "lsa", "lda"):
        vecs.update(model.vectors())
    out = _out_dir(args)
    save_vectors(vecs, man.output(out / "vectors.txt"))
    man.config = {"method": args.method, "settings": _jsonable(settings)}
    man.seeds.update({"lsa": settings.lsa_seed, "lda": settings.lda_seed, "word2vec": settings.word2vec.seed})
    man.write(out)
    return 0


def format_recommendations(hits) -> str:
    return "".join(f"{i}\t{tag}\t{score:.6f}\n" for i, (tag, score) in enumerate(hits, 1))


def cmd_recommend(args) -> int:
    from .recsys import VectorSpace
    from .vectors import load_vectors

    man = RunManifest("recommend", args)
    space = VectorSpace(load_vectors(man.input(args.space)))
    hits = space.top_k(args.query, args.k, kind=args.filter)
    text = format_recommendations(hits)
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args)
        man.output(out / "recommendations.tsv").write_text(text, encoding="utf-8")
        man.write(out)
    return 0


def _suite_config(kv, args):
    from .lookalike import SuiteConfig

    cfg = build(SuiteConfig, section(kv, "suite"))
    if args.methods:
        cfg = dataclasses.replace(cfg, methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, split_seed=args.seed, cv_seed=args.seed)
    return cfg


def _write_report(report, out: Path, man: RunManifest) -> None:
    man.output(out / "report.json").write_text(report.to_json(), encoding="utf-8")
    man.output(out / "report_auc.csv").write_text(report.to_csv("auc"), encoding="utf-8")
    man.output(out / "report_delta.csv").write_text(report.to_csv("delta"), encoding="utf-8")
    man.output(out / "report.txt").write_text(report.pretty(), encoding="utf-8")


def _suite(args, kv, man: RunManifest, ds):
    from .lookalike import parse_method, run_suite
    from .representations import build_representation
    from .vectors import load_vectors

    cfg = _suite_config(kv, args)
    settings = _settings(kv, args)
    given = {}
    for item in args.vectors or []:
        name, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--vectors expects NAME=PATH, got {item!r}")
        given[name] = load_vectors(man.input(path))
    needed = sorted({s for m in cfg.methods for s in parse_method(m)[0]})
    reps = {}
    for name in needed:
        if name in given:
            reps[name] = given[name]
        else:
            log.info("building representation %s", name)
            reps[name] = build_representation(name, ds, settings)
    report = run_suite(cfg, ds.labels, ds.interactions, reps, ds.meta)
    man.config.update({"suite": _jsonable(cfg), "settings": _jsonable(settings)})
    man.seeds.update({"split": cfg.split_seed, "cv": cfg.cv_seed, "doc2vec": settings.doc2vec.seed})
    return report


def cmd_eval_suite(args) -> int:
    kv = _kv(args)
    man = RunManifest("eval-suite", args)
    needs_meta = any("meta" in m or "context2vec" in m for m in (args.methods or "").split(","))
    ds = _load_dataset(args, man, need_labels=True, need_user_meta=needs_meta)
    report = _suite(args, kv, man, ds)
    out = _out_dir(args)
    _write_report(report, out, man)
    man.write(out)
    sys.stdout.write(report.pretty())
    return 0


def cmd_report(args) -> int:
    from .lookalike import ExperimentReport

    man = RunManifest("report", args)
    try:
        report = ExperimentReport.from_dict(json.loads(man.input(args.report).read_text(encoding="utf-8")))
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"not a suite report: {args.report} ({exc})") from None
    text = {"pretty": report.pretty, "json": report.to_json,
            "csv": lambda: report.to_csv("auc"), "delta-csv": lambda: report.to_csv("delta")}[args.format]()
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args)
        suffix = {"pretty": "txt", "json": "json", "csv": "csv", "delta-csv": "csv"}[args.format]
        man.output(out / f"report_{args.format}.{suffix}").write_text(text, encoding="utf-8")
        man.write(out)
    return 0


def cmd_pipeline(args) -> int:
    """gen-data (unless --data is given), then the suite with every needed representation trained."""
    from .representations import load_dataset_dir
    from .synth import SynthConfig, generate

    kv = _kv(args)
    out = _out_dir(args)
    man = RunManifest("pipeline", args)
    if args.data:
        data_dir = Path(args.data)
    else:
        cfg = build(SynthConfig, section(kv, "synth"))
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        data_dir = out / "data"
        for path in generate(cfg).write(data_dir).values():
            man.output(path)
        man.config["synth"] = _jsonable(cfg)
        man.seeds["synth"] = cfg.seed
    for name in DATA_FILES:
        if (data_dir / name).is_file():
            man.input(data_dir / name)
    ds = load_dataset_dir(data_dir, args.min_apps)
    report = _suite(args, kv, man, ds)
    _write_report(report, out, man)
    man.write(out)
    sys.stdout.write(report.pretty())
    return 0


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="overrides every seed the stage uses")
    p.add_argument("--out", type=Path, required=out_required, help="output directory")
    p.add_argument("--workers", type=int, help="threads for embedding training (1 = deterministic)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _data_args(p: argparse.ArgumentParser, labels_required: bool = False) -> None:
    p.add_argument("--data", type=Path, help="directory holding " + ", ".join(DATA_FILES))
    p.add_argument("--interactions", type=Path)
    p.add_argument("--app-meta", type=Path)
    p.add_argument("--user-meta", type=Path)
    p.add_argument("--labels", type=Path, required=labels_required)
    p.add_argument("--min-apps", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="user2vec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    _common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-corpus", help="turn a dataset into a tagged document corpus")
    _common(p)
    _data_args(p)
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train-embed", help="train word2vec/doc2vec on a corpus")
    _common(p)
    _data_args(p)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--scheme", choices=SCHEMES, help="scheme the corpus was built with")
    p.add_argument("--mode", choices=("cbow", "sg", "dm", "dbow"))
    p.add_argument("--objective", choices=("softmax", "negative_sampling"))
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--items", action="store_true", help="also infer app vectors (needs --data and --scheme)")
    p.add_argument("--infer-epochs", type=int, help="defaults to the training epochs")
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("fit-baseline", help="tfidf / lsa / lda / word2vec-centroid vectors")
    _common(p)
    _data_args(p)
    p.add_argument("--method", choices=BASELINE_METHODS, required=True)
    p.set_defaults(func=cmd_fit_baseline)

    p = sub.add_parser("recommend", help="nearest neighbours of a tag in a vector file")
    _common(p, out_required=False)
    p.add_argument("--space", type=Path, required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--filter", choices=("apps", "users", "all"), default="all")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("eval-suite", help="look-alike logistic regression suite")
    _common(p)
    _data_args(p, labels_required=True)
    p.add_argument("--methods", help="comma list, e.g. none,tfidf+d2v_cf,user2vec+meta")
    p.add_argument("--vectors", action="append", metavar="NAME=PATH", help="precomputed user vectors")
    p.set_defaults(func=cmd_eval_suite)

    p = sub.add_parser("report", help="re-render a suite report")
    _common(p, out_required=False)
    p.add_argument("--report", type=Path, required=True, help="report.json from eval-suite")
    p.add_argument("--format", choices=("pretty", "json", "csv", "delta-csv"), default="pretty")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="generate data (or use --data) and run the suite from one config")
    _common(p)
    p.add_argument("--data", type=Path)
    p.add_argument("--min-apps", type=int, default=3)
    p.add_argument("--methods")
    p.add_argument("--vectors", action="append", metavar="NAME=PATH")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "k", 1) is not None and getattr(args, "k", 1) < 1:
        parser.error("--k must be >= 1")
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except User2VecError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"IoFailure: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
