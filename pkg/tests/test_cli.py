import hashlib
import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

from conftest import write
from user2vec.cli import EXIT_DATA, EXIT_USAGE, main
from user2vec.config import build, parse_kv, section
from user2vec.errors import ConfigInvalid
from user2vec.synth import SynthConfig
from user2vec.vectors import load_vectors

GOLDEN = Path(__file__).parent / "golden"


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen-data", "--config", str(GOLDEN / "synth.cfg"), "--seed", "7", "--out", str(d)]) == 0
    return d


# ------------------------------------------------------------------ config files

def test_parse_kv():
    kv = parse_kv("# comment\nn_users = 10\n\nembed.dim=8  # trailing\n")
    assert kv == {"n_users": "10", "embed.dim": "8"}
    assert section(kv, "embed") == {"dim": "8"}
    nested = parse_kv("embed.dim = 8\nembed.user2vec.dim = 12\n")
    assert section(nested, "embed") == {"dim": "8"}
    assert section(nested, "embed.user2vec") == {"dim": "12"}
    with pytest.raises(ConfigInvalid):
        parse_kv("just words\n")


def test_build_coerces_types():
    cfg = build(SynthConfig, {"n_users": "5", "gender_priors": "0.4, 0.6", "popularity_skew": "yes",
                              "affinity": "none"})
    assert cfg.n_users == 5 and cfg.gender_priors == (0.4, 0.6) and cfg.popularity_skew and cfg.affinity is None
    with pytest.raises(ConfigInvalid):
        build(SynthConfig, {"n_userz": "5"})
    with pytest.raises(ConfigInvalid):
        build(SynthConfig, {"n_users": "many"})


def test_config_error_exits_one(tmp_path, capsys):
    cfg = write(tmp_path / "bad.cfg", "n_userz = 3\n")
    code, _, err = run(capsys, "gen-data", "--config", cfg, "--out", tmp_path / "o")
    assert code == EXIT_DATA and err.startswith("ConfigInvalid")


# ------------------------------------------------------------------ exit codes

def test_eval_suite_without_labels_is_usage_error(data_dir, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval-suite", "--data", str(data_dir), "--out", str(tmp_path)])
    assert exc.value.code == EXIT_USAGE
    assert "--labels" in capsys.readouterr().err


def test_missing_labels_file_is_usage_error(data_dir, tmp_path, capsys):
    code, _, err = run(capsys, "eval-suite", "--data", data_dir, "--labels", tmp_path / "nope.csv",
                       "--out", tmp_path / "o")
    assert code == EXIT_USAGE and "nope.csv" in err


def test_malformed_data_exits_one_with_error_name(tmp_path, capsys):
    write(tmp_path / "interactions.csv", "ifa,bundle_id\nu1\n")
    write(tmp_path / "app_meta.csv", "bundle_id,description,genre,avg_rating,num_ratings,price,store\n")
    code, _, err = run(capsys, "build-corpus", "--data", tmp_path, "--scheme", "cf", "--out", tmp_path / "o")
    assert code == EXIT_DATA and err.startswith("MalformedRecord")


def test_bad_k_and_unknown_tag(tmp_path, capsys):
    space = write(tmp_path / "v.txt", "2 2\nuser:a 1 0\nuser:b 0 1\n")
    with pytest.raises(SystemExit) as exc:
        main(["recommend", "--space", str(space), "--query", "user:a", "--k", "0"])
    assert exc.value.code == EXIT_USAGE
    capsys.readouterr()
    code, _, err = run(capsys, "recommend", "--space", space, "--query", "user:zz")
    assert code == EXIT_DATA and err.startswith("UnknownTag")


# ------------------------------------------------------------------ stages

@pytest.fixture(scope="module")
def cf_run(data_dir):
    root = data_dir.parent
    assert main(["build-corpus", "--data", str(data_dir), "--scheme", "cf", "--out", str(root / "corpus")]) == 0
    assert main(["train-embed", "--config", str(GOLDEN / "embed.cfg"), "--corpus", str(root / "corpus/corpus.tsv"),
                 "--scheme", "cf", "--out", str(root / "model")]) == 0
    return root


def test_recommend_matches_golden(cf_run, capsys):
    code, out, _ = run(capsys, "recommend", "--space", cf_run / "model/vectors.txt", "--query", "user:u00000",
                       "--k", "10", "--filter", "users")
    assert code == 0
    assert out == (GOLDEN / "recommend_cf_users.tsv").read_text()


def test_manifests_written(cf_run, data_dir):
    for path, sub in [(data_dir, "gen-data"), (cf_run / "corpus", "build-corpus"), (cf_run / "model", "train-embed")]:
        m = json.loads((path / f"{sub}.manifest.json").read_text())
        assert m["subcommand"] == sub and "wall_clock_seconds" in m
        for out, d in m["output_digests"].items():
            assert digest(Path(out)) == d
    m = json.loads((cf_run / "model/train-embed.manifest.json").read_text())
    assert m["inputs"][str(cf_run / "corpus/corpus.tsv")] == digest(cf_run / "corpus/corpus.tsv")
    assert m["seeds"]["train"] == 1


def test_stages_idempotent(cf_run, data_dir):
    root = cf_run
    before = {p: digest(p) for p in (root / "corpus").iterdir()} | {p: digest(p) for p in (root / "model").iterdir()}
    manifests = {p: json.loads(p.read_text()) for p in before if p.name.endswith(".manifest.json")}
    assert main(["build-corpus", "--data", str(data_dir), "--scheme", "cf", "--out", str(root / "corpus")]) == 0
    assert main(["train-embed", "--config", str(GOLDEN / "embed.cfg"), "--corpus", str(root / "corpus/corpus.tsv"),
                 "--scheme", "cf", "--out", str(root / "model")]) == 0
    for p, d in before.items():
        if p in manifests:
            again = json.loads(p.read_text())
            again.pop("wall_clock_seconds")
            old = dict(manifests[p])
            old.pop("wall_clock_seconds")
            assert again == old
        else:
            assert digest(p) == d, p.name


def test_train_embed_items(cf_run, data_dir):
    out = cf_run / "items"
    assert main(["train-embed", "--config", str(GOLDEN / "embed.cfg"), "--corpus", str(cf_run / "corpus/corpus.tsv"),
                 "--scheme", "cf", "--items", "--data", str(data_dir), "--out", str(out)]) == 0
    tags = set(load_vectors(out / "vectors.txt"))
    assert any(t.startswith("app:") for t in tags) and any(t.startswith("user:") for t in tags)


def test_items_need_doc_mode(cf_run, data_dir, tmp_path, capsys):
    code, _, _ = run(capsys, "train-embed", "--corpus", cf_run / "corpus/corpus.tsv", "--scheme", "cf", "--mode",
                     "sg", "--items", "--data", data_dir, "--out", tmp_path, "--epochs", "1")
    assert code == EXIT_USAGE


def test_fit_baseline_tfidf(data_dir, tmp_path):
    assert main(["fit-baseline", "--data", str(data_dir), "--method", "tfidf", "--out", str(tmp_path)]) == 0
    vecs = load_vectors(tmp_path / "vectors.txt")
    assert sum(t.startswith("user:") for t in vecs) == 300
    assert sum(t.startswith("app:") for t in vecs) > 0


def test_eval_suite_and_report(cf_run, data_dir, tmp_path, capsys):
    out = tmp_path / "suite"
    code, text, _ = run(capsys, "eval-suite", "--data", data_dir, "--labels", data_dir / "labels.csv",
                        "--methods", "none,cf", "--vectors", f"cf={cf_run / 'model/vectors.txt'}",
                        "--config", write(tmp_path / "s.cfg", "suite.folds = 3\n"), "--out", out)
    assert code == 0 and "Average" in text
    for name in ("report.json", "report_auc.csv", "report_delta.csv", "report.txt", "eval-suite.manifest.json"):
        assert (out / name).is_file()
    code, csv_text, _ = run(capsys, "report", "--report", out / "report.json", "--format", "csv")
    assert code == 0 and csv_text == (out / "report_auc.csv").read_text()
    code, _, _ = run(capsys, "report", "--report", out / "report_auc.csv")
    assert code == EXIT_USAGE


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "user2vec.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gen-data" in proc.stdout


@pytest.mark.slow
def test_end_to_end_smoke_default_config(tmp_path, capsys):
    t0 = time.time()
    d = tmp_path / "data"
    assert main(["gen-data", "--out", str(d)]) == 0
    assert main(["build-corpus", "--data", str(d), "--scheme", "user2vec", "--out", str(tmp_path / "corpus")]) == 0
    assert main(["train-embed", "--corpus", str(tmp_path / "corpus/corpus.tsv"), "--scheme", "user2vec",
                 "--mode", "dm", "--out", str(tmp_path / "model")]) == 0
    code, text, _ = run(capsys, "eval-suite", "--data", d, "--labels", d / "labels.csv", "--methods",
                        "none,user2vec", "--vectors", f"user2vec={tmp_path / 'model/vectors.txt'}",
                        "--out", tmp_path / "suite")
    assert code == 0
    report = json.loads((tmp_path / "suite/report.json").read_text())
    assert report["methods"] == ["none", "user2vec"] and len(report["tasks"]) == 9
    assert time.time() - t0 < 600
