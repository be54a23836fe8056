import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from user2vec.synth import SynthConfig, generate  # noqa: E402

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory):
    """A 300-user synthetic dataset on disk, shared by module tests."""
    out = tmp_path_factory.mktemp("small")
    data = generate(SynthConfig(n_users=300, n_apps=60, seed=11))
    data.write(out)
    return out, data


@pytest.fixture(scope="session")
def small_dataset(small_data_dir):
    from user2vec.representations import load_dataset_dir

    return load_dataset_dir(small_data_dir[0])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
