import shutil
import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent / "fixtures"
sys.path.insert(0, str(FIXTURES))


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def bench_pairs():
    from build_bench_fixture import load_pairs

    return load_pairs()


@pytest.fixture
def e2e_dir(tmp_path) -> Path:
    """Writable copy of the end-to-end fixture (repo, vulns, truth, config, replay)."""
    work = tmp_path / "e2e"
    shutil.copytree(FIXTURES / "e2e", work, ignore=shutil.ignore_patterns("out"))
    return work


# Acceptance criterion outcomes, filled by test_acceptance.py and echoed after the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
