import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from archview import fixture_path, load_model  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_file() -> str:
    return str(fixture_path())


@pytest.fixture(scope="session")
def fixture_text(fixture_file) -> str:
    return Path(fixture_file).read_text(encoding="utf-8")


@pytest.fixture
def grid(fixture_file):
    """A fresh copy of the bundled power-grid model."""
    return load_model(fixture_file)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"AC{number} {status} {title}: {detail}")
