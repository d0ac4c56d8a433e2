import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pinrefine.inventory import shipped_inventory  # noqa: E402
from pinrefine.refine import shipped_dictionary, train_ngram  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def inv():
    return shipped_inventory()


@pytest.fixture(scope="session")
def dictionary(inv):
    return shipped_dictionary(inv)


@pytest.fixture(scope="session")
def corpus_lines():
    return (FIXTURES / "corpus.txt").read_text(encoding="utf-8").splitlines()


@pytest.fixture(scope="session")
def trigram(corpus_lines):
    return train_ngram(corpus_lines, order=3, k=0.1)


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.outcome == "passed" else "FAIL"


_ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        number = int(name.split("_")[2])
        label = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {number:2d} {_ACCEPTANCE[name]}  {label}")
