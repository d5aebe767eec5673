import pathlib

import pytest

from fatou2d.fatou import build_context
from fatou2d.germ import GermMap, abate_1_11
from fatou2d.normal_form import normalize

DATA = pathlib.Path(__file__).resolve().parents[1] / "data"


def k3_template():
    """(x (1 + y^2), y (1 + y^2) + x^3): order 3, one non-degenerate direction."""
    return GermMap.from_parts({(1, 2): 1}, {(0, 3): 1, (3, 0): 1})


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def abate():
    return abate_1_11()


@pytest.fixture(scope="session")
def abate_ng(abate):
    return normalize(abate)


@pytest.fixture(scope="session")
def ctx2(abate_ng):
    return build_context(abate_ng)


@pytest.fixture(scope="session")
def k3_ng():
    return normalize(k3_template())


@pytest.fixture(scope="session")
def ctx3(k3_ng):
    return build_context(k3_ng)


# -- acceptance report ---------------------------------------------------------------

ACCEPTANCE_LINES = []


def record(label, passed, detail, seconds, limit):
    """Store one acceptance line; the verdict also requires the time limit."""
    ok = bool(passed) and seconds < limit
    ACCEPTANCE_LINES.append(
        f"{'PASS' if ok else 'FAIL'} {label}: {detail} [{seconds:.1f} s, limit {limit:g} s]")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
