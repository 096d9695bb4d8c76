import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scenes import balanced_clean  # noqa: E402
from uwimaging.colorstats import fit_model  # noqa: E402
from uwimaging.water import load_table  # noqa: E402


@pytest.fixture(scope="session")
def table():
    return load_table()


@pytest.fixture(scope="session")
def lab_model():
    """Prior fitted on channel-balanced textured scenes (the synthetic clean domain)."""
    rng = np.random.default_rng(123)
    return fit_model([balanced_clean(rng, 64) for _ in range(40)], {"source": "balanced_clean"})


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(id, passed, detail)."""

    def record(cid, passed, detail):
        ACCEPTANCE.append((cid, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {cid:<6} {detail}")
