import numpy as np
import pytest

from amcqueue import BmapSpec, paper_bmap

# one BMAP per phase count for the grids
SINGLE_PHASE = BmapSpec(([[-1.5]], [[1.0]], [[0.5]]))


@pytest.fixture
def paper():
    return paper_bmap()


@pytest.fixture
def single_phase():
    return SINGLE_PHASE


def random_bmap(rng, S, K, T=1.0):
    """A valid, irreducible BMAP with random rates."""
    mats = [rng.uniform(0.0, 1.0, (S, S)) * (rng.random((S, S)) < 0.7) for _ in range(K + 1)]
    if S > 1:
        ring = np.roll(np.eye(S), 1, axis=1)
        mats[0] = mats[0] + 0.05 * ring
    mats[1] = mats[1] + 0.05 * np.eye(S)
    np.fill_diagonal(mats[0], 0.0)
    out_rate = sum(m.sum(axis=1) for m in mats)
    mats[0] = mats[0] - np.diag(out_rate)
    return BmapSpec(tuple(mats), T)


_ACCEPTANCE = []


def record_criterion(number, passed, detail):
    _ACCEPTANCE.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
