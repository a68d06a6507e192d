import numpy as np
import pytest

from beamkey.channel import Scenario

_CRITERIA: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True])
    entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def one_path(M, N, aod, aoa, var=1.0, **kw):
    """Single-UT, single-path scenario."""
    return Scenario(M=M, K=1, N=(N,), NP=1, aoa=[[aoa]], aod=[[aod]], gain_var=[[var]], **kw)


def semi_unitary(rng, n, d):
    Z = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    Q, _ = np.linalg.qr(Z)
    return Q


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return G @ G.conj().T / rank
