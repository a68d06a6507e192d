"""Acceptance criteria; the terminal summary prints one PASS/FAIL line per criterion."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from beamkey.channel import (
    Scenario,
    dft_beam_matrix,
    estimate_covariances,
    grid_index,
    random_scenario,
    synthesize_channel,
)
from beamkey.cli import main
from beamkey.config import load_scenario
from beamkey.design import (
    allocate_nonoverlapping,
    brute_force_U_oracle,
    eigen_rate_bound,
    optimal_selection_U,
    selection_rate,
)
from beamkey.experiments import EXPERIMENTS, ExperimentSpec, bdr_point, run_experiment
from beamkey.keygen.pipeline import link_entries
from beamkey.keyrate import (
    RateInputs,
    empirical_mi,
    key_rate_general,
    key_rate_orthogonal,
    key_rate_reused,
    leakage_ratio,
)
from beamkey.probing import PilotConfig, make_pilots, pilot_cross_covariances, probe_round

from conftest import random_psd, semi_unitary

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
SNR_GRID = tuple(float(x) for x in range(-10, 31, 5))
TRIALS = 2000

pytestmark = pytest.mark.filterwarnings("ignore::beamkey.design.AllocationWarning")


def scenario(name):
    return load_scenario(SCENARIOS / f"{name}.toml")


# 1 -------------------------------------------------------------------------

def _random_probe_instance(rng):
    K = int(rng.integers(1, 3))
    M = int(rng.integers(4, 9))
    N = [int(rng.integers(1, 3)) for _ in range(K)]
    NP = int(rng.integers(1, 4))
    snr = float(rng.uniform(0.0, 15.0))
    s = random_scenario(M, K, N, NP, seed=int(rng.integers(2**31)), snr_db=snr)
    Me = int(rng.integers(1, min(M, 3) + 1))
    Ne = min(N)
    Pt = [semi_unitary(rng, M, Me) for _ in range(K)]
    Ct = [semi_unitary(rng, n, Ne) for n in N]
    P = [dft_beam_matrix(M) @ x for x in Pt]
    C = [dft_beam_matrix(n) @ x for n, x in zip(N, Ct)]
    mode = ("orthogonal", "reused")[int(rng.integers(2))]
    pilots = make_pilots(PilotConfig.minimal(mode, K, Me, Ne), K)
    return s, P, C, Pt, Ct, pilots


@pytest.mark.acceptance(1, "general key rate matches empirical MI on random small instances")
def test_general_rate_matches_monte_carlo():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        s, P, C, Pt, Ct, pilots = _random_probe_instance(rng)
        Lam = estimate_covariances(s, mode="analytic").Lambda
        SDL, SUL = pilot_cross_covariances(pilots)
        inp = RateInputs(Lam, Pt, Ct, s.noise_var, SDL, SUL)
        H = synthesize_channel(s, rng, size=100_000).H
        obs = probe_round(H, P, C, pilots, s.noise_var, rng)
        for k in range(s.K):
            est = empirical_mi(obs.zDL[k], obs.zUL[k])
            assert not est.capped
            worst = max(worst, abs(key_rate_general(inp, k) - est.value))
    elapsed = time.perf_counter() - start
    assert worst <= 0.1, worst
    assert elapsed <= 300.0, elapsed


# 2 -------------------------------------------------------------------------

def _block_instance(rng):
    K = int(rng.integers(2, 4))
    b = int(rng.integers(2, 5))
    N = int(rng.integers(1, 3))
    M = K * b
    Me = int(rng.integers(1, b + 1))
    Ne = int(rng.integers(1, N + 1))
    Lam, Pt = [], []
    for k in range(K):
        rows = np.zeros((M * N, b * N), dtype=complex)
        idx = [m * N + n for m in range(k * b, (k + 1) * b) for n in range(N)]
        rows[idx, :] = np.eye(b * N)
        Lam.append(rows @ random_psd(rng, b * N) @ rows.conj().T)
        E = np.zeros((M, b))
        E[k * b:(k + 1) * b] = np.eye(b)
        Pt.append(E @ semi_unitary(rng, b, Me))
    Ct = [semi_unitary(rng, N, Ne) for _ in range(K)]
    return RateInputs(Lam, Pt, Ct, float(10 ** rng.uniform(-1.5, 1)))


@pytest.mark.acceptance(2, "reused with neutralization equals orthogonal equals general")
def test_specialization_identities():
    rng = np.random.default_rng(202)
    for _ in range(100):
        inp = _block_instance(rng)
        for k in range(inp.K):
            orth = key_rate_orthogonal(inp, k)
            assert abs(key_rate_reused(inp, k) - orth) <= 1e-9
            assert abs(key_rate_general(inp, k) - orth) <= 1e-9


@pytest.mark.acceptance(2, "reused with neutralization equals orthogonal equals general")
def test_single_user_collapse():
    rng = np.random.default_rng(203)
    for _ in range(100):
        M, N = int(rng.integers(2, 9)), int(rng.integers(1, 3))
        Me, Ne = int(rng.integers(1, M + 1)), int(rng.integers(1, N + 1))
        inp = RateInputs([random_psd(rng, M * N, rank=int(rng.integers(1, M * N + 1)))],
                         [semi_unitary(rng, M, Me)], [semi_unitary(rng, N, Ne)],
                         float(10 ** rng.uniform(-1.5, 1)))
        orth = key_rate_orthogonal(inp, 0)
        assert abs(key_rate_reused(inp, 0) - orth) <= 1e-9
        assert abs(key_rate_general(inp, 0) - orth) <= 1e-9


# 3 -------------------------------------------------------------------------

def _dominant_lambda(rng, n):
    d = rng.exponential(size=n) * 10 ** rng.uniform(-1, 1, size=n)
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    off = (G + G.conj().T) / 2
    np.fill_diagonal(off, 0)
    off *= 0.01 * d.min() / max(np.abs(off).sum(axis=1).max(), 1e-300)
    return np.diag(d) + off


@pytest.mark.acceptance(3, "optimal selection matches brute force; no unitary beats the bound")
def test_selection_matches_brute_force():
    rng = np.random.default_rng(303)
    for i in range(200):
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, n + 1))
        if i % 2:
            L = _dominant_lambda(rng, n)
        else:
            L = np.diag(rng.exponential(size=n) * 10 ** rng.uniform(-1, 1, size=n))
        _, brute = brute_force_U_oracle(L, d)
        assert abs(optimal_selection_U(L, d).rate - brute) <= 1e-10


@pytest.mark.acceptance(3, "optimal selection matches brute force; no unitary beats the bound")
def test_random_unitaries_never_beat_bound():
    rng = np.random.default_rng(304)
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, n + 1))
        L = random_psd(rng, n, rank=int(rng.integers(1, n + 1))) * 10 ** rng.uniform(-1, 1.5)
        assert selection_rate(L, semi_unitary(rng, n, d)) <= eigen_rate_bound(L, d) + 1e-9


# 4 -------------------------------------------------------------------------

def _gamma_by_determinants(rho, nv):
    v = 1.0 + nv
    R = np.array([[v, 1, rho], [1, v, rho], [rho, rho, v]])
    det = lambda idx: np.linalg.det(R[np.ix_(idx, idx)])  # noqa: E731
    r1 = math.log(det([0, 2]) * det([1, 2]) / (det([0, 1, 2]) * det([2])))
    rh = math.log(det([0]) * det([1]) / det([0, 1]))
    return 1.0 - r1 / rh


@pytest.mark.acceptance(4, "leakage ratio: closed form and small-noise limit")
@pytest.mark.parametrize("rho", [-1.0, -0.5, 0.0, 0.5, 1.0])
@pytest.mark.parametrize("nv", [0.01, 0.1, 1.0, 10.0])
def test_leakage_ratio_closed_form(rho, nv):
    assert abs(leakage_ratio(rho, nv) - _gamma_by_determinants(rho, nv)) <= 1e-10


@pytest.mark.acceptance(4, "leakage ratio: closed form and small-noise limit")
@pytest.mark.parametrize("rho", [-1.0, 1.0])
def test_leakage_ratio_small_noise(rho):
    assert leakage_ratio(rho, 1e-4) >= 0.99


# 5 -------------------------------------------------------------------------

@pytest.mark.acceptance(5, "beam sparsity on grid; energy capture grows with M off grid")
@pytest.mark.parametrize("M", [16, 64])
def test_on_grid_sparsity(M):
    for seed in range(10):
        s = random_scenario(M, 2, 4, 3, on_grid=True, seed=seed)
        covs = estimate_covariances(s, mode="analytic")
        for k in range(s.K):
            bs = {grid_index(a, M) for a in s.aod[k]}
            ut = {grid_index(a, s.N[k]) for a in s.aoa[k]}
            assert None not in bs | ut
            support = [m * s.N[k] + n for m in bs for n in ut]
            L = covs.Lambda[k]
            diag = np.real(np.diag(L))
            off = diag.sum() - diag[support].sum()
            off_energy = np.sum(np.abs(L) ** 2) - np.sum(np.abs(L[np.ix_(support, support)]) ** 2)
            assert off <= 1e-15 * diag.sum()
            assert off_energy <= 1e-15 * np.sum(np.abs(L) ** 2)


def _capture(M, aod, var):
    s = Scenario(M=M, K=1, N=1, NP=len(aod), aoa=[np.zeros(len(aod))], aod=[aod], gain_var=[var])
    p = np.sort(np.real(np.diag(estimate_covariances(s, mode="analytic").Rt_BS[0])))[::-1]
    return p[:len(aod)].sum() / p.sum()


@pytest.mark.acceptance(5, "beam sparsity on grid; energy capture grows with M off grid")
def test_off_grid_capture_monotone():
    rng = np.random.default_rng(505)
    sizes = (8, 16, 32, 64, 128)
    monotone = 0
    for _ in range(100):
        aod = np.arcsin(rng.uniform(-0.99, 0.99, size=6))
        var = np.full(6, 1 / 6)
        cap = [_capture(M, aod, var) for M in sizes]
        monotone += bool(np.all(np.diff(cap) >= 0))
    assert monotone >= 95, monotone


# 6 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig_single():
    spec = ExperimentSpec("single-user-rate", scenario("single_user_m64"), SNR_GRID, trials=TRIALS,
                          M_e=(4, 6))
    return run_experiment(spec)


@pytest.mark.acceptance(6, "designed precoder rate close to perfect CSI (M=64)")
def test_designed_rate_near_perfect(fig_single):
    t = fig_single
    hi = t["snr_db"] >= 10
    perfect, me6, me4 = t["rate_perfect_csi"], t["rate_designed_P_me6"], t["rate_designed_P_me4"]
    assert np.all(me6[hi] >= 0.95 * perfect[hi])
    assert np.all(me4 < me6)
    assert np.all(me4[hi] >= 0.85 * me6[hi])


# 7 -------------------------------------------------------------------------

@pytest.mark.acceptance(7, "reused beats orthogonal; non-overlap beats overlap (unit rate)")
def test_pilot_reuse_ordering():
    t = run_experiment(ExperimentSpec("unit-rate-pilots", scenario("multiuser_m64"), SNR_GRID,
                                      trials=TRIALS))
    assert np.all(t["unit_rate_reused"] > t["unit_rate_orthogonal"])


@pytest.mark.acceptance(7, "reused beats orthogonal; non-overlap beats overlap (unit rate)")
def test_overlap_ordering():
    t = run_experiment(ExperimentSpec("unit-rate-overlap", scenario("overlap_m64"), SNR_GRID,
                                      trials=TRIALS, M_e=6))
    assert len(set(t.meta["groups"])) > 1
    assert np.all(t["unit_rate_nonoverlap"] >= t["unit_rate_overlap"])


# 8 -------------------------------------------------------------------------

@pytest.mark.acceptance(8, "sum rate doubles from K=2 to K=4")
def test_sum_rate_scaling():
    t = run_experiment(ExperimentSpec("rate-vs-k", scenario("multiuser_m64"), SNR_GRID,
                                      trials=TRIALS, users=(2, 4)))
    ratio = t["sum_rate_K4"] / t["sum_rate_K2"]
    assert np.all((ratio >= 1.8) & (ratio <= 2.2)), ratio


# 9 -------------------------------------------------------------------------

@pytest.mark.acceptance(9, "bit disagreement: legitimate near single-user, cross-user near 1/2")
def test_bdr_curves():
    t = run_experiment(ExperimentSpec("bdr-curves", scenario("multiuser_m64"), SNR_GRID,
                                      trials=TRIALS))
    assert np.all(np.abs(t["bdr_legitimate"] - t["bdr_single_user"]) <= 0.02)
    cross = t["bdr_cross_user"]
    assert np.all((cross >= 0.45) & (cross <= 0.55)), cross


@pytest.mark.acceptance(9, "bit disagreement: legitimate near single-user, cross-user near 1/2")
def test_zero_noise_bdr():
    s = scenario("multiuser_m64")
    covs = estimate_covariances(s, mode="analytic")
    D = allocate_nonoverlapping(covs, s.NP, min(s.N))
    pilots = make_pilots(PilotConfig.minimal("reused", s.K, s.NP, min(s.N)), s.K)
    legit, single, _ = bdr_point(s, D, pilots, link_entries(D, covs.Lambda), 0.0, 200,
                                 np.random.default_rng(909))
    assert legit == 0.0 and single == 0.0


# 10 ------------------------------------------------------------------------

@pytest.mark.acceptance(10, "generated keys pass the randomness tests")
def test_nist_keys():
    t = run_experiment(ExperimentSpec("nist", scenario("multiuser_m64"), (20.0,), trials=1000))
    rows = {r[0]: r for r in t.rows}
    i_p, i_pass = t.columns.index("mean_p_value"), t.columns.index("pass_ratio[ratio]")
    for name, row in rows.items():
        assert row[i_pass] >= 0.88, (name, row)
    for name in ("frequency", "runs", "approximate_entropy"):
        assert rows[name][i_p] >= 0.3, (name, rows[name])


# 11 ------------------------------------------------------------------------

def _cli_args(name):
    args = [name, "--seed", "7", "--trials", "200"]
    if name != "nist":
        args += ["--snr", "0,10,20"]
    if name == "unit-rate-overlap":
        args += ["--scenario", str(SCENARIOS / "overlap_m64.toml"), "--me", "6"]
    elif name != "leakage-curves":
        args += ["--scenario", str(SCENARIOS / "multiuser_m64.toml")]
    return args


@pytest.mark.acceptance(11, "CSV outputs byte-identical across reruns")
@pytest.mark.parametrize("name", EXPERIMENTS)
def test_reruns_byte_identical(name, tmp_path, monkeypatch):
    outs = []
    for i, threads in enumerate(("1", "1", "4")):
        monkeypatch.setenv("BEAMKEY_THREADS", threads)
        path = tmp_path / f"{i}.csv"
        assert main(_cli_args(name) + ["--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]
