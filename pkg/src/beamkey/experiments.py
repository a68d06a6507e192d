"""Experiment sweeps producing result tables.

Every experiment is deterministic given its seed: design covariances use
stream 0 and sweep point ``i`` uses stream ``1 + i`` of the master seed.
Closed-form rates use the exact beam correlation of the path model; beam
selection uses Monte-Carlo covariances from ``trials`` channel draws, as a
real system would.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._linalg import crandn, derive_rng
from .channel import CovarianceSet, Scenario, estimate_covariances, grid_sine, synthesize_channel
from .design import (
    DesignedMatrices,
    allocate_nonoverlapping,
    design_strongest,
    optimal_selection_U,
    pilot_groups,
    select_rx_beams,
    select_tx_beams,
    selection_matrix,
)
from .io import Table
from .keygen.nist import evaluate_keys
from .keygen.pipeline import link_entries, probe_rounds, quantize_links, split_keys
from .keygen.quantize import bdr
from .keyrate import (
    RateInputs,
    conditional_key_rate_empirical,
    empirical_mi,
    key_rate_general,
    key_rate_orthogonal,
    leakage_ratio,
    perfect_csi_rate,
    rate_full_leakage,
    rate_independent,
    unit_key_rate,
)
from .probing import PilotConfig, make_pilots, pilot_cross_covariances

EXPERIMENTS = (
    "single-user-rate",
    "beam-map",
    "rate-vs-k",
    "unit-rate-pilots",
    "unit-rate-overlap",
    "leakage-curves",
    "bdr-curves",
    "nist",
)
DB_FLOOR = -300.0


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: which experiment, on which scenario, over which SNRs."""

    experiment: str
    scenario: Scenario | None
    snr_db: tuple[float, ...]
    trials: int = 2000
    seed: int = 0
    M_e: tuple[int, ...] | None = None
    N_e: int | None = None
    pilot_mode: str = "reused"
    cov_mode: str = "monte-carlo"
    users: tuple[int, ...] = (2, 4, 6)
    rho: tuple[float, ...] = (0.2, 0.5, 0.8, 1.0)
    threshold: float = 0.05
    key_bits: int = 256
    bits_per_sample: int = 2

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(x) for x in self.snr_db))
        if self.M_e is not None:
            object.__setattr__(self, "M_e", tuple(int(m) for m in np.atleast_1d(self.M_e)))
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.snr_db:
            raise ValueError("SNR grid must not be empty")
        if self.scenario is None and self.experiment != "leakage-curves":
            raise ValueError(f"experiment {self.experiment!r} needs a scenario")
        if self.pilot_mode not in ("reused", "orthogonal"):
            raise ValueError(f"pilot mode must be 'reused' or 'orthogonal', got {self.pilot_mode!r}")

    def me(self) -> int:
        return self.M_e[0] if self.M_e else self.scenario.NP

    def ne(self, s: Scenario | None = None) -> int:
        s = s or self.scenario
        return self.N_e if self.N_e is not None else min(s.NP, min(s.N))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BEAMKEY_THREADS", "1")))
    except ValueError:
        return 1


def _sweep(fn: Callable[[int, float], tuple], snrs: Sequence[float]) -> list[tuple]:
    """Evaluate every sweep point; results keep the grid order."""
    args = list(enumerate(snrs))
    n = _workers()
    if n == 1:
        return [fn(i, x) for i, x in args]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(lambda a: fn(*a), args))


def _noise(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def design_covariances(spec: ExperimentSpec, s: Scenario) -> CovarianceSet:
    return estimate_covariances(s, spec.trials, derive_rng(spec.seed, 0), mode=spec.cov_mode)


def exact_lambda(s: Scenario) -> list[np.ndarray]:
    return estimate_covariances(s, mode="analytic").Lambda


def _pilots(mode: str, K: int, M_e: int, N_e: int, groups=None):
    cfg = PilotConfig.minimal(mode, K, M_e, N_e, groups=groups)
    return make_pilots(cfg, K), cfg


def _rate_inputs(Lam, D: DesignedMatrices, noise_var: float, pilots) -> RateInputs:
    SDL, SUL = pilot_cross_covariances(pilots)
    return RateInputs(Lam, D.Pt, D.Ct, noise_var, SDL, SUL)


def _sum_rate(Lam, D, noise_var, pilots) -> float:
    inp = _rate_inputs(Lam, D, noise_var, pilots)
    return float(sum(key_rate_general(inp, k) for k in range(inp.K)))


def _multi_user_design(spec: ExperimentSpec, covs: CovarianceSet, N_e: int) -> DesignedMatrices:
    if covs.K == 1:
        return design_strongest(covs, spec.me(), N_e)
    return allocate_nonoverlapping(covs, spec.me(), N_e, spec.threshold)


def single_user_rate(spec: ExperimentSpec) -> Table:
    s = spec.scenario.subset([0])
    Me_list = spec.M_e or (s.NP,)
    Ne = spec.ne(s)
    covs = design_covariances(spec, s)
    lam = exact_lambda(s)[0]
    sel = {m: (selection_matrix(s.M, select_tx_beams(covs.Rt_BS[0], m)),
               selection_matrix(s.N[0], select_rx_beams(covs.Rt_UT[0], Ne))) for m in Me_list}
    suffix = (lambda m: "") if len(Me_list) == 1 else (lambda m: f"_me{m}")
    cols = ["snr_db[dB]", "rate_perfect_csi[bits/round]"]
    for m in Me_list:
        cols += [f"rate_optimal_U{suffix(m)}[bits/round]", f"rate_designed_P{suffix(m)}[bits/round]"]
    table = Table(cols, meta={"N_e": Ne, "M_e": list(Me_list)})

    def point(i, snr):
        nv = _noise(snr)
        row = [snr, perfect_csi_rate(lam, nv)]
        for m in Me_list:
            Pt, Ct = sel[m]
            row.append(optimal_selection_U(lam / nv, m * Ne).rate)
            row.append(key_rate_orthogonal(RateInputs([lam], [Pt], [Ct], nv), 0))
        return tuple(row)

    for row in _sweep(point, spec.snr_db):
        table.add(*row)
    return table


def _db(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(np.maximum(x, 0.0)), DB_FLOOR)


def beam_separation_db(power: np.ndarray, count: int) -> float:
    """Smallest margin between a UT's own strongest beams and any other UT's power there."""
    K = power.shape[0]
    if K < 2:
        return float("inf")
    out = np.inf
    for k in range(K):
        for m in np.argsort(-power[k], kind="stable")[:count]:
            others = max(power[j, m] for j in range(K) if j != k)
            out = min(out, _db(power[k, m]) - _db(others))
    return float(out)


def beam_map(spec: ExperimentSpec) -> Table:
    s = spec.scenario
    covs = design_covariances(spec, s)
    power = covs.beam_powers()
    table = Table(["beam", "sin_angle"] + [f"power_ut{k}[dB]" for k in range(s.K)])
    for m in range(s.M):
        table.add(m, grid_sine(m, s.M), *_db(power[:, m]))
    table.meta["separation_db"] = beam_separation_db(power, spec.me())
    return table


def rate_vs_k(spec: ExperimentSpec) -> Table:
    s = spec.scenario
    Ks = sorted({k for k in spec.users if 1 <= k <= s.K})
    if not Ks:
        raise ValueError(f"no user count in {spec.users} fits a scenario with K={s.K}")
    covs = design_covariances(spec, s)
    lam = exact_lambda(s)
    Ne = spec.ne()
    setups = {}
    for K in Ks:
        sub = covs.subset(range(K))
        D = _multi_user_design(spec, sub, Ne)
        setups[K] = (D, _pilots(spec.pilot_mode, K, spec.me(), Ne)[0], lam[:K])
    table = Table(["snr_db[dB]"] + [f"sum_rate_K{K}[bits/round]" for K in Ks])

    def point(i, snr):
        nv = _noise(snr)
        return (snr, *[_sum_rate(L, D, nv, P) for D, P, L in (setups[K] for K in Ks)])

    for row in _sweep(point, spec.snr_db):
        table.add(*row)
    return table


def unit_rate_pilots(spec: ExperimentSpec) -> Table:
    s = spec.scenario
    covs = design_covariances(spec, s)
    lam = exact_lambda(s)
    Me, Ne = spec.me(), spec.ne()
    D = _multi_user_design(spec, covs, Ne)
    reused, cfg_r = _pilots("reused", s.K, Me, Ne)
    orth, cfg_o = _pilots("orthogonal", s.K, Me, Ne)
    table = Table([
        "snr_db[dB]", "sum_rate_reused[bits/round]", "sum_rate_orthogonal[bits/round]",
        "unit_rate_reused[bits/symbol]", "unit_rate_orthogonal[bits/symbol]",
    ], meta={"T_reused": cfg_r.overhead, "T_orthogonal": cfg_o.overhead})

    def point(i, snr):
        nv = _noise(snr)
        r_re = _sum_rate(lam, D, nv, reused)
        r_or = _sum_rate(lam, D, nv, orth)
        return (snr, r_re, r_or, unit_key_rate(r_re, cfg_r.overhead),
                unit_key_rate(r_or, cfg_o.overhead))

    for row in _sweep(point, spec.snr_db):
        table.add(*row)
    return table


def unit_rate_overlap(spec: ExperimentSpec) -> Table:
    """Non-overlapping allocation with one shared pilot versus strongest beams.

    The strongest-beam design lets UTs overlap, so UTs that would leak
    into each other must be separated by orthogonal pilot groups, which
    lengthens the probing.
    """
    s = spec.scenario
    covs = design_covariances(spec, s)
    lam = exact_lambda(s)
    Me, Ne = spec.me(), spec.ne()
    D_non = allocate_nonoverlapping(covs, Me, Ne, spec.threshold)
    P_non, cfg_non = _pilots("reused", s.K, Me, Ne)
    D_ov = design_strongest(covs, Me, Ne)
    groups = pilot_groups(D_ov, lam)
    P_ov, cfg_ov = _pilots("grouped", s.K, Me, Ne, groups=groups)
    table = Table([
        "snr_db[dB]", "sum_rate_nonoverlap[bits/round]", "sum_rate_overlap[bits/round]",
        "unit_rate_nonoverlap[bits/symbol]", "unit_rate_overlap[bits/symbol]",
    ], meta={"groups": groups, "T_nonoverlap": cfg_non.overhead, "T_overlap": cfg_ov.overhead})

    def point(i, snr):
        nv = _noise(snr)
        r_non = _sum_rate(lam, D_non, nv, P_non)
        r_ov = _sum_rate(lam, D_ov, nv, P_ov)
        return (snr, r_non, r_ov, unit_key_rate(r_non, cfg_non.overhead),
                unit_key_rate(r_ov, cfg_ov.overhead))

    for row in _sweep(point, spec.snr_db):
        table.add(*row)
    return table


def scalar_leakage_samples(rho: float, noise_var: float, n: int, rng: np.random.Generator):
    """Scalar two-UT model: ``(a, b, c)`` = (UT link, BS link, curious UT)."""
    h1 = crandn(rng, n)
    h2 = rho * h1 + math.sqrt(max(1.0 - rho**2, 0.0)) * crandn(rng, n)
    a = h1 + crandn(rng, n, noise_var)
    b = h1 + crandn(rng, n, noise_var)
    c = h2 + crandn(rng, n, noise_var)
    return a, b, c


def leakage_curves(spec: ExperimentSpec) -> Table:
    rhos = spec.rho
    cols = ["snr_db[dB]", "noise_var", "rate_independent[bits/round]",
            "rate_full_leakage[bits/round]"]
    cols += [f"gamma_rho{r:g}[ratio]" for r in rhos]
    cols += ["gamma_empirical_rho1[ratio]"]
    table = Table(cols)

    def point(i, snr):
        nv = _noise(snr)
        a, b, c = scalar_leakage_samples(1.0, nv, max(spec.trials, 30), derive_rng(spec.seed, 1 + i))
        r1 = conditional_key_rate_empirical(a, b, c).value
        rh = empirical_mi(a, b).value
        return (snr, nv, rate_independent(nv), rate_full_leakage(nv),
                *[leakage_ratio(r, nv) for r in rhos], 1.0 - r1 / rh)

    for row in _sweep(point, spec.snr_db):
        table.add(*row)
    return table


def bdr_point(s: Scenario, D: DesignedMatrices, pilots, entries, noise_var: float,
              rounds: int, rng: np.random.Generator, bits_per_sample: int = 2) -> tuple[float, float, float]:
    """``(legitimate, single-user, cross-user)`` BDR over ``rounds`` rounds.

    Legitimate links probe with every UT active; the single-user reference
    probes each UT alone on the same channel draws; the cross-user figure
    compares the UT keys of neighbouring UTs.
    """
    H = synthesize_channel(s, rng, size=rounds).H
    multi = quantize_links(probe_rounds(s, D, pilots, noise_var, rounds, rng, entries, H=H),
                           bits_per_sample)
    single_bs, single_ut = [], []
    for k in range(s.K):
        km = quantize_links(probe_rounds(s, D, pilots, noise_var, rounds, rng, entries,
                                         users=[k], H=H), bits_per_sample)
        single_bs.append(km.bits_bs[0])
        single_ut.append(km.bits_ut[0])
    legit = bdr(np.concatenate(multi.bits_bs), np.concatenate(multi.bits_ut))
    single = bdr(np.concatenate(single_bs), np.concatenate(single_ut))
    if s.K < 2:
        return legit, single, float("nan")
    xa, xb = [], []
    for k in range(s.K):
        j = (k + 1) % s.K
        n = min(multi.bits_ut[k].size, multi.bits_ut[j].size)
        xa.append(multi.bits_ut[k][:n])
        xb.append(multi.bits_ut[j][:n])
    return legit, single, bdr(np.concatenate(xa), np.concatenate(xb))


def _key_setup(spec: ExperimentSpec):
    s = spec.scenario
    covs = design_covariances(spec, s)
    Ne = spec.ne()
    D = _multi_user_design(spec, covs, Ne)
    pilots, _ = _pilots(spec.pilot_mode, s.K, spec.me(), Ne)
    entries = link_entries(D, exact_lambda(s))
    return s, D, pilots, entries


def bdr_curves(spec: ExperimentSpec) -> Table:
    s, D, pilots, entries = _key_setup(spec)
    table = Table(["snr_db[dB]", "bdr_legitimate[ratio]", "bdr_single_user[ratio]",
                   "bdr_cross_user[ratio]"])

    def point(i, snr):
        return (snr, *bdr_point(s, D, pilots, entries, _noise(snr), spec.trials,
                                derive_rng(spec.seed, 1 + i), spec.bits_per_sample))

    for row in _sweep(point, spec.snr_db):
        table.add(*row)
    return table


def generate_keys(spec: ExperimentSpec, snr_db: float, n_keys: int,
                  rng: np.random.Generator) -> list[np.ndarray]:
    """BS-side initial keys, taken from the UTs' links in turn."""
    s, D, pilots, entries = _key_setup(spec)
    per_round = spec.bits_per_sample * sum(len(e) for e in entries)
    if per_round == 0:
        raise RuntimeError("no informative observation entries; cannot generate keys")
    per_user = [[] for _ in range(s.K)]
    need = -(-n_keys // s.K)
    while min(len(u) for u in per_user) < need:
        rounds = max(64, -(-need * spec.key_bits // max(1, min(
            spec.bits_per_sample * len(e) for e in entries))))
        rounds = min(rounds, 4096)
        km = quantize_links(probe_rounds(s, D, pilots, _noise(snr_db), rounds, rng, entries),
                            spec.bits_per_sample)
        for k in range(s.K):
            per_user[k].extend(split_keys(km.bits_bs[k], spec.key_bits))
    keys = []
    for i in range(need):
        keys.extend(u[i] for u in per_user)
    return keys[:n_keys]


def nist(spec: ExperimentSpec) -> Table:
    snr = spec.snr_db[0]
    keys = generate_keys(spec, snr, spec.trials, derive_rng(spec.seed, 1))
    report = evaluate_keys(keys)
    table = Table(["test", "sequences", "mean_p_value", "pass_ratio[ratio]", "skipped"],
                  meta={"snr_db": snr, "keys": len(keys), "report": report})
    for row in report.rows():
        table.add(row["test"], row["sequences"], row["mean_p_value"], row["pass_ratio"],
                  row["skipped"])
    return table


RUNNERS: dict[str, Callable[[ExperimentSpec], Table]] = {
    "single-user-rate": single_user_rate,
    "beam-map": beam_map,
    "rate-vs-k": rate_vs_k,
    "unit-rate-pilots": unit_rate_pilots,
    "unit-rate-overlap": unit_rate_overlap,
    "leakage-curves": leakage_curves,
    "bdr-curves": bdr_curves,
    "nist": nist,
}


def run_experiment(spec: ExperimentSpec) -> Table:
    return RUNNERS[spec.experiment](spec)
