"""Geometric multipath MIMO channels and their beam-domain statistics.

Conventions
-----------
* A ULA steering vector of length ``n`` has entries
  ``exp(-j 2 pi d/lambda * m * sin(angle)) / sqrt(n)`` for ``m = 0..n-1``.
* Beam indices are 0-based in code. Index ``i`` is the grid direction with
  ``sin(angle) = 2 (i + 1) / n - 1``; the last index (``sin = 1``, endfire)
  cannot be reached by an angle strictly inside ``(-pi/2, pi/2)``.
* ``vec`` stacks columns, so entry ``(n, m)`` of an ``N x M`` beam-domain
  matrix sits at position ``m * N + n`` of its vectorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._linalg import crandn, hermitize, repair_psd, vec

HALF_PI = math.pi / 2
GRID_TOL = 1e-12


class ScenarioError(ValueError):
    """Invalid scenario; ``problems`` lists every violated constraint."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Scenario:
    """Full description of one multi-user TDD massive MIMO system.

    ``aoa``/``aod``/``gain_var`` are ``K x NP`` arrays; angles in radians.
    """

    M: int
    K: int
    N: tuple[int, ...]
    NP: int
    aoa: np.ndarray
    aod: np.ndarray
    gain_var: np.ndarray
    spacing_ratio: float = 0.5
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        N = (self.N,) * self.K if np.isscalar(self.N) else tuple(int(n) for n in self.N)
        object.__setattr__(self, "N", N)
        for name in ("aoa", "aod", "gain_var"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        problems = self.problems()
        if problems:
            raise ScenarioError(problems)
        for name in ("aoa", "aod", "gain_var"):
            getattr(self, name).setflags(write=False)

    def problems(self) -> list[str]:
        out = []
        for name in ("M", "K", "NP"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                out.append(f"{name}: must be an integer >= 1 (got {v})")
        if out:
            return out
        if len(self.N) != self.K:
            out.append(f"N: expected {self.K} entries (one per UT), got {len(self.N)}")
        elif any(n < 1 for n in self.N):
            out.append(f"N: every entry must be >= 1 (got {list(self.N)})")
        shape = (self.K, self.NP)
        for name in ("aoa", "aod", "gain_var"):
            arr = getattr(self, name)
            if arr.shape != shape:
                out.append(f"{name}: expected shape {shape} (K x NP), got {arr.shape}")
            elif not np.all(np.isfinite(arr)):
                out.append(f"{name}: entries must be finite")
        if out:
            return out
        for name in ("aoa", "aod"):
            bad = np.argwhere(np.abs(getattr(self, name)) >= HALF_PI)
            for k, p in bad:
                out.append(
                    f"{name}[{k}][{p}] = {getattr(self, name)[k, p]!r}: "
                    "angle must satisfy |angle| < pi/2"
                )
        if np.any(self.gain_var < 0):
            out.append("gain_var: path gain variances must be >= 0")
        for k in np.flatnonzero(self.gain_var.sum(axis=1) <= 0):
            out.append(f"gain_var[{k}]: total path power must be > 0")
        if not self.spacing_ratio > 0:
            out.append(f"spacing_ratio: must be > 0 (got {self.spacing_ratio})")
        if not np.isfinite(self.snr_db):
            out.append("snr_db: must be finite")
        return out

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    def subset(self, users: Sequence[int]) -> "Scenario":
        """Scenario restricted to the listed UTs (in the given order)."""
        users = list(users)
        return Scenario(
            M=self.M, K=len(users), N=tuple(self.N[k] for k in users), NP=self.NP,
            aoa=self.aoa[users], aod=self.aod[users], gain_var=self.gain_var[users],
            spacing_ratio=self.spacing_ratio, snr_db=self.snr_db, seed=self.seed,
        )

    def with_snr(self, snr_db: float) -> "Scenario":
        return Scenario(
            M=self.M, K=self.K, N=self.N, NP=self.NP, aoa=self.aoa, aod=self.aod,
            gain_var=self.gain_var, spacing_ratio=self.spacing_ratio,
            snr_db=snr_db, seed=self.seed,
        )


@dataclass(frozen=True)
class ChannelRealization:
    """Downlink channels ``H[k]`` (``N_k x M``, optional leading batch axes)."""

    H: list[np.ndarray]
    gains: np.ndarray

    @property
    def H_uplink(self) -> list[np.ndarray]:
        return [np.swapaxes(h, -1, -2) for h in self.H]


@dataclass(frozen=True)
class CovarianceSet:
    R_BS: list[np.ndarray]
    R_UT: list[np.ndarray]
    Rt_BS: list[np.ndarray]
    Rt_UT: list[np.ndarray]
    Lambda: list[np.ndarray]
    trials: int
    mode: str = "monte-carlo"

    @property
    def K(self) -> int:
        return len(self.Lambda)

    def beam_powers(self) -> np.ndarray:
        """``K x M`` array of BS beam powers (diagonals of ``Rt_BS``)."""
        return np.array([np.real(np.diag(R)) for R in self.Rt_BS])

    def subset(self, users: Sequence[int]) -> "CovarianceSet":
        pick = lambda xs: [xs[k] for k in users]  # noqa: E731
        return CovarianceSet(
            pick(self.R_BS), pick(self.R_UT), pick(self.Rt_BS), pick(self.Rt_UT),
            pick(self.Lambda), self.trials, self.mode,
        )


def steering_vector(angle: float, n: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """Unit-norm ULA response toward ``angle`` (radians)."""
    if n < 1:
        raise ValueError(f"antenna count must be >= 1, got {n}")
    if not abs(angle) < HALF_PI:
        raise ValueError(f"|angle| must be < pi/2, got {angle!r}")
    m = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * m * math.sin(angle)) / math.sqrt(n)


def _steering_matrix(angles: np.ndarray, n: int, spacing_ratio: float) -> np.ndarray:
    # rows are steering vectors
    m = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * np.outer(np.sin(angles), m)) / math.sqrt(n)


def dft_beam_matrix(n: int) -> np.ndarray:
    """Unitary ``n x n`` beam sampling matrix; column ``i`` points at grid beam ``i``."""
    if n < 1:
        raise ValueError(f"antenna count must be >= 1, got {n}")
    rows = np.arange(n)[:, None]
    beams = np.arange(1, n + 1)[None, :]
    return np.exp(-2j * np.pi * rows * (beams - n / 2) / n) / math.sqrt(n)


def grid_sine(index: int, n: int) -> float:
    return 2.0 * (index + 1) / n - 1.0


def grid_angle(index: int, n: int) -> float:
    """Angle of 0-based grid beam ``index``; the endfire index is rejected."""
    if not 0 <= index < n - 1:
        raise ValueError(f"grid index must be in [0, {n - 2}] for n={n}, got {index}")
    return math.asin(grid_sine(index, n))


def snap_to_grid(angle: float, n: int) -> float:
    """Nearest reachable grid angle; ties go to the lower index.

    With a single antenna every direction is on the grid, so the angle is
    returned unchanged.
    """
    if n == 1:
        return float(angle)
    x = n * (1.0 + math.sin(angle)) / 2.0 - 1.0
    index = math.ceil(x - 0.5)
    return grid_angle(min(max(index, 0), n - 2), n)


def grid_index(angle: float, n: int, tol: float = GRID_TOL) -> int | None:
    """0-based grid beam hit exactly by ``angle``, or None when off-grid."""
    if n == 1:
        return 0
    x = n * (1.0 + math.sin(angle)) / 2.0 - 1.0
    i = round(x)
    if abs(2.0 * (i + 1) / n - 1.0 - math.sin(angle)) <= tol and 0 <= i < n:
        return int(i)
    return None


def beam_transform(H: np.ndarray, A_ut: np.ndarray, A_bs: np.ndarray) -> np.ndarray:
    """Beam-domain channel ``A_ut^H H A_bs`` (batched over leading axes)."""
    H = np.asarray(H)
    if H.shape[-2] != A_ut.shape[0] or H.shape[-1] != A_bs.shape[0]:
        raise ValueError(
            f"dimension mismatch: H is {H.shape[-2:]}, A_ut is {A_ut.shape}, A_bs is {A_bs.shape}"
        )
    return A_ut.conj().T @ H @ A_bs


def path_responses(s: Scenario) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-UT steering matrices: ``(a_UT rows (NP x N_k), a_BS rows (NP x M))``."""
    a_ut = [_steering_matrix(s.aoa[k], s.N[k], s.spacing_ratio) for k in range(s.K)]
    a_bs = [_steering_matrix(s.aod[k], s.M, s.spacing_ratio) for k in range(s.K)]
    return a_ut, a_bs


def channel_from_gains(s: Scenario, gains: np.ndarray) -> ChannelRealization:
    """Build ``H_k = sum_p alpha_kp a_UT(theta_kp) a_BS(phi_kp)^H``.

    ``gains`` has shape ``(..., K, NP)``; leading axes become batch axes.
    """
    gains = np.asarray(gains, dtype=complex)
    if gains.shape[-2:] != (s.K, s.NP):
        raise ValueError(f"gains must end with shape {(s.K, s.NP)}, got {gains.shape}")
    a_ut, a_bs = path_responses(s)
    H = []
    for k in range(s.K):
        # (NP, N, M) rank-one path terms
        terms = a_ut[k][:, :, None] * a_bs[k].conj()[:, None, :]
        H.append(np.tensordot(gains[..., k, :], terms, axes=([-1], [0])))
    return ChannelRealization(H=H, gains=gains)


def draw_gains(s: Scenario, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    shape = (s.K, s.NP) if size is None else (size, s.K, s.NP)
    return crandn(rng, shape) * np.sqrt(s.gain_var)


def synthesize_channel(
    s: Scenario, rng: np.random.Generator, size: int | None = None
) -> ChannelRealization:
    """Draw Rayleigh path gains and build the channels.

    With ``size`` the result carries a leading batch axis of that length.
    """
    return channel_from_gains(s, draw_gains(s, rng, size))


def asymptotic_beam_channel(s: Scenario, k: int, gains: np.ndarray) -> np.ndarray:
    """Large-array limit of the beam-domain channel of UT ``k``.

    Each path contributes its gain at the grid entry it hits exactly;
    off-grid paths contribute nothing.
    """
    G = np.zeros((s.N[k], s.M), dtype=complex)
    gains = np.asarray(gains, dtype=complex).reshape(-1)
    for p in range(s.NP):
        n = grid_index(s.aoa[k, p], s.N[k])
        m = grid_index(s.aod[k, p], s.M)
        if n is not None and m is not None:
            G[n, m] += gains[p]
    return G


def _analytic_covariances(s: Scenario):
    A_bs = dft_beam_matrix(s.M)
    a_ut, a_bs = path_responses(s)
    out = {name: [] for name in ("R_BS", "R_UT", "Rt_BS", "Rt_UT", "Lambda")}
    for k in range(s.K):
        A_ut = dft_beam_matrix(s.N[k])
        var = s.gain_var[k]
        b = (A_bs.conj().T @ a_bs[k].T).T  # rows: A_bs^H a_bs(phi_p)
        u = (A_ut.conj().T @ a_ut[k].T).T  # rows: A_ut^H a_ut(theta_p)
        g = np.einsum("pm,pn->pmn", b.conj(), u).reshape(s.NP, -1)
        out["R_BS"].append(hermitize((a_bs[k].T * var) @ a_bs[k].conj()))
        out["R_UT"].append(hermitize((a_ut[k].T * var) @ a_ut[k].conj()))
        out["Rt_BS"].append(hermitize((b.T * var) @ b.conj()))
        out["Rt_UT"].append(hermitize((u.T * var) @ u.conj()))
        out["Lambda"].append(hermitize((g.T * var) @ g.conj()))
    return out


def estimate_covariances(
    s: Scenario,
    trials: int = 10_000,
    rng: np.random.Generator | None = None,
    mode: str = "monte-carlo",
) -> CovarianceSet:
    """Physical and beam-domain covariances of every UT.

    ``mode="monte-carlo"`` averages ``trials`` channel draws.
    ``mode="analytic"`` evaluates the path model exactly; the angles are
    fixed so only the path gains are random, and each covariance is a
    gain-variance weighted sum of rank-one path terms.
    """
    if mode == "analytic":
        return CovarianceSet(**_analytic_covariances(s), trials=0, mode="analytic")
    if mode != "monte-carlo":
        raise ValueError(f"unknown covariance mode {mode!r}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if rng is None:
        rng = np.random.default_rng(s.seed)
    real = synthesize_channel(s, rng, size=trials)
    A_bs = dft_beam_matrix(s.M)
    out = {name: [] for name in ("R_BS", "R_UT", "Rt_BS", "Rt_UT", "Lambda")}
    for k, H in enumerate(real.H):
        A_ut = dft_beam_matrix(s.N[k])
        Ht = beam_transform(H, A_ut, A_bs)
        v = vec(Ht)
        Hh = np.swapaxes(H, -1, -2).conj()
        Hth = np.swapaxes(Ht, -1, -2).conj()
        out["R_BS"].append(repair_psd((Hh @ H).mean(axis=0)))
        out["R_UT"].append(repair_psd((H @ Hh).mean(axis=0)))
        out["Rt_BS"].append(repair_psd((Hth @ Ht).mean(axis=0)))
        out["Rt_UT"].append(repair_psd((Ht @ Hth).mean(axis=0)))
        out["Lambda"].append(repair_psd(v.T @ v.conj() / trials))
    return CovarianceSet(**out, trials=trials, mode="monte-carlo")


def active_beams(beam_power: np.ndarray, threshold: float) -> np.ndarray:
    """Indices whose power exceeds ``threshold`` times the strongest beam."""
    beam_power = np.real(np.asarray(beam_power))
    peak = beam_power.max(initial=0.0)
    if peak <= 0:
        return np.array([], dtype=int)
    return np.flatnonzero(beam_power > threshold * peak)


def beam_overlap(Rt_BS_k: np.ndarray, Rt_BS_j: np.ndarray, threshold: float = 0.05) -> set[int]:
    """Beams active (above ``threshold`` of each UT's peak) for both UTs."""
    if Rt_BS_k.shape != Rt_BS_j.shape:
        raise ValueError(f"shape mismatch {Rt_BS_k.shape} vs {Rt_BS_j.shape}")
    a = active_beams(np.diag(Rt_BS_k), threshold)
    b = active_beams(np.diag(Rt_BS_j), threshold)
    return set(int(i) for i in np.intersect1d(a, b))


def random_scenario(
    M: int,
    K: int,
    N: int | Sequence[int],
    NP: int,
    *,
    layout: str = "uniform",
    on_grid: bool = False,
    power_decay_db: float = 0.0,
    shared_paths: int = 0,
    snr_db: float = 20.0,
    seed: int = 0,
    spacing_ratio: float = 0.5,
) -> Scenario:
    """Draw a scenario with random path angles.

    ``layout="clustered"`` confines each UT's departure angles to its own
    sector of ``sin(angle)`` with guard gaps between sectors; ``"uniform"``
    draws angles uniformly over ``(-pi/2, pi/2)``. ``on_grid`` snaps angles
    to the DFT grid, keeping each UT's departure beams distinct.
    ``shared_paths`` copies that many departure angles from UT ``2j`` to
    UT ``2j+1``, producing overlapping beams. Path powers decay by
    ``power_decay_db`` per path and sum to one for every UT.
    """
    rng = np.random.default_rng(seed)
    Ns = (N,) * K if np.isscalar(N) else tuple(N)
    if layout == "uniform":
        aod = rng.uniform(-HALF_PI, HALF_PI, size=(K, NP))
    elif layout == "clustered":
        width = 2.0 / K
        lo = -1.0 + width * np.arange(K)[:, None] + 0.2 * width
        sines = lo + 0.6 * width * rng.uniform(size=(K, NP))
        aod = np.arcsin(np.clip(sines, -1 + 1e-9, 1 - 1e-9))
    else:
        raise ValueError(f"unknown layout {layout!r}")
    aoa = rng.uniform(-HALF_PI, HALF_PI, size=(K, NP))
    if on_grid:
        for k in range(K):
            aoa[k] = [snap_to_grid(a, Ns[k]) for a in aoa[k]]
            used: set[int] = set()
            for p in range(NP):
                x = M * (1.0 + math.sin(aod[k, p])) / 2.0 - 1.0
                order = sorted(range(M - 1), key=lambda i: (abs(i - x), i))
                i = next(i for i in order if i not in used)
                used.add(i)
                aod[k, p] = grid_angle(i, M)
    for j in range(0, K - 1, 2):
        for p in range(min(shared_paths, NP)):
            aod[j + 1, NP - 1 - p] = aod[j, p]
    profile = 10.0 ** (-power_decay_db * np.arange(NP) / 10.0)
    gain_var = np.tile(profile / profile.sum(), (K, 1))
    return Scenario(M=M, K=K, N=Ns, NP=NP, aoa=aoa, aod=aod, gain_var=gain_var,
                    spacing_ratio=spacing_ratio, snr_db=snr_db, seed=seed)
