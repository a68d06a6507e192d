"""Precoder and combiner design in the beam domain.

All beam indices are 0-based. Selection matrices have unit columns
``e_i``; the physical matrices are ``P = A_BS Pt`` and ``C = A_UT Ct``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._linalg import hermitize, repair_psd
from .channel import CovarianceSet, active_beams, dft_beam_matrix
from .keyrate import rate_from_selection

EQ47_TOL = 1e-6
NEUTRAL_TOL = 1e-6
SUPPORT_TOL = 1e-9
BRUTE_FORCE_MAX_DIM = 12


class InfeasibleAllocation(RuntimeError):
    """A UT cannot get enough beams free of other UTs' power."""

    def __init__(self, user: int, needed: int, available: int):
        self.user = user
        self.needed = needed
        self.available = available
        self.deficit = needed - available
        super().__init__(
            f"UT {user}: needs {needed} non-overlapping beams but only {available} "
            f"are admissible (deficit {self.deficit})"
        )


class AllocationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    U: np.ndarray
    rate: float


@dataclass(frozen=True)
class DesignedMatrices:
    tx_beams: list[list[int]]
    rx_beams: list[list[int]]
    Pt: list[np.ndarray]
    Ct: list[np.ndarray]
    P: list[np.ndarray]
    C: list[np.ndarray]
    residuals: list[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.Pt)


def selection_matrix(n: int, indices: Sequence[int]) -> np.ndarray:
    """``n x len(indices)`` matrix whose columns are ``e_i``."""
    S = np.zeros((n, len(indices)))
    S[list(indices), np.arange(len(indices))] = 1.0
    return S


def strongest(power: np.ndarray, count: int) -> list[int]:
    """Indices of the ``count`` largest entries, descending; ties to the lower index."""
    power = np.real(np.asarray(power))
    if count > power.size:
        raise ValueError(f"cannot select {count} of {power.size} entries")
    return [int(i) for i in np.argsort(-power, kind="stable")[:count]]


def selection_rate(Lambda: np.ndarray, U: np.ndarray, log_base: float = 2.0) -> float:
    """Key rate achieved by the semi-unitary ``U`` on unit-noise ``Lambda``."""
    return rate_from_selection(repair_psd(Lambda), U, log_base)


def eigen_rate_bound(Lambda: np.ndarray, dim_e: int, log_base: float = 2.0) -> float:
    """Best rate any ``dim_e``-column semi-unitary ``U`` can reach.

    Sums ``-log(1 - (nu / (1 + nu))^2)`` over the ``dim_e`` largest
    eigenvalues ``nu`` of the unit-noise ``Lambda``.
    """
    nu = np.clip(np.linalg.eigvalsh(hermitize(np.asarray(Lambda)))[::-1][:dim_e], 0.0, None)
    t = nu / (1.0 + nu)
    return float(-np.sum(np.log1p(-t) + np.log1p(t)) / math.log(log_base))


def optimal_selection_U(Lambda: np.ndarray, dim_e: int, log_base: float = 2.0) -> SelectionResult:
    """Unit-vector selection keeping the strongest entries of ``Lambda (I + Lambda)^-1``.

    ``Lambda`` is assumed scaled to unit noise. For diagonal ``Lambda``
    this is the optimal selection and its rate meets
    :func:`eigen_rate_bound`.
    """
    Lambda = hermitize(np.asarray(Lambda, dtype=complex))
    n = Lambda.shape[0]
    if not 0 <= dim_e <= n:
        raise ValueError(f"dim_e must be in [0, {n}], got {dim_e}")
    gain = np.linalg.solve(np.eye(n) + Lambda, Lambda)  # (I+L)^-1 L, same diagonal as L (I+L)^-1
    idx = tuple(strongest(np.real(np.diag(gain)), dim_e))
    U = selection_matrix(n, idx)
    return SelectionResult(idx, U, selection_rate(Lambda, U, log_base))


def brute_force_U_oracle(Lambda: np.ndarray, dim_e: int,
                         log_base: float = 2.0) -> tuple[tuple[int, ...], float]:
    """Exhaustive search over all ``dim_e``-subsets of unit-vector columns."""
    n = np.asarray(Lambda).shape[0]
    if n > BRUTE_FORCE_MAX_DIM:
        raise ValueError(f"brute force limited to dimension {BRUTE_FORCE_MAX_DIM}, got {n}")
    if not 0 <= dim_e <= n:
        raise ValueError(f"dim_e must be in [0, {n}], got {dim_e}")
    best, best_rate = (), -np.inf
    for subset in itertools.combinations(range(n), dim_e):
        r = selection_rate(Lambda, selection_matrix(n, subset), log_base)
        if r > best_rate:
            best, best_rate = subset, r
    return best, float(best_rate)


def select_tx_beams(Rt_BS_k: np.ndarray, M_e: int) -> list[int]:
    """Strongest ``M_e`` BS beams by covariance diagonal."""
    return strongest(np.diag(Rt_BS_k), M_e)


def select_rx_beams(Rt_UT_k: np.ndarray, N_e: int) -> list[int]:
    """Strongest ``N_e`` UT beams by covariance diagonal."""
    return strongest(np.diag(Rt_UT_k), N_e)


def _assemble(covs: CovarianceSet, tx: list[list[int]], N_e: int | Sequence[int]) -> DesignedMatrices:
    K = covs.K
    M = covs.Rt_BS[0].shape[0]
    N_e = [N_e] * K if np.isscalar(N_e) else list(N_e)
    A_bs = dft_beam_matrix(M)
    rx, Pt, Ct, P, C = [], [], [], [], []
    for k in range(K):
        n_k = covs.Rt_UT[k].shape[0]
        rx.append(select_rx_beams(covs.Rt_UT[k], min(N_e[k], n_k)))
        Pt.append(selection_matrix(M, tx[k]))
        Ct.append(selection_matrix(n_k, rx[k]))
        P.append(A_bs @ Pt[k])
        C.append(dft_beam_matrix(n_k) @ Ct[k])
    res = [eq47_residual(Pt[k], covs.Rt_BS, k) for k in range(K)]
    return DesignedMatrices(tx, rx, Pt, Ct, P, C, res)


def design_strongest(covs: CovarianceSet, M_e: int, N_e: int | Sequence[int]) -> DesignedMatrices:
    """Every UT keeps its own strongest beams, overlaps allowed."""
    tx = [select_tx_beams(R, M_e) for R in covs.Rt_BS]
    return _assemble(covs, tx, N_e)


def eq47_residual(Pt_k: np.ndarray, Rt_BS: Sequence[np.ndarray], k: int) -> float:
    """Largest ``|Pt_k^H Rt_BS[j]|`` entry over other UTs, relative to ``trace(Rt_BS[j])``."""
    out = 0.0
    for j, R in enumerate(Rt_BS):
        if j == k:
            continue
        tr = float(np.real(np.trace(R)))
        if tr > 0:
            out = max(out, float(np.max(np.abs(Pt_k.conj().T @ R), initial=0.0)) / tr)
    return out


def allocate_nonoverlapping(
    covs: CovarianceSet,
    M_e: int,
    N_e: int | Sequence[int] | None = None,
    threshold: float = 0.05,
) -> DesignedMatrices:
    """Greedy non-overlapping BS beam allocation in UT order.

    UT ``k`` takes its strongest beams among those that carry its own power,
    are not claimed by an earlier UT, and are not active (above
    ``threshold`` of the peak) for any other UT. Receive beams are the
    strongest UT-side beams without restriction.

    Raises
    ------
    InfeasibleAllocation
        When some UT is left with fewer than ``M_e`` admissible beams.
    """
    K = covs.K
    if N_e is None:
        N_e = M_e
    power = covs.beam_powers()
    active = [set(active_beams(p, threshold).tolist()) for p in power]
    claimed: set[int] = set()
    tx = []
    for k in range(K):
        forbidden = claimed.union(*(active[j] for j in range(K) if j != k))
        peak = power[k].max()
        order = strongest(power[k], power.shape[1])
        ok = [i for i in order if power[k, i] > SUPPORT_TOL * peak and i not in forbidden]
        if len(ok) < M_e:
            raise InfeasibleAllocation(k, M_e, len(ok))
        tx.append(ok[:M_e])
        claimed.update(ok[:M_e])
    D = _assemble(covs, tx, N_e)
    worst = max(D.residuals, default=0.0)
    if worst > EQ47_TOL:
        warnings.warn(
            f"allocated beams still see other UTs' power: residual {worst:.2e} "
            f"> {EQ47_TOL:g} of trace (off-grid leakage)",
            AllocationWarning,
            stacklevel=2,
        )
    return D


def verify_neutralization(Pt_k: np.ndarray, Lambda_all: Sequence[np.ndarray],
                          Ct_all: Sequence[np.ndarray], k: int) -> float:
    """Largest entry of ``(Pt_k^T kron Ct_j^H) Lambda_j`` over other UTs ``j``."""
    out = 0.0
    for j, (L, C) in enumerate(zip(Lambda_all, Ct_all)):
        if j == k:
            continue
        W = np.kron(Pt_k.T, C.conj().T)
        out = max(out, float(np.max(np.abs(W @ L), initial=0.0)))
    return out


def is_neutralized(D: DesignedMatrices, Lambda_all: Sequence[np.ndarray],
                   tol: float = NEUTRAL_TOL) -> bool:
    """True when every pair meets the cross-term bound relative to ``max |Lambda_j|``."""
    for k in range(D.K):
        for j in range(D.K):
            if j == k:
                continue
            W = np.kron(D.Pt[k].T, D.Ct[j].conj().T)
            scale = float(np.max(np.abs(Lambda_all[j])))
            if np.max(np.abs(W @ Lambda_all[j]), initial=0.0) > tol * scale:
                return False
    return True


def pilot_groups(D: DesignedMatrices, Lambda_all: Sequence[np.ndarray],
                 tol: float = NEUTRAL_TOL) -> list[int]:
    """Group label per UT so that UTs sharing a label do not interfere.

    UTs whose designs leak into each other get different labels; labels are
    assigned greedily in UT order (smallest free label first).
    """
    K = D.K

    def clash(a: int, b: int) -> bool:
        for x, y in ((a, b), (b, a)):
            W = np.kron(D.Pt[x].T, D.Ct[y].conj().T)
            scale = float(np.max(np.abs(Lambda_all[y])))
            if np.max(np.abs(W @ Lambda_all[y]), initial=0.0) > tol * scale:
                return True
        return False

    labels: list[int] = []
    for k in range(K):
        taken = {labels[j] for j in range(k) if clash(j, k)}
        labels.append(next(g for g in itertools.count() if g not in taken))
    return labels
