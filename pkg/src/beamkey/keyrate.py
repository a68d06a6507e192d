"""Secret key rates of beam-domain channel probing.

Rates are Gaussian mutual informations between the downlink estimate at a
UT and the uplink estimate at the BS. The closed forms take the beam
correlation ``Lambda_k = E[vec(H~_k) vec(H~_k)^H]`` and assume unit noise;
arbitrary noise is handled by scaling ``Lambda_k / noise_var``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import hermitize, logdet_pd, repair_psd

MI_CAP_BITS = 60.0


@dataclass(frozen=True)
class RateInputs:
    """Everything a closed-form rate needs.

    ``SDL[k'][k]`` and ``SUL[k'][k]`` are the pilot cross-covariances; pass
    ``None`` for orthogonal pilots (identity on the diagonal, zero
    elsewhere).
    """

    Lambda: Sequence[np.ndarray]
    Pt: Sequence[np.ndarray]
    Ct: Sequence[np.ndarray]
    noise_var: float
    SDL: Sequence[Sequence[np.ndarray]] | None = None
    SUL: Sequence[Sequence[np.ndarray]] | None = None
    log_base: float = 2.0

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError(f"closed-form rates need noise_var > 0, got {self.noise_var}")
        if not (len(self.Lambda) == len(self.Pt) == len(self.Ct)):
            raise ValueError("Lambda, Pt and Ct must have one entry per UT")
        for k, (L, P, C) in enumerate(zip(self.Lambda, self.Pt, self.Ct)):
            if L.shape != (P.shape[0] * C.shape[0],) * 2:
                raise ValueError(
                    f"UT {k}: Lambda is {L.shape}, expected {(P.shape[0] * C.shape[0],) * 2}"
                )

    @property
    def K(self) -> int:
        return len(self.Lambda)

    def scaled(self, k: int) -> np.ndarray:
        return repair_psd(self.Lambda[k]) / self.noise_var

    def cross(self, kp: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        """``(SDL[k'][k], SUL[k'][k])``."""
        if self.SDL is None:
            Me, Ne = self.Pt[k].shape[1], self.Ct[k].shape[1]
            if kp == k:
                return np.eye(Me), np.eye(Ne)
            return np.zeros((self.Pt[kp].shape[1], Me)), np.zeros((self.Ct[kp].shape[1], Ne))
        return self.SDL[kp][k], self.SUL[kp][k]

    def with_pilots(self, SDL, SUL) -> "RateInputs":
        return RateInputs(self.Lambda, self.Pt, self.Ct, self.noise_var, SDL, SUL, self.log_base)


def _to_base(nats: float, base: float) -> float:
    return nats / math.log(base)


def _dl_map(inp: RateInputs, k: int) -> np.ndarray:
    # vec(C~^H H~ sum_k' P~_k' S_k'k) = (sum_k' P~_k' S_k'k)^T kron C~^H vec(H~)
    Q = sum(inp.Pt[kp] @ inp.cross(kp, k)[0] for kp in range(inp.K))
    return np.kron(Q.T, inp.Ct[k].conj().T)


def _ul_map(inp: RateInputs, kp: int, k: int) -> np.ndarray:
    # contribution of UT k' to vec(Z_k^UL^T)
    return np.kron(inp.Pt[k].T, inp.cross(kp, k)[1] @ inp.Ct[kp].conj().T)


def observation_covariances(inp: RateInputs, k: int):
    """Unit-noise covariances ``(R_DL, R_UL, R_cross)`` of UT ``k``'s observations."""
    Wd = _dl_map(inp, k)
    Lk = inp.scaled(k)
    R_dl = hermitize(Wd @ Lk @ Wd.conj().T) + np.eye(Wd.shape[0])
    R_ul = np.eye(Wd.shape[0], dtype=complex)
    for kp in range(inp.K):
        Wu = _ul_map(inp, kp, k)
        R_ul = R_ul + Wu @ inp.scaled(kp) @ Wu.conj().T
    R_x = Wd @ Lk @ _ul_map(inp, k, k).conj().T
    return R_dl, hermitize(R_ul), R_x


def gaussian_mi_from_cov(R_a: np.ndarray, R_b: np.ndarray, R_ab: np.ndarray) -> float:
    """``log det R_a + log det R_b - log det [[R_a, R_ab], [R_ab^H, R_b]]`` in nats."""
    joint = np.block([[R_a, R_ab], [R_ab.conj().T, R_b]])
    return logdet_pd(R_a) + logdet_pd(R_b) - logdet_pd(joint)


def key_rate_general(inp: RateInputs, k: int) -> float:
    """Key rate of UT ``k`` for arbitrary pilot cross-covariances.

    Other UTs' pilots leak into UT ``k``'s estimates through their
    precoders (downlink) and their channels (uplink); channels of
    different UTs are assumed independent.
    """
    nats = gaussian_mi_from_cov(*observation_covariances(inp, k))
    return max(_to_base(nats, inp.log_base), 0.0)


def rate_from_selection(Lambda_scaled: np.ndarray, U: np.ndarray, log_base: float = 2.0) -> float:
    """Interference-free rate ``-log det(I - (Sigma (I + Sigma)^-1)^2)``.

    ``Sigma = U^H Lambda U`` is the unit-noise covariance of the reduced
    observation. Evaluated as ``2 log det(I + Sigma) - log det(I + 2 Sigma)``.
    """
    Sigma = hermitize(U.conj().T @ Lambda_scaled @ U)
    I = np.eye(Sigma.shape[0])
    nats = 2.0 * logdet_pd(I + Sigma) - logdet_pd(I + 2.0 * Sigma)
    return max(_to_base(nats, log_base), 0.0)


def key_rate_orthogonal(inp: RateInputs, k: int) -> float:
    """Key rate of UT ``k`` with pilots orthogonal across UTs."""
    U = np.kron(inp.Pt[k].conj(), inp.Ct[k])
    return rate_from_selection(inp.scaled(k), U, inp.log_base)


def key_rate_reused(inp: RateInputs, k: int) -> float:
    """Key rate of UT ``k`` when every UT sends the same pilots."""
    K = inp.K
    SDL = [[np.eye(inp.Pt[a].shape[1], inp.Pt[b].shape[1]) for b in range(K)] for a in range(K)]
    SUL = [[np.eye(inp.Ct[a].shape[1], inp.Ct[b].shape[1]) for b in range(K)] for a in range(K)]
    return key_rate_general(inp.with_pilots(SDL, SUL), k)


def perfect_csi_rate(Lambda: np.ndarray, noise_var: float, log_base: float = 2.0) -> float:
    """Rate from observing the whole beam-domain channel (no reduction)."""
    L = repair_psd(Lambda) / noise_var
    return rate_from_selection(L, np.eye(L.shape[0]), log_base)


def sum_key_rate(inp: RateInputs, mode: str = "general") -> float:
    fn = {"general": key_rate_general, "orthogonal": key_rate_orthogonal,
          "reused": key_rate_reused}[mode]
    return float(sum(fn(inp, k) for k in range(inp.K)))


@dataclass(frozen=True)
class MIEstimate:
    """Sample-covariance mutual information.

    ``capped`` marks a divergent estimate (perfectly dependent streams)
    reported as the finite sentinel; ``regularized`` marks that a ridge
    was added to a rank-deficient covariance.
    """

    value: float
    capped: bool = False
    regularized: bool = False

    def __float__(self) -> float:
        return self.value


def _samples(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    return z[:, None] if z.ndim == 1 else z


def _logdet_sample(R: np.ndarray) -> tuple[float, bool]:
    R = hermitize(R)
    d = R.shape[0]
    scale = float(np.real(np.trace(R))) / d
    if scale <= 0:
        return -np.inf, True
    w = np.linalg.eigvalsh(R)
    if w[0] < 1e-12 * scale:
        return logdet_pd(R + 1e-10 * scale * np.eye(d)), True
    return logdet_pd(R), False


def _sample_cov(*blocks: np.ndarray) -> np.ndarray:
    Z = np.concatenate([_samples(b) for b in blocks], axis=1)
    return Z.T @ Z.conj() / Z.shape[0]


def _mi_from_logdets(plus, minus, log_base):
    vals_p = [_logdet_sample(R) for R in plus]
    vals_m = [_logdet_sample(R) for R in minus]
    reg_joint = vals_m[0][1]
    reg_marg = any(r for _, r in vals_p)
    regularized = reg_joint or reg_marg or any(r for _, r in vals_m[1:])
    nats = sum(v for v, _ in vals_p) - sum(v for v, _ in vals_m)
    bits = _to_base(nats, log_base)
    if (reg_joint and not reg_marg) or not np.isfinite(bits) or bits > MI_CAP_BITS:
        return MIEstimate(MI_CAP_BITS, capped=True, regularized=regularized)
    return MIEstimate(bits, regularized=regularized)


def _check_samples(*zs):
    n = _samples(zs[0]).shape[0]
    dim = sum(_samples(z).shape[1] for z in zs)
    if any(_samples(z).shape[0] != n for z in zs):
        raise ValueError("sample sets must have the same number of rows")
    if n < 10 * dim:
        raise ValueError(f"need at least {10 * dim} samples for dimension {dim}, got {n}")


def empirical_mi(zA: np.ndarray, zB: np.ndarray, log_base: float = 2.0) -> MIEstimate:
    """Gaussian mutual information of zero-mean samples (rows are draws)."""
    _check_samples(zA, zB)
    return _mi_from_logdets(
        [_sample_cov(zA), _sample_cov(zB)], [_sample_cov(zA, zB)], log_base
    )


def conditional_key_rate_empirical(zDL_k, zUL_k, zDL_i, log_base: float = 2.0) -> MIEstimate:
    """``I(zDL_k; zUL_k | zDL_i)`` for Gaussian samples."""
    _check_samples(zDL_k, zUL_k, zDL_i)
    return _mi_from_logdets(
        [_sample_cov(zDL_k, zDL_i), _sample_cov(zUL_k, zDL_i)],
        [_sample_cov(zDL_k, zUL_k, zDL_i), _sample_cov(zDL_i)],
        log_base,
    )


def secret_key_rate_empirical(zDL_k, zUL_k, curious: Sequence[np.ndarray] = (),
                              log_base: float = 2.0) -> float:
    """Worst case over curious UTs; the plain MI when there are none."""
    if len(curious) == 0:
        return empirical_mi(zDL_k, zUL_k, log_base).value
    return min(conditional_key_rate_empirical(zDL_k, zUL_k, z, log_base).value for z in curious)


def _check_leak_args(rho: float, noise_var: float):
    if not abs(rho) <= 1:
        raise ValueError(f"|rho| must be <= 1, got {rho}")
    if not noise_var > 0:
        raise ValueError(f"noise_var must be > 0, got {noise_var}")


def rate_correlated(rho: float, noise_var: float, log_base: float = 2.0) -> float:
    """Scalar key rate when a curious UT's channel has correlation ``rho``."""
    _check_leak_args(rho, noise_var)
    s = noise_var
    num = ((1 + s) ** 2 - rho**2) ** 2
    den = (1 + s) * (s**3 + 3 * s**2 - 2 * s * rho**2 + 2 * s)
    return _to_base(math.log(num / den), log_base)


def rate_independent(noise_var: float, log_base: float = 2.0) -> float:
    """Scalar key rate without leakage."""
    _check_leak_args(0.0, noise_var)
    s = noise_var
    return _to_base(math.log((1 + s) ** 2 / (s * (2 + s))), log_base)


def rate_full_leakage(noise_var: float, log_base: float = 2.0) -> float:
    """Scalar key rate when the curious UT's channel is identical."""
    _check_leak_args(1.0, noise_var)
    s = noise_var
    return _to_base(math.log((2 + s) ** 2 / (3 + 4 * s + s**2)), log_base)


def leakage_ratio(rho: float, noise_var: float) -> float:
    """Relative key-rate loss caused by a curious UT with correlation ``rho``."""
    return 1.0 - rate_correlated(rho, noise_var) / rate_independent(noise_var)


def unit_key_rate(R_sum: float, T: float) -> float:
    """Sum key rate per pilot symbol."""
    if not T > 0:
        raise ValueError(f"pilot overhead must be > 0, got {T}")
    return R_sum / T
