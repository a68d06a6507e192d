"""Two-phase TDD channel probing with precoded pilots and LS estimation.

In the downlink phase the BS sends ``sum_k P_k S_k`` and UT ``k`` combines
with ``C_k``; in the uplink phase every UT sends ``C_k^* S_k^UL`` and the
BS combines with ``P_k^T``. Both sides correlate with their own pilot to
obtain an ``N_e x M_e`` (downlink) or ``M_e x N_e`` (uplink) estimate of
the effective channel ``C_k^H H_k P_k``.

Every function accepts channels with leading batch axes, in which case
independent noise is drawn for each batch element.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import crandn, vec
from .channel import ChannelRealization, Scenario, synthesize_channel

MODES = ("orthogonal", "reused", "grouped", "baseline-full")
_ALIASES = {
    "orthogonal-between-users": "orthogonal",
    "reused-between-users": "reused",
}


@dataclass(frozen=True)
class PilotConfig:
    """Pilot lengths and sharing pattern.

    ``mode="grouped"`` reuses pilots inside each group of ``groups`` and
    keeps different groups orthogonal; ``orthogonal`` and ``reused`` are the
    two extremes. ``baseline-full`` broadcasts one downlink pilot and gives
    every UT its own uplink block.
    """

    mode: str
    T_D: int
    T_U: int
    M_e: int
    N_e: int
    groups: tuple[int, ...] | None = None
    T_switch: float = 0.0

    def __post_init__(self):
        mode = _ALIASES.get(self.mode, self.mode)
        if mode not in MODES:
            raise ValueError(f"unknown pilot mode {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "mode", mode)
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))
        if mode == "grouped" and self.groups is None:
            raise ValueError("grouped pilots need a group label per UT")
        if self.M_e < 1 or self.N_e < 1:
            raise ValueError(f"M_e and N_e must be >= 1 (got {self.M_e}, {self.N_e})")
        if self.T_D < self.M_e:
            raise ValueError(f"T_D={self.T_D} must be >= M_e={self.M_e}")
        if self.T_U < self.N_e:
            raise ValueError(f"T_U={self.T_U} must be >= N_e={self.N_e}")

    @classmethod
    def minimal(cls, mode: str, K: int, M_e: int, N_e: int,
                groups: Sequence[int] | None = None) -> "PilotConfig":
        """Shortest pilots that satisfy the orthogonality contract of ``mode``."""
        mode = _ALIASES.get(mode, mode)
        if mode == "orthogonal":
            return cls(mode, K * M_e, K * N_e, M_e, N_e)
        if mode == "reused":
            return cls(mode, M_e, N_e, M_e, N_e)
        if mode == "grouped":
            g = len(set(groups))
            return cls(mode, g * M_e, g * N_e, M_e, N_e, groups=tuple(groups))
        if mode == "baseline-full":
            return cls(mode, M_e, K * N_e, M_e, N_e)
        raise ValueError(f"unknown pilot mode {mode!r}")

    def blocks(self, K: int) -> tuple[list[int], list[int]]:
        """Pilot block index of every UT for the downlink and the uplink."""
        if self.mode == "orthogonal":
            return list(range(K)), list(range(K))
        if self.mode == "reused":
            return [0] * K, [0] * K
        if self.mode == "baseline-full":
            return [0] * K, list(range(K))
        if len(self.groups) != K:
            raise ValueError(f"groups has {len(self.groups)} labels for K={K} UTs")
        labels = {g: i for i, g in enumerate(dict.fromkeys(self.groups))}
        b = [labels[g] for g in self.groups]
        return b, b

    def check(self, K: int) -> None:
        dl, ul = self.blocks(K)
        need_d = (max(dl) + 1) * self.M_e
        need_u = (max(ul) + 1) * self.N_e
        if self.T_D < need_d:
            raise ValueError(f"{self.mode} pilots for K={K} need T_D >= {need_d}, got {self.T_D}")
        if self.T_U < need_u:
            raise ValueError(f"{self.mode} pilots for K={K} need T_U >= {need_u}, got {self.T_U}")

    @property
    def overhead(self) -> float:
        """Pilot symbols per probing round, switching time included."""
        return self.T_D + self.T_U + self.T_switch


@dataclass(frozen=True)
class Pilots:
    """Per-UT pilot matrices: ``S_DL[k]`` is ``M_e x T_D``, ``S_UL[k]`` is ``N_e x T_U``."""

    S_DL: list[np.ndarray]
    S_UL: list[np.ndarray]
    config: PilotConfig


@dataclass(frozen=True)
class ProbeObservation:
    """Vectorized LS estimates of both sides (length ``M_e * N_e`` each)."""

    zDL: list[np.ndarray]
    zUL: list[np.ndarray]
    noise_var: float


def _dft_rows(T: int, start: int, count: int) -> np.ndarray:
    r = np.arange(start, start + count)[:, None]
    t = np.arange(T)[None, :]
    return np.exp(-2j * np.pi * r * t / T) / np.sqrt(T)


def make_pilots(cfg: PilotConfig, K: int) -> Pilots:
    """Orthonormal pilot rows taken from ``T``-point DFT matrices."""
    cfg.check(K)
    dl, ul = cfg.blocks(K)
    S_DL = [_dft_rows(cfg.T_D, b * cfg.M_e, cfg.M_e) for b in dl]
    S_UL = [_dft_rows(cfg.T_U, b * cfg.N_e, cfg.N_e) for b in ul]
    return Pilots(S_DL, S_UL, cfg)


def pilot_cross_covariances(pilots: Pilots) -> tuple[list[list[np.ndarray]], list[list[np.ndarray]]]:
    """``SDL[k'][k] = S_k' S_k^H`` and ``SUL[k'][k] = (S^UL_k' S^UL_k^H)^T``."""
    K = len(pilots.S_DL)
    SDL = [[pilots.S_DL[a] @ pilots.S_DL[b].conj().T for b in range(K)] for a in range(K)]
    SUL = [[(pilots.S_UL[a] @ pilots.S_UL[b].conj().T).T for b in range(K)] for a in range(K)]
    return SDL, SUL


def _check_dims(H, P, C):
    if not (len(H) == len(P) == len(C)):
        raise ValueError(f"got {len(H)} channels, {len(P)} precoders, {len(C)} combiners")
    for k, (h, p, c) in enumerate(zip(H, P, C)):
        if h.shape[-1] != p.shape[0] or h.shape[-2] != c.shape[0]:
            raise ValueError(
                f"UT {k}: H is {h.shape[-2:]}, P is {p.shape}, C is {c.shape}"
            )
        if p.shape[1] != P[0].shape[1]:
            raise ValueError(f"UT {k}: precoder has {p.shape[1]} columns, expected {P[0].shape[1]}")


def downlink_probe(H, P, C, pilots: Pilots, noise_var: float,
                   rng: np.random.Generator) -> list[np.ndarray]:
    """LS estimates ``Z_k = Y_k S_k^H`` at every UT (``N_e x M_e``)."""
    _check_dims(H, P, C)
    if noise_var < 0:
        raise ValueError(f"noise variance must be >= 0, got {noise_var}")
    X = sum(p @ s for p, s in zip(P, pilots.S_DL))  # M x T_D
    Z = []
    for k, (h, c) in enumerate(zip(H, C)):
        if c.shape[1] != pilots.S_UL[k].shape[0] or P[k].shape[1] != pilots.S_DL[k].shape[0]:
            raise ValueError(f"UT {k}: precoder/combiner widths do not match the pilot dimensions")
        Y = c.conj().T @ (h @ X)
        if noise_var > 0:
            noise = crandn(rng, h.shape[:-1] + (X.shape[1],), noise_var)
            Y = Y + c.conj().T @ noise
        Z.append(Y @ pilots.S_DL[k].conj().T)
    return Z


def uplink_probe(H, P, C, pilots: Pilots, noise_var: float,
                 rng: np.random.Generator) -> list[np.ndarray]:
    """LS estimates ``Z_k = P_k^T Y S_k^H`` at the BS (``M_e x N_e``).

    The BS receives one superposition of all UT transmissions, so the
    receiver noise is shared by every UT's estimate.
    """
    _check_dims(H, P, C)
    if noise_var < 0:
        raise ValueError(f"noise variance must be >= 0, got {noise_var}")
    Y = sum(np.swapaxes(h, -1, -2) @ (c.conj() @ s) for h, c, s in zip(H, C, pilots.S_UL))
    if noise_var > 0:
        Y = Y + crandn(rng, Y.shape, noise_var)
    return [P[k].T @ Y @ pilots.S_UL[k].conj().T for k in range(len(H))]


def vectorize_observation(Z_DL: np.ndarray, Z_UL: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(vec(Z_DL), vec(Z_UL^T))``; the transpose aligns reciprocal entries."""
    return vec(Z_DL), vec(np.swapaxes(Z_UL, -1, -2))


def probe_round(H, P, C, pilots: Pilots, noise_var: float,
                rng: np.random.Generator) -> ProbeObservation:
    """One full probing round with the channel held fixed across both phases."""
    Z_DL = downlink_probe(H, P, C, pilots, noise_var, rng)
    Z_UL = uplink_probe(H, P, C, pilots, noise_var, rng)
    pairs = [vectorize_observation(d, u) for d, u in zip(Z_DL, Z_UL)]
    return ProbeObservation([a for a, _ in pairs], [b for _, b in pairs], noise_var)


def baseline_probe(s: Scenario, noise_var: float, rng: np.random.Generator,
                   channel: ChannelRealization | None = None) -> ProbeObservation:
    """Full-dimension probing without precoding or combining.

    The BS broadcasts an ``M``-row pilot and the UTs answer with
    orthogonal blocks of ``N_k`` rows each, so every side estimates the
    whole ``N_k x M`` channel.
    """
    if channel is None:
        channel = synthesize_channel(s, rng)
    H = channel.H
    T_U = sum(s.N)
    S_DL = _dft_rows(s.M, 0, s.M)
    offsets = np.concatenate([[0], np.cumsum(s.N)])
    S_UL = [_dft_rows(T_U, int(offsets[k]), s.N[k]) for k in range(s.K)]
    zDL, zUL = [], []
    Y_ul = sum(np.swapaxes(h, -1, -2) @ S for h, S in zip(H, S_UL))
    if noise_var > 0:
        Y_ul = Y_ul + crandn(rng, Y_ul.shape, noise_var)
    for k, h in enumerate(H):
        Y = h @ S_DL
        if noise_var > 0:
            Y = Y + crandn(rng, Y.shape, noise_var)
        Z_dl = Y @ S_DL.conj().T          # N_k x M
        Z_ul = Y_ul @ S_UL[k].conj().T     # M x N_k
        a, b = vectorize_observation(Z_dl, Z_ul)
        zDL.append(a)
        zUL.append(b)
    return ProbeObservation(zDL, zUL, noise_var)


def baseline_overhead(M: int, N: Sequence[int], T_switch: float = 0.0) -> float:
    """Pilot symbols of the full-dimension scheme: ``M + sum(N) (+ switch)``."""
    return M + sum(N) + T_switch


def cdr_overhead(M_e: int, N_e: int, K: int = 1, mode: str = "reused",
                 T_switch: float = 0.0) -> float:
    """Pilot symbols of the reduced-dimension scheme for ``K`` UTs."""
    return PilotConfig.minimal(mode, K, M_e, N_e, groups=list(range(K))).overhead + T_switch


def reduction_factor(M: int, N_k: int, M_e: int, N_e: int) -> float:
    """Ratio of full to reduced observation dimension."""
    return (M * N_k) / (M_e * N_e)
