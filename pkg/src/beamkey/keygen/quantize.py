"""Phase quantization with public rotation helpers (leader/follower).

The leader finds the phase sector of each of its samples and publishes the
rotation that moves the sample to the centre of that sector. The follower
applies the same rotation to its own sample before quantizing, so small
phase differences between the two sides never cross a sector boundary.
The rotation is uniform on ``(-w/2, w/2]`` whatever the sector, so it
reveals nothing about the bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class KeyMaterial:
    """Quantized bits of one or more links.

    ``bits_bs[k]`` / ``bits_ut[k]`` are uint8 arrays of equal length and
    ``public_helper[k]`` holds the leader's rotations for that link.
    """

    bits_bs: list[np.ndarray]
    bits_ut: list[np.ndarray]
    public_helper: list[np.ndarray]
    bits_per_sample: int = 2

    def __post_init__(self):
        for k, (a, b) in enumerate(zip(self.bits_bs, self.bits_ut)):
            if a.shape != b.shape:
                raise ValueError(f"link {k}: {a.size} BS bits vs {b.size} UT bits")

    def bdr(self, k: int = 0) -> float:
        return bdr(self.bits_bs[k], self.bits_ut[k])


def gray_code(i: np.ndarray) -> np.ndarray:
    i = np.asarray(i)
    return i ^ (i >> 1)


def labels_to_bits(labels: np.ndarray, b: int) -> np.ndarray:
    """Most significant bit first, ``b`` bits per label."""
    shifts = np.arange(b - 1, -1, -1)
    return ((np.asarray(labels)[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def sector(phase: np.ndarray, b: int) -> np.ndarray:
    w = TWO_PI / 2**b
    return (np.floor(np.mod(phase, TWO_PI) / w).astype(np.int64)) % 2**b


def quantize_phase(samples: np.ndarray, b: int, rotation: np.ndarray | None = None) -> np.ndarray:
    phase = np.angle(samples)
    if rotation is not None:
        phase = phase + rotation
    return labels_to_bits(gray_code(sector(phase, b)), b)


def cqa_quantize(leader_samples, follower_samples, bits_per_sample: int = 2) -> KeyMaterial:
    """Quantize one link; the leader is the BS and the follower the UT."""
    a = np.asarray(leader_samples, dtype=complex).reshape(-1)
    f = np.asarray(follower_samples, dtype=complex).reshape(-1)
    if a.size == 0:
        raise ValueError("no samples to quantize")
    if a.size != f.size:
        raise ValueError(f"leader has {a.size} samples, follower has {f.size}")
    b = int(bits_per_sample)
    if b < 1:
        raise ValueError(f"bits_per_sample must be >= 1, got {bits_per_sample}")
    w = TWO_PI / 2**b
    phase = np.mod(np.angle(a), TWO_PI)
    idx = sector(phase, b)
    rotation = (idx + 0.5) * w - phase
    bits_bs = labels_to_bits(gray_code(idx), b)
    bits_ut = quantize_phase(f, b, rotation)
    return KeyMaterial([bits_bs], [bits_ut], [rotation], b)


def bdr(bits_a, bits_b) -> float:
    """Fraction of positions where the two bit strings differ."""
    a = np.asarray(bits_a).reshape(-1)
    b = np.asarray(bits_b).reshape(-1)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty bit strings")
    return float(np.count_nonzero(a != b)) / a.size


def informative_entries(Lambda: np.ndarray, U: np.ndarray, rel: float = 0.01) -> np.ndarray:
    """Observation entries whose power is at least ``rel`` of the strongest one.

    Entries of ``U^H vec(H~)`` with (near) zero power carry only noise and
    would add random bits to the key.
    """
    power = np.real(np.einsum("ij,ik,kj->j", U.conj(), Lambda, U))
    peak = power.max(initial=0.0)
    if peak <= 0:
        return np.array([], dtype=int)
    return np.flatnonzero(power >= rel * peak)
