"""Small dense linear-algebra helpers shared by the numeric modules."""

from __future__ import annotations

import numpy as np


def hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2).conj())


def logdet_pd(A: np.ndarray) -> float:
    """Natural log-determinant of a Hermitian positive-definite matrix.

    Uses a Cholesky factorization so large well-conditioned matrices do
    not overflow. Raises ``np.linalg.LinAlgError`` when ``A`` is not
    positive definite.
    """
    L = np.linalg.cholesky(hermitize(np.asarray(A, dtype=complex)))
    return float(2.0 * np.sum(np.log(np.abs(np.diagonal(L)))))


def repair_psd(A: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Clip slightly negative eigenvalues of a sample covariance to zero.

    Eigenvalues below ``-rel_tol * trace`` indicate a genuinely indefinite
    matrix and raise ``ValueError``.
    """
    A = hermitize(np.asarray(A, dtype=complex))
    w, V = np.linalg.eigh(A)
    scale = max(float(np.real(np.trace(A))), 0.0)
    if w.size and w[0] < -rel_tol * scale:
        raise ValueError(
            f"matrix is not positive semi-definite: min eigenvalue {w[0]:.3e} "
            f"< -{rel_tol:g} * trace ({scale:.3e})"
        )
    if w.size and w[0] >= 0:
        return A
    w = np.clip(w, 0.0, None)
    return hermitize((V * w) @ V.conj().T)


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix (negative round-off clipped)."""
    w, V = np.linalg.eigh(hermitize(np.asarray(A, dtype=complex)))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def is_semi_unitary(A: np.ndarray, tol: float = 1e-10) -> bool:
    """True when the columns of ``A`` are orthonormal within ``tol``."""
    A = np.asarray(A)
    G = A.conj().T @ A
    return bool(np.max(np.abs(G - np.eye(G.shape[0])), initial=0.0) <= tol)


def vec(A: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization over the last two axes."""
    A = np.asarray(A)
    return np.swapaxes(A, -1, -2).reshape(*A.shape[:-2], A.shape[-1] * A.shape[-2])


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v)
    return np.swapaxes(v.reshape(*v.shape[:-1], cols, rows), -1, -2)


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for stream ``keys`` under a master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys)))


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
