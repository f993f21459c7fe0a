"""Channel-error draws uniform over a bounded ellipsoid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ErrorSample:
    e: np.ndarray
    target: str  # which link the draw is for ("gu[k]", "eve[m]", "mec")


def _inv_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    if w.min() <= 0:
        raise ValueError("ellipsoid matrix must be positive definite")
    return (v * (1.0 / np.sqrt(w))) @ v.conj().T


def sample_error(shape_matrix: np.ndarray, rng: np.random.Generator, target: str = "") -> ErrorSample:
    """One draw uniform over {e : e^H C e <= 1}."""
    return ErrorSample(sample_errors(shape_matrix, 1, rng)[0], target)


def sample_errors(shape_matrix: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized draws, shape (count, n). Uniform over the ellipsoid volume:
    isotropic complex normal direction, ball radius u^(1/2n), map through C^(-1/2).
    """
    C = np.asarray(shape_matrix, dtype=complex)
    n = C.shape[0]
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radius = rng.uniform(size=(count, 1)) ** (1.0 / (2 * n))
    return (radius * z) @ _inv_sqrt(C).T


def membership(shape_matrix: np.ndarray, e: np.ndarray) -> float:
    """Quadratic form e^H C e (<= 1 inside the ellipsoid)."""
    return float(np.real(np.conj(e) @ np.asarray(shape_matrix) @ e))


def boundary_sample(shape_matrix: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """The ellipsoid-boundary point along C^(-1/2) of a unit direction."""
    u = np.asarray(direction, dtype=complex)
    u = u / np.linalg.norm(u)
    return _inv_sqrt(shape_matrix) @ u
