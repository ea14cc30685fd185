"""Orthonormal sine basis on the interval (0, pi) with Dirichlet conditions.

State vectors throughout the package are coefficient vectors with respect to
e_k(x) = sqrt(2/pi) * sin(k x), k = 1..N, so the Euclidean norm of a
coefficient vector equals the L2 norm of the field. The Dirichlet Laplacian
is diagonal in this basis with eigenvalues k^2.

Nonlinear terms are evaluated pseudo-spectrally: synthesize point values on
a dealiased collocation grid (3/2 rule), apply the pointwise map, transform
back and truncate.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.fft import dst

from .errors import ConfigError

_NORM = np.sqrt(2.0 / np.pi)  # amplitude of the orthonormal basis functions


def laplacian_eigenvalues(n_modes: int) -> np.ndarray:
    """Dirichlet eigenvalues k^2, k = 1..n_modes, of -d^2/dx^2 on (0, pi)."""
    if n_modes < 1:
        raise ConfigError(f"n_modes must be >= 1, got {n_modes}")
    k = np.arange(1, n_modes + 1, dtype=float)
    return k * k


def dealias_points(n_modes: int) -> int:
    """Collocation size for the 3/2 dealiasing rule."""
    return max(int(np.ceil(1.5 * n_modes)), n_modes + 1)


def collocation_grid(n_points: int) -> np.ndarray:
    """Interior collocation nodes x_i = pi * i / (n_points + 1), i = 1..n_points."""
    return np.pi * np.arange(1, n_points + 1) / (n_points + 1)


def coeffs_to_values(coeffs: np.ndarray, n_points: int | None = None) -> np.ndarray:
    """Point values of the field on the collocation grid.

    Parameters
    ----------
    coeffs : array, shape (..., N)
        Coefficients in the orthonormal sine basis.
    n_points : int, optional
        Collocation size; defaults to the 3/2-rule size for N modes.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n_modes = coeffs.shape[-1]
    m = dealias_points(n_modes) if n_points is None else int(n_points)
    if m < n_modes:
        raise ConfigError(f"collocation size {m} < mode count {n_modes}")
    pad = np.zeros(coeffs.shape[:-1] + (m,))
    pad[..., :n_modes] = coeffs
    return _NORM * 0.5 * dst(pad, type=1, axis=-1)


def values_to_coeffs(values: np.ndarray, n_modes: int) -> np.ndarray:
    """Sine coefficients (orthonormal basis) of grid values, truncated to n_modes."""
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    full = dst(values, type=1, axis=-1) / (_NORM * (m + 1))
    return full[..., :n_modes]


def apply_pointwise(
    coeffs: np.ndarray, func: Callable[[np.ndarray], np.ndarray], n_points: int | None = None
) -> np.ndarray:
    """Apply a scalar map to the field values and project back onto the basis."""
    vals = coeffs_to_values(coeffs, n_points)
    return values_to_coeffs(func(vals), np.asarray(coeffs).shape[-1])


def polyval_coeffs(poly: Sequence[float], u: np.ndarray) -> np.ndarray:
    """Evaluate sum_k poly[k-1] * u^k (no constant term, index 1-based)."""
    out = np.zeros_like(u)
    for a_k in reversed(poly):
        out = (out + a_k) * u
    return out


def apply_polynomial(coeffs: np.ndarray, poly: Sequence[float]) -> np.ndarray:
    """Dealiased pseudo-spectral evaluation of a polynomial nonlinearity."""
    if len(poly) == 0 or not any(poly):
        return np.zeros_like(np.asarray(coeffs, dtype=float))
    return apply_pointwise(coeffs, lambda u: polyval_coeffs(poly, u))


def field_sup_norm(coeffs: np.ndarray, n_points: int | None = None) -> np.ndarray:
    """Discrete sup-norm of the field: max |u(x_i)| over the collocation grid."""
    vals = coeffs_to_values(coeffs, n_points)
    return np.max(np.abs(vals), axis=-1)
