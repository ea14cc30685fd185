"""History segments: the delay-equation state, a grid-sampled map [-tau, 0] -> H.

A segment stores (n_tau + 1) coefficient vectors on the uniform grid
theta_j = -tau + j*h with h = tau/n_tau, index 0 at theta = -tau and the last
index at theta = 0. The segment norm is the discrete sup norm
max_j ||values[j]||_2, matching the phase space C([-tau, 0], L2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class HistorySegment:
    """Grid-sampled history over the delay window [-tau, 0].

    Attributes
    ----------
    tau : float
        Delay length; the grid step is tau / (len(values) - 1).
    values : ndarray, shape (n_tau + 1, n_modes)
        Sine-basis coefficient vectors, oldest first.
    """

    tau: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ConfigError("segment values must be a (n_tau+1, n_modes) array with n_tau >= 1")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("segment values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_tau(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    @property
    def grid_step(self) -> float:
        return self.tau / self.n_tau

    @property
    def theta(self) -> np.ndarray:
        """Grid points theta_j in [-tau, 0], oldest first."""
        return -self.tau + self.grid_step * np.arange(self.n_tau + 1)

    def norm(self) -> float:
        """Discrete sup-L2 norm: max over grid points of the coefficient norm."""
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def at_zero(self) -> np.ndarray:
        return self.values[-1]

    def encode(self) -> np.ndarray:
        """Flatten to a vector of length (n_tau+1) * n_modes (row-major)."""
        return self.values.reshape(-1).copy()

    @staticmethod
    def decode(vec: np.ndarray, tau: float, n_tau: int, n_modes: int) -> "HistorySegment":
        vec = np.asarray(vec, dtype=float)
        if vec.size != (n_tau + 1) * n_modes:
            raise ConfigError(
                f"cannot decode vector of size {vec.size} into ({n_tau + 1}, {n_modes})"
            )
        return HistorySegment(tau, vec.reshape(n_tau + 1, n_modes))

    def __add__(self, other: "HistorySegment") -> "HistorySegment":
        self._check_compatible(other)
        return HistorySegment(self.tau, self.values + other.values)

    def __sub__(self, other: "HistorySegment") -> "HistorySegment":
        self._check_compatible(other)
        return HistorySegment(self.tau, self.values - other.values)

    def scaled(self, factor: float) -> "HistorySegment":
        return HistorySegment(self.tau, self.values * factor)

    def _check_compatible(self, other: "HistorySegment") -> None:
        if self.values.shape != other.values.shape or not np.isclose(self.tau, other.tau):
            raise ConfigError("segments have incompatible grids")


def zero_segment(tau: float, n_tau: int, n_modes: int) -> HistorySegment:
    return HistorySegment(tau, np.zeros((n_tau + 1, n_modes)))


def constant_segment(tau: float, n_tau: int, coeffs: np.ndarray) -> HistorySegment:
    coeffs = np.asarray(coeffs, dtype=float)
    return HistorySegment(tau, np.tile(coeffs, (n_tau + 1, 1)))


def exponential_segment(
    tau: float, n_tau: int, n_modes: int, rate: complex, direction: np.ndarray
) -> HistorySegment:
    """Segment theta -> Re(exp(rate*theta)) * direction (real rates give pure exponentials)."""
    direction = np.asarray(direction, dtype=float)
    theta = -tau + (tau / n_tau) * np.arange(n_tau + 1)
    profile = np.real(np.exp(rate * theta))
    return HistorySegment(tau, profile[:, None] * direction[None, :])


def random_segment(
    rng: np.random.Generator,
    tau: float,
    n_tau: int,
    n_modes: int,
    radius: float = 1.0,
    mix_constants: bool = True,
    decay: float = 1.5,
) -> HistorySegment:
    """Smooth random history with sup norm equal to `radius`.

    Each mode carries a random oscillation A_k cos(q_k theta + phase_k) with
    amplitudes decaying like k^-decay; optionally a random constant-in-theta
    component is mixed in. The result is rescaled to the requested norm.
    """
    theta = -tau + (tau / n_tau) * np.arange(n_tau + 1)
    amps = rng.normal(size=n_modes) / np.arange(1, n_modes + 1) ** decay
    freqs = rng.uniform(0.0, 2.0 * np.pi / tau, size=n_modes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    vals = amps[None, :] * np.cos(freqs[None, :] * theta[:, None] + phases[None, :])
    if mix_constants:
        const = rng.normal(size=n_modes) / np.arange(1, n_modes + 1) ** decay
        vals = vals + const[None, :]
    seg = HistorySegment(tau, vals)
    nrm = seg.norm()
    if nrm == 0.0:  # pragma: no cover - measure-zero draw
        return zero_segment(tau, n_tau, n_modes)
    return seg.scaled(radius / nrm)


def random_segment_batch(
    rng: np.random.Generator,
    count: int,
    tau: float,
    n_tau: int,
    n_modes: int,
    radius: float = 1.0,
    mix_constants: bool = True,
) -> np.ndarray:
    """Stack of `count` random segments as an array (n_tau+1, count, n_modes)."""
    out = np.empty((n_tau + 1, count, n_modes))
    for i in range(count):
        out[:, i, :] = random_segment(
            rng, tau, n_tau, n_modes, radius=radius, mix_constants=mix_constants
        ).values
    return out


def batch_norms(values: np.ndarray) -> np.ndarray:
    """Sup-L2 norms of a segment batch shaped (n_tau+1, count, n_modes)."""
    return np.max(np.linalg.norm(values, axis=2), axis=0)
