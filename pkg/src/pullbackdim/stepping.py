"""Shared exponential time stepping for the delayed reaction-diffusion system.

Per sine mode k, one step of length h integrates the stiff local term
-(mu_k + mu) * v exactly (exponential integrator). Terms known on the grid at
both step endpoints - the delayed linear term, delayed forcing, the pointwise
delayed nonlinearity, and the Laplacian of the noise field - enter through
the exponentially weighted trapezoid rule; both reads are exact grid offsets
(tau is an integer multiple of h), so no interpolation occurs anywhere. The
current-time polynomial term F(v + z) is only available at the left endpoint
and is treated by first-order exponential Euler, which sets the overall O(h)
convergence rate whenever F is active.

The same kernel drives both the linear semigroup (sigma-only) and the full
random equation, so dichotomy constants estimated from the linear flow apply
verbatim to simulated trajectory differences.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .basis import apply_pointwise, apply_polynomial
from .errors import BlowupError, ConfigError


def step_weights(a: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Exponential integrator weights for rate vector a and step h.

    Returns (E, w_left, w_right, w_euler) with
        E       = exp(-a h)
        w_left  = h * (phi1(-a h) - phi2(-a h))   trapezoid weight at t
        w_right = h * phi2(-a h)                  trapezoid weight at t + h
        w_euler = h * phi1(-a h)                  left-endpoint weight
    where phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2.
    """
    a = np.asarray(a, dtype=float)
    x = a * h
    E = np.exp(-x)
    phi1 = np.where(x > 1e-12, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0 - x / 2.0)
    # phi2 suffers cancellation for tiny x; switch to the series there.
    with np.errstate(invalid="ignore", divide="ignore"):
        phi2_direct = (x + np.expm1(-x)) / np.where(x > 0, x * x, 1.0)
    phi2 = np.where(x > 1e-5, phi2_direct, 0.5 - x / 6.0 + x * x / 24.0)
    return E, h * (phi1 - phi2), h * phi2, h * phi1


class DelayBuffer:
    """Ring buffer of the last n_tau + 1 states of a trajectory batch."""

    def __init__(self, seg_values: np.ndarray):
        seg_values = np.asarray(seg_values, dtype=float)
        if seg_values.ndim != 3:
            raise ConfigError("segment batch must have shape (n_tau+1, batch, n_modes)")
        self._ring = seg_values.copy()
        self._L = seg_values.shape[0]
        self._p = self._L - 1  # slot holding the newest state

    @property
    def newest(self) -> np.ndarray:
        return self._ring[self._p]

    def delayed(self, plus_one: bool = False) -> np.ndarray:
        """State at t - tau (or t + h - tau with plus_one), both exact grid slots."""
        off = 2 if plus_one else 1
        return self._ring[(self._p + off) % self._L]

    def push(self, state: np.ndarray) -> None:
        self._p = (self._p + 1) % self._L
        self._ring[self._p] = state

    def ordered(self) -> np.ndarray:
        """Copy of the buffer ordered oldest..newest, shape (n_tau+1, batch, n_modes)."""
        p = self._p
        return np.concatenate([self._ring[p + 1 :], self._ring[: p + 1]], axis=0)


def propagate(
    seg_values: np.ndarray,
    a_vec: np.ndarray,
    sigma: float,
    h: float,
    n_steps: int,
    z: np.ndarray | None = None,
    lap_z: np.ndarray | None = None,
    z_base: int = 0,
    poly: tuple[float, ...] = (),
    f_func: Callable[[np.ndarray], np.ndarray] | None = None,
    on_step: Callable[[int, DelayBuffer], None] | None = None,
    ceiling: float | None = None,
) -> tuple[DelayBuffer, np.ndarray]:
    """March a segment batch n_steps steps forward.

    Parameters
    ----------
    seg_values : ndarray (n_tau+1, batch, n_modes)
        Initial histories, oldest first.
    a_vec : ndarray (n_modes,)
        Local decay rates mu_k + mu.
    sigma : float
        Delayed linear coupling coefficient.
    z, lap_z : ndarray (n_z, n_modes), optional
        Noise field coefficients and their Laplacian on the absolute grid;
        step i reads index z_base + i. Delayed reads need z_base >= n_tau.
    poly : polynomial coefficients of F (a_1, a_2, ...), empty for none.
    f_func : pointwise Lipschitz nonlinearity applied to the delayed field.
    on_step : callback invoked after every step (and once at step 0) with
        (step_index, buffer).
    ceiling : blow-up guard on the current state norm.

    Returns
    -------
    (buffer, norms) where norms[i] is the batchwise state L2 norm at step i.
    """
    n_tau = seg_values.shape[0] - 1
    batch = seg_values.shape[1]
    E, w_left, w_right, w_euler = step_weights(a_vec, h)
    buf = DelayBuffer(seg_values)
    have_noise = z is not None
    if have_noise:
        if z_base < n_tau or z_base + n_steps >= z.shape[0] + 0:
            if z_base + n_steps > z.shape[0] - 1 or z_base < n_tau:
                raise ConfigError(
                    f"noise arrays cover indices [0, {z.shape[0] - 1}] but steps need "
                    f"[{z_base - n_tau}, {z_base + n_steps}]"
                )
    have_poly = len(poly) > 0 and any(poly)

    def forcing(step: int, delayed_v: np.ndarray) -> np.ndarray:
        """Grid-evaluable forcing g(t_step): delayed terms plus noise Laplacian."""
        if have_noise:
            field = delayed_v + z[z_base + step - n_tau][None, :]
        else:
            field = delayed_v
        g = -sigma * field
        if f_func is not None:
            g = g + apply_pointwise(field, f_func)
        if have_noise:
            g = g + lap_z[z_base + step][None, :]
        return g

    norms = np.empty((n_steps + 1, batch))
    norms[0] = np.linalg.norm(buf.newest, axis=1)
    if on_step is not None:
        on_step(0, buf)
    g_left = forcing(0, buf.delayed())
    for i in range(n_steps):
        cur = buf.newest
        g_right = forcing(i + 1, buf.delayed(plus_one=True))
        new = E[None, :] * cur + w_left[None, :] * g_left + w_right[None, :] * g_right
        if have_poly:
            if have_noise:
                arg = cur + z[z_base + i][None, :]
            else:
                arg = cur
            new = new + w_euler[None, :] * apply_polynomial(arg, poly)
        buf.push(new)
        g_left = g_right
        norms[i + 1] = np.linalg.norm(new, axis=1)
        if ceiling is not None:
            worst = norms[i + 1].max()
            if not np.isfinite(worst) or worst > ceiling:
                raise BlowupError(t=(i + 1) * h, norm=float(worst), ceiling=ceiling)
        if on_step is not None:
            on_step(i + 1, buf)
    return buf, norms
