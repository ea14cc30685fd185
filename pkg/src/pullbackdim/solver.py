"""Pathwise integration of the transformed random delayed reaction-diffusion system.

After subtracting the stationary OU field z the state v solves, per sine
mode,

    v' = -(mu_k + mu) v - sigma [v + z](t - tau) + F(v + z)(t)
         + f([v + z](t - tau)) + (Delta z)(t),

which the shared stepping kernel integrates with the stiff local term handled
exactly. The cocycle Phi(t, omega, phi) of the original equation evolves u by
subtracting z from the initial history pointwise in theta, integrating v, and
adding z back along the shifted window; because every read is an exact grid
offset the cocycle identity holds on the grid to rounding.

The delay is constrained to an integer multiple of the time step, which
removes delay interpolation entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import laplacian_eigenvalues, polyval_coeffs
from .errors import ConfigError
from .noise import NoiseField, make_noise_field, ou_path, sample_wiener
from .segments import HistorySegment
from .stepping import DelayBuffer, propagate

F_KINDS = ("zero", "scaled_sine", "rational_saturation")


@dataclass(frozen=True)
class ModelConfig:
    """Parameters of the stochastic delayed reaction-diffusion model.

    F_coeffs lists the polynomial coefficients a_1..a_{2p-1}; a nonempty list
    must have odd length with negative leading coefficient (dissipativity
    hypothesis). The empty tuple is the linear baseline F = 0. f_kind selects
    the delayed Lipschitz nonlinearity, each variant having f(0) = 0 and
    global Lipschitz constant f_lipschitz:

        zero                 u -> 0
        scaled_sine          u -> L_f * sin(u)
        rational_saturation  u -> L_f * u / (1 + u^2)

    g_coeffs has one row of sine coefficients per noise channel.
    """

    mu: float
    sigma: float
    tau: float
    F_coeffs: tuple[float, ...]
    f_kind: str
    f_lipschitz: float
    g_coeffs: np.ndarray = field(repr=False)
    n_modes: int = 1
    h: float = 0.01

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError(f"model.mu must be positive, got {self.mu}")
        if self.tau <= 0:
            raise ConfigError(f"model.tau must be positive, got {self.tau}")
        if self.h <= 0:
            raise ConfigError(f"model.h must be positive, got {self.h}")
        if self.n_modes < 1:
            raise ConfigError(f"model.n_modes must be >= 1, got {self.n_modes}")
        ratio = self.tau / self.h
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(
                f"model.tau/model.h must be an integer (got tau={self.tau}, h={self.h})"
            )
        coeffs = tuple(float(a) for a in self.F_coeffs)
        if coeffs:
            if len(coeffs) % 2 == 0:
                raise ConfigError("model.F_coeffs must have odd length (odd-degree polynomial)")
            if coeffs[-1] >= 0:
                raise ConfigError("model.F_coeffs leading coefficient must be negative")
        object.__setattr__(self, "F_coeffs", coeffs)
        if self.f_kind not in F_KINDS:
            raise ConfigError(f"model.f_kind must be one of {F_KINDS}, got {self.f_kind!r}")
        if self.f_lipschitz < 0:
            raise ConfigError(f"model.f_lipschitz must be nonnegative, got {self.f_lipschitz}")
        if self.f_kind == "zero" and self.f_lipschitz != 0.0:
            raise ConfigError("model.f_lipschitz must be 0 for f_kind 'zero'")
        g = np.atleast_2d(np.asarray(self.g_coeffs, dtype=float))
        if g.shape[1] != self.n_modes:
            raise ConfigError(
                f"model.g_coeffs rows must have length n_modes={self.n_modes}, got {g.shape[1]}"
            )
        g.setflags(write=False)
        object.__setattr__(self, "g_coeffs", g)

    @property
    def n_tau(self) -> int:
        return int(round(self.tau / self.h))

    @property
    def m_channels(self) -> int:
        return self.g_coeffs.shape[0]

    @property
    def a_vec(self) -> np.ndarray:
        return laplacian_eigenvalues(self.n_modes) + self.mu

    def f_func(self) -> Callable[[np.ndarray], np.ndarray] | None:
        if self.f_kind == "zero" or self.f_lipschitz == 0.0:
            return None
        lf = self.f_lipschitz
        if self.f_kind == "scaled_sine":
            return lambda u: lf * np.sin(u)
        return lambda u: lf * u / (1.0 + u * u)

    def F_value(self, u: np.ndarray) -> np.ndarray:
        """Pointwise evaluation of the polynomial F."""
        if not self.F_coeffs:
            return np.zeros_like(u)
        return polyval_coeffs(self.F_coeffs, u)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "tau": self.tau,
            "F_coeffs": list(self.F_coeffs),
            "f_kind": self.f_kind,
            "f_lipschitz": self.f_lipschitz,
            "g_coeffs": np.asarray(self.g_coeffs).tolist(),
            "n_modes": self.n_modes,
            "h": self.h,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        try:
            return ModelConfig(
                mu=float(d["mu"]),
                sigma=float(d["sigma"]),
                tau=float(d["tau"]),
                F_coeffs=tuple(d.get("F_coeffs", ())),
                f_kind=d.get("f_kind", "zero"),
                f_lipschitz=float(d.get("f_lipschitz", 0.0)),
                g_coeffs=np.asarray(d["g_coeffs"], dtype=float),
                n_modes=int(d["n_modes"]),
                h=float(d["h"]),
            )
        except KeyError as exc:
            raise ConfigError(f"model config missing field {exc.args[0]!r}") from None


def noise_for(cfg: ModelConfig, seed: int, t_lo: float, t_hi: float) -> NoiseField:
    """Seeded noise field on the model grid covering [t_lo, t_hi].

    Pure function of (cfg, seed, t_lo, t_hi): the same arguments reproduce the
    field bit-for-bit, and a window extended on the right agrees with the
    shorter one on the overlap.
    """
    n = int(np.ceil((t_hi - t_lo) / cfg.h - 1e-9))
    w = sample_wiener(seed, cfg.m_channels, cfg.h, max(n, 1), t0=t_lo)
    return make_noise_field(ou_path(w, cfg.mu), cfg.g_coeffs)


@dataclass(frozen=True)
class Trajectory:
    """Time grid, state norms, and (optionally) the sliding history segments.

    Adjacent stored segments overlap exactly: segment i+1 shifted back one
    step equals segment i on the shared window, float-for-float. The
    fixed-step exponential scheme never rejects steps; the field is kept for
    the diagnostic record.
    """

    t_start: float
    h: float
    norms: np.ndarray = field(repr=False)
    terminal: HistorySegment = field(repr=False)
    segments: tuple[HistorySegment, ...] | None = None
    step_rejections: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.norms.shape[0])

    @property
    def energy(self) -> np.ndarray:
        """Squared state norms ||v(t)||^2."""
        return self.norms**2


def _check_psi(cfg: ModelConfig, psi: HistorySegment) -> None:
    if abs(psi.tau - cfg.tau) > 1e-9 * max(1.0, cfg.tau):
        raise ConfigError(f"history delay {psi.tau} does not match model.tau={cfg.tau}")
    if psi.n_tau != cfg.n_tau:
        raise ConfigError(
            f"history grid ({psi.n_tau} steps) does not match model grid ({cfg.n_tau} steps)"
        )
    if psi.n_modes != cfg.n_modes:
        raise ConfigError(
            f"history has {psi.n_modes} modes but model.n_modes={cfg.n_modes}"
        )


def _check_noise(cfg: ModelConfig, noise: NoiseField) -> None:
    if noise.n_modes != cfg.n_modes:
        raise ConfigError("noise field mode count does not match the model")
    if abs(noise.h - cfg.h) > 1e-12 * max(1.0, cfg.h):
        raise ConfigError("noise grid step does not match model.h")


def _steps_of(cfg: ModelConfig, t: float, name: str) -> int:
    n = int(round(t / cfg.h))
    if n < 0 or abs(n * cfg.h - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigError(f"{name}={t} must be a nonnegative multiple of model.h={cfg.h}")
    return n


def integrate_batch(
    cfg: ModelConfig,
    noise: NoiseField | None,
    seg_values: np.ndarray,
    T: float,
    start: float = 0.0,
    ceiling: float | None = 1e6,
    on_step: Callable[[int, DelayBuffer], None] | None = None,
) -> tuple[DelayBuffer, np.ndarray]:
    """March a batch of histories (n_tau+1, B, n_modes) over [start, start+T]."""
    n_steps = _steps_of(cfg, T, "T")
    if noise is None:
        return propagate(
            seg_values, cfg.a_vec, cfg.sigma, cfg.h, n_steps,
            poly=cfg.F_coeffs, f_func=cfg.f_func(), on_step=on_step, ceiling=ceiling,
        )
    _check_noise(cfg, noise)
    z_base = noise.index_of(start)
    if z_base < cfg.n_tau or z_base + n_steps > noise.ou.n_steps:
        raise ConfigError(
            f"noise path does not cover [{start - cfg.tau}, {start + T}]"
        )
    return propagate(
        seg_values, cfg.a_vec, cfg.sigma, cfg.h, n_steps,
        z=noise.z_field, lap_z=noise.laplacian_z, z_base=z_base,
        poly=cfg.F_coeffs, f_func=cfg.f_func(), on_step=on_step, ceiling=ceiling,
    )


def integrate_v(
    cfg: ModelConfig,
    noise: NoiseField | None,
    psi: HistorySegment,
    T: float,
    start: float = 0.0,
    store_segments: bool = False,
    ceiling: float | None = 1e6,
) -> Trajectory:
    """Integrate the transformed equation from history psi over [start, start+T].

    The noise field must cover [start - tau, start + T] on the model grid
    (pass None for the noise-free equation). Aborts with BlowupError when the
    state norm exceeds `ceiling`.
    """
    _check_psi(cfg, psi)
    stored: list[HistorySegment] = []
    on_step = None
    if store_segments:
        def on_step(step: int, buf: DelayBuffer) -> None:
            stored.append(HistorySegment(cfg.tau, buf.ordered()[:, 0, :]))

    buf, norms = integrate_batch(
        cfg, noise, psi.values[:, None, :], T, start=start, ceiling=ceiling, on_step=on_step
    )
    return Trajectory(
        t_start=start,
        h=cfg.h,
        norms=norms[:, 0],
        terminal=HistorySegment(cfg.tau, buf.ordered()[:, 0, :]),
        segments=tuple(stored) if store_segments else None,
    )


def _z_window(noise: NoiseField, cfg: ModelConfig, t_end: float) -> np.ndarray:
    """Noise-field coefficients on the window [t_end - tau, t_end], oldest first."""
    i_end = noise.index_of(t_end)
    i_lo = i_end - cfg.n_tau
    if i_lo < 0:
        raise ConfigError(f"noise path does not cover [{t_end - cfg.tau}, {t_end}]")
    return noise.z_field[i_lo : i_end + 1]


def evolve_rds(
    cfg: ModelConfig,
    noise: NoiseField,
    phi: HistorySegment,
    t: float,
    start: float = 0.0,
    ceiling: float | None = 1e6,
) -> HistorySegment:
    """Cocycle of the original equation: u-history evolved t time units.

    Subtracts the noise field from phi pointwise over the history window,
    integrates the transformed state, and adds the field back on the shifted
    window. `start` is the absolute time of phi's right endpoint, so
    evolve_rds(..., start=s) realizes the flow over the shifted noise path.
    """
    _check_psi(cfg, phi)
    n_steps = _steps_of(cfg, t, "t")
    if n_steps == 0:
        return HistorySegment(phi.tau, phi.values.copy())
    psi = HistorySegment(phi.tau, phi.values - _z_window(noise, cfg, start))
    traj = integrate_v(cfg, noise, psi, t, start=start, ceiling=ceiling)
    return HistorySegment(phi.tau, traj.terminal.values + _z_window(noise, cfg, start + t))


@dataclass(frozen=True)
class LipschitzCheck:
    """Outcome of one majorant audit ||F(v1) - F(v2)|| <= R * ||v1 - v2||."""

    ratio: float
    majorant: float
    satisfied: bool
    precondition_ok: bool
    sup_v1: float
    sup_v2: float


def lipschitz_majorant_check(
    cfg: ModelConfig, v1: np.ndarray, v2: np.ndarray, r_value: float, c: float
) -> LipschitzCheck:
    """Audit the polynomial difference bound on a pair of fields.

    v1 and v2 are point values on a common collocation grid; both must lie in
    the sup-norm ball of radius c + (c+1)*r_value, else the check is skipped
    (precondition_ok False). The majorant uses absolute coefficients, see
    `bound.lipschitz_majorant`. L2 norms use the interval quadrature weight
    pi/(n+1).
    """
    from .bound import lipschitz_majorant

    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise ConfigError("fields must share a grid")
    sup1 = float(np.max(np.abs(v1)))
    sup2 = float(np.max(np.abs(v2)))
    ball = c + (c + 1.0) * r_value
    majorant = lipschitz_majorant(r_value, cfg.F_coeffs, c)
    if sup1 > ball or sup2 > ball:
        return LipschitzCheck(
            ratio=np.nan, majorant=majorant, satisfied=False,
            precondition_ok=False, sup_v1=sup1, sup_v2=sup2,
        )
    w = np.pi / (v1.shape[-1] + 1)
    diff = np.sqrt(w * np.sum((v1 - v2) ** 2))
    f_diff = np.sqrt(w * np.sum((cfg.F_value(v1) - cfg.F_value(v2)) ** 2))
    ratio = 0.0 if diff == 0.0 else float(f_diff / diff)
    return LipschitzCheck(
        ratio=ratio, majorant=majorant, satisfied=bool(f_diff <= majorant * diff + 1e-14),
        precondition_ok=True, sup_v1=sup1, sup_v2=sup2,
    )
