"""Dimension-bound arithmetic: majorant process, ergodic averages, bound formulas.

The pathwise Lipschitz majorant of the polynomial nonlinearity over the
absorbing ball of radius c + (c+1)*r is

    R(r) = sum_k |a_k| * (c + (c+1)*r)^(k-1),        (0^0 := 1)

taken with absolute coefficients: the derivation bounds a norm by a sum of
products of norms, which is only valid with nonnegative weights (the signed
leading coefficient would make the majorant negative).

With dichotomy constants (K, M), rates rho_1 > rho_m (rho_m < 0), Lipschitz
constant L_f of the delayed nonlinearity, ergodic means E(R), E(R^2), and a
cover-contraction parameter alpha in (0, 2), the feasibility condition reads

    eta * exp(xi * t0) < 1,
    eta = alpha*M + 2K + 2KML_f/(rho1 - rhom) + 2KM/sqrt(2(rho1 - rhom)),
    xi  = M*L_f + rho1 + 2E(R) + 2E(R^2),

and the attractor's Hausdorff dimension is then bounded by

    d < (-ln k_m - k_m ln(2 + 4/alpha)) / (ln eta + xi * t0).

The alpha-independent variant replaces alpha by 2 (prefactor 2M, cover factor
ln 4); its Lambda is read as k_m, which the report records.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConsistencyError
from .noise import OUProcessPath

N_BATCHES = 20  # batch-means blocks for ergodic standard errors


def lipschitz_majorant(r_value, F_coeffs: Sequence[float], c: float):
    """Majorant R(r) = sum_k |a_k| (c + (c+1) r)^(k-1); vectorized in r_value.

    Nonnegative and nondecreasing in r_value; the k = 1 term contributes
    |a_1| even at c = r = 0 (0^0 taken as 1).
    """
    r = np.asarray(r_value, dtype=float)
    if np.any(r < 0):
        raise ConfigError("r_value must be nonnegative")
    if c < 0:
        raise ConfigError(f"c must be nonnegative, got {c}")
    base = c + (c + 1.0) * r
    out = np.zeros_like(base)
    for k, a_k in enumerate(F_coeffs, start=1):
        out = out + abs(a_k) * base ** (k - 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ErgodicAverages:
    """Time averages of R and R^2 along a noise path, with batch-means errors."""

    er: float
    er2: float
    er_stderr: float
    er2_stderr: float
    burn_in: float
    span: float
    n_batches: int = N_BATCHES
    warning: str | None = None


def ergodic_averages(
    z: OUProcessPath, F_coeffs: Sequence[float], c: float, burn_in: float = 0.0
) -> ErgodicAverages:
    """Trapezoid time-averages of R(r(t)) and R(r(t))^2 after a burn-in.

    Standard errors come from 20 batch means; a warning is attached (and
    emitted) when either standard error exceeds 5% of its mean.
    """
    times = z.times
    span_total = times[-1] - times[0]
    if burn_in < 0 or burn_in >= span_total:
        raise ConfigError(f"burn_in must lie in [0, {span_total}), got {burn_in}")
    start = int(np.searchsorted(times, times[0] + burn_in))
    r = z.r_values[start:]
    t = times[start:]
    if r.shape[0] < 2 * N_BATCHES:
        raise ConfigError("path too short after burn-in for batch-means estimation")
    R = lipschitz_majorant(r, F_coeffs, c)
    span = t[-1] - t[0]
    er = float(np.trapezoid(R, t) / span)
    er2 = float(np.trapezoid(R**2, t) / span)
    # Batch means over equal index blocks.
    usable = (r.shape[0] // N_BATCHES) * N_BATCHES
    blocks = R[:usable].reshape(N_BATCHES, -1)
    means = blocks.mean(axis=1)
    means2 = (blocks**2).mean(axis=1)
    er_se = float(np.std(means, ddof=1) / math.sqrt(N_BATCHES))
    er2_se = float(np.std(means2, ddof=1) / math.sqrt(N_BATCHES))
    warning = None
    if (er > 0 and er_se > 0.05 * er) or (er2 > 0 and er2_se > 0.05 * er2):
        warning = (
            f"batch-means standard error exceeds 5% of the mean "
            f"(E(R)={er:.4g}+-{er_se:.2g}, E(R^2)={er2:.4g}+-{er2_se:.2g})"
        )
        warnings.warn(warning, stacklevel=2)
    return ErgodicAverages(
        er=er, er2=er2, er_stderr=er_se, er2_stderr=er2_se,
        burn_in=burn_in, span=float(span), warning=warning,
    )


@dataclass(frozen=True)
class BoundInputs:
    """Scalars entering the feasibility condition and the dimension bound."""

    alpha: float
    t0: float
    K: float
    M: float
    rho1: float
    rhom: float
    k_m: int
    L_f: float
    er: float
    er2: float
    c: float
    F_coeffs: tuple[float, ...] = ()
    k_source: str = "estimated"
    m_source: str = "estimated"

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ConfigError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.t0 <= 0:
            raise ConfigError(f"t0 must be positive, got {self.t0}")
        if not self.rho1 > self.rhom:
            raise ConfigError(f"rho1={self.rho1} must exceed rhom={self.rhom}")
        if self.rhom >= 0:
            raise ConfigError(f"rhom must be negative, got {self.rhom}")
        if self.k_m < 1 or int(self.k_m) != self.k_m:
            raise ConfigError(f"k_m must be a positive integer, got {self.k_m}")
        if self.L_f < 0 or self.K < 0 or self.M < 0:
            raise ConfigError("K, M and L_f must be nonnegative")
        if self.er < 0 or self.er2 < 0:
            raise ConfigError("ergodic averages must be nonnegative")
        if self.c < 0:
            raise ConfigError(f"c must be nonnegative, got {self.c}")
        object.__setattr__(self, "F_coeffs", tuple(float(a) for a in self.F_coeffs))

    @property
    def gap(self) -> float:
        return self.rho1 - self.rhom

    def with_alpha(self, alpha: float) -> "BoundInputs":
        return replace(self, alpha=alpha)


def _prefactor(inputs: BoundInputs, alpha: float) -> float:
    g = inputs.gap
    return (
        alpha * inputs.M
        + 2.0 * inputs.K
        + 2.0 * inputs.K * inputs.M * inputs.L_f / g
        + 2.0 * inputs.K * inputs.M / math.sqrt(2.0 * g)
    )


def _exponent(inputs: BoundInputs) -> float:
    return (inputs.M * inputs.L_f + inputs.rho1 + 2.0 * inputs.er + 2.0 * inputs.er2) * inputs.t0


@dataclass(frozen=True)
class ConditionCheck:
    """Feasibility flag with margin = 1 - eta * exp(exponent)."""

    feasible: bool
    margin: float
    eta: float
    exponent: float
    product: float


def check_condition(inputs: BoundInputs) -> ConditionCheck:
    """Evaluate the contraction condition eta * exp(exponent) < 1."""
    eta = _prefactor(inputs, inputs.alpha)
    exponent = _exponent(inputs)
    product = eta * math.exp(exponent) if exponent < 700 else math.inf
    return ConditionCheck(
        feasible=bool(product < 1.0),
        margin=1.0 - product,
        eta=eta,
        exponent=exponent,
        product=product,
    )


@dataclass(frozen=True)
class BoundReport:
    """Dimension bound evaluation with every intermediate recorded.

    d_bound is None when the condition fails. The alpha-independent variant
    (prefactor with alpha = 2, cover factor ln 4, Lambda read as k_m) carries
    its own feasibility flag.
    """

    inputs: BoundInputs
    eta: float
    exponent: float
    feasible: bool
    margin: float
    numerator: float
    denominator: float
    d_bound: float | None
    eta_alpha2: float
    feasible_alpha2: bool
    d_bound_alpha2: float | None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "inputs": {
                "alpha": self.inputs.alpha,
                "t0": self.inputs.t0,
                "K": self.inputs.K,
                "M": self.inputs.M,
                "rho1": self.inputs.rho1,
                "rhom": self.inputs.rhom,
                "k_m": self.inputs.k_m,
                "L_f": self.inputs.L_f,
                "ER": self.inputs.er,
                "ER2": self.inputs.er2,
                "c": self.inputs.c,
                "F_coeffs": list(self.inputs.F_coeffs),
                "K_source": self.inputs.k_source,
                "M_source": self.inputs.m_source,
            },
            "eta": self.eta,
            "exponent": self.exponent,
            "product": self.eta * math.exp(self.exponent),
            "feasible": self.feasible,
            "margin": self.margin,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "d_bound": self.d_bound,
            "eta_alpha2": self.eta_alpha2,
            "feasible_alpha2": self.feasible_alpha2,
            "d_bound_alpha2": self.d_bound_alpha2,
            "notes": list(self.notes),
        }


def hausdorff_bound(inputs: BoundInputs) -> BoundReport:
    """Evaluate the dimension bound and its alpha-independent variant.

    Refuses (ConsistencyError) if the condition reports feasible while the
    bound's denominator is nonnegative, which would contradict feasibility.
    """
    cond = check_condition(inputs)
    numerator = -math.log(inputs.k_m) - inputs.k_m * math.log(2.0 + 4.0 / inputs.alpha)
    denominator = math.log(cond.eta) + cond.exponent
    d_bound = None
    if cond.feasible:
        if denominator >= 0:
            raise ConsistencyError(
                f"feasible condition with nonnegative denominator {denominator}"
            )
        d_bound = numerator / denominator
    eta2 = _prefactor(inputs, 2.0)
    denom2 = math.log(eta2) + cond.exponent
    feasible2 = bool(eta2 * math.exp(min(cond.exponent, 700.0)) < 1.0)
    d2 = None
    if feasible2:
        if denom2 >= 0:
            raise ConsistencyError(
                f"alpha=2 variant feasible with nonnegative denominator {denom2}"
            )
        d2 = (-math.log(inputs.k_m) - inputs.k_m * math.log(4.0)) / denom2
    notes = (
        "majorant uses absolute polynomial coefficients",
        "alpha-independent variant evaluated with Lambda := k_m",
        f"K source: {inputs.k_source}; M source: {inputs.m_source}",
    )
    return BoundReport(
        inputs=inputs,
        eta=cond.eta,
        exponent=cond.exponent,
        feasible=cond.feasible,
        margin=cond.margin,
        numerator=numerator,
        denominator=denominator,
        d_bound=d_bound,
        eta_alpha2=eta2,
        feasible_alpha2=feasible2,
        d_bound_alpha2=d2,
        notes=notes,
    )


def pathwise_majorant_integrals(
    z: OUProcessPath, F_coeffs: Sequence[float], c: float, t_start: float, t_end: float
) -> tuple[float, float]:
    """Trapezoid integrals of R and R^2 along the path over [t_start, t_end]."""
    i0 = z.index_of(t_start)
    i1 = z.index_of(t_end)
    if i1 < i0:
        raise ConfigError("t_end must not precede t_start")
    if i1 == i0:
        return 0.0, 0.0
    r = z.r_values[i0 : i1 + 1]
    R = lipschitz_majorant(r, F_coeffs, c)
    return float(np.trapezoid(R, dx=z.h)), float(np.trapezoid(R**2, dx=z.h))
