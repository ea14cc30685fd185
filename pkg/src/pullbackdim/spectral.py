"""Spectral data of the linear delayed diffusion operator.

Per sine mode k the linear flow v' = -(mu_k + mu) v - sigma v(t - tau) has
exponential solutions exp(lambda*t) exactly when

    lambda + a + sigma * exp(-lambda * tau) = 0,      a = mu_k + mu.

Roots are seeded branchwise through the Lambert W function,
lambda = -a + W_b(-sigma*tau*exp(a*tau)) / tau, polished by Newton iteration
on the characteristic function itself, and certified purely by the residual.
Aggregating roots over modes and grouping equal real parts yields the
decomposition of the phase space into a finite-dimensional slow part (spanned
by the eigenfunctions above a cutoff rate) and an exponentially contracting
complement; the growth constants of the two parts are estimated as sampled
suprema over random unit histories.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import laplacian_eigenvalues
from .errors import ConfigError, NumericalError
from .segments import HistorySegment, batch_norms, random_segment_batch
from .stepping import DelayBuffer, propagate

_REAL_PART_TOL = 1e-8  # roots closer than this in Re are grouped
_DUPLICATE_TOL = 1e-8
_RESIDUAL_TARGET = 1e-10
_DEFECT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Laplacian spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Dirichlet sine-mode eigenvalues mu_k = k^2 on (0, pi)."""

    n_modes: int
    eigenvalues: np.ndarray = field(repr=False)


def laplacian_spectrum(n_modes: int) -> LaplacianSpectrum:
    eigs = laplacian_eigenvalues(n_modes)
    eigs.setflags(write=False)
    return LaplacianSpectrum(n_modes=n_modes, eigenvalues=eigs)


# ---------------------------------------------------------------------------
# Lambert W (Halley iteration, asymptotic/branch-point seeds)
# ---------------------------------------------------------------------------


def lambert_w(z: complex, branch: int = 0, tol: float = 1e-14, max_iter: int = 80) -> complex:
    """Branch `branch` of the Lambert W function, solving w * exp(w) = z.

    Seeds come from the Maclaurin series (principal branch near 0), the
    branch-point expansion near -1/e, or the asymptotic logarithm seed
    L1 - log(L1) with L1 = log(z) + 2*pi*i*branch; Halley iteration polishes.
    """
    z = complex(z)
    if z == 0:
        if branch == 0:
            return 0j
        raise NumericalError("W_b(0) is singular for b != 0")
    inv_e = -1.0 / math.e
    p_sq = 2.0 * (math.e * z + 1.0)
    if branch == 0:
        if abs(z - inv_e) < 0.15:
            p = cmath.sqrt(p_sq)
            w = -1.0 + p - p_sq / 6.0 + 11.0 / 72.0 * p * p_sq
        elif abs(z) < 0.5:
            w = z * (1.0 - z + 1.5 * z * z)
        else:
            l1 = cmath.log(z)
            if abs(l1) < 1.5:
                # |log z| small (z near the unit circle): the asymptotic seed
                # degenerates; log(1 + z) tracks the principal branch there.
                w = cmath.log(1.0 + z)
            else:
                l2 = cmath.log(l1)
                w = l1 - l2 + l2 / l1
    elif branch == -1 and z.imag == 0.0 and inv_e <= z.real < 0.0:
        if abs(z.real - inv_e) < 0.15:
            p = -math.sqrt(max(p_sq.real if isinstance(p_sq, complex) else p_sq, 0.0))
            w = complex(-1.0 + p - p * p / 6.0 + 11.0 / 72.0 * p ** 3)
        else:
            l1 = math.log(-z.real)
            l2 = math.log(-l1)
            w = complex(l1 - l2 + l2 / l1)
    else:
        l1 = cmath.log(z) + 2j * math.pi * branch
        l2 = cmath.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(max_iter):
        ew = cmath.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0:
            wp1 += 1e-12
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= tol * (1.0 + abs(w)):
            break
    return w


# ---------------------------------------------------------------------------
# Characteristic roots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharacteristicRoot:
    """One certified root of lambda + a + sigma*exp(-lambda*tau) = 0."""

    lam: complex
    spatial_mode: int
    branch: int
    residual: float

    @property
    def re(self) -> float:
        return self.lam.real

    @property
    def im(self) -> float:
        return self.lam.imag


@dataclass(frozen=True)
class BranchFailure:
    branch: int
    seed_value: complex
    residual: float


@dataclass(frozen=True)
class RootSet:
    """Roots sorted by decreasing real part, plus any non-converged branches."""

    a: float
    sigma: float
    tau: float
    roots: tuple[CharacteristicRoot, ...]
    failures: tuple[BranchFailure, ...] = ()

    def __iter__(self):
        return iter(self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    def __getitem__(self, idx):
        return self.roots[idx]


def characteristic_residual(lam: complex, a: float, sigma: float, tau: float) -> float:
    return abs(lam + a + sigma * cmath.exp(-lam * tau))


def _newton_polish(lam: complex, a: float, sigma: float, tau: float, max_iter: int = 100):
    for _ in range(max_iter):
        e = sigma * cmath.exp(-lam * tau)
        f = lam + a + e
        if abs(f) < 0.25 * _RESIDUAL_TARGET:
            return lam, abs(f), True
        fp = 1.0 - tau * e
        if fp == 0:
            fp = 1e-15
        lam = lam - f / fp
    return lam, characteristic_residual(lam, a, sigma, tau), False


def _root_sort_key(root: CharacteristicRoot):
    return (-root.lam.real, abs(root.lam.imag), 0 if root.lam.imag >= 0 else 1)


def characteristic_roots(a: float, sigma: float, tau: float, n_branches: int = 8) -> RootSet:
    """Roots of lambda + a + sigma*exp(-lambda*tau) = 0 over W branches |b| <= n_branches.

    Each seed is Newton-polished until the residual drops below 1e-10;
    non-convergent branches are reported in `failures` without aborting.
    Roots are deduplicated (tolerance 1e-8), closed under conjugation, and
    sorted by decreasing real part.

    The delay-free case tau = 0 returns the single root -(a + sigma); the
    uncoupled case sigma = 0 returns the single root -a.
    """
    if tau < 0:
        raise ConfigError(f"tau must be nonnegative, got {tau}")
    if n_branches < 0:
        raise ConfigError(f"n_branches must be >= 0, got {n_branches}")
    if tau == 0.0:
        root = CharacteristicRoot(complex(-(a + sigma)), spatial_mode=0, branch=0, residual=0.0)
        return RootSet(a=a, sigma=sigma, tau=tau, roots=(root,))
    if sigma == 0.0:
        root = CharacteristicRoot(complex(-a), spatial_mode=0, branch=0, residual=0.0)
        return RootSet(a=a, sigma=sigma, tau=tau, roots=(root,))
    arg = -sigma * tau * math.exp(a * tau)
    found: list[CharacteristicRoot] = []
    failures: list[BranchFailure] = []
    for b in range(-n_branches, n_branches + 1):
        seed = -a + lambert_w(arg, branch=b) / tau
        lam, res, ok = _newton_polish(seed, a, sigma, tau)
        if not ok or res >= _RESIDUAL_TARGET:
            failures.append(BranchFailure(branch=b, seed_value=seed, residual=res))
            continue
        if abs(lam.imag) < _DUPLICATE_TOL:
            lam = complex(lam.real, 0.0)
        found.append(CharacteristicRoot(lam=lam, spatial_mode=0, branch=b, residual=res))
    # Deduplicate (different branches can polish to the same root).
    unique: list[CharacteristicRoot] = []
    for r in sorted(found, key=_root_sort_key):
        if all(abs(r.lam - u.lam) > _DUPLICATE_TOL for u in unique):
            unique.append(r)
    # Conjugate closure: the equation has real coefficients.
    closed = list(unique)
    for r in unique:
        if r.lam.imag != 0.0 and all(
            abs(r.lam.conjugate() - u.lam) > _DUPLICATE_TOL for u in closed
        ):
            closed.append(
                CharacteristicRoot(
                    lam=r.lam.conjugate(),
                    spatial_mode=r.spatial_mode,
                    branch=-r.branch,
                    residual=r.residual,
                )
            )
    closed.sort(key=_root_sort_key)
    return RootSet(a=a, sigma=sigma, tau=tau, roots=tuple(closed), failures=tuple(failures))


# ---------------------------------------------------------------------------
# Argument-principle root counting (oracle)
# ---------------------------------------------------------------------------


def count_roots_in_rectangle(
    a: float,
    sigma: float,
    tau: float,
    re_range: tuple[float, float],
    im_range: tuple[float, float],
    max_points: int = 200_000,
) -> int:
    """Number of characteristic roots inside a rectangle, via the winding number.

    Tracks the phase of D(lambda) = lambda + a + sigma*exp(-lambda*tau) along
    the boundary, adaptively densifying until consecutive phase steps are
    small. Raises NumericalError when the contour passes too close to a root
    or the winding does not resolve to an integer.
    """
    re_lo, re_hi = re_range
    im_lo, im_hi = im_range
    if not (re_lo < re_hi and im_lo < im_hi):
        raise ConfigError("rectangle must have positive extent")

    def f(lam: complex) -> complex:
        return lam + a + sigma * cmath.exp(-lam * tau)

    corners = [
        complex(re_lo, im_lo),
        complex(re_hi, im_lo),
        complex(re_hi, im_hi),
        complex(re_lo, im_hi),
        complex(re_lo, im_lo),
    ]
    # Initial sampling resolves the exp(-lambda*tau) oscillation on vertical edges.
    per_period = 16
    pts: list[complex] = []
    for z0, z1 in zip(corners[:-1], corners[1:]):
        span_im = abs(z1.imag - z0.imag)
        n = max(32, int(per_period * tau * span_im / (2.0 * math.pi)) + 1)
        ts = np.linspace(0.0, 1.0, n, endpoint=False)
        pts.extend(z0 + t * (z1 - z0) for t in ts)
    pts.append(corners[0])
    vals = [f(z) for z in pts]
    scale = max(1.0, abs(a) + abs(sigma))
    # Refine until each phase step is well below pi.
    while len(pts) < max_points:
        refined_pts: list[complex] = [pts[0]]
        refined_vals: list[complex] = [vals[0]]
        any_split = False
        for z0, z1, f0, f1 in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
            if abs(cmath.phase(f1 / f0)) > 0.8:
                zm = 0.5 * (z0 + z1)
                refined_pts.extend([zm, z1])
                refined_vals.extend([f(zm), f1])
                any_split = True
            else:
                refined_pts.append(z1)
                refined_vals.append(f1)
        pts, vals = refined_pts, refined_vals
        if not any_split:
            break
    else:
        raise NumericalError("contour refinement did not terminate (root on boundary?)")
    if min(abs(v) for v in vals) < 1e-12 * scale:
        raise NumericalError("contour passes through a root; move the rectangle")
    total = sum(cmath.phase(f1 / f0) for f0, f1 in zip(vals[:-1], vals[1:]))
    winding = total / (2.0 * math.pi)
    count = round(winding)
    if abs(winding - count) > 0.05:
        raise NumericalError(f"winding number {winding} did not resolve to an integer")
    return int(count)


# ---------------------------------------------------------------------------
# Spectral model: decomposition data and dichotomy constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralModel:
    """Aggregated root data, cutoff decomposition, and growth constants.

    rho lists the distinct real parts in decreasing order with their
    multiplicities (complex conjugate pairs count 2). The cutoff index m
    selects rho[m-1] as the contraction rate of the complement; k_m is the
    dimension of the slow subspace. K and M are the sampled suprema

        K >= ||Q S(t) x|| * exp(-rho_m t) / ||x||,
        M >= max(||S(t) x||, ||P S(t) x||) * exp(-rho_1 t) / ||x||

    over the estimation samples; they certify nothing beyond those samples
    (see estimation metadata).
    """

    n_modes: int
    mu: float
    sigma: float
    tau: float
    eigenvalues: tuple[float, ...]
    roots: tuple[CharacteristicRoot, ...]
    rho: tuple[float, ...]
    multiplicities: tuple[int, ...]
    cutoff_index: int
    k_m: int
    K: float
    M: float
    estimation: dict = field(default_factory=dict, repr=False)

    @property
    def rho1(self) -> float:
        return self.rho[0]

    @property
    def rho_cut(self) -> float:
        return self.rho[self.cutoff_index - 1]

    @property
    def gap(self) -> float:
        return self.rho1 - self.rho_cut

    def retained_roots(self, mode: int) -> list[CharacteristicRoot]:
        """Roots of a spatial mode with real part at or above the cutoff rate."""
        cut = self.rho_cut - _REAL_PART_TOL
        return [r for r in self.roots if r.spatial_mode == mode and r.lam.real >= cut]

    def to_json(self) -> str:
        payload = {
            "n_modes": self.n_modes,
            "mu": self.mu,
            "sigma": self.sigma,
            "tau": self.tau,
            "eigenvalues": list(self.eigenvalues),
            "roots": [
                {
                    "re": r.lam.real,
                    "im": r.lam.imag,
                    "mode": r.spatial_mode,
                    "branch": r.branch,
                    "residual": r.residual,
                }
                for r in self.roots
            ],
            "rho_list": list(self.rho),
            "multiplicities": list(self.multiplicities),
            "cutoff_index": self.cutoff_index,
            "k_m": self.k_m,
            "K": self.K,
            "M": self.M,
            "estimation_metadata": self.estimation,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "SpectralModel":
        d = json.loads(text)
        roots = tuple(
            CharacteristicRoot(
                lam=complex(r["re"], r["im"]),
                spatial_mode=r["mode"],
                branch=r["branch"],
                residual=r["residual"],
            )
            for r in d["roots"]
        )
        return SpectralModel(
            n_modes=d["n_modes"],
            mu=d["mu"],
            sigma=d["sigma"],
            tau=d["tau"],
            eigenvalues=tuple(d["eigenvalues"]),
            roots=roots,
            rho=tuple(d["rho_list"]),
            multiplicities=tuple(d["multiplicities"]),
            cutoff_index=d["cutoff_index"],
            k_m=d["k_m"],
            K=d["K"],
            M=d["M"],
            estimation=d.get("estimation_metadata", {}),
        )


def _group_real_parts(roots: list[CharacteristicRoot]) -> tuple[tuple[float, ...], tuple[int, ...]]:
    ordered = sorted(roots, key=lambda r: -r.lam.real)
    rho: list[float] = []
    mult: list[int] = []
    for r in ordered:
        if rho and abs(r.lam.real - rho[-1]) <= _REAL_PART_TOL:
            mult[-1] += 1
        else:
            rho.append(r.lam.real)
            mult.append(1)
    return tuple(rho), tuple(mult)


def _retained_by_mode(
    roots: tuple[CharacteristicRoot, ...], rho_cut: float
) -> dict[int, list[CharacteristicRoot]]:
    cut = rho_cut - _REAL_PART_TOL
    by_mode: dict[int, list[CharacteristicRoot]] = {}
    for r in roots:
        if r.lam.real >= cut:
            by_mode.setdefault(r.spatial_mode, []).append(r)
    return by_mode


def _project_batch(
    ordered: np.ndarray,
    retained: dict[int, list[CharacteristicRoot]],
    sigma: float,
    tau: float,
) -> np.ndarray:
    """Slow-subspace component of a segment batch (n_tau+1, B, n_modes).

    Per mode and retained root lambda the coefficient along exp(lambda*theta)
    is (phi(0) - sigma * I) / (1 - sigma*tau*exp(-lambda*tau)) with
    I = integral_{-tau}^{0} exp(-lambda*(xi+tau)) phi(xi) dxi by the trapezoid
    rule on the segment grid; conjugate pairs combine to a real contribution.
    """
    L = ordered.shape[0]
    n_tau = L - 1
    h = tau / n_tau
    theta = -tau + h * np.arange(L)
    out = np.zeros_like(ordered)
    for mode, roots in retained.items():
        fk = ordered[:, :, mode - 1]  # (L, B)
        for root in roots:
            lam = root.lam
            if lam.imag < 0:
                continue  # conjugate handled with its Im >= 0 partner
            denom = 1.0 - sigma * tau * cmath.exp(-lam * tau)
            if abs(denom) < _DEFECT_TOL:
                raise NumericalError(
                    f"defective characteristic root at {lam}: generalized "
                    "eigenfunctions are unsupported"
                )
            kernel = np.exp(-lam * (theta + tau))
            integral = np.trapezoid(kernel[:, None] * fk, dx=h, axis=0)
            coeff = (fk[-1] - sigma * integral) / denom
            contrib = coeff[None, :] * np.exp(lam * theta)[:, None]
            if lam.imag > _DUPLICATE_TOL:
                out[:, :, mode - 1] += 2.0 * contrib.real
            else:
                out[:, :, mode - 1] += contrib.real
    return out


def project_P(seg: HistorySegment, model: SpectralModel) -> HistorySegment:
    """Projection onto the slow subspace spanned by the above-cutoff roots.

    Modes with no retained root map to zero. Raises NumericalError on a
    defective root (vanishing normalization denominator).
    """
    _check_segment_model(seg, model)
    retained = _retained_by_mode(model.roots, model.rho_cut)
    ordered = seg.values[:, None, :]
    proj = _project_batch(ordered, retained, model.sigma, model.tau)
    return HistorySegment(seg.tau, proj[:, 0, :])


def project_Q(seg: HistorySegment, model: SpectralModel) -> HistorySegment:
    """Complementary projection I - P."""
    return seg - project_P(seg, model)


def _check_segment_model(seg: HistorySegment, model: SpectralModel) -> None:
    if seg.n_modes != model.n_modes:
        raise ConfigError(
            f"segment has {seg.n_modes} modes but the model was built with {model.n_modes}"
        )
    if abs(seg.tau - model.tau) > 1e-9 * max(1.0, model.tau):
        raise ConfigError(f"segment delay {seg.tau} does not match model delay {model.tau}")


def semigroup_S(t: float, seg: HistorySegment, mu: float, sigma: float) -> HistorySegment:
    """Linear solution semigroup: evolve a history t time units (t on the grid).

    Method of steps with exact exponential integration of the local term per
    sine mode; t must be a nonnegative integer multiple of the segment grid
    step.
    """
    if t < 0:
        raise ConfigError(f"t must be nonnegative, got {t}")
    h = seg.grid_step
    n_steps = int(round(t / h))
    if abs(n_steps * h - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigError(f"t={t} is not a multiple of the segment grid step {h}")
    if n_steps == 0:
        return HistorySegment(seg.tau, seg.values.copy())
    a_vec = laplacian_eigenvalues(seg.n_modes) + mu
    buf, _ = propagate(seg.values[:, None, :], a_vec, sigma, h, n_steps)
    return HistorySegment(seg.tau, buf.ordered()[:, 0, :])


def build_model(
    spectrum: LaplacianSpectrum,
    mu: float,
    sigma: float,
    tau: float,
    cutoff_index: int,
    samples: int,
    n_branches: int = 8,
    n_tau: int = 128,
    seed: int = 0,
    t_max_factor: float = 5.0,
    K_override: float | None = None,
    M_override: float | None = None,
) -> SpectralModel:
    """Aggregate characteristic roots over all modes and estimate K and M.

    Roots with equal real parts (tolerance 1e-8) are grouped into the rho
    list; cutoff_index (1-based) selects the contraction rate, which must be
    negative. K and M are maximized ratios over `samples` random unit
    histories on an n_tau grid and the time grid {0, h, ..., t_max_factor*tau};
    estimation uses the same stepping kernel as the semigroup. Sample i is
    drawn from a per-index child seed, so enlarging `samples` never decreases
    the estimates. Overrides replace the sampled values and are recorded.
    """
    if mu <= 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if samples < 1:
        raise ConfigError(f"samples must be >= 1, got {samples}")
    all_roots: list[CharacteristicRoot] = []
    n_failures = 0
    for k in range(1, spectrum.n_modes + 1):
        a_k = float(spectrum.eigenvalues[k - 1]) + mu
        rs = characteristic_roots(a_k, sigma, tau, n_branches=n_branches)
        n_failures += len(rs.failures)
        all_roots.extend(
            CharacteristicRoot(r.lam, spatial_mode=k, branch=r.branch, residual=r.residual)
            for r in rs.roots
        )
    rho, mult = _group_real_parts(all_roots)
    if not (1 <= cutoff_index <= len(rho)):
        raise ConfigError(f"cutoff_index must be in [1, {len(rho)}], got {cutoff_index}")
    rho_cut = rho[cutoff_index - 1]
    if rho_cut >= 0:
        raise ConfigError(
            f"cutoff real part must be negative, got rho_{cutoff_index} = {rho_cut}"
        )
    k_m = int(sum(mult[:cutoff_index]))
    retained = _retained_by_mode(tuple(all_roots), rho_cut)

    # Sampled suprema for the dichotomy constants.
    h = tau / n_tau
    n_steps = int(round(t_max_factor * tau / h))
    rng_children = np.random.SeedSequence(seed).spawn(samples)
    batch = np.empty((n_tau + 1, samples, spectrum.n_modes))
    for i, ss in enumerate(rng_children):
        batch[:, i, :] = random_segment_batch(
            np.random.default_rng(ss), 1, tau, n_tau, spectrum.n_modes
        )[:, 0, :]
    a_vec = np.asarray(spectrum.eigenvalues, dtype=float) + mu
    rho1 = rho[0]
    best = {"K": 0.0, "M": 0.0, "K_at": (0, 0.0), "M_at": (0, 0.0)}

    def observe(step: int, buf: DelayBuffer) -> None:
        t = step * h
        ordered = buf.ordered()
        p_vals = _project_batch(ordered, retained, sigma, tau)
        s_norm = batch_norms(ordered)
        p_norm = batch_norms(p_vals)
        q_norm = batch_norms(ordered - p_vals)
        m_ratio = np.maximum(s_norm, p_norm) * math.exp(-rho1 * t)
        k_ratio = q_norm * math.exp(-rho_cut * t)
        i_m = int(np.argmax(m_ratio))
        i_k = int(np.argmax(k_ratio))
        if m_ratio[i_m] > best["M"]:
            best["M"], best["M_at"] = float(m_ratio[i_m]), (i_m, t)
        if k_ratio[i_k] > best["K"]:
            best["K"], best["K_at"] = float(k_ratio[i_k]), (i_k, t)

    propagate(batch, a_vec, sigma, h, n_steps, on_step=observe)
    K_est, M_est = best["K"], best["M"]
    K = float(K_override) if K_override is not None else K_est
    M = float(M_override) if M_override is not None else M_est
    estimation = {
        "samples": samples,
        "n_tau": n_tau,
        "seed": seed,
        "t_max": t_max_factor * tau,
        "K_estimated": K_est,
        "M_estimated": M_est,
        "K_source": "override" if K_override is not None else "estimated",
        "M_source": "override" if M_override is not None else "estimated",
        "K_argmax": {"sample": best["K_at"][0], "t": best["K_at"][1]},
        "M_argmax": {"sample": best["M_at"][0], "t": best["M_at"][1]},
        "M_includes_projected_norm": True,
        "branch_failures": n_failures,
        "caveat": "K and M are sampled suprema; finitely many samples cannot "
        "certify domination of the true constants.",
    }
    return SpectralModel(
        n_modes=spectrum.n_modes,
        mu=mu,
        sigma=sigma,
        tau=tau,
        eigenvalues=tuple(float(e) for e in spectrum.eigenvalues),
        roots=tuple(sorted(all_roots, key=_root_sort_key)),
        rho=rho,
        multiplicities=mult,
        cutoff_index=cutoff_index,
        k_m=k_m,
        K=K,
        M=M,
        estimation=estimation,
    )
