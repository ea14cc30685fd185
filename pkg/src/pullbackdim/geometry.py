"""Covering numbers of finite-dimensional balls and fractal dimension proxies.

The covering lemma bounds the number of radius-r1 balls needed to cover a
radius-r2 ball of an m-dimensional subspace by m * 2^m * (1 + r2/r1)^m.
`grid_cover` produces a constructive witness: in the sup norm a lattice of
pitch 2*r1 covers the ball with ceil(r2/r1)^m balls, which always satisfies
the lemma bound; the Euclidean variant (pitch 2*r1/sqrt(m)) is audited for
coverage but its count is merely recorded against the bound.

True Hausdorff dimension is not computable from finite samples. Box counting
(and the correlation-sum estimator as a cross-check) serves as the computable
proxy; it dominates Hausdorff dimension, so "estimate <= theoretical bound"
is the meaningful consistency direction, which every estimate records.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError

PROXY_NOTE = "box-counting/correlation estimates dominate Hausdorff dimension"


def covering_bound(m: int, r1: float, r2: float) -> float:
    """Covering lemma bound m * 2^m * (1 + r2/r1)^m for balls of an m-dim subspace."""
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    if r1 <= 0 or r2 <= 0:
        raise ConfigError("radii must be positive")
    return m * 2.0**m * (1.0 + r2 / r1) ** m


@dataclass(frozen=True)
class CoverResult:
    """A constructed cover of B_{r2} by radius-r1 balls, audited for coverage."""

    m: int
    r1: float
    r2: float
    norm_kind: str
    constructed_count: int
    lemma_bound: float
    within_lemma_bound: bool
    max_probe_distance: float


def _sup_centers_1d(r1: float, r2: float) -> np.ndarray:
    q = math.ceil(r2 / r1 - 1e-12)
    return -r2 + (2.0 * np.arange(q) + 1.0) * r1


def grid_cover(m: int, r1: float, r2: float, norm_kind: str = "sup") -> CoverResult:
    """Cover the radius-r2 ball by a lattice of radius-r1 balls and audit it.

    sup norm: centers on the pitch-2*r1 product lattice, ceil(r2/r1)^m balls;
    the probe audit reduces to per-axis checks and the count always satisfies
    the lemma bound. Euclidean norm: pitch 2*r1/sqrt(m) lattice restricted to
    the relevant shell; coverage is audited on a probe grid, and the count is
    compared against (but not guaranteed below) the lemma bound.

    Raises NumericalError if any probe point is farther than r1 from every
    center (a construction bug, never a tolerance issue).
    """
    if m > 6:
        raise ConfigError(f"m must be <= 6 (combinatorial guard), got {m}")
    bound = covering_bound(m, r1, r2)
    if norm_kind == "sup":
        centers_1d = _sup_centers_1d(r1, r2)
        count = len(centers_1d) ** m
        # Product structure: the worst probe coordinate per axis decides coverage.
        probe_1d = np.linspace(-r2, r2, 101)
        dists = np.abs(probe_1d[:, None] - centers_1d[None, :]).min(axis=1)
        max_dist = float(dists.max())
        if max_dist > r1 * (1.0 + 1e-12):
            raise NumericalError("sup-norm cover failed its coverage audit")
        return CoverResult(
            m=m, r1=r1, r2=r2, norm_kind="sup",
            constructed_count=count, lemma_bound=bound,
            within_lemma_bound=bool(count <= bound), max_probe_distance=max_dist,
        )
    if norm_kind != "euclidean":
        raise ConfigError(f"norm_kind must be 'sup' or 'euclidean', got {norm_kind!r}")
    pitch = 2.0 * r1 / math.sqrt(m)
    n_half = math.ceil((r2 + pitch / 2) / pitch)
    axis = pitch * (np.arange(-n_half, n_half + 1) + 0.5)
    centers = [
        np.array(c)
        for c in itertools.product(axis, repeat=m)
        if np.linalg.norm(c) <= r2 + r1
    ]
    centers_arr = np.array(centers)
    # Probe grid: fine lattice restricted to the ball.
    probe_axis = np.linspace(-r2, r2, 9 if m >= 4 else 17)
    probes = np.array(
        [p for p in itertools.product(probe_axis, repeat=m) if np.linalg.norm(p) <= r2]
    )
    d2 = ((probes[:, None, :] - centers_arr[None, :, :]) ** 2).sum(axis=2)
    max_dist = float(np.sqrt(d2.min(axis=1)).max())
    if max_dist > r1 * (1.0 + 1e-12):
        raise NumericalError("euclidean cover failed its coverage audit")
    return CoverResult(
        m=m, r1=r1, r2=r2, norm_kind="euclidean",
        constructed_count=len(centers), lemma_bound=bound,
        within_lemma_bound=bool(len(centers) <= bound), max_probe_distance=max_dist,
    )


@dataclass(frozen=True)
class DimensionEstimate:
    """Log-log slope fit of a scaling law (occupied boxes or correlation sum)."""

    kind: str
    scales: tuple[float, ...]
    counts: tuple[float, ...]
    slope: float
    r2_fit: float
    fit_window: tuple[int, ...] = ()
    note: str = PROXY_NOTE

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "scales": list(self.scales),
            "counts": list(self.counts),
            "slope": self.slope,
            "r2_fit": self.r2_fit,
            "fit_window": list(self.fit_window),
            "note": self.note,
        }


def _as_points(cloud) -> np.ndarray:
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=float)
    if pts.ndim != 2:
        raise ConfigError("point cloud must be a 2-D array (points x embedding dim)")
    return pts


def _fit_loglog(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def box_dimension(cloud, n_scales: int = 10) -> DimensionEstimate:
    """Box-counting estimate: slope of log N(eps) against log(1/eps).

    Counts occupied boxes at dyadic scales spanning
    [diameter/2^n_scales, diameter/4], fits over the central window of
    strictly interior counts (1 < N < n_points), and warns when the fit's
    r^2 falls below 0.98 (no clean scaling regime).
    """
    pts = _as_points(cloud)
    n_pts = pts.shape[0]
    if n_pts < 100:
        raise ConfigError(f"need at least 100 points, got {n_pts}")
    if n_scales < 5:
        raise ConfigError(f"n_scales must be >= 5, got {n_scales}")
    lo = pts.min(axis=0)
    diameter = float(np.linalg.norm(pts.max(axis=0) - lo))
    # A cloud collapsed to rounding noise is a point: report dimension 0
    # rather than fitting float-level jitter.
    if diameter <= 1e-9 * (1.0 + float(np.abs(pts).max())):
        return DimensionEstimate(
            kind="box", scales=(), counts=(), slope=0.0, r2_fit=1.0
        )
    scales = [diameter / 2.0**j for j in range(2, n_scales + 1)]
    counts = []
    for eps in scales:
        keys = np.floor((pts - lo) / eps).astype(np.int64)
        counts.append(int(np.unique(keys, axis=0).shape[0]))
    counts_arr = np.array(counts, dtype=float)
    # Central scaling window: away from N ~ 1 (everything in one box) and from
    # saturation N ~ n_points (every point its own box), where the curve bends.
    interior = [i for i, c in enumerate(counts) if 8 <= c <= n_pts / 10]
    if len(interior) < 2:
        interior = [i for i, c in enumerate(counts) if 1 < c < n_pts]
    if len(interior) < 2:
        interior = list(range(len(scales)))
    x = np.log(1.0 / np.array(scales)[interior])
    slope, r2 = _fit_loglog(x, np.log(counts_arr[interior]))
    if np.ptp(np.log(counts_arr[interior])) == 0.0:
        slope, r2 = 0.0, 1.0
    if r2 < 0.98:
        warnings.warn(f"box-counting fit r^2={r2:.3f} < 0.98: no clean scaling regime")
    return DimensionEstimate(
        kind="box",
        scales=tuple(scales),
        counts=tuple(float(c) for c in counts),
        slope=slope,
        r2_fit=r2,
        fit_window=tuple(interior),
    )


def correlation_dimension(
    cloud, n_scales: int = 12, max_points: int = 4096, seed: int = 0
) -> DimensionEstimate:
    """Correlation-sum estimate: slope of log C(eps) against log eps.

    C(eps) is the fraction of point pairs within distance eps. Clouds larger
    than max_points are subsampled deterministically. The fit window keeps
    scales with at least 20 contributing pairs and C below 0.5 (away from
    starvation and saturation).
    """
    pts = _as_points(cloud)
    n_pts = pts.shape[0]
    if n_pts < 100:
        raise ConfigError(f"need at least 100 points, got {n_pts}")
    if n_scales < 5:
        raise ConfigError(f"n_scales must be >= 5, got {n_scales}")
    if n_pts > max_points:
        idx = np.random.default_rng(seed).choice(n_pts, size=max_points, replace=False)
        pts = pts[np.sort(idx)]
        n_pts = max_points
    # Pairwise distances in blocks (upper triangle only), d^2 via the Gram trick.
    sq = (pts**2).sum(axis=1)
    dists = []
    block = 2048
    for i0 in range(0, n_pts, block):
        a = pts[i0 : i0 + block]
        for j0 in range(i0, n_pts, block):
            b = pts[j0 : j0 + block]
            d2 = sq[i0 : i0 + block, None] + sq[None, j0 : j0 + block] - 2.0 * (a @ b.T)
            np.maximum(d2, 0.0, out=d2)
            if i0 == j0:
                iu = np.triu_indices(d2.shape[0], k=1, m=d2.shape[1])
                dists.append(np.sqrt(d2[iu]))
            else:
                dists.append(np.sqrt(d2.ravel()))
    d = np.concatenate(dists)
    d_pos = d[d > 1e-9 * (1.0 + float(np.abs(pts).max()))]
    if d_pos.size == 0:
        return DimensionEstimate(
            kind="correlation", scales=(), counts=(), slope=0.0, r2_fit=1.0
        )
    eps_lo = float(np.quantile(d_pos, 0.002))
    eps_hi = float(np.quantile(d_pos, 0.25))
    if eps_lo <= 0 or eps_lo >= eps_hi:
        eps_lo, eps_hi = float(d_pos.min()), float(d_pos.max())
    scales = np.exp(np.linspace(math.log(eps_lo), math.log(eps_hi), n_scales))
    n_pairs = d.size
    corr = np.array([(d <= eps).sum() / n_pairs for eps in scales])
    # Keep scales with enough contributing pairs and away from the bend at
    # large scales where boundary effects flatten the correlation integral.
    ok = [i for i in range(n_scales) if corr[i] * n_pairs >= 50 and corr[i] <= 0.2]
    if len(ok) < 2:
        ok = list(range(n_scales))
    slope, r2 = _fit_loglog(np.log(scales[ok]), np.log(corr[ok]))
    if np.ptp(np.log(corr[ok])) == 0.0:
        slope, r2 = 0.0, 1.0
    if r2 < 0.98:
        warnings.warn(f"correlation fit r^2={r2:.3f} < 0.98: no clean scaling regime")
    return DimensionEstimate(
        kind="correlation",
        scales=tuple(float(s) for s in scales),
        counts=tuple(float(ci) for ci in corr),
        slope=slope,
        r2_fit=r2,
        fit_window=tuple(ok),
    )
