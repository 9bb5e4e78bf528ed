"""Reference-measure quadrature and empirical divergence estimators.

The reference density is the time-dependent Gibbs form attached to a
dynamics spec. Binned divergences follow the midpoint protocol: reference
bin weights are the density evaluated at bin midpoints, renormalized over
the grid, so the normalization constant cancels; ``normalization_constant``
computes Z(t) by node-doubling Simpson quadrature when the absolute density
is needed.

Conventions: 0 * log 0 = 0 in the discrete KL; a bin with empirical mass but
an underflowed reference weight is an error, never infinity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import DynamicsSpec, Overdamped, NonReversible, Underdamped


class QuadratureError(RuntimeError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


# ---------------------------------------------------------------------------
# Reference measure
# ---------------------------------------------------------------------------

@dataclass
class ReferenceMeasure:
    """Normalized Gibbs reference density with a memoized Z(t)."""

    spec: DynamicsSpec
    domain: Optional[Sequence[tuple[float, float]]] = None
    rel_tol: float = 1e-8

    def __post_init__(self):
        self._z_cache: dict[float, float] = {}
        if self.domain is not None:
            self.domain = [tuple(map(float, ax)) for ax in self.domain]
            if len(self.domain) != self.spec.state_dim:
                raise ValueError(
                    f"domain needs {self.spec.state_dim} axes, got {len(self.domain)}"
                )

    def axes_bounds(self, t: float) -> list[tuple[float, float]]:
        """Integration box: explicit domain, convexity-scaled, or potential box."""
        if self.domain is not None:
            return list(self.domain)
        pot = self.spec.potential
        center = pot.minimizer if pot.minimizer is not None else np.zeros(pot.dim)
        if isinstance(self.spec, Underdamped):
            x_bounds = self._potential_axis(pot, center, temperature=1.0)
            return [x_bounds[0], (-12.0, 12.0)]
        temperature = float(self.spec.beta(t))
        return self._potential_axis(pot, center, temperature)

    @staticmethod
    def _potential_axis(pot, center, temperature):
        if pot.convexity_bounds is not None:
            sigma = np.sqrt(temperature / pot.convexity_bounds[0])
            return [(float(c - 12 * sigma), float(c + 12 * sigma)) for c in center]
        return [pot.domain for _ in range(pot.dim)]

    def log_unnorm(self, t, points):
        return self.spec.log_reference_unnorm(t, points)

    def grad_log(self, t, points):
        return self.spec.grad_log_reference(t, points)

    def normalization_constant(self, t: float) -> float:
        t = float(t)
        if t not in self._z_cache:
            self._z_cache[t] = self._quadrature(t)
        return self._z_cache[t]

    def density(self, t, points):
        z = self.normalization_constant(t)
        return np.exp(self.log_unnorm(t, points)) / z

    def _quadrature(self, t):
        bounds = self.axes_bounds(t)
        if len(bounds) == 1:
            return self._simpson_nd(t, bounds, n0=129, n_max=1 << 21)
        if len(bounds) == 2:
            return self._simpson_nd(t, bounds, n0=129, n_max=1 << 12)
        raise QuadratureError("quadrature implemented for 1D and 2D only")

    def _simpson_nd(self, t, bounds, n0, n_max):
        prev = None
        n = n0
        while n <= n_max:
            val = self._simpson_eval(t, bounds, n)
            if prev is not None and abs(val - prev) <= self.rel_tol * abs(val):
                return val
            prev = val
            n = 2 * (n - 1) + 1
        raise QuadratureError(
            f"normalization quadrature did not converge at t={t:.6g} "
            f"(last estimate {prev:.12g})", estimate=prev)

    def _simpson_eval(self, t, bounds, n):
        axes = [np.linspace(lo, hi, n) for lo, hi in bounds]
        weights = [_simpson_weights(n) * (hi - lo) / (n - 1)
                   for (lo, hi) in bounds]
        if len(axes) == 1:
            logu = self.log_unnorm(t, axes[0][:, None])
        else:
            xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.stack([xx, yy], axis=-1)
            logu = self.log_unnorm(t, pts)
        shift = np.max(logu)
        vals = np.exp(logu - shift)
        if len(axes) == 1:
            integral = float(weights[0] @ vals)
        else:
            integral = float(weights[0] @ vals @ weights[1])
        return integral * np.exp(shift)


def _simpson_weights(n):
    if n % 2 == 0:
        raise ValueError("Simpson rule needs an odd node count")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def normalization_constant(ref: ReferenceMeasure, t: float) -> float:
    return ref.normalization_constant(t)


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------

@dataclass
class HistogramGrid:
    """Fixed-bin histogram with in-range mass fractions."""

    edges: list[np.ndarray]
    counts: np.ndarray
    n_samples: int
    out_of_range: float

    @classmethod
    def from_samples(cls, samples, bins=50, ranges=None,
                     pad: float = 0.05, max_out_fraction: float = 0.01):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        m, d = samples.shape
        if d not in (1, 2):
            raise ValueError("histograms support 1D and 2D state spaces")
        if np.isscalar(bins):
            bins = [int(bins)] * d
        if ranges is None:
            ranges = []
            for i in range(d):
                lo, hi = samples[:, i].min(), samples[:, i].max()
                span = (hi - lo) or 1.0
                ranges.append((lo - pad * span, hi + pad * span))
        edges = [np.linspace(lo, hi, k + 1) for (lo, hi), k in zip(ranges, bins)]
        counts, _ = np.histogramdd(samples, bins=edges)
        out_frac = 1.0 - counts.sum() / m
        if out_frac > max_out_fraction:
            raise ValueError(
                f"{out_frac:.2%} of samples fall outside the histogram range "
                f"(limit {max_out_fraction:.0%}); widen the bins"
            )
        return cls(edges=edges, counts=counts, n_samples=m, out_of_range=float(out_frac))

    @property
    def dim(self):
        return len(self.edges)

    @property
    def mass(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total

    def midpoints(self) -> list[np.ndarray]:
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def midpoint_mesh(self) -> np.ndarray:
        mids = self.midpoints()
        if self.dim == 1:
            return mids[0][:, None]
        xx, yy = np.meshgrid(mids[0], mids[1], indexing="ij")
        return np.stack([xx, yy], axis=-1)

    def bin_widths(self) -> list[float]:
        return [float(e[1] - e[0]) for e in self.edges]


def reference_bin_masses(grid: HistogramGrid, ref: ReferenceMeasure, t: float) -> np.ndarray:
    """Midpoint-rule reference weights renormalized over the grid bins."""
    logu = ref.log_unnorm(t, grid.midpoint_mesh())
    w = np.exp(logu - np.max(logu))
    return w / w.sum()


# ---------------------------------------------------------------------------
# Discrete divergences
# ---------------------------------------------------------------------------

def discrete_kl(p, q) -> float:
    """sum p_i log(p_i / q_i) with 0 log 0 = 0; p > 0 where q == 0 is an error."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    support = p > 0
    if np.any(q[support] <= 0.0):
        bad = int(np.nonzero(support & (q <= 0.0))[0][0])
        raise ValueError(f"reference mass underflows at occupied bin {bad}")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def discrete_l1(p, q) -> float:
    return float(np.abs(np.asarray(p, float).ravel() - np.asarray(q, float).ravel()).sum())


def histogram_kl(grid: HistogramGrid, ref: ReferenceMeasure, t: float) -> float:
    return discrete_kl(grid.mass, reference_bin_masses(grid, ref, t))


def l1_distance(grid: HistogramGrid, ref: ReferenceMeasure, t: float) -> float:
    return discrete_l1(grid.mass, reference_bin_masses(grid, ref, t))


# ---------------------------------------------------------------------------
# Relative Fisher information estimate
# ---------------------------------------------------------------------------

def fisher_estimate(grid: HistogramGrid, ref: ReferenceMeasure, t: float,
                    diffusion_weight) -> float:
    """Binned estimate of the weighted relative Fisher information.

    The empirical score comes from central differences of log(counts + 1)
    (add-one occupancy smoothing keeps the log finite; the smoothing never
    touches the KL path). The reference score is analytic. This estimator is
    biased; it is validated against the Gaussian closed form only.
    """
    if grid.dim not in (1, 2):
        raise ValueError("fisher_estimate supports 1D and 2D grids")
    if int((grid.counts > 0).sum()) < 10:
        raise ValueError("too few occupied bins (< 10) for a Fisher estimate")

    logp = np.log(grid.counts + 1.0)
    widths = grid.bin_widths()
    mesh = grid.midpoint_mesh()
    ref_score = ref.grad_log(t, mesh)
    p = grid.mass

    w = np.asarray(diffusion_weight, dtype=float)
    if w.ndim == 0:
        w = w * np.eye(grid.dim)

    if grid.dim == 1:
        emp = np.full_like(logp, np.nan)
        emp[1:-1] = (logp[2:] - logp[:-2]) / (2 * widths[0])
        diff = emp - ref_score[:, 0]
        interior = ~np.isnan(emp)
        return float(np.sum(p[interior] * w[0, 0] * diff[interior] ** 2))

    emp = np.full(logp.shape + (2,), np.nan)
    emp[1:-1, :, 0] = (logp[2:, :] - logp[:-2, :]) / (2 * widths[0])
    emp[:, 1:-1, 1] = (logp[:, 2:] - logp[:, :-2]) / (2 * widths[1])
    diff = emp - ref_score
    interior = ~np.isnan(emp).any(axis=-1)
    quad = np.einsum("...i,ij,...j->...", diff, w, diff)
    return float(np.sum(p[interior] * quad[interior]))


# ---------------------------------------------------------------------------
# Reports and decay fits
# ---------------------------------------------------------------------------

PINSKER_SLACK = 1e-9


@dataclass(frozen=True)
class DivergenceReport:
    t: float
    kl: float
    l1: float
    fisher: Optional[float] = None
    pinsker_ok: bool = True

    @classmethod
    def from_histogram(cls, grid: HistogramGrid, ref: ReferenceMeasure, t: float,
                       with_fisher: bool = False, diffusion_weight=None):
        q = reference_bin_masses(grid, ref, t)
        p = grid.mass
        kl = discrete_kl(p, q)
        l1 = discrete_l1(p, q)
        fisher = None
        if with_fisher:
            weight = (ref.spec.diffusion_weight(t)
                      if diffusion_weight is None else diffusion_weight)
            fisher = fisher_estimate(grid, ref, t, weight)
        ok = l1 <= np.sqrt(max(2.0 * kl, 0.0)) * (1.0 + PINSKER_SLACK)
        return cls(t=float(t), kl=kl, l1=l1, fisher=fisher, pinsker_ok=bool(ok))


@dataclass(frozen=True)
class DecayFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def fit_decay_rate(times, values, window) -> DecayFit:
    """Least-squares slope of log(values) against log(times) inside window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    keep = (times >= lo) & (times <= hi) & (values > 0)
    if keep.sum() < 5:
        raise ValueError(
            f"need at least 5 positive points in window [{lo:.4g}, {hi:.4g}], "
            f"got {int(keep.sum())}"
        )
    lx, ly = np.log(times[keep]), np.log(values[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else 1.0 - np.sum(resid ** 2) / ss_tot
    return DecayFit(window=(float(lo), float(hi)), slope=float(slope),
                    intercept=float(intercept), r_squared=float(r2),
                    n_points=int(keep.sum()))
