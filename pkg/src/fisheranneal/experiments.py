"""Named desk-scale scenarios with diagnostic time series and verdicts.

Presets mirror the figure protocols at reduced scale (particles cut 10x,
steps cut 5x; the drift-race pair runs 5x fewer particles and 10x fewer
steps at 10x the step size) so each scenario finishes in a couple of
minutes while keeping Monte-Carlo error below the effect sizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import potentials, schedules
from .dynamics import DynamicsSpec, NonReversible, Overdamped, QuadraticJ, Underdamped
from .integrate import Ensemble, StepPlan, run_trajectory
from .measure import (DecayFit, DivergenceReport, HistogramGrid,
                      ReferenceMeasure, fit_decay_rate)

T0_DEFAULT = schedules.E
N_BATCHES = 20


@dataclass(frozen=True)
class Scenario:
    name: str
    dynamics: DynamicsSpec
    plan: StepPlan
    M: int
    bins: int = 50
    hist_ranges: Optional[list] = None      # None: data-driven, 5% padded
    observers: tuple = ("kl", "l1")
    kl_axes: str = "full"                   # "x" restricts kinetic KL to position
    expected: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "Scenario":
        plan_kw = {k: kw.pop(k) for k in ("h", "n_steps", "t0", "record_every")
                   if k in kw}
        scenario = replace(self, **kw) if kw else self
        if plan_kw:
            scenario = replace(scenario, plan=replace(self.plan, **plan_kw))
        return scenario


@dataclass
class RunRecord:
    scenario: str
    seed: int
    times: list
    reports: list                      # DivergenceReport or None per record
    mean_dist: list                    # float or None per record
    batch_means: list                  # list of per-batch means or None
    fit: Optional[DecayFit] = None
    verdict: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        if name == "mean_dist":
            return np.array([np.nan if v is None else v for v in self.mean_dist])
        vals = []
        for rep in self.reports:
            if rep is None:
                vals.append(np.nan)
            else:
                v = getattr(rep, name)
                vals.append(np.nan if v is None else v)
        return np.array(vals)

    def csv_rows(self) -> list[str]:
        rows = ["t,kl,l1,fisher,mean_dist"]
        for i, t in enumerate(self.times):
            rep = self.reports[i]
            cells = [repr(float(t))]
            for name in ("kl", "l1", "fisher"):
                v = None if rep is None else getattr(rep, name)
                cells.append("" if v is None else repr(float(v)))
            md = self.mean_dist[i]
            cells.append("" if md is None else repr(float(md)))
            rows.append(",".join(cells))
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(self.csv_rows()) + "\n")

    def verdict_doc(self) -> dict:
        doc = {"scenario": self.scenario, "seed": self.seed, "verdict": self.verdict}
        if self.fit is not None:
            doc["fit"] = {
                "window": list(self.fit.window),
                "slope": self.fit.slope,
                "intercept": self.fit.intercept,
                "r_squared": self.fit.r_squared,
                "n_points": self.fit.n_points,
            }
        doc["pinsker_ok"] = all(r.pinsker_ok for r in self.reports if r is not None)
        return doc

    def write_verdict(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.verdict_doc(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Preset catalogue
# ---------------------------------------------------------------------------

def _overdamped_desk(name, pot_name, C, dim_h, expected=None) -> Scenario:
    pot = potentials.get_potential(pot_name)
    dyn = Overdamped(pot, schedules.inverse_log(C=C, t0=T0_DEFAULT))
    plan = StepPlan(h=dim_h, n_steps=2000, t0=T0_DEFAULT, record_every=20)
    return Scenario(name=name, dynamics=dyn, plan=plan, M=100_000,
                    bins=50, observers=("kl", "l1"),
                    expected=expected or {})


def _underdamped_desk(name, pot_name, base, C) -> Scenario:
    pot = potentials.get_potential(pot_name)
    dyn = Underdamped(pot, schedules.shifted_inverse_log(base=base, C=C, t0=T0_DEFAULT))
    plan = StepPlan(h=0.002, n_steps=2000, t0=T0_DEFAULT, record_every=20)
    return Scenario(name=name, dynamics=dyn, plan=plan, M=100_000,
                    bins=50, observers=("kl", "l1"))


def _ex52_pair() -> tuple[Scenario, Scenario]:
    pot = potentials.anisotropic_quadratic_2d(a=2.0, b=0.1)
    beta = schedules.hyperbolic(t0=1.0)
    # c is the quadratic stream function with cross-curvature (b - a) / (2 beta),
    # evaluated at the initial temperature beta = 1
    c_hess = np.array([[0.0, -0.95], [-0.95, 0.0]])
    skew = NonReversible(pot, beta, QuadraticJ(c_hess, np.zeros(2)))
    plain = Overdamped(pot, beta)
    plan = StepPlan(h=5e-4, n_steps=30_000, t0=0.0, record_every=300)
    base = dict(plan=plan, M=2000, observers=("mean_dist",))
    return (Scenario(name="ex52", dynamics=skew, **base),
            Scenario(name="ex52-overdamped", dynamics=plain, **base))


_DECAY_EXPECTED = {"kl_slope_max": -0.7, "t_kl_slope_max": 0.1}


def preset_scenario(name: str) -> Scenario:
    builders = {
        "fig1a-desk": lambda: _overdamped_desk("fig1a-desk", "fig1a", 4.0, 0.002,
                                               expected=_DECAY_EXPECTED),
        "fig1b-desk": lambda: _overdamped_desk("fig1b-desk", "fig1b", 4.0, 0.002),
        "fig2a-desk": lambda: _overdamped_desk("fig2a-desk", "fig2a", 4.0, 0.002),
        "fig2b-desk": lambda: _overdamped_desk("fig2b-desk", "fig2b", 4.0, 0.002),
        "fig3a-desk": lambda: _overdamped_desk("fig3a-desk", "fig3a", 4.0, 0.001),
        "fig3b-desk": lambda: _overdamped_desk("fig3b-desk", "fig3b", 4.0, 0.001),
        "fig3c-desk": lambda: _overdamped_desk("fig3c-desk", "fig3c", 4.0, 0.001),
        "fig6a-desk": lambda: _underdamped_desk("fig6a-desk", "fig6a", 1.0, 1.0),
        "fig6b-desk": lambda: _underdamped_desk("fig6b-desk", "fig6b", 1.0, 1.0),
        "fig7a-desk": lambda: _underdamped_desk("fig7a-desk", "fig7a", 1.0, 1.0),
        "fig7b-desk": lambda: _underdamped_desk("fig7b-desk", "fig7b", 1.0, 1.0),
        "ex52": lambda: _ex52_pair()[0],
        "ex52-overdamped": lambda: _ex52_pair()[1],
    }
    if name not in builders:
        raise KeyError(f"unknown scenario preset '{name}' "
                       f"(choose from {sorted(builders)})")
    return builders[name]()


def list_presets() -> list[str]:
    return ["fig1a-desk", "fig1b-desk", "fig2a-desk", "fig2b-desk",
            "fig3a-desk", "fig3b-desk", "fig3c-desk",
            "fig6a-desk", "fig6b-desk", "fig7a-desk", "fig7b-desk",
            "ex52", "ex52-overdamped", "ex52-race"]


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _divergence_reference(scenario: Scenario):
    dyn = scenario.dynamics
    if scenario.kl_axes == "x" and isinstance(dyn, Underdamped):
        # position marginal of the kinetic reference: Gibbs at unit temperature
        marginal = Overdamped(dyn.potential, schedules.constant(1.0))
        return ReferenceMeasure(marginal)
    return ReferenceMeasure(dyn)


def run_scenario(scenario: Scenario, seed: int, workers: int = 1,
                 with_fisher: Optional[bool] = None) -> RunRecord:
    """Integrate a scenario and attach divergence/distance diagnostics."""
    dyn = scenario.dynamics
    want_div = any(k in scenario.observers for k in ("kl", "l1", "fisher"))
    want_fisher = ("fisher" in scenario.observers
                   if with_fisher is None else with_fisher)
    want_dist = "mean_dist" in scenario.observers
    ref = _divergence_reference(scenario) if want_div else None
    target = dyn.potential.minimizer
    if want_dist and target is None:
        raise ValueError(f"scenario '{scenario.name}' needs a known minimizer")
    if want_dist and isinstance(dyn, Underdamped):
        target = np.array([float(target[0]), 0.0])

    def observe(e: Ensemble) -> dict:
        row: dict = {}
        if want_div:
            samples = e.positions
            if scenario.kl_axes == "x" and isinstance(dyn, Underdamped):
                samples = e.positions[:, :1]
            grid = HistogramGrid.from_samples(samples, bins=scenario.bins,
                                              ranges=scenario.hist_ranges)
            row["report"] = DivergenceReport.from_histogram(
                grid, ref, e.time, with_fisher=want_fisher)
        if want_dist:
            dist = np.linalg.norm(e.positions - target, axis=1)
            batches = np.array_split(dist, N_BATCHES)
            row["mean_dist"] = float(dist.mean())
            row["batches"] = [float(b.mean()) for b in batches if b.size]
        return row

    result = run_trajectory(dyn, scenario.plan, scenario.M,
                            observers=(observe,), seed=seed, workers=workers)

    reports = [r.get("report") for r in result.records]
    mean_dist = [r.get("mean_dist") for r in result.records]
    batch_means = [r.get("batches") for r in result.records]
    record = RunRecord(scenario=scenario.name, seed=seed, times=list(result.times),
                       reports=reports, mean_dist=mean_dist, batch_means=batch_means)

    kls = record.series("kl")
    times = np.array(record.times)
    if want_div and np.isfinite(kls).any() and len(times) >= 5:
        window = slope_window(times, scenario.plan.t0)
        try:
            record.fit = fit_decay_rate(times, kls, window)
        except ValueError:
            record.fit = None

    record.verdict = _evaluate_expected(scenario, record)
    return record


def slope_window(times, t0) -> tuple[float, float]:
    """Fit window: last decade of recorded times, excluding burn-in t < 3 t0.

    Desk-scale horizons can end before 3 t0; in that case fall back to the
    last half of the recorded span so the fit still has data.
    """
    times = np.asarray(times, dtype=float)
    t_end = float(times.max())
    lo = max(t_end / 10.0, 3.0 * t0)
    if (times >= lo).sum() < 5:
        lo = t0 + 0.5 * (t_end - t0)
    return (lo, t_end)


def _evaluate_expected(scenario: Scenario, record: RunRecord) -> dict:
    verdict: dict = {}
    exp = scenario.expected
    if not exp:
        return verdict
    times = np.array(record.times)
    kls = record.series("kl")
    if "kl_slope_max" in exp and record.fit is not None:
        verdict["kl_slope"] = record.fit.slope
        verdict["kl_slope_max"] = exp["kl_slope_max"]
        verdict["kl_slope_ok"] = bool(record.fit.slope <= exp["kl_slope_max"])
    if "t_kl_slope_max" in exp:
        window = slope_window(times, scenario.plan.t0)
        try:
            tf = fit_decay_rate(times, times * kls, window)
            verdict["t_kl_slope"] = tf.slope
            verdict["t_kl_slope_max"] = exp["t_kl_slope_max"]
            verdict["t_kl_slope_ok"] = bool(tf.slope <= exp["t_kl_slope_max"])
        except ValueError:
            verdict["t_kl_slope_ok"] = False
    verdict["pass"] = all(v for k, v in verdict.items() if k.endswith("_ok"))
    return verdict


# ---------------------------------------------------------------------------
# Scenario comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonVerdict:
    metric: str
    final_a: float
    final_b: float
    final_se_a: float
    final_se_b: float
    z_score: float            # (b - a) / combined se; positive means a smaller
    winner: str               # "a", "b", or "tie"
    per_time_diff: np.ndarray

    def to_doc(self) -> dict:
        return {
            "metric": self.metric,
            "final_a": self.final_a,
            "final_b": self.final_b,
            "final_se_a": self.final_se_a,
            "final_se_b": self.final_se_b,
            "z_score": self.z_score,
            "winner": self.winner,
        }


def compare_scenarios(a: RunRecord, b: RunRecord,
                      metric: str = "mean_dist",
                      sigma: float = 3.0) -> ComparisonVerdict:
    """Per-time and final-time ordering with batch-means error bars."""
    if list(a.times) != list(b.times):
        raise ValueError("run records have mismatched time grids")
    sa, sb = a.series(metric), b.series(metric)
    if np.isnan(sa).all() or np.isnan(sb).all():
        raise ValueError(f"metric '{metric}' missing from one of the records")

    def final_stats(rec):
        batches = rec.batch_means[-1]
        if metric == "mean_dist" and batches:
            arr = np.asarray(batches, dtype=float)
            return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))
        return float(rec.series(metric)[-1]), 0.0

    fa, se_a = final_stats(a)
    fb, se_b = final_stats(b)
    denom = np.hypot(se_a, se_b)
    if denom > 0:
        z = (fb - fa) / denom
    elif fb == fa:
        z = 0.0
    else:
        z = float("inf") if fb > fa else float("-inf")
    if z >= sigma:
        winner = "a"
    elif z <= -sigma:
        winner = "b"
    else:
        winner = "tie"
    return ComparisonVerdict(metric=metric, final_a=fa, final_b=fb,
                             final_se_a=se_a, final_se_b=se_b,
                             z_score=float(z), winner=winner,
                             per_time_diff=sb - sa)
