"""Command-line front end.

Subcommands: simulate, certify, oracle, fit, compare, list-presets.
Configuration comes from an optional JSON file plus flag overrides (flags
win). Exit codes: 0 success, 2 configuration error, 3 certification
infeasible, 4 runtime numerical failure.
"""

from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import curvature, experiments, potentials, schedules
from .dynamics import NonReversible, Overdamped, QuadraticJ, Underdamped
from .integrate import IntegrationError, StepPlan
from .measure import QuadratureError, ReferenceMeasure
from .oracle import GaussianState, binned_gaussian_kl, gaussian_kl, solve_gaussian_oracle

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

FLAG_ALIASES = {
    "--stepsize": "--h",
    "--step-size": "--h",
    "--dt": "--h",
    "--particles": "--M",
    "--nbins": "--bins",
}

CONFIG_KEYS = {
    "preset", "potential", "variant", "schedule", "C", "base", "c", "c12",
    "t0", "M", "N", "h", "bins", "record_every", "seed", "out", "plot",
    "threads", "family", "t_range", "t_points", "grid_points",
    "lmin", "lmax", "z1", "z2", "r", "window", "metric", "name",
}


class CliError(Exception):
    def __init__(self, msg, code=EXIT_CONFIG):
        super().__init__(msg)
        self.code = code


class Parser(argparse.ArgumentParser):
    """argparse with alias hints for near-miss flags; errors exit 2."""

    def error(self, message):
        for alias, target in FLAG_ALIASES.items():
            if alias in message:
                message += f" (did you mean {target}?)"
                break
        else:
            token = _first_unknown_flag(message)
            if token:
                known = _known_flags(self)
                hit = difflib.get_close_matches(token, known, n=1)
                if hit:
                    message += f" (did you mean {hit[0]}?)"
        super().error(message)


def _first_unknown_flag(message):
    if "unrecognized arguments:" not in message:
        return None
    rest = message.split("unrecognized arguments:", 1)[1].strip().split()
    return rest[0] if rest and rest[0].startswith("--") else None


def _known_flags(parser):
    flags = []
    for action in parser._actions:
        flags.extend(o for o in action.option_strings if o.startswith("--"))
    return flags


def default_seed() -> int:
    env = os.environ.get("FA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"FA_SEED must be an integer, got {env!r}")


def build_parser() -> Parser:
    parser = Parser(prog="fisheranneal",
                    description="Annealed Langevin simulation and certification")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, help="JSON config file")
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (default: FA_SEED env var or 0)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (never changes results)")

    sim = sub.add_parser("simulate", parents=[], help="run a particle scenario")
    common(sim)
    sim.add_argument("--preset", type=str, help="scenario preset name")
    sim.add_argument("--potential", type=str, help="potential preset for inline specs")
    sim.add_argument("--variant", type=str, default="overdamped",
                     choices=["overdamped", "underdamped", "nonreversible"])
    sim.add_argument("--schedule", type=str, default="inverse_log",
                     choices=["inverse_log", "shifted_inverse_log",
                              "hyperbolic", "constant"])
    sim.add_argument("--C", type=float, default=4.0, help="schedule constant")
    sim.add_argument("--base", type=float, default=1.0,
                     help="base value for shifted schedules")
    sim.add_argument("--c", type=float, default=None,
                     help="constant-schedule value")
    sim.add_argument("--c12", type=float, default=-0.95,
                     help="cross-curvature of the skew stream function")
    sim.add_argument("--t0", type=float, default=None, help="start time")
    sim.add_argument("--M", type=int, default=None, help="particle count")
    sim.add_argument("--N", "--steps", dest="N", type=int, default=None,
                     help="number of steps")
    sim.add_argument("--h", type=float, default=None, help="step size")
    sim.add_argument("--bins", type=int, default=None, help="histogram bins per axis")
    sim.add_argument("--record-every", dest="record_every", type=int, default=None)
    sim.add_argument("--plot", action="store_true", help="write an SVG figure")
    sim.add_argument("--name", type=str, default=None, help="output basename")

    cert = sub.add_parser("certify", help="certify the matrix decay condition")
    common(cert)
    cert.add_argument("--family", required=True,
                      choices=["overdamped", "nonreversible", "underdamped"])
    cert.add_argument("--preset", type=str, default="fig1a")
    cert.add_argument("--C", type=float, default=4.0)
    cert.add_argument("--t0", type=float, default=schedules.E)
    cert.add_argument("--t-range", dest="t_range", type=str, default="3:100")
    cert.add_argument("--t-points", dest="t_points", type=int, default=50)
    cert.add_argument("--grid-points", dest="grid_points", type=int, default=200)
    cert.add_argument("--lmin", type=float, default=None)
    cert.add_argument("--lmax", type=float, default=None)
    cert.add_argument("--z1", type=float, default=1.0)
    cert.add_argument("--z2", type=float, default=1.0)
    cert.add_argument("--r", type=float, default=None,
                      help="constant friction (default lmax/2 for underdamped)")
    cert.add_argument("--c12", type=float, default=-0.95)
    cert.add_argument("--name", type=str, default=None)

    orc = sub.add_parser("oracle", help="analytic Gaussian law vs simulation")
    common(orc)
    orc.add_argument("--preset", type=str, default="fig1a")
    orc.add_argument("--schedule", type=str, default="inverse_log",
                     choices=["inverse_log", "constant"])
    orc.add_argument("--C", type=float, default=4.0)
    orc.add_argument("--c", type=float, default=0.5)
    orc.add_argument("--t0", type=float, default=schedules.E)
    orc.add_argument("--M", type=int, default=100_000)
    orc.add_argument("--N", type=int, default=2000)
    orc.add_argument("--h", type=float, default=0.002)
    orc.add_argument("--bins", type=int, default=50)
    orc.add_argument("--record-every", dest="record_every", type=int, default=50)
    orc.add_argument("--name", type=str, default=None)

    fit = sub.add_parser("fit", help="fit a log-log decay slope to a series CSV")
    common(fit)
    fit.add_argument("--input", required=True, type=str)
    fit.add_argument("--column", type=str, default="kl")
    fit.add_argument("--window", type=str, default=None, help="t_lo:t_hi")

    cmp_ = sub.add_parser("compare", help="race two scenarios on a shared metric")
    common(cmp_)
    cmp_.add_argument("--preset", type=str, default="ex52-race")
    cmp_.add_argument("--metric", type=str, default="mean_dist")
    cmp_.add_argument("--plot", action="store_true")

    lst = sub.add_parser("list-presets", help="list scenario presets")
    common(lst)
    return parser


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def apply_config(args) -> None:
    """Merge JSON config under explicit flags (flags win)."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise CliError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise CliError("config must be a JSON object")
    for key in doc:
        if key not in CONFIG_KEYS:
            raise CliError(f"unknown config key '{key}'")
    defaults = build_parser().parse_args([args.command] + _required_stub(args))
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) == getattr(defaults, attr, None):
            setattr(args, attr, value)


def _required_stub(args):
    if args.command == "certify":
        return ["--family", args.family]
    if args.command == "fit":
        return ["--input", args.input]
    return []


def _positive(name, value):
    if value is not None and value <= 0:
        raise CliError(f"{name} must be positive, got {value}")
    return value


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _inline_scenario(args) -> experiments.Scenario:
    if not args.potential:
        raise CliError("simulate needs --preset or --potential")
    pot = potentials.get_potential(args.potential)
    t0 = args.t0 if args.t0 is not None else schedules.E
    sched_kw = {"inverse_log": dict(C=args.C, t0=max(t0, 1.0 + 1e-9)),
                "shifted_inverse_log": dict(base=args.base, C=args.C,
                                            t0=max(t0, 1.0 + 1e-9)),
                "hyperbolic": dict(t0=1.0),
                "constant": dict(c=args.c if args.c is not None else 1.0)}
    sched = schedules.from_config(args.schedule, **sched_kw[args.schedule])
    if args.variant == "overdamped":
        dyn = Overdamped(pot, sched)
    elif args.variant == "underdamped":
        dyn = Underdamped(pot, sched)
    else:
        if pot.dim != 2:
            raise CliError("the nonreversible variant needs a 2D potential")
        if pot.minimizer is None:
            raise CliError("the nonreversible variant needs a potential "
                           "with a known minimizer")
        c_hess = np.array([[0.0, args.c12], [args.c12, 0.0]])
        dyn = NonReversible(pot, sched, QuadraticJ(c_hess, pot.minimizer))
    plan = StepPlan(h=args.h or 0.002, n_steps=args.N if args.N is not None else 2000,
                    t0=t0, record_every=args.record_every or 20)
    observers = ("mean_dist",) if args.variant == "nonreversible" else ("kl", "l1")
    return experiments.Scenario(name=args.name or args.potential, dynamics=dyn,
                                plan=plan, M=args.M or 100_000,
                                bins=args.bins or 50, observers=observers)


def _scenario_from_args(args) -> experiments.Scenario:
    if args.preset:
        scenario = experiments.preset_scenario(args.preset)
        overrides = {}
        if args.M is not None:
            overrides["M"] = _positive("--M", args.M)
        if args.bins is not None:
            overrides["bins"] = _positive("--bins", args.bins)
        if args.N is not None:
            if args.N < 0:
                raise CliError(f"--N must be >= 0, got {args.N}")
            overrides["n_steps"] = args.N
        if args.h is not None:
            overrides["h"] = _positive("--h", args.h)
        if args.t0 is not None:
            overrides["t0"] = args.t0
        if args.record_every is not None:
            overrides["record_every"] = _positive("--record-every", args.record_every)
        if args.name:
            overrides["name"] = args.name
        return scenario.with_overrides(**overrides)
    return _inline_scenario(args)


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    seed = args.seed if args.seed is not None else default_seed()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = experiments.run_scenario(scenario, seed=seed, workers=args.threads)
    base = out / scenario.name
    record.write_csv(f"{base}_series.csv")
    record.write_verdict(f"{base}_verdict.json")
    written = [f"{base}_series.csv", f"{base}_verdict.json"]
    if args.plot:
        from .plots import save_divergence_plot
        save_divergence_plot(record.times, record.series("kl"),
                             f"{base}.svg", l1s=record.series("l1"),
                             title=scenario.name)
        written.append(f"{base}.svg")
    for path in written:
        print(f"wrote {path}")
    if record.fit is not None:
        print(f"kl log-log slope {record.fit.slope:.4f} "
              f"over window [{record.fit.window[0]:.3g}, {record.fit.window[1]:.3g}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------

def _parse_range(text, what):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except Exception:
        raise CliError(f"{what} must look like LO:HI, got {text!r}")
    if not lo < hi:
        raise CliError(f"{what} needs LO < HI, got {text!r}")
    return lo, hi


def cmd_certify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name or f"{args.family}"
    path = out / f"{name}_curvature.json"

    if args.family == "underdamped":
        if args.lmin is None or args.lmax is None:
            raise CliError("underdamped certification needs --lmin and --lmax")
        try:
            cor = curvature.corollary63_lambda(args.lmin, args.lmax)
        except curvature.PreconditionError as exc:
            raise CliError(str(exc))
        r_const = args.r if args.r is not None else args.lmax / 2.0
        params = curvature.UnderdampedParams(
            z1=args.z1, z2=args.z2, lmin=args.lmin, lmax=args.lmax,
            r_schedule=schedules.constant(r_const))
        flags = curvature.check_prop62(params, t=args.t0)
        hf = curvature.underdamped_field_in_u(params)
        u_grid = np.linspace(args.lmin, args.lmax, args.grid_points)
        report = curvature.lambda_certificate(
            hf, [np.array([u]) for u in u_grid], [args.t0],
            conditions=flags.as_dict(),
            regime_flags=(["approximation-regime-violated"]
                          if cor.regime_flag else []))
        extra = {"closed_form": cor.exact, "approximation": cor.approx,
                 "curvature_ratio": cor.ratio}
        path.write_text(report.to_json(**extra) + "\n")
        print(f"wrote {path}")
        print(f"closed-form lambda {cor.exact:.9f}, approximation {cor.approx:.6f}"
              + (" (approximation regime violated)" if cor.regime_flag else ""))
        if report.feasible:
            print(f"certified lambda {report.lam:.9f} on the curvature interval")
            return EXIT_OK
        print("certificate infeasible on the curvature interval")
        return EXIT_INFEASIBLE

    pot = potentials.get_potential(args.preset)
    beta = schedules.inverse_log(C=args.C, t0=args.t0)
    t_lo, t_hi = _parse_range(args.t_range, "--t-range")
    t_grid = np.linspace(t_lo, t_hi, args.t_points)
    lo, hi = pot.domain
    if pot.convexity_bounds is not None and pot.minimizer is not None:
        half = 6.0 / np.sqrt(pot.convexity_bounds[0])
        lo = min(lo, float(min(pot.minimizer)) - half)
        hi = max(hi, float(max(pot.minimizer)) + half)
    xs = np.linspace(lo, hi, args.grid_points)
    if pot.dim == 1:
        grid = [np.array([x]) for x in xs]
    else:
        side = max(2, int(np.sqrt(args.grid_points)))
        axis = np.linspace(lo, hi, side)
        grid = [np.array([a, b]) for a in axis for b in axis]

    if args.family == "overdamped":
        hf = curvature.hessian_overdamped(pot, beta)
    else:
        if pot.dim != 2 or pot.minimizer is None:
            raise CliError("nonreversible certification needs a 2D potential "
                           "with a known minimizer")
        c_hess = np.array([[0.0, args.c12], [args.c12, 0.0]])
        spec = NonReversible(pot, beta, QuadraticJ(c_hess, pot.minimizer))
        hf = curvature.hessian_j_drift(spec)

    report = curvature.lambda_certificate(hf, grid, t_grid)
    path.write_text(report.to_json() + "\n")
    print(f"wrote {path}")
    if report.feasible:
        print(f"certified lambda {report.lam:.9f} (grid certificate, "
              f"min gap {report.min_gap:.3e})")
        return EXIT_OK
    print(f"certificate infeasible (min field eigenvalue {report.min_gap:.3e})")
    return EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    pot = potentials.get_potential(args.preset)
    if not pot.is_quadratic():
        raise CliError("oracle requires quadratic potential "
                       f"('{args.preset}' is not)")
    if pot.dim != 1:
        raise CliError("the oracle comparison is one-dimensional")
    if args.schedule == "constant":
        beta = schedules.constant(args.c)
        t0 = args.t0
    else:
        beta = schedules.inverse_log(C=args.C, t0=args.t0)
        t0 = args.t0
    spec = Overdamped(pot, beta)
    plan = StepPlan(h=args.h, n_steps=args.N, t0=t0,
                    record_every=args.record_every)
    seed = args.seed if args.seed is not None else default_seed()

    H, mu = pot.quadratic
    ref = ReferenceMeasure(spec)
    states = solve_gaussian_oracle(spec, plan, GaussianState(np.zeros(1), np.eye(1)))

    lo = float(min(mu[0], 0.0) - 8.0)
    hi = float(max(mu[0], 0.0) + 8.0)
    edges = np.linspace(lo, hi, args.bins + 1)

    from .integrate import Ensemble, run_trajectory

    def observe(e: Ensemble) -> dict:
        from .measure import HistogramGrid, histogram_kl
        grid = HistogramGrid.from_samples(e.positions, bins=args.bins,
                                          ranges=[(lo, hi)])
        return {"kl": histogram_kl(grid, ref, e.time)}

    result = run_trajectory(spec, plan, args.M, observers=(observe,),
                            seed=seed, workers=args.threads)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name or f"{args.preset}-oracle"

    oracle_rows = ["t,kl,kl_binned,mean,var"]
    max_diff = 0.0
    for (t, state), (t_sim, row) in zip(states, zip(result.times, result.records)):
        pi_var = float(beta(t)) / float(H[0, 0])
        kl_exact = gaussian_kl(state.mean, state.cov, mu, [[pi_var]])
        kl_binned = binned_gaussian_kl(edges, state, ref, t)
        oracle_rows.append(",".join(map(repr, map(float, (
            t, kl_exact, kl_binned, state.mean[0], state.cov[0, 0])))))
        max_diff = max(max_diff, abs(row["kl"] - kl_binned))

    sim_rows = ["t,kl"]
    for t, row in zip(result.times, result.records):
        sim_rows.append(f"{t!r},{row['kl']!r}")

    oracle_path = out / f"{name}_oracle.csv"
    sim_path = out / f"{name}_sim.csv"
    oracle_path.write_text("\n".join(oracle_rows) + "\n")
    sim_path.write_text("\n".join(sim_rows) + "\n")
    print(f"wrote {oracle_path}")
    print(f"wrote {sim_path}")
    print(f"max |kl_sim - kl_oracle_binned| = {max_diff:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit / compare / list
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    from .measure import fit_decay_rate

    path = Path(args.input)
    if not path.exists():
        raise CliError(f"input file not found: {path}")
    rows = path.read_text().strip().splitlines()
    header = rows[0].split(",")
    if "t" not in header or args.column not in header:
        raise CliError(f"CSV must contain columns 't' and '{args.column}'")
    ti, ci = header.index("t"), header.index(args.column)
    times, values = [], []
    for row in rows[1:]:
        cells = row.split(",")
        if cells[ci] == "":
            continue
        times.append(float(cells[ti]))
        values.append(float(cells[ci]))
    if not times:
        raise CliError(f"no data rows with column '{args.column}'")
    if args.window:
        window = _parse_range(args.window, "--window")
    else:
        window = experiments.slope_window(np.array(times), min(times))
    try:
        fit = fit_decay_rate(times, values, window)
    except ValueError as exc:
        raise CliError(str(exc))
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept,
                      "r_squared": fit.r_squared, "n_points": fit.n_points,
                      "window": list(fit.window)}, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.preset != "ex52-race":
        raise CliError(f"unknown comparison preset '{args.preset}' "
                       "(available: ex52-race)")
    seed = args.seed if args.seed is not None else default_seed()
    skew = experiments.preset_scenario("ex52")
    plain = experiments.preset_scenario("ex52-overdamped")
    rec_a = experiments.run_scenario(skew, seed=seed, workers=args.threads)
    rec_b = experiments.run_scenario(plain, seed=seed, workers=args.threads)
    verdict = experiments.compare_scenarios(rec_a, rec_b, metric=args.metric)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec_a.write_csv(out / "ex52-race_a_series.csv")
    rec_b.write_csv(out / "ex52-race_b_series.csv")
    doc = verdict.to_doc()
    doc["a"] = skew.name
    doc["b"] = plain.name
    doc["seed"] = seed
    (out / "ex52-race_verdict.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'ex52-race_verdict.json'}")
    if args.plot:
        from .plots import save_comparison_plot
        save_comparison_plot(rec_a.times, rec_a.series(args.metric),
                             rec_b.series(args.metric),
                             (skew.name, plain.name),
                             out / "ex52-race.svg", ylabel=args.metric)
        print(f"wrote {out / 'ex52-race.svg'}")
    print(f"final {args.metric}: {verdict.final_a:.6g} (skew) vs "
          f"{verdict.final_b:.6g} (plain), z = {verdict.z_score:.2f}, "
          f"winner: {verdict.winner}")
    return EXIT_OK


def cmd_list_presets(args) -> int:
    for name in experiments.list_presets():
        print(name)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "oracle": cmd_oracle,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "list-presets": cmd_list_presets,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    if extras:
        parser.error(f"unrecognized arguments: {' '.join(extras)}")
    try:
        apply_config(args)
        if getattr(args, "threads", 1) < 1:
            raise CliError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (IntegrationError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
