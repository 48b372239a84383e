"""Command-line entry point.

Subcommands: solve | sweep | evaluate | baseline | jtau | calibrate.

Every output file starts with a header block recording the tool version,
command, seed, backend, and a hash of the resolved configuration, so runs
are reproducible bit-for-bit from identical inputs (timings are reported on
stderr only and never written into output files).

Configuration precedence: command-line flags override the optional
``--config`` key-value file, which overrides built-in defaults.  Config
files hold one ``key = value`` pair per line; keys are the long option
names with dashes or underscores.

Exit codes: 0 success, 2 usage, 3 data, 4 infeasible, 5 numerical.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .builder import DneSolution, ModelError, SolveConfig, SolveFailure, solve_drco
from .conic import BackendCapabilityError, ConicError, SolveSettings, available_backends
from .evaluation import EvaluationError, PenaltyConfig, evaluate, solve_odne_baseline
from .expected import (Cpla, ExpectedCostError, build_cpla, worst_shortfall,
                       worst_shortfall_lp)
from .frontier import reference_schedule, sweep
from .grid import (CaseError, load_series, parse_case, scale_loads, scale_ramps,
                   with_forecast, with_load_profile)
from .uncertainty import (AmbiguitySet, ScenarioSet, UncertaintyError, calibrate,
                          preset_ambiguity, sample_gaussian)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4
EXIT_NUMERICAL = 5


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _header(args, seed) -> str:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    digest = hashlib.sha256(repr(resolved).encode()).hexdigest()[:16]
    lines = [f"# dnekit {__version__}",
             f"# command: {args.command}",
             f"# seed: {seed if seed is not None else 'none'}",
             f"# backend: {args.backend}",
             f"# config-hash: {digest}"]
    return "\n".join(lines) + "\n"


def _write(args, directory: str, filename: str, body: str, seed=None) -> Path:
    outdir = Path(directory)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / filename
        path.write_text(_header(args, seed) + body)
    except OSError as exc:
        raise DataError(f"cannot write {filename} into {directory}: {exc}") from None
    return path


def _load_case(args):
    case = parse_case(_read(args.case))
    if getattr(args, "forecast", None):
        case = with_forecast(case, load_series(_read(args.forecast), case.periods))
    if getattr(args, "load_profile", None):
        case = with_load_profile(case, load_series(_read(args.load_profile), case.periods))
    if getattr(args, "load_scale", None) is not None:
        case = scale_loads(case, args.load_scale)
    if getattr(args, "ramp_scale", None) is not None:
        case = scale_ramps(case, args.ramp_scale)
    return case


def _history_blocks(text: str, case) -> np.ndarray:
    """Error history: renewable-named columns, day blocks of T rows each."""
    table = load_series(text)
    rows = table.values.shape[0]
    if rows % case.periods != 0:
        raise DataError(f"error history has {rows} rows, not a multiple of "
                        f"T={case.periods}")
    days = rows // case.periods
    names = [r.name for r in case.renewables]
    cols = np.column_stack([table.column(n) for n in names])
    return cols.reshape(days, case.periods, len(names)).transpose(0, 2, 1)


def _ambiguity_from_args(args, case) -> tuple[AmbiguitySet, np.ndarray | None]:
    """Returns (ambiguity, held-out error scenarios or None)."""
    if getattr(args, "ambiguity", None):
        return _read_ambiguity(_read(args.ambiguity), case), None
    if getattr(args, "errors", None):
        history = _history_blocks(_read(args.errors), case)
        days = history.shape[0]
        cal = max(2, int(round(args.split * days)))
        if cal >= days:
            cal = days
            held = None
        else:
            held = history[cal:]
        return calibrate(history[:cal]), held
    caps = [r.w_max for r in case.renewables]
    return preset_ambiguity(caps, case.periods), None


def _read_ambiguity(text: str, case) -> AmbiguitySet:
    table = load_series(text, case.periods)
    means = np.column_stack([table.column(f"mu:{r.name}") for r in case.renewables]).T
    sigmas = np.column_stack([table.column(f"sigma:{r.name}") for r in case.renewables]).T
    return AmbiguitySet(means=means, sigmas=sigmas)


def _ambiguity_text(amb: AmbiguitySet, case) -> str:
    names = ["t"]
    for r in case.renewables:
        names += [f"mu:{r.name}", f"sigma:{r.name}"]
    lines = [",".join(names)]
    for t in range(amb.periods):
        cells = [str(t + 1)]
        for k in range(amb.num_renewables):
            cells += [repr(float(amb.means[k, t])), repr(float(amb.sigmas[k, t]))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _solve_config(args, case) -> SolveConfig:
    settings = SolveSettings(backend=args.backend, feas_tol=args.feas_tol,
                             gap_tol=args.gap_tol)
    return SolveConfig(utilization_weight=args.delta,
                       min_utilization=args.u_floor,
                       over_risk_weight=args.delta_plus,
                       under_risk_weight=args.delta_minus,
                       over_risk_cost=args.shed_price,
                       under_risk_cost=args.curtail_price,
                       risk_segments=args.segments,
                       settings=settings)


def _summary_text(solution: DneSolution, ambiguity: AmbiguitySet) -> str:
    b = solution.breakdown
    lines = [f"strategy: {solution.label}"]
    lines.append(f"utilization guarantee: {solution.utilization:.6f}")
    lines.append(f"dispatch cost:        {b.dispatch_cost:.4f}")
    lines.append(f"utilization reward:   {b.utilization_reward:.4f}")
    if b.over_risk_cost or b.under_risk_cost:
        lines.append(f"overestimation risk:  {b.over_risk_cost:.4f}")
        lines.append(f"underestimation risk: {b.under_risk_cost:.4f}")
    lines.append(f"objective total:      {b.total:.4f}")
    lines.append("")
    lines.append("period | admissible total range [MW]    | width")
    lo = (ambiguity.means + solution.eps_lower).sum(axis=0)
    up = (ambiguity.means + solution.eps_upper).sum(axis=0)
    for t in range(lo.size):
        lines.append(f"{t + 1:6d} | [{lo[t]:12.4f}, {up[t]:12.4f}] | {up[t] - lo[t]:10.4f}")
    return "\n".join(lines) + "\n"


def _scenarios_from_args(args, case, ambiguity, held) -> ScenarioSet:
    if getattr(args, "scenario_file", None):
        values = _history_blocks(_read(args.scenario_file), case)
        return ScenarioSet(values=values, seed=-1, distribution="file")
    if held is not None:
        return ScenarioSet(values=held, seed=-1, distribution="held-out")
    return sample_gaussian(ambiguity.means, ambiguity.sigmas, args.scenarios, args.seed)


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    case = _load_case(args)
    ambiguity, _ = _ambiguity_from_args(args, case)
    t0 = time.perf_counter()
    solution = solve_drco(case, ambiguity, _solve_config(args, case))
    print(f"solved in {time.perf_counter() - t0:.2f}s: utilization "
          f"{solution.utilization:.4f}, dispatch cost "
          f"{solution.breakdown.dispatch_cost:.2f}", file=sys.stderr)
    _write(args, args.out, "solution.txt", solution.to_text(), args.seed)
    _write(args, args.out, "summary.txt", _summary_text(solution, ambiguity), args.seed)
    return EXIT_OK


def cmd_baseline(args) -> int:
    case = _load_case(args)
    ambiguity, _ = _ambiguity_from_args(args, case)
    settings = SolveSettings(backend=args.backend, feas_tol=args.feas_tol,
                             gap_tol=args.gap_tol)
    solution = solve_odne_baseline(case, ambiguity, settings)
    _write(args, args.out, "solution.txt", solution.to_text(), args.seed)
    _write(args, args.out, "summary.txt", _summary_text(solution, ambiguity), args.seed)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    case = _load_case(args)
    ambiguity, held = _ambiguity_from_args(args, case)
    solution = DneSolution.from_text(_read(args.solution))
    scenarios = _scenarios_from_args(args, case, ambiguity, held)
    penalties = PenaltyConfig(shed_price=args.shed_price, curtail_price=args.curtail_price)
    report = evaluate(solution, case, scenarios, penalties)
    _write(args, args.out, "evaluation.csv", report.summary_text(), scenarios.seed)
    _write(args, args.out, "scenario_costs.csv", report.scenario_text(), scenarios.seed)
    print(f"AvgC={report.avg_cost:.2f} MaxC={report.max_cost:.2f} "
          f"AvgLS={report.avg_shed:.4f} AvgWC={report.avg_curtailed:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    case = _load_case(args)
    ambiguity, held = _ambiguity_from_args(args, case)
    if args.deltas:
        schedule = args.deltas
    elif args.preset == "paper":
        schedule = reference_schedule()
    else:
        raise UsageError("give either --preset paper or an explicit --deltas list")
    scenarios = None
    if args.scenarios > 0:
        scenarios = _scenarios_from_args(args, case, ambiguity, held)
    base = _solve_config(args, case)
    table = sweep(case, ambiguity, schedule, base, scenarios,
                  PenaltyConfig(shed_price=args.shed_price, curtail_price=args.curtail_price))
    _write(args, args.out, "frontier.csv", table.table_text(), args.seed)
    _write(args, args.out, "ranges.csv", table.ranges_text(), args.seed)
    solved = table.solved_rows
    print(f"swept {len(table.rows)} weights ({len(solved)} solved) in "
          f"{sum(r.wall_time for r in table.rows):.1f}s", file=sys.stderr)
    return EXIT_OK


def cmd_jtau(args) -> int:
    table = None
    if args.segments > 0 and len(args.tau) >= 1:
        lo, hi = min(args.tau), max(args.tau)
        if hi > lo:
            table = build_cpla(lo, hi, args.segments)
    lines = ["tau,conic,oracle,cpla"]
    for tau in args.tau:
        conic_val = worst_shortfall(tau)
        oracle_val = worst_shortfall_lp(tau, args.h_variant, args.halfwidth, args.grid)
        cpla_val = table.value(tau) if table is not None else float("nan")
        lines.append(f"{tau!r},{conic_val!r},{oracle_val!r},{cpla_val!r}")
        print(f"tau={tau:g}: conic={conic_val:.6f} oracle={oracle_val:.6f} "
              f"cpla={cpla_val:.6f}")
    if args.out:
        _write(args, args.out, "shortfall_audit.csv", "\n".join(lines) + "\n", None)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    case = _load_case(args)
    history = _history_blocks(_read(args.errors), case)
    days = history.shape[0]
    cal = max(2, int(round(args.split * days)))
    ambiguity = calibrate(history[:min(cal, days)])
    _write(args, args.out, "ambiguity.csv", _ambiguity_text(ambiguity, case), None)
    print(f"calibrated from {min(cal, days)} of {days} blocks", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p, with_case=True):
    if with_case:
        p.add_argument("--case", required=True, help="case file path")
        p.add_argument("--forecast", help="forecast series (CSV, renewable columns)")
        p.add_argument("--load-profile", dest="load_profile",
                       help="load series (CSV, bus-id columns or a single 'scale' column)")
        p.add_argument("--load-scale", dest="load_scale", type=float,
                       help="multiply every bus load by this factor")
        p.add_argument("--ramp-scale", dest="ramp_scale", type=float,
                       help="set all ramp rates to this fraction of p_max per minute")
        p.add_argument("--ambiguity", help="ambiguity CSV (mu:NAME/sigma:NAME columns)")
        p.add_argument("--errors", help="error-history CSV (day blocks of T rows)")
        p.add_argument("--split", type=float, default=0.5,
                       help="calibration fraction of the error history (default 0.5)")
    p.add_argument("--backend", default="clarabel", choices=available_backends())
    p.add_argument("--feas-tol", dest="feas_tol", type=float, default=1e-8)
    p.add_argument("--gap-tol", dest="gap_tol", type=float, default=1e-8)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", help="key=value config file (flags take precedence)")


def _add_model_flags(p):
    p.add_argument("--delta", type=float, default=0.0,
                   help="utilization weight in the objective ($)")
    p.add_argument("--u-floor", dest="u_floor", type=float, default=0.75,
                   help="utilization floor (must exceed 2/3)")
    p.add_argument("--delta-plus", dest="delta_plus", type=float, default=0.0,
                   help="weight on the worst-case overestimation cost")
    p.add_argument("--delta-minus", dest="delta_minus", type=float, default=0.0,
                   help="weight on the worst-case underestimation cost")
    p.add_argument("--segments", type=int, default=8,
                   help="piecewise segments for the risk overestimator")
    p.add_argument("--shed-price", dest="shed_price", type=float, default=2000.0)
    p.add_argument("--curtail-price", dest="curtail_price", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnekit",
                                     description="dispatch and do-not-exceed limit co-optimization")
    parser.add_argument("--version", action="version", version=f"dnekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="co-optimize dispatch and limits")
    _add_common(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", help="widest limits under the fixed cost-optimal dispatch")
    _add_common(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="Monte Carlo out-of-sample assessment")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--solution", required=True, help="solution file to assess")
    p.add_argument("--scenarios", type=int, default=5000)
    p.add_argument("--scenario-file", dest="scenario_file",
                   help="error scenarios (day blocks of T rows) instead of sampling")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="trace the cost-utilization frontier")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--preset", choices=["paper"],
                   help="built-in 33-point reference weight schedule")
    p.add_argument("--deltas", type=float, nargs="+", help="explicit weight schedule")
    p.add_argument("--scenarios", type=int, default=0,
                   help="out-of-sample scenarios per weight (0 disables)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("jtau", help="audit the worst-case shortfall machinery")
    _add_common(p, with_case=False)
    p.add_argument("--tau", type=float, nargs="+", required=True)
    p.add_argument("--grid", type=int, default=2001)
    p.add_argument("--halfwidth", type=float, default=10.0)
    p.add_argument("--segments", type=int, default=8)
    p.add_argument("--h-variant", dest="h_variant", default="ratio",
                   choices=["ratio", "integral"])
    p.set_defaults(func=cmd_jtau)

    p = sub.add_parser("calibrate", help="fit an ambiguity set from error history")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    overrides = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key = value")
        key, value = [s.strip() for s in line.split("=", 1)]
        overrides[key.replace("-", "_")] = value
    for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        known = {a.dest: a.type for a in action._actions}  # noqa: SLF001
        usable = {}
        for key, value in overrides.items():
            if key in known:
                usable[key] = known[key](value) if known[key] else value
        action.set_defaults(**usable)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ModelError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CaseError, UncertaintyError, EvaluationError, ExpectedCostError,
            DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolveFailure as exc:
        status = exc.solution.status
        code = EXIT_INFEASIBLE if status == "infeasible" else EXIT_NUMERICAL
        kind = "infeasible" if code == EXIT_INFEASIBLE else "numerical"
        print(f"{kind} error: {exc}", file=sys.stderr)
        return code
    except (BackendCapabilityError, ConicError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
