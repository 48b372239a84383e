"""Utilization-weight sweeps producing the cost-utilization frontier.

Re-solving the co-optimization while the utilization weight grows traces the
trade-off between the minimum dispatch cost and the guaranteed utilization
level.  The bundled 33-point reference schedule runs the weight from 1 to
38000 with step 100 up to 1000, step 400 up to 5000, step 1000 up to 10000,
and step 4000 beyond.

For presentation, per-period admissible ranges shift the box limits by the
forecast-error means: range_t = [sum_k (mu_kt + eps_lower_kt),
sum_k (mu_kt + eps_upper_kt)].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .builder import SolveConfig, SolveFailure, solve_drco
from .evaluation import PenaltyConfig, evaluate
from .grid import GridCase
from .uncertainty import AmbiguitySet, ScenarioSet


class FrontierError(Exception):
    pass


def reference_schedule() -> list[float]:
    """The built-in 33-point utilization-weight schedule (1 to 38000)."""
    pts = [1.0]
    pts += [float(w) for w in range(100, 1001, 100)]
    pts += [float(w) for w in range(1400, 5001, 400)]
    pts += [float(w) for w in range(6000, 10001, 1000)]
    pts += [float(w) for w in range(14000, 38001, 4000)]
    return pts


@dataclass(frozen=True)
class FrontierRow:
    weight: float
    status: str  # solved | infeasible | numerical-limit
    dispatch_cost: float | None
    utilization: float | None
    objective: float | None
    range_lower: np.ndarray | None  # (T,) MW
    range_upper: np.ndarray | None  # (T,) MW
    oos_utilization: np.ndarray | None  # (T,) empirical, when scenarios given
    wall_time: float
    solution: object | None = None  # solved strategy, kept for auditing


@dataclass(frozen=True)
class FrontierTable:
    rows: tuple[FrontierRow, ...]

    def __post_init__(self):
        weights = [r.weight for r in self.rows]
        if any(b <= a for a, b in zip(weights, weights[1:])):
            raise FrontierError("rows must be sorted by strictly increasing weight")

    @property
    def solved_rows(self) -> list[FrontierRow]:
        return [r for r in self.rows if r.status == "solved"]

    def table_text(self) -> str:
        lines = ["weight,status,dispatch_cost,utilization,objective,oos_min_utilization"]
        for r in self.rows:
            oos = "" if r.oos_utilization is None else repr(float(r.oos_utilization.min()))
            cost = "" if r.dispatch_cost is None else repr(r.dispatch_cost)
            util = "" if r.utilization is None else repr(r.utilization)
            obj = "" if r.objective is None else repr(r.objective)
            lines.append(f"{r.weight!r},{r.status},{cost},{util},{obj},{oos}")
        return "\n".join(lines) + "\n"

    def ranges_text(self) -> str:
        lines = ["weight,period,range_lower,range_upper"]
        for r in self.rows:
            if r.range_lower is None:
                continue
            for t in range(r.range_lower.size):
                lines.append(f"{r.weight!r},{t + 1},{float(r.range_lower[t])!r},"
                             f"{float(r.range_upper[t])!r}")
        return "\n".join(lines) + "\n"


def sweep(case: GridCase, ambiguity: AmbiguitySet, schedule,
          base_config: SolveConfig | None = None,
          scenarios: ScenarioSet | None = None,
          penalties: PenaltyConfig | None = None) -> FrontierTable:
    """One solve (and optional evaluation) per scheduled weight.

    Failures are recorded in their row and do not abort the sweep.  Each
    solve is independent; no state is carried between weights.
    """
    schedule = [float(w) for w in schedule]
    if not schedule:
        raise FrontierError("schedule must be nonempty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise FrontierError("schedule must be strictly increasing")
    base_config = base_config or SolveConfig()

    rows = []
    for weight in schedule:
        config = replace(base_config, utilization_weight=weight)
        start = time.perf_counter()
        try:
            solution = solve_drco(case, ambiguity, config)
        except SolveFailure as failure:
            rows.append(FrontierRow(weight=weight, status=failure.solution.status,
                                    dispatch_cost=None, utilization=None, objective=None,
                                    range_lower=None, range_upper=None,
                                    oos_utilization=None,
                                    wall_time=time.perf_counter() - start))
            continue
        wall = time.perf_counter() - start
        oos = None
        if scenarios is not None:
            oos = evaluate(solution, case, scenarios, penalties).utilization_by_period
        shifted_lo = (ambiguity.means + solution.eps_lower).sum(axis=0)
        shifted_up = (ambiguity.means + solution.eps_upper).sum(axis=0)
        rows.append(FrontierRow(weight=weight, status="solved",
                                dispatch_cost=solution.breakdown.dispatch_cost,
                                utilization=solution.utilization,
                                objective=solution.breakdown.total,
                                range_lower=shifted_lo, range_upper=shifted_up,
                                oos_utilization=oos, wall_time=wall,
                                solution=solution))
    return FrontierTable(rows=tuple(rows))
