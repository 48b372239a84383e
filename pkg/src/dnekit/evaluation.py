"""Out-of-sample Monte Carlo assessment and the fixed-dispatch baseline.

A solved strategy is scored on sampled error scenarios: errors are clipped to
the admissible box, the affine policy re-dispatches against the clipped
value, and the out-of-box remainder is monetized -- a shortfall below the
lower limit triggers load shedding, an excess above the upper limit triggers
curtailment.  Clipping keeps the policy inside its certified domain; the
policy never sees values the robustness argument does not cover.

The baseline strategy fixes the pre-dispatch at the deterministic cost
minimum and shares corrective response uniformly across participating units,
then maximizes the total admissible width subject to the same robust
feasibility rows (no coverage requirement).  It reproduces the "limits under
a given dispatch" approach this model is compared against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .builder import (DneSolution, ModelError, ObjectiveBreakdown, SolveDiagnostics,
                      SolveFailure, robust_rows, solve_nominal_ed)
from .conic import ProgramBuilder, Solution, SolveSettings, solve, verify
from .grid import GridCase
from .uncertainty import AmbiguitySet, ScenarioSet


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class PenaltyConfig:
    """Prices for out-of-box energy, $/MW."""

    shed_price: float = 2000.0
    curtail_price: float = 100.0

    def __post_init__(self):
        if self.shed_price < 0 or self.curtail_price < 0:
            raise EvaluationError("penalty prices must be nonnegative")


@dataclass(frozen=True)
class EvaluationReport:
    actual_cost: np.ndarray  # (n,) $
    shed: np.ndarray  # (n,) MW summed over (k, t)
    curtailed: np.ndarray  # (n,) MW
    utilization_by_period: np.ndarray  # (T,) empirical joint in-box frequency
    scenario_count: int
    seed: int
    robust_residual: float

    def __post_init__(self):
        n = self.scenario_count
        if not (self.actual_cost.shape == self.shed.shape == self.curtailed.shape == (n,)):
            raise EvaluationError("per-scenario arrays must all have length scenario_count")
        if np.any(self.shed < 0) or np.any(self.curtailed < 0):
            raise EvaluationError("shed and curtailed volumes cannot be negative")
        if np.any(self.utilization_by_period < 0) or np.any(self.utilization_by_period > 1):
            raise EvaluationError("utilization must lie in [0, 1]")

    @property
    def avg_cost(self) -> float:
        return float(self.actual_cost.mean())

    @property
    def max_cost(self) -> float:
        return float(self.actual_cost.max())

    @property
    def avg_shed(self) -> float:
        return float(self.shed.mean())

    @property
    def avg_curtailed(self) -> float:
        return float(self.curtailed.mean())

    def summary_text(self) -> str:
        lines = ["metric,value"]
        lines.append(f"avg_cost,{self.avg_cost!r}")
        lines.append(f"max_cost,{self.max_cost!r}")
        lines.append(f"avg_shed,{self.avg_shed!r}")
        lines.append(f"avg_curtailed,{self.avg_curtailed!r}")
        lines.append(f"min_utilization,{float(self.utilization_by_period.min())!r}")
        lines.append(f"scenarios,{self.scenario_count}")
        lines.append(f"seed,{self.seed}")
        for t, v in enumerate(self.utilization_by_period):
            lines.append(f"utilization_t{t + 1},{float(v)!r}")
        return "\n".join(lines) + "\n"

    def scenario_text(self) -> str:
        lines = ["scenario,actual_cost,shed,curtailed"]
        for j in range(self.scenario_count):
            lines.append(f"{j},{float(self.actual_cost[j])!r},"
                         f"{float(self.shed[j])!r},{float(self.curtailed[j])!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RobustCheck:
    """Analytic worst-case residuals of every robust row over the box."""

    max_residual: float
    worst_rows: tuple[tuple[str, float], ...]  # top offenders, residual-sorted

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_residual <= tol


def verify_robust(solution: DneSolution, case: GridCase, top: int = 5) -> RobustCheck:
    """Extremize each robust row over [eps_lower, eps_upper] by sign splitting."""
    base_out = solution.predispatch + solution.offset_by_period
    lo, up = solution.eps_lower, solution.eps_upper
    gains = solution.response_gain
    results = []
    for row in robust_rows(case):
        value = row.constant
        coef = {}
        for i, t, w in row.policy:
            value += w * base_out[i, t]
            col = gains[i, :, t]
            for k in range(case.num_renewables):
                if col[k] != 0.0:
                    coef[(k, t)] = coef.get((k, t), 0.0) + w * col[k]
        for i, t, c in row.predispatch:
            value += c * solution.predispatch[i, t]
        for k, t, h in row.error:
            coef[(k, t)] = coef.get((k, t), 0.0) + h
        for (k, t), c in coef.items():
            value += c * (up[k, t] if c > 0 else lo[k, t])
        results.append((row.label, value - row.rhs))
    results.sort(key=lambda pair: -pair[1])
    worst = max((r for _, r in results), default=0.0)
    return RobustCheck(max_residual=float(max(worst, 0.0)),
                       worst_rows=tuple(results[:top]))


def evaluate(solution: DneSolution, case: GridCase, scenarios: ScenarioSet,
             penalties: PenaltyConfig | None = None,
             robust_tol: float = 1e-6) -> EvaluationReport:
    """Score a strategy over sampled errors.

    Per scenario: clip the error to the box, re-dispatch through the affine
    policy, price sub-box shortfall at the shedding rate and super-box excess
    at the curtailment rate, and add the fuel cost of the corrective outputs.
    A period counts as utilized only when every renewable's error is in-box.
    """
    penalties = penalties or PenaltyConfig()
    eps = scenarios.values
    k_n, t_n = case.num_renewables, case.periods
    if eps.shape[1:] != (k_n, t_n):
        raise EvaluationError(f"scenario shape {eps.shape[1:]} does not match "
                              f"(K, T) = ({k_n}, {t_n})")
    check = verify_robust(solution, case)
    if not check.passed(robust_tol):
        warnings.warn(f"strategy violates robust feasibility by {check.max_residual:.3e} "
                      f"(worst row: {check.worst_rows[0][0]}); evaluation continues",
                      stacklevel=2)

    lo, up = solution.eps_lower, solution.eps_upper
    clipped = np.clip(eps, lo[None, :, :], up[None, :, :])
    shed_mw = np.maximum(lo[None, :, :] - eps, 0.0).sum(axis=(1, 2))
    curtail_mw = np.maximum(eps - up[None, :, :], 0.0).sum(axis=(1, 2))

    outputs = solution.redispatch(clipped)  # (n, I, T)
    fuel = np.zeros(eps.shape[0])
    for i, g in enumerate(case.generators):
        fuel += g.cost.value(outputs[:, i, :]).sum(axis=1)
    cost = fuel + penalties.shed_price * shed_mw + penalties.curtail_price * curtail_mw

    inside = (eps >= lo[None, :, :]) & (eps <= up[None, :, :])
    utilization = inside.all(axis=1).mean(axis=0)

    return EvaluationReport(actual_cost=cost, shed=shed_mw, curtailed=curtail_mw,
                            utilization_by_period=utilization,
                            scenario_count=eps.shape[0], seed=scenarios.seed,
                            robust_residual=check.max_residual)


def solve_odne_baseline(case: GridCase, ambiguity: AmbiguitySet,
                        settings: SolveSettings | None = None,
                        agc_mask: tuple[bool, ...] | None = None) -> DneSolution:
    """Widest admissible boxes under the fixed deterministic dispatch.

    Pre-dispatch comes from the cost-only solve; corrective response is
    shared uniformly across participating units (each takes 1/|AGC| of the
    total deviation); the boxes maximize total width subject to the robust
    rows and the capacity brackets.  No coverage level is enforced; the
    reported utilization is the guaranteed worst-case coverage implied by
    the solved boxes (floored at zero where the bound is vacuous).
    """
    settings = settings or SolveSettings()
    if case.num_renewables == 0:
        raise ModelError("the case has no renewables, so there are no limits to optimize")
    if (ambiguity.num_renewables, ambiguity.periods) != (case.num_renewables, case.periods):
        raise ModelError("ambiguity set shape does not match the case")
    mask = tuple(True for _ in case.generators) if agc_mask is None else tuple(agc_mask)
    n_agc = sum(mask)
    if n_agc == 0:
        raise ModelError("the baseline needs at least one participating unit")
    pre, dispatch_cost = solve_nominal_ed(case, settings)

    i_n, k_n, t_n = case.num_generators, case.num_renewables, case.periods
    share = np.array([-1.0 / n_agc if m else 0.0 for m in mask])
    fc = case.forecast_matrix

    pb = ProgramBuilder()
    eps_lo = np.zeros((k_n, t_n), dtype=int)
    eps_up = np.zeros((k_n, t_n), dtype=int)
    for k, r in enumerate(case.renewables):
        for t in range(t_n):
            eps_lo[k, t] = pb.add_var(lb=r.w_min - fc[k, t], ub=0.0)
            eps_up[k, t] = pb.add_var(lb=0.0, ub=r.w_max - fc[k, t])
            pb.add_objective({int(eps_lo[k, t]): 1.0, int(eps_up[k, t]): -1.0})

    for row in robust_rows(case):
        base = row.constant
        coef: dict[tuple[int, int], float] = {}
        for i, t, w in row.policy:
            base += w * pre[i, t]
            if share[i] != 0.0:
                for k in range(k_n):
                    coef[(k, t)] = coef.get((k, t), 0.0) + w * share[i]
        for i, t, c in row.predispatch:
            base += c * pre[i, t]
        for k, t, h in row.error:
            coef[(k, t)] = coef.get((k, t), 0.0) + h
        terms: dict[int, float] = {}
        for (k, t), c in coef.items():
            idx = int(eps_up[k, t]) if c > 0 else int(eps_lo[k, t])
            terms[idx] = terms.get(idx, 0.0) + c
        if terms:
            pb.add_ineq(terms, row.rhs - base)
        elif base > row.rhs + 1e-9:
            msg = (f"fixed dispatch violates '{row.label}' by {base - row.rhs:.3e} "
                   "with no admissible-range freedom to absorb it")
            raise SolveFailure(msg, Solution(status="infeasible", primal=None,
                                             objective=None, wall_time=0.0,
                                             iterations=0, message=msg))

    program = pb.build()
    solution = solve(program, settings)
    if solution.status != "optimal":
        raise SolveFailure(f"baseline box solve ended with status "
                           f"'{solution.status}': {solution.message}", solution)
    x = solution.primal
    lo = x[eps_lo]
    up = x[eps_up]
    width = up - lo

    gain = np.zeros((i_n, k_n, t_n))
    for i in range(i_n):
        gain[i, :, :] = share[i]
    s_val = gain * width[None, :, :]
    off_val = np.einsum("ikt,kt->it", gain, lo)
    b_off = np.zeros_like(gain)

    mu, sig = ambiguity.means, ambiguity.sigmas
    halfwidth = np.minimum(mu - lo, up - mu) / sig
    with np.errstate(divide="ignore"):
        budget = np.minimum(1.0, np.where(halfwidth > 0, 4.0 / (9.0 * halfwidth ** 2), 1.0))
    u_implied = float(np.clip(1.0 - budget.sum(axis=0), 0.0, 1.0).min())

    report = verify(program, x, settings.verify_tol)
    return DneSolution(predispatch=pre, box_gain=s_val, box_offset=off_val,
                       response_gain=gain, response_offset=b_off,
                       eps_lower=lo, eps_upper=up, utilization=u_implied,
                       halfwidth_scale=np.maximum(halfwidth, 0.0),
                       coverage_budget=budget,
                       budget_coupling=np.sqrt(budget),
                       breakdown=ObjectiveBreakdown(dispatch_cost=dispatch_cost,
                                                    utilization_reward=0.0,
                                                    over_risk_cost=0.0,
                                                    under_risk_cost=0.0),
                       agc_mask=mask, label="odne",
                       diagnostics=SolveDiagnostics(program=program, solution=solution,
                                                    residuals=report))
