"""Dispatch / do-not-exceed co-optimization model assembly and solve.

The decision problem: choose a pre-dispatch schedule, an affine corrective
policy, per-(k, t) admissible error boxes [eps_lower, eps_upper], and a
guaranteed utilization level u, minimizing

    sum_t sum_i C_i(predispatch_it) - weight * u  (+ optional risk terms)

subject to nominal dispatch feasibility, robust feasibility of the corrective
policy for every error inside the box, and a distributionally robust coverage
requirement: under every unimodal error law matching the calibrated means and
variances, each period's error vector lands in its box with probability at
least u.

Robust constraints are affine in the error, so each row is enforced at its
box-wise worst case through the standard nonnegative-multiplier rows: with
the policy re-parametrized on normalized box coordinates v in [0, 1]
(slope S = B * diag(width), anchor s0 = policy value at the lower corner),
each inequality row gains one multiplier per error coordinate, bounded below
by the row's v-slope and by zero, and the multipliers' sum enters the row.
The power-balance equality holds identically via coefficient matching:
sum_i S_ikt = -(width_kt) and sum_i s0_it = -sum_k eps_lower_kt.

Coverage is enforced per (k, t) with a per-period budget: worst-case coverage
of a band of half-width lam*sigma is 1 - 4/(9 lam^2) (Gauss bound, valid
above coverage 2/3), encoded by the rotated-cone rows r*z >= 2/3, z^2 <= s,
sigma*r <= mu - eps_lower, sigma*r <= eps_upper - mu, and sum_k s_kt <= 1 - u.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .conic import ProgramBuilder, ResidualReport, Solution, SolveSettings, solve, verify
from .expected import SQRT3, risk_pwl_tables
from .grid import GridCase
from .uncertainty import AmbiguitySet

WIDTH_FLOOR = 1e-9  # below this box width, the policy column folds into the offset


class ModelError(Exception):
    """Configuration or assembly failure."""


class SolveFailure(Exception):
    """Solver did not return an optimal solution."""

    def __init__(self, message: str, solution: Solution):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SolveConfig:
    """Weights and switches for one co-optimization solve.

    utilization_weight is the $ reward per unit of guaranteed utilization;
    min_utilization is its floor (must exceed 2/3 for the coverage
    reformulation to be valid).  The optional risk weights price the
    worst-case expected box-violation volumes on each side, embedded through
    piecewise-linear risk tables with ``risk_segments`` segments.
    """

    utilization_weight: float = 0.0
    min_utilization: float = 0.75
    max_utilization: float = 1.0
    agc_mask: tuple[bool, ...] | None = None
    over_risk_weight: float = 0.0
    under_risk_weight: float = 0.0
    over_risk_cost: float = 2000.0
    under_risk_cost: float = 100.0
    risk_segments: int = 8
    settings: SolveSettings = field(default_factory=SolveSettings)

    def __post_init__(self):
        if self.min_utilization <= 2.0 / 3.0:
            raise ModelError(
                f"min_utilization {self.min_utilization} must exceed 2/3: the worst-case "
                "coverage reformulation for unimodal errors is only valid above that level")
        if self.min_utilization > 1.0:
            raise ModelError("min_utilization cannot exceed 1")
        if not self.min_utilization <= self.max_utilization <= 1.0:
            raise ModelError("need min_utilization <= max_utilization <= 1")
        if self.utilization_weight < 0 or self.over_risk_weight < 0 or self.under_risk_weight < 0:
            raise ModelError("objective weights must be nonnegative")
        if self.risk_segments < 1:
            raise ModelError("risk_segments must be >= 1")

    def mask_for(self, case: GridCase) -> tuple[bool, ...]:
        if self.agc_mask is None:
            return tuple(True for _ in case.generators)
        if len(self.agc_mask) != case.num_generators:
            raise ModelError(f"agc_mask has {len(self.agc_mask)} entries for "
                             f"{case.num_generators} generators")
        return tuple(bool(v) for v in self.agc_mask)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    dispatch_cost: float
    utilization_reward: float  # signed contribution, -weight * u
    over_risk_cost: float
    under_risk_cost: float

    @property
    def total(self) -> float:
        return (self.dispatch_cost + self.utilization_reward
                + self.over_risk_cost + self.under_risk_cost)


@dataclass(frozen=True)
class SolveDiagnostics:
    program: object
    solution: Solution
    residuals: ResidualReport


@dataclass(frozen=True)
class DneSolution:
    """Solved dispatch strategy, corrective policy, and admissible boxes.

    The corrective output of unit i in period t under error eps is

        predispatch[i, t] + sum_k (response_gain[i, k, t] * eps[k, t]
                                   + response_offset[i, k, t])

    box_gain/box_offset hold the same policy on normalized box coordinates
    (slope per unit of v, value at the lower box corner).
    """

    predispatch: np.ndarray  # (I, T)
    box_gain: np.ndarray  # (I, K, T)
    box_offset: np.ndarray  # (I, T)
    response_gain: np.ndarray  # (I, K, T)
    response_offset: np.ndarray  # (I, K, T)
    eps_lower: np.ndarray  # (K, T), <= 0
    eps_upper: np.ndarray  # (K, T), >= 0
    utilization: float
    halfwidth_scale: np.ndarray  # (K, T) band half-width in sigma units
    coverage_budget: np.ndarray  # (K, T) per-coordinate miss budget
    budget_coupling: np.ndarray  # (K, T) auxiliary linking the two
    breakdown: ObjectiveBreakdown
    agc_mask: tuple[bool, ...]
    label: str = "drco"
    diagnostics: SolveDiagnostics | None = field(default=None, compare=False, repr=False)

    @property
    def offset_by_period(self) -> np.ndarray:
        """(I, T) total constant corrective term per unit and period."""
        return self.response_offset.sum(axis=1)

    def redispatch(self, eps: np.ndarray) -> np.ndarray:
        """Corrective outputs for errors shaped (K, T) or (n, K, T)."""
        eps = np.asarray(eps)
        base = self.predispatch + self.offset_by_period
        if eps.ndim == 2:
            return base + np.einsum("ikt,kt->it", self.response_gain, eps)
        return base[None, :, :] + np.einsum("ikt,nkt->nit", self.response_gain, eps)

    def to_text(self) -> str:
        def r(v):
            return repr(float(v))

        i_n, k_n, t_n = self.response_gain.shape
        lines = ["# dnekit solution v1"]
        lines.append(f"meta,label,{self.label}")
        lines.append(f"meta,generators,{i_n}")
        lines.append(f"meta,renewables,{k_n}")
        lines.append(f"meta,periods,{t_n}")
        lines.append(f"meta,utilization,{r(self.utilization)}")
        lines.append(f"meta,dispatch_cost,{r(self.breakdown.dispatch_cost)}")
        lines.append(f"meta,utilization_reward,{r(self.breakdown.utilization_reward)}")
        lines.append(f"meta,over_risk_cost,{r(self.breakdown.over_risk_cost)}")
        lines.append(f"meta,under_risk_cost,{r(self.breakdown.under_risk_cost)}")
        lines.append("meta,agc_mask," + ";".join("1" if m else "0" for m in self.agc_mask))
        for i in range(i_n):
            for t in range(t_n):
                lines.append(f"predispatch,{i},{t},{r(self.predispatch[i, t])}")
        for k in range(k_n):
            for t in range(t_n):
                lines.append(f"dne,{k},{t},{r(self.eps_lower[k, t])},{r(self.eps_upper[k, t])}")
        for i in range(i_n):
            for t in range(t_n):
                lines.append(f"box_offset,{i},{t},{r(self.box_offset[i, t])}")
        for name, arr in (("box_gain", self.box_gain),
                          ("response_gain", self.response_gain),
                          ("response_offset", self.response_offset)):
            for i in range(i_n):
                for k in range(k_n):
                    for t in range(t_n):
                        lines.append(f"{name},{i},{k},{t},{r(arr[i, k, t])}")
        for k in range(k_n):
            for t in range(t_n):
                lines.append(f"coverage,{k},{t},{r(self.halfwidth_scale[k, t])},"
                             f"{r(self.coverage_budget[k, t])},{r(self.budget_coupling[k, t])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DneSolution":
        meta = {}
        rows = []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            cells = ln.split(",")
            if cells[0] == "meta":
                meta[cells[1]] = cells[2]
            else:
                rows.append(cells)
        i_n, k_n, t_n = int(meta["generators"]), int(meta["renewables"]), int(meta["periods"])
        pre = np.zeros((i_n, t_n))
        box_off = np.zeros((i_n, t_n))
        lo = np.zeros((k_n, t_n))
        up = np.zeros((k_n, t_n))
        gain3 = {"box_gain": np.zeros((i_n, k_n, t_n)),
                 "response_gain": np.zeros((i_n, k_n, t_n)),
                 "response_offset": np.zeros((i_n, k_n, t_n))}
        hw = np.zeros((k_n, t_n))
        budget = np.zeros((k_n, t_n))
        coupling = np.zeros((k_n, t_n))
        for cells in rows:
            tag = cells[0]
            if tag == "predispatch":
                pre[int(cells[1]), int(cells[2])] = float(cells[3])
            elif tag == "box_offset":
                box_off[int(cells[1]), int(cells[2])] = float(cells[3])
            elif tag == "dne":
                lo[int(cells[1]), int(cells[2])] = float(cells[3])
                up[int(cells[1]), int(cells[2])] = float(cells[4])
            elif tag in gain3:
                gain3[tag][int(cells[1]), int(cells[2]), int(cells[3])] = float(cells[4])
            elif tag == "coverage":
                k, t = int(cells[1]), int(cells[2])
                hw[k, t] = float(cells[3])
                budget[k, t] = float(cells[4])
                coupling[k, t] = float(cells[5])
            else:
                raise ModelError(f"unknown solution block '{tag}'")
        breakdown = ObjectiveBreakdown(
            dispatch_cost=float(meta["dispatch_cost"]),
            utilization_reward=float(meta["utilization_reward"]),
            over_risk_cost=float(meta["over_risk_cost"]),
            under_risk_cost=float(meta["under_risk_cost"]))
        mask = tuple(c == "1" for c in meta["agc_mask"].split(";"))
        return cls(predispatch=pre, box_gain=gain3["box_gain"], box_offset=box_off,
                   response_gain=gain3["response_gain"],
                   response_offset=gain3["response_offset"],
                   eps_lower=lo, eps_upper=up, utilization=float(meta["utilization"]),
                   halfwidth_scale=hw, coverage_budget=budget, budget_coupling=coupling,
                   breakdown=breakdown, agc_mask=mask, label=meta.get("label", "drco"))


# ---------------------------------------------------------------------------
# Robust row enumeration, shared with the out-of-sample checker
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustRow:
    """One inequality enforced for every error in the admissible box.

    LHS(eps) = sum policy coefs * corrective_output(i, t)
             + sum predispatch coefs * predispatch(i, t)
             + sum error coefs * eps(k, t) + constant  <=  rhs
    """

    label: str
    policy: tuple[tuple[int, int, float], ...]
    predispatch: tuple[tuple[int, int, float], ...]
    error: tuple[tuple[int, int, float], ...]
    constant: float
    rhs: float


def robust_rows(case: GridCase) -> list[RobustRow]:
    """All corrective-stage inequality rows: line limits, capacity bounds,
    period-to-period ramps, and the response-window limits."""
    rows: list[RobustRow] = []
    t_n = case.periods
    k_n = case.num_renewables
    factors = case.shift_factors
    loads = case.load_matrix
    fc = case.forecast_matrix
    gen_bus_idx = [case.bus_index(g.bus) for g in case.generators]
    ren_bus_idx = [case.bus_index(r.bus) for r in case.renewables]

    for t in range(t_n):
        for l, line in enumerate(case.lines):
            w = [(i, t, float(factors[bi, l])) for i, bi in enumerate(gen_bus_idx)
                 if factors[bi, l] != 0.0]
            h = [(k, t, float(factors[bi, l])) for k, bi in enumerate(ren_bus_idx)
                 if factors[bi, l] != 0.0]
            const = float(np.dot(factors[:, l],
                                 -loads[:, t])
                          + sum(factors[ren_bus_idx[k], l] * fc[k, t] for k in range(k_n)))
            rows.append(RobustRow(f"line[{l + 1}] t{t + 1} fwd", tuple(w), (), tuple(h),
                                  const, line.capacity))
            neg_w = tuple((i, tt, -c) for i, tt, c in w)
            neg_h = tuple((k, tt, -c) for k, tt, c in h)
            rows.append(RobustRow(f"line[{l + 1}] t{t + 1} rev", neg_w, (), neg_h,
                                  -const, line.capacity))
        for i, g in enumerate(case.generators):
            rows.append(RobustRow(f"{g.name} t{t + 1} cap-upper", ((i, t, 1.0),), (), (),
                                  0.0, g.p_max))
            rows.append(RobustRow(f"{g.name} t{t + 1} cap-lower", ((i, t, -1.0),), (), (),
                                  0.0, -g.p_min))
        for i, g in enumerate(case.generators):
            up_budget = g.ramp_up * case.dispatch_minutes
            dn_budget = g.ramp_dn * case.dispatch_minutes
            if t >= 1:
                if math.isfinite(up_budget):
                    rows.append(RobustRow(f"{g.name} t{t + 1} ramp-up",
                                          ((i, t, 1.0), (i, t - 1, -1.0)), (), (),
                                          0.0, up_budget))
                if math.isfinite(dn_budget):
                    rows.append(RobustRow(f"{g.name} t{t + 1} ramp-down",
                                          ((i, t, -1.0), (i, t - 1, 1.0)), (), (),
                                          0.0, dn_budget))
            elif g.p_init is not None:
                if math.isfinite(up_budget):
                    rows.append(RobustRow(f"{g.name} t1 ramp-up(init)", ((i, t, 1.0),), (), (),
                                          -g.p_init, up_budget))
                if math.isfinite(dn_budget):
                    rows.append(RobustRow(f"{g.name} t1 ramp-down(init)", ((i, t, -1.0),), (), (),
                                          g.p_init, dn_budget))
        for i, g in enumerate(case.generators):
            up_w = g.ramp_up * case.response_minutes
            dn_w = g.ramp_dn * case.response_minutes
            if math.isfinite(up_w):
                rows.append(RobustRow(f"{g.name} t{t + 1} window-up",
                                      ((i, t, 1.0),), ((i, t, -1.0),), (), 0.0, up_w))
            if math.isfinite(dn_w):
                rows.append(RobustRow(f"{g.name} t{t + 1} window-down",
                                      ((i, t, -1.0),), ((i, t, 1.0),), (), 0.0, dn_w))
    return rows


# ---------------------------------------------------------------------------
# Assembly blocks
# ---------------------------------------------------------------------------

def add_nominal_dispatch_rows(pb: ProgramBuilder, case: GridCase, phat: np.ndarray) -> None:
    """Balance, line-limit, and ramp rows on the pre-dispatch variables.

    Capacity limits ride on the variable bounds set when phat was created.
    Warns early when a period is structurally unbalanceable.
    """
    t_n = case.periods
    loads = case.load_matrix
    fc = case.forecast_matrix
    factors = case.shift_factors
    gen_bus_idx = [case.bus_index(g.bus) for g in case.generators]
    ren_bus_idx = [case.bus_index(r.bus) for r in case.renewables]
    p_max_sum = sum(g.p_max for g in case.generators)
    p_min_sum = sum(g.p_min for g in case.generators)

    for t in range(t_n):
        net_load = float(loads[:, t].sum() - fc[:, t].sum())
        if p_max_sum < net_load - 1e-9 or p_min_sum > net_load + 1e-9:
            warnings.warn(f"period {t + 1}: net load {net_load:.1f} MW is outside the "
                          f"dispatchable range [{p_min_sum:.1f}, {p_max_sum:.1f}] MW; "
                          "the model will be infeasible", stacklevel=2)
        pb.add_eq({int(phat[i, t]): 1.0 for i in range(case.num_generators)}, net_load)
        for l, line in enumerate(case.lines):
            coeffs = {int(phat[i, t]): float(factors[bi, l])
                      for i, bi in enumerate(gen_bus_idx) if factors[bi, l] != 0.0}
            const = float(np.dot(factors[:, l], -loads[:, t])
                          + sum(factors[bi, l] * fc[k, t] for k, bi in enumerate(ren_bus_idx)))
            if coeffs or const:
                pb.add_ineq(dict(coeffs), line.capacity - const)
                pb.add_ineq({v: -c for v, c in coeffs.items()}, line.capacity + const)
        for i, g in enumerate(case.generators):
            up_budget = g.ramp_up * case.dispatch_minutes
            dn_budget = g.ramp_dn * case.dispatch_minutes
            if t >= 1:
                if math.isfinite(up_budget):
                    pb.add_ineq({int(phat[i, t]): 1.0, int(phat[i, t - 1]): -1.0}, up_budget)
                if math.isfinite(dn_budget):
                    pb.add_ineq({int(phat[i, t]): -1.0, int(phat[i, t - 1]): 1.0}, dn_budget)
            elif g.p_init is not None:
                if math.isfinite(up_budget):
                    pb.add_ineq({int(phat[i, t]): 1.0}, up_budget + g.p_init)
                if math.isfinite(dn_budget):
                    pb.add_ineq({int(phat[i, t]): -1.0}, dn_budget - g.p_init)


def add_robust_box_rows(pb: ProgramBuilder, case: GridCase, rows: list[RobustRow],
                        phat: np.ndarray, gain, offset, eps_lo: np.ndarray,
                        eps_up: np.ndarray) -> None:
    """Worst-case enforcement of each robust row over the admissible box.

    ``gain[i][k][t]``/``offset[i][t]`` map to variable indices of the policy
    slope (normalized coordinates) and anchor, or None for non-participating
    units.  For every error coordinate with nonzero row slope a multiplier
    variable bounded below by the slope and by zero joins the row.
    """
    k_n, t_n = eps_lo.shape
    for row in rows:
        columns: set[tuple[int, int]] = set()
        for i, t, _ in row.policy:
            for k in range(k_n):
                columns.add((k, t))
        for k, t, _ in row.error:
            columns.add((k, t))
        main: dict[int, float] = {}
        rhs = row.rhs - row.constant
        for (k, t) in sorted(columns):
            slope: dict[int, float] = {}
            for i, tt, w in row.policy:
                if tt == t and gain[i] is not None:
                    idx = int(gain[i][k][t])
                    slope[idx] = slope.get(idx, 0.0) + w
            h = sum(c for kk, tt, c in row.error if (kk, tt) == (k, t))
            if h:
                slope[int(eps_up[k, t])] = slope.get(int(eps_up[k, t]), 0.0) + h
                slope[int(eps_lo[k, t])] = slope.get(int(eps_lo[k, t]), 0.0) - h
            # contribution of eps at the lower corner
            if h:
                main[int(eps_lo[k, t])] = main.get(int(eps_lo[k, t]), 0.0) + h
            if not slope:
                continue
            mult = pb.add_var(lb=0.0)
            slope[mult] = slope.get(mult, 0.0) - 1.0
            pb.add_ineq(slope, 0.0)
            main[mult] = main.get(mult, 0.0) + 1.0
        for i, t, w in row.policy:
            main[int(phat[i, t])] = main.get(int(phat[i, t]), 0.0) + w
            if offset[i] is not None:
                main[int(offset[i][t])] = main.get(int(offset[i][t]), 0.0) + w
        for i, t, c in row.predispatch:
            main[int(phat[i, t])] = main.get(int(phat[i, t]), 0.0) + c
        pb.add_ineq(main, rhs)


def add_balance_matching_rows(pb: ProgramBuilder, case: GridCase, gain, offset,
                              eps_lo: np.ndarray, eps_up: np.ndarray) -> None:
    """Corrective balance as identities: slope columns sum to -width per
    (k, t) and anchors cancel the lower corner per period."""
    k_n, t_n = eps_lo.shape
    for t in range(t_n):
        for k in range(k_n):
            coeffs = {int(eps_up[k, t]): 1.0, int(eps_lo[k, t]): -1.0}
            for i in range(case.num_generators):
                if gain[i] is not None:
                    coeffs[int(gain[i][k][t])] = coeffs.get(int(gain[i][k][t]), 0.0) + 1.0
            pb.add_eq(coeffs, 0.0)
        coeffs = {}
        for i in range(case.num_generators):
            if offset[i] is not None:
                coeffs[int(offset[i][t])] = 1.0
        for k in range(k_n):
            coeffs[int(eps_lo[k, t])] = coeffs.get(int(eps_lo[k, t]), 0.0) + 1.0
        pb.add_eq(coeffs, 0.0)


def add_coverage_rows(pb: ProgramBuilder, means: np.ndarray, sigmas: np.ndarray,
                      eps_lo: np.ndarray, eps_up: np.ndarray, utilization) -> tuple:
    """Distributionally robust coverage block.

    utilization: variable index of u, or a fixed float level.  Returns the
    (r, s, z) variable index arrays (half-width scale, per-coordinate budget,
    coupling).
    """
    k_n, t_n = means.shape
    r_idx = np.array([[pb.add_var(lb=0.0) for _ in range(t_n)] for _ in range(k_n)])
    s_idx = np.array([[pb.add_var(lb=0.0) for _ in range(t_n)] for _ in range(k_n)])
    z_idx = np.array([[pb.add_var(lb=0.0) for _ in range(t_n)] for _ in range(k_n)])
    root83 = math.sqrt(8.0 / 3.0)
    for k in range(k_n):
        for t in range(t_n):
            r, s, z = int(r_idx[k, t]), int(s_idx[k, t]), int(z_idx[k, t])
            # r * z >= 2/3
            pb.add_soc_affine(({r: 1.0, z: 1.0}, 0.0),
                              [({}, root83), ({r: 1.0, z: -1.0}, 0.0)])
            # z^2 <= s
            pb.add_soc_affine(({s: 1.0}, 1.0),
                              [({s: 1.0}, -1.0), ({z: 2.0}, 0.0)])
            pb.add_ineq({r: float(sigmas[k, t]), int(eps_lo[k, t]): 1.0}, float(means[k, t]))
            pb.add_ineq({r: float(sigmas[k, t]), int(eps_up[k, t]): -1.0}, -float(means[k, t]))
    for t in range(t_n):
        coeffs = {int(s_idx[k, t]): 1.0 for k in range(k_n)}
        if isinstance(utilization, (int, np.integer)):
            coeffs[int(utilization)] = 1.0
            pb.add_ineq(coeffs, 1.0)
        else:
            pb.add_ineq(coeffs, 1.0 - float(utilization))
    return r_idx, s_idx, z_idx


def add_dispatch_cost(pb: ProgramBuilder, case: GridCase, phat: np.ndarray) -> None:
    """Objective rows for the generation cost of the pre-dispatch schedule."""
    for i, g in enumerate(case.generators):
        c = g.cost
        for t in range(case.periods):
            v = int(phat[i, t])
            if c.kind == "quadratic":
                c2, c1, c0 = c.coefficients
                if c2 > 0:
                    peak = max(abs(g.p_min), abs(g.p_max), 1.0)
                    q, unit = pb.add_quadratic_epigraph(v, c2, magnitude=c2 * peak * peak)
                    pb.add_objective({q: unit})
                pb.add_objective({v: c1}, offset=c0)
            elif c.kind == "linear":
                c1, c0 = c.coefficients
                pb.add_objective({v: c1}, offset=c0)
            else:
                epi = pb.add_var()
                for slope, (x1, y1) in zip(c.segment_slopes(), c.breakpoints):
                    pb.add_ineq({v: slope, epi: -1.0}, slope * x1 - y1)
                pb.add_objective({epi: 1.0})


# ---------------------------------------------------------------------------
# Full model assembly and solve
# ---------------------------------------------------------------------------

def _check_shapes(case: GridCase, ambiguity: AmbiguitySet) -> None:
    if case.num_renewables == 0:
        raise ModelError("the case has no renewables, so there are no limits to optimize")
    if (ambiguity.num_renewables, ambiguity.periods) != (case.num_renewables, case.periods):
        raise ModelError(
            f"ambiguity set is {ambiguity.num_renewables}x{ambiguity.periods} but the case "
            f"has {case.num_renewables} renewables and {case.periods} periods")


def solve_drco(case: GridCase, ambiguity: AmbiguitySet, config: SolveConfig) -> DneSolution:
    """Co-optimize dispatch, corrective policy, and admissible boxes."""
    _check_shapes(case, ambiguity)
    mask = config.mask_for(case)
    i_n, k_n, t_n = case.num_generators, case.num_renewables, case.periods
    fc = case.forecast_matrix

    pb = ProgramBuilder()
    phat = np.array([[pb.add_var(lb=g.p_min, ub=g.p_max) for _ in range(t_n)]
                     for g in case.generators])
    gain = [np.array([[pb.add_var() for _ in range(t_n)] for _ in range(k_n)])
            if mask[i] else None for i in range(i_n)]
    offset = [np.array([pb.add_var() for _ in range(t_n)]) if mask[i] else None
              for i in range(i_n)]
    eps_lo = np.zeros((k_n, t_n), dtype=int)
    eps_up = np.zeros((k_n, t_n), dtype=int)
    for k, r in enumerate(case.renewables):
        for t in range(t_n):
            eps_lo[k, t] = pb.add_var(lb=r.w_min - fc[k, t], ub=0.0)
            eps_up[k, t] = pb.add_var(lb=0.0, ub=r.w_max - fc[k, t])
    u = pb.add_var(lb=config.min_utilization, ub=config.max_utilization)

    add_nominal_dispatch_rows(pb, case, phat)
    add_balance_matching_rows(pb, case, gain, offset, eps_lo, eps_up)
    add_robust_box_rows(pb, case, robust_rows(case), phat, gain, offset, eps_lo, eps_up)
    r_idx, s_idx, z_idx = add_coverage_rows(pb, ambiguity.means, ambiguity.sigmas,
                                            eps_lo, eps_up, u)
    add_dispatch_cost(pb, case, phat)
    pb.add_objective({u: -config.utilization_weight})

    risk_tables = None
    if config.over_risk_weight > 0 or config.under_risk_weight > 0:
        risk_tables = _add_risk_terms(pb, case, ambiguity, config, eps_lo, eps_up)

    program = pb.build()
    solution = solve(program, config.settings)
    if solution.status != "optimal":
        raise SolveFailure(f"co-optimization solve ended with status "
                           f"'{solution.status}': {solution.message}", solution)
    x = solution.primal

    pre = x[phat]
    lo = x[eps_lo]
    up = x[eps_up]
    width = up - lo
    s_val = np.zeros((i_n, k_n, t_n))
    off_val = np.zeros((i_n, t_n))
    for i in range(i_n):
        if gain[i] is not None:
            s_val[i] = x[gain[i]]
            off_val[i] = x[offset[i]]
    b_gain = np.zeros_like(s_val)
    wide = width > WIDTH_FLOOR
    for k in range(k_n):
        for t in range(t_n):
            if wide[k, t]:
                b_gain[:, k, t] = s_val[:, k, t] / width[k, t]
    # offsets split evenly over error coordinates; collapsed columns fold in
    b_off = off_val[:, None, :] / k_n - b_gain * lo[None, :, :]

    dispatch_cost = float(sum(g.cost.value(pre[i]).sum() for i, g in enumerate(case.generators)))
    u_val = float(x[u])
    over_cost = under_cost = 0.0
    if risk_tables is not None:
        over_cost, under_cost = _risk_costs_at(case, ambiguity, config, risk_tables, lo, up)
    breakdown = ObjectiveBreakdown(
        dispatch_cost=dispatch_cost,
        utilization_reward=-config.utilization_weight * u_val,
        over_risk_cost=over_cost, under_risk_cost=under_cost)

    report = verify(program, x, config.settings.verify_tol)
    return DneSolution(predispatch=pre, box_gain=s_val, box_offset=off_val,
                       response_gain=b_gain, response_offset=b_off,
                       eps_lower=lo, eps_upper=up, utilization=u_val,
                       halfwidth_scale=x[r_idx], coverage_budget=x[s_idx],
                       budget_coupling=x[z_idx], breakdown=breakdown,
                       agc_mask=mask, label="drco",
                       diagnostics=SolveDiagnostics(program=program, solution=solution,
                                                    residuals=report))


def _add_risk_terms(pb, case, ambiguity, config, eps_lo, eps_up):
    """Piecewise-linear worst-case risk terms on both box sides."""
    lower_tables, upper_tables = risk_pwl_tables(case, ambiguity, config.risk_segments,
                                                 config.settings)
    k_n, t_n = ambiguity.means.shape
    over_c = np.broadcast_to(np.asarray(config.over_risk_cost, dtype=float), (k_n, t_n))
    under_c = np.broadcast_to(np.asarray(config.under_risk_cost, dtype=float), (k_n, t_n))
    mu, sig = ambiguity.means, ambiguity.sigmas
    for k in range(k_n):
        for t in range(t_n):
            scale = 1.0 / (SQRT3 * sig[k, t])
            if config.over_risk_weight > 0:
                table = lower_tables[k, t]
                lam = pb.add_vars(table.breakpoints.size, lb=0.0)
                pb.add_eq({int(v): 1.0 for v in lam}, 1.0)
                # sum lam * breakpoint = (mu - eps_lower) / (sqrt{3} sigma)
                coeffs = {int(v): float(n) for v, n in zip(lam, table.breakpoints)}
                coeffs[int(eps_lo[k, t])] = scale
                pb.add_eq(coeffs, mu[k, t] * scale)
                w = config.over_risk_weight * SQRT3 * over_c[k, t] * sig[k, t]
                pb.add_objective({int(v): w * float(j) for v, j in zip(lam, table.values)})
            if config.under_risk_weight > 0:
                table = upper_tables[k, t]
                lam = pb.add_vars(table.breakpoints.size, lb=0.0)
                pb.add_eq({int(v): 1.0 for v in lam}, 1.0)
                coeffs = {int(v): float(n) for v, n in zip(lam, table.breakpoints)}
                coeffs[int(eps_up[k, t])] = -scale
                pb.add_eq(coeffs, -mu[k, t] * scale)
                w = config.under_risk_weight * SQRT3 * under_c[k, t] * sig[k, t]
                pb.add_objective({int(v): w * float(j) for v, j in zip(lam, table.values)})
    return lower_tables, upper_tables


def _risk_costs_at(case, ambiguity, config, risk_tables, lo, up):
    lower_tables, upper_tables = risk_tables
    k_n, t_n = ambiguity.means.shape
    over_c = np.broadcast_to(np.asarray(config.over_risk_cost, dtype=float), (k_n, t_n))
    under_c = np.broadcast_to(np.asarray(config.under_risk_cost, dtype=float), (k_n, t_n))
    mu, sig = ambiguity.means, ambiguity.sigmas
    over = under = 0.0
    if config.over_risk_weight > 0:
        for k in range(k_n):
            for t in range(t_n):
                tau = (mu[k, t] - lo[k, t]) / (SQRT3 * sig[k, t])
                over += over_c[k, t] * sig[k, t] * lower_tables[k, t].value(tau)
        over *= config.over_risk_weight * SQRT3
    if config.under_risk_weight > 0:
        for k in range(k_n):
            for t in range(t_n):
                tau = (up[k, t] - mu[k, t]) / (SQRT3 * sig[k, t])
                under += under_c[k, t] * sig[k, t] * upper_tables[k, t].value(tau)
        under *= config.under_risk_weight * SQRT3
    return over, under


def solve_nominal_ed(case: GridCase, settings: SolveSettings | None = None):
    """Minimum-cost deterministic dispatch against the forecast.

    Returns (predispatch (I, T), dispatch cost $).
    """
    settings = settings or SolveSettings()
    pb = ProgramBuilder()
    phat = np.array([[pb.add_var(lb=g.p_min, ub=g.p_max) for _ in range(case.periods)]
                     for g in case.generators])
    add_nominal_dispatch_rows(pb, case, phat)
    add_dispatch_cost(pb, case, phat)
    program = pb.build()
    solution = solve(program, settings)
    if solution.status != "optimal":
        raise SolveFailure(f"nominal dispatch solve ended with status "
                           f"'{solution.status}': {solution.message}", solution)
    pre = solution.primal[phat]
    cost = float(sum(g.cost.value(pre[i]).sum() for i, g in enumerate(case.generators)))
    return pre, cost
