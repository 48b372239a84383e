"""Worst-case expected over/underestimation costs and their conic machinery.

Core quantity: for a threshold ``tau >= 0``, the worst-case expectation

    shortfall(tau) = sup E[ eps' - tau ]^+

over all laws of eps' with mean 0, variance 1/3, unimodal about 0.  Writing
eps' = U * zeta (U uniform on (0,1), independent of zeta with mean 0 and unit
second moment) turns this into sup E[h(zeta)] over the zeta moment family.
The conic value is computed from the dual: minimize pi3 + pi1 + 1 subject to

  * pi3 z^2 + pi2 z + pi1 + 1 >= 0, certified on all of R through the SOC row
    ||(pi2, pi1 - pi3 + 1)|| <= pi1 + pi3 + 1  (conservative: only z >= 0 is
    required, but the program is used as stated);
  * pi3 z^3 + pi2 z^2 + pi1 z + tau >= 0 on z >= 0, certified by a 4x4 PSD
    matrix whose antidiagonal sums reproduce the polynomial coefficients
    after the substitution z = w^2 (entry (i, j) contributes to w^(i+j)).

Two h variants exist because the ratio form and the direct uniform-mixture
integral disagree:

  * 'ratio'     h(z) = max(0, 1 - tau/z) for z > 0, else 0.  This is the form
                the conic dual above certifies, and the default everywhere.
  * 'integral'  h(z) = (z - tau)^2 / (2 z) for z > tau > 0 (and z/2 at
                tau = 0), obtained by integrating [u z - tau]^+ over
                u ~ Uniform(0, 1).

The LP oracle evaluates either variant on a discrete grid; it is a restricted
maximization, hence a lower bound that converges up under grid refinement.

Scaled aggregates: with per-(k, t) costs c and standard deviations sigma,

    risk = sqrt(3) * sum c_kt * sigma_kt * shortfall(tau_kt)

gives the worst-case expected cost of box violations; overestimation uses
tau = (mu - eps_lower) / (sqrt(3) sigma) and underestimation uses
tau = (eps_upper - mu) / (sqrt(3) sigma).

``Cpla`` is the conservative piecewise-linear overestimator of the convex
shortfall curve used to embed these risks in the dispatch model with linear
rows only (the PSD solves happen at table-build time).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .conic import ProgramBuilder, SolveSettings, solve

SQRT3 = np.sqrt(3.0)


class ExpectedCostError(Exception):
    pass


@dataclass(frozen=True)
class ShortfallCertificate:
    """Optimal dual data behind one shortfall value."""

    tau: float
    value: float
    pi: np.ndarray  # (3,)
    certificate: np.ndarray  # (4, 4) PSD, entry (0,0) equals tau


_PSD_BASIS = {}
for _a in range(4):
    for _b in range(_a, 4):
        _m = np.zeros((4, 4))
        _m[_a, _b] = _m[_b, _a] = 1.0
        _PSD_BASIS[(_a, _b)] = _m

_cache_lock = threading.Lock()
_shortfall_cache: dict[tuple, ShortfallCertificate] = {}


def _solve_shortfall(tau: float, settings: SolveSettings) -> ShortfallCertificate:
    pb = ProgramBuilder()
    pi = pb.add_vars(3)
    lam = {}  # strict upper-triangle plus diagonal, excluding the pinned (0,0)
    entries = [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
    for e in entries:
        lam[e] = pb.add_var()

    # odd antidiagonal sums vanish: w^1, w^3, w^5 coefficients
    pb.add_eq({lam[(0, 1)]: 2.0}, 0.0)
    pb.add_eq({lam[(0, 3)]: 2.0, lam[(1, 2)]: 2.0}, 0.0)
    pb.add_eq({lam[(2, 3)]: 2.0}, 0.0)
    # even antidiagonal sums reproduce pi: w^2, w^4, w^6 coefficients
    pb.add_eq({lam[(0, 2)]: 2.0, lam[(1, 1)]: 1.0, pi[0]: -1.0}, 0.0)
    pb.add_eq({lam[(1, 3)]: 2.0, lam[(2, 2)]: 1.0, pi[1]: -1.0}, 0.0)
    pb.add_eq({lam[(3, 3)]: 1.0, pi[2]: -1.0}, 0.0)

    pb.add_soc_affine(({pi[0]: 1.0, pi[2]: 1.0}, 1.0),
                      [({pi[1]: 1.0}, 0.0), ({pi[0]: 1.0, pi[2]: -1.0}, 1.0)])

    const = np.zeros((4, 4))
    const[0, 0] = tau
    pb.add_psd(const, {lam[e]: _PSD_BASIS[e] for e in entries})
    pb.add_objective({pi[0]: 1.0, pi[2]: 1.0}, offset=1.0)

    solution = solve(pb.build(), settings)
    x = solution.require_optimal()
    cert = const.copy()
    for e, idx in lam.items():
        cert += x[idx] * _PSD_BASIS[e]
    return ShortfallCertificate(tau=tau, value=float(solution.objective),
                                pi=x[pi].copy(), certificate=cert)


def worst_shortfall_certificate(tau: float,
                                settings: SolveSettings | None = None) -> ShortfallCertificate:
    """Shortfall value plus the dual certificate; values are cached per tau."""
    if tau < 0:
        raise ExpectedCostError(f"threshold tau must be nonnegative, got {tau}")
    settings = settings or SolveSettings()
    key = (round(float(tau), 12), settings.backend)
    with _cache_lock:
        hit = _shortfall_cache.get(key)
    if hit is not None:
        return hit
    cert = _solve_shortfall(float(tau), settings)
    with _cache_lock:
        _shortfall_cache[key] = cert
    return cert


def worst_shortfall(tau: float, settings: SolveSettings | None = None) -> float:
    """Worst-case E[eps' - tau]^+ over the normalized unimodal moment family."""
    return worst_shortfall_certificate(tau, settings).value


def worst_shortfall_lp(tau: float, h_variant: str = "ratio",
                       grid_halfwidth: float = 10.0, grid_points: int = 2001) -> float:
    """Discrete-grid moment LP for the shortfall; a converging lower bound."""
    if tau < 0:
        raise ExpectedCostError(f"threshold tau must be nonnegative, got {tau}")
    if grid_points < 201:
        raise ExpectedCostError("need at least 201 grid points")
    z = np.linspace(-grid_halfwidth, grid_halfwidth, grid_points)
    pos = z > 0
    h = np.zeros_like(z)
    if h_variant == "ratio":
        h[pos] = np.maximum(1.0 - tau / z[pos], 0.0)
    elif h_variant == "integral":
        above = z > tau
        h[above] = (z[above] - tau) ** 2 / (2.0 * z[above])
    else:
        raise ExpectedCostError(f"unknown h variant '{h_variant}' (use 'ratio' or 'integral')")
    a_eq = np.vstack([z, z * z, np.ones_like(z)])
    b_eq = np.array([0.0, 1.0, 1.0])
    res = linprog(-h, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ExpectedCostError(f"shortfall oracle LP failed: {res.message}")
    return float(-res.fun)


def scaled_shortfall_sum(terms, settings: SolveSettings | None = None) -> float:
    """sqrt(3) * sum of c * sigma * shortfall(tau) over (c, sigma, tau) terms.

    The family is separable across terms, so the aggregate is a plain sum of
    single-threshold solves.
    """
    total = 0.0
    for cost, sigma, tau in terms:
        if cost < 0:
            raise ExpectedCostError(f"cost coefficients must be nonnegative, got {cost}")
        if cost == 0.0:
            continue
        total += cost * sigma * worst_shortfall(tau, settings)
    return SQRT3 * total


def _normalized_thresholds(gaps: np.ndarray, ambiguity) -> np.ndarray:
    tau = gaps / (SQRT3 * ambiguity.sigmas)
    if np.any(tau < -1e-12):
        k, t = np.argwhere(tau < -1e-12)[0]
        raise ExpectedCostError(
            f"negative threshold at (k={k + 1}, t={t + 1}): the do-not-exceed bounds "
            "must bracket the error mean direction (check eps_lower <= mu <= eps_upper scaling)")
    return np.maximum(tau, 0.0)


def overestimation_risk(eps_lower: np.ndarray, ambiguity, costs,
                        settings: SolveSettings | None = None) -> float:
    """Worst-case expected cost of the error falling below eps_lower."""
    costs = np.broadcast_to(np.asarray(costs, dtype=float), ambiguity.means.shape)
    tau = _normalized_thresholds(ambiguity.means - np.asarray(eps_lower), ambiguity)
    terms = zip(costs.ravel(), ambiguity.sigmas.ravel(), tau.ravel())
    return scaled_shortfall_sum(terms, settings)


def underestimation_risk(eps_upper: np.ndarray, ambiguity, costs,
                         settings: SolveSettings | None = None) -> float:
    """Worst-case expected cost of the error exceeding eps_upper."""
    costs = np.broadcast_to(np.asarray(costs, dtype=float), ambiguity.means.shape)
    tau = _normalized_thresholds(np.asarray(eps_upper) - ambiguity.means, ambiguity)
    terms = zip(costs.ravel(), ambiguity.sigmas.ravel(), tau.ravel())
    return scaled_shortfall_sum(terms, settings)


@dataclass(frozen=True)
class Cpla:
    """Conservative piecewise-linear overestimator of the convex shortfall.

    Breakpoints are uniform on [tau_lo, tau_hi]; chords of a convex function
    lie above it, so the interpolant never undershoots.
    """

    breakpoints: np.ndarray  # (H + 1,)
    values: np.ndarray  # (H + 1,)

    def __post_init__(self):
        if self.breakpoints.ndim != 1 or self.breakpoints.size < 2:
            raise ExpectedCostError("need at least two breakpoints")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ExpectedCostError("breakpoints must be strictly increasing")
        if self.values.shape != self.breakpoints.shape:
            raise ExpectedCostError("one value per breakpoint required")

    @property
    def segments(self) -> int:
        return self.breakpoints.size - 1

    def value(self, tau: float) -> float:
        bp, vals = self.breakpoints, self.values
        if tau < bp[0] - 1e-9 or tau > bp[-1] + 1e-9:
            raise ExpectedCostError(f"tau={tau} outside the table range [{bp[0]}, {bp[-1]}]")
        return float(np.interp(tau, bp, vals))

    def dump(self) -> str:
        lines = ["breakpoint,value"]
        lines += [f"{b!r},{v!r}" for b, v in zip(self.breakpoints, self.values)]
        return "\n".join(lines) + "\n"


def build_cpla(tau_lo: float, tau_hi: float, segments: int,
               settings: SolveSettings | None = None) -> Cpla:
    """Uniform-breakpoint table of shortfall values over [tau_lo, tau_hi]."""
    if segments < 1:
        raise ExpectedCostError("need at least one segment")
    if not tau_lo < tau_hi:
        raise ExpectedCostError(f"need tau_lo < tau_hi, got [{tau_lo}, {tau_hi}]")
    if tau_lo < 0:
        raise ExpectedCostError("thresholds must be nonnegative")
    bp = tau_lo + (tau_hi - tau_lo) * np.arange(segments + 1) / segments
    vals = np.array([worst_shortfall(b, settings) for b in bp])
    return Cpla(breakpoints=bp, values=vals)


def risk_pwl_tables(case, ambiguity, segments: int,
                    settings: SolveSettings | None = None):
    """Per-(k, t) overestimator tables for both risk sides.

    Returns (lower_side, upper_side), each a (K, T) array of Cpla objects.
    The threshold ranges follow the admissible-bound geometry: the lower-side
    threshold (mu - eps_lower)/(sqrt(3) sigma) ranges up to
    (mu + w_hat - w_min)/(sqrt(3) sigma) and the upper-side threshold up to
    (w_max - w_hat - mu)/(sqrt(3) sigma).  Range starts are clamped at zero
    because negative thresholds are outside the shortfall domain.
    """
    kk, tt = ambiguity.means.shape
    fc = case.forecast_matrix
    w_min = np.array([r.w_min for r in case.renewables]).reshape(-1, 1)
    w_max = np.array([r.w_max for r in case.renewables]).reshape(-1, 1)
    mu, sig = ambiguity.means, ambiguity.sigmas
    lo_start = np.maximum(mu / (SQRT3 * sig), 0.0)
    lo_end = (mu + fc - w_min) / (SQRT3 * sig)
    up_start = np.maximum(-mu / (SQRT3 * sig), 0.0)
    up_end = (w_max - fc - mu) / (SQRT3 * sig)
    lower_side = np.empty((kk, tt), dtype=object)
    upper_side = np.empty((kk, tt), dtype=object)
    for k in range(kk):
        for t in range(tt):
            lower_side[k, t] = build_cpla(lo_start[k, t], lo_end[k, t], segments, settings)
            upper_side[k, t] = build_cpla(up_start[k, t], up_end[k, t], segments, settings)
    return lower_side, upper_side
