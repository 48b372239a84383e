"""Ambiguity-set calibration, scenario generation, and coverage oracles.

The ambiguity set fixes, for each renewable k and period t, the mean and
standard deviation of the forecast-error distribution and assumes each
marginal is unimodal about its mean.  Over that family, the worst-case
probability of a symmetric band of half-width ``lam`` standard deviations is
the classical Gauss-inequality bound ``1 - 4 / (9 lam^2)``, valid on
``lam >= 2/sqrt(3)``.

All oracle computations run in normalized units ``(eps - mu) / sigma`` so a
single oracle serves every (k, t).  A unimodal variable in those units can be
written as ``sqrt(3) * U * zeta`` where U is uniform on (0, 1), independent of
zeta, and zeta has mean 0 and second moment 1; the discrete-distribution
linear program below optimizes over zeta laws on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

GAUSS_LAMBDA_MIN = 2.0 / np.sqrt(3.0)


class UncertaintyError(Exception):
    pass


@dataclass(frozen=True)
class AmbiguitySet:
    """Per-(k, t) error mean and standard deviation, both in MW."""

    means: np.ndarray  # (K, T)
    sigmas: np.ndarray  # (K, T)

    def __post_init__(self):
        if self.means.shape != self.sigmas.shape or self.means.ndim != 2:
            raise UncertaintyError("means and sigmas must both be (K, T) arrays")
        if np.any(self.sigmas <= 0):
            k, t = np.argwhere(self.sigmas <= 0)[0]
            raise UncertaintyError(f"sigma must be positive; entry (k={k + 1}, t={t + 1}) "
                                   f"is {self.sigmas[k, t]}")

    @property
    def num_renewables(self) -> int:
        return self.means.shape[0]

    @property
    def periods(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class ScenarioSet:
    """Ordered error realizations (n, K, T) with the generator seed recorded."""

    values: np.ndarray
    seed: int
    distribution: str

    def __post_init__(self):
        if self.values.ndim != 3:
            raise UncertaintyError("scenario values must have shape (n, K, T)")

    @property
    def count(self) -> int:
        return self.values.shape[0]


def calibrate(history: np.ndarray) -> AmbiguitySet:
    """Empirical mean and sample standard deviation (divisor n-1) per (k, t).

    history has shape (n_samples, K, T) with n_samples >= 2.
    """
    history = np.asarray(history, dtype=float)
    if history.ndim != 3:
        raise UncertaintyError("history must have shape (n_samples, K, T)")
    n = history.shape[0]
    if n < 2:
        raise UncertaintyError(f"need at least 2 samples per (k, t), got {n}")
    means = history.mean(axis=0)
    sigmas = history.std(axis=0, ddof=1)
    if np.any(sigmas <= 0):
        k, t = np.argwhere(sigmas <= 0)[0]
        raise UncertaintyError(f"zero sample variance at (k={k + 1}, t={t + 1}); "
                               "the ambiguity set requires sigma > 0")
    return AmbiguitySet(means=means, sigmas=sigmas)


def capacity_sigma_schedule(capacities, periods: int,
                            base_fraction: float = 0.10,
                            step_fraction: float = 0.001) -> np.ndarray:
    """(K, T) sigma preset: capacity * (base + step * (t - 1)) for t = 1..T."""
    caps = np.asarray(capacities, dtype=float).reshape(-1, 1)
    steps = base_fraction + step_fraction * np.arange(periods)
    return caps * steps[None, :]


def preset_ambiguity(capacities, periods: int) -> AmbiguitySet:
    """Zero-mean ambiguity set with the capacity-fraction sigma schedule."""
    sig = capacity_sigma_schedule(capacities, periods)
    return AmbiguitySet(means=np.zeros_like(sig), sigmas=sig)


def sample_gaussian(means, sigmas, count: int, seed: int) -> ScenarioSet:
    """count independent (K, T) Gaussian draws; deterministic for a fixed seed.

    Uses numpy's default_rng (PCG64) seeded with ``seed``.
    """
    means = np.asarray(means, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if count < 1:
        raise UncertaintyError("scenario count must be >= 1")
    if np.any(sigmas <= 0):
        raise UncertaintyError("sigmas must be positive")
    rng = np.random.default_rng(seed)
    draws = rng.normal(loc=means, scale=sigmas, size=(count, *means.shape))
    return ScenarioSet(values=draws, seed=seed, distribution="gaussian")


def gauss_worst_coverage(lam: float) -> float:
    """Worst-case P(|eps - mu| <= lam * sigma) over the unimodal family.

    Valid for lam >= 2/sqrt(3), the regime in which the quadratic branch of
    the Gauss inequality binds (equivalently, coverage above 2/3).
    """
    if lam < GAUSS_LAMBDA_MIN - 1e-12:
        raise UncertaintyError(
            f"half-width {lam:.6g} sigma is below the 2/sqrt(3) validity threshold "
            "of the Gauss bound (coverage targets must exceed 2/3)")
    return 1.0 - 4.0 / (9.0 * lam * lam)


def gauss_halfwidth(coverage: float) -> float:
    """Inverse of gauss_worst_coverage: minimal half-width in sigma units."""
    if not 2.0 / 3.0 < coverage < 1.0:
        raise UncertaintyError(f"coverage {coverage} must lie in (2/3, 1)")
    return 2.0 / (3.0 * np.sqrt(1.0 - coverage))


def worst_coverage_oracle(lam: float, grid_halfwidth: float = 10.0,
                          grid_points: int = 2001) -> float:
    """Brute-force lower-level check of gauss_worst_coverage.

    Minimizes P(|sqrt(3) U zeta| <= lam) over discrete zeta laws on a
    symmetric grid with mean 0 and second moment 1.  Restricting the support
    can only raise the minimum, so the value is an upper bound on the true
    infimum and converges down to the closed form as the grid refines.
    """
    if grid_points < 201:
        raise UncertaintyError("need at least 201 grid points")
    z = np.linspace(-grid_halfwidth, grid_halfwidth, grid_points)
    absz = np.abs(z)
    with np.errstate(divide="ignore"):
        cover = np.where(absz > 0, np.minimum(1.0, lam / (np.sqrt(3.0) * absz)), 1.0)
    a_eq = np.vstack([z, z * z, np.ones_like(z)])
    b_eq = np.array([0.0, 1.0, 1.0])
    res = linprog(cover, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise UncertaintyError(f"coverage oracle LP failed: {res.message}")
    return float(res.fun)
