"""Excess-power regions on spheres and the concentration bound they obey.

The central object is the region of sphere points where a candidate test
beats the Euclidean-norm test's exact power curve by more than a margin
epsilon.  Its measure under the uniform sphere distribution is estimated by
a nested Monte-Carlo loop and compared against the non-asymptotic bound
2 * exp(-eps^2 (d-1) / (2 r^2)).

Because true power is unobservable, the nested estimator only counts a
sphere point when its inner power estimate clears the threshold by a
configurable number of inner standard errors; the count is therefore a
conservative (downward-biased) estimate of the region measure.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationInvalidError, InvalidInputError
from .geometry import pnorm_threshold_fraction, sphere_samples
from .hypotests import TestSpec, estimate_power, lr_power_beta
from .mc import ProportionEstimate, estimate_proportion, wilson_interval
from .model import ParameterPoint
from .rng import RngStream


def concentration_bound(d: int, r: float, eps: float) -> float:
    """2 * exp(-eps^2 (d-1) / (2 r^2)), capped at 1 for reporting."""
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    if not eps > 0:
        raise InvalidInputError("margin must be positive")
    return min(1.0, 2.0 * math.exp(-eps * eps * (d - 1) / (2.0 * r * r)))


@dataclass(frozen=True)
class ExcessPowerQuery:
    """Inputs for measuring the excess-power region of a test on a sphere."""

    d: int
    r: float
    epsilon: float
    test: TestSpec
    outer_n: int
    inner_n: int
    decision_margin: float = 2.0

    def __post_init__(self):
        if self.test.d != self.d:
            raise InvalidInputError("test dimension does not match the query")
        if not (0 < self.epsilon < 1):
            raise InvalidInputError("epsilon must lie in (0, 1)")
        if self.decision_margin < 0:
            raise InvalidInputError("decision margin must be nonnegative")
        # inner noise must sit well below the margin
        if 3.0 / math.sqrt(self.inner_n) > self.epsilon / 4.0:
            raise InvalidInputError(
                f"inner_n={self.inner_n} too small: need 3/sqrt(inner_n) <= epsilon/4"
            )


def excess_power_region_measure(q: ExcessPowerQuery, rng: RngStream, workers: int = 1) -> ProportionEstimate:
    """Uniform-sphere measure of the region where q.test beats the exact
    Euclidean-test power at radius q.r by more than q.epsilon.

    A point counts only when its inner power estimate exceeds the threshold
    by decision_margin inner standard errors, making the estimate
    conservative.
    """
    beta = lr_power_beta(q.d, q.test.size, q.r)
    outer = rng.substream(0)
    inner = rng.substream(1)

    def one(i: int) -> int:
        theta = ParameterPoint(q.d, sphere_samples(q.d, q.r, 1, outer.substream(i))[0])
        est = estimate_power(q.test, theta, q.inner_n, inner.substream(i))
        threshold = beta + q.epsilon + q.decision_margin * est.standard_error
        return 1 if est.estimate > threshold else 0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            hits = sum(ex.map(one, range(q.outer_n)))
    else:
        hits = sum(one(i) for i in range(q.outer_n))
    phat = hits / q.outer_n
    se = math.sqrt(phat * (1 - phat) / q.outer_n)
    lo, hi = wilson_interval(hits, q.outer_n)
    return ProportionEstimate(phat, q.outer_n, se, lo, hi, rng.seed, rng.stream_id)


@dataclass(frozen=True)
class BoundReport:
    """Measured region mass against the analytic concentration bound."""

    d: int
    estimate: float
    ci_lower: float
    ci_upper: float
    n: int
    epsilon: float
    r: float
    analytic_bound: float
    slack: float
    passed: bool


def make_bound_report(d, estimate, ci_lower, ci_upper, n, epsilon, r, slack=0.0) -> BoundReport:
    bound = concentration_bound(d, r, epsilon)
    return BoundReport(
        d=d,
        estimate=estimate,
        ci_lower=ci_lower,
        ci_upper=ci_upper,
        n=n,
        epsilon=epsilon,
        r=r,
        analytic_bound=bound,
        slack=slack,
        passed=ci_upper <= bound + slack,
    )


def verify_theorem3(
    p: float,
    d_grid: Sequence[int],
    alpha: float,
    r_of_d: Callable[[int], float],
    s_of_d: Callable[[int], float],
    n: int,
    rng: RngStream,
    slack: float = 0.0,
    workers: int = 1,
):
    """Relative-volume check of the collapse rate along a dimension grid.

    The candidate superconsistency region inside the ball of radius r_d is
    the p-norm threshold set {x : ||x||_p >= s_d}; its relative volume is
    measured by rejection counting and compared to the bound evaluated with
    the margin epsilon = (1 - max over the grid of the exact Euclidean-test
    power at r_d) / 2, the finite-grid surrogate of the limsup construction.
    """
    d_grid = [int(d) for d in d_grid]
    if any(b <= a for a, b in zip(d_grid, d_grid[1:])):
        raise InvalidInputError("d_grid must be strictly increasing")
    r_vals = [r_of_d(d) for d in d_grid]
    s_vals = [s_of_d(d) for d in d_grid]
    if any(s <= 0 for s in s_vals):
        raise ConfigurationInvalidError(
            "threshold region must exclude a neighborhood of the origin (s_d > 0)"
        )
    # premise: the region's weakest points (p-norm exactly s_d) must have a
    # diverging p-norm consistency criterion along the grid
    crit = [max(s * s, s ** p) / math.sqrt(d) for d, s in zip(d_grid, s_vals)]
    if len(crit) > 1 and (crit[-1] <= crit[0] or any(b < a for a, b in zip(crit, crit[1:]))):
        raise ConfigurationInvalidError(
            "threshold rule is not inside the test's consistency set on this grid"
        )
    beta_max = max(lr_power_beta(d, alpha, r) for d, r in zip(d_grid, r_vals))
    epsilon = (1.0 - beta_max) / 2.0
    if epsilon <= 0:
        raise ConfigurationInvalidError(
            "Euclidean-test power reaches 1 on the grid; r_d/d^(1/4) is unbounded"
        )
    reports = []
    for i, d in enumerate(d_grid):
        frac = pnorm_threshold_fraction(d, p, r_vals[i], s_vals[i], n, rng.substream(i), workers)
        reports.append(
            make_bound_report(
                d, frac.value, frac.ci_lower, frac.ci_upper, n, epsilon, r_vals[i], slack
            )
        )
    return reports


@dataclass(frozen=True)
class WapEstimate:
    """Sphere-averaged power with a standard error combining both loops."""

    estimate: float
    standard_error: float
    outer_n: int
    inner_n: int


def wap_average_power(
    test: TestSpec, d: int, r: float, outer_n: int, inner_n: int, rng: RngStream, workers: int = 1
) -> WapEstimate:
    """Average power of a test over the uniform sphere of radius r.

    The spread of per-point inner estimates already contains the inner
    Monte-Carlo noise, so their standard error over outer points is the
    combined (outer + inner) standard error.
    """
    if test.d != d:
        raise InvalidInputError("test dimension mismatch")
    outer = rng.substream(0)
    inner = rng.substream(1)

    def one(i: int) -> float:
        theta = ParameterPoint(d, sphere_samples(d, r, 1, outer.substream(i))[0])
        return estimate_power(test, theta, inner_n, inner.substream(i)).estimate

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = np.fromiter(ex.map(one, range(outer_n)), dtype=float, count=outer_n)
    else:
        vals = np.fromiter((one(i) for i in range(outer_n)), dtype=float, count=outer_n)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(outer_n)) if outer_n > 1 else float("inf")
    return WapEstimate(est, se, outer_n, inner_n)


@dataclass(frozen=True)
class LipschitzReport:
    delta_power: float
    bound: float
    standard_error: float
    passed: bool


def lipschitz_power_check(
    test: TestSpec,
    theta1: ParameterPoint,
    theta2: ParameterPoint,
    inner_n: int,
    rng: RngStream,
    se_multiple: float = 4.0,
) -> LipschitzReport:
    """Check |power(theta1) - power(theta2)| <= ||theta1 - theta2||_2 / 2,
    up to se_multiple combined Monte-Carlo standard errors."""
    if theta1.d != theta2.d:
        raise InvalidInputError("points must share the dimension")
    p1 = estimate_power(test, theta1, inner_n, rng.substream(0))
    p2 = estimate_power(test, theta2, inner_n, rng.substream(1))
    diff = abs(p1.estimate - p2.estimate)
    se = math.sqrt(p1.standard_error ** 2 + p2.standard_error ** 2)
    bound = float(np.linalg.norm(theta1.values - theta2.values)) / 2.0
    return LipschitzReport(diff, bound, se, diff <= bound + se_multiple * se)


@dataclass(frozen=True)
class MonotonicityReport:
    a_grid: tuple
    values: tuple
    nondecreasing: bool


def spherical_bayes_statistic_monotonicity(
    d: int, r: float, a_grid: Sequence[float], n: int, rng: RngStream
) -> MonotonicityReport:
    """Monte-Carlo check that a -> E[cosh(a * gamma_1)] is nondecreasing,
    gamma uniform on the sphere of radius r.

    The symmetrized integrand cosh replaces exp(a * gamma_1); the two have
    the same sphere average and cosh makes monotonicity pathwise under
    common random numbers, which are shared across all grid points.
    """
    a_grid = [float(a) for a in a_grid]
    if any(b <= a for a, b in zip(a_grid, a_grid[1:])):
        raise InvalidInputError("a_grid must be strictly increasing")
    gamma1 = sphere_samples(d, r, n, rng)[:, 0]
    values = [float(np.cosh(a * gamma1).mean()) for a in a_grid]
    nondec = all(b >= a for a, b in zip(values, values[1:]))
    return MonotonicityReport(tuple(a_grid), tuple(values), nondec)
