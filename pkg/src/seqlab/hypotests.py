"""Test statistics, critical-value calibration, and power estimation.

A test here is always an indicator test: reject iff the statistic is >= the
critical value (the rejection region is closed at the boundary; the boundary
has measure zero, so size is unaffected).  Supported statistics are p-norms
of the observation (p in (0, inf]), a Higher-Criticism statistic over sorted
two-sided p-values, and OR-combinations of two tests on the same dimension.

The exact power curve of the Euclidean-norm test against an alternative with
Euclidean norm r is available through :func:`lr_power_beta`, computed from a
Poisson-mixture series of central chi-square tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import erfc, gammaincc, gammainccinv, gammaln, ndtri
from scipy.stats import poisson

from .errors import (
    CalibrationInsufficientError,
    InvalidInputError,
    NumericFailureError,
)
from .mc import ProportionEstimate, estimate_proportion
from .model import ParameterPoint
from .rng import RngStream

PowerEstimate = ProportionEstimate


# ---------------------------------------------------------------------------
# statistics


def p_norm(x, p: float) -> float:
    """(sum |x_i|^p)^(1/p) for finite p, max |x_i| for p = inf.

    The largest entry is factored out before exponentiating so that large p
    does not overflow.
    """
    if not p > 0:
        raise InvalidInputError("p must be positive")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("input vector must be finite")
    return float(_p_norm_rows(x.reshape(1, -1), p)[0])


def _p_norm_rows(Y: np.ndarray, p: float) -> np.ndarray:
    """Row-wise p-norms of a 2-D array, overflow-safe via max factoring."""
    a = np.abs(Y)
    m = a.max(axis=1)
    if math.isinf(p):
        return m
    out = np.zeros_like(m)
    nz = m > 0
    if np.any(nz):
        scaled = a[nz] / m[nz, None]
        out[nz] = m[nz] * np.sum(scaled ** p, axis=1) ** (1.0 / p)
    return out


def _hc_rows(Y: np.ndarray) -> np.ndarray:
    """Row-wise Higher-Criticism statistics, floored at 0.

    Uses the normalized empirical-process form over the lower half of the
    sorted two-sided p-values p_(i) = 2(1 - Phi(|y_i|)).
    """
    d = Y.shape[1]
    if d < 2:
        raise InvalidInputError("higher criticism needs dimension >= 2")
    pv = erfc(np.abs(Y) / math.sqrt(2.0))
    pv.sort(axis=1)
    m = d // 2
    ps = np.clip(pv[:, :m], 1e-300, 1.0 - 1e-16)
    i_over_d = np.arange(1, m + 1) / d
    z = math.sqrt(d) * (i_over_d - ps) / np.sqrt(ps * (1.0 - ps))
    return np.maximum(z.max(axis=1), 0.0)


def higher_criticism_statistic(y) -> float:
    """Higher-Criticism statistic of a single observation vector."""
    y = np.asarray(y, dtype=float)
    return float(_hc_rows(y.reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# test specifications


@dataclass(frozen=True)
class PNormFamily:
    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise InvalidInputError("p must be positive")

    def label(self) -> str:
        return "p_norm(inf)" if math.isinf(self.p) else f"p_norm({self.p:g})"


@dataclass(frozen=True)
class HigherCriticismFamily:
    def label(self) -> str:
        return "higher_criticism"


@dataclass(frozen=True)
class TestSpec:
    """A concrete test: statistic family, dimension, critical value, size."""

    family: Union[PNormFamily, HigherCriticismFamily, "CombinedFamily"]
    d: int
    critical_value: float
    alpha: float
    calibration_method: str
    achieved_size: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError("dimension must be positive")
        if not (0 <= self.alpha <= 1):
            raise InvalidInputError("alpha must lie in [0, 1]")

    @property
    def size(self) -> float:
        """Best available size: the estimated one if recorded, else nominal."""
        return self.alpha if self.achieved_size is None else self.achieved_size


@dataclass(frozen=True)
class CombinedFamily:
    """OR-combination of two tests sharing the same dimension."""

    primary: TestSpec
    enhancement: TestSpec

    def __post_init__(self):
        if self.primary.d != self.enhancement.d:
            raise InvalidInputError("combined tests must share the dimension")

    def label(self) -> str:
        return f"combined({self.primary.family.label()},{self.enhancement.family.label()})"


def combine(primary: TestSpec, enhancement: TestSpec) -> TestSpec:
    """OR rule: reject iff either component rejects.

    The nominal size is the union bound of the component sizes.
    """
    if primary.d != enhancement.d:
        raise InvalidInputError("combined tests must share the dimension")
    return TestSpec(
        family=CombinedFamily(primary, enhancement),
        d=primary.d,
        critical_value=math.nan,
        alpha=min(1.0, primary.alpha + enhancement.alpha),
        calibration_method="composite",
    )


def _reject_rows(spec: TestSpec, Y: np.ndarray) -> np.ndarray:
    fam = spec.family
    if isinstance(fam, CombinedFamily):
        return _reject_rows(fam.primary, Y) | _reject_rows(fam.enhancement, Y)
    if isinstance(fam, PNormFamily):
        stats = _p_norm_rows(Y, fam.p)
    elif isinstance(fam, HigherCriticismFamily):
        stats = _hc_rows(Y)
    else:
        raise InvalidInputError(f"unknown family {fam!r}")
    return stats >= spec.critical_value


def evaluate(spec: TestSpec, y) -> int:
    """Rejection indicator of the test at a single observation."""
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.d,):
        raise InvalidInputError(f"observation has shape {y.shape}, expected ({spec.d},)")
    return int(_reject_rows(spec, y.reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# calibration


def normal_abs_moment(p: float) -> float:
    """E|Z|^p for standard normal Z: 2^(p/2) Gamma((p+1)/2) / sqrt(pi)."""
    return math.exp(0.5 * p * math.log(2.0) + gammaln((p + 1) / 2) - 0.5 * math.log(math.pi))


def chi_square_quantile(d: int, alpha: float) -> float:
    """Upper-alpha quantile of the central chi-square with d degrees of freedom."""
    if not (0 < alpha < 1):
        raise InvalidInputError("alpha must lie in (0, 1)")
    return float(2.0 * gammainccinv(d / 2.0, alpha))


@dataclass(frozen=True)
class CalibrationResult:
    critical_value: float
    method: str
    alpha: float
    d: int
    n: Optional[int] = None
    error: float = 0.0  # reported calibration error on the statistic scale


def calibrate_critical_value(
    family,
    d: int,
    alpha: float,
    method: str,
    rng: Optional[RngStream] = None,
    n: Optional[int] = None,
    workers: int = 1,
) -> CalibrationResult:
    """Critical value kappa with null rejection probability alpha.

    method "exact" is available for the p = 2 and p = inf norms; "clt_approx"
    for finite-p norms; "monte_carlo" for any single-statistic family (needs
    rng and n).  Monte-Carlo uses the linearly interpolated empirical
    (1-alpha)-quantile of n null statistics.
    """
    if not (0 < alpha < 1):
        raise InvalidInputError("alpha must lie in (0, 1)")
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    if isinstance(family, CombinedFamily):
        raise InvalidInputError("combined tests are calibrated via their components")

    if method == "exact":
        if not isinstance(family, PNormFamily):
            raise InvalidInputError("exact calibration exists only for p-norm tests")
        if math.isinf(family.p):
            # P(max |Z_i| < k) = (2 Phi(k) - 1)^d = 1 - alpha
            root = math.exp(math.log1p(-alpha) / d)
            kappa = float(ndtri((1.0 + root) / 2.0))
            return CalibrationResult(kappa, method, alpha, d)
        if family.p == 2.0:
            kappa = math.sqrt(chi_square_quantile(d, alpha))
            return CalibrationResult(kappa, method, alpha, d)
        raise InvalidInputError("exact calibration available only for p in {2, inf}")

    if method == "clt_approx":
        if not isinstance(family, PNormFamily) or math.isinf(family.p):
            raise InvalidInputError("clt_approx applies to finite-p norm tests only")
        p = family.p
        mu = normal_abs_moment(p)
        m2 = normal_abs_moment(2 * p)
        m3 = normal_abs_moment(3 * p)
        var = m2 - mu * mu
        sigma = math.sqrt(var)
        z = float(ndtri(1.0 - alpha))
        q = d * mu + z * sigma * math.sqrt(d)
        if q <= 0:
            raise NumericFailureError("normal approximation gives nonpositive quantile")
        kappa = q ** (1.0 / p)
        # Cornish-Fisher skewness term, reported as the approximation error.
        skew = (m3 - 3 * mu * m2 + 2 * mu ** 3) / sigma ** 3
        dq = abs(sigma * skew * (z * z - 1.0) / 6.0)
        err = dq * q ** (1.0 / p - 1.0) / p
        return CalibrationResult(kappa, method, alpha, d, error=err)

    if method == "monte_carlo":
        if rng is None or n is None:
            raise InvalidInputError("monte_carlo calibration needs rng and n")
        tail = min(alpha, 1.0 - alpha)
        if n * tail < 20:
            raise CalibrationInsufficientError(
                f"n={n} too small for alpha={alpha}: need n*min(alpha,1-alpha) >= 20"
            )
        stats = _null_statistics(family, d, n, rng, workers)
        kappa = float(np.quantile(stats, 1.0 - alpha, method="linear"))
        # quantile standard error via the empirical density around kappa
        delta = min(tail / 2.0, 0.05)
        q_hi = float(np.quantile(stats, min(1.0 - alpha + delta, 1.0), method="linear"))
        q_lo = float(np.quantile(stats, max(1.0 - alpha - delta, 0.0), method="linear"))
        spacing = (q_hi - q_lo) / (2.0 * delta)
        err = math.sqrt(alpha * (1 - alpha) / n) * spacing
        return CalibrationResult(kappa, method, alpha, d, n=n, error=err)

    raise InvalidInputError(f"unknown calibration method {method!r}")


def _null_statistics(family, d, n, rng, workers=1):
    from .rng import chunk_sizes

    chunks = chunk_sizes(n)

    def one(args):
        i, m = args
        Y = rng.substream(i).normals((m, d))
        if isinstance(family, PNormFamily):
            return _p_norm_rows(Y, family.p)
        return _hc_rows(Y)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, chunks))
    else:
        parts = [one(c) for c in chunks]
    return np.concatenate(parts)


def make_test(
    family,
    d: int,
    alpha: float,
    method: str = "exact",
    rng: Optional[RngStream] = None,
    n: Optional[int] = None,
    size_check_n: Optional[int] = None,
    workers: int = 1,
) -> TestSpec:
    """Calibrate a test and wrap it into a TestSpec.

    When size_check_n is given, the achieved size is estimated from a fresh
    null sample and recorded on the spec; power-comparison routines then use
    it in place of the nominal level.
    """
    cal = calibrate_critical_value(family, d, alpha, method, rng, n, workers)
    spec = TestSpec(family, d, cal.critical_value, alpha, method)
    if size_check_n is not None:
        if rng is None:
            raise InvalidInputError("size check needs an rng")
        # distinct substream so the size check is independent of calibration
        est = estimate_size(spec, size_check_n, rng.substream(1_000_003), workers)
        spec = TestSpec(family, d, cal.critical_value, alpha, method, achieved_size=est.estimate)
    return spec


def estimate_power(
    spec: TestSpec,
    theta: ParameterPoint,
    n: int,
    rng: RngStream,
    workers: int = 1,
) -> PowerEstimate:
    """Empirical rejection frequency of a test over n independent draws."""
    if theta.d != spec.d:
        raise InvalidInputError("theta dimension does not match the test")
    if n < 100:
        raise InvalidInputError("need at least 100 replications")
    mean = theta.values

    def count(stream: RngStream, m: int) -> int:
        Y = mean + stream.normals((m, spec.d))
        return int(np.count_nonzero(_reject_rows(spec, Y)))

    return estimate_proportion(count, n, rng, workers)


def estimate_size(spec: TestSpec, n: int, rng: RngStream, workers: int = 1) -> PowerEstimate:
    """Empirical null rejection frequency (power at theta = 0)."""
    zero = ParameterPoint(spec.d, np.zeros(spec.d))
    return estimate_power(spec, zero, n, rng, workers)


# ---------------------------------------------------------------------------
# exact Euclidean-test power


def noncentral_chi2_sf(x: float, df: int, nc: float, tol: float = 1e-12) -> float:
    """P(X > x) for X noncentral chi-square(df, nc), by the Poisson mixture.

    The mixture sum_k Pois(k; nc/2) * P(chi2_{df+2k} > x) is evaluated over a
    window of k around the Poisson mode wide enough that the excluded weight
    is below tol; since each tail probability is <= 1, the truncation error
    is below tol as well.
    """
    if df < 1:
        raise InvalidInputError("df must be positive")
    if nc < 0:
        raise InvalidInputError("noncentrality must be nonnegative")
    if x <= 0:
        return 1.0
    if nc == 0:
        return float(gammaincc(df / 2.0, x / 2.0))
    lam = nc / 2.0
    pad = tol / 10.0
    k_lo = int(poisson.ppf(pad, lam)) if lam > 1 else 0
    k_hi = int(poisson.isf(pad, lam)) + 1
    for _ in range(4):
        if k_hi - k_lo > 2_000_000:
            raise NumericFailureError(
                f"Poisson window too wide at nc={nc}: {k_hi - k_lo} terms"
            )
        k = np.arange(k_lo, k_hi + 1)
        logw = k * math.log(lam) - lam - gammaln(k + 1)
        w = np.exp(logw)
        missing = 1.0 - float(w.sum())
        # the log terms have magnitude ~lam*ln(lam), so exp() carries a
        # relative rounding error of that scale times eps; a deficit within
        # it is roundoff, not truncation, and renormalizing removes it
        rounding = lam * max(1.0, math.log(lam)) * 1e-14
        if missing <= max(tol, rounding):
            if missing > tol:
                w = w / w.sum()
            sf = gammaincc(df / 2.0 + k, x / 2.0)
            return float(min(1.0, max(0.0, float(w @ sf))))
        k_lo = max(0, k_lo - (k_hi - k_lo) // 2 - 8)
        k_hi = k_hi + (k_hi - k_lo) // 2 + 8
    raise NumericFailureError(
        f"Poisson mixture failed to cover weight 1-{tol} at nc={nc} (missing {missing:g})"
    )


def lr_power_beta(d: int, alpha: float, r: float) -> float:
    """Power of the size-alpha Euclidean-norm test at Euclidean distance r.

    Rotationally invariant: the value depends on the alternative only through
    its Euclidean norm.  At r = 0 this returns alpha exactly.
    """
    if not (0 < alpha < 1):
        raise InvalidInputError("alpha must lie in (0, 1)")
    if r < 0:
        raise InvalidInputError("r must be nonnegative")
    c = chi_square_quantile(d, alpha)
    return noncentral_chi2_sf(c, d, r * r)
