"""p-ball geometry: volumes, unit-volume radii, sampling, volume ratios.

All volume arithmetic happens in log space through log-gamma; dimensions up
to a few thousand overflow direct gamma evaluation.  Volume ratios of the
form vol(ball intersect region)/vol(ball) are estimated by uniform rejection
counting, which for the unit-volume Euclidean ball coincides with the
intersection volume itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import InvalidInputError
from .hypotests import _p_norm_rows
from .mc import ProportionEstimate, estimate_proportion
from .rng import RngStream


@dataclass(frozen=True)
class BallSpec:
    d: int
    p: float
    r: float

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError("dimension must be positive")
        if not self.p > 0:
            raise InvalidInputError("p must be positive")
        if not self.r > 0:
            raise InvalidInputError("radius must be positive")


@dataclass(frozen=True)
class VolumeEstimate:
    """Exact or Monte-Carlo answer to a volume question.

    For exact answers the error fields are zero and n is None.  Monte-Carlo
    ratio estimates carry a Wilson 95% interval.
    """

    value: float
    is_exact: bool
    n: Optional[int] = None
    standard_error: float = 0.0
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None

    @classmethod
    def from_proportion(cls, est: ProportionEstimate) -> "VolumeEstimate":
        return cls(
            value=est.estimate,
            is_exact=False,
            n=est.n,
            standard_error=est.standard_error,
            ci_lower=est.ci_lower,
            ci_upper=est.ci_upper,
        )


def pball_log_volume(d: int, p: float, r: float) -> float:
    """Natural log of the volume of the d-dimensional p-ball of radius r."""
    BallSpec(d, p, r)
    if math.isinf(p):
        return d * math.log(2.0 * r)
    return (
        d * (math.log(2.0) + gammaln(1.0 + 1.0 / p))
        - gammaln(1.0 + d / p)
        + d * math.log(r)
    )


def unit_volume_radius(d: int, p: float) -> float:
    """Radius e_{d,p} making the d-dimensional p-ball have volume exactly 1."""
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    if not p > 0:
        raise InvalidInputError("p must be positive")
    if math.isinf(p):
        return 0.5
    return math.exp(gammaln(1.0 + d / p) / d - math.log(2.0) - gammaln(1.0 + 1.0 / p))


def scaling_factor_u(d: int, p: float):
    """Scaling factor u_d = (e_{d,2}/e_{d,p}) * d^(1/(2p) - 1/4) and its
    analytic gamma-ratio lower bound (d/p)^(1/2-1/p) * Gamma(1/p+1)/Gamma(3/2)
    * d^(1/(2p) - 1/4).

    For p = 2 the factor is exactly 1.
    """
    if math.isinf(p):
        raise InvalidInputError("scaling factor is defined for finite p")
    if not p > 0:
        raise InvalidInputError("p must be positive")
    expo = 1.0 / (2.0 * p) - 0.25
    if p == 2.0:
        return 1.0, 1.0
    log_ratio = (
        (gammaln(1.0 + d / 2.0) - gammaln(1.0 + d / p)) / d
        + gammaln(1.0 / p + 1.0)
        - gammaln(1.5)
    )
    u = math.exp(log_ratio + expo * math.log(d))
    lower = math.exp(
        (0.5 - 1.0 / p) * math.log(d / p)
        + gammaln(1.0 / p + 1.0)
        - gammaln(1.5)
        + expo * math.log(d)
    )
    return u, lower


# ---------------------------------------------------------------------------
# uniform sampling


def sphere_samples(d: int, r: float, m: int, stream: RngStream) -> np.ndarray:
    """m uniform samples on the Euclidean sphere of radius r, as rows."""
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    Z = stream.normals((m, d))
    norms = np.linalg.norm(Z, axis=1)
    # an all-zero Gaussian row has probability zero; redraw just in case
    attempt = 0
    while np.any(norms == 0.0):
        bad = norms == 0.0
        Z[bad] = stream.substream(10_000 + attempt).normals((int(bad.sum()), d))
        norms = np.linalg.norm(Z, axis=1)
        attempt += 1
    return Z * (r / norms)[:, None]


def ball_samples(d: int, r: float, m: int, stream: RngStream) -> np.ndarray:
    """m uniform samples in the Euclidean ball of radius r, as rows."""
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    S = sphere_samples(d, r, m, stream.substream(0))
    u = stream.substream(1).uniforms(m)
    return S * (u ** (1.0 / d))[:, None]


def sample_uniform_sphere(d: int, r: float, rng: RngStream) -> np.ndarray:
    """One uniform sample on the sphere of radius r."""
    return sphere_samples(d, r, 1, rng)[0]


def sample_uniform_ball(d: int, r: float, rng: RngStream) -> np.ndarray:
    """One uniform sample in the ball of radius r (sphere point scaled by U^(1/d))."""
    return ball_samples(d, r, 1, rng)[0]


# ---------------------------------------------------------------------------
# volume ratios by rejection counting


def intersection_volume_ratio(
    d: int, p: float, t: float, n: int, rng: RngStream, workers: int = 1
) -> VolumeEstimate:
    """vol(B_2^d(e_{d,2}) intersect t * B_p^d(e_{d,p})) by uniform counting.

    Since the Euclidean ball of radius e_{d,2} has volume 1, the fraction of
    its uniform samples with p-norm <= t * e_{d,p} is the intersection volume.
    """
    if t < 0:
        raise InvalidInputError("t must be nonnegative")
    if n < 1000:
        raise InvalidInputError("need at least 1000 samples")
    r2 = unit_volume_radius(d, 2.0)
    threshold = t * unit_volume_radius(d, p)

    def count(stream: RngStream, m: int) -> int:
        X = ball_samples(d, r2, m, stream)
        return int(np.count_nonzero(_p_norm_rows(X, p) <= threshold))

    return VolumeEstimate.from_proportion(estimate_proportion(count, n, rng, workers))


def pnorm_threshold_fraction(
    d: int, p: float, r: float, s: float, n: int, rng: RngStream, workers: int = 1
) -> VolumeEstimate:
    """P(||X||_p >= s) for X uniform in the Euclidean ball of radius r."""
    if s < 0:
        raise InvalidInputError("threshold must be nonnegative")

    def count(stream: RngStream, m: int) -> int:
        X = ball_samples(d, r, m, stream)
        return int(np.count_nonzero(_p_norm_rows(X, p) >= s))

    return VolumeEstimate.from_proportion(estimate_proportion(count, n, rng, workers))


def pnorm_over_ball_upper_bound(d: int, p: float, r: float) -> float:
    """Norm-equivalence bound: max of ||x||_p over the Euclidean ball of radius r."""
    return r * d ** max(0.0, 1.0 / p - 0.5)


def threshold_fraction_quadrature(
    d: int, p: float, r: float, s: float, cells_per_axis: int = 400
) -> float:
    """Deterministic midpoint-grid value of pnorm_threshold_fraction, d <= 3.

    Independent brute-force oracle used to validate the Monte-Carlo estimator
    at small dimension before trusting large-d output.
    """
    if d > 3:
        raise InvalidInputError("grid quadrature supported for d <= 3 only")
    h = 2.0 * r / cells_per_axis
    axis = -r + h * (np.arange(cells_per_axis) + 0.5)
    if d == 1:
        pts = axis[:, None]
        in_ball = np.abs(pts[:, 0]) <= r
        region = _p_norm_rows(pts, p) >= s
        return float(np.count_nonzero(in_ball & region) / np.count_nonzero(in_ball))
    inside = 0
    hits = 0
    if d == 2:
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        nb = np.linalg.norm(pts, axis=1) <= r
        inside = int(np.count_nonzero(nb))
        hits = int(np.count_nonzero(nb & (_p_norm_rows(pts, p) >= s)))
    else:
        for x0 in axis:  # chunk over the first axis to bound memory
            Y, Z = np.meshgrid(axis, axis, indexing="ij")
            pts = np.column_stack([np.full(Y.size, x0), Y.ravel(), Z.ravel()])
            nb = np.linalg.norm(pts, axis=1) <= r
            inside += int(np.count_nonzero(nb))
            hits += int(np.count_nonzero(nb & (_p_norm_rows(pts, p) >= s)))
    if inside == 0:
        raise InvalidInputError("grid too coarse: no cells inside the ball")
    return hits / inside
