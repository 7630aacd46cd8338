"""Gaussian sequence model: observations, alternative families, diagnostics.

The model observes a single d-dimensional vector y = theta + z with z
standard normal.  Alternatives are generated by deterministic rules mapping a
dimension d to a mean vector, so that the same rule can be evaluated along a
grid of dimensions when studying consistency trends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .rng import RngStream

DEFAULT_D_GRID = tuple(2 ** k for k in range(4, 13))  # 16 .. 4096


@dataclass(frozen=True)
class ParameterPoint:
    """A mean vector theta in R^d."""

    d: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.d < 1:
            raise InvalidInputError("dimension must be a positive integer")
        if values.shape != (self.d,):
            raise InvalidInputError(
                f"values has shape {values.shape}, expected ({self.d},)"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("parameter vector must be finite")

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class AmplitudeRule:
    """Deterministic amplitude a(d) = c * d**d_exponent * (ln d)**log_power."""

    c: float = 1.0
    d_exponent: float = 0.0
    log_power: float = 0.0

    def __call__(self, d: int) -> float:
        a = self.c * d ** self.d_exponent
        if self.log_power != 0.0:
            a *= math.log(d) ** self.log_power
        return a


@dataclass(frozen=True)
class AlternativeRule:
    """Rule producing a mean vector for every dimension d.

    Families:
      zero          theta = 0
      dense         every coordinate equals amplitude(d)
      sparse_spike  the first k coordinates equal amplitude(d), rest zero
      custom        explicit vectors per dimension

    Signal positions are fixed at the leading coordinates; all statistics in
    this package are permutation invariant, so the position carries no
    information and fixing it keeps runs reproducible.
    """

    family: Literal["zero", "dense", "sparse_spike", "custom"]
    amplitude: AmplitudeRule = field(default_factory=AmplitudeRule)
    k: int = 1
    vectors: Optional[Mapping[int, Sequence[float]]] = None

    def __post_init__(self):
        if self.family not in ("zero", "dense", "sparse_spike", "custom"):
            raise InvalidInputError(f"unknown alternative family {self.family!r}")
        if self.family == "sparse_spike" and self.k < 1:
            raise InvalidInputError("sparse_spike needs k >= 1")
        if self.family == "custom" and not self.vectors:
            raise InvalidInputError("custom rule needs explicit vectors")


def realize_alternative(rule: AlternativeRule, d: int) -> ParameterPoint:
    """Evaluate an alternative rule at dimension d."""
    if d < 1:
        raise InvalidInputError("dimension must be a positive integer")
    if rule.family == "zero":
        return ParameterPoint(d, np.zeros(d))
    if rule.family == "dense":
        return ParameterPoint(d, np.full(d, rule.amplitude(d)))
    if rule.family == "sparse_spike":
        if rule.k > d:
            raise InvalidInputError(f"spike count k={rule.k} exceeds dimension d={d}")
        values = np.zeros(d)
        values[: rule.k] = rule.amplitude(d)
        return ParameterPoint(d, values)
    # custom
    if d not in rule.vectors:
        raise InvalidInputError(f"custom rule has no vector for d={d}")
    return ParameterPoint(d, np.asarray(rule.vectors[d], dtype=float))


def draw_observation(theta: ParameterPoint, rng: RngStream) -> np.ndarray:
    """One observation y = theta + z with z standard normal from rng."""
    return theta.values + rng.normals(theta.d)


@dataclass(frozen=True)
class ConsistencyDiagnostics:
    """Per-dimension values of the two consistency criteria.

    lr_criterion[i] = d^{-1/2} * ||theta_d||_2^2 drives the Euclidean test;
    p_criterion[i]  = d^{-1/2} * max(||theta_d||_2^2, ||theta_d||_p^p) drives
    the p-norm test.  A rule is classified by whether each sequence diverges
    along the grid.
    """

    d_grid: tuple
    p: float
    lr_criterion: np.ndarray
    p_criterion: np.ndarray


def consistency_diagnostics(
    rule: AlternativeRule, p: float, d_grid: Sequence[int] = DEFAULT_D_GRID
) -> ConsistencyDiagnostics:
    """Tabulate both consistency criteria for a rule along a dimension grid."""
    d_grid = tuple(int(d) for d in d_grid)
    if any(b <= a for a, b in zip(d_grid, d_grid[1:])):
        raise InvalidInputError("d_grid must be strictly increasing")
    if not (0 < p < math.inf):
        raise InvalidInputError("p must lie in (0, inf)")
    lr = np.empty(len(d_grid))
    pc = np.empty(len(d_grid))
    for i, d in enumerate(d_grid):
        theta = realize_alternative(rule, d).values
        l2sq = float(np.dot(theta, theta))
        lpp = float(np.sum(np.abs(theta) ** p))
        lr[i] = l2sq / math.sqrt(d)
        pc[i] = max(l2sq, lpp) / math.sqrt(d)
    return ConsistencyDiagnostics(d_grid, p, lr, pc)
