import math

import numpy as np
import pytest

from seqlab.errors import InvalidInputError
from seqlab.model import (
    AlternativeRule,
    AmplitudeRule,
    ParameterPoint,
    consistency_diagnostics,
    draw_observation,
    realize_alternative,
)
from seqlab.rng import RngStream


def test_parameter_point_validation():
    with pytest.raises(InvalidInputError):
        ParameterPoint(3, [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        ParameterPoint(2, [1.0, np.inf])


def test_spike_realization():
    rule = AlternativeRule("sparse_spike", AmplitudeRule(c=2.5), k=1)
    theta = realize_alternative(rule, 8)
    assert np.array_equal(theta.values, [2.5, 0, 0, 0, 0, 0, 0, 0])


def test_dense_realization():
    rule = AlternativeRule("dense", AmplitudeRule(c=1.0))
    theta = realize_alternative(rule, 4)
    assert np.array_equal(theta.values, np.ones(4))
    assert theta.l2_norm ** 2 == pytest.approx(4.0)


def test_spike_scaling_amplitude():
    # amplitude d^(1/8) * ln d at d = 16; value frozen from mpmath
    rule = AlternativeRule("sparse_spike", AmplitudeRule(c=1.0, d_exponent=0.125, log_power=1.0))
    theta = realize_alternative(rule, 16)
    assert theta.values[0] == pytest.approx(3.9210325738741888, rel=1e-14)
    assert np.count_nonzero(theta.values) == 1


def test_spike_count_exceeding_dimension():
    rule = AlternativeRule("sparse_spike", AmplitudeRule(1.0), k=5)
    with pytest.raises(InvalidInputError):
        realize_alternative(rule, 4)


def test_custom_rule():
    rule = AlternativeRule("custom", vectors={3: [1.0, 2.0, 3.0]})
    assert np.array_equal(realize_alternative(rule, 3).values, [1, 2, 3])
    with pytest.raises(InvalidInputError):
        realize_alternative(rule, 4)


def test_draw_observation_deterministic():
    theta = realize_alternative(AlternativeRule("zero"), 50)
    rng = RngStream(404, 3)
    assert np.array_equal(draw_observation(theta, rng), draw_observation(theta, rng))


def test_draw_observation_mean():
    # CLT oracle on the sample mean of the first coordinate
    theta = ParameterPoint(4, [5.0, 0.0, 0.0, 0.0])
    rng = RngStream(21)
    n = 100000
    draws = theta.values + rng.normals((n, 4))
    assert abs(draws[:, 0].mean() - 5.0) < 4.0 / math.sqrt(n)


def test_draw_observation_variance():
    # chi-square concentration oracle on the per-coordinate variance
    theta = realize_alternative(AlternativeRule("zero"), 10000)
    y = draw_observation(theta, RngStream(22))
    assert 0.95 <= y.var() <= 1.05


def test_diagnostics_zero_rule():
    diag = consistency_diagnostics(AlternativeRule("zero"), p=4.0, d_grid=[16, 32, 64])
    assert np.all(diag.lr_criterion == 0)
    assert np.all(diag.p_criterion == 0)


def test_diagnostics_dense_rule():
    diag = consistency_diagnostics(AlternativeRule("dense", AmplitudeRule(1.0)), 4.0, [16, 64, 256])
    assert np.allclose(diag.lr_criterion, np.sqrt([16, 64, 256]), rtol=1e-12)


def test_diagnostics_boundary_spike():
    # amplitude d^(1/4): the Euclidean criterion sticks at 1 while the p = 4
    # criterion a^4/sqrt(d) = sqrt(d) diverges (a superconsistency point)
    rule = AlternativeRule("sparse_spike", AmplitudeRule(1.0, d_exponent=0.25))
    grid = [16, 256, 4096]
    diag = consistency_diagnostics(rule, 4.0, grid)
    assert np.allclose(diag.lr_criterion, 1.0, rtol=1e-12)
    assert np.allclose(diag.p_criterion, np.sqrt(grid), rtol=1e-12)


def test_diagnostics_superconsistency_spike():
    # amplitude d^(1/(2p)) * ln d: p-criterion (ln d)^4 diverges while the
    # Euclidean criterion (ln d)^2/d^(1/4) -> 0 (slowly; assert the ratio)
    rule = AlternativeRule("sparse_spike", AmplitudeRule(1.0, d_exponent=1 / 8, log_power=1.0))
    grid = [16, 64, 256, 1024, 4096]
    diag = consistency_diagnostics(rule, 4.0, grid)
    expected_p = [math.log(d) ** 4 for d in grid]
    assert np.allclose(diag.p_criterion, expected_p, rtol=1e-12)
    assert np.all(np.diff(diag.p_criterion) > 0)
    ratio = diag.lr_criterion / diag.p_criterion
    assert np.all(np.diff(ratio) < 0) and ratio[-1] < 0.2


def test_diagnostics_dominance_and_recomputation():
    grid = [16, 64, 256]
    for rule in [
        AlternativeRule("dense", AmplitudeRule(0.3, d_exponent=-0.25)),
        AlternativeRule("sparse_spike", AmplitudeRule(2.0, d_exponent=0.1), k=3),
    ]:
        for p in (0.5, 1.0, 3.0, 4.0):
            diag = consistency_diagnostics(rule, p, grid)
            assert np.all(diag.p_criterion >= diag.lr_criterion)
            assert np.all(diag.lr_criterion >= 0)
            for i, d in enumerate(grid):
                theta = realize_alternative(rule, d).values
                lr = np.dot(theta, theta) / math.sqrt(d)
                pc = max(np.dot(theta, theta), np.sum(np.abs(theta) ** p)) / math.sqrt(d)
                assert diag.lr_criterion[i] == pytest.approx(lr, rel=1e-12)
                assert diag.p_criterion[i] == pytest.approx(pc, rel=1e-12)


def test_diagnostics_requires_increasing_grid():
    with pytest.raises(InvalidInputError):
        consistency_diagnostics(AlternativeRule("zero"), 2.0, [16, 16, 32])
