"""Acceptance suite: ten numbered criteria, one printed verdict line each.

Run with `pytest -s tests/test_acceptance.py` to see the verdict lines.
Budgets are sized so the whole suite finishes in well under an hour on one
desktop core; every Monte-Carlo check states its tolerance in standard
errors or as an explicit band.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from seqlab import geometry as geo
from seqlab import hypotests as ht
from seqlab import superconsistency as sc
from seqlab.experiments import parse_config, run_experiment
from seqlab.model import ParameterPoint
from seqlab.rng import RngStream

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _verdict(tag: str, ok: bool, detail: str = ""):
    line = f"[{tag}] {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def test_ac1_exact_calibration_regression():
    worst = 0.0
    for d, expect in [
        (1, 1.9599639845400542),
        (10, 2.7996252193010964),
        (100, 3.4739788691540483),
    ]:
        cal = ht.calibrate_critical_value(ht.PNormFamily(math.inf), d, 0.05, "exact")
        worst = max(worst, abs(cal.critical_value - expect))
    cal2 = ht.calibrate_critical_value(ht.PNormFamily(2.0), 2, 0.05, "exact")
    worst = max(worst, abs(cal2.critical_value - 2.4477468306808165))
    _verdict("AC1 exact calibration regression", worst < 1e-9, f"max abs dev {worst:.3g}")


def test_ac2_lr_power_oracle():
    rng = RngStream(201)
    n = 100000
    worst = 0.0
    i = 0
    for d in (16, 128, 1024):
        spec_cache = {a: ht.make_test(ht.PNormFamily(2.0), d, a) for a in (0.01, 0.05, 0.1)}
        for alpha, spec in spec_cache.items():
            for r in (1.0, 3.0, 6.0):
                theta = ParameterPoint(d, np.r_[r, np.zeros(d - 1)])
                est = ht.estimate_power(spec, theta, n, rng.substream(i), workers=4)
                i += 1
                oracle = ht.lr_power_beta(d, alpha, r)
                dev = abs(est.estimate - oracle) / max(est.standard_error, 1e-12)
                worst = max(worst, dev)
    _verdict("AC2 LR power oracle (3x3x3 grid)", worst <= 4.0, f"worst dev {worst:.2f} se")


def test_ac3_theorem1_trend():
    rng = RngStream(301)
    n = 20000
    d_grid = [16, 32, 64, 128, 256, 512, 1024, 2048, 4096]
    boundary_ok = True
    growing = []
    worst = 0.0
    for i, d in enumerate(d_grid):
        spec = ht.make_test(ht.PNormFamily(2.0), d, 0.05)
        # boundary rule: squared norm sqrt(d), power pinned to its oracle
        r_b = d ** 0.25
        theta_b = ParameterPoint(d, np.r_[r_b, np.zeros(d - 1)])
        est_b = ht.estimate_power(spec, theta_b, n, rng.substream(2 * i), workers=4)
        dev = abs(est_b.estimate - ht.lr_power_beta(d, 0.05, r_b)) / est_b.standard_error
        worst = max(worst, dev)
        boundary_ok &= dev <= 4.0
        # growing rule: squared norm sqrt(d) * ln d
        r_g = (math.sqrt(d) * math.log(d)) ** 0.5
        theta_g = ParameterPoint(d, np.r_[r_g, np.zeros(d - 1)])
        growing.append(
            ht.estimate_power(spec, theta_g, n, rng.substream(2 * i + 1), workers=4).estimate
        )
    monotone = all(b >= a for a, b in zip(growing, growing[1:]))
    ok = boundary_ok and monotone and growing[-1] > 0.99
    _verdict(
        "AC3 consistency-boundary trend",
        ok,
        f"boundary worst {worst:.2f} se, growing power {growing[0]:.3f}->{growing[-1]:.4f}",
    )


def test_ac4_relative_volume_collapse():
    # first validate the small-d Monte-Carlo counter against grid quadrature
    rng = RngStream(401)
    cases = [(1, 4.0, 1.0, 0.4, 1200), (2, 4.0, 1.0, 0.7, 1000), (3, 4.0, 1.3, 0.9, 300)]
    rel_worst = 0.0
    for i, (d, p, r, s, cells) in enumerate(cases):
        exact = geo.threshold_fraction_quadrature(d, p, r, s, cells_per_axis=cells)
        est = geo.pnorm_threshold_fraction(d, p, r, s, 400000, rng.substream(i), workers=4)
        rel_worst = max(rel_worst, abs(est.value - exact) / exact)
    valid = rel_worst <= 0.01
    # then the collapse itself: p = 4, r_d = d^(1/4), s_d = d^(1/8) ln d
    d_grid = [64, 256, 1024, 4096]
    fracs = []
    for i, d in enumerate(d_grid):
        est = geo.pnorm_threshold_fraction(
            d, 4.0, d ** 0.25, d ** 0.125 * math.log(d), 50000, rng.substream(100 + i), workers=4
        )
        fracs.append(est.value)
    nonincreasing = all(b <= a for a, b in zip(fracs, fracs[1:]))
    ok = valid and nonincreasing and fracs[-1] <= 0.05
    _verdict(
        "AC4 relative-volume collapse",
        ok,
        f"quadrature rel dev {rel_worst:.4f}, fractions {fracs}",
    )


def test_ac5_intersection_limit():
    fracs = []
    lows = []
    for d in (64, 256, 1024):
        t = geo.scaling_factor_u(d, 4.0)[0]
        est = geo.intersection_volume_ratio(d, 4.0, t, 200000, RngStream(501), workers=4)
        fracs.append(est.value)
        lows.append(est.ci_lower)
    nondecreasing = all(b >= a for a, b in zip(fracs, fracs[1:]))
    ok = nondecreasing and lows[-1] > fracs[0]
    _verdict(
        "AC5 intersection volume limit",
        ok,
        f"ratios {fracs}, final Wilson lower {lows[-1]:.4f}",
    )


def test_ac6_proposition4_bound():
    d = 200
    r = d ** 0.25
    eps = 0.2
    bound = sc.concentration_bound(d, r, eps)
    rng = RngStream(601)
    results = []
    specs = [
        ("p_norm(inf)", ht.make_test(ht.PNormFamily(math.inf), d, 0.05,
                                     rng=rng.substream(0), size_check_n=1000000, workers=4)),
        ("higher_criticism", ht.make_test(ht.HigherCriticismFamily(), d, 0.05, "monte_carlo",
                                          rng=rng.substream(1), n=1000000,
                                          size_check_n=1000000, workers=4)),
    ]
    ok = True
    for i, (label, spec) in enumerate(specs):
        q = sc.ExcessPowerQuery(d, r, eps, spec, outer_n=400, inner_n=4000)
        est = sc.excess_power_region_measure(q, rng.substream(10 + i), workers=4)
        ok &= est.ci_upper <= bound
        results.append(f"{label}: upper {est.ci_upper:.4f}")
    _verdict(
        "AC6 concentration bound", ok, f"bound {bound:.4f}; " + "; ".join(results)
    )


def test_ac7_wap_dominance():
    rng = RngStream(701)
    families = [
        ("p=1", ht.PNormFamily(1.0), "monte_carlo"),
        ("p=4", ht.PNormFamily(4.0), "monte_carlo"),
        ("p=inf", ht.PNormFamily(math.inf), "exact"),
        ("hc", ht.HigherCriticismFamily(), "monte_carlo"),
    ]
    ok = True
    worst = -math.inf
    i = 0
    for d, r in [(50, 2.0), (200, 3.0)]:
        for label, fam, method in families:
            n_cal = None if method == "exact" else 1000000
            check = None if method == "exact" else 1000000
            spec = ht.make_test(fam, d, 0.05, method, rng=rng.substream(3 * i),
                                n=n_cal, size_check_n=check, workers=4)
            wap = sc.wap_average_power(spec, d, r, outer_n=400, inner_n=1000,
                                       rng=rng.substream(3 * i + 1), workers=4)
            oracle = ht.lr_power_beta(d, spec.size, r)
            excess = (wap.estimate - oracle) / wap.standard_error
            worst = max(worst, excess)
            ok &= wap.estimate <= oracle + 4.0 * wap.standard_error
            i += 1
    _verdict("AC7 spherical average-power dominance", ok, f"worst excess {worst:.2f} se")


def test_ac8_lipschitz_power():
    d = 20
    rng = RngStream(801)
    spec = ht.make_test(ht.PNormFamily(2.0), d, 0.05)
    sup_spec = ht.make_test(ht.PNormFamily(math.inf), d, 0.05)
    failures = 0
    for j in range(50):
        pair_rng = rng.substream(1).substream(j)
        theta1 = ParameterPoint(d, pair_rng.substream(0).normals(d))
        sep = float(pair_rng.substream(1).uniforms(1)[0])
        direction = pair_rng.substream(2).normals(d)
        direction *= sep / np.linalg.norm(direction)
        theta2 = ParameterPoint(d, theta1.values + direction)
        which = spec if j % 2 == 0 else sup_spec
        rep = sc.lipschitz_power_check(which, theta1, theta2, 20000, rng.substream(2).substream(j))
        failures += 0 if rep.passed else 1
    _verdict("AC8 power Lipschitz bound", failures == 0, f"{failures}/50 triples failed")


def test_ac9_size_control():
    alpha = 0.05
    d = 64
    n = 1000000
    half_width = 3.2905267314918945 * math.sqrt(alpha * (1 - alpha) / n)  # 99.9% band
    rng = RngStream(901)
    panel = [
        ("p=2 exact", ht.PNormFamily(2.0), "exact"),
        ("p=inf exact", ht.PNormFamily(math.inf), "exact"),
        ("p=1 mc", ht.PNormFamily(1.0), "monte_carlo"),
        ("p=4 mc", ht.PNormFamily(4.0), "monte_carlo"),
        ("hc mc", ht.HigherCriticismFamily(), "monte_carlo"),
    ]
    ok = True
    worst = 0.0
    for i, (label, fam, method) in enumerate(panel):
        n_cal = None if method == "exact" else 4000000
        spec = ht.make_test(fam, d, alpha, method, rng=rng.substream(2 * i), n=n_cal, workers=4)
        est = ht.estimate_size(spec, n, rng.substream(2 * i + 1), workers=4)
        dev = abs(est.estimate - alpha)
        worst = max(worst, dev)
        ok &= dev <= half_width
    _verdict(
        "AC9 size control (99.9% band)",
        ok,
        f"worst |size - alpha| {worst:.2e} vs band {half_width:.2e}",
    )


def test_ac10_end_to_end_reproducibility():
    config_paths = sorted(CONFIG_DIR.glob("acceptance_*.json"))
    assert config_paths, "acceptance configs missing"
    mismatches = []
    for path in config_paths:
        cfg = parse_config(path.read_text())
        csv1, meta1 = run_experiment(cfg, workers=1)
        csv2, meta2 = run_experiment(cfg, workers=4)
        if csv1.encode() != csv2.encode() or meta1["config_hash"] != meta2["config_hash"]:
            mismatches.append(path.name)
    _verdict(
        "AC10 end-to-end reproducibility",
        not mismatches,
        f"{len(config_paths)} configs, mismatches: {mismatches or 'none'}",
    )


def test_acceptance_config_files_parse():
    # the reproducibility configs must each cover a distinct experiment kind
    kinds = set()
    for path in sorted(CONFIG_DIR.glob("acceptance_*.json")):
        cfg = parse_config(path.read_text())
        kinds.add(cfg.kind)
    assert len(kinds) == 7
