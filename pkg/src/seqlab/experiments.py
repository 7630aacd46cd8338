"""Config-driven experiment runner with deterministic CSV output.

A config is a single JSON document describing one experiment kind plus its
seed and budgets.  Running it yields a list of self-describing rows, one per
grid point, rendered to CSV with a fixed column set per kind.  Rows carry the
config hash and seed, floats are written with 17 significant digits, and the
row order is canonical, so identical (config, seed) pairs produce
byte-identical tables regardless of worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import geometry as geo
from . import hypotests as ht
from . import superconsistency as sc
from .errors import InvalidInputError, SeqLabError
from .model import AlternativeRule, AmplitudeRule, ParameterPoint, realize_alternative
from .rng import RngStream


class ConfigParseError(SeqLabError):
    """Config text failed to parse or validate; message names the key."""


# ---------------------------------------------------------------------------
# config schema


class FamilySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["p_norm", "higher_criticism"]
    p: Optional[float] = None

    @field_validator("p", mode="before")
    @classmethod
    def _coerce_inf(cls, v):
        # strict JSON cannot carry Infinity; accept the string spelling
        if isinstance(v, str) and v.lower() in ("inf", "infinity"):
            return math.inf
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.type == "p_norm":
            if self.p is None or not self.p > 0:
                raise ValueError("p_norm family needs p > 0 (use \"inf\" for the sup norm)")
        elif self.p is not None:
            raise ValueError("higher_criticism takes no p")
        return self

    def to_family(self):
        if self.type == "p_norm":
            return ht.PNormFamily(self.p)
        return ht.HigherCriticismFamily()

    def p_label(self) -> str:
        if self.p is None:
            return ""
        return "inf" if math.isinf(self.p) else f"{self.p:.17g}"


class RuleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["zero", "dense", "sparse_spike", "custom"]
    c: float = 1.0
    d_exponent: float = 0.0
    log_power: float = 0.0
    k: int = 1
    vectors: Optional[Dict[int, List[float]]] = None

    def to_rule(self) -> AlternativeRule:
        return AlternativeRule(
            family=self.family,
            amplitude=AmplitudeRule(self.c, self.d_exponent, self.log_power),
            k=self.k,
            vectors=self.vectors,
        )


class _Base(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    out: Optional[str] = None  # default output path; CLI --out overrides


class CalibrateConfig(_Base):
    kind: Literal["calibrate"]
    family: FamilySpec
    d_grid: List[int]
    alpha: float = 0.05
    method: Literal["exact", "monte_carlo", "clt_approx"] = "exact"
    n: Optional[int] = None


class PowerCurveConfig(_Base):
    kind: Literal["power_curve"]
    family: FamilySpec
    d_grid: List[int]
    alpha: float = 0.05
    method: Literal["exact", "monte_carlo", "clt_approx"] = "exact"
    calib_n: Optional[int] = None
    rule: RuleSpec
    n: int = 10000


class VolumeSweepConfig(_Base):
    kind: Literal["volume_sweep"]
    p: float = 4.0
    d_grid: List[int]
    r_c: float = 1.0
    r_exponent: float = 0.0


class VerifyTheorem2Config(_Base):
    kind: Literal["verify_theorem2"]
    p: float = 4.0
    d_grid: List[int]
    n: int = 50000
    r_c: float = 1.0
    r_exponent: float = 0.25
    s_c: float = 1.0
    s_exponent: Optional[float] = None  # default 1/(2p)
    s_log_power: float = 1.0
    intersection_t: Optional[float] = None  # default: the scaling factor u_d


class VerifyProp4Config(_Base):
    kind: Literal["verify_prop4"]
    family: FamilySpec
    d: int
    r: float
    epsilon: float
    alpha: float = 0.05
    method: Literal["exact", "monte_carlo", "clt_approx"] = "exact"
    calib_n: Optional[int] = None
    size_check_n: Optional[int] = None
    outer_n: int = 1000
    inner_n: int = 4000
    decision_margin: float = 2.0


class WapCheckConfig(_Base):
    kind: Literal["wap_check"]
    families: List[FamilySpec]
    d: int
    r: float
    alpha: float = 0.05
    calib_n: int = 1000000
    size_check_n: Optional[int] = None
    outer_n: int = 400
    inner_n: int = 400


class LipschitzCheckConfig(_Base):
    kind: Literal["lipschitz_check"]
    family: FamilySpec
    d: int
    alpha: float = 0.05
    method: Literal["exact", "monte_carlo", "clt_approx"] = "exact"
    calib_n: Optional[int] = None
    n_triples: int = 50
    inner_n: int = 20000
    max_separation: float = 1.0


ExperimentConfig = Union[
    CalibrateConfig,
    PowerCurveConfig,
    VolumeSweepConfig,
    VerifyTheorem2Config,
    VerifyProp4Config,
    WapCheckConfig,
    LipschitzCheckConfig,
]

_CONFIG_TYPES = {
    "calibrate": CalibrateConfig,
    "power_curve": PowerCurveConfig,
    "volume_sweep": VolumeSweepConfig,
    "verify_theorem2": VerifyTheorem2Config,
    "verify_prop4": VerifyProp4Config,
    "wap_check": WapCheckConfig,
    "lipschitz_check": LipschitzCheckConfig,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"config is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigParseError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in _CONFIG_TYPES:
        raise ConfigParseError(f"unknown or missing experiment kind: {kind!r}")
    try:
        return _CONFIG_TYPES[kind].model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(x) for x in first["loc"]) or "<root>"
        raise ConfigParseError(f"invalid config key '{loc}': {first['msg']}") from e


def canonical_json(config: ExperimentConfig) -> str:
    """Canonical text form of a config; the basis of the config hash."""
    data = config.model_dump(mode="python")
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# formatting


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


COLUMNS = {
    "calibrate": [
        "kind", "config_hash", "seed", "d", "family", "p", "alpha", "method",
        "n", "critical_value", "calibration_error", "status",
    ],
    "power_curve": [
        "kind", "config_hash", "seed", "d", "family", "p", "alpha", "method",
        "critical_value", "rule", "theta_l2", "n", "power", "standard_error",
        "ci_lower", "ci_upper", "lr_oracle", "status",
    ],
    "volume_sweep": [
        "kind", "config_hash", "seed", "d", "p", "r", "log_volume",
        "unit_volume_radius", "scaling_factor", "scaling_lower_bound", "status",
    ],
    "verify_theorem2": [
        "kind", "config_hash", "seed", "d", "p", "r", "s", "n",
        "threshold_fraction", "tf_ci_lower", "tf_ci_upper", "t",
        "intersection_ratio", "iv_ci_lower", "iv_ci_upper", "pass", "status",
    ],
    "verify_prop4": [
        "kind", "config_hash", "seed", "d", "r", "epsilon", "family", "p",
        "alpha", "achieved_size", "outer_n", "inner_n", "decision_margin",
        "estimate", "ci_lower", "ci_upper", "analytic_bound", "pass", "status",
    ],
    "wap_check": [
        "kind", "config_hash", "seed", "family", "p", "d", "r", "alpha",
        "achieved_size", "outer_n", "inner_n", "wap", "wap_se", "lr_oracle",
        "pass", "status",
    ],
    "lipschitz_check": [
        "kind", "config_hash", "seed", "triple", "family", "p", "d",
        "separation", "delta_power", "bound", "standard_error", "pass", "status",
    ],
}


def rows_to_csv(kind: str, rows: List[dict]) -> str:
    cols = COLUMNS[kind]
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# runners


def _make_spec(family_spec: FamilySpec, d, alpha, method, rng, calib_n, size_check_n, workers):
    return ht.make_test(
        family_spec.to_family(), d, alpha, method,
        rng=rng, n=calib_n, size_check_n=size_check_n, workers=workers,
    )


def _run_calibrate(cfg: CalibrateConfig, base: dict, rng: RngStream, workers: int):
    rows = []
    for i, d in enumerate(sorted(set(cfg.d_grid))):
        row = dict(base, d=d, family=cfg.family.type, p=cfg.family.p_label(),
                   alpha=cfg.alpha, method=cfg.method, n=cfg.n, status="ok")
        try:
            cal = ht.calibrate_critical_value(
                cfg.family.to_family(), d, cfg.alpha, cfg.method,
                rng=rng.substream(i), n=cfg.n, workers=workers,
            )
            row["critical_value"] = cal.critical_value
            row["calibration_error"] = cal.error
        except SeqLabError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


def _run_power_curve(cfg: PowerCurveConfig, base: dict, rng: RngStream, workers: int):
    rule = cfg.rule.to_rule()
    rows = []
    for i, d in enumerate(sorted(set(cfg.d_grid))):
        row = dict(base, d=d, family=cfg.family.type, p=cfg.family.p_label(),
                   alpha=cfg.alpha, method=cfg.method, rule=cfg.rule.family,
                   n=cfg.n, status="ok")
        try:
            spec = _make_spec(cfg.family, d, cfg.alpha, cfg.method,
                              rng.substream(2 * i), cfg.calib_n, None, workers)
            theta = realize_alternative(rule, d)
            est = ht.estimate_power(spec, theta, cfg.n, rng.substream(2 * i + 1), workers)
            row.update(
                critical_value=spec.critical_value,
                theta_l2=theta.l2_norm,
                power=est.estimate,
                standard_error=est.standard_error,
                ci_lower=est.ci_lower,
                ci_upper=est.ci_upper,
                lr_oracle=ht.lr_power_beta(d, cfg.alpha, theta.l2_norm),
            )
        except SeqLabError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


def _run_volume_sweep(cfg: VolumeSweepConfig, base: dict, rng: RngStream, workers: int):
    rows = []
    for d in sorted(set(cfg.d_grid)):
        r = cfg.r_c * d ** cfg.r_exponent
        row = dict(base, d=d, p=_fmt(cfg.p), r=r, status="ok")
        try:
            row["log_volume"] = geo.pball_log_volume(d, cfg.p, r)
            row["unit_volume_radius"] = geo.unit_volume_radius(d, cfg.p)
            if not math.isinf(cfg.p):
                u, lb = geo.scaling_factor_u(d, cfg.p)
                row["scaling_factor"] = u
                row["scaling_lower_bound"] = lb
        except SeqLabError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


def _run_verify_theorem2(cfg: VerifyTheorem2Config, base: dict, rng: RngStream, workers: int):
    s_expo = cfg.s_exponent if cfg.s_exponent is not None else 1.0 / (2.0 * cfg.p)
    rows = []
    prev = None
    for i, d in enumerate(sorted(set(cfg.d_grid))):
        r = cfg.r_c * d ** cfg.r_exponent
        s = cfg.s_c * d ** s_expo * math.log(d) ** cfg.s_log_power
        row = dict(base, d=d, p=_fmt(cfg.p), r=r, s=s, n=cfg.n, status="ok")
        try:
            tf = geo.pnorm_threshold_fraction(d, cfg.p, r, s, cfg.n, rng.substream(2 * i), workers)
            t = cfg.intersection_t if cfg.intersection_t is not None else geo.scaling_factor_u(d, cfg.p)[0]
            iv = geo.intersection_volume_ratio(d, cfg.p, t, cfg.n, rng.substream(2 * i + 1), workers)
            # pass: the collapse fraction does not rise along the grid (4 se noise)
            noise = 4.0 * math.sqrt(tf.standard_error ** 2 + (prev[1] if prev else 0.0) ** 2)
            ok = prev is None or tf.value <= prev[0] + noise
            row.update(
                threshold_fraction=tf.value, tf_ci_lower=tf.ci_lower, tf_ci_upper=tf.ci_upper,
                t=t, intersection_ratio=iv.value, iv_ci_lower=iv.ci_lower, iv_ci_upper=iv.ci_upper,
                **{"pass": ok},
            )
            prev = (tf.value, tf.standard_error)
        except SeqLabError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


def _run_verify_prop4(cfg: VerifyProp4Config, base: dict, rng: RngStream, workers: int):
    row = dict(base, d=cfg.d, r=cfg.r, epsilon=cfg.epsilon, family=cfg.family.type,
               p=cfg.family.p_label(), alpha=cfg.alpha, outer_n=cfg.outer_n,
               inner_n=cfg.inner_n, decision_margin=cfg.decision_margin, status="ok")
    try:
        spec = _make_spec(cfg.family, cfg.d, cfg.alpha, cfg.method,
                          rng.substream(0), cfg.calib_n, cfg.size_check_n, workers)
        row["achieved_size"] = spec.size
        bound = sc.concentration_bound(cfg.d, cfg.r, cfg.epsilon)
        if spec.size + cfg.epsilon >= 1.0 or ht.lr_power_beta(cfg.d, spec.size, cfg.r) + cfg.epsilon >= 1.0:
            # the excess-power region on this sphere is empty by construction
            row.update(estimate=0.0, ci_lower=0.0, ci_upper=0.0,
                       analytic_bound=bound, **{"pass": True})
            return [row]
        q = sc.ExcessPowerQuery(cfg.d, cfg.r, cfg.epsilon, spec,
                                cfg.outer_n, cfg.inner_n, cfg.decision_margin)
        est = sc.excess_power_region_measure(q, rng.substream(1), workers)
        row.update(estimate=est.estimate, ci_lower=est.ci_lower, ci_upper=est.ci_upper,
                   analytic_bound=bound, **{"pass": est.ci_upper <= bound})
    except SeqLabError as e:
        row["status"] = f"error: {e}"
    return [row]


def _run_wap_check(cfg: WapCheckConfig, base: dict, rng: RngStream, workers: int):
    rows = []
    for i, fam in enumerate(cfg.families):
        row = dict(base, family=fam.type, p=fam.p_label(), d=cfg.d, r=cfg.r,
                   alpha=cfg.alpha, outer_n=cfg.outer_n, inner_n=cfg.inner_n, status="ok")
        try:
            exact_ok = fam.type == "p_norm" and fam.p in (2.0, math.inf)
            method = "exact" if exact_ok else "monte_carlo"
            spec = _make_spec(fam, cfg.d, cfg.alpha, method, rng.substream(3 * i),
                              None if exact_ok else cfg.calib_n,
                              None if exact_ok else cfg.size_check_n, workers)
            wap = sc.wap_average_power(spec, cfg.d, cfg.r, cfg.outer_n, cfg.inner_n,
                                       rng.substream(3 * i + 1), workers)
            oracle = ht.lr_power_beta(cfg.d, spec.size, cfg.r)
            row.update(achieved_size=spec.size, wap=wap.estimate, wap_se=wap.standard_error,
                       lr_oracle=oracle,
                       **{"pass": wap.estimate <= oracle + 4.0 * wap.standard_error})
        except SeqLabError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


def _run_lipschitz_check(cfg: LipschitzCheckConfig, base: dict, rng: RngStream, workers: int):
    import numpy as np

    rows = []
    spec = _make_spec(cfg.family, cfg.d, cfg.alpha, cfg.method,
                      rng.substream(0), cfg.calib_n, None, workers)
    for j in range(cfg.n_triples):
        row = dict(base, triple=j, family=cfg.family.type, p=cfg.family.p_label(),
                   d=cfg.d, status="ok")
        try:
            pair_rng = rng.substream(1).substream(j)
            theta1 = ParameterPoint(cfg.d, pair_rng.substream(0).normals(cfg.d))
            scale = cfg.max_separation * float(pair_rng.substream(1).uniforms(1)[0])
            direction = pair_rng.substream(2).normals(cfg.d)
            direction *= scale / np.linalg.norm(direction)
            theta2 = ParameterPoint(cfg.d, theta1.values + direction)
            rep = sc.lipschitz_power_check(spec, theta1, theta2, cfg.inner_n,
                                           rng.substream(2).substream(j))
            row.update(separation=scale, delta_power=rep.delta_power, bound=rep.bound,
                       standard_error=rep.standard_error, **{"pass": rep.passed})
        except SeqLabError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


_RUNNERS = {
    "calibrate": _run_calibrate,
    "power_curve": _run_power_curve,
    "volume_sweep": _run_volume_sweep,
    "verify_theorem2": _run_verify_theorem2,
    "verify_prop4": _run_verify_prop4,
    "wap_check": _run_wap_check,
    "lipschitz_check": _run_lipschitz_check,
}


def run_experiment(config: ExperimentConfig, workers: int = 1) -> Tuple[str, dict]:
    """Run one experiment; returns (csv_text, metadata)."""
    if workers < 1:
        raise InvalidInputError("workers must be >= 1")
    h = config_hash(config)
    base = {"kind": config.kind, "config_hash": h, "seed": config.seed}
    rng = RngStream(config.seed)
    rows = _RUNNERS[config.kind](config, base, rng, workers)
    csv_text = rows_to_csv(config.kind, rows)
    from . import __version__

    meta = {
        "config_hash": h,
        "kind": config.kind,
        "seed": config.seed,
        "rows": len(rows),
        "columns": COLUMNS[config.kind],
        "package_version": __version__,
        # canonical text, not a parsed object: keeps Infinity transport-safe
        "config_text": canonical_json(config),
    }
    return csv_text, meta


# ---------------------------------------------------------------------------
# summaries


def summarize_csv(csv_text: str) -> dict:
    """Pass/fail counts per experiment kind plus the worst bound margin.

    Returns {"kinds": {kind: {"rows", "pass", "fail", "errors"}},
             "worst_margin": float|None, "any_fail": bool}.
    """
    reader = csv.DictReader(io.StringIO(csv_text))
    kinds: dict = {}
    worst_margin = None
    any_fail = False
    for row in reader:
        kind = row.get("kind", "?")
        agg = kinds.setdefault(kind, {"rows": 0, "pass": 0, "fail": 0, "errors": 0})
        agg["rows"] += 1
        status = row.get("status", "ok") or "ok"
        if status != "ok":
            agg["errors"] += 1
        flag = row.get("pass", "")
        if flag == "true":
            agg["pass"] += 1
        elif flag == "false":
            agg["fail"] += 1
            any_fail = True
        bound = row.get("analytic_bound")
        upper = row.get("ci_upper")
        if bound and upper:
            margin = float(bound) - float(upper)
            if worst_margin is None or margin < worst_margin:
                worst_margin = margin
    return {"kinds": kinds, "worst_margin": worst_margin, "any_fail": any_fail}
