"""FastAPI service exposing the laboratory's operations.

Quick numerical queries (calibration, exact power, geometry) are plain
request/response endpoints; full experiments run synchronously through
POST /experiments/run, which returns the CSV table and its metadata sidecar
content.  Experiment configs travel as text so that values like Infinity
survive transport unchanged.
"""

from __future__ import annotations

import math
from typing import List, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from . import geometry as geo
from . import hypotests as ht
from . import superconsistency as sc
from .errors import (
    CalibrationInsufficientError,
    ConfigurationInvalidError,
    InvalidInputError,
    NumericFailureError,
)
from .experiments import (
    ConfigParseError,
    FamilySpec,
    RuleSpec,
    parse_config,
    run_experiment,
    summarize_csv,
)
from .model import ParameterPoint, realize_alternative
from .rng import RngStream

app = FastAPI(title="seqlab", version=__version__)


@app.exception_handler(InvalidInputError)
@app.exception_handler(CalibrationInsufficientError)
@app.exception_handler(ConfigurationInvalidError)
@app.exception_handler(ConfigParseError)
async def _bad_input(request: Request, exc: Exception):
    return JSONResponse(status_code=422, content={"error": type(exc).__name__, "detail": str(exc)})


@app.exception_handler(NumericFailureError)
async def _numeric_failure(request: Request, exc: Exception):
    return JSONResponse(status_code=500, content={"error": "NumericFailureError", "detail": str(exc)})


@app.get("/healthz")
def healthz():
    return {"status": "ok", "version": __version__}


# ---------------------------------------------------------------------------
# calibration and power


class CalibrateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: FamilySpec
    d: int
    alpha: float = 0.05
    method: str = "exact"
    n: Optional[int] = None
    seed: int = 0


class CalibrateResponse(BaseModel):
    critical_value: float
    calibration_error: float
    method: str
    d: int
    alpha: float


@app.post("/calibrate", response_model=CalibrateResponse)
def calibrate(req: CalibrateRequest):
    cal = ht.calibrate_critical_value(
        req.family.to_family(), req.d, req.alpha, req.method,
        rng=RngStream(req.seed), n=req.n,
    )
    return CalibrateResponse(
        critical_value=cal.critical_value, calibration_error=cal.error,
        method=req.method, d=req.d, alpha=req.alpha,
    )


class PowerRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: FamilySpec
    d: int
    alpha: float = 0.05
    method: str = "exact"
    calib_n: Optional[int] = None
    rule: Optional[RuleSpec] = None
    theta: Optional[List[float]] = None
    n: int = Field(default=10000, ge=100)
    seed: int = 0


class PowerResponse(BaseModel):
    power: float
    standard_error: float
    ci_lower: float
    ci_upper: float
    n: int
    critical_value: float
    theta_l2: float


@app.post("/power", response_model=PowerResponse)
def power(req: PowerRequest):
    if (req.rule is None) == (req.theta is None):
        raise InvalidInputError("give exactly one of rule or theta")
    rng = RngStream(req.seed)
    spec = ht.make_test(req.family.to_family(), req.d, req.alpha, req.method,
                        rng=rng.substream(0), n=req.calib_n)
    if req.theta is not None:
        theta = ParameterPoint(req.d, req.theta)
    else:
        theta = realize_alternative(req.rule.to_rule(), req.d)
    est = ht.estimate_power(spec, theta, req.n, rng.substream(1))
    return PowerResponse(
        power=est.estimate, standard_error=est.standard_error,
        ci_lower=est.ci_lower, ci_upper=est.ci_upper, n=est.n,
        critical_value=spec.critical_value, theta_l2=theta.l2_norm,
    )


class LrPowerRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int
    alpha: float
    r: float


@app.post("/lr-power")
def lr_power(req: LrPowerRequest):
    return {"power": ht.lr_power_beta(req.d, req.alpha, req.r)}


class StatisticRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    y: List[float]
    p: Optional[float] = None  # p-norm when given, Higher Criticism otherwise


@app.post("/statistic")
def statistic(req: StatisticRequest):
    if req.p is not None:
        return {"statistic": ht.p_norm(req.y, req.p)}
    return {"statistic": ht.higher_criticism_statistic(req.y)}


# ---------------------------------------------------------------------------
# geometry


class BallRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int
    p: float
    r: float = 1.0


@app.post("/geometry/log-volume")
def log_volume(req: BallRequest):
    return {"log_volume": geo.pball_log_volume(req.d, req.p, req.r)}


class RadiusRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int
    p: float


@app.post("/geometry/unit-volume-radius")
def unit_volume_radius(req: RadiusRequest):
    return {"radius": geo.unit_volume_radius(req.d, req.p)}


@app.post("/geometry/scaling-factor")
def scaling_factor(req: RadiusRequest):
    u, lower = geo.scaling_factor_u(req.d, req.p)
    return {"value": u, "lower_bound": lower}


class IntersectionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int
    p: float
    t: float
    n: int = Field(default=100000, ge=1000)
    seed: int = 0


@app.post("/geometry/intersection")
def intersection(req: IntersectionRequest):
    est = geo.intersection_volume_ratio(req.d, req.p, req.t, req.n, RngStream(req.seed))
    return {"value": est.value, "n": est.n, "standard_error": est.standard_error,
            "ci_lower": est.ci_lower, "ci_upper": est.ci_upper}


class ThresholdFractionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int
    p: float
    r: float
    s: float
    n: int = Field(default=100000, ge=1000)
    seed: int = 0


@app.post("/geometry/threshold-fraction")
def threshold_fraction(req: ThresholdFractionRequest):
    est = geo.pnorm_threshold_fraction(req.d, req.p, req.r, req.s, req.n, RngStream(req.seed))
    return {"value": est.value, "n": est.n, "standard_error": est.standard_error,
            "ci_lower": est.ci_lower, "ci_upper": est.ci_upper}


class ConcentrationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int
    r: float
    epsilon: float


@app.post("/bounds/concentration")
def concentration(req: ConcentrationRequest):
    return {"bound": sc.concentration_bound(req.d, req.r, req.epsilon)}


# ---------------------------------------------------------------------------
# experiments


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config_text: str
    seed: Optional[int] = None
    workers: int = Field(default=1, ge=1)


class RunResponse(BaseModel):
    csv: str
    meta: dict


@app.post("/experiments/run", response_model=RunResponse)
def experiments_run(req: RunRequest):
    config = parse_config(req.config_text)
    if req.seed is not None:
        config = config.model_copy(update={"seed": req.seed})
    csv_text, meta = run_experiment(config, workers=req.workers)
    return RunResponse(csv=csv_text, meta=meta)


class SummarizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    csv: str


@app.post("/experiments/summarize")
def experiments_summarize(req: SummarizeRequest):
    return summarize_csv(req.csv)
