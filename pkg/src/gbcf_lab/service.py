"""HTTP service wrapping the simulation lab.

Endpoints take pydantic request models, run the Monte-Carlo harness
in-process, and return plot-ready JSON. The CLI is a thin client of this
app; it can mount it in-process or talk to a remote instance.
"""

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from . import channel as ch
from . import montecarlo as mc
from . import neural as ne
from . import weights as wt

app = FastAPI(title="gbcf-lab", version="0.1.0")


class RunRequest(BaseModel):
    scheme: str = Field(pattern="^(ol|eol|neural|td)$")
    k1: int = Field(ge=1, le=ch.MAX_PAM_BITS)
    k2: int = Field(ge=1, le=ch.MAX_PAM_BITS)
    n: int = Field(ge=2)
    snr_f_db: float
    snr_fb_db: float | None = None  # null = noiseless feedback
    g: float = Field(default=1.0, ge=0.0)
    p: float = Field(default=1.0, gt=0.0)
    weights: str | None = None  # server-local path for the neural scheme
    trials: int = Field(ge=1)
    seed: int = Field(ge=0)
    min_errors: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.scheme == "neural" and not self.weights:
            raise ValueError("neural scheme requires a weights path")
        if self.scheme == "td" and self.n % 2 != 0:
            raise ValueError("time-division mode requires an even n")
        return self


class ReportModel(BaseModel):
    scheme: str
    k1: int
    k2: int
    n: int
    rate: float
    snr_f_db: float
    snr_fb_db_or_inf: float | str
    trials: int
    block_errors: list[int]
    bler_u1: float
    ci_u1_lo: float
    ci_u1_hi: float
    bler_u2: float
    ci_u2_lo: float
    ci_u2_hi: float
    bler_joint: float
    ci_joint_lo: float
    ci_joint_hi: float
    seed: int
    wall_time_s: float


class SweepRequest(RunRequest):
    snr_f_grid: list[float] = Field(min_length=1)
    snr_fb_grid: list[float] | None = None


class InterpretRequest(BaseModel):
    weights: str
    round: int = 3
    fix_user: int = Field(ge=1, le=2)
    grid_lo: float
    grid_hi: float
    grid_step: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _check(self):
        if self.grid_hi < self.grid_lo:
            raise ValueError("grid_hi must be >= grid_lo")
        return self


class InterpretResponse(BaseModel):
    grid: list[float]
    x: list[float]
    slope: float | None
    intercept: float | None
    r2: float | None
    degenerate: bool
    round: int
    fix_user: int


def _experiment(req):
    try:
        cfg = ch.ChannelConfig(
            p=req.p,
            sigma2_f=(ch.snr_db_to_variance(req.snr_f_db, req.p),) * 2,
            n=req.n,
            k=(req.k1, req.k2),
            sigma2_fb=None
            if req.snr_fb_db is None
            else (ch.snr_db_to_variance(req.snr_fb_db, req.p),) * 2,
        )
        return mc.Experiment(
            scheme=req.scheme,
            config=cfg,
            trials=req.trials,
            seed=req.seed,
            g=req.g,
            weights_path=req.weights,
            snr_f_db=req.snr_f_db,
            snr_fb_db=req.snr_fb_db,
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e


def _run(exp, min_errors=None):
    try:
        return mc.estimate_bler(exp, min_errors=min_errors)
    except (wt.WeightFormatError, FileNotFoundError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e)) from e


@app.get("/health")
def health():
    return {"status": "ok", "service": "gbcf-lab", "version": app.version}


@app.post("/run", response_model=ReportModel)
def run(req: RunRequest):
    return mc.report_dict(_run(_experiment(req), req.min_errors))


@app.post("/sweep", response_model=list[ReportModel])
def run_sweep(req: SweepRequest):
    exp = _experiment(req)
    try:
        reports = mc.sweep(exp, req.snr_f_grid, req.snr_fb_grid)
    except (wt.WeightFormatError, FileNotFoundError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    return [mc.report_dict(r) for r in reports]


@app.post("/interpret", response_model=InterpretResponse)
def interpret(req: InterpretRequest):
    import numpy as np

    try:
        w = wt.load_weights(req.weights)
        # the sweep zeroes all channel noise, so only (p, n, k) matter here
        cfg = ch.ChannelConfig(p=w.p, sigma2_f=(w.p, w.p), n=w.n, k=w.k)
        grid = np.arange(req.grid_lo, req.grid_hi + req.grid_step / 2, req.grid_step)
        out = ne.interpret_sweep(w, cfg, req.fix_user, grid, req.round)
    except (wt.WeightFormatError, FileNotFoundError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    return InterpretResponse(
        grid=[float(v) for v in out["grid"]],
        x=[float(v) for v in out["x"]],
        slope=out["slope"],
        intercept=out["intercept"],
        r2=out["r2"],
        degenerate=out["degenerate"],
        round=req.round,
        fix_user=req.fix_user,
    )
