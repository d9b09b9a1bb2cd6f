"""HTTP service wrapping the pipeline: simulate, train, generate, extend,
evaluate, stylized.

Each endpoint reads and writes files on the machine the service runs on, so
a request carries file paths plus the knobs for one command.  The ``run_*``
functions hold the actual orchestration and are plain functions, usable
without the HTTP layer.  Error contract: invalid input maps to HTTP 400,
numerical failure during training to 422, checkpoint version mismatch
to 409; bodies carry ``detail`` and the matching process exit code.
"""

from __future__ import annotations

import json
import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .checkpoint import (
    HISTORY_NAME,
    load_checkpoint,
    read_manifest,
    save_checkpoint,
)
from .config import Config, METRIC_NAMES
from .errors import TrainingDiverged, VersionMismatch
from .metrics.adapted import sliced_aw1
from .metrics.mmd import gaussian_mmd, signature_mmd
from .metrics.report import MetricReport
from .metrics.stylized import stylized_stats
from .metrics.wasserstein import sliced_w1
from .paths import (
    SCHEME_AFFINE_TO_BALL,
    SCHEME_DIVIDE_BY_START,
    load_pathset_csv,
    load_series_csv,
    make_windows,
    normalize_by_start,
    normalize_to_ball,
    save_pathset_csv,
    simple_returns,
)
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    ExtendRequest,
    ExtendResponse,
    GenerateRequest,
    GenerateResponse,
    LossRow,
    SimulateRequest,
    SimulateResponse,
    StylizedRequest,
    StylizedResponse,
    TrainRequest,
    TrainResponse,
)
from .simulate import simulate_bs, simulate_heston, simulate_pdv4
from .vae import (
    ConditionSpec,
    ConditionalTCVAE,
    TCVAE,
    TrainConfig,
    extend_path,
    generate,
    generate_conditional,
    make_conditional_dataset,
    train,
    train_conditional,
)

SIMULATORS = {"bs": simulate_bs, "heston": simulate_heston, "pdv4": simulate_pdv4}

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_VERSION = 4


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_json(path: str, payload: dict) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_simulate(req: SimulateRequest) -> SimulateResponse:
    cfg = Config.from_dict({"simulate": {
        "model": req.model, "n": req.n, "seed": req.seed, "params": req.params}})
    p = cfg.simulate.build_params()
    paths = SIMULATORS[req.model](p, req.n, req.seed)
    _ensure_parent(req.out)
    save_pathset_csv(paths, req.out)
    sidecar = req.out + ".json"
    _write_json(sidecar, {
        "command": "simulate", "model": req.model, "n": req.n,
        "seed": req.seed, "params": cfg.simulate.params,
        "resolved_params": vars(p), "out": req.out})
    return SimulateResponse(out=req.out, sidecar=sidecar, model=req.model,
                            seed=req.seed, n_paths=paths.n_paths,
                            n_steps=paths.n_steps)


def _load_training_data(cfg: Config):
    """Resolve the data section into (PathSet, conditions or None)."""
    d = cfg.data
    d.validate(check_files=True)
    if d.kind == "paths":
        if cfg.model.conditional:
            raise ValueError(
                "conditional training needs a series data source "
                "(data.kind: series)")
        ps = load_pathset_csv(d.source, dt=d.dt, label="training")
        conds = None
    else:
        series, _ = load_series_csv(d.source, d.column or "close")
        if cfg.model.conditional:
            spec = ConditionSpec(truncation=cfg.model.cond_truncation,
                                 alpha=cfg.model.cond_alpha,
                                 delta=cfg.model.cond_delta)
            ps, conds = make_conditional_dataset(
                series, cfg.model.n_steps, spec, stride=d.stride, dt=d.dt)
        else:
            ps = make_windows(series, d.window, stride=d.stride, dt=d.dt,
                              label="training")
            conds = None
    if d.normalization == SCHEME_DIVIDE_BY_START:
        ps = normalize_by_start(ps)
    elif d.normalization == SCHEME_AFFINE_TO_BALL:
        ps = normalize_to_ball(ps)
    return ps, conds


def _build_model(cfg: Config):
    m = cfg.model
    if m.conditional:
        return ConditionalTCVAE(
            d=m.d, d_z=m.d_z, n_steps=m.n_steps, d_c=1,
            embed_dim=m.embed_dim, hidden=m.hidden,
            flow_layers=m.flow_layers, flow_hidden=m.flow_hidden,
            scale_cap=m.scale_cap, beta=m.beta, seed=m.seed,
            cond_spec=ConditionSpec(truncation=m.cond_truncation,
                                    alpha=m.cond_alpha, delta=m.cond_delta))
    return TCVAE(d=m.d, d_z=m.d_z, n_steps=m.n_steps, hidden=m.hidden,
                 flow_layers=m.flow_layers, flow_hidden=m.flow_hidden,
                 scale_cap=m.scale_cap, beta=m.beta, seed=m.seed)


def run_train(req: TrainRequest) -> TrainResponse:
    cfg = Config.from_dict(req.config).validate()
    data, conds = _load_training_data(cfg)
    if req.resume is not None:
        model = load_checkpoint(req.resume)
    else:
        model = _build_model(cfg)
    tc = TrainConfig(epochs=cfg.train.epochs, batch_size=cfg.train.batch,
                     lr=cfg.train.lr, beta=cfg.model.beta,
                     anneal_frac=cfg.train.anneal_frac, seed=cfg.train.seed)
    os.makedirs(req.out_dir, exist_ok=True)
    try:
        if isinstance(model, ConditionalTCVAE):
            model, history = train_conditional(model, data, conds, tc)
        else:
            model, history = train(model, data, tc)
    except TrainingDiverged as exc:
        diag = os.path.join(req.out_dir, "diagnostics.json")
        _write_json(diag, {"error": str(exc), "config": cfg.to_dict(),
                           "resume": req.resume})
        raise TrainingDiverged(f"{exc}; diagnostics written to {diag}") from exc
    ckpt = os.path.join(req.out_dir, "checkpoint")
    save_checkpoint(model, ckpt, history=history, config_echo=cfg.to_dict())
    return TrainResponse(
        checkpoint=ckpt,
        history_csv=os.path.join(ckpt, HISTORY_NAME),
        epochs=len(history),
        final=LossRow(**history[-1].to_dict()))


def run_generate(req: GenerateRequest) -> GenerateResponse:
    model = load_checkpoint(req.checkpoint)
    if req.condition is not None:
        if not isinstance(model, ConditionalTCVAE):
            raise ValueError("checkpoint is unconditional; drop the condition")
        paths = generate_conditional(model, req.condition, req.n, req.seed)
    else:
        if isinstance(model, ConditionalTCVAE):
            raise ValueError("conditional checkpoint needs a condition")
        paths = generate(model, req.n, req.seed)
    _ensure_parent(req.out)
    save_pathset_csv(paths, req.out)
    report = req.out + ".json"
    _write_json(report, {
        "command": "generate", "checkpoint": req.checkpoint, "n": req.n,
        "seed": req.seed, "condition": req.condition, "out": req.out,
        "config": read_manifest(req.checkpoint).get("config", {})})
    return GenerateResponse(out=req.out, report=report,
                            n_paths=paths.n_paths, n_steps=paths.n_steps)


def run_extend(req: ExtendRequest) -> ExtendResponse:
    model = load_checkpoint(req.checkpoint)
    if not isinstance(model, ConditionalTCVAE) or model.cond_spec is None:
        raise ValueError(
            "path extension needs a conditional checkpoint with a condition spec")
    series, _ = load_series_csv(req.source, req.column)
    extended = extend_path(model, series, req.n_blocks, req.seed)
    _ensure_parent(req.out)
    with open(req.out, "w", encoding="utf-8") as fh:
        fh.write(req.column + "\n")
        for v in extended:
            fh.write(repr(float(v)) + "\n")
    report = req.out + ".json"
    _write_json(report, {
        "command": "extend", "checkpoint": req.checkpoint,
        "source": req.source, "column": req.column,
        "n_blocks": req.n_blocks, "seed": req.seed,
        "n_history": int(series.size), "n_total": int(extended.size),
        "block_len": model.n_steps, "out": req.out,
        "config": read_manifest(req.checkpoint).get("config", {})})
    return ExtendResponse(out=req.out, report=report,
                          n_history=int(series.size),
                          n_total=int(extended.size))


def run_evaluate(req: EvaluateRequest) -> EvaluateResponse:
    unknown = [m for m in req.metrics if m not in METRIC_NAMES]
    if unknown:
        raise ValueError(f"unknown metrics {unknown}; choose from {METRIC_NAMES}")
    if not req.metrics:
        raise ValueError("at least one metric is required")
    real = load_pathset_csv(req.real, label="real")
    fake = load_pathset_csv(req.fake, label="fake")
    rep = MetricReport(config=req.model_dump())
    if "swd" in req.metrics:
        rep.add_scalar("sliced_w1",
                       sliced_w1(real, fake, n_proj=req.n_proj, seed=req.seed))
    if "mmd" in req.metrics:
        rep.add_scalar("gaussian_mmd", gaussian_mmd(real, fake))
    if "sigmmd" in req.metrics:
        rep.add_scalar("signature_mmd",
                       signature_mmd(real, fake, level=req.sig_level))
    if "saw" in req.metrics:
        mean, std = sliced_aw1(real, fake, n_len=req.saw_len,
                               n_slice=req.saw_slices,
                               n_sample=req.saw_samples, seed=req.seed)
        rep.add_scalar("sliced_aw1_mean", mean)
        rep.add_scalar("sliced_aw1_std", std)
    report_json = req.out + ".json"
    arrays_csv = req.out + ".csv"
    _ensure_parent(report_json)
    rep.save_json(report_json)
    rep.save_arrays_csv(arrays_csv)
    return EvaluateResponse(report_json=report_json, arrays_csv=arrays_csv,
                            scalars=rep.scalars)


def run_stylized(req: StylizedRequest) -> StylizedResponse:
    series, _ = load_series_csv(req.source, req.column)
    report = stylized_stats(simple_returns(series), max_lag=req.max_lag)
    rep = MetricReport(config=req.model_dump())
    rep.add_scalar("skewness", report.skewness, nonnegative=False)
    rep.add_scalar("excess_kurtosis", report.excess_kurtosis, nonnegative=False)
    rep.add_scalar("n_obs", report.n_obs)
    if report.hill_tail_index is not None:
        rep.add_scalar("hill_tail_index", report.hill_tail_index)
    rep.add_array("acf_returns", report.acf_returns)
    rep.add_array("acf_squared", report.acf_squared)
    rep.add_array("acf_absolute", report.acf_absolute)
    report_json = req.out + ".json"
    arrays_csv = req.out + ".csv"
    _ensure_parent(report_json)
    rep.save_json(report_json)
    rep.save_arrays_csv(arrays_csv)
    return StylizedResponse(report_json=report_json, arrays_csv=arrays_csv,
                            skewness=report.skewness,
                            excess_kurtosis=report.excess_kurtosis,
                            n_obs=report.n_obs)


def create_app() -> FastAPI:
    app = FastAPI(title="causalgen", version="1.0")

    def _error(status: int, exit_code: int, detail: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"detail": detail, "exit_code": exit_code})

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        return _error(400, EXIT_INPUT, str(exc.errors()))

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return _error(400, EXIT_INPUT, str(exc))

    @app.exception_handler(FileNotFoundError)
    async def _missing(request: Request, exc: FileNotFoundError):
        return _error(400, EXIT_INPUT, str(exc))

    @app.exception_handler(TrainingDiverged)
    async def _diverged(request: Request, exc: TrainingDiverged):
        return _error(422, EXIT_NUMERICAL, str(exc))

    @app.exception_handler(FloatingPointError)
    async def _fp(request: Request, exc: FloatingPointError):
        return _error(422, EXIT_NUMERICAL, str(exc))

    @app.exception_handler(VersionMismatch)
    async def _version(request: Request, exc: VersionMismatch):
        return _error(409, EXIT_VERSION, str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        return run_simulate(req)

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(req: TrainRequest):
        return run_train(req)

    @app.post("/generate", response_model=GenerateResponse)
    def generate_endpoint(req: GenerateRequest):
        return run_generate(req)

    @app.post("/extend", response_model=ExtendResponse)
    def extend_endpoint(req: ExtendRequest):
        return run_extend(req)

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate_endpoint(req: EvaluateRequest):
        return run_evaluate(req)

    @app.post("/stylized", response_model=StylizedResponse)
    def stylized_endpoint(req: StylizedRequest):
        return run_stylized(req)

    return app


__all__ = [
    "create_app", "run_simulate", "run_train", "run_generate", "run_extend",
    "run_evaluate", "run_stylized", "EXIT_INPUT", "EXIT_NUMERICAL",
    "EXIT_VERSION",
]
