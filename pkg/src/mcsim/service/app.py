"""FastAPI service wrapping the simulator core.

Config errors map to HTTP 422, run failures to HTTP 500.  Responses embed
rendered artifact text so a thin client can write byte-identical output
files without re-rendering.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import ConfigError, expand_matrix, parse_config, parse_matrix
from ..metrics import render_csv, render_json
from ..runner import RunResult, render_summary_csv, run_matrix, run_scenario
from ..trace import TraceError, generate_trace, render_trace
from .schemas import (
    Artifacts,
    HealthResponse,
    RunOutcome,
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
    TraceRequest,
    TraceResponse,
    ValidateRequest,
    ValidateResponse,
)

app = FastAPI(title="mcsim", version=__version__)


def _artifacts(metrics) -> Artifacts:
    return Artifacts(csv_text=render_csv(metrics), json_text=render_json(metrics))


def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def validate(req: ValidateRequest) -> ValidateResponse:
    try:
        if "base" in req.config:
            matrix = parse_matrix(req.config, base_dir=req.base_dir)
            runs = expand_matrix(matrix)
            return ValidateResponse(
                valid=True, kind="matrix", run_keys=[key for key, _ in runs]
            )
        cfg = parse_config(req.config, base_dir=req.base_dir)
        return ValidateResponse(valid=True, kind="scenario", normalized=cfg.to_doc())
    except (ConfigError, TraceError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def run(req: RunRequest) -> RunResponse:
    try:
        cfg = parse_config(req.config, base_dir=req.base_dir)
    except (ConfigError, TraceError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    try:
        metrics = run_scenario(cfg)
    except Exception as exc:
        raise HTTPException(status_code=500, detail=f"run failed: {exc}")
    return RunResponse(
        run_key=cfg.name,
        metrics=metrics.to_doc(),
        artifacts=_artifacts(metrics) if req.include_artifacts else None,
    )


def sweep(req: SweepRequest) -> SweepResponse:
    try:
        matrix = parse_matrix(req.matrix, base_dir=req.base_dir)
        expand_matrix(matrix)  # surface expansion errors as config errors
    except (ConfigError, TraceError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    results: list[RunResult] = run_matrix(matrix, parallelism=req.parallelism)
    outcomes = []
    for res in results:
        outcome = RunOutcome(run_key=res.run_key, ok=res.ok, error=res.error)
        if res.ok and res.metrics is not None:
            outcome.metrics = res.metrics.to_doc()
            if req.include_artifacts:
                outcome.artifacts = _artifacts(res.metrics)
        outcomes.append(outcome)
    return SweepResponse(runs=outcomes, summary_csv=render_summary_csv(results))


def gen_trace(req: TraceRequest) -> TraceResponse:
    try:
        trace = generate_trace(
            seed=req.seed,
            duration_s=req.seconds,
            cqi_min=req.cqi_min,
            cqi_max=req.cqi_max,
            start=req.start,
        )
    except TraceError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return TraceResponse(csv_text=render_trace(trace), manifest=trace.manifest())


app.get("/health", response_model=HealthResponse)(health)
app.post("/validate", response_model=ValidateResponse)(validate)
app.post("/run", response_model=RunResponse)(run)
app.post("/sweep", response_model=SweepResponse)(sweep)
app.post("/traces", response_model=TraceResponse)(gen_trace)
