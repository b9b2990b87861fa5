"""Pydantic request/response envelopes for the simulation service.

Scenario and matrix documents travel as plain JSON objects; the core config
module is the single source of truth for their validation.  Artifact text is
carried verbatim so clients can persist byte-identical CSV/JSON files.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateRequest(BaseModel):
    config: dict
    base_dir: str = "."


class ValidateResponse(BaseModel):
    valid: bool
    kind: str  # "scenario" | "matrix"
    normalized: dict | None = None
    run_keys: list[str] | None = None


class Artifacts(BaseModel):
    csv_text: str
    json_text: str


class RunRequest(BaseModel):
    config: dict
    base_dir: str = "."
    include_artifacts: bool = True


class RunResponse(BaseModel):
    run_key: str
    metrics: dict
    artifacts: Artifacts | None = None


class SweepRequest(BaseModel):
    matrix: dict
    base_dir: str = "."
    parallelism: int = Field(default=1, ge=1)
    include_artifacts: bool = False


class RunOutcome(BaseModel):
    run_key: str
    ok: bool
    metrics: dict | None = None
    error: str | None = None
    artifacts: Artifacts | None = None


class SweepResponse(BaseModel):
    runs: list[RunOutcome]
    summary_csv: str


class TraceRequest(BaseModel):
    seed: int
    seconds: int = Field(default=30, ge=1)
    cqi_min: int = Field(default=8, ge=0, le=15)
    cqi_max: int = Field(default=15, ge=0, le=15)
    start: int | None = None


class TraceResponse(BaseModel):
    csv_text: str
    manifest: dict
