"""Request and response models for the service endpoints."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    model: str = "bs"
    n: int = Field(default=1000, ge=1)
    seed: int = 0
    params: dict = Field(default_factory=dict)
    out: str


class SimulateResponse(BaseModel):
    out: str
    sidecar: str
    model: str
    seed: int
    n_paths: int
    n_steps: int


class LossRow(BaseModel):
    rec: float
    latent: float
    beta: float
    total: float
    cw1_upper_bound: Optional[float] = None


class TrainRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    out_dir: str
    resume: Optional[str] = None


class TrainResponse(BaseModel):
    checkpoint: str
    history_csv: str
    epochs: int
    final: LossRow


class GenerateRequest(BaseModel):
    checkpoint: str
    n: int = Field(default=100, ge=1)
    seed: int = 0
    condition: Optional[list[float]] = None
    out: str


class GenerateResponse(BaseModel):
    out: str
    report: str
    n_paths: int
    n_steps: int


class ExtendRequest(BaseModel):
    checkpoint: str
    source: str
    column: str = "close"
    n_blocks: int = Field(default=1, ge=1)
    seed: int = 0
    out: str


class ExtendResponse(BaseModel):
    out: str
    report: str
    n_history: int
    n_total: int


class EvaluateRequest(BaseModel):
    real: str
    fake: str
    metrics: list[str] = Field(
        default_factory=lambda: ["swd", "mmd", "sigmmd", "saw"])
    n_proj: int = Field(default=100, ge=1)
    sig_level: int = Field(default=4, ge=1)
    saw_len: int = Field(default=5, ge=1)
    saw_slices: int = Field(default=100, ge=1)
    saw_samples: int = Field(default=500, ge=1)
    seed: int = 0
    out: str


class EvaluateResponse(BaseModel):
    report_json: str
    arrays_csv: str
    scalars: dict


class StylizedRequest(BaseModel):
    source: str
    column: str = "close"
    max_lag: int = Field(default=20, ge=1)
    out: str


class StylizedResponse(BaseModel):
    report_json: str
    arrays_csv: str
    skewness: float
    excess_kurtosis: float
    n_obs: int


__all__ = [
    "SimulateRequest", "SimulateResponse", "LossRow", "TrainRequest",
    "TrainResponse", "GenerateRequest", "GenerateResponse", "ExtendRequest",
    "ExtendResponse", "EvaluateRequest", "EvaluateResponse",
    "StylizedRequest", "StylizedResponse",
]
