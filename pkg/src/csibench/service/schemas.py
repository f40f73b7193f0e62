"""Pydantic request/response models for the HTTP service."""

from typing import Optional

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    error_kind: str  # config | external | runtime
    message: str


class HealthResponse(BaseModel):
    status: str
    version: str


class ExperimentRequest(BaseModel):
    """Flat config text plus string overrides (same syntax as config values)."""

    config_text: str = ""
    overrides: dict = Field(default_factory=dict)


class CeSweepResponse(BaseModel):
    csv: str


class HarTrainResponse(BaseModel):
    csv: str
    head_b64: str
    param_count: int
    final_accuracy: float


class LocSummaryRow(BaseModel):
    snr_db: float
    model: str
    mean_error_m: float


class LocTrainResponse(BaseModel):
    csv: str
    head_b64: str
    summary: list[LocSummaryRow]
    param_counts: dict


class EncodeImageRequest(BaseModel):
    encoding: str = "rgb"  # rgb | grayscale | two_channel
    m: int = 32
    n: int = 32
    beta: int = 4
    gamma: int = 4
    path_count: int = 3
    snr_db: float = 20.0
    seed: int = 0
    on_grid: bool = False
    frames: int = 8  # grayscale time stack depth
    out_h: int = 64
    out_w: int = 64


class EncodeImageResponse(BaseModel):
    png_b64: str
    width: int
    height: int
    encoding: str
    norm_min: float
    norm_max: float
    channel_power: Optional[float] = None


class ExtractMockRequest(BaseModel):
    png_b64: str
    k: int = 128
    seed: int = 0


class ExtractMockResponse(BaseModel):
    features: list[float]
    dim: int


class HarCsvExtractRequest(BaseModel):
    """Extract mock features from a server-local activity CSV file."""

    csv_path: str
    t: int = 250
    m: int = 3
    n: int = 30
    k: int = 1000
    seed: int = 0
    out_h: int = 64
    out_w: int = 64


class HarCsvExtractResponse(BaseModel):
    features_b64: str  # count x dim float32 little-endian rows
    count: int
    dim: int
    labels: list[int]


class PlotRequest(BaseModel):
    csv_text: str
    kind: str  # ce_sweep | har | loc


class PlotResponse(BaseModel):
    svg: str
