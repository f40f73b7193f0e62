"""FastAPI service exposing the workbench over HTTP.

Error contract: every failed request body carries {"error_kind", "message"}
with error_kind one of config (400), external (502), runtime (500).  The
/detect route follows the detection wire protocol instead: JSON body with a
base64 PNG image (or multipart form), a JSON array of {bbox, score} back,
HTTP 400 for anything malformed.
"""

import base64
import binascii
import functools
import importlib.metadata

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..channel import add_pilot_noise, sample_paths, synth_channel
from ..detection import DetectionServiceError, PeakDetectorConfig, detect_peaks_builtin
from ..experiments import (
    ConfigError,
    PlotDataError,
    emit_plot,
    load_config,
    run_ce_sweep,
    run_har,
    run_loc,
)
from ..features import ingest_har_csv, mock_extract
from ..imaging import (
    decode_intensity,
    encode_rgb_colormap,
    encode_two_channel_zero,
    grayscale_reshape_resize,
    modulus_normalize,
    png_bytes,
    read_png,
    to_angular_delay,
)
from . import schemas

__all__ = ["create_app", "app"]


def _error(status, kind, message):
    body = schemas.ErrorBody(error_kind=kind, message=message)
    return JSONResponse(status_code=status, content=body.model_dump())


def _guarded(fn):
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, PlotDataError) as exc:
            return _error(400, "config", str(exc))
        except DetectionServiceError as exc:
            return _error(502, "external", str(exc))
        except Exception as exc:  # noqa: BLE001 - service boundary
            return _error(500, "runtime", f"{type(exc).__name__}: {exc}")

    return inner


def _version():
    try:
        return importlib.metadata.version("csibench")
    except importlib.metadata.PackageNotFoundError:
        return "0.0.0"


async def _parse_detect_request(request):
    """Returns (pixels, prompt, known_count) or raises ValueError."""
    content_type = request.headers.get("content-type", "")
    known_count = None
    if content_type.startswith("multipart/"):
        form = await request.form()
        field = form.get("image")
        if field is None:
            raise ValueError("multipart form lacks an image field")
        if hasattr(field, "read"):
            data = await field.read()
        else:
            data = base64.b64decode(str(field), validate=True)
        prompt = str(form.get("prompt") or "bright spot")
        raw_kc = form.get("known_count")
    else:
        body = await request.json()
        if not isinstance(body, dict):
            raise ValueError("body must be a JSON object")
        if "image" not in body:
            raise ValueError("body lacks the image field")
        if not isinstance(body["image"], str):
            raise ValueError("image must be a base64 string")
        data = base64.b64decode(body["image"], validate=True)
        prompt = body.get("prompt", "bright spot")
        if not isinstance(prompt, str):
            raise ValueError("prompt must be a string")
        raw_kc = body.get("known_count")
    if raw_kc is not None:
        known_count = int(raw_kc)
        if known_count <= 0:
            raise ValueError("known_count must be positive")
    pixels = read_png(data)
    return pixels, prompt, known_count


def create_app():
    app = FastAPI(title="csibench service", version=_version())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=_version())

    @app.post("/detect")
    async def detect(request: Request):
        try:
            pixels, _prompt, known_count = await _parse_detect_request(request)
        except Exception as exc:  # malformed input of any shape -> 400
            return _error(400, "config", f"malformed detect request: {exc}")
        intensity = decode_intensity(pixels)
        cfg = PeakDetectorConfig(known_count=known_count)
        dets = detect_peaks_builtin(intensity, cfg)
        return [{"bbox": [float(v) for v in d.box], "score": float(d.confidence)} for d in dets]

    @app.post("/experiments/ce-sweep", response_model=schemas.CeSweepResponse)
    @_guarded
    def ce_sweep(req: schemas.ExperimentRequest):
        cfg = load_config(text=req.config_text, overrides=req.overrides, defaults={"task": "ce_sweep"})
        result = run_ce_sweep(cfg)
        return schemas.CeSweepResponse(csv=result["csv"])

    @app.post("/experiments/har", response_model=schemas.HarTrainResponse)
    @_guarded
    def har(req: schemas.ExperimentRequest):
        cfg = load_config(text=req.config_text, overrides=req.overrides, defaults={"task": "har"})
        result = run_har(cfg)
        return schemas.HarTrainResponse(
            csv=result["csv"],
            head_b64=base64.b64encode(result["head_bytes"]).decode("ascii"),
            param_count=result["param_count"],
            final_accuracy=result["final_accuracy"],
        )

    @app.post("/experiments/loc", response_model=schemas.LocTrainResponse)
    @_guarded
    def loc(req: schemas.ExperimentRequest):
        cfg = load_config(text=req.config_text, overrides=req.overrides, defaults={"task": "loc"})
        result = run_loc(cfg)
        return schemas.LocTrainResponse(
            csv=result["csv"],
            head_b64=base64.b64encode(result["head_bytes"]).decode("ascii"),
            summary=[schemas.LocSummaryRow(**row) for row in result["summary"]],
            param_counts=result["param_counts"],
        )

    @app.post("/images/encode", response_model=schemas.EncodeImageResponse)
    @_guarded
    def encode_image(req: schemas.EncodeImageRequest):
        if req.encoding not in ("rgb", "grayscale", "two_channel"):
            raise ConfigError(f"unknown encoding {req.encoding!r}")
        if min(req.m, req.n, req.beta, req.gamma, req.path_count, req.frames, req.out_h, req.out_w) <= 0:
            raise ConfigError("dimensions, path_count and frames must be positive")
        paths = sample_paths(req.path_count, [req.seed, 1], req.on_grid, req.beta, req.gamma, req.m, req.n)
        h = synth_channel(paths, req.m, req.n)
        if req.encoding == "grayscale":
            stack = np.stack(
                [
                    np.abs(add_pilot_noise(h, req.snr_db, 1.0, seed=[req.seed, 2, t]).entries)
                    for t in range(req.frames)
                ]
            )
            img = grayscale_reshape_resize(stack, req.out_h, req.out_w)
        else:
            y = add_pilot_noise(h, req.snr_db, 1.0, seed=[req.seed, 2])
            admap = to_angular_delay(y.entries, req.beta, req.gamma)
            if req.encoding == "rgb":
                norm, rec = modulus_normalize(admap)
                img = encode_rgb_colormap(norm, rec)
            else:
                img = encode_two_channel_zero(admap, req.out_h, req.out_w)
        return schemas.EncodeImageResponse(
            png_b64=base64.b64encode(png_bytes(img)).decode("ascii"),
            width=img.pixels.shape[1],
            height=img.pixels.shape[0],
            encoding=img.encoding_id,
            norm_min=img.norm_record[0],
            norm_max=img.norm_record[1],
            channel_power=img.channel_power,
        )

    @app.post("/features/extract-mock", response_model=schemas.ExtractMockResponse)
    @_guarded
    def extract_mock(req: schemas.ExtractMockRequest):
        if req.k <= 0:
            raise ConfigError("k must be positive")
        try:
            data = base64.b64decode(req.png_b64, validate=True)
            pixels = read_png(data)
        except (binascii.Error, OSError, ValueError) as exc:
            raise ConfigError(f"png_b64 is not a base64 PNG: {exc}") from exc
        feats = mock_extract(pixels, req.k, seed=req.seed)
        return schemas.ExtractMockResponse(features=[float(v) for v in feats], dim=req.k)

    @app.post("/features/extract-har-csv", response_model=schemas.HarCsvExtractResponse)
    @_guarded
    def extract_har_csv(req: schemas.HarCsvExtractRequest):
        if min(req.t, req.m, req.n, req.k, req.out_h, req.out_w) <= 0:
            raise ConfigError("t, m, n, k and output dims must be positive")
        groups = ingest_har_csv(req.csv_path, req.t, req.m, req.n)
        rows = np.zeros((len(groups), req.k), dtype=np.float32)
        labels = []
        for i, (tensor, label) in enumerate(groups):
            img = grayscale_reshape_resize(np.abs(tensor), req.out_h, req.out_w)
            rows[i] = mock_extract(img, req.k, seed=req.seed)
            labels.append(label)
        return schemas.HarCsvExtractResponse(
            features_b64=base64.b64encode(np.ascontiguousarray(rows, dtype="<f4").tobytes()).decode("ascii"),
            count=len(groups),
            dim=req.k,
            labels=labels,
        )

    @app.post("/plots", response_model=schemas.PlotResponse)
    @_guarded
    def plots(req: schemas.PlotRequest):
        return schemas.PlotResponse(svg=emit_plot(req.csv_text, req.kind))

    return app


app = create_app()
