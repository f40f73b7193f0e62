"""Path-spot detection: greedy peak picking and the external detection protocol.

The built-in detector runs greedy non-maximum suppression with circular
(wrap-around) windows, which matches the periodic angular-delay grid.  The
external route speaks a small HTTP protocol: POST /detect with a base64 PNG
and a text prompt, answered by a JSON array of {"bbox": [x0, y0, x1, y1],
"score": s} in pixel coordinates, origin top-left.
"""

import base64
import json
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx
import numpy as np

__all__ = [
    "Detection",
    "DetectedPath",
    "PeakDetectorConfig",
    "detect_peaks_builtin",
    "detect_external",
    "ExternalDetectorClient",
    "bbox_to_path",
    "DetectionServiceError",
    "DetectionTransportError",
    "DetectionProtocolError",
    "EmptyDetectionsError",
]


class DetectionServiceError(Exception):
    """Base class for external-detector failures."""


class DetectionTransportError(DetectionServiceError):
    """Connection, timeout, or non-2xx HTTP status."""


class DetectionProtocolError(DetectionServiceError):
    """Response arrived but does not follow the detection protocol."""


class EmptyDetectionsError(DetectionServiceError):
    """Service answered with zero detections."""


@dataclass
class Detection:
    """One detected spot: pixel box, its center, and a confidence in [0, 1]."""

    box: tuple  # (x0, y0, x1, y1), pixel coordinates, origin top-left
    center_w: float
    center_h: float
    confidence: float


@dataclass
class DetectedPath:
    """Angle/delay estimate recovered from a detection, both in [0, 1)."""

    angle_hat: float
    delay_hat: float

    def __post_init__(self):
        if not (0.0 <= self.angle_hat < 1.0) or not (0.0 <= self.delay_hat < 1.0):
            raise ValueError("recovered angle/delay must lie in [0, 1)")


@dataclass
class PeakDetectorConfig:
    threshold_ratio: float = 0.2  # relative to the original global maximum
    suppression_radius_w: int = 8  # 2*beta at the default oversampling
    suppression_radius_h: int = 8  # 2*gamma
    max_peaks: int = 20
    known_count: int | None = None  # when set, tau and max_peaks are ignored

    def __post_init__(self):
        if not (0.0 <= self.threshold_ratio <= 1.0):
            raise ValueError("threshold_ratio must lie in [0, 1]")
        if self.suppression_radius_w < 0 or self.suppression_radius_h < 0:
            raise ValueError("suppression radii must be nonnegative")
        if self.max_peaks <= 0:
            raise ValueError("max_peaks must be positive")
        if self.known_count is not None and self.known_count <= 0:
            raise ValueError("known_count must be positive when set")


def detect_peaks_builtin(norm, cfg=None):
    """Greedily pick maxima from a nonnegative matrix with circular suppression.

    Each accepted peak zeroes a wrap-around window of +-radius around itself
    before the next maximum is taken, so no two returned centers are within
    the window under circular distance.  Without known_count the loop stops
    when the next maximum falls below threshold_ratio times the original
    global maximum or max_peaks is reached; with known_count it runs until
    that many peaks are found or the matrix is exhausted (all zeros).
    Ties resolve to the smallest row, then column.  Output is ordered by
    decreasing confidence (= peak value).
    """
    cfg = cfg or PeakDetectorConfig()
    a = np.array(norm, dtype=np.float64, copy=True)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if a.size == 0:
        return []
    height, width = a.shape
    g0 = float(a.max())
    if g0 <= 0.0:
        return []
    rw = cfg.suppression_radius_w
    rh = cfg.suppression_radius_h
    limit = cfg.known_count if cfg.known_count is not None else cfg.max_peaks
    out = []
    while len(out) < limit:
        idx = int(np.argmax(a))  # first occurrence = smallest (h, then w)
        h, w = divmod(idx, width)
        v = float(a[h, w])
        if v <= 0.0:
            break  # matrix exhausted
        if cfg.known_count is None and v < cfg.threshold_ratio * g0:
            break
        box = (
            float(max(w - rw, 0)),
            float(max(h - rh, 0)),
            float(min(w + rw, width - 1)),
            float(min(h + rh, height - 1)),
        )
        out.append(Detection(box=box, center_w=float(w), center_h=float(h), confidence=v))
        rows = np.arange(h - rh, h + rh + 1) % height
        cols = np.arange(w - rw, w + rw + 1) % width
        a[np.ix_(rows, cols)] = 0.0
    return out


def _parse_detect_response(resp):
    try:
        payload = resp.json()
    except (json.JSONDecodeError, ValueError) as exc:
        raise DetectionProtocolError(f"response is not JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise DetectionProtocolError(f"expected a JSON array, got {type(payload).__name__}")
    if len(payload) == 0:
        raise EmptyDetectionsError("detection service returned no detections")
    dets = []
    for i, item in enumerate(payload):
        if not isinstance(item, dict) or "bbox" not in item or "score" not in item:
            raise DetectionProtocolError(f"item {i} lacks bbox/score")
        bbox = item["bbox"]
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise DetectionProtocolError(f"item {i} bbox must have 4 entries")
        try:
            x0, y0, x1, y1 = (float(v) for v in bbox)
            score = float(item["score"])
        except (TypeError, ValueError) as exc:
            raise DetectionProtocolError(f"item {i} has non-numeric fields") from exc
        conf = min(max(score, 0.0), 1.0)
        dets.append(
            Detection(
                box=(x0, y0, x1, y1),
                center_w=(x0 + x1) / 2.0,
                center_h=(y0 + y1) / 2.0,
                confidence=conf,
            )
        )
    # decreasing score; stable, so equal-score items keep the service's order
    dets.sort(key=lambda d: -d.confidence)
    return dets


def _detect_url(endpoint):
    e = endpoint.rstrip("/")
    return e if e.endswith("/detect") else e + "/detect"


def detect_external(png, prompt, endpoint, timeout=10.0, client=None, extra=None):
    """Send one image to a detection service and parse the reply.

    png: raw PNG bytes.  extra: optional dict merged into the JSON body (used
    for service-specific hints; conforming servers ignore unknown fields).
    Raises DetectionTransportError / DetectionProtocolError /
    EmptyDetectionsError; never returns an empty list.
    """
    body = {"image": base64.b64encode(png).decode("ascii"), "prompt": prompt}
    if extra:
        body.update(extra)
    close = False
    if client is None:
        client = httpx.Client(timeout=timeout)
        close = True
    try:
        try:
            resp = client.post(_detect_url(endpoint), json=body, timeout=timeout)
        except httpx.HTTPError as exc:
            raise DetectionTransportError(f"detect request failed: {exc}") from exc
        if resp.status_code != 200:
            raise DetectionTransportError(f"detect returned HTTP {resp.status_code}")
        return _parse_detect_response(resp)
    finally:
        if close:
            client.close()


class ExternalDetectorClient:
    """Bounded-concurrency client for the detection protocol.

    Requests are tracked by correlation id, never by arrival order, so
    detect_many returns results aligned with its inputs even when responses
    complete out of order.
    """

    def __init__(self, endpoint, prompt="bright spot", timeout=10.0, max_in_flight=4, client=None):
        self.endpoint = endpoint
        self.prompt = prompt
        self.timeout = timeout
        self.max_in_flight = max(1, int(max_in_flight))
        self._client = client or httpx.Client(timeout=timeout)

    def detect(self, png, extra=None):
        return detect_external(
            png, self.prompt, self.endpoint, timeout=self.timeout, client=self._client, extra=extra
        )

    def detect_many(self, pngs, extra=None):
        """Run detections concurrently; returns (results, errors) keyed by input index.

        results[i] is a list of Detections or None; errors[i] is None or the
        DetectionServiceError that request raised.
        """
        results = [None] * len(pngs)
        errors = [None] * len(pngs)
        pending = {}  # correlation id -> input index
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = {}
            for i, png in enumerate(pngs):
                cid = uuid.uuid4().hex
                pending[cid] = i
                futures[pool.submit(self.detect, png, extra)] = cid
            for fut, cid in futures.items():
                i = pending[cid]
                try:
                    results[i] = fut.result()
                except DetectionServiceError as exc:
                    errors[i] = exc
        return results, errors

    def close(self):
        self._client.close()


def bbox_to_path(detection, beta_m, gamma_n):
    """Map a detection center back to (angle, delay) on the normalized torus.

    angle_hat = (1 - w/(beta*M)) mod 1 and delay_hat = h/(gamma*N): the angle
    axis of the image is mirrored by the transform while the delay axis is
    direct, so this inverts the on-grid peak placement exactly.
    """
    w = detection.center_w
    h = detection.center_h
    if not (0.0 <= w < beta_m) or not (0.0 <= h < gamma_n):
        raise ValueError(f"center ({w}, {h}) outside image bounds ({beta_m}, {gamma_n})")
    angle = (1.0 - w / beta_m) % 1.0
    delay = h / gamma_n
    return DetectedPath(angle_hat=angle, delay_hat=delay)
