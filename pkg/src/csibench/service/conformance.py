"""Reusable wire-protocol conformance checks for detection services.

Any HTTP client with httpx-style .get/.post (httpx.Client, TestClient) can be
checked; services implemented elsewhere pass the same suite unmodified if they
honor the protocol: POST /detect with a base64 PNG returns a JSON array of
{"bbox": [x0, y0, x1, y1], "score": s} in pixel coordinates (origin top-left),
and malformed requests return HTTP 400.
"""

import base64
import io

import numpy as np
from PIL import Image

__all__ = ["spot_png", "run_conformance_checks", "assert_conformance"]


def spot_png(height=64, width=64, spots=((10, 20),), radius=1, value=255):
    """Grayscale RGB PNG, black except small bright squares at (row, col)."""
    px = np.zeros((height, width, 3), dtype=np.uint8)
    for h, w in spots:
        px[max(0, h - radius) : h + radius + 1, max(0, w - radius) : w + radius + 1, :] = value
    buf = io.BytesIO()
    Image.fromarray(px, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _b64(data):
    return base64.b64encode(data).decode("ascii")


def _detections_valid(body):
    if not isinstance(body, list):
        return False, "response is not a JSON array"
    for item in body:
        if not isinstance(item, dict) or "bbox" not in item or "score" not in item:
            return False, f"bad detection entry: {item!r}"
        bbox = item["bbox"]
        if not (isinstance(bbox, list) and len(bbox) == 4):
            return False, f"bbox must be a 4-list, got {bbox!r}"
    return True, ""


def run_conformance_checks(client):
    """Runs every check; returns a list of {name, passed, detail} dicts."""
    results = []

    def record(name, passed, detail=""):
        results.append({"name": name, "passed": bool(passed), "detail": detail})

    # 1. health endpoint answers
    try:
        r = client.get("/health")
        record("health_ok", r.status_code == 200, f"status {r.status_code}")
    except Exception as exc:
        record("health_ok", False, repr(exc))

    # 2. bright spot is found near its true pixel position
    png = spot_png(spots=((10, 20),))
    try:
        r = client.post("/detect", json={"image": _b64(png), "prompt": "bright spot"})
        ok = r.status_code == 200
        detail = f"status {r.status_code}"
        if ok:
            body = r.json()
            valid, why = _detections_valid(body)
            ok = valid and len(body) >= 1
            detail = why or f"{len(body)} detections"
            if ok:
                x0, y0, x1, y1 = body[0]["bbox"]
                cw, ch = (x0 + x1) / 2.0, (y0 + y1) / 2.0
                ok = abs(cw - 20) <= 2.0 and abs(ch - 10) <= 2.0
                detail = f"top center ({cw:.1f}, {ch:.1f})"
        record("detect_bright_spot", ok, detail)
    except Exception as exc:
        record("detect_bright_spot", False, repr(exc))

    # 3-5. malformed requests are HTTP 400
    malformed = [
        ("detect_malformed_body", {"content": b"not json", "headers": {"content-type": "application/json"}}),
        ("detect_bad_base64", {"json": {"image": "!!!not-base64!!!"}}),
        ("detect_missing_image", {"json": {"prompt": "bright spot"}}),
    ]
    for name, kwargs in malformed:
        try:
            r = client.post("/detect", **kwargs)
            record(name, r.status_code == 400, f"status {r.status_code}")
        except Exception as exc:
            record(name, False, repr(exc))

    # 6. an all-black image yields a valid (normally empty) array, not an error
    black = spot_png(spots=())
    try:
        r = client.post("/detect", json={"image": _b64(black)})
        ok = r.status_code == 200
        detail = f"status {r.status_code}"
        if ok:
            valid, why = _detections_valid(r.json())
            ok = valid
            detail = why or f"{len(r.json())} detections"
        record("detect_black_image", ok, detail)
    except Exception as exc:
        record("detect_black_image", False, repr(exc))

    # 7. multipart upload works too
    try:
        r = client.post(
            "/detect",
            files={"image": ("spot.png", png, "image/png")},
            data={"prompt": "bright spot"},
        )
        ok = r.status_code == 200
        detail = f"status {r.status_code}"
        if ok:
            valid, why = _detections_valid(r.json())
            ok = valid and len(r.json()) >= 1
            detail = why or f"{len(r.json())} detections"
        record("detect_multipart", ok, detail)
    except Exception as exc:
        record("detect_multipart", False, repr(exc))

    return results


def assert_conformance(client):
    """Raises AssertionError naming every failed check."""
    results = run_conformance_checks(client)
    failed = [r for r in results if not r["passed"]]
    if failed:
        lines = ", ".join(f"{r['name']} ({r['detail']})" for r in failed)
        raise AssertionError(f"conformance failures: {lines}")
    return results
