"""Detection wire-protocol front end backed by an upstream detection service.

The served protocol: POST /detect with an image (base64 PNG in a JSON body,
or a multipart file) plus an optional prompt, returning a JSON array of
{"bbox": [x0, y0, x1, y1], "score": s} boxes in pixel coordinates.  This app
validates and normalizes the request, forwards it to the configured upstream
detector over the same protocol, and relays the boxes.  Any server honoring
the protocol can be the upstream.

Failure mapping: malformed request -> 400 here; upstream unreachable or
timing out -> 503 with a machine-readable reason; upstream replying with an
error or garbage -> that error relayed (400) or 502.
"""

import base64
import binascii
import json
from contextlib import asynccontextmanager

import httpx
from fastapi import FastAPI, Request, Response

__all__ = ["create_app", "serve_detection"]


def _json_response(payload, status=200):
    return Response(
        content=json.dumps(payload), status_code=status, media_type="application/json"
    )


async def _normalize(request):
    """Return the forwardable JSON payload, or a 400 Response."""
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        field = form.get("image")
        if field is None:
            return _json_response({"reason": "multipart body needs an 'image' file"}, 400)
        raw = await field.read() if hasattr(field, "read") else str(field).encode()
        payload = {"image": base64.b64encode(raw).decode("ascii")}
        if form.get("prompt") is not None:
            payload["prompt"] = str(form["prompt"])
        kc = form.get("known_count")
        if kc is not None:
            try:
                payload["known_count"] = int(kc)
            except ValueError:
                return _json_response(
                    {"reason": f"known_count must be an integer, got {kc!r}"}, 400
                )
        return payload
    try:
        body = json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError):
        return _json_response({"reason": "body is not valid JSON"}, 400)
    if not isinstance(body, dict) or not isinstance(body.get("image"), str):
        return _json_response({"reason": "JSON body needs a base64 'image' string"}, 400)
    try:
        base64.b64decode(body["image"], validate=True)
    except (binascii.Error, ValueError):
        return _json_response({"reason": "'image' is not valid base64"}, 400)
    return dict(body)


def create_app(upstream, transport=None, timeout=10.0):
    """Build the proxy app.  `transport` injects an httpx transport (tests)."""
    client = httpx.AsyncClient(
        base_url=upstream.rstrip("/"), transport=transport, timeout=timeout
    )

    @asynccontextmanager
    async def lifespan(app):
        yield
        await client.aclose()

    app = FastAPI(title="lvm-extractor detection front end", lifespan=lifespan)
    app.state.upstream = upstream

    @app.get("/health")
    def health():
        return {"status": "ok", "upstream": upstream}

    @app.post("/detect")
    async def detect(request: Request):
        payload = await _normalize(request)
        if isinstance(payload, Response):
            return payload
        try:
            r = await client.post("/detect", json=payload)
        except httpx.HTTPError as exc:
            return _json_response(
                {"reason": f"upstream detector unavailable: {exc}", "upstream": upstream},
                503,
            )
        if r.status_code in (200, 400):
            # relay both the boxes and the upstream's own validation verdicts
            return Response(
                content=r.content, status_code=r.status_code, media_type="application/json"
            )
        return _json_response(
            {"reason": f"upstream detector replied {r.status_code}", "upstream": upstream},
            502,
        )

    return app


def serve_detection(port, upstream, host="127.0.0.1"):
    import uvicorn

    uvicorn.run(create_app(upstream), host=host, port=port, log_level="warning")
