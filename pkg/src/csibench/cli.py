"""Command-line front end: a thin client of the HTTP service.

Every subcommand except serve talks to the service API.  Without --server the
app runs in-process (no socket); with --server URL the same requests go to a
running instance.  Artifacts (CSV, SVG, PNG, feature and head files) are
written client-side.

Exit codes: 0 success, 2 config errors, 3 runtime errors, 4 external-service
failures.
"""

import argparse
import base64
import json
import os
import sys

import numpy as np

__all__ = ["main"]


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _make_client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app, raise_server_exceptions=False)


def _post(client, path, payload):
    try:
        resp = client.post(path, json=payload)
    except Exception as exc:
        raise CliError(4, f"cannot reach service at {path}: {exc}") from exc
    if resp.status_code == 200:
        return resp.json()
    kind, message = None, resp.text[:500]
    try:
        body = resp.json()
        kind = body.get("error_kind")
        message = body.get("message", message)
    except Exception:
        pass
    code = {"config": 2, "external": 4}.get(kind)
    if code is None:
        code = 2 if resp.status_code in (400, 422) else 3
    raise CliError(code, f"{path} failed ({resp.status_code}): {message}")


def _read_text(path, what):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise CliError(2, f"cannot read {what} {path}: {exc}") from exc


def _read_bytes(path, what):
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise CliError(2, f"cannot read {what} {path}: {exc}") from exc


def _write_artifact(path, data):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        mode = "wb" if isinstance(data, bytes) else "w"
        kwargs = {} if isinstance(data, bytes) else {"encoding": "utf-8", "newline": ""}
        with open(path, mode, **kwargs) as f:
            f.write(data)
    except OSError as exc:
        raise CliError(3, f"cannot write {path}: {exc}") from exc


def _experiment_payload(args, extra_overrides=None):
    text = _read_text(args.config, "config") if args.config else ""
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = str(args.seed)
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = str(args.workers)
    if getattr(args, "detector", None):
        overrides["detector"] = args.detector
    if getattr(args, "endpoint", None):
        overrides["endpoint"] = args.endpoint
    if getattr(args, "prompt", None):
        overrides["prompt"] = args.prompt
    if extra_overrides:
        overrides.update(extra_overrides)
    return {"config_text": text, "overrides": overrides}


def _cmd_ce_sweep(args, client):
    body = _post(client, "/experiments/ce-sweep", _experiment_payload(args))
    out = os.path.join(args.out, "ce_sweep.csv")
    _write_artifact(out, body["csv"])
    print(f"wrote {out}")
    return 0


def _cmd_har_train(args, client):
    extra = {}
    if args.features:
        extra["features_path"] = args.features
    if args.manifest:
        extra["manifest_path"] = args.manifest
    body = _post(client, "/experiments/har", _experiment_payload(args, extra))
    csv_path = os.path.join(args.out, "har_trace.csv")
    head_path = os.path.join(args.out, "har_head.bin")
    _write_artifact(csv_path, body["csv"])
    _write_artifact(head_path, base64.b64decode(body["head_b64"]))
    print(f"wrote {csv_path} and {head_path}")
    print(f"parameter count: {body['param_count']}")
    print(f"final test accuracy: {body['final_accuracy']:.4f}")
    return 0


def _cmd_loc_train(args, client):
    body = _post(client, "/experiments/loc", _experiment_payload(args))
    csv_path = os.path.join(args.out, "loc_results.csv")
    head_path = os.path.join(args.out, "loc_head.bin")
    _write_artifact(csv_path, body["csv"])
    _write_artifact(head_path, base64.b64decode(body["head_b64"]))
    print(f"wrote {csv_path} and {head_path}")
    for name, count in body["param_counts"].items():
        print(f"parameter count [{name}]: {count}")
    for row in body["summary"]:
        print(
            f"snr {row['snr_db']:g} dB, {row['model']}: "
            f"mean error {row['mean_error_m']:.2f} m"
        )
    return 0


def _cmd_encode_image(args, client):
    payload = {
        "encoding": args.encoding,
        "m": args.m,
        "n": args.n,
        "beta": args.beta,
        "gamma": args.gamma,
        "path_count": args.paths,
        "snr_db": args.snr,
        "seed": args.seed if args.seed is not None else 0,
        "on_grid": args.on_grid,
        "frames": args.frames,
        "out_h": args.out_h,
        "out_w": args.out_w,
    }
    body = _post(client, "/images/encode", payload)
    _write_artifact(args.out, base64.b64decode(body["png_b64"]))
    power = body.get("channel_power")
    power_note = f", channel power {power:.4f}" if power is not None else ""
    print(
        f"wrote {args.out} ({body['width']}x{body['height']} {body['encoding']}, "
        f"norm [{body['norm_min']:.4g}, {body['norm_max']:.4g}]{power_note})"
    )
    return 0


def _cmd_detect(args, client):
    png = _read_bytes(args.image, "image")
    if args.endpoint:
        from .detection import DetectionServiceError, EmptyDetectionsError, detect_external

        extra = {"known_count": args.known_count} if args.known_count else None
        try:
            dets = detect_external(png, args.prompt or "bright spot", args.endpoint, extra=extra)
            out = [{"bbox": [float(v) for v in d.box], "score": d.confidence} for d in dets]
        except EmptyDetectionsError:
            out = []
        except DetectionServiceError as exc:
            raise CliError(4, f"external detection failed: {exc}") from exc
    else:
        payload = {"image": base64.b64encode(png).decode("ascii")}
        if args.prompt:
            payload["prompt"] = args.prompt
        if args.known_count:
            payload["known_count"] = args.known_count
        out = _post(client, "/detect", payload)
    text = json.dumps(out, indent=2)
    if args.out:
        _write_artifact(args.out, text + "\n")
        print(f"wrote {args.out} ({len(out)} detections)")
    else:
        print(text)
    return 0


def _cmd_extract_mock(args, client):
    from .features import write_feature_file, write_manifest

    base = args.out
    seed = args.seed if args.seed is not None else 0
    if args.har_csv:
        payload = {
            "csv_path": args.har_csv,
            "t": args.t,
            "m": args.m,
            "n": args.n,
            "k": args.k,
            "seed": seed,
        }
        body = _post(client, "/features/extract-har-csv", payload)
        rows = np.frombuffer(
            base64.b64decode(body["features_b64"]), dtype="<f4"
        ).reshape(body["count"], body["dim"])
        fvec = base + ".fvec"
        manifest = base + ".jsonl"
        try:
            os.makedirs(os.path.dirname(os.path.abspath(fvec)), exist_ok=True)
            write_feature_file(fvec, rows, source_id=f"mock-k{args.k}-seed{seed}")
            write_manifest(
                manifest,
                "har",
                args.k,
                [{"feature_row": i, "label": lab} for i, lab in enumerate(body["labels"])],
            )
        except OSError as exc:
            raise CliError(3, f"cannot write outputs: {exc}") from exc
        print(f"wrote {fvec} and {manifest} ({body['count']} rows, k={args.k})")
        return 0
    if not args.images:
        raise CliError(2, "extract-mock needs --images DIR or --har-csv FILE")
    try:
        names = sorted(
            f for f in os.listdir(args.images) if f.lower().endswith(".png")
        )
    except OSError as exc:
        raise CliError(2, f"cannot list {args.images}: {exc}") from exc
    if not names:
        raise CliError(2, f"no .png files in {args.images}")
    feats = np.zeros((len(names), args.k), dtype=np.float32)
    for i, name in enumerate(names):
        png = _read_bytes(os.path.join(args.images, name), "image")
        body = _post(
            client,
            "/features/extract-mock",
            {"png_b64": base64.b64encode(png).decode("ascii"), "k": args.k, "seed": seed},
        )
        feats[i] = body["features"]
    fvec = base + ".fvec"
    listing = base + ".sources.jsonl"
    try:
        os.makedirs(os.path.dirname(os.path.abspath(fvec)), exist_ok=True)
        write_feature_file(fvec, feats, source_id=f"mock-k{args.k}-seed{seed}")
        with open(listing, "w", encoding="utf-8") as f:
            for i, name in enumerate(names):
                f.write(json.dumps({"feature_row": i, "source": name}) + "\n")
    except OSError as exc:
        raise CliError(3, f"cannot write outputs: {exc}") from exc
    print(f"wrote {fvec} and {listing} ({len(names)} rows, k={args.k})")
    return 0


def _cmd_plot(args, client):
    csv_text = _read_text(args.csv, "csv")
    body = _post(client, "/plots", {"csv_text": csv_text, "kind": args.kind})
    _write_artifact(args.out, body["svg"])
    print(f"wrote {args.out}")
    return 0


def _cmd_serve(args, _client):
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="csibench", description=__doc__.splitlines()[0])
    parser.add_argument("--server", default="", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        return p

    p = add("ce-sweep", _cmd_ce_sweep, "run the channel-estimation NMSE sweep")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--workers", type=int, help="trial worker threads")
    p.add_argument("--detector", choices=("builtin", "external"))
    p.add_argument("--endpoint", help="external detection service URL")
    p.add_argument("--prompt", help="detection prompt")
    p.add_argument("--out", default="out", help="output directory")

    p = add("har-train", _cmd_har_train, "train the activity classification head")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--features", help="feature file path (server-local)")
    p.add_argument("--manifest", help="manifest path (server-local)")
    p.add_argument("--out", default="out")

    p = add("loc-train", _cmd_loc_train, "train the localization head and baselines")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")

    p = add("encode-image", _cmd_encode_image, "synthesize a channel and encode it to PNG")
    p.add_argument("--encoding", default="rgb", choices=("rgb", "grayscale", "two_channel"))
    p.add_argument("--m", type=int, default=32)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--beta", type=int, default=4)
    p.add_argument("--gamma", type=int, default=4)
    p.add_argument("--paths", type=int, default=3)
    p.add_argument("--snr", type=float, default=20.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--on-grid", action="store_true")
    p.add_argument("--frames", type=int, default=8, help="grayscale stack depth")
    p.add_argument("--out-h", type=int, default=64)
    p.add_argument("--out-w", type=int, default=64)
    p.add_argument("--out", default="out/encoded.png")

    p = add("detect", _cmd_detect, "run path-spot detection on a PNG")
    p.add_argument("--image", required=True, help="PNG file to analyze")
    p.add_argument("--endpoint", help="external detection service URL (default: the workbench service)")
    p.add_argument("--prompt", help="detection prompt")
    p.add_argument("--known-count", type=int, help="expected number of spots")
    p.add_argument("--out", help="write detections JSON here instead of stdout")

    p = add("extract-mock", _cmd_extract_mock, "extract mock features to a feature file")
    p.add_argument("--images", help="directory of PNG files")
    p.add_argument("--har-csv", help="activity CSV file (server-local)")
    p.add_argument("--t", type=int, default=250, help="frames per CSV group")
    p.add_argument("--m", type=int, default=3, help="antennas per CSV frame")
    p.add_argument("--n", type=int, default=30, help="subcarriers per CSV frame")
    p.add_argument("--k", type=int, default=1000, help="feature dimension")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out/features", help="output base path")

    p = add("plot", _cmd_plot, "render a results CSV to SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", required=True, choices=("ce_sweep", "har", "loc"))
    p.add_argument("--out", default="out/plot.svg")

    p = add("serve", _cmd_serve, "run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    client = None
    try:
        if args.fn is not _cmd_serve:
            client = _make_client(args.server)
        return args.fn(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return 3
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
