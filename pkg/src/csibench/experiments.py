"""Config-driven experiment harness: estimation sweeps, head training, plots.

Configs are flat key = value text files (full-line # comments).  Every run is
reproducible from (config, master_seed): per-trial seeds are master_seed XOR
trial index, sub-streams get fixed integer tags, and emitted CSVs embed the
resolved config (minus execution-only knobs such as the worker count) as
comment lines, so a rerun regenerates byte-identical files regardless of the
worker-pool size.
"""

import dataclasses
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import add_pilot_noise, sample_paths, synth_channel
from .convbaseline import ConvFeatModel, convfeat_param_count, init_convfeat_model
from .detection import (
    DetectionServiceError,
    ExternalDetectorClient,
    PeakDetectorConfig,
    bbox_to_path,
    detect_peaks_builtin,
)
from .estimation import estimate_covariance, lmmse_estimate, ls_estimate, ls_gains, reconstruct
from .features import LocScenario, gen_loc_dataset, mock_extract, read_feature_file, read_manifest
from .heads import (
    TrainConfig,
    adam_train,
    dense_softmax_forward,
    init_dense_head,
    init_loc_head,
    loc_head_forward,
    param_count,
    save_head_bytes,
)
from .imaging import encode_rgb_colormap, encode_two_channel_zero, modulus_normalize, png_bytes, to_angular_delay

__all__ = [
    "ConfigError",
    "PlotDataError",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "run_ce_sweep",
    "run_har",
    "run_loc",
    "emit_plot",
    "loc_denormalize",
]

# sub-stream tags; a seed is [derived_int, tag, ...] fed to numpy's SeedSequence
_S_PATHS = 1
_S_NOISE = 2
_S_COV = 3
_S_SPLIT = 4
_S_HEAD_INIT = 5
_S_TRAIN = 6
_S_LOC_DATA = 7
_S_LOC_SPLIT = 8
_S_LOC_NOISE = 9
_S_MOCK = 10


class ConfigError(ValueError):
    pass


class PlotDataError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "ce_sweep"
    m: int = 64
    n: int = 64
    beta: int = 4
    gamma: int = 4
    path_counts: tuple = (10,)
    snr_db_list: tuple = (0.0, 5.0, 10.0)
    trials: int = 50
    master_seed: int = 1234
    on_grid: bool = True
    pilot_power: float = 1.0
    detector: str = "builtin"
    endpoint: str = ""
    prompt: str = "bright spot"
    known_count: bool = True
    threshold_ratio: float = 0.2
    max_peaks: int = 20
    covariance_samples: int = 1000
    methods: tuple = ("pipeline", "ls", "lmmse")
    workers: int = 1
    output_dir: str = "out"
    # training knobs (har + loc)
    features_path: str = ""
    manifest_path: str = ""
    classes: int = 7
    epochs: int = 0  # 0 picks the task default: 256 for har, 128 for loc
    batch_size: int = 200
    learning_rate: float = 1e-3
    test_fraction: float = 0.2
    # loc task
    num_samples: int = 1200
    paths_per_user: int = 3
    k: int = 128
    out_h: int = 64
    out_w: int = 64
    baselines: tuple = ("nofeat",)

    def resolved_epochs(self):
        if self.epochs > 0:
            return self.epochs
        return 256 if self.task == "har" else 128


_LIST_FIELDS = {
    "path_counts": int,
    "snr_db_list": float,
    "methods": str,
    "baselines": str,
}
_VALID_TASKS = ("ce_sweep", "har", "loc")
_VALID_METHODS = ("pipeline", "ls", "lmmse")
_VALID_BASELINES = ("nofeat", "convfeat")


def parse_config_text(text):
    """Flat key = value lines to a raw string dict; duplicate keys rejected."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _coerce(name, value, target_type):
    try:
        if name in _LIST_FIELDS:
            elem = _LIST_FIELDS[name]
            parts = [p.strip() for p in str(value).split(",") if p.strip()]
            return tuple(elem(p) for p in parts)
        if target_type is bool:
            if isinstance(value, bool):
                return value
            low = str(value).strip().lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return target_type(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field {name!r}: {exc}") from exc


def load_config(path=None, text=None, overrides=None, defaults=None):
    """Build a validated ExperimentConfig from a file/text plus overrides.

    defaults sit below the file, overrides above it; None overrides are
    skipped so callers can pass through optional CLI flags unconditionally.
    """
    raw = {}
    if defaults:
        raw.update(defaults)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if text is not None:
        raw.update(parse_config_text(text))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        target = type(getattr(ExperimentConfig(), key))
        kwargs[key] = _coerce(key, value, target)
    cfg = ExperimentConfig(**kwargs)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    if cfg.task not in _VALID_TASKS:
        raise ConfigError(f"task must be one of {_VALID_TASKS}, got {cfg.task!r}")
    if cfg.m <= 0 or cfg.n <= 0 or cfg.beta <= 0 or cfg.gamma <= 0:
        raise ConfigError("m, n, beta, gamma must be positive")
    if cfg.trials <= 0:
        raise ConfigError("trials must be positive")
    if any(l <= 0 for l in cfg.path_counts):
        raise ConfigError("path_counts must be positive")
    if cfg.detector not in ("builtin", "external"):
        raise ConfigError(f"detector must be builtin or external, got {cfg.detector!r}")
    if cfg.detector == "external" and not cfg.endpoint:
        raise ConfigError("external detector needs an endpoint")
    for meth in cfg.methods:
        if meth not in _VALID_METHODS:
            raise ConfigError(f"unknown method {meth!r}")
    for b in cfg.baselines:
        if b not in _VALID_BASELINES:
            raise ConfigError(f"unknown baseline {b!r}")
    if not (0.0 <= cfg.test_fraction < 1.0):
        raise ConfigError("test_fraction must lie in [0, 1)")
    if cfg.workers <= 0:
        raise ConfigError("workers must be positive")
    if cfg.batch_size <= 0 or cfg.learning_rate <= 0:
        raise ConfigError("batch_size and learning_rate must be positive")
    if cfg.k <= 0 or cfg.num_samples <= 0 or cfg.paths_per_user <= 0:
        raise ConfigError("k, num_samples, paths_per_user must be positive")


def _config_comment_lines(cfg):
    # workers is scheduling-only; results must not depend on it, so it stays out
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "workers":
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"# {f.name} = {value}")
    return lines


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _render_csv(title, cfg, header, rows):
    out = io.StringIO()
    out.write(f"# {title}\n")
    for line in _config_comment_lines(cfg):
        out.write(line + "\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


# --- channel-estimation sweep ---


def _pipeline_estimate(y, l, cfg, ext_client):
    """Image -> detector -> LS gain fit -> reconstruction.  Returns (est, fell_back)."""
    admap = to_angular_delay(y.entries, cfg.beta, cfg.gamma)
    norm, _ = modulus_normalize(admap)
    fell_back = False
    dets = None
    if cfg.detector == "external" and ext_client is not None:
        try:
            png = png_bytes(encode_rgb_colormap(norm))
            extra = {"known_count": l} if cfg.known_count else None
            dets = ext_client.detect(png, extra=extra)
        except DetectionServiceError:
            fell_back = True
            dets = None
    if dets is None:
        det_cfg = PeakDetectorConfig(
            threshold_ratio=cfg.threshold_ratio,
            suppression_radius_w=2 * cfg.beta,
            suppression_radius_h=2 * cfg.gamma,
            max_peaks=cfg.max_peaks,
            known_count=l if cfg.known_count else None,
        )
        dets = detect_peaks_builtin(norm, det_cfg)
    paths = []
    seen = set()
    for d in dets:
        try:
            p = bbox_to_path(d, cfg.beta * cfg.m, cfg.gamma * cfg.n)
        except ValueError:
            continue  # external box out of image bounds; skip it
        key = (p.angle_hat, p.delay_hat)
        if key in seen:
            continue  # identical duplicates would degenerate the dictionary
        seen.add(key)
        paths.append(p)
    if not paths:
        return np.zeros((cfg.m, cfg.n), dtype=np.complex128), fell_back
    fit = ls_gains(y, paths)
    return reconstruct(paths, fit.gains, cfg.m, cfg.n).entries, fell_back


def _ce_trial(cfg, l, snr, snr_idx, trial, cov, ext_client):
    ts = cfg.master_seed ^ trial
    paths = sample_paths(l, [ts, _S_PATHS], cfg.on_grid, cfg.beta, cfg.gamma, cfg.m, cfg.n)
    h = synth_channel(paths, cfg.m, cfg.n)
    y = add_pilot_noise(h, snr, cfg.pilot_power, seed=[ts, _S_NOISE, snr_idx])
    truth = h.entries
    truth_energy = float(np.vdot(truth, truth).real)
    errs = {}
    fell_back = 0
    for method in cfg.methods:
        if method == "pipeline":
            est, fb = _pipeline_estimate(y, l, cfg, ext_client)
            fell_back += int(fb)
        elif method == "ls":
            est = ls_estimate(y).entries
        else:
            est = lmmse_estimate(y, cov).entries
        diff = est - truth
        errs[method] = float(np.vdot(diff, diff).real)
    return trial, errs, truth_energy, fell_back


def run_ce_sweep(cfg):
    """Monte-Carlo NMSE sweep over (SNR, path count) for the configured methods.

    Per cell, the pooled NMSE (total error energy over total channel energy)
    is reported in dB.  External-detector failures fall back to the built-in
    detector and are counted in the fallbacks column.
    """
    if cfg.task != "ce_sweep":
        raise ConfigError(f"run_ce_sweep needs task=ce_sweep, got {cfg.task!r}")
    ext_client = None
    if cfg.detector == "external":
        ext_client = ExternalDetectorClient(
            cfg.endpoint, prompt=cfg.prompt, max_in_flight=cfg.workers
        )
    rows = []
    for l in cfg.path_counts:
        cov = None
        if "lmmse" in cfg.methods:
            # held-out noiseless draws from the same path distribution
            samples = [
                synth_channel(
                    sample_paths(l, [cfg.master_seed, _S_COV, l, j], cfg.on_grid, cfg.beta, cfg.gamma, cfg.m, cfg.n),
                    cfg.m,
                    cfg.n,
                )
                for j in range(cfg.covariance_samples)
            ]
            cov = estimate_covariance(samples)
        for snr_idx, snr in enumerate(cfg.snr_db_list):
            err_by_trial = {meth: np.zeros(cfg.trials) for meth in cfg.methods}
            truth_by_trial = np.zeros(cfg.trials)
            fallbacks = np.zeros(cfg.trials, dtype=int)

            def work(trial, _l=l, _snr=snr, _si=snr_idx, _cov=cov):
                return _ce_trial(cfg, _l, _snr, _si, trial, _cov, ext_client)

            if cfg.workers == 1:
                results = [work(t) for t in range(cfg.trials)]
            else:
                with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                    results = list(pool.map(work, range(cfg.trials)))
            for trial, errs, truth_energy, fb in results:
                for meth, e in errs.items():
                    err_by_trial[meth][trial] = e
                truth_by_trial[trial] = truth_energy
                fallbacks[trial] = fb
            total_truth = float(np.sum(truth_by_trial))  # summed in trial order
            for meth in cfg.methods:
                linear = float(np.sum(err_by_trial[meth])) / total_truth
                db = float("-inf") if linear == 0.0 else 10.0 * math.log10(linear)
                rows.append((f"{snr:g}", l, meth, db, cfg.trials, int(fallbacks.sum())))
    if ext_client is not None:
        ext_client.close()
    csv = _render_csv(
        "ce-sweep results",
        cfg,
        ("snr_db", "path_count", "method", "mean_nmse_db", "trials", "fallbacks"),
        rows,
    )
    return {"csv": csv, "rows": rows}


# --- activity-recognition head training ---


def _stratified_split(labels, test_fraction, seed):
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(len(idx) * test_fraction)
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(test_idx, dtype=int))


def run_har(cfg):
    """Train the dense softmax head on stored features + manifest labels."""
    if cfg.task != "har":
        raise ConfigError(f"run_har needs task=har, got {cfg.task!r}")
    if not cfg.features_path or not cfg.manifest_path:
        raise ConfigError("har task needs features_path and manifest_path")
    features, _source = read_feature_file(cfg.features_path)
    header, records = read_manifest(
        cfg.manifest_path, feature_count=features.shape[0], num_classes=cfg.classes
    )
    if header["task"] != "har":
        raise ConfigError(f"manifest task {header['task']!r} is not har")
    k = features.shape[1]
    if header["k"] != k:
        raise ConfigError(f"manifest k={header['k']} does not match feature dim {k}")
    x = features[[r["feature_row"] for r in records]].astype(np.float64)
    labels = np.array([r["label"] for r in records], dtype=int)
    train_idx, test_idx = _stratified_split(labels, cfg.test_fraction, [cfg.master_seed, _S_SPLIT])
    x_train, y_train = x[train_idx], labels[train_idx]
    x_test, y_test = x[test_idx], labels[test_idx]
    head = init_dense_head(k, cfg.classes, seed=[cfg.master_seed, _S_HEAD_INIT])
    tc = TrainConfig(
        epochs=cfg.resolved_epochs(),
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=[cfg.master_seed, _S_TRAIN],
    )

    def eval_acc(model, _epoch, _loss):
        xe, ye = (x_test, y_test) if len(test_idx) else (x_train, y_train)
        probs = dense_softmax_forward(model, xe)
        return float(np.mean(np.argmax(probs, axis=1) == ye))

    head, trace, accs = adam_train(head, (x_train, y_train), tc, epoch_callback=eval_acc)
    rows = [(epoch, loss, acc) for epoch, (loss, acc) in enumerate(zip(trace, accs))]
    csv = _render_csv("har-train results", cfg, ("epoch", "train_loss", "test_accuracy"), rows)
    return {
        "csv": csv,
        "head_bytes": save_head_bytes(head),
        "param_count": param_count("dense", k, cfg.classes),
        "final_accuracy": accs[-1],
    }


# --- localization head training ---


def loc_denormalize(pred, scenario):
    """Map sigmoid outputs in (0,1)^2 back to meters in the region's bounding square."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    cx, cy, _ = scenario.region_center
    r = scenario.region_radius
    out = np.empty_like(pred)
    out[:, 0] = cx - r + pred[:, 0] * 2.0 * r
    out[:, 1] = cy - r + pred[:, 1] * 2.0 * r
    return out


def _loc_normalize_targets(positions, scenario):
    cx, cy, _ = scenario.region_center
    r = scenario.region_radius
    pos = np.asarray(positions, dtype=np.float64)
    t = np.empty_like(pos)
    t[:, 0] = (pos[:, 0] - (cx - r)) / (2.0 * r)
    t[:, 1] = (pos[:, 1] - (cy - r)) / (2.0 * r)
    return t


def _minmax_unit(a):
    lo = a.min()
    hi = a.max()
    if hi > lo:
        return (a - lo) / (hi - lo)
    return np.zeros_like(a)


def run_loc(cfg):
    """Train the localization head on mock features, plus configured baselines.

    For every SNR in snr_db_list each model trains from scratch; per-epoch
    rows carry the training loss and the mean test position error in meters.
    """
    if cfg.task != "loc":
        raise ConfigError(f"run_loc needs task=loc, got {cfg.task!r}")
    scenario = LocScenario(m=cfg.m, n=cfg.n)
    data = gen_loc_dataset(scenario, cfg.num_samples, cfg.paths_per_user, seed=[cfg.master_seed, _S_LOC_DATA])
    positions = np.array([pos for _, pos, _ in data])
    targets = _loc_normalize_targets(positions, scenario)
    rng = np.random.default_rng([cfg.master_seed, _S_LOC_SPLIT])
    perm = rng.permutation(cfg.num_samples)
    n_test = int(cfg.num_samples * cfg.test_fraction)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    model_names = ["feature"] + [b for b in cfg.baselines]
    rows = []
    summary = []
    feature_head_bytes = None
    for snr_idx, snr in enumerate(cfg.snr_db_list):
        feats = np.zeros((cfg.num_samples, cfg.k))
        f_powers = np.zeros(cfg.num_samples)
        raw_vecs = np.zeros((cfg.num_samples, 2 * cfg.m * cfg.n)) if "nofeat" in cfg.baselines else None
        raw_imgs = np.zeros((cfg.num_samples, cfg.m, cfg.n, 2)) if "convfeat" in cfg.baselines else None
        raw_powers = np.zeros(cfg.num_samples)
        for i, (h, _pos, _cpow) in enumerate(data):
            y = add_pilot_noise(h, snr, cfg.pilot_power, seed=[cfg.master_seed, _S_LOC_NOISE, snr_idx, i])
            admap = to_angular_delay(y.entries, cfg.beta, cfg.gamma)
            img = encode_two_channel_zero(admap, cfg.out_h, cfg.out_w)
            feats[i] = mock_extract(img, cfg.k, seed=[cfg.master_seed, _S_MOCK])
            f_powers[i] = img.channel_power
            hs = y.entries / math.sqrt(y.pilot_power)
            raw_powers[i] = float(np.sum(np.abs(hs) ** 2) / hs.size)
            if raw_vecs is not None or raw_imgs is not None:
                lo = min(hs.real.min(), hs.imag.min())
                hi = max(hs.real.max(), hs.imag.max())
                span = (hi - lo) if hi > lo else 1.0
                re_n = (hs.real - lo) / span
                im_n = (hs.imag - lo) / span
                if raw_vecs is not None:
                    raw_vecs[i] = np.concatenate([re_n.ravel(), im_n.ravel()])
                if raw_imgs is not None:
                    raw_imgs[i] = np.stack([re_n, im_n], axis=2)
        for mi, name in enumerate(model_names):
            if name == "feature":
                xdata, powers = feats, f_powers
                model = init_loc_head(cfg.k, seed=[cfg.master_seed, _S_HEAD_INIT, snr_idx, mi])
            elif name == "nofeat":
                xdata, powers = raw_vecs, raw_powers
                model = init_loc_head(2 * cfg.m * cfg.n, seed=[cfg.master_seed, _S_HEAD_INIT, snr_idx, mi])
            else:  # convfeat
                xdata, powers = raw_imgs, raw_powers
                model = init_convfeat_model(seed=[cfg.master_seed, _S_HEAD_INIT, snr_idx, mi])
            p_mu = float(powers[train_idx].mean())
            p_sd = float(powers[train_idx].std()) or 1.0
            p_std = (powers - p_mu) / p_sd
            test_x, test_p = xdata[test_idx], p_std[test_idx]
            test_pos = positions[test_idx]

            def eval_err(m_, _epoch, _loss, _tx=test_x, _tp=test_p, _tpos=test_pos):
                if isinstance(m_, ConvFeatModel):
                    feat, _, _, _ = m_._features(_tx)
                    pred = loc_head_forward(m_.head, feat, _tp)
                else:
                    pred = loc_head_forward(m_, _tx, _tp)
                xy = loc_denormalize(pred, scenario)
                return float(np.mean(np.linalg.norm(xy - _tpos, axis=1)))

            tc = TrainConfig(
                epochs=cfg.resolved_epochs(),
                batch_size=cfg.batch_size,
                learning_rate=cfg.learning_rate,
                seed=[cfg.master_seed, _S_TRAIN, snr_idx, mi],
            )
            model, trace, errs = adam_train(
                model, (xdata[train_idx], p_std[train_idx], targets[train_idx]), tc, epoch_callback=eval_err
            )
            for epoch, (loss, err) in enumerate(zip(trace, errs)):
                rows.append((f"{snr:g}", name, epoch, loss, err))
            summary.append({"snr_db": snr, "model": name, "mean_error_m": errs[-1]})
            if name == "feature":
                feature_head_bytes = save_head_bytes(model)
    csv = _render_csv(
        "loc-train results", cfg, ("snr_db", "model", "epoch", "train_loss", "mean_error_m"), rows
    )
    counts = {"feature": param_count("loc", cfg.k)}
    if "nofeat" in cfg.baselines:
        counts["nofeat"] = param_count("loc", 2 * cfg.m * cfg.n)
    if "convfeat" in cfg.baselines:
        counts["convfeat"] = convfeat_param_count()
    return {
        "csv": csv,
        "head_bytes": feature_head_bytes,
        "summary": summary,
        "param_counts": counts,
    }


# --- plotting ---


def _parse_csv_text(text):
    header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = stripped.split(",")
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise PlotDataError(
                f"line {lineno}: expected {len(header)} cells, got {len(cells)}"
            )
        rows.append((lineno, cells))
    if header is None:
        raise PlotDataError("no header row found")
    if not rows:
        raise PlotDataError("no data rows found")
    return header, rows


def _cell(header, cells, name, lineno, conv=float):
    try:
        col = header.index(name)
    except ValueError as exc:
        raise PlotDataError(f"missing column {name!r}") from exc
    try:
        return conv(cells[col])
    except ValueError as exc:
        raise PlotDataError(f"line {lineno}: bad value for {name!r}: {cells[col]!r}") from exc


def emit_plot(csv_text, kind):
    """Render a CSV produced by the harness to deterministic SVG text.

    Determinism: fixed hash salt, no date metadata, Agg backend.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "csibench"
    header, rows = _parse_csv_text(csv_text)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if kind == "ce_sweep":
        series = {}
        for lineno, cells in rows:
            snr = _cell(header, cells, "snr_db", lineno)
            l = _cell(header, cells, "path_count", lineno, int)
            meth = _cell(header, cells, "method", lineno, str)
            db = _cell(header, cells, "mean_nmse_db", lineno)
            series.setdefault((meth, l), []).append((snr, db))
        many_l = len({l for (_, l) in series}) > 1
        for (meth, l), pts in series.items():
            pts.sort()
            label = f"{meth} (L={l})" if many_l else meth
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("NMSE [dB]")
    elif kind == "har":
        pts = [
            (
                _cell(header, cells, "epoch", lineno, int),
                _cell(header, cells, "train_loss", lineno),
                _cell(header, cells, "test_accuracy", lineno),
            )
            for lineno, cells in rows
        ]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label="train_loss")
        ax.plot([p[0] for p in pts], [p[2] for p in pts], label="test_accuracy")
        ax.set_xlabel("epoch")
    elif kind == "loc":
        final = {}
        for lineno, cells in rows:
            snr = _cell(header, cells, "snr_db", lineno)
            model = _cell(header, cells, "model", lineno, str)
            epoch = _cell(header, cells, "epoch", lineno, int)
            err = _cell(header, cells, "mean_error_m", lineno)
            key = (model, snr)
            if key not in final or epoch >= final[key][0]:
                final[key] = (epoch, err)
        series = {}
        for (model, snr), (_, err) in final.items():
            series.setdefault(model, []).append((snr, err))
        for model, pts in sorted(series.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=model)
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("mean position error [m]")
    else:
        raise PlotDataError(f"unknown plot kind {kind!r}")
    ax.grid(True, alpha=0.4)
    ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
