"""Feature persistence, dataset generation, and ingestion boundaries.

FeatureFile binary layout (all little-endian):

    magic "FVEC" | u16 version | u32 count | u32 dim |
    count*dim float32, row-major | u32 source_id byte length | UTF-8 source_id

Sample manifests are JSON lines: a header object {"task": "har"|"loc",
"k": K} followed by one record per sample referencing a feature row.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .channel import PathTriplet, synth_channel
from .imaging import CsiImage

__all__ = [
    "FeatureFileError",
    "FeatureMagicError",
    "FeatureTruncatedError",
    "FeatureDimError",
    "ManifestError",
    "HarCsvError",
    "write_feature_file",
    "feature_file_bytes",
    "read_feature_file",
    "read_feature_file_bytes",
    "write_manifest",
    "read_manifest",
    "mock_extract",
    "LocScenario",
    "los_path",
    "gen_loc_dataset",
    "ingest_har_csv",
]

_FVEC_MAGIC = b"FVEC"
_FVEC_VERSION = 1
# refuse absurd dimensions before allocating anything
_MAX_DIM = 1 << 24


class FeatureFileError(ValueError):
    pass


class FeatureMagicError(FeatureFileError):
    pass


class FeatureTruncatedError(FeatureFileError):
    pass


class FeatureDimError(FeatureFileError):
    pass


class ManifestError(ValueError):
    pass


class HarCsvError(ValueError):
    pass


def feature_file_bytes(features, source_id=""):
    feats = np.ascontiguousarray(np.atleast_2d(np.asarray(features, dtype="<f4")))
    if feats.ndim != 2:
        raise FeatureDimError("features must be a 2-D array")
    count, dim = feats.shape
    if dim > _MAX_DIM:
        raise FeatureDimError(f"dim {dim} exceeds limit {_MAX_DIM}")
    sid = source_id.encode("utf-8")
    head = struct.pack("<4sHII", _FVEC_MAGIC, _FVEC_VERSION, count, dim)
    return head + feats.tobytes() + struct.pack("<I", len(sid)) + sid


def write_feature_file(path, features, source_id=""):
    with open(path, "wb") as f:
        f.write(feature_file_bytes(features, source_id))


def read_feature_file_bytes(blob):
    """Parse a FeatureFile; size arithmetic is validated before allocation."""
    if len(blob) < 14:
        raise FeatureTruncatedError(f"file is {len(blob)} bytes, header needs 14")
    magic, version, count, dim = struct.unpack_from("<4sHII", blob, 0)
    if magic != _FVEC_MAGIC:
        raise FeatureMagicError(f"bad magic {magic!r}")
    if version != _FVEC_VERSION:
        raise FeatureFileError(f"unsupported version {version}")
    if dim > _MAX_DIM or (count > 0 and dim == 0):
        raise FeatureDimError(f"implausible dimensions count={count} dim={dim}")
    payload = count * dim * 4
    if 14 + payload + 4 > len(blob):
        raise FeatureTruncatedError(
            f"declared payload {payload} bytes does not fit in file of {len(blob)}"
        )
    feats = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=14).reshape(count, dim)
    off = 14 + payload
    (sid_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    if off + sid_len > len(blob):
        raise FeatureTruncatedError("source_id extends past end of file")
    try:
        source_id = blob[off : off + sid_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FeatureFileError(f"source_id is not valid UTF-8: {exc}") from exc
    return feats.astype(np.float32), source_id


def read_feature_file(path):
    with open(path, "rb") as f:
        return read_feature_file_bytes(f.read())


def write_manifest(path, task, k, records):
    if task not in ("har", "loc"):
        raise ManifestError(f"unknown task {task!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"task": task, "k": int(k)}) + "\n")
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def read_manifest(path, feature_count=None, num_classes=None):
    """Validate and load a JSON-lines manifest; errors carry line numbers."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ManifestError("manifest is empty, expected a header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"line 1: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("task") not in ("har", "loc"):
        raise ManifestError("line 1: header must carry task 'har' or 'loc'")
    if not isinstance(header.get("k"), int) or header["k"] <= 0:
        raise ManifestError("line 1: header must carry a positive integer k")
    task = header["task"]
    records = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: not valid JSON: {exc}") from exc
        row = rec.get("feature_row")
        if not isinstance(row, int) or row < 0:
            raise ManifestError(f"line {lineno}: feature_row must be a nonnegative integer")
        if feature_count is not None and row >= feature_count:
            raise ManifestError(
                f"line {lineno}: feature_row {row} out of range for {feature_count} features"
            )
        if task == "har":
            label = rec.get("label")
            if not isinstance(label, int) or label < 0:
                raise ManifestError(f"line {lineno}: label must be a nonnegative integer")
            if num_classes is not None and label >= num_classes:
                raise ManifestError(f"line {lineno}: label {label} out of range [0, {num_classes})")
        else:
            pos = rec.get("position")
            if (
                not isinstance(pos, (list, tuple))
                or len(pos) != 2
                or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in pos)
            ):
                raise ManifestError(f"line {lineno}: position must be two finite numbers")
        records.append(rec)
    return header, records


# projection matrices are pure functions of (seed, k, npix); cache the small ones
_PROJ_CACHE = {}
_PROJ_CACHE_BYTES = 64 << 20


def _projection_rows(seed, k, npix):
    key = (seed, k, npix)
    if key in _PROJ_CACHE:
        return _PROJ_CACHE[key]
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((k, npix)) / math.sqrt(npix)
    if mat.nbytes <= _PROJ_CACHE_BYTES:
        _PROJ_CACHE.clear()  # keep at most one resident matrix
        _PROJ_CACHE[key] = mat
    return mat


def mock_extract(image, k, seed=0):
    """Deterministic stand-in extractor: seeded random projection + tanh.

    The projection matrix depends only on (seed, k, pixel count), never on the
    image, so the map is fixed across calls and runs.  All-zero pixels give an
    all-zero feature.
    """
    if k <= 0:
        raise ValueError("feature dimension must be positive")
    pixels = image.pixels if isinstance(image, CsiImage) else np.asarray(image)
    flat = pixels.astype(np.float64).ravel() / 255.0
    mat = _projection_rows(_seed_key(seed), k, flat.size)
    return np.tanh(mat @ flat)


def _seed_key(seed):
    # hashable form of anything default_rng accepts (ints or int sequences)
    if isinstance(seed, (list, np.ndarray)):
        return tuple(int(s) for s in seed)
    return seed


@dataclass
class LocScenario:
    """Geometry of the synthetic localization scene (meters)."""

    bs_position: tuple = (0.0, 0.0, 25.0)
    region_center: tuple = (200.0, 50.0, 1.5)
    region_radius: float = 50.0
    m: int = 32
    n: int = 32
    delay_span: float = 0.8  # LOS delays stay below this fraction of the grid
    scatter_rel_power_db: float = -10.0
    extra: dict = field(default_factory=dict)

    @property
    def max_range(self):
        bx, by, bz = self.bs_position
        cx, cy, cz = self.region_center
        horiz = math.hypot(cx - bx, cy - by) + self.region_radius
        return math.hypot(horiz, cz - bz)

    @property
    def reference_range(self):
        bx, by, bz = self.bs_position
        cx, cy, cz = self.region_center
        return math.dist((bx, by, bz), (cx, cy, cz))


def los_path(scenario, position):
    """Deterministic LOS path for a user position (x, y) at region height.

    angle = (0.5 * sin(azimuth)) mod 1; delay = 0.8 * range / max_range; gain
    is real positive with magnitude proportional to 1/range (unit magnitude at
    the region center).
    """
    bx, by, bz = scenario.bs_position
    x, y = position
    z = scenario.region_center[2]
    dx, dy, dz = x - bx, y - by, z - bz
    azimuth = math.atan2(dy, dx)
    theta = (0.5 * math.sin(azimuth)) % 1.0
    rng3d = math.sqrt(dx * dx + dy * dy + dz * dz)
    tau = min(rng3d / scenario.max_range, 1.0 - 1e-12) * scenario.delay_span
    gain = scenario.reference_range / rng3d
    return PathTriplet(complex(gain), theta, tau), rng3d


def gen_loc_dataset(scenario, num_users, paths_per_user, seed=0):
    """Synthesize (channel, position, channel_power) triples for random users.

    Positions are uniform over the disk (radius via sqrt of a uniform draw).
    Each user gets one LOS path plus paths_per_user - 1 random scatter paths
    whose complex-Gaussian gains sit scatter_rel_power_db below the LOS power.
    channel_power = ||H||^2 / (M*N).
    """
    if num_users <= 0 or paths_per_user <= 0:
        raise ValueError("num_users and paths_per_user must be positive")
    rng = np.random.default_rng(seed)
    cx, cy, _ = scenario.region_center
    rel = 10.0 ** (scenario.scatter_rel_power_db / 10.0)
    out = []
    for _ in range(num_users):
        r = scenario.region_radius * math.sqrt(rng.random())
        phi = 2.0 * math.pi * rng.random()
        pos = (cx + r * math.cos(phi), cy + r * math.sin(phi))
        los, _ = los_path(scenario, pos)
        paths = [los]
        if paths_per_user > 1:
            sscale = math.sqrt(rel * abs(los.gain) ** 2 / 2.0)
            for _ in range(paths_per_user - 1):
                g = complex(rng.standard_normal() * sscale, rng.standard_normal() * sscale)
                paths.append(PathTriplet(g, float(rng.random()), float(rng.random())))
        h = synth_channel(paths, scenario.m, scenario.n)
        power = float(np.sum(np.abs(h.entries) ** 2) / (scenario.m * scenario.n))
        out.append((h, pos, power))
    return out


def ingest_har_csv(path, t, m, n):
    """Parse activity recordings from CSV into (T x M x N tensor, label) pairs.

    Format: each group is one header line ``label,<int>`` followed by exactly
    t rows of m*n comma-separated moduli (row-major, antenna index varying
    slower than subcarrier).  Labels must lie in [0, 7).  Errors carry the
    offending line (and column, for bad numbers).
    """
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    groups = []
    i = 0
    width = m * n
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        parts = lines[i].split(",")
        if len(parts) != 2 or parts[0].strip() != "label":
            raise HarCsvError(f"line {i + 1}: expected group header 'label,<int>'")
        try:
            label = int(parts[1])
        except ValueError as exc:
            raise HarCsvError(f"line {i + 1}: label is not an integer") from exc
        if not (0 <= label < 7):
            raise HarCsvError(f"line {i + 1}: label {label} outside activity range [0, 7)")
        block = np.empty((t, width))
        for r in range(t):
            lineno = i + 1 + r
            if lineno >= len(lines):
                raise HarCsvError(f"line {lineno + 1}: group needs {t} data rows, file ends early")
            cells = lines[lineno].split(",")
            if len(cells) != width:
                raise HarCsvError(
                    f"line {lineno + 1}: expected {width} values, got {len(cells)}"
                )
            for cidx, cell in enumerate(cells):
                try:
                    block[r, cidx] = float(cell)
                except ValueError as exc:
                    raise HarCsvError(
                        f"line {lineno + 1}, column {cidx + 1}: not a number: {cell!r}"
                    ) from exc
        groups.append((block.reshape(t, m, n), label))
        i += 1 + t
    return groups
