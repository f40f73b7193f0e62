"""Feature-file and sources-manifest writers.

The binary layout is the workbench's documented interchange format: header
struct `<4sHII` (magic b"FVEC", version 1, row count, dim), float32
little-endian row-major payload, then a u32-length-prefixed UTF-8 source id.
The sidecar sources manifest is JSON-lines of {"feature_row": i, "source":
filename}.  The reader here exists for round-trip verification; consumers on
the workbench side use their own.
"""

import json
import struct

import numpy as np

__all__ = ["feature_file_bytes", "write_feature_file", "read_feature_file", "write_sources"]

_MAGIC = b"FVEC"
_VERSION = 1


def feature_file_bytes(features, source_id=""):
    feats = np.ascontiguousarray(np.atleast_2d(np.asarray(features, dtype="<f4")))
    if feats.ndim != 2:
        raise ValueError("features must be a 2-D array")
    count, dim = feats.shape
    sid = source_id.encode("utf-8")
    head = struct.pack("<4sHII", _MAGIC, _VERSION, count, dim)
    return head + feats.tobytes() + struct.pack("<I", len(sid)) + sid


def write_feature_file(path, features, source_id=""):
    with open(path, "wb") as f:
        f.write(feature_file_bytes(features, source_id))


def read_feature_file(path):
    with open(path, "rb") as f:
        blob = f.read()
    magic, version, count, dim = struct.unpack_from("<4sHII", blob, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"not a version-{_VERSION} feature file")
    feats = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=14)
    off = 14 + count * dim * 4
    (sid_len,) = struct.unpack_from("<I", blob, off)
    sid = blob[off + 4 : off + 4 + sid_len].decode("utf-8")
    return feats.reshape(count, dim).astype(np.float32), sid


def write_sources(path, names):
    with open(path, "w", encoding="utf-8") as f:
        for i, name in enumerate(names):
            f.write(json.dumps({"feature_row": i, "source": name}) + "\n")
