"""Batch feature extraction: directory of PNGs in, feature file + sources out."""

import os

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .backbones import build_feature_model, get_backbone_spec, preprocess
from .featurefile import write_feature_file, write_sources

__all__ = ["ExtractError", "extract_batch"]


class ExtractError(RuntimeError):
    """Any condition that fails the whole batch; nothing is written."""


def _load_images(image_dir):
    try:
        names = sorted(f for f in os.listdir(image_dir) if f.lower().endswith(".png"))
    except OSError as exc:
        raise ExtractError(f"cannot list {image_dir}: {exc}") from exc
    if not names:
        raise ExtractError(f"no .png files in {image_dir}")
    tensors = []
    for name in names:
        path = os.path.join(image_dir, name)
        try:
            with Image.open(path) as img:
                tensors.append(preprocess(img))
        except (OSError, UnidentifiedImageError) as exc:
            raise ExtractError(f"unreadable image {name}: {exc}") from exc
    return names, tensors


def extract_batch(image_dir, backbone, out, batch_size=8, init="seeded"):
    """Run the backbone over every PNG in image_dir, sorted by filename.

    Writes `<out>.fvec` plus `<out>.sources.jsonl` mapping row -> filename.
    Validation errors (unreadable image, wrong feature dimension) raise
    ExtractError before any output exists.  Returns the row count.
    """
    spec = get_backbone_spec(backbone) if isinstance(backbone, str) else backbone
    names, tensors = _load_images(image_dir)
    model = build_feature_model(spec, init=init)
    rows = []
    with torch.no_grad():
        for start in range(0, len(tensors), batch_size):
            batch = torch.stack(tensors[start : start + batch_size])
            feats = model(batch)
            if feats.ndim != 2 or feats.shape[1] != spec.expected_dim:
                raise ExtractError(
                    f"{spec.name} produced shape {tuple(feats.shape)}, "
                    f"expected (*, {spec.expected_dim})"
                )
            rows.append(feats.numpy().astype(np.float32))
    features = np.concatenate(rows, axis=0)
    out = str(out)
    base = out[: -len(".fvec")] if out.endswith(".fvec") else out
    parent = os.path.dirname(os.path.abspath(base))
    os.makedirs(parent, exist_ok=True)
    write_feature_file(base + ".fvec", features, source_id=f"{spec.name}-{init}")
    write_sources(base + ".sources.jsonl", names)
    return len(names)
