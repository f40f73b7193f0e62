"""Frozen vision-backbone feature extraction and a detection-protocol front end."""

from .backbones import SPECS, BackboneSpec, build_feature_model, get_backbone_spec, preprocess
from .extract import ExtractError, extract_batch
from .featurefile import feature_file_bytes, read_feature_file, write_feature_file, write_sources
from .service import create_app, serve_detection

__all__ = [
    "SPECS",
    "BackboneSpec",
    "build_feature_model",
    "get_backbone_spec",
    "preprocess",
    "ExtractError",
    "extract_batch",
    "feature_file_bytes",
    "read_feature_file",
    "write_feature_file",
    "write_sources",
    "create_app",
    "serve_detection",
]
