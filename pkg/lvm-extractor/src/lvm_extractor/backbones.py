"""Frozen torchvision backbones wired to emit fixed-dimension feature rows.

Each supported backbone is cut at its global-pooled penultimate layer, except
mobilenet_v3 which emits its full 1000-way classifier output; the registry
records the dimension every model must produce, and extraction verifies it.

Weight policy: "pretrained" loads the published torchvision weights (needs a
populated download cache), "seeded" (the default) fills the parameters from a
per-backbone seeded generator.  Seeded models are useless as semantic feature
extractors but are deterministic, cheap, and produce the exact tensor shapes
and file formats of the real thing, which is what an offline pipeline needs
to be developed and tested against.
"""

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models

__all__ = ["BackboneSpec", "SPECS", "get_backbone_spec", "build_feature_model"]


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    expected_dim: int
    tv_builder: str  # torchvision.models attribute
    note: str = ""


# convnext_xlarge has no torchvision build; convnext_large (dim 1536) is the
# documented substitute, and the emitted dimension follows the substitute.
SPECS = {
    s.name: s
    for s in (
        BackboneSpec("convnext_tiny", 768, "convnext_tiny"),
        BackboneSpec("convnext_base", 1024, "convnext_base"),
        BackboneSpec(
            "convnext_xlarge", 1536, "convnext_large", note="substitute: convnext_large"
        ),
        BackboneSpec("resnet50", 2048, "resnet50"),
        BackboneSpec("vgg19", 4096, "vgg19"),
        BackboneSpec(
            "mobilenet_v3", 1000, "mobilenet_v3_large", note="emits classifier output"
        ),
    )
}


def get_backbone_spec(name):
    try:
        return SPECS[name]
    except KeyError:
        raise ValueError(
            f"unknown backbone {name!r}, expected one of {sorted(SPECS)}"
        ) from None


def _stable_seed(name):
    # order-independent small hash so each backbone gets its own stream
    return sum((i + 1) * b for i, b in enumerate(name.encode("utf-8"))) % (2**31)


def _seeded_fill(model, name):
    gen = torch.Generator().manual_seed(_stable_seed(name))
    with torch.no_grad():
        for _pname, p in model.named_parameters():
            p.copy_(torch.empty_like(p).normal_(mean=0.0, std=0.05, generator=gen))


def build_feature_model(spec, init="seeded"):
    """Build the backbone, cut it at the feature layer, freeze it, eval mode."""
    if isinstance(spec, str):
        spec = get_backbone_spec(spec)
    if init not in ("seeded", "pretrained"):
        raise ValueError(f"init must be 'seeded' or 'pretrained', got {init!r}")
    builder = getattr(models, spec.tv_builder)
    model = builder(weights="DEFAULT" if init == "pretrained" else None)
    if init == "seeded":
        _seeded_fill(model, spec.name)
    if spec.name.startswith("convnext"):
        # keep LayerNorm2d + Flatten, drop the final Linear
        model.classifier = nn.Sequential(*list(model.classifier.children())[:-1])
    elif spec.name == "resnet50":
        model.fc = nn.Identity()
    elif spec.name == "vgg19":
        model.classifier = nn.Sequential(*list(model.classifier.children())[:-1])
    # mobilenet_v3 stays intact: the 1000-way classifier output is the feature
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


# standard ImageNet evaluation preprocessing: shorter side to 256, center
# crop 224, scale to [0, 1], channelwise normalize
_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)


def preprocess(img):
    """PIL RGB image -> float tensor (3, 224, 224)."""
    img = img.convert("RGB")
    w, h = img.size
    scale = 256.0 / min(w, h)
    img = img.resize((max(1, round(w * scale)), max(1, round(h * scale))), 2)  # bilinear
    w, h = img.size
    left = (w - 224) // 2
    top = (h - 224) // 2
    img = img.crop((left, top, left + 224, top + 224))
    x = torch.frombuffer(bytearray(img.tobytes()), dtype=torch.uint8)
    x = x.view(224, 224, 3).permute(2, 0, 1).float() / 255.0
    return (x - _MEAN) / _STD
