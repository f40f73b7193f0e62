"""Angular-delay maps and their image encodings.

The spatial-frequency channel is projected onto an oversampled angle/delay
grid with truncated DFT factors: Ytil = F_a^T @ Y @ conj(F_d), where F_a is
the first M rows of the (beta*M)-point DFT and F_d the first N rows of the
(gamma*N)-point DFT.  The delay factor is conjugated so that an on-grid path
(angle k/(beta*M), delay q/(gamma*N)) produces its peak at delay bin q and
angle bin (beta*M - k) mod beta*M; the image-plane inverse of that placement
is exactly angle_hat = (1 - w/(beta*M)) mod 1, delay_hat = h/(gamma*N).

Image convention: rows index delay (h), columns index angle (w).  The map
type itself stores entries angle-major, (beta*M) x (gamma*N); the transpose
happens when a map becomes an image.
"""

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .channel import ChannelMatrix, PilotObservation

__all__ = [
    "AngularDelayMap",
    "CsiImage",
    "dft_basis",
    "to_angular_delay",
    "modulus_normalize",
    "encode_rgb_colormap",
    "grayscale_reshape_resize",
    "encode_two_channel_zero",
    "bilinear_resize",
    "decode_intensity",
    "png_bytes",
    "write_png",
    "read_png",
]


@dataclass
class AngularDelayMap:
    """Complex (beta*m) x (gamma*n) projection; rows angle bins, cols delay bins."""

    entries: np.ndarray
    m: int
    n: int
    beta: int
    gamma: int

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        want = (self.beta * self.m, self.gamma * self.n)
        if self.entries.shape != want:
            raise ValueError(f"map shape {self.entries.shape} != {want}")


@dataclass
class CsiImage:
    """8-bit RGB image with the normalization record needed to invert it."""

    pixels: np.ndarray  # uint8, (height, width, 3)
    norm_record: tuple  # (min, max) of the values mapped onto [0, 1]
    encoding_id: str
    channel_power: float | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.dtype != np.uint8 or self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError("pixels must be uint8 with shape (h, w, 3)")


def dft_basis(size, oversample):
    """Truncated DFT factor: entry (r, c) = exp(-2j*pi*r*c/(oversample*size)).

    Shape (size, oversample*size); row 0 and column 0 are all ones.
    """
    if size <= 0 or oversample <= 0:
        raise ValueError("size and oversample must be positive")
    r = np.arange(size)
    c = np.arange(oversample * size)
    return np.exp(-2j * np.pi * np.outer(r, c) / (oversample * size))


def _raw_entries(y):
    if isinstance(y, (ChannelMatrix, PilotObservation)):
        return y.entries
    return np.asarray(y, dtype=np.complex128)


def to_angular_delay(y, beta=4, gamma=4):
    """Project an M x N matrix onto the oversampled angular-delay grid.

    Linear in y.  The angle side uses the forward kernel, the delay side the
    conjugated kernel, so on-grid paths land at (delay bin q, angle bin
    (beta*M - k) mod beta*M) with peak modulus M*N*|gain|.
    """
    entries = _raw_entries(y)
    if entries.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    m, n = entries.shape
    fa = dft_basis(m, beta)
    fd = dft_basis(n, gamma)
    out = fa.T @ entries @ np.conj(fd)
    return AngularDelayMap(out, m, n, beta, gamma)


def modulus_normalize(admap):
    """Min-max normalize |entries| onto [0, 1] in image orientation.

    Returns (norm, record): norm has shape (gamma*n, beta*m) — rows delay,
    columns angle — and record = (min, max) of the modulus before scaling.
    A constant-modulus map normalizes to all zeros with record (c, c).
    """
    mod = np.abs(admap.entries).T  # image plane: delay rows, angle columns
    lo = float(mod.min())
    hi = float(mod.max())
    if hi > lo:
        norm = (mod - lo) / (hi - lo)
    else:
        norm = np.zeros_like(mod)
    return norm, (lo, hi)


def _quantize8(v):
    # round half away from zero; values already in [0, 1]
    return np.floor(np.clip(v, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _colormap_rgb(x):
    """Piecewise-linear blue->cyan->yellow->red ramp on [0, 1], float in [0, 1]."""
    r = np.clip(1.5 - np.abs(4.0 * x - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * x - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * x - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def encode_rgb_colormap(norm, norm_record=(0.0, 1.0)):
    """Map a [0, 1] matrix through the colormap into an 8-bit RGB CsiImage.

    Anchors: 0 -> (0, 0, 128), 0.5 -> (128, 255, 128), 1 -> (128, 0, 0).
    """
    x = np.asarray(norm, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D normalized matrix")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("normalized values must lie in [0, 1]")
    pixels = _quantize8(_colormap_rgb(x))
    return CsiImage(pixels, tuple(norm_record), "colormap")


def bilinear_resize(a, out_h, out_w):
    """Corner-aligned bilinear resample of a 2-D array to (out_h, out_w).

    Sample grid maps output corner pixels onto input corner pixels, so a
    same-size resize is the identity.
    """
    a = np.asarray(a, dtype=np.float64)
    in_h, in_w = a.shape
    if out_h <= 0 or out_w <= 0:
        raise ValueError("output dims must be positive")
    if (out_h, out_w) == (in_h, in_w):
        return a.copy()
    rows = np.linspace(0.0, in_h - 1.0, out_h) if out_h > 1 else np.zeros(1)
    cols = np.linspace(0.0, in_w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    return (
        a[np.ix_(r0, c0)] * (1 - fr) * (1 - fc)
        + a[np.ix_(r0, c1)] * (1 - fr) * fc
        + a[np.ix_(r1, c0)] * fr * (1 - fc)
        + a[np.ix_(r1, c1)] * fr * fc
    )


def grayscale_reshape_resize(modulus_stack, out_h, out_w):
    """Fold a T x M x N modulus stack into one grayscale RGB image.

    Rows are time steps, columns the row-major (M then N) flattening of each
    snapshot; the whole T x (M*N) sheet is min-max normalized, bilinearly
    resized to (out_h, out_w), replicated across R=G=B and quantized.
    """
    stack = np.asarray(modulus_stack, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError("expected a T x M x N stack")
    t = stack.shape[0]
    sheet = stack.reshape(t, -1)  # row-major: antenna index varies slower
    lo = float(sheet.min())
    hi = float(sheet.max())
    norm = (sheet - lo) / (hi - lo) if hi > lo else np.zeros_like(sheet)
    resized = bilinear_resize(norm, out_h, out_w)
    gray = _quantize8(resized)
    pixels = np.repeat(gray[:, :, None], 3, axis=2)
    return CsiImage(pixels, (lo, hi), "grayscale_rgb")


def encode_two_channel_zero(admap, out_h, out_w):
    """Real/imag two-channel encoding with a zero third channel.

    Both channels share one min-max record taken jointly over real and
    imaginary parts before normalization; channel_power = ||entries||^2
    divided by the number of grid cells, recorded before any scaling.
    """
    ent = admap.entries.T  # image plane: delay rows, angle columns
    power = float(np.sum(np.abs(ent) ** 2) / ent.size)
    re = ent.real
    im = ent.imag
    lo = float(min(re.min(), im.min()))
    hi = float(max(re.max(), im.max()))
    if hi > lo:
        re_n = (re - lo) / (hi - lo)
        im_n = (im - lo) / (hi - lo)
    else:
        re_n = np.zeros_like(re)
        im_n = np.zeros_like(im)
    ch1 = _quantize8(bilinear_resize(re_n, out_h, out_w))
    ch2 = _quantize8(bilinear_resize(im_n, out_h, out_w))
    ch3 = np.zeros_like(ch1)
    pixels = np.stack([ch1, ch2, ch3], axis=2)
    return CsiImage(pixels, (lo, hi), "two_channel_zero", channel_power=power)


# inverse-colormap lookup: dense sample of the ramp, quantized exactly like
# the encoder so encoded pixels decode to the nearest generating value
_LUT_X = np.linspace(0.0, 1.0, 1024)
_LUT_RGB = _quantize8(_colormap_rgb(_LUT_X)).astype(np.float64)


def decode_intensity(pixels):
    """Recover a [0, 1] intensity matrix from CsiImage pixels.

    Grayscale images (R=G=B everywhere) decode as channel value / 255; other
    images decode through a nearest-color inversion of the colormap ramp.
    """
    px = np.asarray(pixels)
    if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3:
        raise ValueError("expected uint8 (h, w, 3) pixels")
    if np.all(px[:, :, 0] == px[:, :, 1]) and np.all(px[:, :, 1] == px[:, :, 2]):
        return px[:, :, 0].astype(np.float64) / 255.0
    flat = px.reshape(-1, 3)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    uf = uniq.astype(np.float64)
    best = np.empty(len(uniq))
    for start in range(0, len(uniq), 4096):  # bound the distance-table size
        block = uf[start : start + 4096]
        d2 = ((block[:, None, :] - _LUT_RGB[None, :, :]) ** 2).sum(axis=2)
        best[start : start + 4096] = _LUT_X[np.argmin(d2, axis=1)]
    return best[inverse].reshape(px.shape[0], px.shape[1])


def png_bytes(img):
    """Serialize a CsiImage to PNG (8-bit RGB, no alpha)."""
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_png(img, path):
    with open(path, "wb") as f:
        f.write(png_bytes(img))


def read_png(source):
    """Load PNG bytes or a path into a uint8 (h, w, 3) pixel array."""
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    with Image.open(source) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
