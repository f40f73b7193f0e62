"""Convolutional benchmark regressor over raw two-channel CSI.

Three conv layers (8, 32, 1024 filters, 3x3 kernels, stride 2, same padding,
ReLU), global average pooling, then the same power-augmented regression
module used by the feature head.  Written with im2col so the gradients are
plain matrix algebra and can be finite-difference checked.
"""

import math
from dataclasses import dataclass

import numpy as np

from .heads import LocHead, init_loc_head, param_count

__all__ = ["ConvFeatModel", "init_convfeat_model", "convfeat_param_count"]


def _same_geometry(in_size, k, stride):
    out = -(-in_size // stride)  # ceil division
    pad = max((out - 1) * stride + k - in_size, 0)
    return out, pad // 2, pad - pad // 2


def _conv_forward(x, w, b, stride):
    ns, h, wd, cin = x.shape
    kh, kw, cin2, cout = w.shape
    if cin != cin2:
        raise ValueError("channel mismatch")
    oh, pt, pbm = _same_geometry(h, kh, stride)
    ow, pl, prt = _same_geometry(wd, kw, stride)
    xp = np.pad(x, ((0, 0), (pt, pbm), (pl, prt), (0, 0)))
    cols = np.empty((ns, oh, ow, kh, kw, cin))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = xp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :]
    flat = cols.reshape(ns, oh, ow, kh * kw * cin)
    out = flat @ w.reshape(-1, cout) + b
    cache = (x.shape, xp.shape, flat, w, stride, (pt, pl), (oh, ow))
    return out, cache


def _conv_backward(dout, cache):
    xshape, xpshape, flat, w, stride, (pt, pl), (oh, ow) = cache
    kh, kw, cin, cout = w.shape
    ns, h, wd, _ = xshape
    dw = (flat.reshape(-1, kh * kw * cin).T @ dout.reshape(-1, cout)).reshape(w.shape)
    db = dout.sum(axis=(0, 1, 2))
    dcols = (dout @ w.reshape(-1, cout).T).reshape(ns, oh, ow, kh, kw, cin)
    dxp = np.zeros(xpshape)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :] += dcols[:, :, :, i, j, :]
    dx = dxp[:, pt : pt + h, pl : pl + wd, :]
    return dx, dw, db


@dataclass
class ConvFeatModel:
    conv_w: list  # three (kh, kw, cin, cout) kernels
    conv_b: list
    head: LocHead
    stride: int = 2

    def _param_items(self):
        items = []
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            items.append((f"c{i}w", w))
            items.append((f"c{i}b", b))
        items.extend((f"h_{n}", p) for n, p in self.head._param_items())
        return items

    def _features(self, images):
        x = np.asarray(images, dtype=np.float64)
        caches = []
        relus = []
        for w, b in zip(self.conv_w, self.conv_b):
            z, cache = _conv_forward(x, w, b, self.stride)
            x = np.maximum(z, 0.0)
            caches.append(cache)
            relus.append(z)
        feat = x.mean(axis=(1, 2))  # global average pool
        return feat, x.shape, caches, relus

    def _loss(self, data):
        images, power, target = data
        feat, _, _, _ = self._features(images)
        return self.head._loss((feat, power, target))

    def _grad_batch(self, data):
        images, power, target = data
        feat, top_shape, caches, relus = self._features(images)
        loss, head_grads, dfeat, _ = self.head._grad_batch((feat, power, target), want_input_grads=True)
        grads = {f"h_{n}": g for n, g in head_grads.items()}
        ns, oh, ow, cout = top_shape
        dx = np.broadcast_to(dfeat[:, None, None, :] / (oh * ow), top_shape).copy()
        for i in reversed(range(len(self.conv_w))):
            dz = dx * (relus[i] > 0)
            dx, dw, db = _conv_backward(dz, caches[i])
            grads[f"c{i}w"] = dw
            grads[f"c{i}b"] = db
        return loss, grads


def init_convfeat_model(in_channels=2, filters=(8, 32, 1024), kernel=3, seed=0):
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    cin = in_channels
    for cout in filters:
        fan_in = kernel * kernel * cin
        fan_out = kernel * kernel * cout
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        conv_w.append(rng.uniform(-limit, limit, size=(kernel, kernel, cin, cout)))
        conv_b.append(np.zeros(cout))
        cin = cout
    head = init_loc_head(filters[-1], seed=int(rng.integers(2**31)))
    return ConvFeatModel(conv_w=conv_w, conv_b=conv_b, head=head)


def convfeat_param_count(in_channels=2, filters=(8, 32, 1024), kernel=3):
    total = 0
    cin = in_channels
    for cout in filters:
        total += kernel * kernel * cin * cout + cout
        cin = cout
    return total + param_count("loc", filters[-1])
