"""Lightweight trainable heads over frozen feature vectors.

Two heads, both trained with a hand-rolled Adam on hand-derived gradients:

* DenseHead — single dense layer + softmax for classification (K*C + C params).
* LocHead — coordinate regression: channel power expanded 1->8 by a linear
  dense layer, concatenated with the K-dim feature, then dense 32 (ReLU),
  dense 16 (ReLU), dense 2 (Sigmoid).  Total 32*K + 866 parameters.

Everything is float64 numpy; determinism comes only from the seeds.
"""

import io
import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DenseHead",
    "LocHead",
    "TrainConfig",
    "init_dense_head",
    "init_loc_head",
    "dense_softmax_forward",
    "loc_head_forward",
    "cross_entropy_loss",
    "mse_loss",
    "adam_train",
    "grad_check",
    "make_safe_loc_sample",
    "param_count",
    "save_head",
    "save_head_bytes",
    "load_head",
    "load_head_bytes",
]


def _glorot(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _relu(z):
    return np.maximum(z, 0.0)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class DenseHead:
    w: np.ndarray  # (k, c)
    b: np.ndarray  # (c,)

    def _param_items(self):
        return [("w", self.w), ("b", self.b)]

    def _loss(self, data):
        x, labels = data
        probs = dense_softmax_forward(self, x)
        return cross_entropy_loss(probs, labels)

    def _grad_batch(self, data):
        x, labels = data
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        labels = np.atleast_1d(labels)
        s = x.shape[0]
        probs = _softmax(x @ self.w + self.b)
        loss = cross_entropy_loss(probs, labels)
        dlogits = probs.copy()
        dlogits[np.arange(s), labels] -= 1.0
        dlogits /= s
        return loss, {"w": x.T @ dlogits, "b": dlogits.sum(axis=0)}


@dataclass
class LocHead:
    pw: np.ndarray  # (1, 8) power expansion
    pb: np.ndarray  # (8,)
    w1: np.ndarray  # (k+8, 32)
    b1: np.ndarray
    w2: np.ndarray  # (32, 16)
    b2: np.ndarray
    w3: np.ndarray  # (16, 2)
    b3: np.ndarray

    @property
    def k(self):
        return self.w1.shape[0] - 8

    def _param_items(self):
        return [
            ("pw", self.pw), ("pb", self.pb),
            ("w1", self.w1), ("b1", self.b1),
            ("w2", self.w2), ("b2", self.b2),
            ("w3", self.w3), ("b3", self.b3),
        ]

    def _loss(self, data):
        x, power, target = data
        pred = loc_head_forward(self, x, power)
        return mse_loss(pred, target)

    def _forward_cache(self, x, power):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        power = np.atleast_1d(np.asarray(power, dtype=np.float64))
        pvec = power[:, None] @ self.pw + self.pb  # linear expansion, no activation
        z = np.concatenate([x, pvec], axis=1)
        a1 = z @ self.w1 + self.b1
        h1 = _relu(a1)
        a2 = h1 @ self.w2 + self.b2
        h2 = _relu(a2)
        a3 = h2 @ self.w3 + self.b3
        out = _sigmoid(a3)
        return x, power, pvec, z, a1, h1, a2, h2, out

    def _grad_batch(self, data, want_input_grads=False):
        xin, power, target = data
        x, power, pvec, z, a1, h1, a2, h2, out = self._forward_cache(xin, power)
        target = np.atleast_2d(np.asarray(target, dtype=np.float64))
        s = x.shape[0]
        loss = float(np.mean((out - target) ** 2))
        dout = 2.0 * (out - target) / out.size
        da3 = dout * out * (1.0 - out)
        dw3 = h2.T @ da3
        db3 = da3.sum(axis=0)
        dh2 = da3 @ self.w3.T
        da2 = dh2 * (a2 > 0)
        dw2 = h1.T @ da2
        db2 = da2.sum(axis=0)
        dh1 = da2 @ self.w2.T
        da1 = dh1 * (a1 > 0)
        dw1 = z.T @ da1
        db1 = da1.sum(axis=0)
        dz = da1 @ self.w1.T
        dx = dz[:, : x.shape[1]]
        dpvec = dz[:, x.shape[1] :]
        dpw = power[None, :] @ dpvec
        dpb = dpvec.sum(axis=0)
        dpower = dpvec @ self.pw.ravel()
        grads = {
            "pw": dpw, "pb": dpb,
            "w1": dw1, "b1": db1,
            "w2": dw2, "b2": db2,
            "w3": dw3, "b3": db3,
        }
        if want_input_grads:
            return loss, grads, dx, dpower
        return loss, grads

    def _min_preactivation(self, x, power):
        _, _, _, _, a1, _, a2, _, _ = self._forward_cache(x, power)
        return float(min(np.abs(a1).min(), np.abs(a2).min()))


def init_dense_head(k, c, seed=0):
    """Seeded Glorot-uniform weights, zero bias."""
    if k <= 0 or c <= 0:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    return DenseHead(w=_glorot(rng, k, c), b=np.zeros(c))


def init_loc_head(k, seed=0):
    if k <= 0:
        raise ValueError("feature dimension must be positive")
    rng = np.random.default_rng(seed)
    return LocHead(
        pw=_glorot(rng, 1, 8), pb=np.zeros(8),
        w1=_glorot(rng, k + 8, 32), b1=np.zeros(32),
        w2=_glorot(rng, 32, 16), b2=np.zeros(16),
        w3=_glorot(rng, 16, 2), b3=np.zeros(2),
    )


def dense_softmax_forward(head, x):
    """Class probabilities; accepts one vector or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    probs = _softmax(np.atleast_2d(x) @ head.w + head.b)
    return probs[0] if single else probs


def loc_head_forward(head, x, power):
    """(x, y) in (0, 1)^2; accepts one sample or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    out = head._forward_cache(x, power)[-1]
    return out[0] if single else out


def cross_entropy_loss(probs, labels):
    """Mean negative log-likelihood with probabilities floored at 1e-12."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.atleast_1d(labels)
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-12))))


def mse_loss(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.mean((pred - target) ** 2))


@dataclass
class TrainConfig:
    epochs: int = 256
    batch_size: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: object = 0  # anything numpy's default_rng accepts


def adam_train(model, data, cfg, epoch_callback=None):
    """Mini-batch Adam with bias correction; mutates model in place.

    data is a tuple of arrays sharing axis 0 (the model's _grad_batch layout).
    Shuffling is seeded from cfg.seed, so identical inputs give identical
    parameter trajectories.  The final short batch is used as-is (losses are
    per-sample means, so no batch dominates).  Returns (model, trace): trace
    is the per-epoch sample-weighted mean training loss.

    epoch_callback(model, epoch, mean_loss), when given, runs after each
    epoch; its returns are collected and returned as a third element.
    """
    arrays = [np.asarray(a) for a in data]
    count = arrays[0].shape[0]
    if any(a.shape[0] != count for a in arrays):
        raise ValueError("all data arrays must share axis-0 length")
    if count == 0:
        raise ValueError("empty training set")
    params = model._param_items()
    state = {name: (np.zeros_like(p), np.zeros_like(p)) for name, p in params}
    t = 0
    rng = np.random.default_rng(cfg.seed)
    trace = []
    extras = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(count)
        total = 0.0
        for start in range(0, count, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch = tuple(a[idx] for a in arrays)
            loss, grads = model._grad_batch(batch)
            total += loss * len(idx)
            t += 1
            for name, p in params:
                g = grads[name].reshape(p.shape)
                m, v = state[name]
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                mhat = m / (1.0 - cfg.beta1**t)
                vhat = v / (1.0 - cfg.beta2**t)
                p -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
        mean_loss = total / count
        trace.append(mean_loss)
        if epoch_callback is not None:
            extras.append(epoch_callback(model, epoch, mean_loss))
    if epoch_callback is not None:
        return model, trace, extras
    return model, trace


def grad_check(model, data, step=1e-5, fraction=1.0, seed=0):
    """Max relative error between analytic and central-difference gradients.

    fraction < 1 checks a seeded random subset of the flattened parameters.
    The relative error uses max(1, |a|, |n|) in the denominator, so tiny
    gradients are compared absolutely.
    """
    _, grads = model._grad_batch(data)
    params = model._param_items()
    worst = 0.0
    rng = np.random.default_rng(seed)
    for name, p in params:
        flat = p.reshape(-1)
        gflat = np.asarray(grads[name]).reshape(-1)
        total = flat.size
        if fraction >= 1.0:
            picks = range(total)
        else:
            take = max(1, int(math.ceil(fraction * total)))
            picks = rng.choice(total, size=take, replace=False)
        for i in picks:
            keep = flat[i]
            flat[i] = keep + step
            lp = model._loss(data)
            flat[i] = keep - step
            lm = model._loss(data)
            flat[i] = keep
            numeric = (lp - lm) / (2.0 * step)
            analytic = gflat[i]
            err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            if err > worst:
                worst = err
    return worst


def make_safe_loc_sample(k, seed, batch=2, margin=1e-3):
    """A LocHead plus a data batch whose ReLU pre-activations avoid the kink.

    Central differences are undefined across a ReLU corner, so the check point
    is resampled until every |pre-activation| exceeds margin.
    """
    rng = np.random.default_rng(seed)
    head = init_loc_head(k, seed=rng.integers(2**31))
    for _ in range(200):
        x = rng.standard_normal((batch, k))
        power = rng.standard_normal(batch) * 0.5 + 1.0
        target = rng.random((batch, 2))
        if head._min_preactivation(x, power) > margin:
            return head, (x, power, target)
    raise RuntimeError("could not find a ReLU-safe check point")


def param_count(kind, k, c=None):
    """Trainable parameter count for a head descriptor."""
    if kind == "dense":
        if c is None or k <= 0 or c <= 0:
            raise ValueError("dense head needs positive k and c")
        return k * c + c
    if kind == "loc":
        if k <= 0:
            raise ValueError("loc head needs positive k")
        return 32 * k + 866  # (1*8+8) + ((k+8)*32+32) + (32*16+16) + (16*2+2)
    raise ValueError(f"unknown head kind {kind!r}")


# --- serialization: magic, version, kind, layer dims, float64 payload ---

_HEAD_MAGIC = b"HEAD"
_HEAD_VERSION = 1
_KIND_DENSE = 1
_KIND_LOC = 2


def _layers_of(head):
    if isinstance(head, DenseHead):
        return _KIND_DENSE, [(head.w, head.b)]
    if isinstance(head, LocHead):
        return _KIND_LOC, [
            (head.pw, head.pb),
            (head.w1, head.b1),
            (head.w2, head.b2),
            (head.w3, head.b3),
        ]
    raise ValueError(f"cannot serialize {type(head).__name__}")


def save_head_bytes(head):
    kind, layers = _layers_of(head)
    buf = io.BytesIO()
    buf.write(struct.pack("<4sHBB", _HEAD_MAGIC, _HEAD_VERSION, kind, len(layers)))
    for w, b in layers:
        buf.write(struct.pack("<II", w.shape[0], w.shape[1]))
    for w, b in layers:
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return buf.getvalue()


def save_head(head, path):
    with open(path, "wb") as f:
        f.write(save_head_bytes(head))


def load_head_bytes(blob):
    if len(blob) < 8:
        raise ValueError("head file truncated before header")
    magic, version, kind, n_layers = struct.unpack_from("<4sHBB", blob, 0)
    if magic != _HEAD_MAGIC:
        raise ValueError(f"bad head magic {magic!r}")
    if version != _HEAD_VERSION:
        raise ValueError(f"unsupported head version {version}")
    off = 8
    dims = []
    for _ in range(n_layers):
        if off + 8 > len(blob):
            raise ValueError("head file truncated in dimension table")
        din, dout = struct.unpack_from("<II", blob, off)
        dims.append((din, dout))
        off += 8
    arrays = []
    for din, dout in dims:
        need = (din * dout + dout) * 8
        if off + need > len(blob):
            raise ValueError("head file truncated in payload")
        w = np.frombuffer(blob, dtype="<f8", count=din * dout, offset=off).reshape(din, dout)
        off += din * dout * 8
        b = np.frombuffer(blob, dtype="<f8", count=dout, offset=off)
        off += dout * 8
        arrays.append((w.astype(np.float64), b.astype(np.float64)))
    if kind == _KIND_DENSE:
        if len(arrays) != 1:
            raise ValueError("dense head must carry exactly one layer")
        return DenseHead(w=arrays[0][0], b=arrays[0][1])
    if kind == _KIND_LOC:
        if len(arrays) != 4 or dims[0] != (1, 8) or dims[2] != (32, 16) or dims[3] != (16, 2):
            raise ValueError("loc head layer table is inconsistent")
        (pw, pb), (w1, b1), (w2, b2), (w3, b3) = arrays
        return LocHead(pw=pw, pb=pb, w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3)
    raise ValueError(f"unknown head kind code {kind}")


def load_head(path):
    with open(path, "rb") as f:
        return load_head_bytes(f.read())
