"""Convolutional feature extractor against a loop-based reference."""

import math

import numpy as np
import pytest

from csibench.convbaseline import (
    ConvFeatModel,
    _conv_forward,
    _same_geometry,
    convfeat_param_count,
    init_convfeat_model,
)
from csibench.heads import grad_check, param_count


def _conv_reference(x, w, b, stride):
    """Direct nested-loop convolution with ceil-mode SAME padding."""
    s_, ih, iw, cin = x.shape
    kh, kw, _, cout = w.shape
    oh = math.ceil(ih / stride)
    ow = math.ceil(iw / stride)
    pad_h = max((oh - 1) * stride + kh - ih, 0)
    pad_w = max((ow - 1) * stride + kw - iw, 0)
    top, left = pad_h // 2, pad_w // 2
    out = np.zeros((s_, oh, ow, cout))
    for smp in range(s_):
        for i in range(oh):
            for j in range(ow):
                for co in range(cout):
                    acc = b[co]
                    for di in range(kh):
                        for dj in range(kw):
                            ii = i * stride + di - top
                            jj = j * stride + dj - left
                            if 0 <= ii < ih and 0 <= jj < iw:
                                acc += float(x[smp, ii, jj] @ w[di, dj, :, co])
                    out[smp, i, j, co] = acc
    return out


@pytest.mark.parametrize("size", [4, 5, 6, 7, 8])
def test_same_geometry_ceil_mode(size):
    out, lo, hi = _same_geometry(size, 3, 2)
    assert out == math.ceil(size / 2)
    need = max((out - 1) * 2 + 3 - size, 0)
    assert lo == need // 2 and hi == need - need // 2


@pytest.mark.parametrize("ih,iw", [(5, 5), (6, 7), (8, 8)])
def test_conv_forward_matches_loop_reference(ih, iw):
    rng = np.random.default_rng(ih * 10 + iw)
    x = rng.standard_normal((2, ih, iw, 3))
    w = rng.standard_normal((3, 3, 3, 4)) * 0.2
    b = rng.standard_normal(4) * 0.1
    got, _cache = _conv_forward(x, w, b, 2)
    ref = _conv_reference(x, w, b, 2)
    assert got.shape == ref.shape
    assert np.max(np.abs(got - ref)) < 1e-10


def test_model_feature_dim_and_forward_shape():
    model = init_convfeat_model(in_channels=2, filters=(4, 8, 16), seed=0)
    feat, top_shape, _, _ = model._features(np.zeros((3, 12, 12, 2)))
    # three stride-2 layers: 12 -> 6 -> 3 -> 2
    assert top_shape == (3, 2, 2, 16)
    assert feat.shape == (3, 16)


def test_gap_average_is_exact():
    model = init_convfeat_model(in_channels=1, filters=(2, 2, 2), seed=1)
    # zero weights, fixed bias: every map cell equals the bias, GAP preserves it
    for w in model.conv_w:
        w[:] = 0.0
    model.conv_b[0][:] = 0.0
    model.conv_b[1][:] = 0.0
    model.conv_b[2][:] = np.array([1.5, -2.0])
    feat, _, _, _ = model._features(np.ones((1, 8, 8, 1)))
    assert np.allclose(feat, [[1.5, 0.0]])  # ReLU clips the negative channel


def test_param_count_totals():
    assert convfeat_param_count() == 332058
    # recompute from the layer shapes
    total = 0
    cin = 2
    for cout in (8, 32, 1024):
        total += 3 * 3 * cin * cout + cout
        cin = cout
    assert convfeat_param_count() == total + param_count("loc", 1024)
    model = init_convfeat_model(seed=0)
    assert sum(p.size for _, p in model._param_items()) == 332058


def test_conv_grad_check():
    rng = np.random.default_rng(9)
    model = init_convfeat_model(in_channels=2, filters=(3, 4, 6), seed=9)
    images = rng.standard_normal((2, 6, 6, 2))
    power = rng.standard_normal(2) * 0.3 + 1.0
    target = rng.random((2, 2))
    err = grad_check(model, (images, power, target), fraction=0.15, seed=9)
    assert err < 1e-4


def test_model_loss_decreases_under_training():
    from csibench.heads import TrainConfig, adam_train

    rng = np.random.default_rng(10)
    model = init_convfeat_model(in_channels=1, filters=(2, 3, 4), seed=10)
    images = rng.standard_normal((16, 8, 8, 1))
    power = np.ones(16)
    target = rng.random((16, 2))
    cfg = TrainConfig(epochs=12, batch_size=8, learning_rate=5e-3, seed=10)
    _, trace = adam_train(model, (images, power, target), cfg)
    assert trace[-1] < trace[0] * 0.9


def test_init_shapes_and_determinism():
    m1 = init_convfeat_model(seed=4)
    m2 = init_convfeat_model(seed=4)
    assert [w.shape for w in m1.conv_w] == [(3, 3, 2, 8), (3, 3, 8, 32), (3, 3, 32, 1024)]
    assert all(np.array_equal(a, b) for a, b in zip(m1.conv_w, m2.conv_w))
    assert isinstance(m1, ConvFeatModel)
