"""Channel synthesis and pilot noise against brute-force oracles."""

import cmath

import numpy as np
import pytest

from csibench.channel import (
    ChannelMatrix,
    PathTriplet,
    PilotObservation,
    add_pilot_noise,
    delay_vector,
    sample_paths,
    steering_vector,
    synth_channel,
)


def test_steering_vector_entries_match_definition():
    theta = 0.3217
    v = steering_vector(theta, 5)
    for k in range(5):
        expected = cmath.exp(-2j * cmath.pi * k * theta)
        assert abs(v[k] - expected) < 1e-12


def test_delay_vector_entries_match_definition():
    tau = 0.871
    v = delay_vector(tau, 4)
    for q in range(4):
        assert abs(v[q] - cmath.exp(-2j * cmath.pi * q * tau)) < 1e-12


def test_first_entry_is_one():
    assert steering_vector(0.77, 3)[0] == 1.0 + 0.0j
    assert delay_vector(0.13, 3)[0] == 1.0 + 0.0j


@pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5])
def test_vectors_reject_out_of_range(bad):
    with pytest.raises(ValueError):
        steering_vector(bad, 4)
    with pytest.raises(ValueError):
        delay_vector(bad, 4)


def test_synth_channel_matches_triple_loop():
    # oracle: element-wise accumulation straight from the sum-of-paths model
    rng = np.random.default_rng(11)
    m, n = 6, 5
    paths = [
        PathTriplet(
            gain=complex(rng.standard_normal(), rng.standard_normal()),
            angle=float(rng.random()),
            delay=float(rng.random()),
        )
        for _ in range(4)
    ]
    h = synth_channel(paths, m, n)
    ref = np.zeros((m, n), dtype=np.complex128)
    for p in paths:
        for a in range(m):
            for b in range(n):
                ref[a, b] += (
                    p.gain
                    * cmath.exp(-2j * cmath.pi * a * p.angle)
                    * cmath.exp(-2j * cmath.pi * b * p.delay)
                )
    assert np.max(np.abs(h.entries - ref)) < 1e-10


def test_synth_channel_accepts_tuples():
    h1 = synth_channel([(1 + 2j, 0.25, 0.5)], 3, 3)
    h2 = synth_channel([PathTriplet(gain=1 + 2j, angle=0.25, delay=0.5)], 3, 3)
    assert np.array_equal(h1.entries, h2.entries)


def test_single_path_rank_one():
    h = synth_channel([(2.0 + 0j, 0.1, 0.7)], 8, 8)
    s = np.linalg.svd(h.entries, compute_uv=False)
    assert s[1] < 1e-10 * s[0]


def test_mean_channel_energy_is_mn():
    # E||H||^2 = M*N regardless of L because gains are CN(0, 1/L)
    m, n, l = 16, 16, 10
    total = 0.0
    draws = 10_000
    for i in range(draws):
        h = synth_channel(sample_paths(l, [100, i], m=m, n=n), m, n)
        total += float(np.sum(np.abs(h.entries) ** 2))
    mean = total / draws
    assert abs(mean - m * n) / (m * n) < 0.05


def test_sample_paths_on_grid_snaps_to_grid():
    beta, gamma, m, n = 4, 4, 16, 16
    paths = sample_paths(20, [7, 1], True, beta, gamma, m, n)
    for p in paths:
        ka = p.angle * beta * m
        qd = p.delay * gamma * n
        assert abs(ka - round(ka)) < 1e-9
        assert abs(qd - round(qd)) < 1e-9
        assert 0.0 <= p.angle < 1.0
        assert 0.0 <= p.delay < 1.0


def test_sample_paths_seeded_and_distinct_streams():
    a = sample_paths(5, [3, 1])
    b = sample_paths(5, [3, 1])
    c = sample_paths(5, [3, 2])
    assert all(pa.gain == pb.gain and pa.angle == pb.angle for pa, pb in zip(a, b))
    assert any(pa.gain != pc.gain for pa, pc in zip(a, c))


def test_sample_paths_gain_variance():
    # per-path variance 1/L, so the average |gain|^2 over many draws -> 1/L
    l = 8
    gains = []
    for i in range(4000):
        gains.extend(p.gain for p in sample_paths(l, [55, i], m=8, n=8))
    mean_sq = float(np.mean(np.abs(gains) ** 2))
    assert abs(mean_sq - 1.0 / l) < 0.01 / l * 5


def test_sample_paths_rejects_bad_count():
    with pytest.raises(ValueError):
        sample_paths(0, 1)


def test_noise_variance_follows_snr():
    h = synth_channel(sample_paths(4, [9, 1], m=8, n=8), 8, 8)
    for snr in (0.0, 7.0, 15.0):
        noises = []
        for i in range(400):
            y = add_pilot_noise(h, snr, pilot_power=2.0, seed=[9, 2, i])
            w = y.entries - np.sqrt(2.0) * h.entries
            noises.append(np.mean(np.abs(w) ** 2))
        measured = float(np.mean(noises))
        expected = 2.0 * 10.0 ** (-snr / 10.0)
        assert abs(measured - expected) / expected < 0.1
        assert y.noise_variance == pytest.approx(expected, rel=1e-12)
        assert y.snr_db == snr
        assert y.pilot_power == 2.0


def test_infinite_snr_gives_clean_pilot():
    h = synth_channel([(1.0 + 0j, 0.2, 0.3)], 4, 4)
    y = add_pilot_noise(h, float("inf"), pilot_power=4.0, seed=0)
    assert y.noise_variance == 0.0
    assert np.allclose(y.entries, 2.0 * h.entries)


def test_noise_is_seeded():
    h = synth_channel([(1.0 + 0j, 0.2, 0.3)], 4, 4)
    y1 = add_pilot_noise(h, 10.0, seed=[1, 2])
    y2 = add_pilot_noise(h, 10.0, seed=[1, 2])
    y3 = add_pilot_noise(h, 10.0, seed=[1, 3])
    assert np.array_equal(y1.entries, y2.entries)
    assert not np.array_equal(y1.entries, y3.entries)


def test_pilot_observation_validates_noise_variance():
    entries = np.zeros((2, 2), dtype=np.complex128)
    PilotObservation(entries=entries, snr_db=10.0, pilot_power=1.0, noise_variance=0.1)
    with pytest.raises(ValueError):
        PilotObservation(entries=entries, snr_db=10.0, pilot_power=1.0, noise_variance=0.2)


def test_path_triplet_validation():
    with pytest.raises(ValueError):
        PathTriplet(gain=1.0 + 0j, angle=1.0, delay=0.5)
    with pytest.raises(ValueError):
        PathTriplet(gain=1.0 + 0j, angle=0.5, delay=-0.01)
    with pytest.raises(ValueError):
        PathTriplet(gain=complex("nan"), angle=0.5, delay=0.5)


def test_channel_matrix_shape_guard():
    with pytest.raises(ValueError):
        ChannelMatrix(entries=np.zeros((2, 3), dtype=np.complex128), m=2, n=2)
