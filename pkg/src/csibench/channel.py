"""Multipath spatial-frequency channel synthesis and noisy pilot observation.

A channel over M antennas (uniform linear array, half-wavelength spacing folded
into the normalized angle) and N subcarriers is a sum of path responses

    H = sum_l  alpha_l * outer(a(theta_l), b(tau_l))

where a and b are unit-modulus phase ramps, a_k = exp(-2j*pi*k*theta), and both
the normalized angle theta and the normalized delay tau live on [0, 1).  Gains
drawn CN(0, 1/L) give E||H||_F^2 = M*N, which is the normalization every SNR
definition downstream leans on.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PathTriplet",
    "ChannelMatrix",
    "PilotObservation",
    "steering_vector",
    "delay_vector",
    "synth_channel",
    "sample_paths",
    "add_pilot_noise",
]


@dataclass
class PathTriplet:
    """One propagation path: complex gain, normalized angle, normalized delay."""

    gain: complex
    angle: float  # in [0, 1)
    delay: float  # in [0, 1)

    def __post_init__(self):
        if not (math.isfinite(self.gain.real) and math.isfinite(self.gain.imag)):
            raise ValueError("path gain must be finite")
        if not (0.0 <= self.angle < 1.0):
            raise ValueError(f"normalized angle must lie in [0, 1), got {self.angle}")
        if not (0.0 <= self.delay < 1.0):
            raise ValueError(f"normalized delay must lie in [0, 1), got {self.delay}")


@dataclass
class ChannelMatrix:
    """Complex M x N channel with its generating paths kept for ground truth."""

    entries: np.ndarray
    m: int
    n: int
    paths: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.entries.shape != (self.m, self.n):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match (m, n)=({self.m}, {self.n})"
            )
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("channel entries must be finite")


@dataclass
class PilotObservation:
    """Noisy pilot Y = sqrt(P) * H + W with per-entry noise variance sigma^2."""

    entries: np.ndarray
    pilot_power: float
    noise_variance: float
    snr_db: float

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.pilot_power <= 0:
            raise ValueError("pilot power must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        # the three scalars are one fact stated twice; keep them consistent
        expect = self.pilot_power * 10.0 ** (-self.snr_db / 10.0)
        if not math.isclose(self.noise_variance, expect, rel_tol=1e-9, abs_tol=1e-300):
            raise ValueError(
                f"noise_variance {self.noise_variance} inconsistent with "
                f"pilot_power*10^(-snr/10) = {expect}"
            )


def steering_vector(angle, m):
    """Array response for a normalized angle: element k is exp(-2j*pi*k*angle).

    Args:
        angle: normalized angle in [0, 1).
        m: number of antennas, positive.

    Returns:
        complex vector of length m, unit modulus entries, first entry 1.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    if not (0.0 <= angle < 1.0):
        raise ValueError(f"normalized angle must lie in [0, 1), got {angle}")
    return np.exp(-2j * np.pi * np.arange(m) * angle)


def delay_vector(delay, n):
    """Frequency response of a normalized delay: element k is exp(-2j*pi*k*delay)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not (0.0 <= delay < 1.0):
        raise ValueError(f"normalized delay must lie in [0, 1), got {delay}")
    return np.exp(-2j * np.pi * np.arange(n) * delay)


def synth_channel(paths, m, n):
    """Superimpose path responses into an M x N channel matrix.

    H[j, k] = sum_l gain_l * exp(-2j*pi*(j*angle_l + k*delay_l)); the delay
    ramp enters through a plain transpose (no conjugation) so synthesis and
    reconstruction share one formula.
    """
    if m <= 0 or n <= 0:
        raise ValueError("channel dimensions must be positive")
    h = np.zeros((m, n), dtype=np.complex128)
    for p in paths:
        if not isinstance(p, PathTriplet):
            p = PathTriplet(*p)
        h += p.gain * np.outer(steering_vector(p.angle, m), delay_vector(p.delay, n))
    return ChannelMatrix(h, m, n, paths=list(paths))


def sample_paths(l, seed, on_grid=False, grid_beta=4, grid_gamma=4, m=64, n=64):
    """Draw L random paths: gains CN(0, 1/L), angles/delays uniform on [0, 1).

    With on_grid=True the angles snap to multiples of 1/(grid_beta*m) and the
    delays to multiples of 1/(grid_gamma*n), i.e. onto the oversampled DFT
    grid used by the imaging stage.  Same seed, same draw.
    """
    if l <= 0:
        raise ValueError("path count must be positive")
    rng = np.random.default_rng(seed)
    scale = math.sqrt(1.0 / (2.0 * l))  # per-component std for CN(0, 1/L)
    gains = rng.standard_normal(l) * scale + 1j * rng.standard_normal(l) * scale
    angles = rng.random(l)
    delays = rng.random(l)
    if on_grid:
        qa = grid_beta * m
        qd = grid_gamma * n
        angles = np.floor(angles * qa) / qa
        delays = np.floor(delays * qd) / qd
    return [PathTriplet(complex(g), float(a), float(d)) for g, a, d in zip(gains, angles, delays)]


def add_pilot_noise(h, snr_db, pilot_power=1.0, seed=0):
    """Observe Y = sqrt(P) * H + W, W i.i.d. CN(0, sigma^2).

    The per-entry SNR convention is sigma^2 = P * 10^(-snr_db/10); it matches
    the E||H||^2 = M*N channel normalization so the trivial estimator Y/sqrt(P)
    lands at NMSE = 10^(-snr_db/10).  snr_db = inf gives a noiseless pilot.
    """
    if pilot_power <= 0:
        raise ValueError("pilot power must be positive")
    entries = h.entries if isinstance(h, ChannelMatrix) else np.asarray(h, dtype=np.complex128)
    sigma2 = pilot_power * 10.0 ** (-snr_db / 10.0)  # 10^-inf -> 0.0
    y = math.sqrt(pilot_power) * entries
    if sigma2 > 0:
        rng = np.random.default_rng(seed)
        s = math.sqrt(sigma2 / 2.0)
        y = y + rng.standard_normal(entries.shape) * s + 1j * rng.standard_normal(entries.shape) * s
    return PilotObservation(y, pilot_power, sigma2, snr_db)
