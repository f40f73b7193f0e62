"""Channel estimation: LS gain fitting on detected paths, plus LS/LMMSE baselines.

The pipeline estimator treats detected (angle, delay) pairs as a dictionary of
rank-one atoms and fits complex gains by least squares on the descaled pilot;
reconstruction then reuses the synthesis formula, so a perfect detection of an
on-grid noiseless channel reproduces it to machine precision.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ChannelMatrix, PathTriplet, delay_vector, steering_vector, synth_channel

__all__ = [
    "GainFit",
    "CovarianceModel",
    "DegenerateDictionaryError",
    "ls_gains",
    "reconstruct",
    "ls_estimate",
    "estimate_covariance",
    "lmmse_estimate",
    "nmse",
]


class DegenerateDictionaryError(ValueError):
    """Two detected paths produced identical dictionary columns."""

    def __init__(self, i, j):
        self.columns = (i, j)
        super().__init__(f"duplicate dictionary columns {i} and {j}: identical (angle, delay)")


@dataclass
class GainFit:
    gains: np.ndarray  # complex, one per path
    residual_energy: float
    condition_hint: float  # singular-value ratio of the dictionary


@dataclass
class CovarianceModel:
    r: np.ndarray  # (m, m) Hermitian antenna-domain covariance
    m: int
    sample_count: int

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.complex128)
        if self.r.shape != (self.m, self.m):
            raise ValueError(f"covariance shape {self.r.shape} != ({self.m}, {self.m})")


def _atom(angle, delay, m, n):
    return np.outer(steering_vector(angle, m), delay_vector(delay, n)).ravel()


def ls_gains(y, paths):
    """Least-squares complex gains for a list of DetectedPath atoms.

    Builds the dictionary A with columns vec(a(angle_l) outer b(delay_l)) and
    solves min ||vec(Y)/sqrt(P) - A g|| with an SVD-based solver.  Exact
    duplicate (angle, delay) pairs raise DegenerateDictionaryError naming the
    offending column pair before any solve is attempted.
    """
    if len(paths) == 0:
        raise ValueError("need at least one detected path")
    seen = {}
    for i, p in enumerate(paths):
        key = (p.angle_hat, p.delay_hat)
        if key in seen:
            raise DegenerateDictionaryError(seen[key], i)
        seen[key] = i
    m, n = y.entries.shape
    a = np.column_stack([_atom(p.angle_hat, p.delay_hat, m, n) for p in paths])
    target = y.entries.ravel() / np.sqrt(y.pilot_power)
    gains, _, _, svals = np.linalg.lstsq(a, target, rcond=None)
    resid = target - a @ gains
    smin = float(svals[-1]) if len(svals) else 0.0
    cond = float(svals[0] / smin) if smin > 0 else float("inf")
    return GainFit(
        gains=gains,
        residual_energy=float(np.vdot(resid, resid).real),
        condition_hint=cond,
    )


def reconstruct(paths, gains, m, n):
    """Rebuild the channel from detected paths and fitted gains.

    Delegates to the synthesis formula so reconstruction and synthesis cannot
    drift apart.
    """
    if len(paths) != len(gains):
        raise ValueError("paths and gains must have equal length")
    trips = [
        PathTriplet(complex(g), float(p.angle_hat), float(p.delay_hat))
        for p, g in zip(paths, gains)
    ]
    return synth_channel(trips, m, n)


def ls_estimate(y):
    """Trivial descale estimator H_hat = Y / sqrt(P)."""
    m, n = y.entries.shape
    return ChannelMatrix(y.entries / np.sqrt(y.pilot_power), m, n)


def estimate_covariance(samples):
    """Empirical antenna-domain covariance pooled over subcarrier columns.

    R = (1/(S*N)) * sum_{s,n} h_n h_n^H over S channel samples, then
    Hermitian-symmetrized.  Needs at least two samples.
    """
    if len(samples) < 2:
        raise ValueError("covariance estimation needs at least two samples")
    mats = [s.entries if isinstance(s, ChannelMatrix) else np.asarray(s) for s in samples]
    m, n = mats[0].shape
    r = np.zeros((m, m), dtype=np.complex128)
    for h in mats:
        if h.shape != (m, n):
            raise ValueError("all covariance samples must share one shape")
        r += h @ h.conj().T
    r /= len(mats) * n
    r = (r + r.conj().T) / 2.0
    return CovarianceModel(r, m, len(mats))


def lmmse_estimate(y, cov):
    """Per-subcarrier LMMSE smoothing h_hat_n = R (R + sigma^2/P I)^{-1} y_n/sqrt(P).

    With sigma^2 = 0 the filter is the identity and the result equals
    ls_estimate; with R = c*I it reduces to scalar shrinkage c/(c + sigma^2/P).
    """
    m, n = y.entries.shape
    if cov.m != m:
        raise ValueError(f"covariance dimension {cov.m} != antenna count {m}")
    if y.noise_variance == 0.0:
        return ls_estimate(y)
    lam = y.noise_variance / y.pilot_power
    ys = y.entries / np.sqrt(y.pilot_power)
    reg = cov.r + lam * np.eye(m)
    x = scipy.linalg.solve(reg, ys, assume_a="pos")
    return ChannelMatrix(cov.r @ x, m, n)


def nmse(estimate, truth):
    """Normalized squared error ||est - truth||^2 / ||truth||^2, linear and dB."""
    e = estimate.entries if isinstance(estimate, ChannelMatrix) else np.asarray(estimate)
    t = truth.entries if isinstance(truth, ChannelMatrix) else np.asarray(truth)
    if e.shape != t.shape:
        raise ValueError("estimate and truth must share one shape")
    denom = float(np.vdot(t, t).real)
    if denom == 0.0:
        raise ValueError("truth has zero norm; NMSE undefined")
    linear = float(np.vdot(e - t, e - t).real) / denom
    db = float("-inf") if linear == 0.0 else 10.0 * np.log10(linear)
    return linear, db
