"""Jackknife bias correction, ensemble error statistics and power-law fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, InsufficientSampleError, ParameterError


@dataclass(frozen=True)
class EnsembleStats:
    """Per-time error of a stochastic observable against a reference.

    ``bias`` is the ensemble mean minus the reference, ``std`` the sample
    standard deviation (ddof=1) across realizations and ``rmse`` the root of
    the mean squared deviation from the reference, so that
    ``rmse**2 == bias**2 + std**2 * (R - 1) / R``.
    """

    times: np.ndarray
    rmse: np.ndarray
    bias: np.ndarray
    std: np.ndarray
    n_realizations: int
    observable: str = ""


@dataclass(frozen=True)
class ScalingFit:
    sizes: np.ndarray
    times: np.ndarray
    exponent: float
    prefactor: float
    r_squared: float


def _aligned(*arrays):
    arrays = [np.asarray(a) for a in arrays]
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise AlignmentError(f"shape mismatch: {shape} vs {a.shape}")
    return arrays


def jackknife1(full, half):
    """``2 * full - half`` where ``half`` used bundles ``1..M/2``.

    Elementwise, so it applies equally to observable series and to stacks
    of density matrices.  Do not feed purity series: purity is quadratic in
    rho and must be recomputed from the jackknifed density matrix.
    """
    full, half = _aligned(full, half)
    return 2.0 * full - half


def jackknife2(full, half_a, half_b):
    """``2 * full - (half_a + half_b) / 2`` over the two disjoint bundle halves."""
    full, half_a, half_b = _aligned(full, half_a, half_b)
    return 2.0 * full - 0.5 * (half_a + half_b)


JACKKNIFE_WEIGHTS = {
    "bundled": (1.0, 0.0, 0.0),
    "jk1": (2.0, -1.0, 0.0),
    "jk2": (2.0, -0.5, -0.5),
}


def ensemble_stats(realizations, reference, times=None, observable: str = "") -> EnsembleStats:
    obs = np.asarray(realizations, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if obs.ndim != 2:
        raise AlignmentError(f"realizations must be a 2-D (R, T) array, got shape {obs.shape}")
    r = obs.shape[0]
    if r < 2:
        raise InsufficientSampleError(f"need at least 2 realizations, got {r}")
    if ref.shape != obs.shape[1:]:
        raise AlignmentError(f"reference length {ref.shape} does not match {obs.shape[1:]}")
    if times is None:
        times = np.arange(ref.shape[0], dtype=float)
    times = np.asarray(times, dtype=float)
    if times.shape != ref.shape:
        raise AlignmentError("times do not match the reference grid")
    dev = obs - ref
    bias = dev.mean(axis=0)
    std = obs.std(axis=0, ddof=1)
    rmse = np.sqrt(np.mean(dev**2, axis=0))
    return EnsembleStats(times=times, rmse=rmse, bias=bias, std=std,
                         n_realizations=r, observable=observable)


def max_rmse(stats: EnsembleStats) -> tuple[float, float]:
    """Largest RMSE and the earliest time it occurs."""
    if len(stats.rmse) == 0:
        raise ParameterError("empty statistics")
    i = int(np.argmax(stats.rmse))
    return float(stats.rmse[i]), float(stats.times[i])


def fit_power_law(sizes, times) -> ScalingFit:
    """Least-squares fit of ``t = a N**n`` as a line in log-log space."""
    n = np.asarray(sizes, dtype=float)
    t = np.asarray(times, dtype=float)
    if n.shape != t.shape or n.ndim != 1:
        raise AlignmentError("sizes and times must be 1-D and equally long")
    if len(n) < 2:
        raise ParameterError(f"need at least 2 points for a scaling fit, got {len(n)}")
    if np.any(n <= 0) or np.any(t <= 0):
        raise ParameterError("sizes and times must be strictly positive")
    if np.any(np.diff(n) <= 0):
        raise ParameterError("sizes must be strictly increasing")
    lx, ly = np.log(n), np.log(t)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(sizes=n, times=t, exponent=float(slope),
                      prefactor=float(np.exp(intercept)), r_squared=float(r2))
