"""Shared test utilities: small oracles and dataset builders."""

import math

import numpy as np

from qerrbars import (
    DensityMatrix,
    FomHistogram,
    HistogramSpec,
    TomographyDataset,
    model_log_density,
    standard_pauli_settings,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def bloch_state(x, y, z):
    return DensityMatrix(2, 0.5 * (np.eye(2) + x * SX + y * SY + z * SZ))


def pauli_qubit_dataset(counts_by_setting):
    """counts_by_setting: ((x+, x-), (y+, y-), (z+, z-))."""
    settings = standard_pauli_settings(1)
    effects = tuple(e for setting in settings for e in setting)
    counts = np.array([c for pair in counts_by_setting for c in pair])
    return TomographyDataset(2, effects, counts)


def bloch_grid_search(counts_by_setting):
    """Independent MLE oracle: coarse-to-fine search over the Bloch ball.

    Outcome probabilities along each Pauli axis are (1 +- r_i)/2, so this
    never touches the estimator under test.
    """
    counts = np.asarray(counts_by_setting, dtype=float)

    def lam(points):
        probs_up = (1 + points) / 2  # (n, 3)
        probs_dn = (1 - points) / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -2 * (
                np.sum(counts[:, 0] * np.log(probs_up), axis=1)
                + np.sum(counts[:, 1] * np.log(probs_dn), axis=1)
            )
        return np.where(np.isfinite(val), val, np.inf)

    center = np.zeros(3)
    half = 1.0
    step = 0.05
    while step >= 1e-3 / 2:
        axes = [np.arange(c - half, c + half + step / 2, step) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        grid = grid[np.sum(grid**2, axis=1) <= 1.0]
        best = grid[np.argmin(lam(grid))]
        center, half, step = best, 2 * step, step / 10
    return bloch_state(*center)


def synthetic_histogram(a2, a1, m, c, h, s, f_lo, f_hi, bins=100, rel_err=1e-3):
    """Noiseless forward-model histogram; returns (histogram, c_offset).

    Normalization rescales the density by a constant, so the c recovered by
    a fit equals the input c minus ``c_offset``.
    """
    spec = HistogramSpec(f_lo, f_hi, bins)
    x = s * (spec.centers - h)
    density = np.exp(model_log_density(x, a2, a1, m, c))
    norm = density.sum() * spec.bin_width
    density = density / norm
    hist = FomHistogram(spec, density, rel_err * density)
    return hist, math.log(norm)
