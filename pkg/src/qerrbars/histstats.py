"""Histograms of figure-of-merit samples and their statistical errors.

Bins are left-closed, right-open; a value equal to the top edge counts as
off-range (set ``f_max`` slightly above a hard upper bound such as a
fidelity of exactly 1 if that matters).  Densities are normalized so the
in-range mass integrates to 1; off-range samples are counted and reported
separately.

Errors on correlated Monte Carlo time series come from a binning analysis:
successive pairwise averaging until the error estimate of the mean reaches
a plateau.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .statespace import _freeze

#: Minimum series length for a binning analysis (2**4).
MIN_BINNING_LENGTH = 16
#: Three consecutive binning levels agreeing within this relative spread
#: declare a plateau.
PLATEAU_RTOL = 0.05


@dataclass(frozen=True)
class HistogramSpec:
    """Range and resolution of a histogram: ``num_bins`` over [f_min, f_max)."""

    f_min: float
    f_max: float
    num_bins: int

    def __post_init__(self):
        if not self.f_min < self.f_max:
            raise ValueError(f"need f_min < f_max, got [{self.f_min}, {self.f_max}]")
        if self.num_bins < 2:
            raise ValueError("num_bins must be at least 2")

    @property
    def bin_width(self) -> float:
        return (self.f_max - self.f_min) / self.num_bins

    @property
    def edges(self) -> np.ndarray:
        return self.f_min + self.bin_width * np.arange(self.num_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.f_min + self.bin_width * (np.arange(self.num_bins) + 0.5)

    def bin_indices(self, values: np.ndarray) -> np.ndarray:
        """Bin index per value; -1 marks off-range (including ``f_max`` itself)."""
        values = np.asarray(values, dtype=float)
        idx = np.floor((values - self.f_min) / self.bin_width).astype(np.int64)
        idx = np.minimum(idx, self.num_bins - 1)
        idx[(values < self.f_min) | (values >= self.f_max)] = -1
        return idx


class HistogramAccumulator:
    """Single-writer count accumulator for one histogram spec."""

    def __init__(self, spec: HistogramSpec):
        self.spec = spec
        self.counts = np.zeros(spec.num_bins, dtype=np.int64)
        self.off_range_count = 0

    def record(self, value: float) -> None:
        """Count one sample; off-range values go to ``off_range_count``."""
        idx = self.spec.bin_indices(np.array([value]))[0]
        if idx < 0:
            self.off_range_count += 1
        else:
            self.counts[idx] += 1

    def record_many(self, values: np.ndarray) -> None:
        idx = self.spec.bin_indices(values)
        in_range = idx >= 0
        self.counts += np.bincount(idx[in_range], minlength=self.spec.num_bins)
        self.off_range_count += int(np.sum(~in_range))


@dataclass(frozen=True)
class FomHistogram:
    """Normalized density estimate with per-bin standard errors."""

    spec: HistogramSpec
    density: np.ndarray
    error: np.ndarray
    off_range_count: int = 0

    def __post_init__(self):
        density = np.array(self.density, dtype=float)
        error = np.array(self.error, dtype=float)
        nbins = self.spec.num_bins
        if density.shape != (nbins,) or error.shape != (nbins,):
            raise ValueError("density and error must have one entry per bin")
        if np.any(density < 0) or np.any(error < 0):
            raise ValueError("density and error must be non-negative")
        mass = density.sum() * self.spec.bin_width
        if mass > 0 and abs(mass - 1.0) > 1e-9:
            raise ValueError(f"density integrates to {mass!r}, not 1")
        _freeze(self, "density", density)
        _freeze(self, "error", error)


def histogram_from_series(
    spec: HistogramSpec, values: np.ndarray, use_binning: bool = True
) -> FomHistogram:
    """Histogram a sample series, with binning-analysis error bars per bin.

    The per-bin error is the error of the mean of that bin's 0/1 indicator
    series, scaled to density units.  ``use_binning=False`` falls back to the
    naive (uncorrelated) estimate.
    """
    values = np.asarray(values, dtype=float)
    idx = spec.bin_indices(values)
    in_range = idx >= 0
    counts = np.bincount(idx[in_range], minlength=spec.num_bins)
    n_total = len(values)
    n_in = int(counts.sum())
    if n_in == 0:
        raise ValueError("no samples fall inside the histogram range")
    scale = n_total / (n_in * spec.bin_width)
    density = counts / n_total * scale
    indicators = np.zeros((n_total, spec.num_bins))
    indicators[np.arange(n_total)[in_range], idx[in_range]] = 1.0
    if use_binning:
        errors = binning_errors_by_column(indicators) * scale
    else:
        errors = indicators.std(axis=0, ddof=0) / math.sqrt(max(n_total - 1, 1)) * scale
    return FomHistogram(spec, density, errors, off_range_count=n_total - n_in)


def _binning_level_errors(columns: np.ndarray) -> np.ndarray:
    """Error-of-mean estimates per binning level for each column.

    Level 0 is the naive estimate std/sqrt(N-1); each further level averages
    pairs of consecutive entries (dropping a trailing odd element), up to the
    level that still holds ``MIN_BINNING_LENGTH`` entries.
    """
    levels = []
    block = columns
    while True:
        m = block.shape[0]
        levels.append(block.std(axis=0, ddof=0) / math.sqrt(m - 1))
        if m // 2 < MIN_BINNING_LENGTH:
            break
        if m % 2:
            block = block[:-1]
        block = 0.5 * (block[0::2] + block[1::2])
    return np.array(levels)


def _plateau_estimate(level_errors: np.ndarray) -> float:
    """Plateau value across binning levels, never below the naive estimate."""
    naive = float(level_errors[0])
    for i in range(len(level_errors) - 2):
        window = level_errors[i : i + 3]
        hi = float(window.max())
        if hi == 0.0 or (hi - float(window.min())) <= PLATEAU_RTOL * hi:
            return max(naive, float(window.mean()))
    # No plateau: the series is more correlated than the deepest level can
    # resolve; report the largest (most pessimistic) estimate.
    return max(naive, float(level_errors.max()))


def binning_error(series: np.ndarray) -> float:
    """Standard error of the mean of a correlated series via binning analysis.

    Series shorter than 16 fall back to the naive estimate with a warning.
    """
    series = np.asarray(series, dtype=float)
    n = len(series)
    if n < MIN_BINNING_LENGTH:
        warnings.warn(
            f"series of length {n} is too short for a binning analysis; "
            "returning the naive error",
            stacklevel=2,
        )
        if n < 2:
            return 0.0
        return float(series.std(ddof=0) / math.sqrt(n - 1))
    levels = _binning_level_errors(series[:, None])[:, 0]
    return _plateau_estimate(levels)


def binning_errors_by_column(columns: np.ndarray) -> np.ndarray:
    """Binning-analysis error for every column of a (samples, columns) array."""
    columns = np.asarray(columns, dtype=float)
    if columns.shape[0] < MIN_BINNING_LENGTH:
        n = columns.shape[0]
        warnings.warn(
            f"series of length {n} is too short for a binning analysis; "
            "returning the naive error",
            stacklevel=2,
        )
        if n < 2:
            return np.zeros(columns.shape[1])
        return columns.std(axis=0, ddof=0) / math.sqrt(n - 1)
    levels = _binning_level_errors(columns)
    return np.array([_plateau_estimate(levels[:, j]) for j in range(levels.shape[1])])


def combine(histograms: list[FomHistogram]) -> FomHistogram:
    """Average normalized histograms; errors combine in quadrature over K.

    All inputs must share the same spec.  The result's density is the plain
    per-bin mean and its error is ``sqrt(sum err_i^2) / K``.
    """
    if not histograms:
        raise ValueError("need at least one histogram")
    spec = histograms[0].spec
    for idx, hist in enumerate(histograms[1:], start=1):
        if hist.spec != spec:
            raise ValueError(f"histograms[{idx}] has a different spec")
    k = len(histograms)
    density = np.mean([h.density for h in histograms], axis=0)
    error = np.sqrt(np.sum([h.error**2 for h in histograms], axis=0)) / k
    off_range = sum(h.off_range_count for h in histograms)
    return FomHistogram(spec, density, error, off_range_count=off_range)


def cross_walker_error(histograms: list[FomHistogram]) -> np.ndarray:
    """Per-bin standard error of the mean across independent runs.

    Consistency check against the binning-analysis errors carried by the
    combined histogram.
    """
    if len(histograms) < 2:
        raise ValueError("need at least two histograms")
    densities = np.array([h.density for h in histograms])
    return densities.std(axis=0, ddof=1) / math.sqrt(len(histograms))


def _polyline(hist: FomHistogram) -> tuple[np.ndarray, np.ndarray]:
    # Density polyline over bin centers, extended flat to the range edges.
    spec = hist.spec
    xs = np.concatenate([[spec.f_min], spec.centers, [spec.f_max]])
    ys = np.concatenate([[hist.density[0]], hist.density, [hist.density[-1]]])
    return xs, ys


def tail_weight(hist: FomHistogram, f: float, direction: str) -> float:
    """Integrated density mass on one side of ``f`` (trapezoid rule).

    ``direction`` is ``">="`` for the mass at or above ``f`` and ``"<="``
    for the mass at or below.  ``f`` must lie within the histogram range.
    """
    if direction not in (">=", "<="):
        raise ValueError(f"direction must be '>=' or '<=', got {direction!r}")
    spec = hist.spec
    if not spec.f_min <= f <= spec.f_max:
        raise ValueError(f"f={f} outside histogram range [{spec.f_min}, {spec.f_max}]")
    xs, ys = _polyline(hist)
    y_at_f = np.interp(f, xs, ys)
    if direction == ">=":
        keep = xs > f
        seg_x = np.concatenate([[f], xs[keep]])
        seg_y = np.concatenate([[y_at_f], ys[keep]])
    else:
        keep = xs < f
        seg_x = np.concatenate([xs[keep], [f]])
        seg_y = np.concatenate([ys[keep], [y_at_f]])
    if len(seg_x) < 2:
        return 0.0
    return float(np.clip(np.trapezoid(seg_y, seg_x), 0.0, 1.0))
