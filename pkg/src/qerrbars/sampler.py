"""Metropolis-Hastings random walk over states, weighted by the likelihood.

A walker moves on the purification hypersphere: a jump candidate is the
current point plus ``step_size`` times a standard-normal vector, re-normalized
(a symmetric proposal), and is accepted with probability
``min(1, exp(-(lam' - lam)/2))``.  The stationary distribution of the induced
density matrices is the likelihood times the Hilbert-Schmidt measure, i.e.
the estimate density the histogrammed figure of merit is reduced from.

Walkers are fully independent: each derives its own RNG seed from
``(base_seed, walker_index)`` through a fixed SplitMix64 mix (documented in
``walker_seed``), owns its chain state, and is aggregated in index order, so
runs are bit-reproducible at a fixed base seed and walker count regardless
of scheduling.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .figures import FigureOfMerit
from .histstats import FomHistogram, HistogramSpec, combine, histogram_from_series
from .likelihood import log_likelihood
from .statespace import StatePoint, rho_from_point
from .tomodata import TomographyDataset

DEFAULT_STEP_SIZE = 0.01
DEFAULT_N_THERM = 500
#: Acceptance ratios outside this window trigger a diagnostic warning.
ACCEPTANCE_WINDOW = (0.2, 0.5)

_MASK64 = (1 << 64) - 1
# Auxiliary seed streams use index tags far above any realistic walker count.
_TUNER_TAG = 1 << 48
_PILOT_TAG = 1 << 49


@dataclass(frozen=True)
class WalkConfig:
    """Random-walk parameters.

    ``n_sweep`` is the number of steps between two recorded samples; when
    None it defaults to ``ceil(1/step_size)``, which gives the walk a chance
    to traverse state space between records.  ``n_therm`` counts discarded
    thermalization sweeps.
    """

    n_samples: int
    step_size: float = DEFAULT_STEP_SIZE
    n_therm: int = DEFAULT_N_THERM
    n_sweep: int | None = None
    n_walkers: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.n_therm < 0:
            raise ValueError("n_therm must be non-negative")
        if self.n_sweep is not None and self.n_sweep < 1:
            raise ValueError("n_sweep must be at least 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.n_walkers < 1:
            raise ValueError("n_walkers must be positive")

    @property
    def resolved_n_sweep(self) -> int:
        if self.n_sweep is not None:
            return self.n_sweep
        return max(1, math.ceil(1.0 / self.step_size))


@dataclass(frozen=True)
class WalkerReport:
    """Diagnostics of one walker run."""

    n_samples: int
    acceptance_ratio: float
    #: Recorded figure-of-merit time series, in recording order; the 0/1
    #: indicator series of any histogram bin derives from it.
    sample_series: np.ndarray


@dataclass(frozen=True)
class AnalysisResult:
    """Combined histogram plus the per-walker reports, in walker order."""

    histogram: FomHistogram
    walker_reports: tuple


def _splitmix64(value: int) -> int:
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def walker_seed(base_seed: int, walker_index: int) -> int:
    """Per-walker 32-bit seed: top half of splitmix64(splitmix64(base) + index).

    The mixing constants are fixed, so identical (base_seed, walker_index)
    pairs give identical walks on every platform.
    """
    mixed = _splitmix64((_splitmix64(base_seed & _MASK64) + walker_index) & _MASK64)
    return mixed >> 32


def default_worker_count() -> int:
    """Thread count for parallel walkers; ``QERRBARS_NUM_THREADS`` overrides."""
    env = os.environ.get("QERRBARS_NUM_THREADS")
    if env:
        count = int(env)
        if count < 1:
            raise ValueError("QERRBARS_NUM_THREADS must be positive")
        return count
    return os.cpu_count() or 1


def acceptance_probability(delta_lambda: float) -> float:
    """``min(1, exp(-delta_lambda/2))``; 0 for an infinite increase."""
    if math.isnan(delta_lambda):
        return 0.0
    if delta_lambda <= 0:
        return 1.0
    return math.exp(-0.5 * delta_lambda)


def metropolis_accept(delta_lambda: float, rng) -> bool:
    """Accept/reject decision; draws one uniform only when 0 < p < 1."""
    if math.isnan(delta_lambda) or delta_lambda == math.inf:
        return False
    if delta_lambda <= 0:
        return True
    rng = np.random.default_rng(rng)
    return rng.random() < math.exp(-0.5 * delta_lambda)


def propose_jump(point: StatePoint, step_size: float, rng) -> StatePoint:
    """Symmetric jump proposal: normalize(point + step_size * normal vector)."""
    if step_size < 0:
        raise ValueError("step_size must be non-negative")
    if step_size == 0.0:
        return point
    rng = np.random.default_rng(rng)
    coords = point.coords + step_size * rng.standard_normal(point.coords.shape[0])
    norm = np.linalg.norm(coords)
    while norm == 0.0:
        coords = point.coords + step_size * rng.standard_normal(point.coords.shape[0])
        norm = np.linalg.norm(coords)
    return StatePoint(point.dim, coords / norm)


def mh_step(
    point: StatePoint,
    lam_point: float,
    data: TomographyDataset,
    step_size: float,
    rng,
) -> tuple[StatePoint, float, bool]:
    """One Metropolis step; ``lam_point`` must equal the point's log-likelihood.

    Returns the (possibly unchanged) point, its log-likelihood, and whether
    the candidate was accepted.
    """
    rng = np.random.default_rng(rng)
    candidate = propose_jump(point, step_size, rng)
    lam_cand = log_likelihood(rho_from_point(candidate), data)
    if lam_cand == math.inf:
        return point, lam_point, False
    if lam_point == math.inf or metropolis_accept(lam_cand - lam_point, rng):
        return candidate, lam_cand, True
    return point, lam_point, False


def _real_rep_row(mat: np.ndarray) -> np.ndarray:
    # Row a such that a . r = tr(mat @ rho) for the kernel's real rep of rho.
    dim = mat.shape[0]
    iu, ju = np.triu_indices(dim, k=1)
    upper = mat[iu, ju]
    return np.concatenate(
        [np.diagonal(mat).real, 2.0 * upper.real, 2.0 * upper.imag]
    ).astype(float)


def _effect_rows(data: TomographyDataset) -> tuple[np.ndarray, np.ndarray]:
    # Effects with zero counts never contribute to lam; drop them up front.
    observed = data.counts > 0
    rows = np.array([_real_rep_row(m) for m in data.effect_stack[observed]])
    return np.ascontiguousarray(rows), data.counts[observed].astype(float)


def _kernel_inputs(fom: FigureOfMerit, dim: int):
    code, mat = fom._kernel_payload()
    if mat.shape != (dim, dim):
        raise ValueError(
            f"figure of merit is {mat.shape[0]}-dimensional, dataset is {dim}"
        )
    mat = np.ascontiguousarray(mat, dtype=complex)
    vec = _real_rep_row(mat) if code == 0 else np.zeros(dim * dim)
    return code, mat, vec


def _run_chain_raw(
    data: TomographyDataset,
    fom: FigureOfMerit,
    step_size: float,
    n_therm_steps: int,
    n_record: int,
    n_sweep: int,
    seed: int,
) -> tuple[np.ndarray, int, int]:
    a_rows, counts = _effect_rows(data)
    code, mat, vec = _kernel_inputs(fom, data.dim)
    series, accepted, total = _kernels.run_chain(
        a_rows,
        counts,
        data.dim,
        float(step_size),
        int(n_therm_steps),
        int(n_record),
        int(n_sweep),
        int(seed),
        int(code),
        mat,
        vec,
    )
    return fom._kernel_transform(series), int(accepted), int(total)


def run_walker(
    data: TomographyDataset,
    config: WalkConfig,
    walker_index: int,
    fom: FigureOfMerit,
    hist_spec: HistogramSpec,
) -> tuple[FomHistogram, WalkerReport]:
    """Run one walker and histogram its recorded figure-of-merit values.

    The walker starts from a random hypersphere point, discards
    ``n_therm * n_sweep`` steps, then records one value every ``n_sweep``
    steps.  Per-bin errors come from a binning analysis of the bin indicator
    series.  An acceptance ratio outside ``ACCEPTANCE_WINDOW`` triggers a
    warning (tune the step size), not a failure.
    """
    n_sweep = config.resolved_n_sweep
    series, accepted, total = _run_chain_raw(
        data,
        fom,
        config.step_size,
        config.n_therm * n_sweep,
        config.n_samples,
        n_sweep,
        walker_seed(config.base_seed, walker_index),
    )
    ratio = accepted / total if total else 0.0
    if not ACCEPTANCE_WINDOW[0] <= ratio <= ACCEPTANCE_WINDOW[1]:
        warnings.warn(
            f"walker {walker_index}: acceptance ratio {ratio:.3f} outside "
            f"{ACCEPTANCE_WINDOW}; consider adjusting step_size",
            stacklevel=2,
        )
    histogram = histogram_from_series(hist_spec, series)
    report = WalkerReport(
        n_samples=len(series), acceptance_ratio=ratio, sample_series=series
    )
    return histogram, report


def run_analysis(
    data: TomographyDataset,
    config: WalkConfig,
    fom: FigureOfMerit,
    hist_spec: HistogramSpec,
    max_workers: int | None = None,
) -> AnalysisResult:
    """Run ``n_walkers`` independent walkers and combine their histograms.

    Walker seeds derive from ``(base_seed, walker_index)``; aggregation is in
    walker-index order, so the combined histogram is reproducible bit for bit
    at a fixed base seed and walker count.
    """
    workers = max_workers or min(config.n_walkers, default_worker_count())

    def job(index: int):
        return run_walker(data, config, index, fom, hist_spec)

    if workers > 1 and config.n_walkers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(job, range(config.n_walkers)))
    else:
        outputs = [job(i) for i in range(config.n_walkers)]
    histograms = [h for h, _ in outputs]
    reports = tuple(r for _, r in outputs)
    return AnalysisResult(histogram=combine(histograms), walker_reports=reports)


def tune_step_size(
    data: TomographyDataset,
    fom: FigureOfMerit,
    base_seed: int = 0,
    target: float = 0.3,
    initial: float = DEFAULT_STEP_SIZE,
    probe_steps: int = 4096,
    max_rounds: int = 24,
) -> float:
    """Pre-run step-size tuner aiming at an acceptance ratio near ``target``.

    Runs short probe chains (discarded afterwards) and rescales the step
    size multiplicatively until the measured acceptance ratio falls in a
    band around the target.  Deterministic for a fixed ``base_seed``.
    """
    eta = initial
    for round_index in range(max_rounds):
        _, accepted, total = _run_chain_raw(
            data,
            fom,
            eta,
            probe_steps // 4,
            probe_steps,
            1,
            walker_seed(base_seed, _TUNER_TAG + round_index),
        )
        ratio = accepted / total
        if 0.25 <= ratio <= 0.4:
            break
        factor = min(2.0, max(0.5, ratio / target))
        eta = min(2.0, max(1e-5, eta * factor))
    return eta


def pilot_histogram_spec(
    data: TomographyDataset,
    config: WalkConfig,
    fom: FigureOfMerit,
    num_bins: int = 100,
    pilot_samples: int = 2048,
) -> HistogramSpec:
    """Histogram range from a short pilot run: mean +- 8 standard deviations.

    The range is clipped to the figure of merit's natural bounds.
    """
    n_sweep = config.resolved_n_sweep
    series, _, _ = _run_chain_raw(
        data,
        fom,
        config.step_size,
        config.n_therm * n_sweep,
        pilot_samples,
        n_sweep,
        walker_seed(config.base_seed, _PILOT_TAG),
    )
    mean = float(series.mean())
    spread = float(series.std())
    if spread == 0.0:
        spread = max(1e-9, 1e-9 * abs(mean))
    lo, hi = mean - 8.0 * spread, mean + 8.0 * spread
    natural_lo, natural_hi = fom.natural_range()
    lo = max(lo, natural_lo)
    hi = min(hi, natural_hi)
    if not lo < hi:
        lo, hi = lo - 1e-9, hi + 1e-9
    return HistogramSpec(lo, hi, num_bins)
