"""Skewed-Gaussian model fit, quantum error bars, and confidence thresholds.

The histogrammed density of a figure of merit is modeled, in the positive
variable ``x = s*(f - h)``, by

    ln mu = -a2*x**2 - a1*x + m*ln(x) + c        (m >= 0),

a Gaussian bent by a power-law volume factor.  The fitted parameters map to
the quantum error bars ``(f0, Delta, gamma)``:

    x0    = (-a1 + sqrt(a1**2 + 8*a2*m)) / (4*a2)      peak position (in x)
    f0    = h + s*x0                                     peak position (in f)
    Delta = (a2 + m/(2*x0**2))**(-1/2)                   de-skewed half width
                                                         at relative height 1/e
    gamma = m * Delta**4 / (6*x0**3)                     skewing factor

``gamma`` is the first-order (in ``m``) horizontal shift of the peak's sides
at relative height 1/e; for strongly skewed peaks the intercept-shift
interpretation is approximate while the formula above is evaluated verbatim.

A threshold on the figure of merit such that the enclosed states carry
weight ``1 - eps/poly(n)``, with ``poly(n) = 2*n**((d**2-1)/2)``, yields a
confidence region of level ``1 - eps`` once shifted by a user-supplied
enlargement ``delta`` (times the observable's eigenvalue spread ``w`` for
expectation values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .figures import FigureOfMerit, evaluate as evaluate_figure
from .histstats import FomHistogram, tail_weight
from .mle import mle
from .statespace import DensityMatrix
from .tomodata import simulate_dataset

#: Bins with relative error above this are excluded from the fit.
MAX_RELATIVE_ERROR = 1.0
#: Minimum number of usable bins for a four-parameter fit.
MIN_FIT_POINTS = 6


def model_log_density(x, a2: float, a1: float, m: float, c: float):
    """The log model ``-a2*x**2 - a1*x + m*ln(x) + c`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return -a2 * x**2 - a1 * x + m * np.log(x) + c


def peak_position(a2: float, a1: float, m: float) -> float:
    """Positive stationary point ``x0`` of the log model.

    Solves ``0 = -2*a2*x0 - a1 + m/x0`` for the positive root.
    """
    if a2 <= 0:
        raise ValueError(f"a2 must be positive, got {a2}")
    disc = a1 * a1 + 8.0 * a2 * m
    if disc < 0:
        raise ValueError(f"a1^2 + 8*a2*m = {disc} is negative; no real peak")
    x0 = (-a1 + math.sqrt(disc)) / (4.0 * a2)
    if x0 <= 0:
        raise ValueError(f"peak position x0 = {x0} is not positive")
    return x0


@dataclass(frozen=True)
class FitParams:
    """Fitted log-model parameters with their figure-of-merit variables.

    ``bounds_95`` maps each parameter name to its 95% confidence interval;
    ``reduced_chi_square`` is the weighted residual sum over the degrees of
    freedom.  Validation requires ``m >= 0``, ``a2 > 0`` and a positive peak
    position.
    """

    a2: float
    a1: float
    m: float
    c: float
    h: float
    s: int
    bounds_95: dict
    reduced_chi_square: float
    num_points: int

    def __post_init__(self):
        if self.s not in (-1, 1):
            raise ValueError(f"s must be +1 or -1, got {self.s}")
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m}")
        peak_position(self.a2, self.a1, self.m)


@dataclass(frozen=True)
class QuantumErrorBars:
    """Peak position, de-skewed half width, and skewing factor of mu(f)."""

    f0: float
    delta: float
    gamma: float
    #: Value of the log model at the peak (sets the curve's normalization).
    y0: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


def quantum_error_bars(params: FitParams) -> QuantumErrorBars:
    """Map fitted parameters to the quantum error bars ``(f0, Delta, gamma)``."""
    x0 = peak_position(params.a2, params.a1, params.m)
    curvature = params.a2 + params.m / (2.0 * x0 * x0)
    delta = curvature ** (-0.5)
    gamma = params.m * delta**4 / (6.0 * x0**3)
    y0 = float(model_log_density(x0, params.a2, params.a1, params.m, params.c))
    return QuantumErrorBars(
        f0=params.h + params.s * x0, delta=delta, gamma=gamma, y0=y0
    )


def _crossing(x, y, i_peak: int, target: float, step: int) -> float | None:
    # Walk from the peak until y drops below target; interpolate linearly
    # between the straddling points.
    j = i_peak
    while 0 <= j + step < len(y) and y[j + step] >= target:
        j += step
    k = j + step
    if not 0 <= k < len(y):
        return None
    if y[j] == y[k]:
        return float(x[k])
    return float(x[j] + (target - y[j]) * (x[k] - x[j]) / (y[k] - y[j]))


def _initial_guess(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Invert the error-bar map from empirical peak, 1/e width, and asymmetry.
    i_peak = int(np.argmax(y))
    x_peak = x[i_peak]
    y_peak = y[i_peak]
    target = y_peak - 1.0
    span = x[-1] - x[0]
    left = _crossing(x, y, i_peak, target, -1)
    right = _crossing(x, y, i_peak, target, +1)
    if left is None:
        left = x_peak - span / 4
    if right is None:
        right = x_peak + span / 4
    width = max((right - left) / 2.0, span / len(x))
    curvature = 1.0 / (width * width)
    skew = max(0.0, (left + right) / 2.0 - x_peak)
    m0 = 6.0 * skew * x_peak**3 / width**4
    # Start strictly inside the m >= 0 bound (m is dimensionless) and keep
    # the quadratic coefficient positive: m0 < 2*curvature*x_peak^2.
    m0 = min(max(m0, 0.5), 1.8 * curvature * x_peak**2)
    a2 = curvature - m0 / (2.0 * x_peak**2)
    a1 = 2.0 * m0 / x_peak - 2.0 * curvature * x_peak
    c = y_peak + a2 * x_peak**2 + a1 * x_peak - m0 * math.log(x_peak)
    return np.array([a2, a1, m0, c])


def fit_log_model(histogram: FomHistogram, fom_vars: tuple[float, int]) -> FitParams:
    """Weighted least-squares fit of the log model to a histogram.

    Each usable bin contributes ``y = ln(density)`` with standard deviation
    ``sigma = error/density`` (the propagated relative error).  Bins with
    zero density or relative error above ``MAX_RELATIVE_ERROR`` are excluded.
    ``m >= 0`` is a hard bound of the trust-region solver (a squared
    reparametrization was tried first and discarded: its stationary point at
    ``m = 0`` traps the fit whenever the initial skew estimate is poor).
    The quoted 95% parameter bounds come from the t distribution on the
    residual degrees of freedom.
    """
    h, s = fom_vars
    if s not in (-1, 1):
        raise ValueError(f"s must be +1 or -1, got {s}")
    density = histogram.density
    error = histogram.error
    usable = (density > 0) & (error <= MAX_RELATIVE_ERROR * density)
    if int(usable.sum()) < MIN_FIT_POINTS:
        raise ValueError(
            f"only {int(usable.sum())} usable bins; need at least {MIN_FIT_POINTS}"
        )
    x = s * (histogram.spec.centers[usable] - h)
    if np.any(x <= 0):
        raise ValueError(
            "a usable bin lies at or beyond the model offset h; shrink the "
            "histogram range or check the figure-of-merit variables"
        )
    y = np.log(density[usable])
    sigma = error[usable] / density[usable]
    positive = sigma[sigma > 0]
    floor = positive.min() if len(positive) else 1e-9
    sigma = np.where(sigma > 0, sigma, floor)

    order = np.argsort(x)
    x, y, sigma = x[order], y[order], sigma[order]

    def residuals(p):
        a2, a1, m, c = p
        return (model_log_density(x, a2, a1, m, c) - y) / sigma

    def jacobian(p):
        cols = np.empty((len(x), 4))
        cols[:, 0] = -(x**2) / sigma
        cols[:, 1] = -x / sigma
        cols[:, 2] = np.log(x) / sigma
        cols[:, 3] = 1.0 / sigma
        return cols

    result = optimize.least_squares(
        residuals,
        _initial_guess(x, y),
        jac=jacobian,
        method="trf",
        bounds=([-np.inf, -np.inf, 0.0, -np.inf], [np.inf] * 4),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=20_000,
    )
    if not result.success:
        raise RuntimeError(f"log-model fit did not converge: {result.message}")
    a2, a1, m, c = result.x

    dof = len(x) - 4
    chi_square = float(np.sum(result.fun**2))
    reduced = chi_square / dof if dof > 0 else math.nan
    # Covariance in the (a2, a1, m, c) parametrization, scaled by the
    # reduced chi-square as curve-fitting tools conventionally do.
    jac_m = np.empty((len(x), 4))
    jac_m[:, 0] = -(x**2) / sigma
    jac_m[:, 1] = -x / sigma
    jac_m[:, 2] = np.log(x) / sigma
    jac_m[:, 3] = 1.0 / sigma
    cov = np.linalg.pinv(jac_m.T @ jac_m) * (reduced if dof > 0 else 1.0)
    widths = stats.t.ppf(0.975, dof) * np.sqrt(np.diag(cov)) if dof > 0 else np.full(4, math.inf)
    names = ("a2", "a1", "m", "c")
    values = (a2, a1, m, c)
    bounds = {
        name: (float(val - wd), float(val + wd))
        for name, val, wd in zip(names, values, widths)
    }
    bounds["m"] = (max(0.0, bounds["m"][0]), bounds["m"][1])
    return FitParams(
        a2=float(a2),
        a1=float(a1),
        m=float(m),
        c=float(c),
        h=float(h),
        s=int(s),
        bounds_95=bounds,
        reduced_chi_square=float(reduced),
        num_points=len(x),
    )


def log_poly_n(n: int, d: int) -> float:
    """``ln(2 * n**((d**2-1)/2))``, the log of the region-weight blow-up."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if d < 2:
        raise ValueError("d must be at least 2")
    return math.log(2.0) + 0.5 * (d * d - 1) * math.log(n)


def poly_n(n: int, d: int) -> float:
    """``2 * n**((d**2-1)/2)`` evaluated in log space (may overflow to inf)."""
    try:
        return math.exp(log_poly_n(n, d))
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class ConfidenceReport:
    """One-sided confidence region for the figure of merit."""

    epsilon: float
    n: int
    d: int
    poly_n: float
    epsilon_reduced: float
    log10_epsilon_reduced: float
    f_star: float
    delta_enlargement: float
    f_reported: float
    region_bounds: tuple[float, float]
    region: str


def _log_trapezoid(log_values: np.ndarray, grid: np.ndarray) -> float:
    # log of integral exp(log_values) d(grid), stable for very negative logs.
    peak = np.max(log_values)
    if not np.isfinite(peak):
        return -math.inf
    weight = np.trapezoid(np.exp(log_values - peak), grid)
    return peak + math.log(weight) if weight > 0 else -math.inf


def _model_threshold(params: FitParams, log_eps_reduced: float) -> float:
    # x* with log of the upper-tail mass beyond x* equal to log_eps_reduced
    # (relative to the full mass); the region always contains small x.
    a2, a1, m = params.a2, params.a1, params.m
    x0 = peak_position(a2, a1, m)
    delta = (a2 + m / (2.0 * x0 * x0)) ** -0.5
    y_peak = float(model_log_density(x0, a2, a1, m, 0.0))
    x_hi = x0 + 50.0 * delta
    while float(model_log_density(x_hi, a2, a1, m, 0.0)) > y_peak - 1400.0:
        x_hi *= 1.5
    x_lo = min(x0, delta) * 1e-12
    grid = np.linspace(x_lo, x_hi, 200_001)
    logs = model_log_density(grid, a2, a1, m, 0.0)
    log_total = _log_trapezoid(logs, grid)

    # Reverse cumulative trapezoid in scaled space gives the log tail mass
    # at every grid point.
    scaled = np.exp(logs - np.max(logs))
    seg = 0.5 * (scaled[:-1] + scaled[1:]) * np.diff(grid)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    with np.errstate(divide="ignore"):
        log_tail = np.max(logs) + np.log(tail) - log_total
    target = log_eps_reduced
    idx = np.searchsorted(-log_tail, -target)
    if idx <= 0:
        return float(grid[0])
    if idx >= len(grid):
        raise RuntimeError("tail target below numerical resolution of the model")
    # Linear interpolation of the smooth log-tail between neighboring nodes.
    x_a, x_b = grid[idx - 1], grid[idx]
    t_a, t_b = log_tail[idx - 1], log_tail[idx]
    if not np.isfinite(t_b) or t_a == t_b:
        # Target falls inside one grid cell; the cell width bounds the error.
        return float(x_a)
    return float(x_a + (target - t_a) * (x_b - x_a) / (t_b - t_a))


def _histogram_threshold(
    histogram: FomHistogram, side: str, weight_target: float
) -> float:
    spec = histogram.spec
    lo, hi = spec.f_min, spec.f_max
    direction = ">=" if side == "ge" else "<="
    # The weight must be reachable strictly inside the range: if even one
    # bin away from the edge falls short, the threshold would degenerate to
    # the histogram boundary.
    inner = lo + spec.bin_width if side == "ge" else hi - spec.bin_width
    if tail_weight(histogram, inner, direction) < weight_target:
        raise RuntimeError(
            "required region weight is unreachable within the histogram "
            "range (boundary saturation); use the fitted model instead"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail_weight(histogram, mid, direction) >= weight_target:
            # The region can afford a tighter threshold on this side.
            if side == "ge":
                lo = mid
            else:
                hi = mid
        else:
            if side == "ge":
                hi = mid
            else:
                lo = mid
        if hi - lo <= 1e-13 * (spec.f_max - spec.f_min):
            break
    return lo if side == "ge" else hi


def confidence_threshold(
    source: FitParams | FomHistogram,
    fom: FigureOfMerit,
    epsilon: float,
    n: int,
    d: int,
    delta_enlargement: float,
    observable_range: float | None = None,
) -> ConfidenceReport:
    """Figure-of-merit threshold whose region is a confidence region.

    Finds ``f_star`` such that the states on the desirable side of it carry
    weight ``1 - epsilon/poly(n)`` under the sampled density, inverting the
    fitted model (smooth far tails) or, when ``source`` is a histogram, the
    raw histogram.  The threshold is then relaxed by the user-supplied
    purified-distance enlargement ``delta_enlargement``: down for fidelity,
    up for distances, scaled by ``observable_range`` (the eigenvalue spread
    ``w``) for observables.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if delta_enlargement < 0:
        raise ValueError("delta_enlargement must be non-negative")
    if fom.h is None or fom.s is None:
        raise ValueError(
            f"figure of merit {fom.kind!r} does not define a confidence construction"
        )
    width = 1.0
    if fom.kind == "observable":
        if observable_range is None:
            raise ValueError(
                "observable_range (eigenvalue spread w) is required for "
                "observable figures of merit"
            )
        width = float(observable_range)
    side = "ge" if fom.s == -1 else "le"

    log_eps_reduced = math.log(epsilon) - log_poly_n(n, d)
    if isinstance(source, FitParams):
        x_star = _model_threshold(source, log_eps_reduced)
        f_star = source.h + source.s * x_star
    elif isinstance(source, FomHistogram):
        eps_reduced = math.exp(log_eps_reduced)
        f_star = _histogram_threshold(source, side, 1.0 - eps_reduced)
    else:
        raise TypeError(f"source must be FitParams or FomHistogram, got {type(source)}")

    shift = width * delta_enlargement
    f_reported = f_star + fom.s * shift
    natural_lo, natural_hi = fom.natural_range()
    if side == "ge":
        bounds = (f_reported, natural_hi)
        description = f"{fom.kind} >= {f_reported:.6g}"
    else:
        bounds = (natural_lo, f_reported)
        description = f"{fom.kind} <= {f_reported:.6g}"
    return ConfidenceReport(
        epsilon=epsilon,
        n=n,
        d=d,
        poly_n=poly_n(n, d),
        epsilon_reduced=math.exp(log_eps_reduced),
        log10_epsilon_reduced=log_eps_reduced / math.log(10.0),
        f_star=f_star,
        delta_enlargement=delta_enlargement,
        f_reported=f_reported,
        region_bounds=bounds,
        region=f"{description} (confidence level {1.0 - epsilon:g})",
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Figure-of-merit values of re-estimated states, plus failure count."""

    values: np.ndarray
    failures: int


def bootstrap_compare(
    settings,
    shots_per_setting: int,
    rho_mle: DensityMatrix,
    fom: FigureOfMerit,
    rng,
    reps: int = 300,
    mle_tol: float = 1e-8,
    mle_max_iter: int = 20_000,
) -> BootstrapResult:
    """Parametric bootstrap for comparison with the sampled histogram.

    Each repetition simulates a fresh dataset from ``rho_mle`` with the same
    settings and shot count, recomputes the maximum likelihood estimate, and
    evaluates the figure of merit on it.  Estimation failures are counted
    and skipped rather than raised.
    """
    if reps < 0:
        raise ValueError("reps must be non-negative")
    rng = np.random.default_rng(rng)
    values = []
    failures = 0
    for stream in rng.spawn(reps):
        try:
            dataset = simulate_dataset(rho_mle, settings, shots_per_setting, stream)
            result = mle(dataset, tol=mle_tol, max_iter=mle_max_iter)
            if not result.converged:
                failures += 1
            values.append(evaluate_figure(fom, result.state))
        except (ValueError, RuntimeError):
            failures += 1
    return BootstrapResult(values=np.array(values), failures=failures)
