"""Quantum error bars for state tomography.

From POVM outcome counts to a concise error report: sample states from the
likelihood-weighted Hilbert-Schmidt distribution with a Metropolis-Hastings
walk on the purification hypersphere, histogram a figure of merit, fit the
histogram's log density with a skewed-Gaussian model, and summarize it as
the quantum error bars ``(f0, Delta, gamma)`` from which confidence-region
thresholds follow.
"""

__version__ = "0.1.0"

from .cli import parse_calibration, parse_dataset
from .figures import (
    FigureOfMerit,
    ObservableExpectation,
    PurifiedDistanceTo,
    SquaredFidelityTo,
    SquaredFidelityToPure,
    TraceDistanceTo,
    evaluate,
    model_variables,
    purified_distance,
    root_fidelity,
    trace_distance,
)
from .fitqeb import (
    BootstrapResult,
    ConfidenceReport,
    FitParams,
    QuantumErrorBars,
    bootstrap_compare,
    confidence_threshold,
    fit_log_model,
    log_poly_n,
    model_log_density,
    peak_position,
    poly_n,
    quantum_error_bars,
)
from .histstats import (
    FomHistogram,
    HistogramAccumulator,
    HistogramSpec,
    binning_error,
    combine,
    cross_walker_error,
    histogram_from_series,
    tail_weight,
)
from .likelihood import log_likelihood, log_likelihood_ratio, outcome_probabilities
from .mle import MleResult, mle
from .sampler import (
    AnalysisResult,
    WalkConfig,
    WalkerReport,
    acceptance_probability,
    metropolis_accept,
    mh_step,
    pilot_histogram_spec,
    propose_jump,
    run_analysis,
    run_walker,
    tune_step_size,
    walker_seed,
)
from .statespace import (
    DensityMatrix,
    PureState,
    StatePoint,
    coords_from_matrix,
    matrix_from_coords,
    point_from_rho,
    random_point,
    rho_from_point,
)
from .tomodata import (
    CalibrationReadout,
    PovmEffect,
    TomographyDataset,
    build_effective_povm,
    merge_duplicate_effects,
    simulate_dataset,
    standard_pauli_settings,
    tensor_effects,
)
