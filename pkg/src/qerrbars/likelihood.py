"""Log-likelihood of a state given observed POVM outcome counts.

The sampler's energy-like function is ``lam(rho) = -2 sum_k n_k ln tr(E_k rho)``.
Only differences of ``lam`` ever enter acceptance decisions, so no
normalization constant is needed anywhere.
"""

from __future__ import annotations

import math

import numpy as np

from .statespace import DensityMatrix
from .tomodata import TomographyDataset

#: Probabilities below this for an observed effect count as zero; the
#: likelihood then vanishes and ``lam`` is reported as +inf.
ZERO_PROBABILITY = 1e-300
#: Outcome probabilities must be real; larger imaginary parts indicate
#: corrupted (non-Hermitian) inputs.
IMAG_TOL = 1e-9


def outcome_probabilities(rho: DensityMatrix, data: TomographyDataset) -> np.ndarray:
    """Probabilities ``tr(E_k rho)`` for every effect in the dataset."""
    if rho.dim != data.dim:
        raise ValueError(f"state dimension {rho.dim} != dataset dimension {data.dim}")
    probs = np.einsum("kij,ji->k", data.effect_stack, rho.entries)
    worst = np.max(np.abs(probs.imag))
    if worst > IMAG_TOL:
        raise ValueError(f"outcome probability has imaginary part {worst:.3e}")
    return probs.real


def log_likelihood(rho: DensityMatrix, data: TomographyDataset) -> float:
    """Evaluate ``lam(rho) = -2 sum_k n_k ln tr(E_k rho)``.

    Returns ``math.inf`` when an effect that was actually observed has zero
    probability under ``rho``; the sampler then rejects such candidates
    instead of propagating NaNs.
    """
    probs = outcome_probabilities(rho, data)
    observed = data.counts > 0
    p_obs = probs[observed]
    if np.any(p_obs < ZERO_PROBABILITY):
        return math.inf
    return float(-2.0 * np.dot(data.counts[observed], np.log(p_obs)))


def log_likelihood_ratio(
    rho_new: DensityMatrix, rho_old: DensityMatrix, data: TomographyDataset
) -> float:
    """Difference ``lam(rho_new) - lam(rho_old)``.

    The acceptance probability of a candidate in the sampler is
    ``min(1, exp(-ratio/2))``.  An infinite ``lam(rho_new)`` yields +inf
    (certain rejection); an infinite ``lam(rho_old)`` with a finite candidate
    yields -inf (certain acceptance).
    """
    lam_new = log_likelihood(rho_new, data)
    if math.isinf(lam_new):
        return math.inf
    lam_old = log_likelihood(rho_old, data)
    if math.isinf(lam_old):
        return -math.inf
    return lam_new - lam_old
