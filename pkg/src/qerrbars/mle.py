"""Maximum likelihood state estimation by a monotone fixed-point iteration.

The iteration is the classic ``R rho R`` update with
``R = sum_k (n_k / p_k) E_k / n`` and ``p_k = tr(E_k rho)``, damped
("diluted") whenever a full step would increase the log-likelihood
``lam(rho)``.  Starting from the maximally mixed state keeps directions the
data does not constrain at zero, which also serves as the tie-break for flat
likelihoods.  Self-contained and adequate up to dimension ~32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statespace import DensityMatrix
from .tomodata import TomographyDataset

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class MleResult:
    """Estimate with its final log-likelihood and iteration diagnostics."""

    state: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    #: lam after each accepted iteration, starting with the initial state.
    lambda_history: np.ndarray


def _lam(counts: np.ndarray, probs: np.ndarray) -> float:
    return float(-2.0 * np.dot(counts, np.log(probs)))


def mle(
    data: TomographyDataset,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MleResult:
    """Minimize ``lam(rho)`` over states.

    Iterates until an accepted step lowers ``lam`` by less than ``tol``;
    ``lam`` never increases along accepted iterates.  If ``max_iter`` is
    exhausted the best iterate so far is returned with ``converged=False``.
    """
    dim = data.dim
    observed = data.counts > 0
    effects = data.effect_stack[observed]
    counts = data.counts[observed].astype(float)
    n_total = counts.sum()
    traces = np.einsum("kii->k", effects).real
    if np.any(traces <= 0):
        raise ValueError("an observed effect has zero trace; its count can never occur")

    eye = np.eye(dim, dtype=complex)
    rho = eye / dim
    probs = np.einsum("kij,ji->k", effects, rho).real
    lam = _lam(counts, probs)
    history = [lam]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        r_op = np.einsum("k,kij->ij", counts / probs, effects) / n_total
        candidate = r_op @ rho @ r_op
        candidate = 0.5 * (candidate + candidate.conj().T)
        candidate /= candidate.trace().real
        cand_probs = np.einsum("kij,ji->k", effects, candidate).real
        lam_cand = (
            _lam(counts, cand_probs) if np.all(cand_probs > 0) else np.inf
        )
        if not lam_cand <= lam:
            # Damp the update: A = (I + eps*R) / (1 + eps), halving eps until
            # the step is downhill.  eps -> 0 recovers the current iterate.
            eps = 1.0
            while eps > 1e-12:
                a_op = (eye + eps * r_op) / (1.0 + eps)
                candidate = a_op @ rho @ a_op
                candidate = 0.5 * (candidate + candidate.conj().T)
                candidate /= candidate.trace().real
                cand_probs = np.einsum("kij,ji->k", effects, candidate).real
                if np.all(cand_probs > 0):
                    lam_cand = _lam(counts, cand_probs)
                    if lam_cand <= lam:
                        break
                eps *= 0.5
        if lam_cand <= lam:
            delta = lam - lam_cand
            rho = candidate
            probs = cand_probs
            lam = lam_cand
            history.append(lam)
        else:
            delta = 0.0
        if delta < tol:
            converged = True
            break

    return MleResult(
        state=DensityMatrix(dim, rho),
        log_likelihood=lam,
        iterations=iterations,
        converged=converged,
        lambda_history=np.array(history),
    )
