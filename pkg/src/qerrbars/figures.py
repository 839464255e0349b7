"""Figures of merit ``f(rho)`` and their fit-model variables ``(h, s)``.

Each figure of merit carries the offset ``h`` and sign ``s`` that relate it
to the positive fit variable ``x = s*(f - h)``:

===============================  =====  ====
kind                               h      s
===============================  =====  ====
squared fidelity to pure state     1     -1
trace distance to reference        0     +1
purified distance to reference     0     +1
observable, maximum ``a``          a     -1
observable, minimum ``a``          a     +1
===============================  =====  ====

The squared fidelity to a pure state equals the expectation value of the
reference projector, so it shares the observable machinery with ``a = 1``.
The purified-distance row is a pragmatic extension of the trace-distance
one: the log model is not derived for it, and fitting warns accordingly.
"""

from __future__ import annotations

import warnings

import numpy as np

from .statespace import DensityMatrix, PureState

# Codes understood by the compiled sampling kernel.
KERNEL_OBSERVABLE = 0
KERNEL_TRACE_DISTANCE = 1
KERNEL_PURIFIED_DISTANCE = 2


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} != {b}")


def hermitian_root(mat: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix via its spectrum."""
    eigvals, eigvecs = np.linalg.eigh(mat)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.conj().T


def root_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Fidelity ``F(rho, sigma) = tr sqrt(sqrt(rho) sigma sqrt(rho))``."""
    _check_dims(rho.dim, sigma.dim)
    root = hermitian_root(rho.entries)
    inner = root @ sigma.entries @ root
    eigvals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(eigvals, 0.0, None))))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Trace distance ``0.5 * ||rho - sigma||_1``."""
    _check_dims(rho.dim, sigma.dim)
    eigvals = np.linalg.eigvalsh(rho.entries - sigma.entries)
    return float(0.5 * np.sum(np.abs(eigvals)))


def purified_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Purified distance ``sqrt(1 - F^2(rho, sigma))``."""
    fid = root_fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 1.0 - fid * fid)))


class FigureOfMerit:
    """Base class; concrete kinds implement ``evaluate``.

    Attributes ``h`` and ``s`` are the fit-model variables (None when the
    kind has no fit model or the observable extremum was not supplied).
    """

    kind = "abstract"
    #: Whether the log fit model is derived for this kind (vs heuristic).
    model_exact = True

    def __init__(self, h: float | None, s: int | None):
        self.h = h
        self.s = s

    def evaluate(self, rho: DensityMatrix) -> float:
        raise NotImplementedError

    def natural_range(self) -> tuple[float, float]:
        """Hard bounds of the figure of merit over all states."""
        raise NotImplementedError

    def _kernel_payload(self) -> tuple[int, np.ndarray]:
        """(code, matrix) consumed by the compiled sampling kernel."""
        raise NotImplementedError

    def _kernel_transform(self, values: np.ndarray) -> np.ndarray:
        """Map raw kernel records to figure-of-merit values (default: identity)."""
        return values


class SquaredFidelityToPure(FigureOfMerit):
    """``f(rho) = <psi|rho|psi>``, the squared fidelity to a pure state."""

    kind = "fidelity2"

    def __init__(self, reference: PureState):
        super().__init__(h=1.0, s=-1)
        self.reference = reference

    def evaluate(self, rho: DensityMatrix) -> float:
        _check_dims(rho.dim, self.reference.dim)
        psi = self.reference.amplitudes
        return float(np.real(psi.conj() @ rho.entries @ psi))

    def natural_range(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def _kernel_payload(self) -> tuple[int, np.ndarray]:
        return KERNEL_OBSERVABLE, self.reference.projector().entries


class SquaredFidelityTo(FigureOfMerit):
    """Squared fidelity to an arbitrary (possibly mixed) reference state.

    No fit model exists for this kind; it is accepted for histogram-only
    analyses and warns at construction.
    """

    kind = "fidelity2-mixed"
    model_exact = False

    def __init__(self, reference: DensityMatrix):
        super().__init__(h=None, s=None)
        self.reference = reference
        warnings.warn(
            "squared fidelity to a mixed reference has no fit model; "
            "results are histogram-only",
            stacklevel=2,
        )

    def evaluate(self, rho: DensityMatrix) -> float:
        fid = root_fidelity(rho, self.reference)
        return fid * fid

    def natural_range(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def _kernel_payload(self) -> tuple[int, np.ndarray]:
        # The kernel records the purified distance; F^2 = 1 - P^2 maps back.
        return KERNEL_PURIFIED_DISTANCE, hermitian_root(self.reference.entries)

    def _kernel_transform(self, values: np.ndarray) -> np.ndarray:
        return 1.0 - values * values


class TraceDistanceTo(FigureOfMerit):
    """``f(rho) = 0.5 * ||rho - rho_ref||_1``."""

    kind = "trace-dist"

    def __init__(self, reference: DensityMatrix):
        super().__init__(h=0.0, s=+1)
        self.reference = reference

    def evaluate(self, rho: DensityMatrix) -> float:
        return trace_distance(rho, self.reference)

    def natural_range(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def _kernel_payload(self) -> tuple[int, np.ndarray]:
        return KERNEL_TRACE_DISTANCE, self.reference.entries


class PurifiedDistanceTo(FigureOfMerit):
    """``f(rho) = sqrt(1 - F^2(rho, rho_ref))``."""

    kind = "purified-dist"
    model_exact = False

    def __init__(self, reference: DensityMatrix):
        super().__init__(h=0.0, s=+1)
        self.reference = reference

    def evaluate(self, rho: DensityMatrix) -> float:
        return purified_distance(rho, self.reference)

    def natural_range(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def _kernel_payload(self) -> tuple[int, np.ndarray]:
        # The kernel wants the Hermitian root of the reference precomputed.
        return KERNEL_PURIFIED_DISTANCE, hermitian_root(self.reference.entries)


class ObservableExpectation(FigureOfMerit):
    """``f(rho) = tr(A rho)`` for a Hermitian observable ``A``.

    ``extremum`` is the extremal value of ``tr(A rho)`` near the region of
    interest and must be supplied by the caller for fitting; ``direction``
    says whether it is a maximum or a minimum.
    """

    kind = "observable"

    def __init__(
        self,
        matrix: np.ndarray,
        extremum: float | None = None,
        direction: str = "max",
    ):
        matrix = np.array(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"observable must be square, got shape {matrix.shape}")
        if not np.allclose(matrix, matrix.conj().T, rtol=0, atol=1e-12):
            raise ValueError("observable is not Hermitian")
        if direction not in ("max", "min"):
            raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
        sign = -1 if direction == "max" else +1
        super().__init__(
            h=None if extremum is None else float(extremum),
            s=None if extremum is None else sign,
        )
        matrix.setflags(write=False)
        self.matrix = matrix
        self.direction = direction

    def evaluate(self, rho: DensityMatrix) -> float:
        _check_dims(rho.dim, self.matrix.shape[0])
        return float(np.trace(self.matrix @ rho.entries).real)

    def natural_range(self) -> tuple[float, float]:
        eigvals = np.linalg.eigvalsh(self.matrix)
        return (float(eigvals[0]), float(eigvals[-1]))

    def eigenvalue_range(self) -> float:
        """Spread ``w = max eig - min eig``, used by confidence shifts."""
        lo, hi = self.natural_range()
        return hi - lo

    def _kernel_payload(self) -> tuple[int, np.ndarray]:
        return KERNEL_OBSERVABLE, self.matrix


def evaluate(fom: FigureOfMerit, rho: DensityMatrix) -> float:
    """Evaluate a figure of merit on a state."""
    return fom.evaluate(rho)


def model_variables(fom: FigureOfMerit) -> tuple[float, int]:
    """Fit-model variables ``(h, s)`` for a figure of merit.

    Raises when the kind has none (mixed-reference fidelity) or when an
    observable was built without its extremal value.
    """
    if fom.kind == "observable" and fom.h is None:
        raise ValueError(
            "observable figure of merit needs its extremal value for the fit model"
        )
    if fom.h is None or fom.s is None:
        raise ValueError(f"figure of merit {fom.kind!r} has no fit model")
    if not fom.model_exact:
        warnings.warn(
            f"fit model for {fom.kind!r} is heuristic; check the goodness of fit",
            stacklevel=2,
        )
    return fom.h, fom.s
