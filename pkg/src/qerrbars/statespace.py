"""Quantum states and their purification-hypersphere coordinates.

A density matrix ``rho`` of dimension ``d`` is represented for sampling
purposes by a square complex matrix ``T`` with ``rho = T T^dag`` and
``tr(T T^dag) = 1``.  Stacking the real and imaginary parts of ``T`` into a
real vector of length ``2*d**2`` turns the normalization constraint into a
unit-norm constraint, so the set of all states is the image of the unit
hypersphere in ``2*d**2`` real dimensions.  Uniform sampling on that
hypersphere induces the Hilbert-Schmidt distribution on density matrices.

Coordinate order (fixed; serialized walks rely on it):
``coords = [Re(T) column-major, Im(T) column-major]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Tolerance for Hermiticity and unit-trace checks of density matrices.
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
#: Eigenvalues of a density matrix may dip this far below zero; the slack
#: tolerates round-off accumulated over ~1e6 double-precision matrix products.
EIGENVALUE_SLACK = 1e-10
#: Unit-norm tolerance for hypersphere coordinates and pure-state amplitudes.
NORM_TOL = 1e-12


def _as_complex_matrix(entries, dim: int) -> np.ndarray:
    mat = np.array(entries, dtype=complex)
    if mat.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {mat.shape}")
    return mat


def _freeze(obj, field: str, value: np.ndarray) -> None:
    value.setflags(write=False)
    object.__setattr__(obj, field, value)


@dataclass(frozen=True)
class DensityMatrix:
    """A ``d x d`` Hermitian, positive semidefinite, unit-trace matrix.

    Construction validates all three invariants (Hermiticity and trace to
    1e-12, eigenvalues above ``-EIGENVALUE_SLACK``) and freezes the entries,
    so instances are safe to share across threads.
    """

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be a positive integer")
        mat = _as_complex_matrix(self.entries, self.dim)
        if not np.allclose(mat, mat.conj().T, rtol=0, atol=HERMITICITY_TOL):
            raise ValueError("density matrix is not Hermitian within 1e-12")
        trace = mat.trace().real
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {trace!r}, not 1")
        lowest = np.linalg.eigvalsh(mat)[0]
        if lowest < -EIGENVALUE_SLACK:
            raise ValueError(
                f"density matrix has eigenvalue {lowest:.3e} below -{EIGENVALUE_SLACK:.0e}"
            )
        _freeze(self, "entries", mat)


@dataclass(frozen=True)
class StatePoint:
    """A point on the unit hypersphere of purification coordinates.

    ``coords`` holds the real parts of ``T`` in column-major order followed
    by the imaginary parts of ``T`` in column-major order, ``2*dim**2``
    numbers in total, normalized to Euclidean norm 1 (tr ``T T^dag`` = 1).
    """

    dim: int
    coords: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be a positive integer")
        coords = np.array(self.coords, dtype=float)
        expected = 2 * self.dim * self.dim
        if coords.shape != (expected,):
            raise ValueError(
                f"coords must have length {expected} (= 2*dim**2), got shape {coords.shape}"
            )
        norm = np.linalg.norm(coords)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"coords norm is {norm!r}, not 1")
        _freeze(self, "coords", coords)


@dataclass(frozen=True)
class PureState:
    """A unit-norm complex state vector of length ``dim``."""

    dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be a positive integer")
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.shape != (self.dim,):
            raise ValueError(f"amplitudes must have length {self.dim}, got {amp.shape}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitude norm is {norm!r}, not 1")
        _freeze(self, "amplitudes", amp)

    def projector(self) -> DensityMatrix:
        """Rank-one density matrix |psi><psi|."""
        return DensityMatrix(self.dim, np.outer(self.amplitudes, self.amplitudes.conj()))


def matrix_from_coords(coords: np.ndarray, dim: int) -> np.ndarray:
    """Rebuild the complex matrix ``T`` from hypersphere coordinates."""
    coords = np.asarray(coords, dtype=float)
    half = dim * dim
    re = coords[:half].reshape((dim, dim), order="F")
    im = coords[half:].reshape((dim, dim), order="F")
    return re + 1j * im


def coords_from_matrix(t_mat: np.ndarray) -> np.ndarray:
    """Flatten a complex matrix ``T`` into the documented coordinate order."""
    t_mat = np.asarray(t_mat, dtype=complex)
    return np.concatenate(
        [t_mat.real.flatten(order="F"), t_mat.imag.flatten(order="F")]
    )


def rho_from_point(point: StatePoint) -> DensityMatrix:
    """Map a hypersphere point to its density matrix ``T T^dag``."""
    t_mat = matrix_from_coords(point.coords, point.dim)
    rho = t_mat @ t_mat.conj().T
    # T T^dag is Hermitian PSD by construction; symmetrize away round-off.
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(point.dim, rho)


def point_from_rho(rho: DensityMatrix | np.ndarray) -> StatePoint:
    """Map a density matrix to hypersphere coordinates via its Hermitian root.

    The Hermitian (principal) square root is the canonical choice among the
    many ``T`` with ``T T^dag = rho``.  Raw arrays are accepted so that
    externally produced matrices can be converted; an eigenvalue below
    ``-1e-8`` is rejected as not being a state.
    """
    if isinstance(rho, DensityMatrix):
        dim, mat = rho.dim, rho.entries
    else:
        mat = np.asarray(rho, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        dim = mat.shape[0]
    eigvals, eigvecs = np.linalg.eigh(mat)
    if eigvals[0] < -1e-8:
        raise ValueError(f"matrix has eigenvalue {eigvals[0]:.3e}; not a state")
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.conj().T
    coords = coords_from_matrix(root)
    # Clipping tiny negative eigenvalues can leave the norm off by ~1e-9.
    coords /= np.linalg.norm(coords)
    return StatePoint(dim, coords)


def random_point(dim: int, rng) -> StatePoint:
    """Draw a uniformly random hypersphere point (Hilbert-Schmidt state).

    Parameters
    ----------
    dim : int
        Hilbert space dimension, at least 2.
    rng : numpy.random.Generator or int
        Random source or a seed for one.
    """
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    rng = np.random.default_rng(rng)
    size = 2 * dim * dim
    coords = rng.standard_normal(size)
    norm = np.linalg.norm(coords)
    while norm == 0.0:
        coords = rng.standard_normal(size)
        norm = np.linalg.norm(coords)
    return StatePoint(dim, coords / norm)
