"""Measurement data: POVM effects, outcome counts, and synthetic experiments.

A tomography dataset is a flat list of distinct POVM effects ``E_k`` with the
number of times ``n_k`` each was observed.  Helpers build effective POVMs from
readout-calibration histograms, combine per-qubit effects into joint effects,
and simulate outcome counts from a known state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .statespace import DensityMatrix, _as_complex_matrix, _freeze

HERMITICITY_TOL = 1e-12
#: Effects may have eigenvalues in [-1e-10, 1 + 1e-10].
EFFECT_EIGENVALUE_SLACK = 1e-10
#: A POVM's effects must sum to the identity within this tolerance.
COMPLETENESS_TOL = 1e-9
#: Matrix entries are rounded to this many decimals when merging duplicates.
MERGE_DECIMALS = 12


@dataclass(frozen=True)
class PovmEffect:
    """One element of a POVM: Hermitian with spectrum in [0, 1]."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = _as_complex_matrix(self.matrix, self.dim)
        if not np.allclose(mat, mat.conj().T, rtol=0, atol=HERMITICITY_TOL):
            raise ValueError("POVM effect is not Hermitian within 1e-12")
        eigvals = np.linalg.eigvalsh(mat)
        if eigvals[0] < -EFFECT_EIGENVALUE_SLACK or eigvals[-1] > 1.0 + EFFECT_EIGENVALUE_SLACK:
            raise ValueError(
                f"POVM effect eigenvalues [{eigvals[0]:.3e}, {eigvals[-1]:.3e}] "
                "outside [0, 1]"
            )
        _freeze(self, "matrix", mat)


@dataclass(frozen=True)
class TomographyDataset:
    """Distinct POVM effects with their observed counts.

    ``total`` may declare the expected total count; it is checked against
    ``sum(counts)`` when given.  ``effect_stack`` is a read-only ``(K, d, d)``
    view of all effect matrices for vectorized probability evaluation.
    """

    dim: int
    effects: tuple
    counts: np.ndarray
    total: int | None = None
    effect_stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise ValueError("dataset needs at least one effect")
        for idx, effect in enumerate(effects):
            if not isinstance(effect, PovmEffect):
                raise TypeError(f"effects[{idx}] is not a PovmEffect")
            if effect.dim != self.dim:
                raise ValueError(
                    f"effects[{idx}] has dimension {effect.dim}, dataset declares {self.dim}"
                )
        counts = np.array(self.counts)
        if counts.shape != (len(effects),):
            raise ValueError(
                f"counts length {counts.shape} does not match {len(effects)} effects"
            )
        if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("counts must be non-negative integers")
        if not np.any(counts > 0):
            raise ValueError("at least one count must be positive")
        if self.total is not None and int(counts.sum()) != int(self.total):
            raise ValueError(
                f"declared total {self.total} does not match sum of counts {counts.sum()}"
            )
        object.__setattr__(self, "effects", effects)
        _freeze(self, "counts", counts.astype(np.int64))
        stack = np.stack([e.matrix for e in effects])
        _freeze(self, "effect_stack", stack)

    @property
    def n_total(self) -> int:
        """Total number of recorded outcomes."""
        return int(self.counts.sum())


@dataclass(frozen=True)
class CalibrationReadout:
    """Binned single-qubit readout calibration plus measurement-basis rotations.

    ``q0[k]`` (``q1[k]``) is the probability that a trusted preparation of
    ``|0>`` (``|1>``) produces a readout value in bin ``k``.  Each unitary in
    ``basis_rotations`` maps one measurement basis onto the computational
    basis.
    """

    bins: int
    q0: np.ndarray
    q1: np.ndarray
    basis_rotations: tuple

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("number of bins must be positive")
        q0 = np.array(self.q0, dtype=float)
        q1 = np.array(self.q1, dtype=float)
        if q0.shape != (self.bins,) or q1.shape != (self.bins,):
            raise ValueError(
                f"q0/q1 must both have length {self.bins}, got {q0.shape} and {q1.shape}"
            )
        for name, vec in (("q0", q0), ("q1", q1)):
            if np.any(vec < 0):
                raise ValueError(f"{name} has negative entries")
            if abs(vec.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} sums to {vec.sum()!r}, not 1")
        rotations = tuple(np.array(u, dtype=complex) for u in self.basis_rotations)
        for idx, u in enumerate(rotations):
            if u.shape != (2, 2):
                raise ValueError(f"basis_rotations[{idx}] is not 2x2")
            if not np.allclose(u.conj().T @ u, np.eye(2), rtol=0, atol=1e-10):
                raise ValueError(f"basis_rotations[{idx}] is not unitary within 1e-10")
        for u in rotations:
            u.setflags(write=False)
        _freeze(self, "q0", q0)
        _freeze(self, "q1", q1)
        object.__setattr__(self, "basis_rotations", rotations)


def build_effective_povm(cal: CalibrationReadout, setting: int) -> list[PovmEffect]:
    """Effective POVM for one measurement setting of a calibrated readout.

    The effect for readout bin ``k`` is ``U^dag diag(q0[k], q1[k]) U`` with
    ``U`` the setting's basis rotation; the ``bins`` effects sum to the
    identity because ``q0`` and ``q1`` are normalized.
    """
    u = cal.basis_rotations[setting]
    effects = []
    for k in range(cal.bins):
        diag = np.diag([cal.q0[k], cal.q1[k]]).astype(complex)
        effects.append(PovmEffect(2, u.conj().T @ diag @ u))
    return effects


def tensor_effects(a: PovmEffect, b: PovmEffect) -> PovmEffect:
    """Joint effect of independent measurements: the Kronecker product."""
    return PovmEffect(a.dim * b.dim, np.kron(a.matrix, b.matrix))


def merge_duplicate_effects(matrices, counts):
    """Merge identical effects, summing their counts.

    Matrices are compared after rounding entries to ``MERGE_DECIMALS``
    decimals, which keeps the list of effects distinct as the likelihood
    product requires.  First-occurrence order is preserved.
    """
    merged_mats: list[np.ndarray] = []
    merged_counts: list[int] = []
    index_by_key: dict[bytes, int] = {}
    for mat, count in zip(matrices, counts):
        mat = np.asarray(mat, dtype=complex)
        key = np.round(mat, MERGE_DECIMALS).tobytes()
        pos = index_by_key.get(key)
        if pos is None:
            index_by_key[key] = len(merged_mats)
            merged_mats.append(mat)
            merged_counts.append(int(count))
        else:
            merged_counts[pos] += int(count)
    return merged_mats, merged_counts


def _check_povm(effects: list[PovmEffect], dim: int, label: str) -> None:
    total = sum(e.matrix for e in effects)
    if not np.allclose(total, np.eye(dim), rtol=0, atol=COMPLETENESS_TOL):
        raise ValueError(f"{label}: effects do not sum to the identity within 1e-9")


def simulate_dataset(
    rho_true: DensityMatrix,
    settings: list[list[PovmEffect]],
    shots_per_setting: int,
    rng,
) -> TomographyDataset:
    """Draw multinomial outcome counts for each measurement setting.

    Each setting must be a complete POVM on ``rho_true``'s space.  Outcomes
    within a setting follow the multinomial with probabilities
    ``tr(E_k rho_true)``; counts for effects appearing in several settings
    are merged.  With a fixed seed the result is bit-reproducible.
    """
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be positive")
    rng = np.random.default_rng(rng)
    dim = rho_true.dim
    all_mats: list[np.ndarray] = []
    all_counts: list[int] = []
    for idx, setting in enumerate(settings):
        _check_povm(setting, dim, f"settings[{idx}]")
        probs = np.array(
            [np.trace(e.matrix @ rho_true.entries).real for e in setting]
        )
        if np.any(probs < -1e-12):
            raise ValueError(
                f"settings[{idx}]: negative outcome probability {probs.min():.3e}"
            )
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        drawn = rng.multinomial(shots_per_setting, probs)
        all_mats.extend(e.matrix for e in setting)
        all_counts.extend(int(c) for c in drawn)
    mats, counts = merge_duplicate_effects(all_mats, all_counts)
    effects = tuple(PovmEffect(dim, m) for m in mats)
    return TomographyDataset(
        dim,
        effects,
        np.array(counts, dtype=np.int64),
        total=len(settings) * shots_per_setting,
    )


_PAULI_PROJECTORS = {
    "X": (
        np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex),
        np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex),
    ),
    "Y": (
        np.array([[0.5, -0.5j], [0.5j, 0.5]], dtype=complex),
        np.array([[0.5, 0.5j], [-0.5j, 0.5]], dtype=complex),
    ),
    "Z": (
        np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex),
        np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex),
    ),
}


def standard_pauli_settings(num_qubits: int) -> list[list[PovmEffect]]:
    """Projective Pauli measurement settings on ``num_qubits`` qubits.

    Returns ``3**num_qubits`` settings; each measures one tensor product of
    single-qubit Pauli bases and has ``2**num_qubits`` projective effects.
    """
    if num_qubits < 1:
        raise ValueError("num_qubits must be at least 1")
    dim = 2**num_qubits
    settings = []
    for axes in itertools.product("XYZ", repeat=num_qubits):
        effects = []
        for outcomes in itertools.product((0, 1), repeat=num_qubits):
            mat = np.array([[1.0]], dtype=complex)
            for axis, outcome in zip(axes, outcomes):
                mat = np.kron(mat, _PAULI_PROJECTORS[axis][outcome])
            effects.append(PovmEffect(dim, mat))
        settings.append(effects)
    return settings
