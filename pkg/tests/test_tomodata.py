import numpy as np
import pytest

from qerrbars import (
    CalibrationReadout,
    DensityMatrix,
    PovmEffect,
    TomographyDataset,
    build_effective_povm,
    merge_duplicate_effects,
    simulate_dataset,
    standard_pauli_settings,
    tensor_effects,
)

Z0 = np.diag([1.0, 0.0]).astype(complex)
Z1 = np.diag([0.0, 1.0]).astype(complex)


class TestEffectiveReadoutPovm:
    def test_noiseless_readout_gives_projectors(self):
        cal = CalibrationReadout(2, [1.0, 0.0], [0.0, 1.0], (np.eye(2),))
        effects = build_effective_povm(cal, 0)
        assert np.allclose(effects[0].matrix, Z0)
        assert np.allclose(effects[1].matrix, Z1)

    def test_noisy_bins(self):
        cal = CalibrationReadout(2, [0.9, 0.1], [0.2, 0.8], (np.eye(2),))
        effects = build_effective_povm(cal, 0)
        assert np.allclose(effects[0].matrix, np.diag([0.9, 0.2]))
        assert np.allclose(effects[1].matrix, np.diag([0.1, 0.8]))

    def test_completeness_for_any_input(self):
        rng = np.random.default_rng(0)
        q0 = rng.dirichlet(np.ones(20))
        q1 = rng.dirichlet(np.ones(20))
        hadamard = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        cal = CalibrationReadout(20, q0, q1, (hadamard,))
        total = sum(e.matrix for e in build_effective_povm(cal, 0))
        assert np.allclose(total, np.eye(2), atol=1e-9)

    def test_rejects_mismatched_bin_lengths(self):
        with pytest.raises(ValueError, match="length"):
            CalibrationReadout(2, [1.0, 0.0], [0.0, 0.5, 0.5], (np.eye(2),))

    def test_rejects_non_unitary_rotation(self):
        with pytest.raises(ValueError, match="unitary"):
            CalibrationReadout(2, [1.0, 0.0], [0.0, 1.0], (np.diag([1.0, 2.0]),))


class TestTensorEffects:
    def test_identity_tensor_identity(self):
        eye = PovmEffect(2, np.eye(2, dtype=complex))
        assert np.allclose(tensor_effects(eye, eye).matrix, np.eye(4))

    def test_projector_tensor(self):
        joint = tensor_effects(PovmEffect(2, Z0), PovmEffect(2, Z1))
        expected = np.zeros((4, 4))
        expected[1, 1] = 1.0  # |01><01|
        assert np.allclose(joint.matrix, expected)

    def test_diagonal_kronecker(self):
        a = PovmEffect(2, np.diag([0.9, 0.2]).astype(complex))
        b = PovmEffect(2, np.diag([0.5, 0.5]).astype(complex))
        assert np.allclose(
            tensor_effects(a, b).matrix, np.diag([0.45, 0.45, 0.1, 0.1])
        )


class TestSimulateDataset:
    def test_pure_state_z_basis_all_counts_on_zero(self):
        rho = DensityMatrix(2, Z0)
        setting = [PovmEffect(2, Z0), PovmEffect(2, Z1)]
        data = simulate_dataset(rho, [setting], 1000, np.random.default_rng(0))
        counts = {
            np.round(e.matrix, 12).tobytes(): c
            for e, c in zip(data.effects, data.counts)
        }
        assert counts[np.round(Z0, 12).tobytes()] == 1000

    def test_two_qubit_pauli_total(self):
        rho = DensityMatrix(4, np.eye(4) / 4)
        data = simulate_dataset(
            rho, standard_pauli_settings(2), 500, np.random.default_rng(1)
        )
        assert data.n_total == 4500
        assert data.total == 4500

    def test_frequencies_converge(self):
        rho = DensityMatrix(2, np.eye(2) / 2)
        setting = [PovmEffect(2, Z0), PovmEffect(2, Z1)]
        shots = 100_000
        data = simulate_dataset(rho, [setting], shots, np.random.default_rng(2))
        freqs = data.counts / shots
        assert np.all(np.abs(freqs - 0.5) < 3 * 0.5 / np.sqrt(shots))

    def test_max_deviation_bound_on_informative_state(self):
        rng = np.random.default_rng(3)
        rho = DensityMatrix(2, np.array([[0.7, 0.2 + 0.1j], [0.2 - 0.1j, 0.3]]))
        shots = 100_000
        data = simulate_dataset(rho, standard_pauli_settings(1), shots, rng)
        probs = np.einsum("kij,ji->k", data.effect_stack, rho.entries).real
        setting_shots = shots  # each effect belongs to exactly one setting here
        freqs = data.counts / setting_shots
        assert np.max(np.abs(freqs - probs)) < 5 / np.sqrt(shots)

    def test_fixed_seed_reproducible(self):
        rho = DensityMatrix(4, np.eye(4) / 4)
        settings = standard_pauli_settings(2)
        a = simulate_dataset(rho, settings, 100, np.random.default_rng(7))
        b = simulate_dataset(rho, settings, 100, np.random.default_rng(7))
        assert np.array_equal(a.counts, b.counts)

    def test_rejects_incomplete_setting(self):
        rho = DensityMatrix(2, np.eye(2) / 2)
        with pytest.raises(ValueError, match="identity"):
            simulate_dataset(rho, [[PovmEffect(2, Z0)]], 10, np.random.default_rng(0))


class TestPauliSettings:
    def test_single_qubit_shape(self):
        settings = standard_pauli_settings(1)
        assert len(settings) == 3
        assert all(len(s) == 2 for s in settings)

    def test_two_qubit_shape(self):
        settings = standard_pauli_settings(2)
        assert len(settings) == 9
        assert all(len(s) == 4 for s in settings)

    def test_each_setting_is_complete(self):
        for setting in standard_pauli_settings(2):
            total = sum(e.matrix for e in setting)
            assert np.allclose(total, np.eye(4), atol=1e-12)


class TestMergeAndValidation:
    def test_merge_sums_counts(self):
        mats, counts = merge_duplicate_effects([Z0, Z1, Z0.copy()], [3, 4, 5])
        assert len(mats) == 2
        assert counts == [8, 4]

    def test_dataset_requires_positive_count(self):
        with pytest.raises(ValueError, match="positive"):
            TomographyDataset(
                2, (PovmEffect(2, Z0), PovmEffect(2, Z1)), np.array([0, 0])
            )

    def test_dataset_checks_declared_total(self):
        with pytest.raises(ValueError, match="total"):
            TomographyDataset(2, (PovmEffect(2, Z0),), np.array([3]), total=4)

    def test_dataset_checks_effect_dimension(self):
        with pytest.raises(ValueError, match="dimension"):
            TomographyDataset(4, (PovmEffect(2, Z0),), np.array([3]))

    def test_effect_rejects_eigenvalue_above_one(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            PovmEffect(2, np.diag([1.5, 0.0]).astype(complex))
