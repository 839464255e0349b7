import numpy as np
import pytest

from qerrbars import (
    DensityMatrix,
    PureState,
    StatePoint,
    coords_from_matrix,
    matrix_from_coords,
    point_from_rho,
    random_point,
    rho_from_point,
)


def point_from_t(t_mat):
    return StatePoint(t_mat.shape[0], coords_from_matrix(t_mat))


class TestRhoFromPoint:
    def test_projector_case(self):
        rho = rho_from_point(point_from_t(np.diag([1.0, 0.0]).astype(complex)))
        assert np.allclose(rho.entries, np.diag([1.0, 0.0]))

    def test_maximally_mixed(self):
        rho = rho_from_point(point_from_t(np.eye(2, dtype=complex) / np.sqrt(2)))
        assert np.allclose(rho.entries, np.eye(2) / 2)

    def test_diagonal_square_roots(self):
        t_mat = np.diag([np.sqrt(0.8), np.sqrt(0.2)]).astype(complex)
        rho = rho_from_point(point_from_t(t_mat))
        assert np.allclose(rho.entries, np.diag([0.8, 0.2]))

    def test_rejects_bad_coords_length(self):
        with pytest.raises(ValueError, match="2\\*dim\\*\\*2"):
            StatePoint(2, np.ones(7) / np.sqrt(7))

    def test_output_invariants_on_random_points(self):
        rng = np.random.default_rng(0)
        for dim in (2, 3, 4):
            for _ in range(20):
                rho = rho_from_point(random_point(dim, rng))
                assert abs(rho.entries.trace().real - 1.0) < 1e-12
                assert np.linalg.eigvalsh(rho.entries)[0] >= -1e-10

    def test_coordinate_order_is_column_major_re_then_im(self):
        t_mat = np.array([[0.1, 0.2 + 0.3j], [0.4j, 0.5]], dtype=complex)
        t_mat /= np.sqrt(np.sum(np.abs(t_mat) ** 2))
        coords = coords_from_matrix(t_mat)
        assert coords[0] == t_mat[0, 0].real
        assert coords[1] == t_mat[1, 0].real  # column-major: (1,0) before (0,1)
        assert coords[4] == t_mat[0, 0].imag
        assert np.allclose(matrix_from_coords(coords, 2), t_mat)


class TestPointFromRho:
    def test_projector(self):
        point = point_from_rho(DensityMatrix(2, np.diag([1.0, 0.0]).astype(complex)))
        assert np.allclose(matrix_from_coords(point.coords, 2), np.diag([1.0, 0.0]))

    def test_maximally_mixed(self):
        point = point_from_rho(DensityMatrix(2, np.eye(2) / 2))
        assert np.allclose(matrix_from_coords(point.coords, 2), np.eye(2) / np.sqrt(2))

    def test_diagonal_roots(self):
        # Hermitian root of diag(0.64, 0.36) is diag(0.8, 0.6).
        point = point_from_rho(DensityMatrix(2, np.diag([0.64, 0.36]).astype(complex)))
        assert np.allclose(matrix_from_coords(point.coords, 2), np.diag([0.8, 0.6]))

    def test_round_trip_on_random_states(self):
        rng = np.random.default_rng(1)
        for dim in (2, 3, 4):
            for _ in range(20):
                rho = rho_from_point(random_point(dim, rng))
                back = rho_from_point(point_from_rho(rho))
                assert np.max(np.abs(back.entries - rho.entries)) < 1e-10

    def test_rejects_non_state(self):
        bad = np.diag([1.1, -0.1]).astype(complex)
        with pytest.raises(ValueError, match="not a state"):
            point_from_rho(bad)


class TestRandomPoint:
    def test_unit_norm(self):
        rng = np.random.default_rng(2)
        for dim in (2, 3, 5):
            point = random_point(dim, rng)
            assert abs(np.linalg.norm(point.coords) - 1.0) < 1e-12

    def test_fixed_seed_is_deterministic(self):
        a = random_point(3, np.random.default_rng(123))
        b = random_point(3, np.random.default_rng(123))
        assert np.array_equal(a.coords, b.coords)

    def test_rejects_dim_one(self):
        with pytest.raises(ValueError):
            random_point(1, np.random.default_rng(0))

    def test_qubit_purity_moment(self):
        # For d=2 the induced measure is uniform on the Bloch ball, where
        # E[tr rho^2] = (1 + E[r^2])/2 = (1 + 3/5)/2 = 0.8.
        rng = np.random.default_rng(3)
        n = 100_000
        purities = np.empty(n)
        for i in range(n):
            rho = rho_from_point(random_point(2, rng))
            purities[i] = np.trace(rho.entries @ rho.entries).real
        mean = purities.mean()
        se = purities.std(ddof=1) / np.sqrt(n)

        # Independent oracle: rejection-sample the uniform Bloch ball.
        oracle_rng = np.random.default_rng(4)
        pts = oracle_rng.uniform(-1, 1, size=(3 * n, 3))
        radii_sq = np.sum(pts**2, axis=1)
        radii_sq = radii_sq[radii_sq <= 1.0][:n]
        oracle = (1.0 + radii_sq) / 2.0
        oracle_se = oracle.std(ddof=1) / np.sqrt(len(oracle))

        assert abs(mean - 0.8) < 3 * se
        assert abs(mean - oracle.mean()) < 3 * np.hypot(se, oracle_se)


class TestTypes:
    def test_density_matrix_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(2, np.array([[0.5, 0.1], [0.2, 0.5]], dtype=complex))

    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(2, np.diag([0.8, 0.8]).astype(complex))

    def test_density_matrix_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            DensityMatrix(2, np.diag([1.2, -0.2]).astype(complex))

    def test_pure_state_norm(self):
        with pytest.raises(ValueError, match="norm"):
            PureState(2, np.array([1.0, 1.0]))

    def test_entries_are_read_only(self):
        rho = DensityMatrix(2, np.eye(2) / 2)
        with pytest.raises(ValueError):
            rho.entries[0, 0] = 0.7
