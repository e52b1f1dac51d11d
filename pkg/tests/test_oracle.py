import numpy as np
import pytest

from lfbp.errors import NumericalError
from lfbp.oracle import (DenseOperator, MomentModel, empirical_moments,
                         error_decomposition, fit_dense_operator, gaussian_w2,
                         materialize, solve_optimal_B, solve_optimal_B_model,
                         spectral_factors, stability_probe)
from lfbp.projector import back_project, forward_project

from conftest import rng_stack, rng_volume


def random_operator(m, n, seed):
    return np.random.default_rng(seed).standard_normal((m, n)) / np.sqrt(n)


class TestMaterialize:
    @pytest.mark.parametrize("kind", ["parallel2d", "fan2d", "laminography3d"])
    def test_matches_projector(self, kind, tiny_geoms):
        g = tiny_geoms[kind]
        a = materialize(g).matrix
        x = rng_volume(g, 1)
        y = rng_stack(g, 2)
        assert np.abs(a @ x.reshape(-1) - forward_project(g, x).reshape(-1)).max() <= 1e-10
        assert np.abs(a.T @ y.reshape(-1) - back_project(g, y).reshape(-1)).max() <= 1e-10

    def test_no_zero_columns_inside_fov(self, tiny_geoms):
        # every voxel of these instances is crossed by at least one ray
        g = tiny_geoms["fan2d"]
        a = materialize(g).matrix
        assert np.abs(a).sum(axis=0).min() > 0.0

    def test_size_guard(self):
        from lfbp.geometry import make_geometry
        g = make_geometry("parallel2d", n_angles=300, det_shape=64, det_pixel_size=0.1,
                          vol_shape=(64, 64), vol_voxel_size=0.1)
        with pytest.raises(ValueError):
            materialize(g)

    def test_row_rank_guard(self):
        with pytest.raises(ValueError):
            DenseOperator(matrix=np.ones((4, 8)), geometry=None)


class TestSolveOptimalB:
    def test_pseudo_inverse_limit(self):
        a = random_operator(16, 32, 0)
        b = solve_optimal_B_model(a, MomentModel(np.eye(32), 0.0), 0.0)
        ref = np.linalg.inv(a @ a.T)
        assert np.linalg.norm(b - ref) / np.linalg.norm(ref) <= 1e-8

    @pytest.mark.parametrize("sigma,lam", [(0.0, 0.1), (0.1, 0.0), (0.1, 1.0), (1.0, 1.0)])
    def test_spectral_diagonalization(self, sigma, lam):
        a = random_operator(16, 32, 1)
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        b = solve_optimal_B_model(a, MomentModel(np.eye(32), sigma**2), lam)
        h = u.T @ b @ u
        expect = s**2 / ((s**2 + sigma**2) * s**2 + lam)
        assert np.abs(np.diag(h) - expect).max() <= 1e-8
        assert np.abs(h - np.diag(np.diag(h))).max() <= 1e-8

    def test_huge_lambda_shrinks(self):
        a = random_operator(16, 32, 2)
        b = solve_optimal_B_model(a, MomentModel(np.eye(32), 0.0), 1e12)
        assert np.linalg.norm(b) <= 1e-6

    def test_singular_system_rejected(self):
        a = random_operator(6, 10, 3)
        xs = [np.random.default_rng(0).standard_normal(10)]
        ys = [a @ xs[0]]
        syy, sxy = empirical_moments(xs, ys)  # rank-1 moments
        with pytest.raises(NumericalError):
            solve_optimal_B(a, syy, sxy, 0.0)

    def test_residual_bound_holds(self):
        a = random_operator(12, 20, 4)
        model = MomentModel(np.eye(20), 0.04)
        syy, sxy = model.second_moments(a)
        b = solve_optimal_B(a, syy, sxy, 0.3)
        resid = np.linalg.norm(a @ a.T @ b @ syy + 0.3 * b - a @ sxy)
        assert resid <= 1e-8 * np.linalg.norm(a @ sxy)


class TestEmpiricalMoments:
    def test_single_basis_vector(self):
        y = np.zeros(5)
        y[1] = 1.0
        syy, sxy = empirical_moments([np.zeros(3)], [y])
        expect = np.zeros((5, 5))
        expect[1, 1] = 1.0
        assert np.array_equal(syy, expect)
        assert np.array_equal(sxy, np.zeros((3, 5)))

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        ys = [rng.standard_normal(6) for _ in range(4)]
        syy, _ = empirical_moments([rng.standard_normal(3) for _ in range(4)], ys)
        assert np.array_equal(syy, syy.T)

    def test_large_k_convergence(self):
        a = random_operator(8, 12, 6)
        rng = np.random.default_rng(7)
        k = 5000
        xs = [rng.standard_normal(12) for _ in range(k)]
        ys = [a @ x + 0.2 * rng.standard_normal(8) for x in xs]
        syy, sxy = empirical_moments(xs, ys)
        syy_true = a @ a.T + 0.04 * np.eye(8)
        sxy_true = a.T
        assert np.abs(syy - syy_true).max() <= 0.05 * np.abs(syy_true).max()
        assert np.abs(sxy - sxy_true).max() <= 0.05 * np.abs(sxy_true).max()

    def test_accepts_dataset(self, tiny_geoms):
        from lfbp.phantom import PhantomSpec, make_dataset
        g = tiny_geoms["fan2d"]
        spec = PhantomSpec(shape=g.vol_shape, n_circles=(1, 2), radius_range=(0.1, 0.3))
        ds = make_dataset(g, spec, k=3, snr_db=20.0, seed=1)
        syy, sxy = empirical_moments(ds)
        assert syy.shape == (g.n_rays, g.n_rays)
        assert sxy.shape == (g.n_voxels, g.n_rays)


class TestSpectralFactors:
    def test_noiseless_unregularized(self):
        a = random_operator(8, 12, 8)
        sf = spectral_factors(a, 0.0, 0.0)
        assert np.allclose(sf.gain, 1.0 / sf.singular_values**2)
        assert np.all(sf.bias_factor == 0.0)

    def test_unit_plugin(self):
        a = np.eye(3)
        sf = spectral_factors(a, 1.0, 1.0)
        assert np.allclose(sf.gain, 1.0 / 3.0)
        assert np.allclose(sf.variance_factor, 1.0 / 3.0)
        assert np.allclose(sf.bias_factor, 2.0 / 3.0)

    def test_bias_factor_saturates_for_tiny_modes(self):
        a = np.diag([1.0, 1e-4, 1e-6])
        sf = spectral_factors(a, 0.0, 0.5)
        assert sf.bias_factor[-1] > 0.999
        assert sf.bias_factor[0] < 0.5


class TestErrorDecomposition:
    def test_exact_pseudo_inverse(self):
        a = random_operator(8, 12, 9)
        model = MomentModel(np.eye(12), 0.0)
        b = np.linalg.inv(a @ a.T)
        d = error_decomposition(a, b, model)
        assert d.variance == 0.0
        assert abs(d.bias) <= 1e-10
        assert abs(d.total - d.nullspace) <= 1e-8 * d.total

    def test_full_column_rank_no_nullspace(self):
        a = np.random.default_rng(10).standard_normal((5, 5))
        model = MomentModel(np.eye(5), 0.01)
        b = solve_optimal_B_model(a, model, 0.05)
        d = error_decomposition(a, b, model)
        assert abs(d.nullspace) <= 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_pythagorean_identity(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((8, 12))
        model = MomentModel(np.eye(12), 0.01)
        b = solve_optimal_B_model(a, model, 0.05)
        d = error_decomposition(a, b, model)
        assert abs(d.total - (d.variance + d.bias + d.nullspace)) <= 1e-8 * d.total


class TestStability:
    def setup_method(self):
        self.a = random_operator(12, 20, 11)
        self.pi = MomentModel(np.eye(20), 0.01)
        rng = np.random.default_rng(12)
        e = rng.standard_normal((20, 20))
        self.pert = (e @ e.T) / 20.0
        self.pi2 = MomentModel(np.eye(20) + 0.3 * self.pert, 0.02)

    def test_identical_distributions(self):
        tab = stability_probe(self.a, self.pi, self.pi, [0.1, 1.0, 10.0])
        assert np.all(tab.gaps <= 1e-10)

    def test_gap_non_increasing_in_lambda(self):
        tab = stability_probe(self.a, self.pi, self.pi2, [0.1, 1.0, 10.0])
        assert np.all(np.diff(tab.gaps) <= 0.05 * tab.gaps[:-1])
        assert tab.w2 > 0.0

    def test_larger_perturbation_larger_gap(self):
        pi_double = MomentModel(np.eye(20) + 0.6 * self.pert, 0.03)
        t1 = stability_probe(self.a, self.pi, self.pi2, [1.0])
        t2 = stability_probe(self.a, self.pi, pi_double, [1.0])
        assert gaussian_w2(self.a, self.pi, pi_double) > gaussian_w2(self.a, self.pi, self.pi2)
        assert t2.gaps[0] >= t1.gaps[0]

    def test_swap_symmetric(self):
        t1 = stability_probe(self.a, self.pi, self.pi2, [0.5])
        t2 = stability_probe(self.a, self.pi2, self.pi, [0.5])
        assert t1.gaps[0] == pytest.approx(t2.gaps[0], rel=1e-12)
        assert t1.w2 == pytest.approx(t2.w2, rel=1e-6)


class TestFitDenseOperator:
    def test_converges_to_direct_solve(self):
        a = random_operator(8, 12, 13)
        rng = np.random.default_rng(14)
        xs = [rng.standard_normal(12) for _ in range(64)]
        ys = [a @ x + 0.2 * rng.standard_normal(8) for x in xs]
        syy, sxy = empirical_moments(xs, ys)
        b_star = solve_optimal_B(a, syy, sxy, 0.1)
        b_fit = fit_dense_operator(a, xs, ys, 0.1, n_iters=4000)
        assert np.linalg.norm(b_fit - b_star) / np.linalg.norm(b_star) <= 1e-3
