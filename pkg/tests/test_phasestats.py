"""Phase-space estimator and moment-identity tests against analytic oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from sedsim.ensemble import calibrate_beta
from sedsim.grids import BoundaryDecayError
from sedsim.params import Potential, default_params
from sedsim.phasestats import (
    GridCoverageError,
    avg_momentum_fluctuation,
    characteristic_fn,
    conjugate_z_grid,
    density_from_grid,
    dispersion_identity_residual,
    estimate_density,
    hierarchy_residuals,
    local_moments,
    marginal_rho,
    moments_from_characteristic,
    total_variance_split,
)
from sedsim.phasestats import LocalMoments


def gauss2d(x, p, sx=1.0, sp=1.0, mx=0.0, mp=0.0, corr=0.0):
    xx, pp = np.meshgrid(x, p, indexing="ij")
    det = (sx * sp) ** 2 * (1.0 - corr**2)
    zx = (xx - mx) / sx
    zp = (pp - mp) / sp
    q = (zx**2 - 2.0 * corr * zx * zp + zp**2) / (1.0 - corr**2)
    return np.exp(-0.5 * q) / (2.0 * np.pi * np.sqrt(det))


class TestEstimateDensity:
    def test_histogram_matches_analytic_gaussian(self):
        rng = np.random.default_rng(7)
        n = 1_000_000
        xs = rng.standard_normal(n)
        ps = rng.standard_normal(n)
        grid = np.linspace(-4.5, 4.5, 41)
        dens = estimate_density(xs, ps, grid, grid, method="histogram")
        exact = gauss2d(grid, grid)
        peak = exact.max()
        assert np.max(np.abs(dens.values - exact)) <= 0.05 * peak

    def test_kde_matches_analytic_gaussian(self):
        rng = np.random.default_rng(8)
        n = 200_000
        xs = rng.standard_normal(n)
        ps = rng.standard_normal(n)
        grid = np.linspace(-4.5, 4.5, 91)
        dens = estimate_density(xs, ps, grid, grid, method="kde")
        exact = gauss2d(grid, grid)
        assert np.max(np.abs(dens.values - exact)) <= 0.05 * exact.max()
        assert dens.meta["bandwidth_p"] > 0

    def test_normalization_invariant(self):
        rng = np.random.default_rng(9)
        xs = rng.standard_normal(500)
        ps = rng.standard_normal(500)
        grid = np.linspace(-5.0, 5.0, 33)
        for method in ("histogram", "kde"):
            dens = estimate_density(xs, ps, grid, grid, method=method)
            integral = np.trapezoid(
                np.trapezoid(dens.values, dens.p, axis=1), dens.x
            )
            assert_allclose(integral, 1.0, atol=1e-6)
            assert np.all(dens.values >= 0.0)

    def test_point_mass_occupies_one_cell(self):
        xs = np.zeros(150)
        ps = np.zeros(150)
        grid = np.linspace(-2.0, 2.0, 21)
        dens = estimate_density(xs, ps, grid, grid, method="histogram")
        nonzero = np.argwhere(dens.values > 0)
        assert len(nonzero) == 1
        assert tuple(nonzero[0]) == (10, 10)
        integral = np.trapezoid(np.trapezoid(dens.values, dens.p, axis=1), dens.x)
        assert_allclose(integral, 1.0, rtol=1e-12)

    def test_small_sample_path_records_confidence(self):
        rng = np.random.default_rng(10)
        dens = estimate_density(
            rng.standard_normal(10), rng.standard_normal(10),
            np.linspace(-4, 4, 17), np.linspace(-4, 4, 17),
        )
        assert dens.meta["n_samples"] == 10
        assert_allclose(dens.meta["rel_error_scale"], 10 ** -0.5)

    def test_coverage_violation_raises(self):
        xs = np.linspace(-10.0, 10.0, 200)
        ps = np.zeros(200)
        grid = np.linspace(-1.0, 1.0, 11)
        with pytest.raises(GridCoverageError):
            estimate_density(xs, ps, grid, grid)

    def test_unknown_method_raises(self):
        grid = np.linspace(-1, 1, 11)
        with pytest.raises(ValueError, match="method"):
            estimate_density([0.0], [0.0], grid, grid, method="splines")


class TestMarginalAndMoments:
    def test_marginal_of_product_density(self):
        x = np.linspace(-6, 6, 201)
        p = np.linspace(-7, 7, 181)
        rho0 = np.exp(-(x**2)) / np.sqrt(np.pi)
        g = np.exp(-((p - 0.3) ** 2) / 0.98) / np.sqrt(0.98 * np.pi)
        dens = density_from_grid(x, p, np.outer(rho0, g))
        assert_allclose(marginal_rho(dens), rho0, atol=1e-9)
        assert_allclose(np.trapezoid(marginal_rho(dens), x), 1.0, atol=1e-6)

    def test_local_moments_of_product_density(self):
        x = np.linspace(-6, 6, 201)
        p = np.linspace(-7, 7, 361)
        rho0 = np.exp(-(x**2)) / np.sqrt(np.pi)
        mu, var = 0.3, 0.49
        g = np.exp(-((p - mu) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
        mom = local_moments(density_from_grid(x, p, np.outer(rho0, g)))
        assert_allclose(mom.mean_p[mom.mask], mu, atol=1e-8)
        assert_allclose(mom.var_p[mom.mask], var, atol=1e-8)
        assert np.all(np.isnan(mom.mean_p[~mom.mask]))
        assert np.all(mom.var_p[mom.mask] >= 0.0)

    def test_conditional_mean_tracks_correlation(self):
        x = np.linspace(-6, 6, 161)
        p = np.linspace(-9, 9, 241)
        corr = 0.55
        mom = local_moments(density_from_grid(x, p, gauss2d(x, p, corr=corr)))
        # regression line <p>_x = corr * x, conditional var 1 - corr^2
        assert_allclose(mom.mean_p[mom.mask], corr * x[mom.mask], atol=1e-6)
        assert_allclose(mom.var_p[mom.mask], 1.0 - corr**2, atol=1e-6)


class TestCharacteristicFn:
    def setup_method(self):
        self.x = np.linspace(-5, 5, 81)
        self.p = np.linspace(-8, 8, 161)
        self.sigma2 = 1.3
        rho0 = np.exp(-(self.x**2) / 2) / np.sqrt(2 * np.pi)
        g = np.exp(-(self.p**2) / (2 * self.sigma2))
        g /= np.sqrt(2 * np.pi * self.sigma2)
        self.dens = density_from_grid(self.x, self.p, np.outer(rho0, g))

    def test_gaussian_characteristic(self):
        z = conjugate_z_grid(self.p, n_z=41)
        char = characteristic_fn(self.dens, z)
        rho = marginal_rho(self.dens)
        expected = rho[:, None] * np.exp(-0.5 * self.sigma2 * z[None, :] ** 2)
        assert_allclose(char.values, expected, atol=1e-10)

    def test_zero_column_is_marginal_exactly(self):
        z = np.array([-0.5, 0.0, 0.5])
        char = characteristic_fn(self.dens, z)
        assert np.array_equal(char.values[:, 1].real, marginal_rho(self.dens))
        assert np.all(char.values[:, 1].imag == 0.0)

    def test_hermitian_symmetry(self):
        z = conjugate_z_grid(self.p, n_z=33)
        char = characteristic_fn(self.dens, z)
        flipped = char.values[:, ::-1]
        assert np.max(np.abs(np.conj(char.values) - flipped)) <= 1e-10

    def test_resolution_precondition(self):
        z_bad = np.linspace(-1.1 * np.pi / (4 * self.dens.dp), 0.0, 5)
        with pytest.raises(ValueError, match="too coarse"):
            characteristic_fn(self.dens, z_bad)

    @settings(max_examples=25, deadline=None)
    @given(
        p0=st.floats(-2.0, 2.0),
        sigma=st.floats(0.5, 2.0),
    )
    def test_shift_in_p_multiplies_by_phase(self, p0, sigma):
        x = np.linspace(-3, 3, 31)
        p = np.linspace(-16, 16, 321)
        rho0 = np.exp(-(x**2)) / np.sqrt(np.pi)

        def make(mean):
            g = np.exp(-((p - mean) ** 2) / (2 * sigma**2))
            g /= np.sqrt(2 * np.pi) * sigma
            return density_from_grid(x, p, np.outer(rho0, g))

        z = conjugate_z_grid(p, n_z=21, fill=0.8)
        base = characteristic_fn(make(0.0), z)
        shifted = characteristic_fn(make(p0), z)
        assert_allclose(
            shifted.values,
            base.values * np.exp(1j * p0 * z)[None, :],
            atol=1e-7,
        )

    def test_moments_recovered_from_z_derivatives(self):
        x = np.linspace(-6, 6, 121)
        p = np.linspace(-6, 6, 241)
        dens = density_from_grid(x, p, gauss2d(x, p, corr=0.4))
        direct = local_moments(dens)

        def err(dz):
            z = np.array([-dz, 0.0, dz])
            rec = moments_from_characteristic(characteristic_fn(dens, z))
            both = direct.mask & rec.mask
            e1 = np.max(np.abs(rec.mean_p[both] - direct.mean_p[both]))
            e2 = np.max(np.abs(rec.second_p[both] - direct.second_p[both]))
            return max(e1, e2)

        e_coarse, e_fine = err(0.2), err(0.1)
        assert e_coarse < 0.1
        # second-order stencil: error should drop about fourfold
        assert 3.0 < e_coarse / e_fine < 5.5

    def test_moments_require_symmetric_origin(self):
        dens = self.dens
        with pytest.raises(ValueError, match="contain 0"):
            moments_from_characteristic(
                characteristic_fn(dens, np.array([0.1, 0.2, 0.3]))
            )


def ho_ground_moments(n_points=301, half_width=6.0):
    x = np.linspace(-half_width, half_width, n_points)
    rho = np.exp(-(x**2)) / np.sqrt(np.pi)
    mask = rho > 1e-3 * rho.max()
    nan = np.full(x.shape, np.nan)
    mean_p = np.where(mask, 0.0, nan)
    second = np.where(mask, 0.5, nan)
    return LocalMoments(
        x=x, rho=rho, mean_p=mean_p, second_p=second,
        var_p=second.copy(), mask=mask,
    )


class TestDispersionIdentity:
    def test_exact_ground_state_residual_vanishes(self):
        r, norm = dispersion_identity_residual(ho_ground_moments(), beta=0.5)
        assert norm <= 1e-6
        assert np.nanmax(np.abs(r)) <= 1e-6

    def test_uniform_density_keeps_injected_variance(self):
        x = np.linspace(0.0, 1.0, 101)
        rho = np.ones_like(x)
        var = 0.37
        mom = LocalMoments(
            x=x, rho=rho, mean_p=np.zeros_like(x),
            second_p=np.full(x.shape, var), var_p=np.full(x.shape, var),
            mask=np.ones(x.shape, dtype=bool),
        )
        r, norm = dispersion_identity_residual(mom, beta=0.5)
        assert_allclose(r, var, rtol=1e-12)
        assert_allclose(norm, var, rtol=1e-12)

    def test_first_excited_state_off_node(self):
        x = np.linspace(-6, 6, 1201)
        rho = 2.0 * x**2 * np.exp(-(x**2)) / np.sqrt(np.pi)
        mask = rho > 1e-3 * rho.max()
        nan = np.full(x.shape, np.nan)
        # sigma_p^2(x) = 1/2 + 1/(2 x^2) from the exact n=1 state
        var = np.where(mask, 0.5 + 0.5 / np.maximum(x**2, 1e-300), nan)
        mom = LocalMoments(
            x=x, rho=rho, mean_p=np.where(mask, 0.0, nan),
            second_p=var, var_p=var, mask=mask,
        )
        r, _ = dispersion_identity_residual(mom, beta=0.5)
        away = mask & (np.abs(x) > 0.5)
        assert np.nanmax(np.abs(r[away])) <= 1e-4
        near_node = np.abs(x) < 0.01
        assert np.all(np.isnan(r[near_node]))

    def test_mask_too_small(self):
        mom = ho_ground_moments(n_points=11, half_width=0.1)
        tiny = LocalMoments(
            x=mom.x, rho=mom.rho, mean_p=mom.mean_p, second_p=mom.second_p,
            var_p=mom.var_p, mask=np.zeros(mom.x.shape, dtype=bool),
        )
        with pytest.raises(ValueError, match="mask too small"):
            dispersion_identity_residual(tiny, beta=0.5)


def free_packet_moments(t, x, sigma0=1.0, beta=0.5):
    """Exact local moments of a freely spreading Gaussian packet (hbar=m=1)."""
    s2 = sigma0**2 + t**2 / (4.0 * sigma0**2)
    rho = np.exp(-(x**2) / (2.0 * s2)) / np.sqrt(2.0 * np.pi * s2)
    mask = rho > 1e-3 * rho.max()
    nan = np.full(x.shape, np.nan)
    v = x * t / (4.0 * sigma0**2 * s2)
    var = beta**2 / s2
    mean_p = np.where(mask, v, nan)
    second = np.where(mask, var + v * v, nan)
    return LocalMoments(
        x=x, rho=rho, mean_p=mean_p, second_p=second,
        var_p=np.where(mask, var, nan), mask=mask,
    )


class TestHierarchyResiduals:
    def test_stationary_ground_state(self):
        params = default_params("dimensionless-ho")
        pot = Potential.harmonic(1.0)
        mom = ho_ground_moments(n_points=601)
        r1, r2 = hierarchy_residuals([mom, mom, mom], 0.1, params, pot)
        assert np.nanmax(np.abs(r1)) <= 1e-6
        assert np.nanmax(np.abs(r2)) <= 1e-6

    def test_free_packet_second_order(self):
        params = default_params("dimensionless-ho")
        pot = Potential.free()

        def residual(dx, dt):
            x = np.arange(-10.0, 10.0 + dx / 2, dx)
            series = [free_packet_moments(1.0 + k * dt, x) for k in (-1, 0, 1)]
            r1, r2 = hierarchy_residuals(series, dt, params, pot)
            return max(np.nanmax(np.abs(r1)), np.nanmax(np.abs(r2)))

        coarse = residual(0.05, 0.08)
        fine = residual(0.025, 0.04)
        assert coarse < 5e-4
        assert coarse / fine > 3.0

    def test_requires_three_slices(self):
        params = default_params("dimensionless-ho")
        mom = ho_ground_moments()
        with pytest.raises(ValueError, match="3 time slices"):
            hierarchy_residuals([mom, mom], 0.1, params, Potential.free())

    def test_grid_mismatch(self):
        params = default_params("dimensionless-ho")
        a = ho_ground_moments(n_points=301)
        b = ho_ground_moments(n_points=201)
        with pytest.raises(ValueError, match="grid mismatch"):
            hierarchy_residuals([a, b, a], 0.1, params, Potential.free())


class TestAvgMomentumFluctuation:
    def test_ho_ground_state_both_forms(self):
        x = np.linspace(-8, 8, 4097)
        rho = np.exp(-(x**2)) / np.sqrt(np.pi)
        a, b = avg_momentum_fluctuation(rho, x[1] - x[0], beta=0.5)
        assert_allclose(a, 0.5, atol=1e-10)
        assert_allclose(b, 0.5, atol=1e-10)

    def test_two_forms_agree_for_modulated_density(self):
        x = np.linspace(-9, 9, 32769)
        rho = np.exp(-(x**2)) * (1.0 + 0.3 * np.sin(2.0 * x))
        rho /= np.trapezoid(rho, x)
        a, b = avg_momentum_fluctuation(rho, x[1] - x[0], beta=0.5)
        assert abs(a - b) / abs(a) <= 1e-8

    def test_uniform_ring_gives_zero(self):
        rho = np.full(64, 1.0 / (2.0 * np.pi))
        a, b = avg_momentum_fluctuation(
            rho, 2.0 * np.pi / 64, beta=0.5, periodic=True
        )
        assert abs(a) <= 1e-12
        assert abs(b) <= 1e-12

    def test_boundary_decay_enforced_on_box(self):
        rho = np.full(64, 0.5)
        with pytest.raises(BoundaryDecayError):
            avg_momentum_fluctuation(rho, 0.01, beta=0.5)

    def test_positivity_required(self):
        rho = np.linspace(0.0, 1.0, 32)
        with pytest.raises(ValueError, match="positive"):
            avg_momentum_fluctuation(rho, 0.01, beta=0.5)


class TestTotalVarianceSplit:
    def test_correlated_gaussian(self):
        x = np.linspace(-7, 7, 201)
        p = np.linspace(-7, 7, 201)
        corr = 0.6
        dens = density_from_grid(x, p, gauss2d(x, p, corr=corr))
        total, mean_local, var_means = total_variance_split(dens)
        assert_allclose(total, 1.0, atol=1e-6)
        assert_allclose(mean_local, 1.0 - corr**2, atol=1e-6)
        assert_allclose(var_means, corr**2, atol=1e-6)
        assert_allclose(total, mean_local + var_means, rtol=1e-12)


class TestCalibrateBeta:
    def test_recovers_half_from_ground_state_draws(self):
        rng = np.random.default_rng(314)
        n_snap, n_members = 20, 2000
        xs = rng.normal(0.0, np.sqrt(0.5), size=(n_snap, n_members))
        ps = rng.normal(0.0, np.sqrt(0.5), size=(n_snap, n_members))
        params = default_params("dimensionless-ho")
        fit = calibrate_beta(xs, ps, params, n_boot=8)
        assert abs(fit.beta - 0.5) <= 0.05
        assert fit.stderr < 0.05
        assert fit.n_fit_points >= 5

    def test_zero_dispersion_gives_zero_beta(self):
        rng = np.random.default_rng(99)
        xs = rng.normal(0.0, np.sqrt(0.5), size=4000)
        ps = np.zeros(4000)
        params = default_params("dimensionless-ho")
        fit = calibrate_beta(xs, ps, params, n_boot=0)
        assert abs(fit.beta) <= 0.05

    def test_drifting_energy_rejected(self):
        rng = np.random.default_rng(5)
        n_snap, n_members = 8, 1000
        scales = np.linspace(0.4, 1.0, n_snap)[:, None]
        xs = scales * rng.normal(0.0, np.sqrt(0.5), size=(n_snap, n_members))
        ps = scales * rng.normal(0.0, np.sqrt(0.5), size=(n_snap, n_members))
        params = default_params("dimensionless-ho")
        with pytest.raises(ValueError, match="non-stationary"):
            calibrate_beta(
                xs, ps, params, potential=Potential.harmonic(1.0), n_boot=0
            )
