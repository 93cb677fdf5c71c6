"""Phase-space transform tests against analytic oscillator results."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sedsim.params import default_params
from sedsim.phasestats import CharacteristicGrid, characteristic_fn, estimate_density
from sedsim.schrod import WaveFunction, ho_eigenstate, wavefunction
from sedsim.wigner import (
    WignerGrid,
    characteristic_from_wavefunction,
    inverse_characteristic,
    marginals_check,
    negativity_report,
    phase_space_overlap,
    wigner_transform,
)

PARAMS = default_params("dimensionless-ho")
XGRID = np.linspace(-8.0, 8.0, 257)


def analytic_ground(w):
    x, p = np.meshgrid(w.x, w.p, indexing="ij")
    return np.exp(-(x**2) - p**2) / np.pi


class TestTransform:
    def test_ground_state_matches_analytic_gaussian(self):
        wf = ho_eigenstate(0, XGRID, PARAMS)
        w = wigner_transform(wf, PARAMS)
        assert np.max(np.abs(w.w - analytic_ground(w))) <= 1e-12
        assert abs(w.integral() - 1.0) <= 1e-6
        assert w.meta["max_imag"] <= 1e-10

    def test_ground_state_is_nonnegative(self):
        wf = ho_eigenstate(0, XGRID, PARAMS)
        rep = negativity_report(wigner_transform(wf, PARAMS))
        assert rep.min_value >= -1e-9
        assert rep.negative_fraction <= 1e-9

    def test_first_excited_minimum_at_origin(self):
        wf = ho_eigenstate(1, XGRID, PARAMS)
        rep = negativity_report(wigner_transform(wf, PARAMS))
        assert_allclose(rep.min_value, -1.0 / np.pi, atol=1e-3)
        assert rep.location == (0.0, 0.0)
        assert rep.negative_fraction > 0.1

    def test_even_superposition_goes_negative(self):
        psi = (ho_eigenstate(0, XGRID, PARAMS).psi
               + ho_eigenstate(2, XGRID, PARAMS).psi) / np.sqrt(2.0)
        wf = wavefunction(XGRID, psi)
        rep = negativity_report(wigner_transform(wf, PARAMS))
        assert rep.min_value < -1e-3
        assert rep.negative_fraction > 1e-3

    def test_undecayed_state_is_refused(self):
        # bypass the factory so only the transform's own wall check fires
        x = np.linspace(-2.0, 2.0, 101)
        rho = np.exp(-(x**2))
        psi = np.sqrt(rho / np.trapezoid(rho, x)).astype(complex)
        wf = WaveFunction(x=x, psi=psi)
        with pytest.raises(ValueError, match="decayed"):
            wigner_transform(wf, PARAMS)

    def test_narrow_momentum_grid_is_refused(self):
        wf = ho_eigenstate(0, XGRID, PARAMS)
        with pytest.raises(ValueError, match="capture"):
            wigner_transform(wf, PARAMS, p_grid=np.linspace(-0.5, 0.5, 11))

    def test_periodic_plane_wave_concentrates_at_its_momentum(self):
        n = 64
        length = 16.0
        x = np.arange(n) * (length / n) - length / 2
        k0 = 2.0 * np.pi * 3 / length
        psi = np.exp(1j * k0 * x) / np.sqrt(length)
        wf = wavefunction(x, psi, bc="periodic")
        w = wigner_transform(wf, PARAMS)
        mom = w.w.sum(axis=0) * w.dx
        p0 = 2.0 * PARAMS.beta * k0
        j0 = int(np.argmax(mom))
        assert abs(w.p[j0] - p0) <= 1e-12
        # the ring's own momentum lattice is every second conjugate
        # column; off the peak those must vanish (half-lattice columns
        # in between carry finite Dirichlet sidelobes)
        ring = mom[j0 % 2::2]
        assert np.partition(ring, -2)[-2] <= 1e-10 * mom[j0]


class TestMarginals:
    @pytest.mark.parametrize("n", [0, 1])
    def test_eigenstate_marginals(self, n):
        wf = ho_eigenstate(n, XGRID, PARAMS)
        pos, mom = marginals_check(wigner_transform(wf, PARAMS), wf, PARAMS)
        assert pos <= 1e-6
        assert mom <= 1e-6

    def test_single_cell_perturbation_is_linear(self):
        wf = ho_eigenstate(0, XGRID, PARAMS)
        w = wigner_transform(wf, PARAMS)
        eps = 1e-3
        bumped = w.w.copy()
        bumped[40, 60] += eps
        w2 = WignerGrid(x=w.x, p=w.p, w=bumped, meta={})
        pos, _ = marginals_check(w2, wf, PARAMS)
        assert_allclose(pos, eps * w.dp, rtol=1e-9)

    def test_grid_mismatch_is_refused(self):
        wf = ho_eigenstate(0, XGRID, PARAMS)
        w = wigner_transform(wf, PARAMS)
        other = ho_eigenstate(0, np.linspace(-8.0, 8.0, 129), PARAMS)
        with pytest.raises(ValueError, match="grids"):
            marginals_check(w, other, PARAMS)


class TestPurityAndOverlap:
    def test_pure_state_purity(self):
        for n in (0, 1):
            wf = ho_eigenstate(n, XGRID, PARAMS)
            w = wigner_transform(wf, PARAMS)
            assert abs(phase_space_overlap(w, w, PARAMS) - 1.0) <= 1e-4

    def test_orthogonal_states_overlap_zero(self):
        w0 = wigner_transform(ho_eigenstate(0, XGRID, PARAMS), PARAMS)
        w1 = wigner_transform(ho_eigenstate(1, XGRID, PARAMS), PARAMS)
        assert abs(phase_space_overlap(w0, w1, PARAMS)) <= 1e-6


class TestInverseCharacteristic:
    def test_pure_state_route_equals_transform(self):
        # the offset correlation of psi itself, pushed through the
        # ensemble-side inverse, must land on the same grid and values
        wf = ho_eigenstate(1, XGRID, PARAMS)
        w = wigner_transform(wf, PARAMS)
        q = inverse_characteristic(characteristic_from_wavefunction(wf, PARAMS))
        assert np.array_equal(q.p, w.p)
        assert np.max(np.abs(q.w - w.w)) <= 1e-12
        assert q.w.min() <= -0.3

    def test_ensemble_reconstruction_stays_nonnegative(self):
        # true Gaussian phase-space ensemble; the reconstruction may dip
        # below zero only within its own Monte-Carlo noise
        rng = np.random.default_rng(42)
        n = 40000
        xs = rng.normal(0.0, np.sqrt(0.5), n)
        ps = rng.normal(0.0, np.sqrt(0.5), n)
        grid = np.linspace(-4.0, 4.0, 81)
        dens = estimate_density(xs, ps, grid, grid)
        dp = grid[1] - grid[0]
        z = np.linspace(-0.25 * np.pi / dp, 0.25 * np.pi / dp, 129)
        q = inverse_characteristic(characteristic_fn(dens, z), p_grid=grid)
        x2, p2 = np.meshgrid(q.x, q.p, indexing="ij")
        exact = np.exp(-(x2**2) - p2**2) / np.pi
        noise = np.sqrt(np.mean((q.w - exact) ** 2))
        assert q.w.min() >= -3.0 * noise
        assert noise <= 0.05

    def test_z_independent_characteristic_concentrates_at_zero_momentum(self):
        x = np.linspace(-4.0, 4.0, 81)
        rho = np.exp(-(x**2)) / np.sqrt(np.pi)
        z = np.linspace(-6.0, 6.0, 97)
        ch = CharacteristicGrid(x=x, z=z, values=np.tile(rho[:, None], z.size))
        q = inverse_characteristic(ch)
        j0 = int(np.argmin(np.abs(q.p)))
        column_mass = np.abs(q.w).sum(axis=0)
        # finite z window: off-center columns sit on the Dirichlet-kernel
        # sidelobes, so the concentration is grid-limited (~z count)
        assert column_mass[j0] > 50.0 * np.max(np.delete(column_mass, j0))

    def test_hermitian_violation_is_refused(self):
        x = np.linspace(-4.0, 4.0, 41)
        z = np.linspace(-3.0, 3.0, 31)
        vals = np.ones((41, 31), complex)
        vals[:, -1] = 1.0 + 0.1j  # breaks Q~(x, -z) = conj(Q~(x, z))
        with pytest.raises(ValueError, match="Hermitian"):
            inverse_characteristic(CharacteristicGrid(x=x, z=z, values=vals))

    def test_asymmetric_z_grid_is_refused(self):
        x = np.linspace(-4.0, 4.0, 41)
        z = np.linspace(-1.0, 3.0, 31)
        with pytest.raises(ValueError, match="symmetric"):
            inverse_characteristic(
                CharacteristicGrid(x=x, z=z, values=np.ones((41, 31), complex))
            )
