"""Madelung-evolution and quantum-potential tests against analytic solutions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from sedsim.hydro import (
    HydroState,
    NodeFormationError,
    align_phase_series,
    evolve_hydro,
    hamilton_jacobi_residual,
    hydro_state,
    quantum_potential,
    quantum_potential_two_particle,
    step_madelung,
)
from sedsim.params import Potential, default_params

PARAMS = default_params("dimensionless-ho")
HO = Potential.harmonic(1.0)


def ground_state(n=601, half=9.0):
    x = np.linspace(-half, half, n)
    rho = np.exp(-(x**2)) / np.sqrt(np.pi)
    return hydro_state(x, rho, np.zeros_like(x), renormalize=True)


def coherent_series(a, times, x):
    """Exact coherent-state (rho, S) snapshots for the unit harmonic well."""
    out = []
    for t in times:
        xc = a * np.cos(t)
        pc = -a * np.sin(t)
        rho = np.exp(-((x - xc) ** 2)) / np.sqrt(np.pi)
        s = pc * x - 0.5 * t - 0.5 * xc * pc
        out.append(HydroState(x=x, rho=rho, s=s, t=t))
    return out


class TestQuantumPotential:
    def test_ho_ground_state_sums_to_energy(self):
        x = np.linspace(-9, 9, 901)
        rho = np.exp(-(x**2)) / np.sqrt(np.pi)
        q = quantum_potential(rho, x[1] - x[0], beta=0.5, m=1.0)
        mask = np.isfinite(q)
        assert_allclose(q[mask] + 0.5 * x[mask] ** 2, 0.5, atol=1e-6)
        assert np.all(np.isnan(q[~mask]))

    def test_uniform_density_gives_zero(self):
        rho = np.full(128, 1.0 / (2 * np.pi))
        q = quantum_potential(rho, 2 * np.pi / 128, beta=0.5, m=1.0,
                              periodic=True)
        assert np.nanmax(np.abs(q)) <= 1e-10

    def test_cosine_amplitude_interior(self):
        k = 1.3
        x = np.linspace(-1.0, 1.0, 801)
        rho = np.cos(k * x) ** 2
        q = quantum_potential(rho, x[1] - x[0], beta=0.5, m=1.0)
        interior = np.abs(x) < 0.5
        assert_allclose(q[interior], 0.5 * k * k, atol=1e-8)

    def test_empty_mask_raises(self):
        with pytest.raises(ValueError, match="support"):
            quantum_potential(np.zeros(32), 0.1, beta=0.5, m=1.0)


class TestTwoParticleQuantumPotential:
    def setup_method(self):
        self.x1 = np.linspace(-7, 7, 561)
        self.x2 = np.linspace(-2, 2, 41)
        self.rho1 = np.exp(-(self.x1**2)) / np.sqrt(np.pi)
        self.rho2 = np.exp(-(self.x2**2)) / np.sqrt(np.pi)
        self.dx1 = self.x1[1] - self.x1[0]
        self.dx2 = self.x2[1] - self.x2[0]

    def test_uncorrelated_reduces_to_single_particle(self):
        rho12 = np.ones((self.x1.size, self.x2.size))
        q1 = quantum_potential_two_particle(
            self.rho1, self.rho2, rho12, self.dx1, self.dx2, beta=0.5, m=1.0
        )
        single = quantum_potential(self.rho1, self.dx1, beta=0.5, m=1.0)
        mask = np.isfinite(single)
        expected = np.broadcast_to(single[mask, None], q1[mask, :].shape)
        assert_allclose(q1[mask, :], expected, atol=1e-12)
        assert np.all(np.isnan(q1[~mask, :]))

    def test_exponential_correlation_analytic(self):
        c = 0.3
        rho12 = np.exp(c * np.outer(self.x1, self.x2))
        q1 = quantum_potential_two_particle(
            self.rho1, self.rho2, rho12, self.dx1, self.dx2, beta=0.5, m=1.0
        )
        xx1, xx2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        exact = -0.5 * (
            (xx1**2 - 1.0) + 0.25 * c * c * xx2**2 - c * xx1 * xx2
        )
        inner = np.abs(self.x1) < 2.0
        assert_allclose(q1[inner, :], exact[inner, :], atol=1e-5)

    def test_weak_correlation_is_linear_in_c(self):
        base = quantum_potential_two_particle(
            self.rho1, self.rho2,
            np.ones((self.x1.size, self.x2.size)),
            self.dx1, self.dx2, beta=0.5, m=1.0,
        )

        def deviation(c):
            rho12 = np.exp(c * np.outer(self.x1, self.x2))
            q = quantum_potential_two_particle(
                self.rho1, self.rho2, rho12, self.dx1, self.dx2,
                beta=0.5, m=1.0,
            )
            return np.nanmax(np.abs(q - base))

        d1, d2 = deviation(1e-2), deviation(5e-3)
        assert 1.8 < d1 / d2 < 2.2

    def test_nonpositive_correlation_rejected(self):
        rho12 = np.ones((self.x1.size, self.x2.size))
        rho12[10, 10] = 0.0
        with pytest.raises(ValueError, match="positive"):
            quantum_potential_two_particle(
                self.rho1, self.rho2, rho12, self.dx1, self.dx2,
                beta=0.5, m=1.0,
            )


class TestStateValidation:
    def test_norm_enforced(self):
        x = np.linspace(-5, 5, 101)
        rho = np.exp(-(x**2))
        with pytest.raises(ValueError, match="integrates"):
            hydro_state(x, rho, np.zeros_like(x))
        state = hydro_state(x, rho, np.zeros_like(x), renormalize=True)
        assert_allclose(state.norm(), 1.0, atol=1e-12)

    def test_bad_bc_rejected(self):
        x = np.linspace(0, 1, 11)
        with pytest.raises(ValueError, match="bc"):
            hydro_state(x, np.ones(11), np.zeros(11), bc="open")

    def test_negative_density_rejected(self):
        x = np.linspace(0, 1, 11)
        rho = np.ones(11)
        rho[3] = -0.1
        with pytest.raises(ValueError, match="nonnegative"):
            hydro_state(x, rho, np.zeros(11))


class TestStepMadelung:
    def test_stationary_ground_state_density_frozen(self):
        state = ground_state(n=257, half=8.0)
        dt = 2.0 * np.pi / 4096
        final = evolve_hydro(state, HO, PARAMS, 2.0 * np.pi, dt)[-1]
        # density does not move over a full period
        assert np.max(np.abs(final.rho - state.rho)) <= 1e-6
        # phase advances by -E0 T / (2 beta) = -pi on the support;
        # the log variables are noisy where rho < 1e-16 and carry no mass
        mask = state.rho >= 1e-6 * state.rho.max()
        assert_allclose(final.s[mask] - state.s[mask], -np.pi, atol=1e-9)

    def test_mass_conserved_on_non_gaussian_packet(self):
        # box sized so the edge density stays near 1e-16 of peak, where
        # the log variables are still well conditioned
        x = np.linspace(-6, 6, 513)
        rho = np.exp(-(x**2)) * (1.0 + 0.2 / np.cosh(2.0 * x))
        state = hydro_state(x, rho, np.zeros_like(x), renormalize=True)
        dx = x[1] - x[0]
        dt = 0.4 * dx * dx  # inside the dispersive bound
        for _ in range(1000):
            state = step_madelung(state, dt, HO, PARAMS)
        assert abs(state.norm() - 1.0) <= 1e-6

    def test_free_gaussian_spreading_law(self):
        x = np.linspace(-8, 8, 513)
        sigma0 = 1.0
        rho = np.exp(-(x**2) / (2 * sigma0**2))
        state = hydro_state(x, rho, np.zeros_like(x), renormalize=True)
        dt = 4.0e-4
        t_final = np.round(1.0 / dt) * dt
        final = evolve_hydro(state, Potential.free(), PARAMS, t_final, dt)[-1]
        s2 = sigma0**2 + t_final**2 / (4.0 * sigma0**2)
        exact = np.exp(-(x**2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
        assert np.max(np.abs(final.rho - exact)) <= 1e-8
        v_exact = x * t_final / (4.0 * sigma0**2 * s2)
        core = np.abs(x) < 5.0
        assert_allclose(final.velocity(PARAMS)[core], v_exact[core], atol=1e-8)

    def test_constant_potential_shift_is_pure_gauge(self):
        state = ground_state(n=257, half=8.0)
        shifted = Potential.tabulated(state.x, HO.V(state.x) + 3.0)
        dt = 5e-4
        n_steps = 200
        a = state
        b = state
        for _ in range(n_steps):
            a = step_madelung(a, dt, HO, PARAMS)
            b = step_madelung(b, dt, shifted, PARAMS)
        assert_allclose(b.rho, a.rho, rtol=0, atol=1e-12)
        expected_shift = -3.0 * (dt * n_steps) / (2.0 * PARAMS.beta)
        assert_allclose(b.s - a.s, expected_shift, atol=1e-10)

    @settings(max_examples=10, deadline=None)
    @given(c=st.floats(-25.0, 25.0))
    def test_phase_offset_is_gauge(self, c):
        state = ground_state(n=129, half=8.0)
        x = state.x
        rho = np.exp(-(x**2) / 1.44)
        base = hydro_state(x, rho, 0.1 * np.sin(x), renormalize=True)
        offset = HydroState(x=x, rho=base.rho, s=base.s + c, t=0.0)
        dt = 2e-3
        a, b = base, offset
        for _ in range(50):
            a = step_madelung(a, dt, HO, PARAMS)
            b = step_madelung(b, dt, HO, PARAMS)
        assert_allclose(b.rho, a.rho, rtol=0, atol=1e-12)
        assert_allclose(b.s - c, a.s, rtol=0, atol=1e-10)
        assert_allclose(b.velocity(PARAMS), a.velocity(PARAMS), atol=1e-10)

    def test_dispersive_bound_enforced(self):
        state = ground_state(n=101, half=8.0)
        with pytest.raises(ValueError, match="dispersive"):
            step_madelung(state, 1.0, HO, PARAMS)

    def test_advective_cfl_enforced(self):
        state = ground_state(n=161, half=8.0)
        fast = HydroState(x=state.x, rho=state.rho, s=15.0 * state.x, t=0.0)
        dx = state.dx
        dt = 0.45 * dx * dx  # passes the dispersive bound
        with pytest.raises(ValueError, match="advective"):
            step_madelung(fast, dt, HO, PARAMS)

    def test_node_refused(self):
        x = np.linspace(-8, 8, 257)
        rho = x**2 * np.exp(-(x**2)) + 1e-12
        state = hydro_state(x, rho, np.zeros_like(x), renormalize=True)
        with pytest.raises(NodeFormationError, match="wave-equation"):
            step_madelung(state, 1e-4, HO, PARAMS)

    def test_zero_density_refused(self):
        x = np.linspace(-8, 8, 257)
        rho = np.exp(-(x**2))
        rho[0] = 0.0
        state = HydroState(x=x, rho=rho, s=np.zeros_like(x), t=0.0)
        with pytest.raises(NodeFormationError):
            step_madelung(state, 1e-4, HO, PARAMS)


class TestEvolveDriver:
    def test_snapshots_on_step_grid(self):
        state = ground_state(n=129, half=8.0)
        dt = 1e-3
        snaps = evolve_hydro(
            state, HO, PARAMS, 0.02, dt, snapshot_times=[0.0, 0.01, 0.02]
        )
        assert [round(s.t / dt) for s in snaps] == [0, 10, 20]

    def test_snapshot_validation(self):
        state = ground_state(n=129, half=8.0)
        with pytest.raises(ValueError, match="within"):
            evolve_hydro(state, HO, PARAMS, 0.01, 1e-3, snapshot_times=[0.02])
        with pytest.raises(ValueError, match="increasing"):
            evolve_hydro(
                state, HO, PARAMS, 0.01, 1e-3, snapshot_times=[0.01, 0.01]
            )


class TestHamiltonJacobiResidual:
    def test_exact_ground_state_series(self):
        x = np.linspace(-9, 9, 601)
        rho = np.exp(-(x**2)) / np.sqrt(np.pi)
        dt = 1e-3
        series = [
            HydroState(x=x, rho=rho, s=np.full(x.shape, -0.5 * t), t=t)
            for t in (0.0, dt, 2 * dt)
        ]
        r = hamilton_jacobi_residual(series, dt, HO, PARAMS)
        assert np.nanmax(np.abs(r)) <= 1e-5

    def test_classical_limit_free_streaming(self):
        # S = m x^2 / (2 t) / (2 beta) solves classical HJ for V = 0;
        # with beta small the quantum term is O(beta^2) and the residual
        # reduces to the classical one (zero up to differencing error).
        beta = 1e-3
        params = PARAMS.with_changes(beta=beta, hbar=2.0 * beta)
        x = np.linspace(-25, 25, 1001)
        rho = np.exp(-(x**2) / 50.0)
        rho /= np.trapezoid(rho, x)
        dt = 0.01
        series = []
        for t in (10.0 - dt, 10.0, 10.0 + dt):
            s = (x**2 / (2.0 * t)) / (2.0 * beta)
            series.append(HydroState(x=x, rho=rho, s=s, t=t))
        r = hamilton_jacobi_residual(series, dt, Potential.free(), params)
        assert np.nanmax(np.abs(r)) <= 1e-5

    def test_coherent_series_second_order(self):
        def residual(n, dt):
            x = np.linspace(-10, 10, n)
            series = coherent_series(1.0, (0.3 - dt, 0.3, 0.3 + dt), x)
            r = hamilton_jacobi_residual(series, dt, HO, PARAMS)
            return np.nanmax(np.abs(r))

        coarse = residual(501, 0.05)
        fine = residual(1001, 0.025)
        assert coarse < 5e-3
        assert 3.3 < coarse / fine < 5.0

    def test_errors(self):
        state = ground_state(n=129, half=8.0)
        with pytest.raises(ValueError, match="3 time slices"):
            hamilton_jacobi_residual([state, state], 0.1, HO, PARAMS)
        other = ground_state(n=131, half=8.0)
        with pytest.raises(ValueError, match="grid mismatch"):
            hamilton_jacobi_residual([state, other, state], 0.1, HO, PARAMS)


class TestAlignPhaseSeries:
    def test_removes_artificial_jumps(self):
        x = np.linspace(-5, 5, 101)
        rho = np.exp(-(x**2)) / np.sqrt(np.pi)
        base = [
            HydroState(x=x, rho=rho, s=np.full(x.shape, -0.1 * t), t=t)
            for t in (0.0, 1.0, 2.0)
        ]
        wrapped = [
            base[0],
            HydroState(x=x, rho=rho, s=base[1].s + 2 * np.pi, t=1.0),
            HydroState(x=x, rho=rho, s=base[2].s - 4 * np.pi, t=2.0),
        ]
        aligned = align_phase_series(wrapped)
        for got, want in zip(aligned, base):
            assert_allclose(got.s, want.s, atol=1e-12)
