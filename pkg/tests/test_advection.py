import numpy as np
import pytest

from devpic.advection import (
    SimulationError,
    cfl_check,
    fluid_update,
    kinetic_split_fluxes,
    push,
    spawn_source_particles,
)
from devpic.fields import solve_poisson
from devpic.phase import MomentField, Population, SpatialGrid, signed_flux_moments, CellStore
from devpic.rng import stream


class TestPush:
    def test_free_streaming(self):
        grid = SpatialGrid(length=2.0, n_cells=4)
        pop = Population(np.array([0.0]), np.array([[1.0, 0, 0]]))
        push(pop, np.zeros(4), 0.1, grid)
        assert pop.x[0] == pytest.approx(0.1)
        assert np.allclose(pop.v[0], [1, 0, 0])

    def test_kick_then_drift(self):
        grid = SpatialGrid(length=2.0, n_cells=4)
        pop = Population(np.array([0.0]), np.zeros((1, 3)))
        push(pop, np.full(4, 2.0), 0.1, grid)
        assert np.allclose(pop.v[0], [-0.2, 0, 0])
        assert pop.x[0] == pytest.approx(2.0 - 0.02)  # -0.02 wrapped

    def test_reverse_step_is_exact_inverse(self, rng):
        grid = SpatialGrid(length=7.0, n_cells=5)
        x0 = rng.uniform(1, 6, 20)
        v0 = rng.standard_normal((20, 3))
        pop = Population(x0.copy(), v0.copy())
        E = rng.standard_normal(5)
        push(pop, E, 0.01, grid)
        push(pop, E, -0.01, grid)
        assert np.allclose(pop.x, x0, atol=1e-13)
        assert np.allclose(pop.v, v0, atol=1e-13)

    def test_transverse_velocities_untouched(self, rng):
        grid = SpatialGrid(length=2.0, n_cells=4)
        v0 = rng.standard_normal((50, 3))
        pop = Population(rng.uniform(0, 2, 50), v0.copy())
        push(pop, rng.standard_normal(4), 0.05, grid)
        assert np.array_equal(pop.v[:, 1:], v0[:, 1:])

    def test_no_sign_mixing_in_cell(self, rng):
        # same-cell particles get the same kick: velocity order is preserved
        grid = SpatialGrid(length=2.0, n_cells=2)
        xs = np.full(40, 0.3)
        v_lo = rng.uniform(-3, -1, (20, 3))
        v_hi = rng.uniform(1, 3, (20, 3))
        pop = Population(xs, np.concatenate([v_lo, v_hi]))
        push(pop, np.array([5.0, -5.0]), 0.01, grid)
        assert pop.v[:20, 0].max() < pop.v[20:, 0].min()


class TestFluidUpdate:
    def test_uniform_steady_state(self):
        grid = SpatialGrid(n_cells=64)
        mf = MomentField.uniform(64, rho=1.3, u=(0.4, 0.1, -0.2), T=0.9)
        out = fluid_update(mf, np.zeros((64, 5)), np.zeros(64), 0.01, grid)
        assert np.allclose(out.rho, 1.3, atol=1e-14)
        assert np.allclose(out.u, mf.u, atol=1e-14)
        assert np.allclose(out.T, 0.9, atol=1e-14)

    def test_split_fluxes_sum_to_euler_flux(self):
        mf = MomentField.uniform(3, rho=1.3, u=(0.4, 0.1, -0.2), T=0.9)
        tot = kinetic_split_fluxes(mf).total[0]
        rho, u, T = 1.3, np.array([0.4, 0.1, -0.2]), 0.9
        exact = np.array([
            rho * u[0],
            rho * (u[0] ** 2 + T),
            rho * u[0] * u[1],
            rho * u[0] * u[2],
            u[0] * (0.5 * rho * np.sum(u**2) + 2.5 * rho * T),
        ])
        assert np.allclose(tot, exact, atol=1e-14)

    def test_conservation_periodic(self, rng):
        grid = SpatialGrid(n_cells=80)
        x = grid.centers
        mf = MomentField(rho=1 + 0.4 * np.sin(x),
                         u=np.stack([0.3 * np.cos(x), 0 * x, 0 * x], axis=1),
                         T=1 + 0.1 * np.sin(2 * x))
        from devpic.advection import conserved
        U0 = conserved(mf).sum(axis=0)
        out = fluid_update(mf, np.zeros((80, 5)), np.zeros(80), grid.dx / 10, grid)
        U1 = conserved(out).sum(axis=0)
        assert np.allclose(U1, U0, rtol=1e-13, atol=1e-13)

    def test_cold_start_momentum_oracle(self):
        grid = SpatialGrid(n_cells=200)
        x = grid.centers
        mf = MomentField(rho=1 + 0.4 * np.sin(x), u=np.zeros((200, 3)), T=np.ones(200))
        dt = grid.dx / 10
        out = fluid_update(mf, np.zeros((200, 5)), np.zeros(200), dt, grid)
        mom = out.rho * out.u[:, 0]
        pred = -dt * 0.4 * np.cos(x)  # -dt d(rho T)/dx
        assert np.max(np.abs(mom - pred)) < grid.dx**2 * np.max(np.abs(pred))

    def test_negative_temperature_aborts(self):
        grid = SpatialGrid(n_cells=8)
        mf = MomentField.uniform(8, rho=1.0, T=1e-6)
        bad_flux = np.zeros((8, 5))
        bad_flux[:, 4] = np.sin(np.arange(8)) * 50.0
        with pytest.raises(SimulationError):
            fluid_update(mf, bad_flux, np.zeros(8), 0.5, grid)


class TestCfl:
    def test_thermal_only(self):
        grid = SpatialGrid(n_cells=100)
        mf = MomentField.uniform(100, T=1.0)
        c, ok = cfl_check(mf, grid.dx / 10, grid)
        assert c == pytest.approx(0.4)
        assert ok

    def test_with_bulk_velocity(self):
        grid = SpatialGrid(n_cells=100)
        mf = MomentField.uniform(100, u=(5.0, 0, 0), T=1.0)
        c, ok = cfl_check(mf, grid.dx / 10, grid)
        assert c == pytest.approx(0.9)
        assert ok

    def test_violation(self):
        grid = SpatialGrid(n_cells=100)
        mf = MomentField.uniform(100, T=1.0)
        c, ok = cfl_check(mf, grid.dx, grid)
        assert not ok


def _damping_state(alpha, n_x=32):
    grid = SpatialGrid(length=4 * np.pi, n_cells=n_x)
    x = grid.centers
    mom = MomentField(rho=1 + alpha * np.sin(x), u=np.zeros((n_x, 3)), T=np.ones(n_x))
    E = solve_poisson(mom.rho, grid)
    return grid, mom, E


def _spawn(alpha, seed, steps=4, n_x=32, n_eff=1e-6):
    """Evolve the fluid a few steps (so the source is nonzero), then spawn."""
    grid, mom, E = _damping_state(alpha, n_x)
    dt = grid.dx / 10
    zero_flux = np.zeros((n_x, 5))
    for _ in range(steps):
        E = solve_poisson(mom.rho, grid)
        mom = fluid_update(mom, zero_flux, E, dt, grid)
    return spawn_source_particles(
        mom, E, zero_flux, dt, n_eff, grid, lambda k: stream(seed, 0, 5, k)
    )


class TestSpawn:
    def test_equilibrium_spawns_nothing(self):
        x, v, s = _spawn(0.0, seed=1)
        assert x.size == 0

    def test_count_linear_in_alpha(self):
        n1 = sum(_spawn(0.02, seed=100 + r)[0].size for r in range(6))
        n2 = sum(_spawn(0.01, seed=200 + r)[0].size for r in range(6))
        ratio = n1 / n2
        sigma = ratio * np.sqrt(1 / n1 + 1 / n2)
        assert abs(ratio - 2.0) < 3 * sigma + 0.1

    def test_signed_moments_vanish_in_expectation(self):
        sums = np.zeros(5)
        var = np.zeros(5)
        reps = 200
        for r in range(reps):
            x, v, s = _spawn(0.05, seed=300 + r, n_eff=3e-6)
            if x.size == 0:
                continue
            phi = np.stack([np.ones_like(s), s * v[:, 0], s * v[:, 1], s * v[:, 2],
                            0.5 * s * np.sum(v**2, axis=1)], axis=0)
            phi[0] = s
            m = phi.sum(axis=1)
            sums += m
            var += m**2
        mean = sums / reps
        sem = np.sqrt(np.maximum(var / reps - mean**2, 1e-30) / reps)
        assert np.all(np.abs(mean) <= 3 * sem + 1e-12)
