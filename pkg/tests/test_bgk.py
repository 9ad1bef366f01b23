import numpy as np
import pytest

from devpic.bgk import bgk_dsmc, bgk_thin, removal_probability
from devpic.phase import MomentField, Population, SpatialGrid, deposit_moments_grid
from devpic.rng import stream


class TestRemovalProbability:
    def test_explicit(self):
        assert removal_probability(1.0, 0.1, "explicit") == pytest.approx(0.1)

    def test_implicit(self):
        assert removal_probability(1.0, 0.1, "implicit") == pytest.approx(1.0 / 11.0)

    def test_explicit_stability_limit(self):
        with pytest.raises(ValueError):
            removal_probability(10.0, 0.2, "explicit")

    def test_implicit_strong_collisions(self):
        assert removal_probability(10.0, 0.2, "implicit") == pytest.approx(2.0 / 3.0)


def _pop(n, rng):
    return Population(rng.uniform(0, 2, n), rng.standard_normal((n, 3)))


class TestThin:
    def test_survivors_unchanged(self, rng):
        pop = _pop(2000, rng)
        x0, v0 = pop.x.copy(), pop.v.copy()
        bgk_thin(pop, 1.0, 0.1, "explicit", stream(1))
        # every survivor is present in the original arrays, untouched
        idx = {(round(x, 12)): i for i, x in enumerate(x0)}
        for x, v in zip(pop.x, pop.v):
            assert np.array_equal(v, v0[idx[round(x, 12)]])

    def test_decay_envelope(self):
        # mean survival over 200 trials within 3 sigma of (0.9)^n
        n0, steps, trials = 2000, 15, 200
        counts = np.zeros((trials, steps + 1))
        for tr in range(trials):
            pop = Population(np.random.default_rng(tr).uniform(0, 2, n0),
                             np.zeros((n0, 3)))
            counts[tr, 0] = n0
            for n in range(1, steps + 1):
                bgk_thin(pop, 1.0, 0.1, "explicit", stream(tr, n))
                counts[tr, n] = len(pop)
        mean = counts.mean(axis=0)
        n = np.arange(steps + 1)
        expect = n0 * 0.9**n
        sigma = np.sqrt(n0 * 0.9**n * (1 - 0.9**n) / trials)
        assert np.all(np.abs(mean - expect) <= 3 * sigma + 1e-9)

    def test_implicit_probability_used(self):
        # mu dt = 1 implicit: removal probability 1/2
        n0, trials = 4000, 50
        survived = 0
        for tr in range(trials):
            pop = Population(np.zeros(n0), np.zeros((n0, 3)))
            bgk_thin(pop, 10.0, 0.1, "implicit", stream(500 + tr))
            survived += len(pop)
        frac = survived / (n0 * trials)
        assert frac == pytest.approx(1 / 2, abs=3 * np.sqrt(0.25 / (n0 * trials)))


class TestDsmc:
    def test_count_preserved(self, rng):
        grid = SpatialGrid(length=2.0, n_cells=2)
        pop = _pop(5000, rng)
        mf = MomentField.uniform(2)
        bgk_dsmc(pop, 1.0, 0.5, mf, grid, "explicit", stream(2))
        assert len(pop) == 5000

    def test_zero_rate_noop(self, rng):
        grid = SpatialGrid(length=2.0, n_cells=2)
        pop = _pop(100, rng)
        v0 = pop.v.copy()
        bgk_dsmc(pop, 0.0, 0.5, MomentField.uniform(2), grid, "explicit", stream(3))
        assert np.array_equal(pop.v, v0)

    def test_full_replacement_preserves_moments(self, rng):
        # p = 1: every velocity redrawn from the cell's own deposited moments
        grid = SpatialGrid(length=2.0, n_cells=2)
        pop = Population(rng.uniform(0, 2, 200000),
                         rng.standard_normal((200000, 3)) * 1.3 + np.array([0.5, 0, 0]))
        mf, _ = deposit_moments_grid(pop, 1e-5, grid)
        rho0, u0, T0 = mf.rho.copy(), mf.u.copy(), mf.T.copy()
        bgk_dsmc(pop, 10.0, 0.1, mf, grid, "explicit", stream(4))
        mf1, _ = deposit_moments_grid(pop, 1e-5, grid)
        assert np.allclose(mf1.rho, rho0)
        assert np.allclose(mf1.u, u0, atol=0.02)
        assert np.allclose(mf1.T, T0, rtol=0.02)

    def test_bimodal_relaxes_to_gaussian(self):
        # excess kurtosis of v1 climbs from bimodal (-2) toward 0
        grid = SpatialGrid(length=2.0, n_cells=2)
        n = 40000
        rng0 = np.random.default_rng(7)
        v = np.zeros((n, 3))
        v[: n // 2, 0] = 2.0
        v[n // 2:, 0] = -2.0
        v += 0.05 * rng0.standard_normal((n, 3))
        pop = Population(rng0.uniform(0, 2, n), v)

        def excess_kurtosis():
            w = pop.v[:, 0] - pop.v[:, 0].mean()
            return np.mean(w**4) / np.mean(w**2) ** 2 - 3.0

        track = [excess_kurtosis()]
        for step in range(1, 101):
            mf, _ = deposit_moments_grid(pop, 1e-5, grid)
            bgk_dsmc(pop, 1.0, 0.1, mf, grid, "explicit", stream(5, step))
            if step in (25, 50, 100):
                track.append(excess_kurtosis())
        assert track[0] < -1.5
        assert all(b > a for a, b in zip(track, track[1:]))
        assert abs(track[-1]) < 0.3
