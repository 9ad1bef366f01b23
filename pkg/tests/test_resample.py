import numpy as np
import pytest

from devpic.maxwellian import sample_M
from devpic.phase import MomentField, Population, SpatialGrid, cell_of
from devpic.resample import (
    GridEval,
    SpectralFd,
    VelocityBox,
    eval_fd,
    fit_box,
    fourier_reconstruct,
    new_coarse_effective_number,
    reconstruct_cell,
    resample_coarse,
    resample_deviational_cell,
    taylor_deposit,
    trigger_cells,
    velocity_moment,
)
from devpic.rng import stream


def direct_mode_sum(box, velocities, n_eff, modes):
    """Brute-force particle Fourier sum: the oracle for the fast FFT path."""
    xi = box.to_box(velocities)
    out = {}
    for k in modes:
        out[k] = n_eff * np.sum(np.exp(-1j * (xi @ np.asarray(k, dtype=float))))
    return out


class TestFitBox:
    def test_padding_arithmetic(self):
        corners = np.array([[-4.0, -4, -4], [4.0, 4, 4]])
        box = fit_box(corners, pad=0.05)
        assert np.allclose(box.half_width, 4.4)
        assert np.allclose(box.center, 0.0)

    def test_degenerate_axis_widened(self):
        box = fit_box(np.array([[1.0, 2.0, 3.0]]), thermal_width=1.0)
        assert np.all(box.half_width > 0)
        assert np.allclose(box.center, [1, 2, 3])

    def test_particles_strictly_inside(self, rng):
        v = rng.standard_normal((500, 3)) * 2
        box = fit_box(v)
        xi = box.to_box(v)
        assert xi.min() > 0 and xi.max() < 2 * np.pi


class TestTaylorDeposit:
    def test_particle_on_node(self):
        kt = 8
        h = 2 * np.pi / kt
        t = taylor_deposit(np.array([[h * 3, h * 2, h * 5]]), n_eff=1.0, ktilde=kt)
        flat = (3 * kt + 2) * kt + 5
        assert t.f0[flat] == 1.0
        assert t.f0.sum() == 1.0
        assert np.all(t.f1 == 0) and np.all(t.f2 == 0)

    def test_quarter_step_offset(self):
        kt = 8
        h = 2 * np.pi / kt
        t = taylor_deposit(np.array([[h * 3 + h / 4, h * 2, h * 5]]), n_eff=2.0, ktilde=kt)
        flat = (3 * kt + 2) * kt + 5
        assert t.f1[flat, 0] == pytest.approx(2.0 * h / 4)
        assert t.f2[flat, 0] == pytest.approx(2.0 * h**2 / 16)
        assert t.f1[flat, 1] == 0.0

    def test_mass_partition(self, rng):
        coords = rng.uniform(0, 2 * np.pi, (5000, 3))
        t = taylor_deposit(coords, n_eff=0.3, ktilde=12)
        assert t.f0.sum() == pytest.approx(0.3 * 5000)


class TestFourierReconstruct:
    def test_single_particle_at_origin(self):
        box = VelocityBox(center=np.zeros(3), half_width=np.ones(3))
        # box coordinate 0 corresponds to v = center - half_width
        tp = taylor_deposit(np.zeros((1, 3)), 1.0, 8)
        tn = taylor_deposit(np.empty((0, 3)), 1.0, 8)
        spec = fourier_reconstruct(tp, tn, K=3, box=box)
        k = np.fft.fftfreq(8, 1 / 8)
        live = np.abs(k) < 3
        assert np.allclose(spec.fhat_pos[np.ix_(live, live, live)], 1.0)
        assert np.allclose(spec.fhat_pos[~live, :, :], 0.0)

    def test_identical_clouds_cancel(self, rng):
        v = rng.standard_normal((1000, 3))
        spec = reconstruct_cell(v, v.copy(), 1e-3, K=6, ktilde=12, cell_volume=1.0)
        assert np.max(np.abs(spec.net_hat)) < 1e-12

    def test_fast_path_matches_direct_sum(self):
        # low modes vs brute force on a 1e5-particle Gaussian cloud
        rng = stream(40)
        n = 10**5
        v = rng.standard_normal((n, 3))
        n_eff = 1.0 / n
        both = fit_box(v)
        tp = taylor_deposit(both.to_box(v), n_eff, 60)
        tn = taylor_deposit(np.empty((0, 3)), n_eff, 60)
        spec = fourier_reconstruct(tp, tn, K=30, box=both)
        modes = [(0, 0, 0), (1, 0, 0), (0, 2, 0), (3, 0, 0), (1, 1, 1), (2, 3, 1)]
        direct = direct_mode_sum(both, v, n_eff, modes)
        kgrid = np.fft.fftfreq(60, 1 / 60).astype(int)
        idx = {int(k): i for i, k in enumerate(kgrid)}
        for k, target in direct.items():
            got = spec.fhat_pos[idx[k[0]], idx[k[1]], idx[k[2]]]
            assert abs(got - target) < 1e-4 * abs(direct[(0, 0, 0)])

    def test_low_mode_invariant_small_cloud(self):
        rng = stream(41)
        n = 10**4
        v = rng.standard_normal((n, 3)) * 1.2
        n_eff = 1.0 / n
        box = fit_box(v)
        tp = taylor_deposit(box.to_box(v), n_eff, 60)
        tn = taylor_deposit(np.empty((0, 3)), n_eff, 60)
        spec = fourier_reconstruct(tp, tn, K=30, box=box)
        modes = [(k1, k2, k3) for k1 in range(-3, 4) for k2 in (-2, 0, 2) for k3 in (0, 1)]
        direct = direct_mode_sum(box, v, n_eff, modes)
        kgrid = np.fft.fftfreq(60, 1 / 60).astype(int)
        idx = {int(k): i for i, k in enumerate(kgrid)}
        worst = max(
            abs(spec.fhat_pos[idx[k[0]], idx[k[1]], idx[k[2]]] - t) for k, t in direct.items()
        )
        assert worst <= 1e-3 * abs(direct[(0, 0, 0)])


class TestEvalFd:
    def test_zero_coefficients(self):
        box = VelocityBox(center=np.zeros(3), half_width=np.ones(3))
        kt = 8
        z = np.zeros((kt, kt, kt), dtype=complex)
        spec = SpectralFd(fhat_pos=z, fhat_neg=z.copy(), box=box, K=3, ktilde=kt,
                          cell_volume=1.0)
        assert np.allclose(eval_fd(spec, np.zeros((5, 3))), 0.0)

    def test_outside_box_is_zero(self, rng):
        v = rng.standard_normal((200, 3))
        spec = reconstruct_cell(v, v[:10], 1e-2, 6, 12, 1.0)
        far = np.full((3, 3), 50.0)
        assert np.all(eval_fd(spec, far) == 0.0)

    def test_gaussian_pair_low_moments(self):
        # T=2 minus T=1 pair: integral v1^2 f_d = 1 (5%), v1^4: 9 (10%)
        rng = stream(42)
        n = 10**5
        vp = np.sqrt(2.0) * rng.standard_normal((n, 3))
        vn = rng.standard_normal((n, 3))
        spec = reconstruct_cell(vp, vn, 1.0 / n, K=30, ktilde=60, cell_volume=1.0)
        assert velocity_moment(spec, (2, 0, 0)) == pytest.approx(1.0, rel=0.05)
        assert velocity_moment(spec, (4, 0, 0)) == pytest.approx(9.0, rel=0.10)

    def test_grid_taylor_converges_to_exact_sum(self):
        # the nearest-node Taylor evaluator agrees with the truncated sum to
        # O((|k| h / 2)^3): refining the grid at fixed cutoff K shrinks the gap
        rng = stream(43)
        v = rng.standard_normal((3000, 3))
        pts = 0.8 * rng.standard_normal((50, 3))
        gaps = {}
        for kt in (8, 16, 48):
            spec = reconstruct_cell(v, v[:100], 1e-3, K=4, ktilde=kt, cell_volume=1.0)
            exact = eval_fd(spec, pts)
            fast = GridEval(spec, "net")(spec.box.to_box(pts)) * spec.phys_scale
            gaps[kt] = np.max(np.abs(fast - exact)) / np.max(np.abs(exact))
        assert gaps[48] < 0.02
        assert gaps[48] < gaps[16] < gaps[8]


class TestResampleDeviational:
    def test_overlapping_clouds_cancel(self):
        rng = stream(44)
        n = 4 * 10**5
        vp = rng.standard_normal((n, 3))
        vn = rng.standard_normal((n, 3))
        newp, newn, _ = resample_deviational_cell(vp, vn, 1.0 / n, 6, 12, 1.0, stream(45))
        assert (len(newp) + len(newn)) < 0.05 * 2 * n

    def test_disjoint_clouds_keep_mass(self):
        # well-separated clouds wide enough for the cutoff to resolve them
        rng = stream(46)
        n = 10**5
        vp = 0.8 * rng.standard_normal((n, 3)) + np.array([3.0, 0, 0])
        vn = 0.8 * rng.standard_normal((n, 3)) - np.array([3.0, 0, 0])
        newp, newn, _ = resample_deviational_cell(vp, vn, 1.0 / n, 10, 20, 1.0, stream(47))
        assert abs(len(newp) - n) < 0.10 * n
        assert abs(len(newn) - n) < 0.10 * n

    def test_moments_preserved_within_mc(self):
        rng = stream(48)
        n = 10**5
        vp = np.sqrt(2.0) * rng.standard_normal((n, 3))
        vn = rng.standard_normal((n, 3))
        newp, newn, _ = resample_deviational_cell(vp, vn, 1.0 / n, 30, 60, 1.0, stream(49))
        for p, expect, tol in ((2, 1.0, 0.15), (4, 9.0, 4.0)):
            m = (np.sum(newp[:, 0] ** p) - np.sum(newn[:, 0] ** p)) / n
            assert m == pytest.approx(expect, abs=tol)


class TestTrigger:
    def test_no_violation_no_trigger(self):
        n_d = np.array([95, 10, 0])
        n_c = np.array([100, 100, 100])
        assert trigger_cells(n_d, n_c, 0.9).size == 0

    def test_violation_flags_near_full_cells(self):
        n_d = np.array([101, 95, 10])
        n_c = np.array([100, 100, 100])
        assert list(trigger_cells(n_d, n_c, 0.9)) == [0, 1]

    def test_beta_one_only_violators(self):
        n_d = np.array([101, 95, 10])
        n_c = np.array([100, 100, 100])
        assert list(trigger_cells(n_d, n_c, 1.0)) == [0]

    def test_monotone_in_beta(self, rng):
        n_d = rng.integers(0, 120, 50)
        n_c = rng.integers(1, 120, 50)
        hi = set(trigger_cells(n_d, n_c, 1.0))
        lo = set(trigger_cells(n_d, n_c, 0.9))
        assert hi <= lo


class TestCoarseResampling:
    def test_new_effective_number_arithmetic(self):
        n = new_coarse_effective_number(np.array([0.01]), np.array([500]), 1.1, 1e-5, "conform")
        assert n == pytest.approx(0.01 / 550)

    def test_conform_never_grows_population(self):
        # candidate below old: conform keeps the old effective number
        n = new_coarse_effective_number(np.array([0.01]), np.array([500]), 1.1, 1e-3, "conform")
        assert n == 1e-3

    def test_grow_only_shrinks_effective_number(self):
        n = new_coarse_effective_number(np.array([0.01]), np.array([500]), 1.1, 1e-3, "grow")
        assert n == pytest.approx(0.01 / 550)
        n2 = new_coarse_effective_number(np.array([0.01]), np.array([5]), 1.1, 1e-5, "grow")
        assert n2 == 1e-5

    def test_pure_maxwellian_redraw(self):
        grid = SpatialGrid(length=2.0, n_cells=2)
        mom = MomentField.uniform(2, rho=1.5, u=(0.3, 0, 0), T=0.8)
        pop, n_eff_c = resample_coarse(
            mom, [None, None], np.zeros(2, dtype=int), 1.1, 1e-4, "conform", grid,
            lambda k: stream(50, 0, 7, k),
        )
        assert n_eff_c == 1e-4
        assert len(pop) == pytest.approx(2 * 1.5 * 1.0 / 1e-4, rel=0.02)
        assert pop.v[:, 0].mean() == pytest.approx(0.3, abs=0.02)
        assert pop.v.var(axis=0).mean() == pytest.approx(0.8, rel=0.03)

    def test_constraint_holds_after_grow(self):
        rng = stream(51)
        grid = SpatialGrid(length=2.0, n_cells=2)
        mom = MomentField.uniform(2)
        n = 2000
        vp = rng.standard_normal((n, 3)) * 1.2
        vn = rng.standard_normal((n // 2, 3))
        specs = [reconstruct_cell(vp, vn, 1.0 / n, 8, 16, 1.0), None]
        n_d = np.array([n + n // 2, 0])
        pop, n_eff_c = resample_coarse(mom, specs, n_d, 1.1, 1.0, "grow", grid,
                                       lambda k: stream(52, 0, 7, k))
        counts = np.bincount(cell_of(pop.x, grid), minlength=2)
        assert counts[0] >= n_d[0]
