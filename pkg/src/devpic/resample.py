"""Particle-growth control: per-cell Fourier reconstruction of the deviation,
deviational resampling, trigger policy, and coarse-particle resampling.

Each cell's deviational particles are mapped into a padded bounding box
scaled to [0, 2pi]^3, deposited nearest-grid-point with first and second
Taylor moments, and turned into truncated Fourier coefficients by FFT:
fhat_k ~ fhat0_k - i k.fhat1_k - (1/2) k^T fhat2_k k, a second-order
approximation of the direct particle sum at cost O(N_d + Ktilde^3 log Ktilde).
New particles for each sign are drawn from the positive/negative parts of
the reconstructed net deviation by rejection against a per-node envelope.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from . import kernels
from .maxwellian import eval_M, stochastic_round
from .phase import MomentField, Population, SpatialGrid, cell_of

BOX_PAD = 0.05
DEGENERATE_AXIS_FRACTION = 1e-3
NODE_ENVELOPE_SAFETY = 1.3
COARSE_ENVELOPE_KAPPA = 1.5


@dataclass(frozen=True)
class VelocityBox:
    """Affine map between physical velocities and the [0, 2pi]^3 cube."""

    center: np.ndarray      # (3,)
    half_width: np.ndarray  # (3,)

    def to_box(self, v: np.ndarray) -> np.ndarray:
        return (np.asarray(v) - (self.center - self.half_width)) * (np.pi / self.half_width)

    def from_box(self, xi: np.ndarray) -> np.ndarray:
        return (self.center - self.half_width) + np.asarray(xi) * (self.half_width / np.pi)

    def contains(self, v: np.ndarray) -> np.ndarray:
        return np.all(np.abs(np.asarray(v) - self.center) <= self.half_width, axis=-1)

    @property
    def xi_jacobian(self) -> float:
        """d^3 xi / d^3 v."""
        return float(np.prod(np.pi / self.half_width))


def fit_box(velocities: np.ndarray, pad: float = BOX_PAD,
            thermal_width: float = 1.0) -> VelocityBox:
    """Padded axis-aligned bounding box of a cell's deviational velocities.

    Each side is expanded by pad * width; a degenerate (zero-width) axis is
    widened to a small fraction of the thermal width so the map stays
    invertible.
    """
    v = np.asarray(velocities, dtype=np.float64).reshape(-1, 3)
    if v.shape[0] == 0:
        raise ValueError("cannot fit a velocity box to an empty cell")
    lo, hi = v.min(axis=0), v.max(axis=0)
    width = hi - lo
    floor = DEGENERATE_AXIS_FRACTION * thermal_width
    width = np.maximum(width, floor)
    half = 0.5 * width * (1.0 + 2.0 * pad)
    return VelocityBox(center=0.5 * (lo + hi), half_width=half)


@dataclass
class GridTriple:
    """Taylor deposits of one signed cloud on the Ktilde^3 box grid."""

    f0: np.ndarray  # (K^3,)
    f1: np.ndarray  # (K^3, 3)
    f2: np.ndarray  # (K^3, 6), packed xx, yy, zz, xy, xz, yz
    ktilde: int


def taylor_deposit(box_coords: np.ndarray, n_eff: float, ktilde: int) -> GridTriple:
    """Deposit n_eff * (1, delta, delta delta^T) at each particle's nearest node."""
    if ktilde < 2:
        raise ValueError("need at least 2 grid points per axis")
    f0, f1, f2 = kernels.deposit_ngp(box_coords, n_eff, ktilde)
    return GridTriple(f0=f0, f1=f1, f2=f2, ktilde=ktilde)


def _wavenumbers(ktilde: int) -> np.ndarray:
    return np.fft.fftfreq(ktilde, d=1.0 / ktilde)


def _assemble_modes(triple: GridTriple, K: int) -> np.ndarray:
    """Second-order Taylor approximation of the particle Fourier sum.

    Returns the (Ktilde,)*3 complex mode array with every mode |k|_inf >= K
    zeroed.
    """
    kt = triple.ktilde
    shape = (kt, kt, kt)
    k = _wavenumbers(kt)
    k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij", sparse=True)

    fhat = np.fft.fftn(triple.f0.reshape(shape)).astype(np.complex128)
    for ka, a in zip((k1, k2, k3), range(3)):
        fhat -= 1j * ka * np.fft.fftn(triple.f1[:, a].reshape(shape))
    pairs = [(k1, k1, 0), (k2, k2, 1), (k3, k3, 2), (k1, k2, 3), (k1, k3, 4), (k2, k3, 5)]
    for ka, kb, col in pairs:
        w = 0.5 if col < 3 else 1.0  # off-diagonal terms appear twice in k^T f2 k
        fhat -= w * ka * kb * np.fft.fftn(triple.f2[:, col].reshape(shape))

    cut = np.abs(k) < K
    mask = cut[:, None, None] & cut[None, :, None] & cut[None, None, :]
    fhat[~mask] = 0.0
    return fhat


@dataclass
class SpectralFd:
    """Truncated Fourier representation of one cell's deviation, per sign."""

    fhat_pos: np.ndarray
    fhat_neg: np.ndarray
    box: VelocityBox
    K: int
    ktilde: int
    cell_volume: float

    @property
    def net_hat(self) -> np.ndarray:
        return self.fhat_pos - self.fhat_neg

    def node_values(self, which: str = "net") -> np.ndarray:
        """Reconstructed box-space density on the grid nodes (per unit xi^3,
        cell-integrated mass units)."""
        fhat = {"net": self.net_hat, "pos": self.fhat_pos, "neg": self.fhat_neg}[which]
        kt = self.ktilde
        return np.real(np.fft.ifftn(fhat)) * kt**3 / (2.0 * np.pi) ** 3

    @property
    def phys_scale(self) -> float:
        """Box-space density -> physical phase-space density f_d(v)."""
        return self.box.xi_jacobian / self.cell_volume


def fourier_reconstruct(triple_pos: GridTriple, triple_neg: GridTriple, K: int,
                        box: VelocityBox, cell_volume: float = 1.0) -> SpectralFd:
    """Fast Fourier coefficients of both signed clouds (cutoff |k|_inf < K)."""
    if K > triple_pos.ktilde:
        raise ValueError("cutoff K must not exceed the deposit grid size")
    return SpectralFd(
        fhat_pos=_assemble_modes(triple_pos, K),
        fhat_neg=_assemble_modes(triple_neg, K),
        box=box,
        K=K,
        ktilde=triple_pos.ktilde,
        cell_volume=cell_volume,
    )


def reconstruct_cell(v_pos: np.ndarray, v_neg: np.ndarray, n_eff: float, K: int,
                     ktilde: int, cell_volume: float, thermal_width: float = 1.0) -> SpectralFd:
    """Box fit + deposits + mode assembly for one cell's two clouds."""
    both = np.concatenate([v_pos.reshape(-1, 3), v_neg.reshape(-1, 3)])
    box = fit_box(both, thermal_width=thermal_width)
    tp = taylor_deposit(box.to_box(v_pos.reshape(-1, 3)), n_eff, ktilde)
    tn = taylor_deposit(box.to_box(v_neg.reshape(-1, 3)), n_eff, ktilde)
    return fourier_reconstruct(tp, tn, K, box, cell_volume)


def eval_fd(spec: SpectralFd, v: np.ndarray) -> np.ndarray:
    """Exact truncated Fourier sum at velocity points (physical density units).

    Points outside the box return 0 (compact support convention).
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
    inside = spec.box.contains(v)
    out = np.zeros(v.shape[0])
    if not np.any(inside):
        return out
    xi = spec.box.to_box(v[inside])
    k = _wavenumbers(spec.ktilde)
    live = np.abs(k) < spec.K
    kk = k[live]
    ph1 = np.exp(1j * np.outer(xi[:, 0], kk))
    ph2 = np.exp(1j * np.outer(xi[:, 1], kk))
    ph3 = np.exp(1j * np.outer(xi[:, 2], kk))
    modes = spec.net_hat[np.ix_(live, live, live)]
    acc = np.einsum("abc,pa,pb,pc->p", modes, ph1, ph2, ph3)
    out[inside] = np.real(acc) / (2.0 * np.pi) ** 3 * spec.phys_scale
    return out


class GridEval:
    """Fast evaluation of the reconstruction: values, gradient and Hessian on
    the nodes via inverse FFTs, then a second-order Taylor step off the
    nearest node (box-space density units)."""

    def __init__(self, spec: SpectralFd, which: str = "net"):
        fhat = {"net": spec.net_hat, "pos": spec.fhat_pos, "neg": spec.fhat_neg}[which]
        kt = spec.ktilde
        self.ktilde = kt
        self.h = 2.0 * np.pi / kt
        scale = kt**3 / (2.0 * np.pi) ** 3
        k = _wavenumbers(kt)
        k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij", sparse=True)
        self.val = np.real(np.fft.ifftn(fhat)) * scale
        self.grad = np.stack(
            [np.real(np.fft.ifftn(1j * ka * fhat)) * scale for ka in (k1, k2, k3)], axis=-1
        )
        self.hess = np.stack(
            [np.real(np.fft.ifftn(-ka * kb * fhat)) * scale
             for ka, kb in ((k1, k1), (k2, k2), (k3, k3), (k1, k2), (k1, k3), (k2, k3))],
            axis=-1,
        )

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.float64).reshape(-1, 3)
        node = np.round(xi / self.h).astype(np.int64)
        delta = xi - node * self.h
        node %= self.ktilde
        i, j, l = node[:, 0], node[:, 1], node[:, 2]
        g = self.grad[i, j, l]
        hh = self.hess[i, j, l]
        quad = (hh[:, 0] * delta[:, 0] ** 2 + hh[:, 1] * delta[:, 1] ** 2
                + hh[:, 2] * delta[:, 2] ** 2
                + 2.0 * (hh[:, 3] * delta[:, 0] * delta[:, 1]
                         + hh[:, 4] * delta[:, 0] * delta[:, 2]
                         + hh[:, 5] * delta[:, 1] * delta[:, 2]))
        return self.val[i, j, l] + np.sum(g * delta, axis=1) + 0.5 * quad


def velocity_moment(spec: SpectralFd, powers=(0, 0, 0)) -> float:
    """Grid quadrature of integral v1^p1 v2^p2 v3^p3 f_d dv (per unit x-volume)."""
    kt = spec.ktilde
    vals = spec.node_values("net")
    h = 2.0 * np.pi / kt
    xi_axis = np.arange(kt) * h
    v_axis = [spec.box.from_box(np.stack([xi_axis if a == b else np.zeros(kt)
                                          for b in range(3)], axis=-1))[:, a]
              for a in range(3)]
    w1 = v_axis[0] ** powers[0]
    w2 = v_axis[1] ** powers[1]
    w3 = v_axis[2] ** powers[2]
    total = np.einsum("ijl,i,j,l->", vals, w1, w2, w3) * h**3
    return float(total / spec.cell_volume)


def _node_envelope(values: np.ndarray) -> np.ndarray:
    """Piecewise-constant envelope: neighborhood node maxima times safety."""
    return NODE_ENVELOPE_SAFETY * maximum_filter(values, size=3, mode="wrap")


def _sample_signed_from_field(nodes: np.ndarray, taylor: GridEval, n_eff: float,
                              ktilde: int, rng: np.random.Generator):
    """Draw both signed clouds from the reconstructed net field.

    Candidates are placed by the shared piecewise-constant envelope of |f_d|
    and thinned with probability f_d+/envelope (resp. f_d-/envelope), so
    each accepted count is an unbiased realization of the corresponding
    rectified mass over n_eff: counts and shapes come from the same field,
    which keeps the net moments of the replacement unbiased. Returns the
    box-coordinate samples (xi_pos, xi_neg).
    """
    env = _node_envelope(np.abs(nodes))
    flat = env.ravel()
    csum = np.cumsum(flat)
    h = 2.0 * np.pi / ktilde
    env_mass = csum[-1] * h**3
    if env_mass <= 0:
        return np.empty((0, 3)), np.empty((0, 3))
    n_cand = stochastic_round(env_mass / n_eff, rng)
    if n_cand == 0:
        return np.empty((0, 3)), np.empty((0, 3))

    out_pos, out_neg = [], []
    for lo in range(0, n_cand, 1 << 18):
        m = min(1 << 18, n_cand - lo)
        pick = np.searchsorted(csum, rng.random(m) * csum[-1])
        node = np.stack(np.unravel_index(pick, (ktilde,) * 3), axis=-1)
        # no periodic wrap here: edge overhang stays local instead of
        # teleporting tail samples across the box
        xi = node * h + rng.uniform(-0.5 * h, 0.5 * h, size=(m, 3))
        f = taylor(xi)
        ratio = f / flat[pick]
        # candidates where the Taylor field overshoots the node envelope are
        # branched into floor+Bernoulli copies: unbiased for any ratio
        copies = np.floor(np.abs(ratio)).astype(np.int64)
        copies += rng.random(m) < (np.abs(ratio) - copies)
        rep = np.repeat(np.arange(m), copies)
        out_pos.append(xi[rep[ratio[rep] > 0]])
        out_neg.append(xi[rep[ratio[rep] < 0]])
    return np.concatenate(out_pos), np.concatenate(out_neg)


def resample_deviational_cell(v_pos: np.ndarray, v_neg: np.ndarray, n_eff: float,
                              K: int, ktilde: int, cell_volume: float,
                              rng: np.random.Generator, thermal_width: float = 1.0):
    """Replace one cell's deviational population by a fresh draw from the
    reconstructed net deviation.

    New positive particles come from max(f_d, 0), negative from max(-f_d, 0);
    counts realize the reconstructed signed masses at the cell's n_eff.
    Returns (new_v_pos, new_v_neg, spec). Both clouds may come back empty
    when the reconstruction cancels.
    """
    spec = reconstruct_cell(v_pos, v_neg, n_eff, K, ktilde, cell_volume, thermal_width)
    nodes = spec.node_values("net")
    taylor = GridEval(spec, "net")
    xi_pos, xi_neg = _sample_signed_from_field(nodes, taylor, n_eff, ktilde, rng)
    return spec.box.from_box(xi_pos), spec.box.from_box(xi_neg), spec


def trigger_cells(n_d: np.ndarray, n_c: np.ndarray, beta: float) -> np.ndarray:
    """Cells to resample: empty unless some cell violates N_c >= N_d, then all
    cells with N_d >= beta N_c (and at least one deviational particle)."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must be in (0, 1]")
    n_d = np.asarray(n_d)
    n_c = np.asarray(n_c)
    if not np.any(n_d > n_c):
        return np.empty(0, dtype=np.int64)
    return np.nonzero((n_d >= beta * n_c) & (n_d > 0))[0]


def new_coarse_effective_number(rho_mass: np.ndarray, n_d: np.ndarray, gamma: float,
                                old: float, mode: str) -> float:
    """Coarse effective number after resampling.

    candidate = min over cells with deviational particles of
    rho_M |C| / (gamma N_d). conform mode may only shrink the coarse
    population (max with old); grow mode may only enlarge it (min with old).
    """
    with np.errstate(divide="ignore"):
        per_cell = np.where(n_d > 0, rho_mass / (gamma * np.maximum(n_d, 1)), np.inf)
    candidate = float(np.min(per_cell))
    if not np.isfinite(candidate):
        return old
    if mode == "conform":
        return max(candidate, old)
    if mode == "grow":
        return min(candidate, old)
    raise ValueError(f"unknown coarse resampling mode {mode!r}")


MAXWELLIAN_ENVELOPE_SAFETY = 1.05


def _redraw_cell_coarse(moments, spec: SpectralFd | None, n_eff_c: float,
                        cell_volume: float, rng: np.random.Generator) -> np.ndarray:
    """Velocities from max(M + f_d, 0) at weight n_eff_c for one cell.

    Candidates come from a mixture envelope: an inflated Maxwellian
    (kappa = 1.5) covers the bulk, the piecewise-constant node envelope of
    |f_d| covers the deviation tails where the Maxwellian is negligible.
    Candidate-count thinning makes the accepted count an unbiased
    realization of cell mass / n_eff_c; envelope overshoot is branched into
    extra copies (unbiased) and reported when frequent.
    """
    from .maxwellian import sample_M  # local import avoids a module cycle

    rho, u, T = moments
    if spec is None:
        count = stochastic_round(rho * cell_volume / n_eff_c, rng)
        return sample_M(moments, count, rng)

    kappa = COARSE_ENVELOPE_KAPPA
    c_M = MAXWELLIAN_ENVELOPE_SAFETY * kappa**1.5
    kt = spec.ktilde
    h = 2.0 * np.pi / kt
    taylor = GridEval(spec, "net")
    env_nodes = _node_envelope(np.abs(spec.node_values("net"))) * spec.phys_scale
    env_flat = env_nodes.ravel()
    csum = np.cumsum(env_flat)
    # per-unit-x-volume masses of the two mixture components
    mass_M = c_M * rho
    mass_fd = csum[-1] * h**3 / spec.box.xi_jacobian
    n_cand = stochastic_round((mass_M + mass_fd) * cell_volume / n_eff_c, rng)
    if n_cand == 0:
        return np.empty((0, 3))

    def fd_at(v):
        out = np.zeros(v.shape[0])
        inside = spec.box.contains(v)
        if np.any(inside):
            out[inside] = taylor(spec.box.to_box(v[inside])) * spec.phys_scale
        return out

    def env_fd_at(v):
        out = np.zeros(v.shape[0])
        inside = spec.box.contains(v)
        if np.any(inside):
            xi = spec.box.to_box(v[inside])
            node = (np.floor(xi / h + 0.5).astype(np.int64)) % kt
            out[inside] = env_nodes[node[:, 0], node[:, 1], node[:, 2]]
        return out

    out = []
    overshoot = 0
    for lo in range(0, n_cand, 1 << 17):
        m = min(1 << 17, n_cand - lo)
        from_M = rng.random(m) < mass_M / (mass_M + mass_fd)
        n_M = int(np.sum(from_M))
        v = np.empty((m, 3))
        v[:n_M] = u + np.sqrt(kappa * T) * rng.standard_normal((n_M, 3))
        n_G = m - n_M
        if n_G:
            pick = np.searchsorted(csum, rng.random(n_G) * csum[-1])
            node = np.stack(np.unravel_index(pick, (kt,) * 3), axis=-1)
            xi = node * h + rng.uniform(-0.5 * h, 0.5 * h, size=(n_G, 3))
            v[n_M:] = spec.box.from_box(xi)
        target = np.maximum(eval_M(moments, v) + fd_at(v), 0.0)
        envelope = c_M * eval_M((rho, u, kappa * T), v) + env_fd_at(v)
        ratio = target / np.maximum(envelope, 1e-300)
        overshoot += int(np.sum(ratio > 1.0))
        copies = np.floor(ratio).astype(np.int64)
        copies += rng.random(m) < (ratio - copies)
        out.append(np.repeat(v, copies, axis=0))
    if overshoot > max(16, 0.01 * n_cand):
        warnings.warn(f"coarse resampling envelope overshot on {overshoot} of "
                      f"{n_cand} candidates (branched, unbiased)")
    return np.concatenate(out) if out else np.empty((0, 3))


def resample_coarse(mfield: MomentField, specs: list, n_d: np.ndarray, gamma: float,
                    old_n_eff_c: float, mode: str, grid: SpatialGrid,
                    rng_for_cell) -> tuple[Population, float]:
    """Redraw the whole coarse population from f = M + f_d with a fresh
    effective number (all cells share one weight, so this is a global phase).

    specs[k] is the cell's SpectralFd or None where no deviation exists.
    rng_for_cell(k) supplies per-cell generators. Returns the new population
    and effective number.
    """
    vol = grid.cell_volume
    n_eff_c = new_coarse_effective_number(mfield.rho * vol, n_d, gamma, old_n_eff_c, mode)
    xs, vs = [], []
    for k in range(grid.n_cells):
        rng = rng_for_cell(k)
        moments = (mfield.rho[k], mfield.u[k], mfield.T[k])
        v = _redraw_cell_coarse(moments, specs[k], n_eff_c, vol, rng)
        if v.shape[0] == 0:
            continue
        xs.append((k + rng.random(v.shape[0])) * grid.dx)
        vs.append(v)
    if xs:
        pop = Population(np.concatenate(xs), np.concatenate(vs))
    else:
        pop = Population()
    return pop, n_eff_c
