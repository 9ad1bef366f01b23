"""Coulomb collision substep: pairwise grazing-collision Monte Carlo.

Pairs scatter by an elastic rotation of their relative velocity with
tan(theta/2) drawn Gaussian with variance s/2, s = A dt rho_cell / u^3
(the cumulative small-angle kernel argument; E[1 - cos theta] ~ s for
small s). rho_cell carries the local physical density so that one
collision per particle per step reproduces the local collision rate.

Three uses: coarse-coarse (full pairing per cell, exactly conservative),
deviational-coarse (only the deviational side moves), and the Maxwellian
recoil source, emitted as near-canceling signed pairs compressed by a
displacement-weighted Russian roulette.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .phase import MomentField, Population, SpatialGrid, cell_of


@dataclass(frozen=True)
class ScatterParams:
    """Coulomb coefficient and step size; the per-pair kernel argument is
    s = A dt rho / u^3."""

    A: float
    dt: float

    def s_of(self, u: np.ndarray, rho) -> np.ndarray:
        s = np.zeros_like(u)
        np.divide(self.A * self.dt * rho, u**3, out=s, where=u > 0)
        return s


def bn_scatter(v, w, s, rng: np.random.Generator):
    """Scatter pairs (v, w) with kernel argument(s) s; returns (v', w').

    Center-of-mass velocity and relative speed are preserved exactly;
    pairs with zero relative velocity are untouched.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
    w = np.asarray(w, dtype=np.float64).reshape(-1, 3)
    n = v.shape[0]
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (n,))
    delta = rng.standard_normal(n) * np.sqrt(0.5 * s)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return kernels.scatter_pairs(v, w, delta, phi)


def disjoint_pairs(cells: np.ndarray, n_cells: int, rng: np.random.Generator):
    """Random disjoint pairing within each cell; the odd particle idles.

    Returns index arrays (ia, ib) into the original particle order.
    """
    r = rng.random(cells.size)
    order = np.lexsort((r, cells))
    cs = cells[order]
    counts = np.bincount(cs, minlength=n_cells)
    start = np.concatenate([[0], np.cumsum(counts)])
    pos = np.arange(cells.size) - start[cs]
    first = (pos % 2 == 0) & (pos + 1 < counts[cs])
    return order[first], order[np.nonzero(first)[0] + 1]


def partner_pairs(dev_cells: np.ndarray, coarse_cells: np.ndarray, n_cells: int,
                  rng: np.random.Generator):
    """A distinct coarse partner for every deviational particle, cell by cell.

    Sampling is without replacement, which requires N_c >= N_d in every
    cell; a violation raises ConstraintViolation (the driver's resampling
    trigger handles it).
    """
    c_counts = np.bincount(coarse_cells, minlength=n_cells)
    d_counts = np.bincount(dev_cells, minlength=n_cells)
    if np.any(d_counts > c_counts):
        bad = int(np.argmax(d_counts - c_counts))
        raise ConstraintViolation(
            f"cell {bad}: {d_counts[bad]} deviational vs {c_counts[bad]} coarse particles"
        )
    r = rng.random(coarse_cells.size)
    c_order = np.lexsort((r, coarse_cells))
    c_start = np.concatenate([[0], np.cumsum(c_counts)])
    d_order = np.argsort(dev_cells, kind="stable")
    d_sorted = dev_cells[d_order]
    d_start = np.concatenate([[0], np.cumsum(d_counts)])
    rank = np.arange(dev_cells.size) - d_start[d_sorted]
    return d_order, c_order[c_start[d_sorted] + rank]


class ConstraintViolation(RuntimeError):
    """Coarse-particle constraint N_c >= N_d failed in some cell."""


def ta_collide(pop: Population, rho_cell: np.ndarray, params: ScatterParams,
               grid: SpatialGrid, rng: np.random.Generator, cells=None) -> None:
    """One collision step on an unsigned population: disjoint random pairs in
    every cell, both partners updated. Momentum and energy of each cell are
    conserved exactly (pairwise elastic)."""
    if len(pop) < 2:
        return
    if cells is None:
        cells = cell_of(pop.x, grid)
    ia, ib = disjoint_pairs(cells, grid.n_cells, rng)
    if ia.size == 0:
        return
    va, vb = pop.v[ia], pop.v[ib]
    u = np.linalg.norm(va - vb, axis=1)
    s = params.s_of(u, rho_cell[cells[ia]])
    va2, vb2 = bn_scatter(va, vb, s, rng)
    pop.v[ia] = va2
    pop.v[ib] = vb2


def ta_collide_cell(velocities: np.ndarray, rho: float, params: ScatterParams,
                    rng: np.random.Generator) -> np.ndarray:
    """Single-cell form of ta_collide: returns the updated velocity array."""
    v = np.array(velocities, dtype=np.float64).reshape(-1, 3)
    if v.shape[0] < 2:
        return v
    pop = Population(np.full(v.shape[0], 0.5), v)
    grid = SpatialGrid(length=1.0, n_cells=2)
    ta_collide(pop, np.full(2, rho), params, grid, rng)
    return pop.v


def fd_fc_collide(dev_v: np.ndarray, dev_cells: np.ndarray, coarse_v: np.ndarray,
                  coarse_cells: np.ndarray, rho_cell: np.ndarray, params: ScatterParams,
                  n_cells: int, rng: np.random.Generator) -> None:
    """Scatter every deviational particle off a distinct coarse partner.

    Only the deviational velocities are updated in place (the operator is
    the change of f_d due to collisions with f); the coarse array is never
    written and the deviational count never changes.
    """
    if dev_v.shape[0] == 0:
        return
    d_idx, c_idx = partner_pairs(dev_cells, coarse_cells, n_cells, rng)
    va, vb = dev_v[d_idx], coarse_v[c_idx]
    u = np.linalg.norm(va - vb, axis=1)
    s = params.s_of(u, rho_cell[dev_cells[d_idx]])
    va2, _ = bn_scatter(va, vb, s, rng)
    dev_v[d_idx] = va2


def sample_delta_m(dev_v: np.ndarray, dev_sign: np.ndarray, dev_cells: np.ndarray,
                   mfield: MomentField, rho_cell: np.ndarray, params: ScatterParams,
                   eps_v: np.ndarray, grid: SpatialGrid, rng: np.random.Generator):
    """Signed particles from the Maxwellian recoil term of the collision step.

    For each deviational particle (w, sign): draw a partner v from the cell
    Maxwellian, scatter the pair, and emit {(v', +sign), (v, -sign)} whose
    expectation is the exact recoil measure. The pair is nearly canceling
    (|v' - v| = O(sqrt(s))), so it is kept only with probability
    min(1, (|v' - v| / eps_v)^2): the survivor count is O(dt N_d) and the
    discarded grazing content is a knob-controlled bias that vanishes as
    eps_v -> 0 (at the cost of O(N_d) particles per step).

    eps_v is per cell. Returns (x, v, sign) arrays of the survivors; both
    members of a kept pair, with x uniform in the source cell.
    """
    n = dev_v.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 3)), np.empty(0)
    u_M = mfield.u[dev_cells]
    T = mfield.T[dev_cells]
    partners = u_M + np.sqrt(T)[:, None] * rng.standard_normal((n, 3))
    umag = np.linalg.norm(partners - dev_v, axis=1)
    s = params.s_of(umag, rho_cell[dev_cells])
    scattered, _ = bn_scatter(partners, dev_v, s, rng)

    d = np.linalg.norm(scattered - partners, axis=1)
    q = np.minimum(1.0, (d / eps_v[dev_cells]) ** 2)
    keep = rng.random(n) < q
    if not np.any(keep):
        return np.empty(0), np.empty((0, 3)), np.empty(0)

    cells = dev_cells[keep]
    sgn = dev_sign[keep]
    v_out = np.concatenate([scattered[keep], partners[keep]])
    s_out = np.concatenate([sgn, -sgn])
    cell_out = np.concatenate([cells, cells])
    x_out = (cell_out + rng.random(cell_out.size)) * grid.dx
    return x_out, v_out, s_out
