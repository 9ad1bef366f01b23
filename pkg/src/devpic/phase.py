"""Phase-space data model: periodic 1d spatial grid, particle storage,
cell bucketing and velocity-moment deposition.

Particles live in a 1d periodic box in x and carry full 3d velocities.
Storage is struct-of-arrays; per-cell views are produced once per step by
a stable sort on cell index (the numpy equivalent of per-cell buckets).
All per-cell operations consume these views, so they can run cell by cell
in any order; a single-threaded pass in ascending cell order is the
deterministic reference mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


class EmptyCellError(ValueError):
    """Raised when moments are requested from an empty velocity sample."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [0, length)."""

    length: float = 4.0 * np.pi
    n_cells: int = 400

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("grid needs at least 2 cells")
        if not self.length > 0:
            raise ValueError("grid length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def cell_volume(self) -> float:
        # 1d slab cells: |C_k| = dx
        return self.dx

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def wrap(self, x):
        return np.mod(x, self.length)


def cell_of(x, grid: SpatialGrid):
    """Cell index of position(s) x, after periodic wrap. Always in [0, n_cells).

    The wrap guards the x == length edge; scalar input gives a scalar index.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        k = int(np.mod(arr, grid.length) / grid.dx)
        return min(max(k, 0), grid.n_cells - 1)
    return kernels.cell_index(np.ascontiguousarray(arr), grid.length, grid.n_cells)


class Population:
    """A set of equally-weighted particles: positions x (N,), velocities v (N, 3)."""

    __slots__ = ("x", "v")

    def __init__(self, x=None, v=None):
        self.x = np.empty(0, dtype=np.float64) if x is None else np.asarray(x, dtype=np.float64)
        self.v = np.empty((0, 3), dtype=np.float64) if v is None else np.asarray(v, dtype=np.float64)
        if self.v.shape != (self.x.size, 3):
            raise ValueError("velocity array must have shape (N, 3)")

    def __len__(self) -> int:
        return self.x.size

    def append(self, x, v) -> None:
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            return
        self.x = np.concatenate([self.x, x])
        self.v = np.concatenate([self.v, np.asarray(v, dtype=np.float64).reshape(-1, 3)])

    def keep(self, mask) -> None:
        self.x = self.x[mask]
        self.v = self.v[mask]

    def copy(self) -> "Population":
        return Population(self.x.copy(), self.v.copy())


class CellIndex:
    """Bucketing of a population: counts per cell and a stable cell-sorted order.

    order[start[k]:start[k+1]] are indices of the particles in cell k.
    """

    __slots__ = ("cells", "order", "counts", "start")

    def __init__(self, pop: Population, grid: SpatialGrid):
        self.cells = cell_of(pop.x, grid)
        self.order = np.argsort(self.cells, kind="stable")
        self.counts = np.bincount(self.cells, minlength=grid.n_cells)
        self.start = np.concatenate([[0], np.cumsum(self.counts)])

    def in_cell(self, k: int) -> np.ndarray:
        return self.order[self.start[k]:self.start[k + 1]]


@dataclass
class CellStore:
    """Per-cell particle buckets for one simulation state.

    pos/neg are the positive and negative deviational clouds, coarse the
    unsigned coarse samples. n_eff is the fixed deviational effective
    number; n_eff_c the (time-dependent) coarse effective number.
    """

    grid: SpatialGrid
    pos: Population = field(default_factory=Population)
    neg: Population = field(default_factory=Population)
    coarse: Population = field(default_factory=Population)
    n_eff: float = 1.0
    n_eff_c: float = 1.0

    def dev_counts(self):
        """(N_p, N_n, N_c) per cell."""
        n_p = np.bincount(cell_of(self.pos.x, self.grid), minlength=self.grid.n_cells)
        n_n = np.bincount(cell_of(self.neg.x, self.grid), minlength=self.grid.n_cells)
        n_c = np.bincount(cell_of(self.coarse.x, self.grid), minlength=self.grid.n_cells)
        return n_p, n_n, n_c

    def signed_density(self) -> np.ndarray:
        """Deviational contribution to the cell densities: n_eff (N_p - N_n) / |C|."""
        n_p, n_n, _ = self.dev_counts()
        return self.n_eff * (n_p - n_n) / self.grid.cell_volume


@dataclass
class MomentField:
    """Per-cell Maxwellian moments: density rho, bulk velocity u (3,), temperature T."""

    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray

    @classmethod
    def uniform(cls, n_cells: int, rho=1.0, u=(0.0, 0.0, 0.0), T=1.0) -> "MomentField":
        return cls(
            rho=np.full(n_cells, float(rho)),
            u=np.tile(np.asarray(u, dtype=float), (n_cells, 1)),
            T=np.full(n_cells, float(T)),
        )

    def copy(self) -> "MomentField":
        return MomentField(self.rho.copy(), self.u.copy(), self.T.copy())

    def validate(self) -> None:
        if not (np.all(self.rho > 0) and np.all(self.T > 0)):
            raise ValueError("moment field degenerate: rho and T must stay positive")


def deposit_moments(velocities, weight: float, cell_volume: float):
    """Moments (rho, u, T) of one cell's velocity sample.

    rho = weight*N/volume, u the sample mean, T = weight*sum|v-u|^2/(3 rho volume).
    Raises EmptyCellError on an empty sample; a single particle yields T = 0
    (callers decide the degenerate-cell fallback).
    """
    v = np.asarray(velocities, dtype=np.float64).reshape(-1, 3)
    n = v.shape[0]
    if n == 0:
        raise EmptyCellError("no particles in cell")
    if weight <= 0:
        raise ValueError("weight must be positive")
    rho = weight * n / cell_volume
    u = v.mean(axis=0)
    spread = np.sum((v - u) ** 2)
    T = weight * spread / (3.0 * rho * cell_volume)
    return rho, u, T


def deposit_moments_grid(pop: Population, weight: float, grid: SpatialGrid, cells=None):
    """Vectorized per-cell moments of a whole population.

    Returns (MomentField, valid) where valid[k] is False for cells with
    fewer than 2 particles or zero velocity spread (T would degenerate);
    moment values in invalid cells are placeholders.
    """
    n_cells = grid.n_cells
    if cells is None:
        cells = cell_of(pop.x, grid)
    counts, sums, sq = kernels.cell_moments(cells, pop.v, n_cells)
    vol = grid.cell_volume
    rho = weight * counts / vol

    safe = np.maximum(counts, 1)
    u = sums / safe[:, None]
    spread = sq - np.sum(sums**2, axis=1) / safe
    with np.errstate(divide="ignore", invalid="ignore"):
        T = weight * spread / (3.0 * rho * vol)
    valid = (counts >= 2) & (spread > 0)
    T = np.where(valid, T, 1.0)
    return MomentField(rho=rho, u=u, T=T), valid


def signed_flux_moments(store: CellStore, grid: SpatialGrid) -> np.ndarray:
    """x-direction flux moments of f_d per cell: <v1 f_d phi> for phi = 1, v, |v|^2/2.

    Shape (n_cells, 5): columns [<v1 f_d>, <v1 v f_d> (3), <v1 |v|^2/2 f_d>],
    each n_eff/|C_k| * (sum over positives - sum over negatives).
    """
    out = np.zeros((grid.n_cells, 5))
    for pop, sgn in ((store.pos, 1.0), (store.neg, -1.0)):
        if len(pop) == 0:
            continue
        cells = cell_of(pop.x, grid)
        v1 = pop.v[:, 0]
        out[:, 0] += sgn * np.bincount(cells, weights=v1, minlength=grid.n_cells)
        for a in range(3):
            out[:, 1 + a] += sgn * np.bincount(
                cells, weights=v1 * pop.v[:, a], minlength=grid.n_cells
            )
        out[:, 4] += sgn * np.bincount(
            cells, weights=0.5 * v1 * np.sum(pop.v**2, axis=1), minlength=grid.n_cells
        )
    out *= store.n_eff / grid.cell_volume
    return out
