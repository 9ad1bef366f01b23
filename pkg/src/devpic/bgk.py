"""Relaxation (BGK) collision substep.

Hybrid form: deviational particles are thinned, the Maxwellian part is
untouched. Baseline DSMC form: a fraction of the full-particle population
gets velocities redrawn from the cell Maxwellian built on the cell's own
moments, so cell moments are preserved in expectation.

Removal probability per step: mu dt (forward Euler, needs mu dt <= 1) or
mu dt / (1 + mu dt) (backward Euler, unconditional). The backward-Euler
DSMC replacement fraction is the complement of the survival fraction
1/(1 + mu dt); anything else fails the dt -> 0 collisionless limit.
"""

from __future__ import annotations

import numpy as np

from .phase import MomentField, Population, SpatialGrid, cell_of


def removal_probability(mu: float, dt: float, scheme: str) -> float:
    if mu < 0 or dt <= 0:
        raise ValueError("need mu >= 0 and dt > 0")
    if scheme == "explicit":
        p = mu * dt
        if p > 1.0:
            raise ValueError(f"explicit relaxation needs mu*dt <= 1, got {p:g}")
        return p
    if scheme == "implicit":
        return mu * dt / (1.0 + mu * dt)
    raise ValueError(f"unknown scheme {scheme!r}")


def bgk_thin(pop: Population, mu: float, dt: float, scheme: str,
             rng: np.random.Generator) -> None:
    """Remove each particle independently with the per-step removal probability.

    Surviving particles keep their velocity and position untouched.
    """
    p = removal_probability(mu, dt, scheme)
    if len(pop) == 0 or p == 0.0:
        return
    pop.keep(rng.random(len(pop)) >= p)


def bgk_dsmc(pop: Population, mu: float, dt: float, mfield: MomentField,
             grid: SpatialGrid, scheme: str, rng: np.random.Generator,
             cells=None) -> None:
    """Replace each particle's velocity with a fresh Maxwellian draw, with the
    same per-step probability as bgk_thin. Particle count is unchanged.

    mfield must carry the cells' own deposited moments so that M shares the
    moments of f.
    """
    p = removal_probability(mu, dt, scheme)
    if len(pop) == 0 or p == 0.0:
        return
    hit = rng.random(len(pop)) < p
    if not np.any(hit):
        return
    hit_cells = cell_of(pop.x[hit], grid) if cells is None else cells[hit]
    u = mfield.u[hit_cells]
    T = mfield.T[hit_cells]
    pop.v[hit] = u + np.sqrt(T)[:, None] * rng.standard_normal((hit_cells.size, 3))
