"""Collisionless substep: particle push, kinetic-flux fluid update of the
Maxwellian moments, and creation of deviational particles from the
transport source term.

The fluid solver is first-order kinetic flux-vector splitting: upwinded
half-Maxwellian fluxes in closed form (error functions), a central-difference
divergence of the deviational flux moments, and an explicit Euler field
source (0, -rho E, -rho u.E). The push is symplectic Euler (kick then
drift) with the cell-wise constant field frozen over the substep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from . import kernels
from .maxwellian import (
    periodic_gradient,
    sample_signed_poly_maxwellian,
    envelope_constants,
    transport_source_coeffs_grid,
)
from .phase import MomentField, Population, SpatialGrid, cell_of


class SimulationError(RuntimeError):
    """Unrecoverable solver state (negative temperature, broken constraint)."""


# CFL thermal speed factor: the kinetic flux tails are covered out to 4 sigma
CFL_THERMAL_FACTOR = 4.0


def push(pop: Population, E: np.ndarray, dt: float, grid: SpatialGrid, cells=None) -> None:
    """Advance particles with the cell-wise field: kick v1 by -E dt, then drift x.

    A negative dt applies drift-then-kick, i.e. the exact inverse map of the
    corresponding forward step (frozen field, no rewrap crossing assumed).
    cells, when given, must be the current cell indices of pop.x.
    """
    if len(pop) == 0:
        return
    if dt >= 0:
        if cells is None:
            cells = cell_of(pop.x, grid)
        kernels.kick_drift(pop.x, pop.v, E[cells], dt, grid.length)
    else:
        pop.x = grid.wrap(pop.x + pop.v[:, 0] * dt)
        pop.v[:, 0] -= E[cell_of(pop.x, grid)] * dt


@dataclass
class FluxSplitState:
    """Left/right-moving kinetic fluxes of (mass, momentum[3], energy) per cell."""

    plus: np.ndarray   # (C, 5) fluxes carried by v1 > 0
    minus: np.ndarray  # (C, 5) fluxes carried by v1 < 0

    @property
    def total(self) -> np.ndarray:
        return self.plus + self.minus


def kinetic_split_fluxes(mfield: MomentField) -> FluxSplitState:
    """Closed-form half-space moments of v1 M(v) phi(v), phi = 1, v, |v|^2/2."""
    rho, u, T = mfield.rho, mfield.u, mfield.T
    u1 = u[:, 0]
    z = u1 / np.sqrt(2.0 * T)
    a_plus = 0.5 * erfc(-z)
    a_minus = 0.5 * erfc(z)
    s0 = np.sqrt(T / (2.0 * np.pi)) * np.exp(-(u1**2) / (2.0 * T))

    def half(a_frac, s):
        # s = +s0 for the right-moving half, -s0 for the left-moving half
        m1 = rho * (u1 * a_frac + s)
        m2 = rho * ((u1**2 + T) * a_frac + u1 * s)
        m3 = rho * ((u1**3 + 3.0 * u1 * T) * a_frac + (u1**2 + 2.0 * T) * s)
        f = np.empty((rho.size, 5))
        f[:, 0] = m1
        f[:, 1] = m2
        f[:, 2] = u[:, 1] * m1
        f[:, 3] = u[:, 2] * m1
        f[:, 4] = 0.5 * m3 + 0.5 * (u[:, 1] ** 2 + u[:, 2] ** 2 + 2.0 * T) * m1
        return f

    return FluxSplitState(plus=half(a_plus, s0), minus=half(a_minus, -s0))


def conserved(mfield: MomentField) -> np.ndarray:
    """(rho, rho u, rho|u|^2/2 + 3 rho T/2) per cell."""
    U = np.empty((mfield.rho.size, 5))
    U[:, 0] = mfield.rho
    U[:, 1:4] = mfield.rho[:, None] * mfield.u
    U[:, 4] = 0.5 * mfield.rho * np.sum(mfield.u**2, axis=1) + 1.5 * mfield.rho * mfield.T
    return U


def primitive(U: np.ndarray) -> MomentField:
    rho = U[:, 0]
    if np.any(rho <= 0):
        raise SimulationError("fluid update produced nonpositive density")
    u = U[:, 1:4] / rho[:, None]
    T = (2.0 * U[:, 4] / rho - np.sum(u**2, axis=1)) / 3.0
    if np.any(T <= 0):
        raise SimulationError(
            "fluid update produced nonpositive temperature (CFL or statistics failure)"
        )
    return MomentField(rho=rho, u=u, T=T)


def fluid_update(mfield: MomentField, fd_flux: np.ndarray, E: np.ndarray,
                 dt: float, grid: SpatialGrid) -> MomentField:
    """One conservative step of the Maxwellian moments.

    Upwind interface fluxes F_{k+1/2} = F+(U_k) + F-(U_{k+1}) (periodic),
    central-difference divergence of the deviational flux moments fd_flux
    (shape (C, 5), from signed_flux_moments), and source (0, -rho E, -rho u.E).
    """
    split = kinetic_split_fluxes(mfield)
    interface = split.plus + np.roll(split.minus, -1, axis=0)  # F_{k+1/2}
    div_m = (interface - np.roll(interface, 1, axis=0)) / grid.dx
    div_d = periodic_gradient(fd_flux, grid.dx)

    src = np.zeros_like(div_m)
    src[:, 1] = -mfield.rho * E
    src[:, 4] = -mfield.rho * mfield.u[:, 0] * E

    U = conserved(mfield) - dt * (div_m + div_d) + dt * src
    return primitive(U)


def cfl_check(mfield: MomentField, dt: float, grid: SpatialGrid):
    """Max Courant number dt (|u1| + 4 sqrt(T)) / dx; ok when <= 1."""
    courant = dt * np.max(np.abs(mfield.u[:, 0]) + CFL_THERMAL_FACTOR * np.sqrt(mfield.T)) / grid.dx
    return float(courant), courant <= 1.0


def source_polynomials(mfield: MomentField, E: np.ndarray, fd_flux: np.ndarray,
                       grid: SpatialGrid):
    """Per-cell source polynomials P3 from the current moments, field and
    deviational flux moments (the same array the fluid update consumes)."""
    dx = grid.dx
    return transport_source_coeffs_grid(
        periodic_gradient(mfield.rho, dx),
        periodic_gradient(mfield.u, dx),
        periodic_gradient(mfield.T, dx),
        (mfield.rho, mfield.u, mfield.T),
        E,
        periodic_gradient(fd_flux, dx),
    )


def spawn_source_particles(mfield: MomentField, E: np.ndarray, fd_flux: np.ndarray,
                           dt: float, n_eff: float, grid: SpatialGrid, rng_for_cell,
                           balanced: bool = True):
    """Sample new signed particles from dt * S per cell; x uniform in the cell.

    rng_for_cell(k) must return the cell's generator. Returns (x, v, sign)
    arrays for the whole grid.
    """
    poly = source_polynomials(mfield, E, fd_flux, grid)
    c_env = envelope_constants(poly)
    xs, vs, ss = [], [], []
    scale = dt * grid.cell_volume
    for k in np.nonzero(c_env > 0)[0]:
        rng = rng_for_cell(int(k))
        v, s = sample_signed_poly_maxwellian(
            poly, (mfield.rho[k], mfield.u[k], mfield.T[k]), scale, n_eff, rng,
            k=int(k), c_env=float(c_env[k]), balanced=balanced,
        )
        if v.shape[0]:
            xs.append((k + rng.random(v.shape[0])) * grid.dx)
            vs.append(v)
            ss.append(s)
    if not xs:
        return np.empty(0), np.empty((0, 3)), np.empty(0)
    return np.concatenate(xs), np.concatenate(vs), np.concatenate(ss)
