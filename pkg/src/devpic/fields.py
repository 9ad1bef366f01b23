"""Periodic 1d Poisson solve for the electric field, and the field-energy diagnostic.

The field equation -dE/dx = rho is only solvable on a periodic domain when
the right side has zero mean, so the spatial mean density is subtracted
(fixed neutralizing background). The solve is spectral: exact for
band-limited densities, and the output E has zero mean (gauge fixing).
E is used piecewise-constant per cell by the particle push.
"""

from __future__ import annotations

import numpy as np

from .phase import SpatialGrid


def solve_poisson(rho, grid: SpatialGrid) -> np.ndarray:
    """Solve -dE/dx = rho - mean(rho) on the periodic grid; returns zero-mean E per cell."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (grid.n_cells,):
        raise ValueError("rho must have one value per cell")
    if not np.all(np.isfinite(rho)):
        raise ValueError("rho must be finite")
    rho_hat = np.fft.rfft(rho - rho.mean())
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n_cells, d=grid.dx)
    E_hat = np.zeros_like(rho_hat)
    # ik E_hat = -rho_hat  =>  E_hat = i rho_hat / k   (k = 0 mode gauged to zero)
    E_hat[1:] = 1j * rho_hat[1:] / k[1:]
    return np.fft.irfft(E_hat, n=grid.n_cells)


def lowpass_modes(f: np.ndarray, k_keep: int) -> np.ndarray:
    """Zero all spatial Fourier modes with index above k_keep (axis 0).

    Deposited particle moments carry white counting noise across every
    spatial mode; the physics of the damping problem lives in the first few.
    """
    if k_keep <= 0:
        return f
    fh = np.fft.rfft(f, axis=0)
    if fh.shape[0] > k_keep + 1:
        fh[k_keep + 1:] = 0.0
    return np.fft.irfft(fh, n=f.shape[0], axis=0)


def electric_energy(E, grid: SpatialGrid) -> float:
    """||E||^2 = dx * sum_k E_k^2."""
    E = np.asarray(E, dtype=np.float64)
    return float(grid.dx * np.sum(E**2))
