"""Pure-numpy reference implementations of the hot kernels.

These define the semantics; the compiled extension reproduces them bit for
bit given the same inputs (randomness is drawn by the caller and passed in
as arrays).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def scatter_pairs(va, vb, delta, phi):
    """Elastic rotation of pair relative velocities.

    u = va - vb is rotated by the polar angle theta with tan(theta/2) = delta
    and azimuth phi; the center-of-mass velocity and |u| are preserved.
    Returns new (va', vb') arrays; pairs with u = 0 are left unchanged.
    """
    va = np.asarray(va, dtype=np.float64).reshape(-1, 3)
    vb = np.asarray(vb, dtype=np.float64).reshape(-1, 3)
    delta = np.asarray(delta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)

    u = va - vb
    ux, uy, uz = u[:, 0], u[:, 1], u[:, 2]
    umag = np.sqrt(ux**2 + uy**2 + uz**2)
    uperp = np.sqrt(ux**2 + uy**2)

    one = 1.0 + delta**2
    sin_t = 2.0 * delta / one
    omc = 2.0 * delta**2 / one  # 1 - cos(theta)
    sc = sin_t * np.cos(phi)
    ss = sin_t * np.sin(phi)

    du = np.empty_like(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        du[:, 0] = (ux * uz * sc - uy * umag * ss) / uperp - ux * omc
        du[:, 1] = (uy * uz * sc + ux * umag * ss) / uperp - uy * omc
    du[:, 2] = -uperp * sc - uz * omc
    # relative velocity along z: rotate about any perpendicular axis
    axial = uperp == 0.0
    if np.any(axial):
        du[axial, 0] = (umag * sc)[axial]
        du[axial, 1] = (umag * ss)[axial]
        du[axial, 2] = (-uz * omc)[axial]
    still = umag == 0.0
    if np.any(still):
        du[still] = 0.0

    return va + 0.5 * du, vb - 0.5 * du


def deposit_ngp(coords, n_eff, ktilde):
    """Nearest-grid-point Taylor deposit on the uniform [0, 2pi)^3 grid.

    Each particle adds n_eff * (1, delta, delta delta^T) at its nearest node,
    delta the signed offset to that node. Returns (f0 (K^3,), f1 (K^3, 3),
    f2 (K^3, 6)) with f2 packed as [xx, yy, zz, xy, xz, yz].
    """
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    h = 2.0 * np.pi / ktilde
    r = coords / h
    # half-away-from-zero, matching the compiled kernel tie-break
    near = np.where(r >= 0, np.floor(r + 0.5), np.ceil(r - 0.5)).astype(np.int64)
    delta = coords - h * near
    idx = near % ktilde
    flat = (idx[:, 0] * ktilde + idx[:, 1]) * ktilde + idx[:, 2]
    n_nodes = ktilde**3

    f0 = n_eff * np.bincount(flat, minlength=n_nodes).astype(np.float64)
    f1 = np.empty((n_nodes, 3))
    for a in range(3):
        f1[:, a] = n_eff * np.bincount(flat, weights=delta[:, a], minlength=n_nodes)
    f2 = np.empty((n_nodes, 6))
    for col, (a, b) in enumerate([(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]):
        f2[:, col] = n_eff * np.bincount(
            flat, weights=delta[:, a] * delta[:, b], minlength=n_nodes
        )
    return f0, f1, f2


def cell_index(x, length, n_cells):
    """Periodic wrap + floor to cell indices in one pass."""
    x = np.asarray(x, dtype=np.float64)
    k = np.floor(np.mod(x, length) * (n_cells / length)).astype(np.int64)
    return np.clip(k, 0, n_cells - 1)


def cell_moments(cells, v, n_cells):
    """Per-cell count, velocity sum and |v|^2 sum in one logical pass."""
    counts = np.bincount(cells, minlength=n_cells)
    vsum = np.stack(
        [np.bincount(cells, weights=v[:, a], minlength=n_cells) for a in range(3)], axis=1
    )
    v2sum = np.bincount(cells, weights=np.einsum("ij,ij->i", v, v), minlength=n_cells)
    return counts, vsum, v2sum


def kick_drift(x, v, E_cells, dt, length):
    """In-place symplectic Euler push: v1 -= E dt, then x += v1 dt (wrapped).

    E_cells is the field already gathered onto the particles.
    """
    v[:, 0] -= E_cells * dt
    x += v[:, 0] * dt
    np.mod(x, length, out=x)


def poly_probe_max(packed, xi, kappa):
    """Per-cell max over probe offsets of |P3(v)| M(v) / M_kT(v).

    packed is the (C, 24) coefficient layout of CubicVPoly.pack(); xi the
    probe offsets (P, 3) in units of sqrt(kappa T) about u. The ratio equals
    |P3| kappa^{3/2} exp(-(kappa - 1) |xi|^2 / 2).
    """
    packed = np.asarray(packed, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    C = packed.shape[0]
    gauss = kappa**1.5 * np.exp(-(kappa - 1.0) * np.sum(xi**2, axis=1) / 2.0)
    out = np.empty(C)
    chunk = max(1, int(4.0e6 // max(xi.shape[0], 1)))
    for lo in range(0, C, chunk):
        hi = min(lo + chunk, C)
        p = packed[lo:hi]
        u = p[:, 0:3][:, None, :]
        T = p[:, 3][:, None]
        w = np.sqrt(kappa) * np.sqrt(T)[..., None] * xi[None, :, :]  # v - u
        v = u + w
        s = np.sum(w**2, axis=2) / T
        sm3 = s - 3.0
        val = (p[:, 4][:, None] + np.einsum("cpa,ca->cp", w, p[:, 5:8])
               + p[:, 8][:, None] * sm3
               + np.einsum("cpa,ca->cp", v, p[:, 9:12])
               + np.einsum("cpa,ca->cp", v, p[:, 12:15]) * sm3
               + np.einsum("cpa,cab,cpb->cp", v, p[:, 15:24].reshape(-1, 3, 3), w) / T)
        out[lo:hi] = np.max(np.abs(val) * gauss[None, :], axis=1)
    return out
