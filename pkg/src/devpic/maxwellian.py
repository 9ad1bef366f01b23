"""Maxwellian evaluation and sampling, the macro-micro projection, and the
polynomial-times-Maxwellian source machinery.

The transport operator applied to a local Maxwellian is M(v) times a cubic
polynomial in v; projecting out the collision-invariant part leaves a signed
source S(v) = P3(v) M(v) whose five moments vanish. New deviational particles
are drawn from |S| by rejection against an inflated Maxwellian envelope and
carry sign(P3).

All spatial derivatives are one-dimensional (d/dx); the polynomial container
keeps general 3-vector/matrix coefficient slots, so only the data is
restricted, not the algebra.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels

D_VEL = 3  # velocity-space dimension in the projection


def eval_M(moments, v) -> np.ndarray:
    """Local Maxwellian rho (2 pi T)^{-3/2} exp(-|v-u|^2 / 2T) at points v (N, 3)."""
    rho, u, T = moments
    if T <= 0:
        raise ValueError("temperature must be positive")
    v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
    w2 = np.sum((v - np.asarray(u, dtype=np.float64)) ** 2, axis=1)
    return rho * (2.0 * np.pi * T) ** -1.5 * np.exp(-w2 / (2.0 * T))


def sample_M(moments, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. velocities from the Maxwellian: u + sqrt(T) * xi, xi standard normal."""
    rho, u, T = moments
    if T <= 0:
        raise ValueError("temperature must be positive")
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    return np.asarray(u, dtype=np.float64) + np.sqrt(T) * rng.standard_normal((n, 3))


def stochastic_round(x: float, rng: np.random.Generator) -> int:
    """Unbiased integer realization of a nonnegative expectation."""
    lo = int(np.floor(x))
    return lo + int(rng.random() < (x - lo))


@dataclass
class ProjectionCoeffs:
    """Projection of a distribution onto span{M, (v-u)M, (|v-u|^2/T - d)M}.

    Holds the three bracketed moments (m0, m1, m2) of the projected function
    and evaluates Pi_M psi at velocity points.
    """

    rho: float
    u: np.ndarray
    T: float
    m0: float
    m1: np.ndarray
    m2: float

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
        w = v - self.u
        s = np.sum(w**2, axis=1) / self.T
        quad = self.m0 + (w @ self.m1) / self.T + (s - D_VEL) * self.m2 / (2.0 * D_VEL)
        return eval_M((self.rho, self.u, self.T), v) / self.rho * quad


def project_coeffs(M_moments, psi_moments) -> ProjectionCoeffs:
    """Projection operator for the given Maxwellian and bracketed psi moments.

    psi_moments = (<psi>, <(v-u_M) psi>, <(|v-u_M|^2/T_M - d) psi>) with d = 3.
    The five moments of the returned Pi_M psi equal the inputs exactly.
    """
    rho, u, T = M_moments
    if rho <= 0 or T <= 0:
        raise ValueError("degenerate Maxwellian moments")
    m0, m1, m2 = psi_moments
    return ProjectionCoeffs(rho=float(rho), u=np.asarray(u, dtype=np.float64), T=float(T),
                            m0=float(m0), m1=np.asarray(m1, dtype=np.float64), m2=float(m2))


@dataclass
class CubicVPoly:
    """Cubic velocity polynomial in the structured source-term form.

    P(v) = c0 + c1.w + c2 (s - 3) + v.(a + b (s - 3) + G w / T),
    with w = v - u and s = |w|^2 / T. One instance holds the coefficients of
    every cell: leading axis is the cell index.
    """

    u: np.ndarray   # (C, 3)
    T: np.ndarray   # (C,)
    c0: np.ndarray  # (C,)
    c1: np.ndarray  # (C, 3)
    c2: np.ndarray  # (C,)
    a: np.ndarray   # (C, 3)
    b: np.ndarray   # (C, 3)
    G: np.ndarray   # (C, 3, 3)

    @property
    def n_cells(self) -> int:
        return self.T.shape[0]

    def evaluate(self, v, k: int = 0) -> np.ndarray:
        """Evaluate cell k's polynomial at points v (N, 3)."""
        v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
        w = v - self.u[k]
        s = np.sum(w**2, axis=1) / self.T[k]
        cubic = self.a[k] + self.b[k][None, :] * (s - 3.0)[:, None]
        gw = w @ self.G[k].T
        return (self.c0[k] + w @ self.c1[k] + self.c2[k] * (s - 3.0)
                + np.sum(v * cubic, axis=1) + np.sum(v * gw, axis=1) / self.T[k])

    def pack(self) -> np.ndarray:
        """Flat (C, 24) coefficient layout consumed by the compiled kernels."""
        C = self.n_cells
        out = np.empty((C, 24))
        out[:, 0:3] = self.u
        out[:, 3] = self.T
        out[:, 4] = self.c0
        out[:, 5:8] = self.c1
        out[:, 8] = self.c2
        out[:, 9:12] = self.a
        out[:, 12:15] = self.b
        out[:, 15:24] = self.G.reshape(C, 9)
        return np.ascontiguousarray(out)


def periodic_gradient(f: np.ndarray, dx: float) -> np.ndarray:
    """Second-order central difference along axis 0 with periodic wrap."""
    return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * dx)


def transport_source_coeffs(gradients, moments, E, fd_divergence_moments) -> CubicVPoly:
    """Source polynomial for one cell: S(v) = -(I - Pi_M)(T M)(v) + Pi_M(T f_d)(v) = P3(v) M(v).

    gradients = (d_rho, d_u (3,), d_T), all d/dx; fd_divergence_moments is the
    x-divergence of the deviational flux moments (5,). Uses the closed-form
    projection moments of the transported Maxwellian:
    <TM> = d(rho u1)/dx, <(v-u)TM> = rho u1 du + (d(rho T) + rho E) e1,
    <(|v-u|^2/T - 3)TM> = (3 rho / T) u1 dT + 2 rho du1.
    """
    d_rho, d_u, d_T = gradients
    rho, u, T = moments
    return transport_source_coeffs_grid(
        np.atleast_1d(np.asarray(d_rho, dtype=float)),
        np.asarray(d_u, dtype=float).reshape(1, 3),
        np.atleast_1d(np.asarray(d_T, dtype=float)),
        (np.atleast_1d(np.asarray(rho, dtype=float)),
         np.asarray(u, dtype=float).reshape(1, 3),
         np.atleast_1d(np.asarray(T, dtype=float))),
        np.atleast_1d(np.asarray(E, dtype=float)),
        np.asarray(fd_divergence_moments, dtype=float).reshape(1, 5),
    )


def transported_maxwellian_moments(d_rho, d_u, d_T, moments, E):
    """Closed-form projection moments of the transported Maxwellian (1d-in-x):
    <TM> = d(rho u1)/dx,
    <(v-u) TM> = rho u1 du + (d(rho T)/dx + rho E) e1,
    <(|v-u|^2/T - 3) TM> = (3 rho / T) u1 dT + 2 rho du1.
    """
    rho, u, T = moments
    u1 = u[:, 0]
    m0 = u1 * d_rho + rho * d_u[:, 0]
    m1 = rho[:, None] * u1[:, None] * d_u
    m1[:, 0] += d_rho * T + rho * d_T + rho * E
    m2 = (3.0 * rho / T) * u1 * d_T + 2.0 * rho * d_u[:, 0]
    return m0, m1, m2


def transport_source_coeffs_grid(d_rho, d_u, d_T, moments, E, fd_div) -> CubicVPoly:
    """Vectorized source polynomials for all cells (arrays over the leading cell axis)."""
    rho, u, T = moments
    C = rho.shape[0]

    m0, m1, m2 = transported_maxwellian_moments(d_rho, d_u, d_T, moments, E)

    # projection moments of the transported deviation, from <phi T f_d> = d<v1 f_d phi>/dx
    m0 += fd_div[:, 0]
    m1 += fd_div[:, 1:4] - u * fd_div[:, 0:1]
    m2 += (2.0 * fd_div[:, 4] - 2.0 * np.sum(u * fd_div[:, 1:4], axis=1)
           + np.sum(u**2, axis=1) * fd_div[:, 0]) / T - 3.0 * fd_div[:, 0]

    # -(T M)/M contributes the cubic part; +Pi_M(...) the quadratic part
    a = np.zeros((C, 3))
    a[:, 0] = -d_rho / rho
    b = np.zeros((C, 3))
    b[:, 0] = -d_T / (2.0 * T)
    G = np.zeros((C, 3, 3))
    G[:, 0, :] = -d_u
    c1 = m1 / (rho * T)[:, None]
    c1[:, 0] -= E / T
    return CubicVPoly(u=u.copy(), T=T.copy(), c0=m0 / rho, c1=c1,
                      c2=m2 / (6.0 * rho), a=a, b=b, G=G)


# envelope sampler defaults: candidate temperature inflation and probe layout
ENVELOPE_KAPPA = 1.2
PROBE_POINTS_PER_AXIS = 21
PROBE_HALF_WIDTH = 5.0
ENVELOPE_SAFETY = 1.5


def _probe_offsets() -> np.ndarray:
    xi = np.linspace(-PROBE_HALF_WIDTH, PROBE_HALF_WIDTH, PROBE_POINTS_PER_AXIS)
    g = np.stack(np.meshgrid(xi, xi, xi, indexing="ij"), axis=-1).reshape(-1, 3)
    return np.ascontiguousarray(g)


_PROBE = _probe_offsets()


def envelope_constants(poly: CubicVPoly, kappa: float = ENVELOPE_KAPPA) -> np.ndarray:
    """Per-cell envelope constants C with |P3| M <= C M_kT.

    C = safety * max over a probe grid (u +- 5 sqrt(kappa T) per axis) of
    |P3(v)| M(v) / M_kT(v); zero when the polynomial vanishes on the probe.
    """
    mx = kernels.poly_probe_max(poly.pack(), _PROBE, kappa)
    return ENVELOPE_SAFETY * mx


def _accept_ratio(poly, k, v, T, kappa, c_env):
    """|P3| M / (C M_kT) at candidate points of cell k, plus the signs of P3."""
    p = poly.evaluate(v, k)
    w2 = np.sum((v - poly.u[k]) ** 2, axis=1)
    r = np.abs(p) * kappa**1.5 * np.exp(-(1.0 - 1.0 / kappa) * w2 / (2.0 * T))
    return r / c_env, np.sign(p)


def sample_signed_poly_maxwellian(poly: CubicVPoly, moments, scale: float, n_eff: float,
                                  rng: np.random.Generator, k: int = 0,
                                  kappa: float = ENVELOPE_KAPPA, c_env: float | None = None,
                                  balanced: bool = True):
    """Draw signed velocities from the source scale * P3(v) M(v) at weight n_eff.

    Candidates come from the inflated Maxwellian M_kT and are thinned with
    probability |P3| M / (C M_kT), so the accepted count is an unbiased
    realization of scale * integral(|P3| M) / n_eff: the envelope mass C rho
    times the running acceptance rate estimates the integral implicitly.
    Signs are sign(P3). In balanced mode the two signs are emitted with
    exactly equal counts (the positive-side count drives; extra negatives are
    drawn by rejection), so each batch carries zero signed mass exactly.

    Returns (velocities (N, 3), signs (N,)). A detected envelope violation
    (acceptance ratio > 1) enlarges C and redraws the batch, with a warning.
    """
    rho, u, T = moments
    if c_env is None:
        c_env = float(envelope_constants(poly, kappa)[k])
    if c_env <= 0.0 or scale <= 0.0:
        return np.empty((0, 3)), np.empty(0)

    for _attempt in range(12):
        n_cand = stochastic_round(c_env * rho * scale / n_eff, rng)
        if n_cand == 0:
            return np.empty((0, 3)), np.empty(0)
        v = u + np.sqrt(kappa * T) * rng.standard_normal((n_cand, 3))
        ratio, sign = _accept_ratio(poly, k, v, T, kappa, c_env)
        if np.max(ratio, initial=0.0) > 1.0:
            c_env *= 1.2 * float(np.max(ratio))
            warnings.warn("signed-poly envelope violated; constant enlarged and batch redrawn")
            continue
        acc = rng.random(n_cand) < ratio
        v, sign = v[acc], sign[acc]
        if not balanced:
            return v, sign
        vp, vn = v[sign > 0], v[sign < 0]
        n_pair = vp.shape[0]
        if vn.shape[0] >= n_pair:
            vn = vn[:n_pair]
        else:
            extra = _draw_one_sign(poly, k, (rho, u, T), kappa, c_env,
                                   n_pair - vn.shape[0], -1.0, rng)
            vn = np.concatenate([vn, extra])
        out_v = np.concatenate([vp, vn])
        out_s = np.concatenate([np.ones(n_pair), -np.ones(n_pair)])
        return out_v, out_s
    raise RuntimeError("signed-poly envelope failed to stabilize")


def _draw_one_sign(poly, k, moments, kappa, c_env, n_needed, want_sign, rng):
    """Rejection draws from one sign of the source until n_needed are accepted."""
    rho, u, T = moments
    got = []
    n = 0
    batch = max(64, 4 * n_needed)
    for _ in range(200):
        v = u + np.sqrt(kappa * T) * rng.standard_normal((batch, 3))
        ratio, sign = _accept_ratio(poly, k, v, T, kappa, c_env)
        acc = (rng.random(batch) < ratio) & (sign == want_sign)
        take = v[acc][: n_needed - n]
        if take.size:
            got.append(take)
            n += take.shape[0]
        if n >= n_needed:
            return np.concatenate(got)
        batch = min(4 * batch, 1 << 16)
    raise RuntimeError("one-signed rejection sampling failed to fill the batch")
