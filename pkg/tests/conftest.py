import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def gauss_hermite_3d(n_nodes: int = 16):
    """Tensor Gauss-Hermite rule for E[f(xi)] with xi ~ N(0, I_3).

    Returns (points (M, 3), weights (M,)); exact for polynomials up to
    degree 2 n_nodes - 1 per axis.
    """
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / np.sqrt(2.0 * np.pi)
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    wts = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    return pts, wts


def maxwellian_expectation(fn, moments, n_nodes: int = 16):
    """integral fn(v) M(v) dv by exact Gaussian quadrature."""
    rho, u, T = moments
    pts, wts = gauss_hermite_3d(n_nodes)
    v = np.asarray(u) + np.sqrt(T) * pts
    return rho * float(np.sum(wts * fn(v)))
