import numpy as np
import pytest

from devpic.kernels import _numpy_impl

cy = pytest.importorskip("devpic.kernels._cy_impl", reason="compiled extension not built")


@pytest.fixture
def data(rng):
    n = 20000
    return {
        "va": rng.standard_normal((n, 3)),
        "vb": rng.standard_normal((n, 3)) + 0.3,
        "delta": 0.05 * rng.standard_normal(n),
        "phi": rng.uniform(0, 2 * np.pi, n),
        "coords": rng.uniform(0, 2 * np.pi, (n, 3)),
        "x": rng.uniform(0, 4 * np.pi, n),
        "v": rng.standard_normal((n, 3)),
    }


class TestBackendParity:
    def test_scatter_pairs(self, data):
        a1, b1 = _numpy_impl.scatter_pairs(data["va"], data["vb"], data["delta"], data["phi"])
        a2, b2 = cy.scatter_pairs(data["va"], data["vb"], data["delta"], data["phi"])
        assert np.allclose(a1, a2, atol=1e-13)
        assert np.allclose(b1, b2, atol=1e-13)

    def test_scatter_axial_and_still_pairs(self):
        va = np.array([[0.0, 0, 1.0], [1.0, 2.0, 3.0]])
        vb = np.array([[0.0, 0, -1.0], [1.0, 2.0, 3.0]])
        d = np.array([0.3, 0.3])
        p = np.array([1.0, 1.0])
        a1, b1 = _numpy_impl.scatter_pairs(va, vb, d, p)
        a2, b2 = cy.scatter_pairs(va, vb, d, p)
        assert np.allclose(a1, a2, atol=1e-14)
        assert np.array_equal(a1[1], va[1])  # zero relative velocity: untouched

    def test_deposit_ngp(self, data):
        r1 = _numpy_impl.deposit_ngp(data["coords"], 1e-4, 16)
        r2 = cy.deposit_ngp(data["coords"], 1e-4, 16)
        for a, b in zip(r1, r2):
            assert np.allclose(a, b, atol=1e-15)

    def test_cell_index(self, data):
        a = _numpy_impl.cell_index(data["x"], 4 * np.pi, 37)
        b = cy.cell_index(data["x"], 4 * np.pi, 37)
        assert np.array_equal(a, b)

    def test_cell_index_negative_positions(self):
        x = np.array([-0.01, -5.0, 13.0, 4 * np.pi])
        a = _numpy_impl.cell_index(x, 4 * np.pi, 400)
        b = cy.cell_index(x, 4 * np.pi, 400)
        assert np.array_equal(a, b)
        assert a[0] == 399

    def test_cell_moments(self, data):
        cells = _numpy_impl.cell_index(data["x"], 4 * np.pi, 25)
        r1 = _numpy_impl.cell_moments(cells, data["v"], 25)
        r2 = cy.cell_moments(cells, data["v"], 25)
        for a, b in zip(r1, r2):
            assert np.allclose(a, b, atol=1e-12)

    def test_kick_drift(self, data):
        cells = _numpy_impl.cell_index(data["x"], 4 * np.pi, 25)
        E = np.sin(np.arange(25.0))
        x1, v1 = data["x"].copy(), data["v"].copy()
        x2, v2 = data["x"].copy(), data["v"].copy()
        _numpy_impl.kick_drift(x1, v1, E[cells], 0.01, 4 * np.pi)
        cy.kick_drift(x2, v2, E[cells], 0.01, 4 * np.pi)
        assert np.allclose(x1, x2, atol=1e-13)
        assert np.allclose(v1, v2, atol=1e-15)

    def test_poly_probe_max(self, rng):
        packed = rng.standard_normal((50, 24))
        packed[:, 3] = 0.5 + rng.random(50)
        xi = np.stack(np.meshgrid(*[np.linspace(-5, 5, 9)] * 3, indexing="ij"), -1).reshape(-1, 3)
        a = _numpy_impl.poly_probe_max(packed, xi, 1.2)
        b = cy.poly_probe_max(packed, xi, 1.2)
        assert np.allclose(a, b, rtol=1e-12)


def test_benchmark_script_runs(capsys):
    import sys
    sys.path.insert(0, "benchmarks")
    import bench_kernels

    old = sys.argv
    sys.argv = ["bench_kernels.py", "3000"]
    try:
        bench_kernels.main()
    finally:
        sys.argv = old
        sys.path.pop(0)
    out = capsys.readouterr().out
    assert "scatter_pairs" in out and "poly_probe_max" in out
