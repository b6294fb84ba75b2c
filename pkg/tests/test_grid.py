from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exzone.errors import DomainError, SizeMismatch
from exzone.grid import build_grid, default_resolution


def test_build_grid_spacings_and_interface():
    g = build_grid(0.4, 1.0, 5, 7)
    assert g.h_pred == pytest.approx(0.1)
    assert g.h_ex == pytest.approx(0.1)
    assert g.n_u == 11
    assert g.iface == 4
    assert g.nodes_u[4] == 0.4
    np.testing.assert_array_equal(g.nodes_v, g.nodes_u[:5])
    assert np.count_nonzero(g.nodes_u == 0.4) == 1


def test_small_grid_nodes():
    g = build_grid(0.5, 1.0, 3, 3)
    np.testing.assert_allclose(g.nodes_u, [0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize("a, L, n1, n2", [(1.0, 1.0, 5, 5), (0.0, 1.0, 5, 5), (0.5, 1.0, 2, 5), (0.5, 1.0, 5, 2)])
def test_build_grid_rejects(a, L, n1, n2):
    with pytest.raises(DomainError):
        build_grid(a, L, n1, n2)


def test_laplacian_u_on_quadratic():
    g = build_grid(0.4, 1.0, 9, 13)
    x = g.nodes_u
    lap = g.laplacian_u(x**2)
    # exact for quadratics at interior nodes, the interface node (3-point stencil), and x=0 (u'(0)=0)
    interior = np.r_[0 : g.n_u - 1]
    np.testing.assert_allclose(lap[interior], 2.0, atol=1e-9)
    assert lap[0] == pytest.approx(2.0, abs=1e-12)
    assert g.laplacian_u(np.full(g.n_u, 3.7)) == pytest.approx(np.zeros(g.n_u), abs=1e-10)


def test_laplacian_v_examples():
    g = build_grid(0.8, 1.0, 41, 5)
    assert g.laplacian_v(np.full(41, 2.0)) == pytest.approx(np.zeros(41), abs=1e-9)
    x = g.nodes_v
    v = np.cos(np.pi * x / 0.8)
    err = np.max(np.abs(g.laplacian_v(v) + (np.pi / 0.8) ** 2 * v))
    assert err < 0.01
    v2 = x**2
    h = g.h_pred
    assert g.laplacian_v(v2)[-1] == pytest.approx(2 * (v2[-2] - v2[-1]) / h**2, rel=1e-12)


def test_size_mismatch():
    g = build_grid(0.4, 1.0, 5, 7)
    with pytest.raises(SizeMismatch):
        g.laplacian_u(np.zeros(5))
    with pytest.raises(SizeMismatch):
        g.laplacian_v(np.zeros(11))
    with pytest.raises(SizeMismatch):
        g.integrate_u(np.zeros(4))
    with pytest.raises(SizeMismatch):
        g.integrate_v(np.zeros(4))


def test_quadrature_examples():
    g = build_grid(0.8, 1.0, 17, 6)
    assert g.integrate_u(np.ones(g.n_u)) == pytest.approx(1.0, abs=1e-15)
    assert g.integrate_v(np.full(g.n_pred, 0.5)) == pytest.approx(0.4, abs=1e-15)
    for n1, n2 in [(3, 3), (7, 4), (50, 13)]:
        h = build_grid(0.37, 1.0, n1, n2)
        assert abs(h.integrate_u(h.nodes_u) - 0.5) <= 1e-14


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(min_value=0.05, max_value=0.95),
    n1=st.integers(min_value=3, max_value=60),
    n2=st.integers(min_value=3, max_value=60),
)
def test_conservation_and_self_adjointness(a, n1, n2):
    g = build_grid(a, 1.0, n1, n2)
    for lap, w in ((g.lap_u, g.weights_u), (g.lap_v, g.weights_v)):
        A = lap.toarray()
        scale = np.max(np.abs(A))
        assert np.max(np.abs(A.sum(axis=1))) <= 1e-12 * scale
        WA = w[:, None] * A
        assert np.max(np.abs(WA - WA.T)) <= 1e-12 * np.max(np.abs(WA))


def test_refinement_orders():
    """Order >= 2 away from the interface, >= 1 at it, for a Neumann-compatible field."""
    a, L = 0.4, 1.0

    def field(x):
        return np.cos(np.pi * x / L) + 0.3 * np.cos(2 * np.pi * x / L)

    def exact(x):
        return -((np.pi / L) ** 2) * np.cos(np.pi * x / L) - 0.3 * (2 * np.pi / L) ** 2 * np.cos(2 * np.pi * x / L)

    away, at = [], []
    for k in (1, 2, 4, 8):
        g = build_grid(a, L, 8 * k + 1, 18 * k + 1)  # h_pred = 0.05/k, h_ex = 0.0333/k
        err = np.abs(g.laplacian_u(field(g.nodes_u)) - exact(g.nodes_u))
        mask = np.ones(g.n_u, bool)
        mask[g.iface] = False
        away.append(err[mask].max())
        at.append(err[g.iface])
    away_rates = np.log2(np.array(away[:-1]) / np.array(away[1:]))
    at_rates = np.log2(np.array(at[:-1]) / np.array(at[1:]))
    assert np.all(away_rates > 1.9)
    assert np.all(at_rates > 0.9)


def test_predation_weight_fraction():
    g = build_grid(0.4, 1.0, 5, 13)
    w = g.predation_weight
    assert np.all(w[:-1] == 1.0)
    assert w[-1] == pytest.approx(g.h_pred / (g.h_pred + g.h_ex))


def test_default_resolution():
    n1, n2 = default_resolution(0.4, 1.0, 0.1, 1.0)
    g = build_grid(0.4, 1.0, n1, n2)
    bound = min(0.005, 0.1 * np.sqrt(0.1))
    assert max(g.h_pred, g.h_ex) <= bound + 1e-15
    n1, n2 = default_resolution(2.5, 5.0, 1.0, 30.0)
    g = build_grid(2.5, 5.0, n1, n2)
    assert max(g.h_pred, g.h_ex) <= 0.1 * np.sqrt(1 / 30) + 1e-15
