from __future__ import annotations

import math

import numpy as np
import pytest

from exzone.asymptotics import (
    L_of_eps,
    L_of_q,
    branch_start,
    energy_drift,
    large_L_slope,
    q_of_L,
    thin_limit_coeffs,
    w1,
    w2,
    zeta,
)
from exzone.dynamics import preset
from exzone.errors import DomainError, NoBranch
from exzone.growth import GrowthFn

from .oracles import length_mp, shoot_back

G = GrowthFn(1.0, 0.3)
P0 = 0.05


@pytest.fixture(scope="module")
def thin():
    return preset("a_dependence_4")


@pytest.fixture(scope="module")
def coeffs(thin):
    return {L: thin_limit_coeffs(thin, L) for L in (5.0, 10.0, 20.0, 40.0)}


@pytest.mark.parametrize("q", [0.9, 0.99, 0.999])
def test_length_map_matches_high_precision_quadrature(q):
    assert L_of_q(q, P0, G, 1.0) == pytest.approx(length_mp(q, P0, 1.0, 0.3, 1.0), rel=1e-10)


def test_length_map_tail_monotone_and_divergent():
    vals = [L_of_q(q, P0, G, 1.0) for q in (0.9, 0.99, 0.999)]
    assert vals[0] < vals[1] < vals[2]
    seq = [L_of_q(1 - 10.0**-k, P0, G, 1.0) for k in range(2, 7)]
    inc = np.diff(seq)
    assert np.all(inc > 0)
    # log blow-up: equal increments per decade of the deficit
    nu = G.nu
    np.testing.assert_allclose(inc, math.sqrt(1.0 / nu) * math.log(10) / 2 * 2, rtol=0.02)


def test_length_map_deep_deficit_matches_mpmath():
    for eps in (1e-12, 1e-20):
        assert L_of_eps(eps, P0, G, 1.0) == pytest.approx(length_mp(("eps", eps), P0, 1.0, 0.3, 1.0, dps=60), rel=1e-10)


def test_length_map_short_interval():
    g = GrowthFn(1.0, 0.3)
    # f(p) > 0 for p in (theta, 1): q -> p gives L -> 0
    assert L_of_q(0.6 + 1e-8, 0.6, g, 1.0) < 1e-3


def test_length_map_rejects_unbounded_energy():
    with pytest.raises(DomainError):
        L_of_q(0.35, P0, G, 1.0)


def test_branch_monotone_on_fine_grid():
    eps0, L_min = branch_start(G, P0, 1.0)
    eps = np.geomspace(1e-14, eps0 * 0.999, 80)
    L = np.array([L_of_eps(e, P0, G, 1.0) for e in eps])
    assert np.all(np.diff(L) < 0)  # decreasing in the deficit = increasing in q
    assert L.min() > L_min


@pytest.mark.parametrize("L", [3.0, 5.0, 10.0, 20.0])
def test_round_trip(L):
    lev = q_of_L(L, P0, G, 1.0)
    assert abs(L_of_q(lev, P0, G, 1.0) - L) <= 1e-8
    assert lev.E == pytest.approx(G.F(lev.q), rel=1e-12)
    assert G.theta_prime < lev.q < 1


def test_q_of_L_monotone_and_limit():
    qs = [q_of_L(L, P0, G, 1.0) for L in (5.0, 10.0, 40.0)]
    assert qs[0].q < qs[1].q
    assert qs[1].eps > qs[2].eps
    assert qs[2].q > 0.999


def test_no_branch_below_minimum():
    _, L_min = branch_start(G, 0.0, 1.0)
    with pytest.raises(NoBranch):
        q_of_L(0.5 * L_min, 0.0, G, 1.0)
    with pytest.raises(NoBranch):
        zeta(1.0, 1.0 + 0.5 * L_min, G, 1.0)


def test_zeta_matches_shooting():
    prof = zeta(1.0, 9.0, G, 1.0)
    assert prof.u[0] == 0.0
    assert np.all(np.diff(prof.u) > 0)
    assert abs(prof.du[-1]) <= 1e-8
    xs = prof.x[:: len(prof.x) // 20]
    us, _ = shoot_back(G, 1.0, prof.q, 9.0, xs)
    np.testing.assert_allclose(np.interp(xs, prof.x, prof.u), us, atol=1e-8)


@pytest.mark.parametrize("args", [(0.0, 5.0, 1.0), (2.0, 12.0, 0.5), (0.0, 40.0, 1.0)])
def test_energy_conservation(args):
    a, L, d_u = args
    prof = zeta(a, L, G, d_u)
    assert energy_drift(prof, G, d_u) <= 1e-8


def test_w1_energy_and_slope(thin):
    for L in (5.0, 20.0):
        prof = w1(L, thin, n=int(L / 0.002))
        assert energy_drift(prof, thin.growth, thin.d_u) <= 1e-8
        assert prof.u[0] == pytest.approx(thin.p, abs=1e-15)
        assert np.min(np.diff(prof.u)) >= 0 and np.max(np.diff(prof.deficit)) < 0
        h = prof.x[1] - prof.x[0]
        # second-order one-sided difference using the ODE for u''(0)
        upp = -thin.growth.f(prof.u[0]) / thin.d_u
        fd = (prof.u[1] - prof.u[0]) / h - 0.5 * h * upp
        assert fd == pytest.approx(prof.slope0, abs=1e-6)
        expect = math.sqrt(2 / thin.d_u * (thin.growth.F(prof.q) - thin.growth.F(thin.p)))
        assert prof.slope0 == pytest.approx(expect, rel=1e-12)


def test_zeta_monotone_in_L_and_a():
    z1 = zeta(0.0, 4.0, G, 1.0)
    z2 = zeta(0.0, 6.0, G, 1.0)
    assert np.all(np.interp(z1.x, z2.x, z2.u) >= z1.u - 1e-12)
    za = zeta(0.5, 6.0, G, 1.0)
    assert np.all(np.interp(za.x, z2.x, z2.u) >= za.u - 1e-12)
    assert zeta(0.0, 30.0, G, 1.0).u[-1] > 1 - 1e-6


def test_zeta_discrete_residual_second_order():
    res = []
    for n in (200, 400, 800):
        prof = zeta(0.0, 6.0, G, 1.0, n)
        h = prof.x[1] - prof.x[0]
        u = prof.u
        r = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2 + G.f(u[1:-1])
        res.append(np.max(np.abs(r)))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.1)
    assert res[1] / res[2] == pytest.approx(4.0, rel=0.1)


def test_w2_boundary_conditions_and_identity(thin):
    L = 10.0
    prof = w1(L, thin)
    sol = w2(L, thin, prof)
    assert sol.w[0] == prof.slope0 / 3
    h = sol.x[1] - sol.x[0]
    # ghost closure w[n+1] = w[n-1] reproduces the last row of the linear system
    g = thin.growth
    last = thin.d_u * 2 * (sol.w[-2] - sol.w[-1]) / h**2 + g.f_prime(prof.u[-1]) * sol.w[-1]
    assert last == pytest.approx((2 / L) * g.f_deficit(prof.deficit[-1]), abs=1e-12)
    upp = ((2 / L) * g.f_deficit(prof.deficit[-1]) - g.f_prime(prof.u[-1]) * sol.w[-1]) / thin.d_u
    assert abs((sol.w[-1] - sol.w[-2]) / h - 0.5 * h * upp) <= 1e-6
    g, d_u, p, q = thin.growth, thin.d_u, thin.p, prof.q
    s1 = prof.slope0
    rhs = g.f_deficit(prof.level.eps) * sol.w[-1] - g.f(p) * s1 / 3 - (2 / L) * (g.F(q) - g.F(p))
    assert d_u * sol.slope0 * s1 == pytest.approx(rhs, abs=1e-6)


def test_w2_reduced_identity(thin):
    L = 10.0
    prof = w1(L, thin)
    sol = w2(L, thin, prof)
    z = sol.w + (prof.x / L - 1 / 3) * prof.du
    assert abs(z[0]) < 1e-15
    h = sol.x[1] - sol.x[0]
    r = thin.d_u * (z[2:] - 2 * z[1:-1] + z[:-2]) / h**2 + thin.growth.f_prime(prof.u[1:-1]) * z[1:-1]
    assert np.max(np.abs(r)) < 1e-4


def test_w2_right_value_decays(thin):
    vals = []
    for L in (5.0, 10.0, 20.0, 40.0):
        prof = w1(L, thin)
        vals.append(abs(w2(L, thin, prof).w[-1]))
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6


def test_V0_increases_to_energy_limit(coeffs, thin):
    g = thin.growth
    s_inf = math.sqrt(2 * (g.F1 - g.F(thin.p)) / thin.d_u)
    assert s_inf == pytest.approx(0.473679, abs=1e-6)
    V0 = [coeffs[L].V0 for L in (5.0, 10.0, 20.0, 40.0)]
    V_inf = thin.d_u * thin.alpha / (thin.beta * thin.gamma) * s_inf
    assert V_inf == pytest.approx(3.157858, abs=1e-6)
    assert all(a <= b * (1 + 1e-14) for a, b in zip(V0, V0[1:]))
    assert V0[-1] <= V_inf and V0[-1] == pytest.approx(V_inf, rel=1e-8)
    for c in coeffs.values():
        assert c.V0 == pytest.approx(thin.d_u * thin.alpha / (thin.beta * thin.gamma) * c.w1_slope0, rel=1e-14)


def test_V1_invariant_and_sign(coeffs, thin):
    ratio = thin.alpha / (thin.beta * thin.gamma)
    for L, c in coeffs.items():
        expect = ratio * (thin.d_u * c.w2_slope0 + thin.growth.f(thin.p)) + c.flux_term
        assert c.V1 == pytest.approx(expect, rel=1e-14)
        assert c.flux_term == pytest.approx(c.V0 / L, rel=1e-14)
    assert coeffs[40.0].V1 < 0


def test_large_L_slope(thin):
    assert large_L_slope(thin) == pytest.approx(-0.175926, abs=1e-6)
    assert large_L_slope(preset("a_dependence_4", gamma=0.3)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        large_L_slope(preset("a_dependence_4", gamma=2.0))


def test_V1_converges_to_large_L_slope(coeffs, thin):
    target = large_L_slope(thin)
    err = [abs(coeffs[L].V1 - target) for L in (5.0, 10.0, 20.0, 40.0)]
    assert all(b < a for a, b in zip(err, err[1:]))
    assert err[-1] <= 0.05 * abs(target)
