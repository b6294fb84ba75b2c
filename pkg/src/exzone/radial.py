"""Radially symmetric auxiliary problems in N dimensions.

* ``ball_solution``: positive Dirichlet solution of ``-d_u Delta V = f(V)`` in a
  ball, by shooting from the centre.
* ``annulus_zeta``: maximum solution of ``-d_u Delta z = f(z)`` in the annulus
  ``rho < |x| < R`` with ``z = 0`` inside and ``dz/dr = 0`` outside, obtained by
  marching the parabolic problem from ``z = 1`` to steady state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import Radau, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, IntegrationFailure
from .growth import GrowthFn

__all__ = [
    "RadialConfig",
    "RadialProfile",
    "ball_solution",
    "annulus_zeta",
    "zeta_boundary_value",
    "threshold_radius",
    "export_profile",
]


@dataclass(frozen=True)
class RadialConfig:
    N: int
    d_u: float
    g: GrowthFn
    rho: float = 1.0
    R: float = 5.0
    sigma: float = 5.0
    h: float = 0.01

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"dimension N must be a positive integer, got {self.N}")
        if not self.d_u > 0:
            raise DomainError("d_u must be positive")

    def check_annulus(self):
        if not (0.0 < self.rho < self.R):
            raise DomainError(f"need 0 < rho < R, got rho={self.rho}, R={self.R}")

    def check_ball(self):
        if not self.sigma > 0:
            raise DomainError(f"ball radius must be positive, got {self.sigma}")


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    w: np.ndarray
    meta: dict

    @property
    def boundary_value(self) -> float:
        return float(self.w[-1])


# ---------------------------------------------------------------------------
# ball: shooting from the centre in the deficit variable s = 1 - V


def _shoot(cfg: RadialConfig, eps: float, r_max: float, dense: bool = False):
    """Integrate s'' = f(1-s)/d_u - (N-1) s'/r from s(0) = eps, s'(0) = 0.

    Returns (r_hit, sol) where r_hit is the radius at which V = 1 - s reaches 0,
    or inf if V turns around (V' = 0) or r_max is reached first.
    """
    g, N, d = cfg.g, cfg.N, cfg.d_u
    m_f = float(g.f_deficit(eps))  # f(m) at the centre value m = 1 - eps
    r0 = 1e-6 * cfg.sigma
    # series start: V''(0) = -f(m) / (N d_u)
    s0 = eps + m_f * r0**2 / (2.0 * N * d)
    ds0 = m_f * r0 / (N * d)

    def fun(r, y):
        return [y[1], g.f_deficit(y[0]) / d - (N - 1) * y[1] / r]

    def hit(r, y):
        return y[0] - 1.0

    hit.terminal = True
    hit.direction = 1

    def turn(r, y):
        return y[1]

    turn.terminal = True
    turn.direction = -1

    sol = solve_ivp(
        fun,
        (r0, r_max),
        [s0, ds0],
        method="DOP853",
        rtol=1e-12,
        atol=[min(1e-14, eps * 1e-10), min(1e-14, eps * 1e-10)],
        events=(hit, turn),
        dense_output=dense,
        first_step=r0,
    )
    if sol.status == -1:
        raise IntegrationFailure(sol.message)
    if len(sol.t_events[0]):
        return float(sol.t_events[0][0]), sol
    return math.inf, sol


def ball_solution(cfg: RadialConfig, n: int = 400) -> RadialProfile | None:
    """Radially decreasing V > 0 on [0, sigma) with V(sigma) = 0, or None below the critical radius.

    Of the (generically two) admissible centre values the larger one is
    returned.
    """
    cfg.check_ball()
    g = cfg.g
    sigma = cfg.sigma
    r_cap = 4.0 * sigma + 10.0
    z_hi = math.log(1.0 - g.theta_prime) - 1e-9  # centre value just above theta'

    def r_hit(z):
        return _shoot(cfg, math.exp(z), r_cap)[0]

    def obj(z):
        rh = r_hit(z)
        return rh if math.isfinite(rh) else r_cap * (1.0 + (z_hi - z))

    z_lo = math.log(1e-12)
    zs = np.linspace(z_lo, z_hi, 40)
    vals = np.array([obj(z) for z in zs])
    k = int(np.argmin(vals))
    lo, hi = zs[max(k - 1, 0)], zs[min(k + 1, len(zs) - 1)]
    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
    z_star, r_min = float(res.x), float(res.fun)
    if sigma < r_min:
        return None
    # the upper branch: deficits below eps*, hit radius decreasing in z
    z_low = z_star
    while r_hit(z_low) <= sigma:
        z_low -= 5.0
        if z_low < math.log(1e-300):
            raise IntegrationFailure("could not bracket the centre value")
    z = brentq(lambda z: r_hit(z) - sigma, z_low, z_star, xtol=1e-13, rtol=1e-15)
    eps = math.exp(z)
    _, sol = _shoot(cfg, eps, r_cap, dense=True)
    r = np.linspace(0.0, sigma, n + 1)
    r0 = sol.t[0]
    s = np.where(r < r0, eps, sol.sol(np.maximum(r, r0))[0])
    V = 1.0 - s
    V[-1] = 0.0
    return RadialProfile(r=r, w=V, meta={"centre_value": 1.0 - eps, "centre_deficit": eps, "r_min": r_min})


# ---------------------------------------------------------------------------
# annulus: parabolic relaxation from the supersolution 1


def _annulus_operator(cfg: RadialConfig, n: int):
    """Sparse matrix for d_u (w'' + (N-1) w'/r) on interior+outer nodes (w(rho) = 0 eliminated)."""
    r = np.linspace(cfg.rho, cfg.R, n + 1)
    h = r[1] - r[0]
    ri = r[1:]
    k = cfg.d_u / h**2
    c = cfg.d_u * (cfg.N - 1) / (2.0 * h * ri)
    lower = (k - c)[1:]
    upper = (k + c)[:-1]
    diag = np.full(n, -2.0 * k)
    # reflected ghost at r = R: w_{n+1} = w_{n-1}
    lower[-1] = 2.0 * k
    A = sp.diags([lower, diag, upper], [-1, 0, 1], format="csc")
    return r, A


def annulus_zeta(
    cfg: RadialConfig,
    t_relax: float = 1e5,
    tol: float = 1e-10,
    init: float = 1.0,
) -> RadialProfile:
    """March w_t = d_u(w'' + (N-1)w'/r) + f(w) from w = init until ||w_t|| <= tol at 3 consecutive checks."""
    cfg.check_annulus()
    g = cfg.g
    n = max(8, int(round((cfg.R - cfg.rho) / cfg.h)))
    r, A = _annulus_operator(cfg, n)
    h = r[1] - r[0]
    # below this floor the residual is dominated by rounding in the second difference
    floor = 8.0 * np.finfo(float).eps * 4.0 * cfg.d_u / h**2
    tol_eff = max(tol, floor)

    def fun(t, w):
        return A @ w + g.f(w)

    def jac(t, w):
        return A + sp.diags(g.f_prime(w))

    w0 = np.full(n, float(init))
    solver = Radau(fun, 0.0, w0, t_relax, rtol=1e-10, atol=1e-13, jac=jac)
    dt_check = 1.0 / g.r
    next_check = dt_check
    hits = 0
    resid = math.inf
    while True:
        while solver.t < next_check and solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationFailure(f"relaxation failed at t={solver.t:.6g}: {msg}")
        if solver.status == "running" or solver.t >= next_check:
            w = solver.dense_output()(next_check) if solver.t > next_check else solver.y
        else:
            w = solver.y
        resid = float(np.max(np.abs(fun(0.0, w))))
        hits = hits + 1 if resid <= tol_eff else 0
        if hits >= 3:
            break
        if solver.status != "running":
            raise IntegrationFailure(f"no steady state by t={t_relax} (|w_t|={resid:.3e})")
        next_check = max(next_check + dt_check, solver.t)
    w_full = np.concatenate([[0.0], w])
    collapsed = bool(np.max(np.abs(w_full)) < 1e-12)
    if collapsed:
        w_full[:] = 0.0
    return RadialProfile(
        r=r,
        w=w_full,
        meta={
            "t_relax": float(next_check),
            "residual_inf": resid,
            "tol": float(tol_eff),
            "h": float(h),
            "collapsed": collapsed,
        },
    )


def zeta_boundary_value(cfg: RadialConfig, **kw) -> float:
    return annulus_zeta(cfg, **kw).boundary_value


def threshold_radius(cfg: RadialConfig, eta: float, R_max: float = 40.0, R_tol: float = 1e-3) -> float | None:
    """Smallest outer radius R (to R_tol) with zeta_R(R) > 1 - eta, searching (rho, R_max]."""
    from dataclasses import replace

    if not (0.0 < eta < 1.0):
        raise DomainError("eta must lie in (0, 1)")

    def ok(R):
        return zeta_boundary_value(replace(cfg, R=R)) > 1.0 - eta

    if not ok(R_max):
        return None
    lo, hi = cfg.rho, R_max
    # coarse doubling from the inner radius
    step = max(cfg.h * 10, 0.5)
    R = cfg.rho + step
    while R < R_max and not ok(R):
        lo = R
        R = min(cfg.rho + 2.0 * (R - cfg.rho), R_max)
    hi = R
    while hi - lo > R_tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def export_profile(path, prof: RadialProfile, column: str = "w") -> None:
    from .dynamics import _write_columns

    _write_columns(path, ("r", column), (prof.r, prof.w))
