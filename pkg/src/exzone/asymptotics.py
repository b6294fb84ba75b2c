"""Monotone profiles of ``-d_u u'' = f(u)`` and thin-predator-domain coefficients.

Along a solution of ``-d_u u'' = f(u)`` the energy ``(d_u/2) u'^2 + F(u)`` is
constant.  A monotone increasing solution on ``[x0, x0 + ell]`` with
``u(x0) = p`` and ``u'(x0 + ell) = 0`` has right value ``q`` with

    ell = sqrt(d_u/2) * int_p^q du / sqrt(F(q) - F(u)).

Everything here is parametrised by the deficit ``eps = 1 - q``: for long
domains ``q`` is far closer to 1 than double precision can represent.  The
square-root singularity at ``u = q`` is removed by ``u = q - t^2`` and the
remaining near-logarithmic peak (width ~ sqrt(eps)) by ``t = sqrt(2 eps) sinh(tau)``;
the transformed integrand is smooth and tends to ``2 sqrt(2/nu)`` as
``eps -> 0`` near ``tau = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq, minimize_scalar

from .dynamics import ModelParams, _write_columns
from .errors import DomainError, NoBranch, SingularSystem
from .growth import GrowthFn

__all__ = [
    "EnergyLevel",
    "Profile",
    "W2Solution",
    "ThinLimitCoeffs",
    "L_of_q",
    "L_of_eps",
    "q_of_L",
    "branch_start",
    "zeta",
    "w1",
    "w2",
    "thin_limit_coeffs",
    "large_L_slope",
    "energy_drift",
]

GL_START = 64
GL_MAX = 1024
GL_TOL = 1e-10


@dataclass(frozen=True)
class EnergyLevel:
    """Right boundary value ``q = 1 - eps`` of a monotone profile and its energy ``E = F(q)``."""

    q: float
    eps: float
    p: float
    E: float
    L: float


@dataclass(frozen=True)
class Profile:
    x: np.ndarray
    u: np.ndarray
    deficit: np.ndarray  # 1 - u, kept separately to full relative precision
    du: np.ndarray
    level: EnergyLevel

    @property
    def slope0(self) -> float:
        return float(self.du[0])

    @property
    def q(self) -> float:
        return self.level.q


@dataclass(frozen=True)
class W2Solution:
    x: np.ndarray
    w: np.ndarray
    slope0: float


@dataclass(frozen=True)
class ThinLimitCoeffs:
    """Two-term expansion V(a) = V0 + V1 a + O(a^2) of the total predator population.

    ``V1 = alpha/(beta gamma) (d_u w2'(0) + f(gamma/alpha)) + flux_term`` where
    ``flux_term = V0 / L`` comes from the first-order part of the interface flux
    condition when the exclusion zone (a, L) is stretched onto (0, L).
    """

    V0: float
    V1: float
    w1_slope0: float
    w2_slope0: float
    L: float
    q: float
    eps: float
    flux_term: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=None)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


class _Quadrature:
    """Length map and its building blocks for fixed (g, p, d_u)."""

    def __init__(self, g: GrowthFn, p: float, d_u: float):
        if not (0.0 <= p < 1.0):
            raise DomainError(f"left value p must lie in [0, 1), got {p}")
        if not d_u > 0:
            raise DomainError("d_u must be positive")
        self.g = g
        self.p = float(p)
        self.d_u = float(d_u)
        self.sp = 1.0 - self.p  # deficit at the left end
        self.scale = math.sqrt(self.d_u / 2.0)

    # -- admissibility -----------------------------------------------------
    def gap(self, eps: float) -> float:
        """F(q) - F(p) for q = 1 - eps."""
        return (self.sp - eps) * self.g.gap_quotient(eps, self.sp)

    def check(self, eps: float) -> None:
        q = 1.0 - eps
        if not (0.0 < eps < self.sp):
            raise DomainError(f"need p < q < 1, got p={self.p}, q={q}")
        if q <= self.g.theta or self.gap(eps) <= 0.0:
            raise DomainError(f"F(q) - F(u) is not positive on (p, q) for p={self.p}, q={q}")

    def eps_max(self) -> float:
        """Largest admissible deficit (lowest admissible q)."""
        g = self.g
        if self.p >= g.theta:
            return self.sp
        Fp = g.F(self.p)
        q_low = brentq(lambda q: g.F(q) - Fp, g.theta, 1.0, xtol=1e-15, rtol=1e-15)
        return 1.0 - q_low

    # -- transformed integrand ---------------------------------------------
    def tau_max(self, eps: float) -> float:
        return math.asinh(math.sqrt(self.sp - eps) / math.sqrt(2.0 * eps))

    def integrand(self, tau, eps: float):
        """d(distance from the right end)/d tau."""
        c = math.sqrt(2.0 * eps)
        t = c * np.sinh(tau)
        H = self.g.gap_quotient(eps, eps + t * t)
        return self.scale * 2.0 * c * np.cosh(tau) / np.sqrt(H)

    def length(self, eps: float, n: int = GL_START) -> float:
        self.check(eps)
        tm = self.tau_max(eps)
        prev = None
        while True:
            x, w = _gl(n)
            val = 0.5 * tm * float(w @ self.integrand(0.5 * tm * (x + 1.0), eps))
            if prev is not None and abs(val - prev) <= GL_TOL * max(1.0, abs(val)):
                return val
            if n >= GL_MAX:
                return val
            prev = val
            n *= 2

    # -- profile inversion ----------------------------------------------------
    def profile(self, level: EnergyLevel, x0: float, n: int) -> Profile:
        eps = level.eps
        tm = self.tau_max(eps)
        panels = max(64, n // 8)
        m = 16
        xg, wg = _gl(m)
        edges = np.linspace(0.0, tm, panels + 1)
        hw = 0.5 * (edges[1] - edges[0])
        nodes = edges[:-1, None] + hw * (xg[None, :] + 1.0)
        panel_int = hw * (self.integrand(nodes, eps) @ wg)
        cum = np.concatenate([[0.0], np.cumsum(panel_int)])
        total = cum[-1]

        def D(tau):
            k = np.clip((tau / (2.0 * hw)).astype(int), 0, panels - 1)
            lo = edges[k]
            half = 0.5 * (tau - lo)
            pts = lo[:, None] + half[:, None] * (xg[None, :] + 1.0)
            return cum[k] + half * (self.integrand(pts, eps) @ wg)

        x = np.linspace(x0, x0 + level.L, n + 1)
        target = (x0 + level.L) - x
        # Rescale to the composite total so the left node maps exactly to tau_max.
        target *= total / level.L
        tau = np.interp(target, cum, edges)
        for _ in range(50):
            step = (D(tau) - target) / self.integrand(tau, eps)
            tau = np.clip(tau - step, 0.0, tm)
            if np.max(np.abs(step)) < 1e-15 * max(1.0, tm):
                break
        tau[0] = tm
        tau[-1] = 0.0
        t = math.sqrt(2.0 * eps) * np.sinh(tau)
        deficit = eps + t * t
        deficit[0] = self.sp
        H = self.g.gap_quotient(eps, deficit)
        du = t * np.sqrt(2.0 * H / self.d_u)
        u = 1.0 - deficit
        u[0] = self.p
        return Profile(x=x, u=u, deficit=deficit, du=du, level=level)


@lru_cache(maxsize=256)
def _quad(g: GrowthFn, p: float, d_u: float) -> _Quadrature:
    return _Quadrature(g, p, d_u)


def L_of_eps(eps: float, p: float, g: GrowthFn, d_u: float) -> float:
    return _quad(g, float(p), float(d_u)).length(float(eps))


def L_of_q(q, p: float, g: GrowthFn, d_u: float) -> float:
    """Length of the monotone profile from ``u = p`` up to ``u = q``.

    ``q`` may be an EnergyLevel, in which case its exact deficit is used.
    """
    eps = q.eps if isinstance(q, EnergyLevel) else 1.0 - float(q)
    return L_of_eps(eps, p, g, d_u)


@lru_cache(maxsize=256)
def branch_start(g: GrowthFn, p: float, d_u: float) -> tuple[float, float]:
    """(eps0, L_min): the monotone upper branch is eps in (0, eps0), lengths > L_min.

    Scans the deficit upward from 1e-9 until the length map stops
    decreasing, then refines the fold with a bounded minimisation.
    """
    Q = _quad(g, p, d_u)
    e_hi = Q.eps_max() * (1.0 - 1e-9)
    grid = np.geomspace(1e-9, e_hi, 160)
    lengths = []
    for e in grid:
        try:
            lengths.append(Q.length(e))
        except DomainError:
            lengths.append(np.nan)
            break
    lengths = np.array(lengths)
    n_ok = len(lengths)
    for k in range(1, n_ok):
        if not np.isfinite(lengths[k]) or lengths[k] >= lengths[k - 1]:
            lo = math.log(grid[max(k - 2, 0)])
            hi = math.log(grid[min(k, n_ok - 1)])
            if not np.isfinite(lengths[k]):
                return float(grid[k - 1]), float(lengths[k - 1])
            res = minimize_scalar(
                lambda z: Q.length(math.exp(z)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
            )
            return float(math.exp(res.x)), float(res.fun)
    return float(grid[-1]), float(lengths[-1])


def q_of_L(L: float, p: float, g: GrowthFn, d_u: float) -> EnergyLevel:
    """Boundary level of the monotone profile of length ``L`` (inverse of L_of_q on the upper branch)."""
    L = float(L)
    Q = _quad(g, float(p), float(d_u))
    eps0, L_min = branch_start(g, float(p), float(d_u))
    if not L > L_min:
        raise NoBranch(f"length {L} is below the branch minimum {L_min:.6g} (p={p})")
    z_hi = math.log(eps0)
    z_lo = z_hi
    while True:
        z_lo -= 10.0
        if z_lo < math.log(1e-300):
            raise NoBranch(f"length {L} beyond representable deficits")
        if Q.length(math.exp(z_lo)) > L:
            break
    z = brentq(lambda z: Q.length(math.exp(z)) - L, z_lo, z_hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    eps = math.exp(z)
    q = 1.0 - eps
    E = g.F1 - g.F_deficit(eps)
    return EnergyLevel(q=q, eps=eps, p=float(p), E=float(E), L=L)


def _default_n(length: float) -> int:
    return max(2000, math.ceil(length / 0.005))


def zeta(a: float, L: float, g: GrowthFn, d_u: float, n: int | None = None) -> Profile:
    """Maximum positive solution of -d_u z'' = f(z) on (a, L), z(a) = 0, z'(L) = 0."""
    if not L > a:
        raise DomainError(f"need L > a, got a={a}, L={L}")
    length = L - a
    level = q_of_L(length, 0.0, g, d_u)
    return _quad(g, 0.0, float(d_u)).profile(level, float(a), n or _default_n(length))


def w1(L: float, p: ModelParams, n: int | None = None) -> Profile:
    """Monotone solution of -d_u w'' = f(w), w(0) = gamma/alpha, w'(L) = 0 with w(L) on the upper branch."""
    left = p.p
    if not (0.0 < left < 1.0):
        raise DomainError(f"gamma/alpha={left} must lie in (0, 1)")
    level = q_of_L(L, left, p.growth, p.d_u)
    return _quad(p.growth, left, float(p.d_u)).profile(level, 0.0, n or _default_n(L))


def w2(L: float, p: ModelParams, w1_profile: Profile) -> W2Solution:
    """Solve d_u w'' + f'(w1) w = (2/L) f(w1), w(0) = w1'(0)/3, w'(L) = 0."""
    x = w1_profile.x
    n = len(x) - 1
    h = float(x[1] - x[0])
    g = p.growth
    c = g.f_prime(w1_profile.u)
    b = (2.0 / L) * g.f_deficit(w1_profile.deficit)
    b[0] = (2.0 / L) * g.f(w1_profile.u[0])
    w0 = w1_profile.slope0 / 3.0
    k = p.d_u / h**2
    # unknowns w_1..w_n
    ab = np.zeros((3, n))
    ab[0, 1:] = k  # super-diagonal
    ab[1, :] = -2.0 * k + c[1:]
    ab[2, :-1] = k  # sub-diagonal
    ab[2, -2] = 2.0 * k  # ghost reflection at x = L
    rhs = b[1:].copy()
    rhs[0] -= k * w0
    try:
        sol = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"w2 operator is singular at L={L}: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem(f"w2 operator is singular at L={L}")
    w = np.concatenate([[w0], sol])
    wpp0 = (b[0] - c[0] * w0) / p.d_u
    slope0 = (w[1] - w[0]) / h - 0.5 * h * wpp0
    return W2Solution(x=x, w=w, slope0=float(slope0))


def thin_limit_coeffs(p: ModelParams, L: float, n: int | None = None) -> ThinLimitCoeffs:
    prof = w1(L, p, n)
    sol = w2(L, p, prof)
    ratio = p.alpha / (p.beta * p.gamma)
    V0 = p.d_u * ratio * prof.slope0
    # u'(a^+) = u_2'(0)/(L - a) = (1 + a/L) u_2'(0)/L + O(a^2): the a/L part
    # feeds the predator-side solvability condition and adds V0/L.
    flux = V0 / L
    V1 = ratio * (p.d_u * sol.slope0 + float(p.growth.f(p.p))) + flux
    return ThinLimitCoeffs(
        V0=float(V0),
        V1=float(V1),
        flux_term=float(flux),
        w1_slope0=prof.slope0,
        w2_slope0=sol.slope0,
        L=float(L),
        q=prof.level.q,
        eps=prof.level.eps,
    )


def large_L_slope(p: ModelParams) -> float:
    """Limit of the linear thin-limit coefficient as L -> infinity."""
    if not (0.0 < p.p < 1.0):
        raise DomainError(f"gamma/alpha={p.p} must lie in (0, 1)")
    return float(2.0 / 3.0 * p.alpha / (p.beta * p.gamma) * p.growth.f(p.p))


def energy_drift(prof: Profile, g: GrowthFn, d_u: float) -> float:
    """max |(d_u/2) u'^2 + F(u) - F(q)| / |F(q)| over the profile nodes."""
    E = prof.level.E
    e = 0.5 * d_u * prof.du**2 + g.F(prof.u)
    return float(np.max(np.abs(e - E)) / abs(E))


def export_profiles(path, **columns) -> None:
    names = list(columns)
    _write_columns(path, names, [columns[k] for k in names])


def export_coeffs(path, coeffs: ThinLimitCoeffs, large_L: float | None) -> None:
    d = {
        "L": coeffs.L,
        "q": coeffs.q,
        "eps": coeffs.eps,
        "w1_slope0": coeffs.w1_slope0,
        "w2_slope0": coeffs.w2_slope0,
        "V0": coeffs.V0,
        "V1": coeffs.V1,
        "flux_term": coeffs.flux_term,
        "large_L_slope": large_L,
    }
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2)
