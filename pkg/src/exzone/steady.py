"""Stationary solutions and their certificates.

A coexistence steady state ``(u, v)`` has ``v = s * phi[u]`` where ``phi[u]``
is the positive principal eigenfunction of the predator operator
``-d_v v'' - (alpha u - gamma) v`` with eigenvalue ``lambda[u] = 0``.  The
solver here is a damped Newton iteration on the discrete stationary residual;
the eigenpair and the predator mass balance are computed afterwards as
independent checks.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .dynamics import ModelParams, State, _write_columns, jacobian_arrays, rhs_arrays, simulate
from .errors import (
    ConvergenceFailure,
    DomainError,
    NoConvergence,
    SingularJacobian,
    SingularSystem,
)
from .grid import DualGrid
from .growth import max_neg_f_prime

__all__ = [
    "SteadyState",
    "EigenPair",
    "FixedPointConfig",
    "InitStrategy",
    "homogeneous_equilibrium",
    "newton_steady",
    "principal_eigenpair",
    "fixed_point_map",
    "mass_balance_residual",
    "initial_guess",
    "stationary_residual",
]

DENSE_EIG_LIMIT = 2000


@dataclass(frozen=True)
class EigenPair:
    lam: float
    phi: np.ndarray
    eta_lower: float


@dataclass(frozen=True)
class SteadyState:
    u: np.ndarray
    v: np.ndarray
    residual_inf: float
    lambda_u: float
    eig_mismatch: float
    iterations: int = 0

    @property
    def is_coexistence(self) -> bool:
        return float(np.max(self.v)) > 0.0

    def as_state(self) -> State:
        return State(self.u.copy(), self.v.copy(), 0.0)

    def certificate(self, grid: DualGrid, p: ModelParams) -> dict:
        return {
            "residual_inf": self.residual_inf,
            "lambda_u": self.lambda_u,
            "eig_mismatch": self.eig_mismatch,
            "mass_balance_residual": mass_balance_residual(grid, p, self),
            "U": float(grid.integrate_u(self.u)),
            "V": float(grid.integrate_v(self.v)),
            "newton_iterations": self.iterations,
        }

    def export(self, directory, grid: DualGrid, p: ModelParams) -> None:
        from pathlib import Path

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _write_columns(directory / "steady_u.csv", ("x", "u"), (grid.nodes_u, self.u))
        _write_columns(directory / "steady_v.csv", ("x", "v"), (grid.nodes_v, self.v))
        with open(directory / "certificate.json", "w") as fh:
            json.dump(self.certificate(grid, p), fh, indent=2)


@dataclass(frozen=True)
class FixedPointConfig:
    K: float
    S: float
    s: float = 0.0

    def check(self, p: ModelParams) -> None:
        if not (0.0 <= self.s <= self.S):
            raise DomainError(f"amplitude s={self.s} outside [0, S={self.S}]")
        z = np.linspace(0.0, 1.0, 2001)
        slope = p.growth.f_prime(z) + self.K - p.beta * self.S
        if np.min(slope) < 0:
            raise DomainError("K too small: z -> f(z) + K z - beta S z is not nondecreasing on [0, 1]")

    @classmethod
    def default(cls, p: ModelParams, s: float = 0.0, S: float | None = None) -> "FixedPointConfig":
        g = p.growth
        if S is None:
            # f at the largest admissible root theta' bounds the scale; S only gates the map.
            S = 10.0 * max(1.0, float(g.f(g.theta_prime)) / p.beta)
        S = max(S, s)
        K = p.beta * S + max_neg_f_prime(g) + 1.0
        return cls(K=K, S=S, s=s)


class InitStrategy(str, enum.Enum):
    FROM_DYNAMICS = "from-dynamics"
    FROM_SUBSOLUTION = "from-subsolution"
    HOMOGENEOUS = "homogeneous"


def homogeneous_equilibrium(p: ModelParams):
    """(gamma/alpha, f(gamma/alpha)/(beta gamma/alpha)) if theta < gamma/alpha < 1, else None."""
    u_hat = p.gamma / p.alpha
    if not (p.growth.theta < u_hat < 1.0):
        return None
    return u_hat, float(p.growth.f(u_hat) / (p.beta * u_hat))


def stationary_residual(grid: DualGrid, p: ModelParams, u, v) -> np.ndarray:
    du, dv = rhs_arrays(grid, p, np.asarray(u, float), np.asarray(v, float))
    return np.concatenate([du, dv])


def _symmetric_tridiagonal(grid: DualGrid, p: ModelParams, uA: np.ndarray):
    """Diagonal/off-diagonal of W^{1/2} (-d_v Lap_v - (alpha u - gamma)) W^{-1/2}."""
    h = grid.h_pred
    n = grid.n_pred
    c = p.d_v / h**2
    diag = 2.0 * c - (p.alpha * uA - p.gamma)
    off = np.full(n - 1, -c)
    off[0] = off[-1] = -c * math.sqrt(2.0)
    return diag, off


def principal_eigenpair(grid: DualGrid, p: ModelParams, u) -> EigenPair:
    uA = grid.restrict(np.asarray(u, float))
    n = grid.n_pred
    w = grid.weights_v
    diag, off = _symmetric_tridiagonal(grid, p, uA)
    if n <= DENSE_EIG_LIMIT:
        lam, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
        psi = vec[:, 0]
    else:
        A = sp.diags([off, diag, off], [-1, 0, 1], format="csc")
        try:
            lam, vec = spla.eigsh(A, k=1, sigma=float(np.min(diag)) - 4.0 * p.d_v / grid.h_pred**2 - 1.0, which="LM")
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise ConvergenceFailure(f"inverse iteration failed: {exc}") from exc
        psi = vec[:, 0]
    phi = psi / np.sqrt(w)
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    phi = phi / np.max(phi)
    if np.min(phi) <= 0:
        raise ConvergenceFailure("principal eigenfunction is not positive")
    # Rayleigh quotient in the trapezoid inner product
    Aphi = -p.d_v * (grid.lap_v @ phi) - (p.alpha * uA - p.gamma) * phi
    lam_rq = float((phi * w) @ Aphi / ((phi * w) @ phi))
    return EigenPair(lam=lam_rq, phi=phi, eta_lower=float(np.min(phi)))


def fixed_point_map(grid: DualGrid, p: ModelParams, u, s: float, cfg: FixedPointConfig) -> np.ndarray:
    """Solve (-d_u Lap_u + K) w = f(u) + K u - beta 1_A s phi[u] u."""
    cfg = FixedPointConfig(cfg.K, cfg.S, s)
    cfg.check(p)
    u = np.asarray(u, float)
    m = grid.n_pred
    src = p.growth.f(u) + cfg.K * u
    if s != 0.0:
        phi = principal_eigenpair(grid, p, u).phi
        src[:m] -= p.beta * grid.predation_weight * s * phi * u[:m]
    A = (-p.d_u * grid.lap_u + cfg.K * sp.identity(grid.n_u)).tocsc()
    try:
        w = spla.spsolve(A, src)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise SingularSystem("fixed-point map produced non-finite values")
    return w


def mass_balance_residual(grid: DualGrid, p: ModelParams, st) -> float:
    """|int v - alpha/(beta gamma) int f(u)|, which vanishes at steady states."""
    V = grid.integrate_v(st.v)
    return float(abs(V - p.alpha / (p.beta * p.gamma) * grid.integrate_u(p.growth.f(st.u))))


def _eig_mismatch(v: np.ndarray, phi: np.ndarray) -> float:
    vmax = float(np.max(v))
    if vmax <= 0:
        return 0.0
    return float(np.max(np.abs(v / vmax - phi)))


def newton_steady(
    grid: DualGrid,
    p: ModelParams,
    init: State,
    tol: float = 1e-10,
    max_iter: int = 40,
) -> SteadyState:
    """Damped Newton on the stationary residual with Armijo backtracking (factor 0.5)."""
    nu = grid.n_u
    y = np.concatenate([np.asarray(init.u, float), np.asarray(init.v, float)])
    if y.size != nu + grid.n_pred:
        from .errors import SizeMismatch

        raise SizeMismatch("initial state does not match grid")

    def resid(y):
        return stationary_residual(grid, p, y[:nu], y[nu:])

    F = resid(y)
    it = 0
    while np.max(np.abs(F)) > tol:
        if it >= max_iter:
            raise NoConvergence(f"Newton did not converge in {max_iter} iterations (|F|={np.max(np.abs(F)):.3e})")
        J = jacobian_arrays(grid, p, y[:nu], y[nu:])
        try:
            lu = spla.splu(J.tocsc())
            dy = -lu.solve(F)
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(dy)):
            raise SingularJacobian("Newton step is not finite")
        norm0 = np.linalg.norm(F)
        step = 1.0
        while True:
            y_new = y + step * dy
            F_new = resid(y_new)
            if np.linalg.norm(F_new) <= (1.0 - 1e-4 * step) * norm0 or step < 1e-10:
                break
            step *= 0.5
        if step < 1e-10:
            raise NoConvergence("line search failed to reduce the residual")
        y, F = y_new, F_new
        it += 1

    u, v = y[:nu].copy(), y[nu:].copy()
    if np.max(v) > 0:
        eig = principal_eigenpair(grid, p, u)
        lam, mismatch = eig.lam, _eig_mismatch(v, eig.phi)
    else:
        lam, mismatch = principal_eigenpair(grid, p, u).lam, 0.0
    return SteadyState(
        u=u,
        v=v,
        residual_inf=float(np.max(np.abs(F))),
        lambda_u=lam,
        eig_mismatch=mismatch,
        iterations=it,
    )


def initial_guess(grid: DualGrid, p: ModelParams, strategy: InitStrategy | str, t_end: float | None = None) -> State:
    strategy = InitStrategy(strategy)
    if strategy is InitStrategy.FROM_DYNAMICS:
        return simulate(grid, p, t_end=t_end, n_snapshots=10, n_tail=10).final
    if strategy is InitStrategy.HOMOGENEOUS:
        pair = homogeneous_equilibrium(p)
        if pair is None:
            raise DomainError("no homogeneous coexistence equilibrium for these parameters")
        return State(np.full(grid.n_u, pair[0]), np.full(grid.n_pred, pair[1]))
    from .asymptotics import zeta

    prof = zeta(p.a, p.L, p.growth, p.d_u, grid.n_ex - 1)
    u = np.empty(grid.n_u)
    u[grid.iface :] = np.maximum(np.interp(grid.nodes_u[grid.iface :], prof.x, prof.u), p.p)
    u[: grid.iface] = max(p.p, 0.0)
    u = np.minimum(u, 1.0)
    phi = principal_eigenpair(grid, p, u).phi
    pair = homogeneous_equilibrium(p)
    s = pair[1] if pair is not None else 1.0
    return State(u, s * phi)
