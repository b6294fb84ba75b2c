"""Method-of-lines integration of the predator-prey system with an exclusion zone.

Unknowns are stacked as ``y = [u (prey, all of [0, L]), v (predator, [0, a])]``.
Time stepping uses the 3-stage Radau IIA method (order 5, L-stable) from
SciPy with the analytic sparse Jacobian.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import Radau

from .errors import DomainError, NonFiniteState, SizeMismatch, StiffnessFailure
from .grid import DualGrid, build_grid, default_resolution
from .growth import GrowthFn, make_growth

__all__ = [
    "ModelParams",
    "State",
    "Trajectory",
    "rhs",
    "jacobian",
    "simulate",
    "extend",
    "totals",
    "default_t_end",
    "default_grid",
    "initial_state",
    "PRESETS",
    "preset",
]

DEFAULT_RTOL = 1e-7
DEFAULT_ATOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    gamma: float
    d_u: float
    d_v: float
    growth: GrowthFn
    a: float
    L: float

    def __post_init__(self):
        bad = [
            name
            for name in ("alpha", "beta", "gamma", "d_u", "d_v")
            if not (getattr(self, name) > 0 and math.isfinite(getattr(self, name)))
        ]
        if bad:
            raise DomainError(f"rates and diffusivities must be positive: {', '.join(bad)}")
        if not (0.0 < self.a < self.L):
            raise DomainError(f"need 0 < a < L, got a={self.a}, L={self.L}")

    @property
    def p(self) -> float:
        """gamma / alpha, the prey density at which predators break even."""
        return self.gamma / self.alpha

    def with_a(self, a: float) -> "ModelParams":
        return replace(self, a=float(a))

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "d_u": self.d_u,
            "d_v": self.d_v,
            "r": self.growth.r,
            "theta": self.growth.theta,
            "a": self.a,
            "L": self.L,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            gamma=float(d["gamma"]),
            d_u=float(d["d_u"]),
            d_v=float(d["d_v"]),
            growth=make_growth(d["r"], d["theta"]),
            a=float(d["a"]),
            L=float(d["L"]),
        )


# Parameter sets used for the published figures.  ``a`` is a placeholder for
# the sweep presets.
PRESETS = {
    "table1_row1": dict(L=1.0, a=0.4, alpha=14.0, beta=12.0, gamma=5.0, theta=0.05, r=1.0, d_u=0.1, d_v=0.05),
    "table1_row2": dict(L=1.0, a=0.8, alpha=14.0, beta=12.0, gamma=5.0, theta=0.05, r=1.0, d_u=0.1, d_v=0.05),
    "a_dependence_1": dict(L=1.0, a=0.5, alpha=13.9, beta=10.0, gamma=5.0, theta=0.04, r=0.904, d_u=1.0, d_v=0.52),
    "a_dependence_3": dict(L=5.0, a=2.5, alpha=3.0, beta=3.0, gamma=0.9, theta=0.3, r=30.0, d_u=1.0, d_v=1.0),
    "a_dependence_4": dict(L=5.0, a=2.5, alpha=1.0, beta=3.0, gamma=0.05, theta=0.3, r=1.0, d_u=1.0, d_v=1.0),
}


def preset(name: str, **overrides) -> ModelParams:
    try:
        d = dict(PRESETS[name])
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    d.update(overrides)
    return ModelParams.from_dict(d)


@dataclass(frozen=True)
class State:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])


@dataclass
class Trajectory:
    """Snapshots of a run.  ``u[k]``, ``v[k]`` are the fields at time ``t[k]``."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    U: np.ndarray
    V: np.ndarray
    params: ModelParams
    grid: DualGrid
    solver_stats: dict = field(default_factory=dict)
    window_start: float = 0.0

    def __len__(self):
        return len(self.t)

    def state(self, k: int = -1) -> State:
        return State(self.u[k].copy(), self.v[k].copy(), float(self.t[k]))

    @property
    def final(self) -> State:
        return self.state(-1)

    def to_csv(self, path) -> None:
        write_series_csv(path, self.t, self.U, self.V)

    def fields_to_csv(self, directory, every: int = 1) -> None:
        """One pair of files (x,u) and (x,v) per retained snapshot."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for k in range(0, len(self.t), every):
            _write_columns(directory / f"u_{k:05d}.csv", ("x", "u"), (self.grid.nodes_u, self.u[k]))
            _write_columns(directory / f"v_{k:05d}.csv", ("x", "v"), (self.grid.nodes_v, self.v[k]))


def _fmt(x) -> str:
    return repr(float(x))


def _write_columns(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(x) for x in row])


def write_series_csv(path, t, U, V) -> None:
    _write_columns(path, ("t", "U", "V"), (t, U, V))


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def default_grid(p: ModelParams) -> DualGrid:
    return build_grid(p.a, p.L, *default_resolution(p.a, p.L, p.d_u, p.growth.r))


def default_t_end(p: ModelParams) -> float:
    return max(50.0 / p.gamma, 20.0 * p.L**2 / p.d_u)


def initial_state(grid: DualGrid, u0: float = 1.0, v0: float = 0.5) -> State:
    return State(np.full(grid.n_u, float(u0)), np.full(grid.n_pred, float(v0)), 0.0)


def _check_sizes(grid: DualGrid, u, v) -> None:
    if u.shape[-1] != grid.n_u or v.shape[-1] != grid.n_pred:
        raise SizeMismatch(
            f"state sizes ({u.shape[-1]}, {v.shape[-1]}) do not match grid ({grid.n_u}, {grid.n_pred})"
        )


def rhs_arrays(grid: DualGrid, p: ModelParams, u: np.ndarray, v: np.ndarray):
    m = grid.n_pred
    chi = grid.predation_weight
    du = p.d_u * (grid.lap_u @ u) + p.growth.f(u)
    uA = u[:m]
    du[:m] -= p.beta * chi * uA * v
    dv = p.d_v * (grid.lap_v @ v) + (p.alpha * uA - p.gamma) * v
    return du, dv


def rhs(grid: DualGrid, p: ModelParams, s: State) -> State:
    u = np.asarray(s.u, dtype=float)
    v = np.asarray(s.v, dtype=float)
    _check_sizes(grid, u, v)
    du, dv = rhs_arrays(grid, p, u, v)
    return State(du, dv, s.t)


def jacobian_arrays(grid: DualGrid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> sp.csc_matrix:
    m = grid.n_pred
    n = grid.n_u
    chi = grid.predation_weight
    uA = u[:m]
    d_uu = p.growth.f_prime(u).copy()
    d_uu[:m] -= p.beta * chi * v
    J_uu = p.d_u * grid.lap_u + sp.diags(d_uu)
    J_uv = sp.csr_matrix((-p.beta * chi * uA, (np.arange(m), np.arange(m))), shape=(n, m))
    J_vu = sp.csr_matrix((p.alpha * v, (np.arange(m), np.arange(m))), shape=(m, n))
    J_vv = p.d_v * grid.lap_v + sp.diags(p.alpha * uA - p.gamma)
    return sp.bmat([[J_uu, J_uv], [J_vu, J_vv]], format="csc")


def jacobian(grid: DualGrid, p: ModelParams, s: State) -> sp.csc_matrix:
    u = np.asarray(s.u, dtype=float)
    v = np.asarray(s.v, dtype=float)
    _check_sizes(grid, u, v)
    return jacobian_arrays(grid, p, u, v)


def _sample_times(t0: float, t_end: float, n_snapshots: int, tail_start: float, n_tail: int) -> np.ndarray:
    uniform = np.linspace(t0, t_end, n_snapshots + 1)
    tail = np.linspace(max(tail_start, t0), t_end, n_tail + 1)
    return np.unique(np.concatenate([uniform, tail]))


def simulate(
    grid: DualGrid,
    p: ModelParams,
    init: State | None = None,
    t_end: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_snapshots: int = 200,
    n_tail: int = 1000,
    tail_frac: float = 0.25,
    window_start: float | None = None,
) -> Trajectory:
    """Integrate from ``init`` to ``t_end``.

    Output times are ``n_snapshots`` uniform intervals plus ``n_tail`` uniform
    intervals over the last ``tail_frac`` of the window ``[window_start, t_end]``
    (window_start defaults to ``init.t``).
    """
    if init is None:
        init = initial_state(grid)
    if t_end is None:
        t_end = init.t + default_t_end(p)
    if not t_end > init.t:
        raise DomainError(f"t_end={t_end} must exceed the initial time {init.t}")
    if not (rtol > 0 and atol > 0):
        raise DomainError("tolerances must be positive")
    if (p.a, p.L) != (grid.a, grid.L):
        raise SizeMismatch("grid geometry does not match parameters")
    y0 = np.concatenate([np.asarray(init.u, float), np.asarray(init.v, float)])
    _check_sizes(grid, init.u, init.v)
    if not np.all(np.isfinite(y0)):
        raise NonFiniteState("initial state is not finite")

    nu = grid.n_u
    if window_start is None:
        window_start = init.t
    tail_start = t_end - tail_frac * (t_end - window_start)
    t_eval = _sample_times(init.t, t_end, n_snapshots, tail_start, n_tail)

    def fun(t, y):
        du, dv = rhs_arrays(grid, p, y[:nu], y[nu:])
        return np.concatenate([du, dv])

    def jac(t, y):
        return jacobian_arrays(grid, p, y[:nu], y[nu:])

    solver = Radau(fun, init.t, y0, t_end, rtol=rtol, atol=atol, jac=jac)
    out = np.empty((len(t_eval), y0.size))
    out[0] = y0
    k = 1
    n_steps = 0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessFailure(f"Radau failed at t={solver.t:.6g}: {msg}")
        n_steps += 1
        if not np.all(np.isfinite(solver.y)):
            raise NonFiniteState(f"non-finite state at t={solver.t:.6g}")
        if k < len(t_eval) and t_eval[k] <= solver.t:
            dense = solver.dense_output()
            j = k
            while j < len(t_eval) and t_eval[j] <= solver.t:
                j += 1
            out[k:j] = dense(t_eval[k:j]).T
            k = j
    if k < len(t_eval):
        out[k:] = solver.y

    u = out[:, :nu]
    v = out[:, nu:]
    stats = {
        "method": "Radau IIA (order 5), scipy.integrate.Radau",
        "rtol": rtol,
        "atol": atol,
        "n_steps": n_steps,
        "nfev": solver.nfev,
        "njev": solver.njev,
        "nlu": solver.nlu,
        "t0": float(init.t),
        "t_end": float(t_end),
    }
    return Trajectory(
        t=t_eval,
        u=u,
        v=v,
        U=u @ grid.weights_u,
        V=v @ grid.weights_v,
        params=p,
        grid=grid,
        solver_stats=stats,
        window_start=float(window_start),
    )


def extend(traj: Trajectory, t_end: float, **kwargs) -> Trajectory:
    """Continue ``traj`` to ``t_end``; the result spans the original window start."""
    more = simulate(
        traj.grid,
        traj.params,
        traj.final,
        t_end,
        window_start=traj.window_start,
        **kwargs,
    )
    stats = dict(more.solver_stats)
    for key in ("n_steps", "nfev", "njev", "nlu"):
        stats[key] = traj.solver_stats.get(key, 0) + more.solver_stats[key]
    stats["t0"] = traj.solver_stats.get("t0", float(traj.t[0]))
    return Trajectory(
        t=np.concatenate([traj.t, more.t[1:]]),
        u=np.concatenate([traj.u, more.u[1:]]),
        v=np.concatenate([traj.v, more.v[1:]]),
        U=np.concatenate([traj.U, more.U[1:]]),
        V=np.concatenate([traj.V, more.V[1:]]),
        params=traj.params,
        grid=traj.grid,
        solver_stats=stats,
        window_start=traj.window_start,
    )


def totals(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    return traj.U, traj.V
