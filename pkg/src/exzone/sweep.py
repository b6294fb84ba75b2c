"""Sweeps over the predator-domain size ``a``: tail statistics, regime labels, markers.

Each row is one long simulation from ``u = 1, v = 0.5``.  Rows are independent
and run in a process pool; results are stored in ``a`` order so the output does
not depend on the number of workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.signal import find_peaks

from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    ModelParams,
    Trajectory,
    default_t_end,
    extend,
    initial_state,
    simulate,
)
from .errors import DomainError, InsufficientTail, SolverError
from .grid import build_grid, default_resolution

__all__ = [
    "REGIMES",
    "TailStats",
    "Outcome",
    "SimConfig",
    "Row",
    "LimitingProfile",
    "Markers",
    "tail_stats",
    "classify",
    "simulate_row",
    "limiting_profile",
    "detect_markers",
]

REGIMES = ("coexistence_equilibrium", "extinction", "prey_only", "limit_cycle", "irregular")
MIN_TAIL_SAMPLES = 50
PERIOD_RSD = 0.05
MIN_PEAKS = 4


@dataclass(frozen=True)
class TailStats:
    U_hat: float
    U_bar: float
    U_check: float
    V_hat: float
    V_bar: float
    V_check: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.U_hat, self.U_bar, self.U_check, self.V_hat, self.V_bar, self.V_check)


@dataclass(frozen=True)
class Outcome:
    regime: str
    period: float | None
    amplitudes: tuple[float, float]
    stats: TailStats
    n_peaks: int = 0
    flags: tuple[str, ...] = ()


def _series(traj, L=None):
    """(t, U, V, window_start, L) from a Trajectory or a (t, U, V) triple."""
    if isinstance(traj, Trajectory):
        return traj.t, traj.U, traj.V, traj.window_start, traj.params.L
    t, U, V = (np.asarray(x, float) for x in traj)
    return t, U, V, float(t[0]), L


def _tail(t, U, V, window_start, frac):
    if not (0.0 < frac <= 1.0):
        raise DomainError(f"tail fraction must lie in (0, 1], got {frac}")
    t_end = float(t[-1])
    t0 = t_end - frac * (t_end - window_start)
    m = t >= t0 - 1e-12 * max(1.0, abs(t_end))
    if int(m.sum()) < MIN_TAIL_SAMPLES:
        raise InsufficientTail(f"tail window [{t0:.6g}, {t_end:.6g}] holds {int(m.sum())} samples (< {MIN_TAIL_SAMPLES})")
    return t[m], U[m], V[m]


def _time_mean(t, y):
    span = t[-1] - t[0]
    if span <= 0:
        return float(np.mean(y))
    return float(np.trapezoid(y, t) / span)


def tail_stats(traj, frac: float = 0.25) -> TailStats:
    """Max, time-average and min of U and V over the last ``frac`` of the window."""
    t, U, V, ws, _ = _series(traj)
    tt, UU, VV = _tail(t, U, V, ws, frac)
    return TailStats(
        U_hat=float(UU.max()),
        U_bar=_time_mean(tt, UU),
        U_check=float(UU.min()),
        V_hat=float(VV.max()),
        V_bar=_time_mean(tt, VV),
        V_check=float(VV.min()),
    )


def _peaks(tt, VV, st: TailStats):
    span = st.V_hat - st.V_check
    if span <= 0:
        return np.array([], dtype=int)
    idx, _ = find_peaks(VV, height=st.V_bar, prominence=0.25 * span)
    return idx


def classify(
    traj,
    tol_eq: float = 1e-4,
    tol_ext: float = 1e-5,
    frac: float = 0.25,
    L: float | None = None,
) -> Outcome:
    """Label the long-time regime of a run from its tail.

    ``traj`` is a Trajectory or a ``(t, U, V)`` triple; in the latter case the
    domain length ``L`` must be given.
    """
    t, U, V, ws, L = _series(traj, L)
    if L is None:
        raise DomainError("domain length L is required to classify a bare series")
    tt, UU, VV = _tail(t, U, V, ws, frac)
    st = tail_stats((t, U, V) if not isinstance(traj, Trajectory) else traj, frac)
    dU, dV = st.U_hat - st.U_check, st.V_hat - st.V_check
    amps = (dU, dV)
    flags: list[str] = []

    if st.V_bar < tol_ext:
        if st.U_bar < tol_ext * L:
            return Outcome("extinction", None, amps, st)
        if st.U_bar >= (1.0 - tol_eq) * L:
            return Outcome("prey_only", None, amps, st)
        # predator gone but prey neither at 0 nor at capacity: still relaxing
        flags.append("predator_extinct_prey_transient")
        return Outcome("irregular", None, amps, st, flags=tuple(flags))

    scale = max(st.U_bar, st.V_bar)
    if max(dU, dV) < tol_eq * scale:
        return Outcome("coexistence_equilibrium", None, amps, st)

    idx = _peaks(tt, VV, st)
    if len(idx) >= MIN_PEAKS:
        spacing = np.diff(tt[idx])
        rsd = float(np.std(spacing) / np.mean(spacing))
        if rsd < PERIOD_RSD:
            heights = VV[idx]
            if abs(heights[-1] - heights[0]) > 0.05 * dV:
                flags.append("amplitude_drift")
            return Outcome("limit_cycle", float(np.mean(spacing)), amps, st, n_peaks=len(idx), flags=tuple(flags))
    return Outcome("irregular", None, amps, st, n_peaks=len(idx), flags=tuple(flags))


def _near_boundary(out: Outcome, tol_eq: float, tol_ext: float, L: float, t, V, ws, frac) -> bool:
    """True if the label sits within a factor 2 of one of the decision thresholds."""
    st = out.stats

    def near(x, thr):
        return thr / 2.0 <= x <= 2.0 * thr

    if near(st.V_bar, tol_ext):
        return True
    if st.V_bar < tol_ext and near(st.U_bar, tol_ext * L):
        return True
    if st.V_bar >= tol_ext:
        rel = max(out.amplitudes) / max(st.U_bar, st.V_bar)
        if near(rel, tol_eq):
            return True
        if out.regime in ("limit_cycle", "irregular"):
            if MIN_PEAKS // 2 <= out.n_peaks < 2 * MIN_PEAKS:
                return True
            tt, _, VV = _tail(t, V, V, ws, frac)
            idx = _peaks(tt, VV, st)
            if len(idx) >= 3:
                sp = np.diff(tt[idx])
                if near(float(np.std(sp) / np.mean(sp)), PERIOD_RSD):
                    return True
    return out.regime == "irregular"


@dataclass(frozen=True)
class SimConfig:
    t_end: float | None = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    n_snapshots: int = 200
    n_tail: int = 1000
    tail_frac: float = 0.25
    tol_eq: float = 1e-4
    tol_ext: float = 1e-5
    max_extend: float = 4.0
    h: float | None = None
    u0: float = 1.0
    v0: float = 0.5

    def __post_init__(self):
        if self.t_end is not None and not self.t_end > 0:
            raise DomainError("t_end must be positive")
        if not (0.0 < self.tail_frac <= 1.0):
            raise DomainError("tail_frac must lie in (0, 1]")
        if self.max_extend < 1.0:
            raise DomainError("max_extend must be >= 1")
        if self.h is not None and not self.h > 0:
            raise DomainError("h must be positive")

    def grid_for(self, p: ModelParams):
        if self.h is None:
            n_pred, n_ex = default_resolution(p.a, p.L, p.d_u, p.growth.r)
        else:
            n_pred = max(3, math.ceil(p.a / self.h - 1e-9) + 1)
            n_ex = max(3, math.ceil((p.L - p.a) / self.h - 1e-9) + 1)
        return build_grid(p.a, p.L, n_pred, n_ex)

    def horizon(self, p: ModelParams) -> float:
        return self.t_end if self.t_end is not None else default_t_end(p)


@dataclass(frozen=True)
class Row:
    a: float
    stats: TailStats | None
    regime: str
    period: float | None
    t_end: float
    flags: tuple[str, ...] = ()

    def csv_fields(self) -> list[str]:
        vals = self.stats.as_tuple() if self.stats is not None else (math.nan,) * 6
        period = "" if self.period is None else repr(float(self.period))
        return [repr(float(self.a)), *(repr(float(x)) for x in vals), self.regime, period, ";".join(self.flags)]


def simulate_row(p: ModelParams, cfg: SimConfig) -> tuple[Row, Trajectory]:
    """One simulate + classify, extending the horizon by 50% (to at most max_extend times) near a threshold."""
    grid = cfg.grid_for(p)
    T0 = cfg.horizon(p)
    kw = dict(rtol=cfg.rtol, atol=cfg.atol, n_snapshots=cfg.n_snapshots, n_tail=cfg.n_tail, tail_frac=cfg.tail_frac)
    traj = simulate(grid, p, initial_state(grid, cfg.u0, cfg.v0), T0, **kw)
    flags: list[str] = []
    while True:
        out = classify(traj, cfg.tol_eq, cfg.tol_ext, cfg.tail_frac)
        T = float(traj.t[-1])
        if not _near_boundary(out, cfg.tol_eq, cfg.tol_ext, p.L, traj.t, traj.V, traj.window_start, cfg.tail_frac):
            break
        T_next = min(1.5 * T, cfg.max_extend * T0)
        if T_next <= T * (1 + 1e-12):
            flags.append("near_threshold")
            break
        traj = extend(traj, T_next, **kw)
        flags.append(f"extended_to={T_next!r}")
    row = Row(
        a=p.a,
        stats=out.stats,
        regime=out.regime,
        period=out.period,
        t_end=float(traj.t[-1]),
        flags=tuple(flags) + out.flags,
    )
    return row, traj


def _row_task(args) -> Row:
    p, cfg = args
    try:
        return simulate_row(p, cfg)[0]
    except (SolverError, InsufficientTail, DomainError) as exc:
        return Row(a=p.a, stats=None, regime="failed", period=None, t_end=math.nan, flags=(f"error={type(exc).__name__}: {exc}",))


@dataclass(frozen=True)
class Markers:
    a_hopf: float | None
    a_ext: float | None
    a_max: float | None
    a_max_cell: tuple[float, float] | None


@dataclass
class LimitingProfile:
    a_grid: np.ndarray
    rows: list[Row]
    params: ModelParams
    config: SimConfig
    markers: Markers | None = None
    notes: dict = field(default_factory=dict)

    COLUMNS = ("a", "U_hat", "U_bar", "U_check", "V_hat", "V_bar", "V_check", "class", "period", "flags")

    def column(self, name: str) -> np.ndarray:
        i = ("U_hat", "U_bar", "U_check", "V_hat", "V_bar", "V_check").index(name)
        return np.array([r.stats.as_tuple()[i] if r.stats else math.nan for r in self.rows])

    @property
    def regimes(self) -> list[str]:
        return [r.regime for r in self.rows]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow(r.csv_fields())

    def to_json(self, path) -> None:
        m = self.markers or detect_markers(self)
        doc = {
            "markers": asdict(m),
            "params": self.params.as_dict(),
            "config": asdict(self.config),
            "a_grid": [float(a) for a in self.a_grid],
            "t_end": [r.t_end for r in self.rows],
            "notes": self.notes,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


def _validate_grid(a_grid, L: float) -> np.ndarray:
    a = np.asarray(a_grid, dtype=float).ravel()
    if a.size == 0:
        raise DomainError("a_grid is empty")
    if np.any(np.diff(a) <= 0):
        raise DomainError("a_grid must be strictly increasing")
    if a[0] <= 0 or a[-1] >= L:
        raise DomainError(f"a_grid must lie inside (0, L={L})")
    return a


def limiting_profile(p: ModelParams, a_grid, cfg: SimConfig | None = None, jobs: int = 1) -> LimitingProfile:
    """Run one row per ``a`` (any ``p.a`` is ignored) with up to ``jobs`` worker processes."""
    cfg = cfg or SimConfig()
    a = _validate_grid(a_grid, p.L)
    tasks = [(replace(p, a=float(ai)), cfg) for ai in a]
    if jobs <= 1 or len(tasks) == 1:
        rows = [_row_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_row_task, tasks))
    prof = LimitingProfile(a_grid=a, rows=rows, params=p, config=cfg)
    _flag_prey_monotonicity(prof)
    prof.markers = detect_markers(prof) if len(rows) >= 3 else Markers(None, None, _argmax_a(prof), None)
    return prof


def _flag_prey_monotonicity(prof: LimitingProfile) -> None:
    """Soft check that U_bar does not increase with a; offending rows get a flag."""
    U = prof.column("U_bar")
    tol = prof.config.tol_eq
    for k in range(1, len(U)):
        if np.isfinite(U[k]) and np.isfinite(U[k - 1]) and U[k] > U[k - 1] * (1.0 + tol) + tol:
            r = prof.rows[k]
            prof.rows[k] = replace(r, flags=r.flags + ("U_bar_increase",))


def _argmax_a(prof: LimitingProfile) -> float | None:
    V = prof.column("V_bar")
    if not np.any(np.isfinite(V)):
        return None
    return float(prof.a_grid[int(np.nanargmax(V))])


def detect_markers(prof: LimitingProfile) -> Markers:
    a = np.asarray(prof.a_grid, float)
    cls = prof.regimes
    a_hopf = a_ext = None
    for k in range(len(cls) - 1):
        if a_hopf is None and cls[k] == "coexistence_equilibrium" and cls[k + 1] == "limit_cycle":
            a_hopf = 0.5 * (a[k] + a[k + 1])
        if a_ext is None and cls[k] not in ("extinction", "failed") and cls[k + 1] == "extinction":
            a_ext = 0.5 * (a[k] + a[k + 1])
    V = prof.column("V_bar")
    a_max = cell = None
    if np.any(np.isfinite(V)):
        k = int(np.nanargmax(V))
        a_max = float(a[k])
        cell = (float(a[max(k - 1, 0)]), float(a[min(k + 1, len(a) - 1)]))
    return Markers(a_hopf=a_hopf, a_ext=a_ext, a_max=a_max, a_max_cell=cell)
