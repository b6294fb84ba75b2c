"""Command-line entry point.

Configuration is a JSON file (nested blocks) plus ``--set block.key=value``
overrides and an optional ``--preset`` for the model parameters.  Every run
writes ``metadata.json`` with the fully resolved configuration next to its
results.  Exit codes: 0 success, 1 solver failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dynamics import PRESETS, ModelParams
from .errors import ConfigError, ExzoneError, SolverError

__all__ = ["RunConfig", "parse_config", "run", "main", "build_parser"]

ENV_OUTPUT_DIR = "EXZONE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "exzone_out"
COMMANDS = ("simulate", "steady", "sweep", "thinlimit", "radial", "classify")


@dataclass
class ParamsBlock:
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    d_u: float | None = None
    d_v: float | None = None
    r: float | None = None
    theta: float | None = None
    a: float | None = None
    L: float | None = None

    def model(self, a: float | None = None) -> ModelParams:
        d = asdict(self)
        if a is not None:
            d["a"] = a
        return ModelParams.from_dict(d)


@dataclass
class GridBlock:
    h: float | None = None


@dataclass
class SolverBlock:
    t_end: float | None = None
    rtol: float = 1e-7
    atol: float = 1e-9
    n_snapshots: int = 200
    n_tail: int = 1000
    tail_frac: float = 0.25
    tol_eq: float = 1e-4
    tol_ext: float = 1e-5
    max_extend: float = 4.0


@dataclass
class SteadyBlock:
    strategy: str = "from-dynamics"
    tol: float = 1e-10
    max_iter: int = 40


@dataclass
class SweepBlock:
    a_list: list | None = None
    n: int = 40
    a_min: float | None = None
    a_max: float | None = None
    jobs: int = 1

    def grid(self, L: float) -> np.ndarray:
        if self.a_list is not None:
            return np.asarray(self.a_list, dtype=float)
        if self.a_min is None and self.a_max is None:
            return L * np.arange(1, self.n + 1) / (self.n + 1)
        lo = self.a_min if self.a_min is not None else L / (self.n + 1)
        hi = self.a_max if self.a_max is not None else L * self.n / (self.n + 1)
        return np.linspace(lo, hi, self.n)


@dataclass
class ThinLimitBlock:
    L_list: list = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    n: int | None = None


@dataclass
class RadialBlock:
    N: int = 2
    rho: float = 1.0
    R_list: list = field(default_factory=lambda: [4.0, 6.0, 8.0, 12.0])
    sigma: float | None = None
    eta: float = 0.05
    R_max: float = 40.0
    h: float = 0.01


@dataclass
class ClassifyBlock:
    input: str | None = None


BLOCKS = {
    "params": ParamsBlock,
    "grid": GridBlock,
    "solver": SolverBlock,
    "steady": SteadyBlock,
    "sweep": SweepBlock,
    "thinlimit": ThinLimitBlock,
    "radial": RadialBlock,
    "classify": ClassifyBlock,
}


@dataclass
class RunConfig:
    params: ParamsBlock = field(default_factory=ParamsBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    steady: SteadyBlock = field(default_factory=SteadyBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    thinlimit: ThinLimitBlock = field(default_factory=ThinLimitBlock)
    radial: RadialBlock = field(default_factory=RadialBlock)
    classify: ClassifyBlock = field(default_factory=ClassifyBlock)
    output_dir: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def sim_config(self):
        from .sweep import SimConfig

        s = self.solver
        return SimConfig(
            t_end=s.t_end,
            rtol=s.rtol,
            atol=s.atol,
            n_snapshots=s.n_snapshots,
            n_tail=s.n_tail,
            tail_frac=s.tail_frac,
            tol_eq=s.tol_eq,
            tol_ext=s.tol_ext,
            max_extend=s.max_extend,
            h=self.grid.h,
        )


# ---------------------------------------------------------------------------
# parsing and validation


def _coerce(value, current_type: str, where: str, errors: list[str]):
    """Convert a JSON value to the annotated field type, recording failures."""
    if value is None:
        if "None" in current_type:
            return None
        errors.append(f"{where}: must not be null")
        return None
    if current_type.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{where}: expected a number, got {value!r}")
            return None
        return float(value)
    if current_type.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            errors.append(f"{where}: expected an integer, got {value!r}")
            return None
        return int(value)
    if current_type.startswith("str"):
        if not isinstance(value, str):
            errors.append(f"{where}: expected a string, got {value!r}")
            return None
        return value
    if current_type.startswith("list"):
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
        ):
            errors.append(f"{where}: expected a list of numbers, got {value!r}")
            return None
        return [float(x) for x in value]
    return value


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_override(text: str) -> dict:
    if "=" not in text:
        raise ConfigError([f"--set {text!r}: expected key.path=value"])
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node: dict = {}
    cur = node
    parts = key.strip().split(".")
    for part in parts[:-1]:
        cur[part] = {}
        cur = cur[part]
    cur[parts[-1]] = value
    return node


def _build(raw: dict) -> RunConfig:
    errors: list[str] = []
    cfg = RunConfig()
    for key in raw:
        if key not in BLOCKS and key != "output_dir":
            errors.append(f"{key}: unknown configuration block")
    for name, cls in BLOCKS.items():
        block = raw.get(name, {})
        if not isinstance(block, dict):
            errors.append(f"{name}: expected an object")
            continue
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for k, v in block.items():
            if k not in known:
                errors.append(f"{name}.{k}: unknown key")
                continue
            kwargs[k] = _coerce(v, str(known[k].type), f"{name}.{k}", errors)
        setattr(cfg, name, cls(**{k: v for k, v in kwargs.items() if v is not None or "None" in str(known[k].type)}))
    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        errors.append("output_dir: expected a string")
    else:
        cfg.output_dir = out
    errors += _validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate(cfg: RunConfig) -> list[str]:
    errors = []
    p = cfg.params
    for name in ("alpha", "beta", "gamma", "d_u", "d_v", "r"):
        val = getattr(p, name)
        if val is not None and not (val > 0 and math.isfinite(val)):
            errors.append(f"params.{name}: must be positive and finite, got {val}")
    if p.theta is not None and not (0.0 < p.theta < 0.5):
        errors.append(f"params.theta: must lie in (0, 1/2) so that the growth term has positive net potential, got {p.theta}")
    if p.L is not None and not p.L > 0:
        errors.append(f"params.L: must be positive, got {p.L}")
    if p.a is not None and p.L is not None and not (0.0 < p.a < p.L):
        errors.append(f"params.a: geometry requires 0 < a < L, got a={p.a}, L={p.L}")
    s = cfg.solver
    if s.t_end is not None and not s.t_end > 0:
        errors.append("solver.t_end: must be positive")
    for name in ("rtol", "atol", "tol_eq", "tol_ext"):
        if not getattr(s, name) > 0:
            errors.append(f"solver.{name}: must be positive")
    if not (0.0 < s.tail_frac <= 1.0):
        errors.append("solver.tail_frac: must lie in (0, 1]")
    if s.max_extend < 1.0:
        errors.append("solver.max_extend: must be >= 1")
    if s.n_snapshots < 1 or s.n_tail < 1:
        errors.append("solver.n_snapshots/n_tail: must be >= 1")
    if cfg.grid.h is not None and not cfg.grid.h > 0:
        errors.append("grid.h: must be positive")
    if cfg.steady.strategy not in ("from-dynamics", "from-subsolution", "homogeneous"):
        errors.append(f"steady.strategy: unknown strategy {cfg.steady.strategy!r}")
    sw = cfg.sweep
    if sw.jobs < 1:
        errors.append("sweep.jobs: must be >= 1")
    if sw.n < 1:
        errors.append("sweep.n: must be >= 1")
    if p.L is not None:
        a = sw.grid(p.L)
        if a.size and (np.any(np.diff(a) <= 0) or a[0] <= 0 or a[-1] >= p.L):
            errors.append(f"sweep: a values must be strictly increasing inside (0, L={p.L})")
    if any(L <= 0 for L in cfg.thinlimit.L_list):
        errors.append("thinlimit.L_list: lengths must be positive")
    rd = cfg.radial
    if rd.N < 1:
        errors.append("radial.N: must be >= 1")
    if not rd.rho > 0:
        errors.append("radial.rho: must be positive")
    if any(R <= rd.rho for R in rd.R_list):
        errors.append("radial.R_list: every R must exceed rho")
    if not (0.0 < rd.eta < 1.0):
        errors.append("radial.eta: must lie in (0, 1)")
    if rd.sigma is not None and not rd.sigma > 0:
        errors.append("radial.sigma: must be positive")
    return errors


def parse_config(path=None, overrides=(), preset: str | None = None) -> RunConfig:
    """Resolve defaults, then a preset, then the JSON file, then ``--set`` overrides."""
    raw: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError([f"preset: unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}"])
        raw = {"params": dict(PRESETS[preset])}
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError([f"config: cannot read {path}: {exc}"]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: {path} is not valid JSON: {exc}"]) from exc
        if not isinstance(loaded, dict):
            raise ConfigError(["config: top level must be an object"])
        raw = _merge(raw, loaded)
    for item in overrides:
        raw = _merge(raw, _parse_override(item))
    return _build(raw)


def _require_params(cfg: RunConfig, need_a: bool) -> ModelParams:
    p = cfg.params
    missing = [k for k, v in asdict(p).items() if v is None and (need_a or k != "a")]
    if missing:
        raise ConfigError([f"params.{k}: required" for k in missing])
    try:
        return p.model(a=None if need_a else (p.a if p.a is not None else 0.5 * p.L))
    except ExzoneError as exc:
        raise ConfigError([f"params: {exc}"]) from exc


# ---------------------------------------------------------------------------
# commands


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def _outcome_doc(out) -> dict:
    return {
        "class": out.regime,
        "period": out.period,
        "amplitudes": {"U": out.amplitudes[0], "V": out.amplitudes[1]},
        "tail_stats": asdict(out.stats),
        "n_peaks": out.n_peaks,
        "flags": list(out.flags),
    }


def _cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    from .sweep import classify, simulate_row

    p = _require_params(cfg, need_a=True)
    sim = cfg.sim_config()
    row, traj = simulate_row(p, sim)
    traj.to_csv(out / "series.csv")
    from .dynamics import _write_columns

    _write_columns(out / "final_u.csv", ("x", "u"), (traj.grid.nodes_u, traj.u[-1]))
    _write_columns(out / "final_v.csv", ("x", "v"), (traj.grid.nodes_v, traj.v[-1]))
    outcome = classify(traj, sim.tol_eq, sim.tol_ext, sim.tail_frac)
    doc = _outcome_doc(outcome)
    doc["row_flags"] = list(row.flags)
    _write_json(out / "classification.json", doc)
    _write_profile_rows(out / "row.csv", [row])
    print(f"class={outcome.regime} period={outcome.period} V_bar={outcome.stats.V_bar:.6g} t_end={row.t_end:.6g}")
    return {"grid": traj.grid.describe(), "solver": traj.solver_stats}


def _write_profile_rows(path: Path, rows) -> None:
    import csv

    from .sweep import LimitingProfile

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LimitingProfile.COLUMNS)
        for r in rows:
            w.writerow(r.csv_fields())


def _cmd_steady(cfg: RunConfig, out: Path) -> dict:
    from .steady import initial_guess, newton_steady

    p = _require_params(cfg, need_a=True)
    grid = cfg.sim_config().grid_for(p)
    init = initial_guess(grid, p, cfg.steady.strategy, t_end=cfg.solver.t_end)
    st = newton_steady(grid, p, init, tol=cfg.steady.tol, max_iter=cfg.steady.max_iter)
    st.export(out, grid, p)
    cert = st.certificate(grid, p)
    print(" ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in cert.items()))
    return {"grid": grid.describe()}


def _cmd_sweep(cfg: RunConfig, out: Path, jobs: int | None) -> dict:
    from .sweep import limiting_profile

    p = _require_params(cfg, need_a=False)
    a_grid = cfg.sweep.grid(p.L)
    prof = limiting_profile(p, a_grid, cfg.sim_config(), jobs=jobs or cfg.sweep.jobs)
    prof.to_csv(out / "profile.csv")
    prof.to_json(out / "profile.json")
    m = prof.markers
    print(f"rows={len(prof.rows)} a_hopf={m.a_hopf} a_ext={m.a_ext} a_max={m.a_max}")
    return {}


def _cmd_thinlimit(cfg: RunConfig, out: Path) -> dict:
    from .asymptotics import export_coeffs, large_L_slope, thin_limit_coeffs
    from .dynamics import _write_columns

    p0 = _require_params(cfg, need_a=False)
    limit = large_L_slope(p0)
    table = []
    for L in cfg.thinlimit.L_list:
        p = replace(p0, L=float(L), a=0.5 * float(L))
        c = thin_limit_coeffs(p, float(L), n=cfg.thinlimit.n)
        err = abs(c.V1 - limit)
        table.append((float(L), c.V0, c.V1, c.w1_slope0, c.w2_slope0, err, err / abs(limit) if limit else math.nan))
        export_coeffs(out / f"coeffs_L{L:g}.json", c, limit)
    cols = ("L", "V0", "V1", "w1_slope0", "w2_slope0", "abs_err_V1", "rel_err_V1")
    _write_columns(out / "thinlimit.csv", cols, list(zip(*table)))
    _write_json(out / "thinlimit.json", {"V1_large_L_limit": limit, "table": [dict(zip(cols, r)) for r in table]})
    print(f"V1 limit (L -> inf) = {limit:.6f}")
    for r in table:
        print("L={:<6g} V0={:.6f} V1={:.6f} |err|={:.3e} rel={:.3f}".format(r[0], r[1], r[2], r[5], r[6]))
    return {}


def _cmd_radial(cfg: RunConfig, out: Path) -> dict:
    from .growth import make_growth
    from .radial import RadialConfig, annulus_zeta, ball_solution, export_profile, threshold_radius

    p = cfg.params
    missing = [k for k in ("r", "theta", "d_u") if getattr(p, k) is None]
    if missing:
        raise ConfigError([f"params.{k}: required" for k in missing])
    rd = cfg.radial
    try:
        g = make_growth(p.r, p.theta)
        base = RadialConfig(N=rd.N, d_u=p.d_u, g=g, rho=rd.rho, R=max(rd.R_list + [rd.rho * 2]), h=rd.h,
                            sigma=rd.sigma if rd.sigma is not None else 1.0)
    except ExzoneError as exc:
        raise ConfigError([f"radial: {exc}"]) from exc
    boundary = {}
    for R in rd.R_list:
        prof = annulus_zeta(replace(base, R=float(R)))
        export_profile(out / f"zeta_R{R:g}.csv", prof, "zeta")
        boundary[f"{R:g}"] = prof.boundary_value
    R0 = threshold_radius(base, rd.eta, R_max=rd.R_max)
    doc = {"zeta_boundary_values": boundary, "eta": rd.eta, "threshold_radius": R0}
    if rd.sigma is not None:
        ball = ball_solution(base)
        doc["ball"] = None if ball is None else {"sigma": rd.sigma, **ball.meta}
        if ball is not None:
            export_profile(out / "ball.csv", ball, "V")
    _write_json(out / "radial.json", doc)
    for R, b in boundary.items():
        print(f"R={R:<6} zeta_R(R)={b:.10f}")
    print(f"threshold radius for eta={rd.eta}: {R0}")
    return {}


def _cmd_classify(cfg: RunConfig, out: Path, path: str | None) -> dict:
    from .dynamics import read_series_csv
    from .sweep import classify

    src = path or cfg.classify.input
    if src is None:
        raise ConfigError(["classify.input: a series CSV (t,U,V) is required (--input)"])
    if cfg.params.L is None:
        raise ConfigError(["params.L: required to classify a stored series"])
    try:
        t, U, V = read_series_csv(src)
    except (OSError, ValueError) as exc:
        raise ConfigError([f"classify.input: cannot read {src}: {exc}"]) from exc
    s = cfg.solver
    outcome = classify((t, U, V), s.tol_eq, s.tol_ext, s.tail_frac, L=cfg.params.L)
    _write_json(out / "classification.json", _outcome_doc(outcome))
    print(f"class={outcome.regime} period={outcome.period}")
    return {}


def run(command: str, cfg: RunConfig, out_dir=None, jobs: int | None = None, input_path: str | None = None) -> int:
    """Execute one subcommand; returns the process exit code."""
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return 2
    out = Path(out_dir or cfg.output_dir or os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if command == "simulate":
            extra = _cmd_simulate(cfg, out)
        elif command == "steady":
            extra = _cmd_steady(cfg, out)
        elif command == "sweep":
            extra = _cmd_sweep(cfg, out, jobs)
        elif command == "thinlimit":
            extra = _cmd_thinlimit(cfg, out)
        elif command == "radial":
            extra = _cmd_radial(cfg, out)
        else:
            extra = _cmd_classify(cfg, out, input_path)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except (SolverError, ExzoneError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        _write_metadata(out, command, cfg, {"error": f"{type(exc).__name__}: {exc}"})
        return 1
    _write_metadata(out, command, cfg, extra)
    return 0


def _write_metadata(out: Path, command: str, cfg: RunConfig, extra: dict) -> None:
    doc = {
        "tool": "exzone",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        **extra,
    }
    _write_json(out / "metadata.json", doc)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exzone", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"exzone {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate one parameter set and classify its long-time regime",
        "steady": "Newton-polish a stationary state and write its certificates",
        "sweep": "limiting profiles over a grid of predator-domain sizes a",
        "thinlimit": "small-a expansion coefficients over a list of domain lengths",
        "radial": "annulus and ball auxiliary profiles, threshold radius search",
        "classify": "re-classify a stored (t,U,V) series",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="load model parameters from a named set")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. params.a=0.3 (repeatable)")
        sp.add_argument("--out", help=f"output directory (default: ${ENV_OUTPUT_DIR} or ./{DEFAULT_OUTPUT_DIR})")
        sp.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        if name == "sweep":
            sp.add_argument("--jobs", type=int, help="number of worker processes")
        if name == "classify":
            sp.add_argument("--input", help="series CSV with columns t,U,V")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides, args.preset)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    if args.dump_config:
        print(cfg.dumps())
        return 0
    jobs = getattr(args, "jobs", None)
    if jobs is not None and jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return 2
    return run(args.command, cfg, args.out, jobs, getattr(args, "input", None))


if __name__ == "__main__":
    sys.exit(main())
