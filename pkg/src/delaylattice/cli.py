"""Command-line front end: config parsing, run orchestration and file output.

Config files are TOML::

    output = "out"

    [model]
    D = 1.0
    tau = 1.0
    nonlinearity = { kind = "logistic", r = 1.0, a = 0.5 }

    [simulation]
    N = 600
    dt = 0.02
    T = 200.0
    stride = 25                    # optional, snapshots every `stride` steps
    init = { kind = "bump", M = 2, amplitude = 0.5 }

    [analysis]
    level = 0.333                  # optional, defaults to E/2
    discard_fraction = 0.5
    inner = 0.5
    outer = 1.2

    [wave]
    c = 2.49
    h = 0.0025
    tol = 1e-11
    max_iter = 20000
    cmin = 1.0
    cmax = 3.0
    steps = 5
    workers = 4

Every section is optional; command-line flags override config values.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import __version__
from .dispersion import NoRealRootsError, characteristic_roots, compute_cstar, delta_table
from .model import LatticeModel, Nonlinearity, check_hypotheses, invaded_state
from .simulator import InitialData, SimulationError, resolve_dt, simulate
from .spreading import cone_checks, estimate_speed, track_front
from .waves import IterationStalled, residual_field, scan_wavespeeds, solve_profile

log = logging.getLogger("delaylattice")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    D: float = 1.0
    tau: float = 1.0
    nonlinearity: dict = field(default_factory=lambda: {"kind": "logistic", "r": 1.0, "a": 0.5})
    N: Optional[int] = None
    dt: float = 0.02
    T: float = 200.0
    stride: Optional[int] = None
    init: dict = field(default_factory=lambda: {"kind": "bump", "M": 2, "amplitude": 0.5})
    level: Optional[float] = None
    discard_fraction: float = 0.5
    inner: float = 0.5
    outer: float = 1.2
    c: Optional[float] = None
    h: Optional[float] = None
    tol: float = 1e-11
    max_iter: int = 20000
    cmin: Optional[float] = None
    cmax: Optional[float] = None
    steps: int = 5
    workers: int = 1
    output: str = "out"

    def validate(self):
        def positive(name):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(name, f"must be a positive number, got {v!r}")

        for name in ("D", "dt", "T", "tol", "h"):
            positive(name)
        if not (isinstance(self.tau, (int, float)) and self.tau >= 0):
            raise ConfigError("tau", f"must be >= 0, got {self.tau!r}")
        for name in ("N", "stride", "max_iter", "steps", "workers"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, int) and v >= 1):
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if self.level is not None and not 0 < self.level < 1:
            raise ConfigError("level", "must lie in (0, 1)")
        if not 0 <= self.discard_fraction < 1:
            raise ConfigError("discard_fraction", "must lie in [0, 1)")
        if not 0 < self.inner < self.outer:
            raise ConfigError("inner", "cone radii need 0 < inner < outer")
        try:
            self.g()
        except ValueError as exc:
            raise ConfigError("nonlinearity", str(exc)) from None
        return self

    def g(self) -> Nonlinearity:
        return Nonlinearity.from_spec(self.nonlinearity)

    def model(self) -> LatticeModel:
        return LatticeModel(float(self.D), float(self.tau), self.g())

    def initial_data(self) -> InitialData:
        spec = dict(self.init)
        kind = spec.pop("kind", "bump")
        try:
            if kind == "bump":
                return InitialData.bump(int(spec.get("M", 2)), float(spec.get("amplitude", 0.5)))
            if kind == "values":
                vals = np.asarray(spec["values"], dtype=float)
                return InitialData((vals.size - 1) // 2, values=vals)
            if kind == "constant":
                if self.N is None:
                    raise ConfigError("simulation.N", "constant initial data needs an explicit N")
                return InitialData.constant(self.N, float(spec["value"]))
        except KeyError as exc:
            raise ConfigError("simulation.init", f"missing key {exc}") from None
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("simulation.init", str(exc)) from None
        raise ConfigError("simulation.init.kind", f"unknown kind {kind!r}")


_SECTIONS = {
    "model": ("D", "tau", "nonlinearity"),
    "simulation": ("N", "dt", "T", "stride", "init"),
    "analysis": ("level", "discard_fraction", "inner", "outer"),
    "wave": ("c", "h", "tol", "max_iter", "cmin", "cmax", "steps", "workers"),
}


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    raw = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError("config", f"invalid TOML: {exc}") from None
    flat = {}
    for key, value in raw.items():
        if key == "output":
            flat["output"] = value
        elif key in _SECTIONS and isinstance(value, dict):
            for k, v in value.items():
                if k not in _SECTIONS[key]:
                    raise ConfigError(f"{key}.{k}", "unknown field")
                flat[k] = v
        else:
            raise ConfigError(key, "unknown section")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    logistic = {k: overrides.pop(k) for k in ("r", "a") if k in overrides}
    if logistic:
        base = dict(flat.get("nonlinearity", RunConfig().nonlinearity))
        if base.get("kind", "logistic") != "logistic":
            raise ConfigError("nonlinearity", "--r/--a only apply to the logistic nonlinearity")
        flat["nonlinearity"] = {**base, **logistic}
    flat.update(overrides)
    try:
        return RunConfig(**flat).validate()
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def _num_overrides(args) -> dict:
    keys = ("D", "tau", "N", "dt", "T", "stride", "level", "c", "h", "tol", "max_iter",
            "cmin", "cmax", "steps", "workers", "output")
    return {k: getattr(args, k, None) for k in keys + ("r", "a")}


# ---------------------------------------------------------------- output helpers

def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.output)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _manifest(cmd: str, cfg: RunConfig, **resolved) -> dict:
    return {"command": cmd, "version": __version__, "config": asdict(cfg), "resolved": resolved}


_PLOTS = {
    "simulate": '''import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("snapshots.csv")))
times = sorted({float(r["t"]) for r in rows})
pick = times[:: max(1, len(times) // 8)]
for t in pick:
    sel = [r for r in rows if float(r["t"]) == t]
    plt.plot([int(r["n"]) for r in sel], [float(r["u"]) for r in sel], label=f"t={t:g}")
plt.xlabel("n"); plt.ylabel("u"); plt.legend(); plt.savefig("snapshots.png", dpi=150)
''',
    "front-speed": '''import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("speed.csv")))
plt.plot([float(r["t"]) for r in rows], [float(r["position"]) for r in rows], ".")
plt.xlabel("t"); plt.ylabel("front position"); plt.savefig("speed.png", dpi=150)
''',
    "wave": '''import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("profile.csv")))
xi = [float(r["xi"]) for r in rows]
fig, (a, b) = plt.subplots(2, 1, sharex=True)
a.plot(xi, [float(r["phi"]) for r in rows]); a.set_ylabel("phi")
b.semilogy(xi, [abs(float(r["residual"])) if r["residual"] != "nan" else float("nan") for r in rows])
b.set_ylabel("|residual|"); b.set_xlabel("xi"); fig.savefig("profile.png", dpi=150)
''',
    "roots": '''import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("delta.csv")))
plt.plot([float(r["lambda"]) for r in rows], [float(r["delta"]) for r in rows])
plt.axhline(0, color="k", lw=0.5); plt.xlabel("lambda"); plt.ylabel("Delta")
plt.savefig("delta.png", dpi=150)
''',
}


def _emit_plot(out: Path, cmd: str):
    (out / "plot.py").write_text(_PLOTS[cmd])


# ---------------------------------------------------------------- subcommands

def cmd_check_hypotheses(cfg, args):
    report = check_hypotheses(cfg.g())
    out = _outdir(cfg)
    write_json(out / "manifest.json", _manifest("check-hypotheses", cfg, grid_n=report.grid_n, report=report.as_dict()))
    print(json.dumps(_jsonable(report.as_dict()), indent=2))
    return EXIT_OK


def cmd_speed(cfg, args):
    model = cfg.model()
    res = compute_cstar(model.D, model.rate)
    out = _outdir(cfg)
    write_json(out / "manifest.json", _manifest("speed", cfg, rate=model.rate, c_star=res.c_star,
                                                 lambda_star=res.lambda_star))
    print(f"c* = {res.c_star:.12g}")
    print(f"lambda* = {res.lambda_star:.12g}")
    return EXIT_OK


def cmd_roots(cfg, args):
    model = cfg.model()
    if cfg.c is None:
        raise ConfigError("c", "roots needs --c")
    res = compute_cstar(model.D, model.rate)
    out = _outdir(cfg)
    write_csv(out / "delta.csv", ("lambda", "delta"), delta_table(cfg.c, model.D, model.rate))
    if args.emit_plot:
        _emit_plot(out, "roots")
    roots = characteristic_roots(cfg.c, res)
    write_json(out / "manifest.json", _manifest("roots", cfg, rate=model.rate, c_star=res.c_star,
                                                 lambda1=roots.lambda1, lambda2=roots.lambda2))
    print(f"lambda1 = {roots.lambda1:.12g}")
    print(f"lambda2 = {roots.lambda2:.12g}")
    return EXIT_OK


def _resolve_N(cfg: RunConfig, model: LatticeModel, init: InitialData) -> int:
    if cfg.N is not None:
        return cfg.N
    cs = compute_cstar(model.D, model.rate).c_star
    return init.M + math.ceil(2 * cs * cfg.T) + 10


def _run_simulation(cfg: RunConfig, model: LatticeModel):
    init = cfg.initial_data()
    N = _resolve_N(cfg, model, init)
    return simulate(model, init, N, cfg.dt, cfg.T, stride=cfg.stride)


def cmd_simulate(cfg, args):
    model = cfg.model()
    traj = _run_simulation(cfg, model)
    out = _outdir(cfg)
    sites = traj.sites
    rows = ((t, n, u) for t, state in zip(traj.times, traj.states) for n, u in zip(sites, state))
    write_csv(out / "snapshots.csv", ("t", "n", "u"), rows)
    if args.emit_plot:
        _emit_plot(out, "simulate")
    write_json(out / "manifest.json", _manifest("simulate", cfg, dt_requested=cfg.dt,
                                                 dt_snapped=resolve_dt(model, cfg.dt)[0], **traj.manifest()))
    print(f"simulated {traj.steps} steps, dt = {traj.dt:.6g}, N = {traj.N}, {traj.times.size} snapshots")
    return EXIT_OK


def _front_speed_one(cfg: RunConfig, model: LatticeModel) -> dict:
    traj = _run_simulation(cfg, model)
    E = invaded_state(model.g)
    res = compute_cstar(model.D, model.rate)
    level = cfg.level if cfg.level is not None else 0.5 * E
    trace = track_front(traj, level)
    est = estimate_speed(trace, cfg.discard_fraction)
    cone = cone_checks(traj, res.c_star, E, cfg.inner, cfg.outer)
    summary = {"tau": model.tau, "c_star": res.c_star, "E": E, "level": level,
               "speed": est.speed, "r_squared": est.r_squared, "verdict": est.verdict,
               "relative_error": (est.speed - res.c_star) / res.c_star,
               "fit": est.as_dict(), "cone": cone.as_dict(),
               "bounds": {"min": traj.min_value, "max": traj.max_value}}
    return {"summary": summary, "trace": trace, "traj": traj}


def cmd_front_speed(cfg, args):
    base = cfg.model()
    taus = [base.tau] if not args.taus else [float(t) for t in args.taus.split(",")]
    models = [base.with_tau(t) for t in taus]
    workers = min(cfg.workers, len(models))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda m: _front_speed_one(cfg, m), models))
    else:
        runs = [_front_speed_one(cfg, m) for m in models]
    out = _outdir(cfg)
    rows = []
    for run in runs:
        tr = run["trace"]
        rows += [(run["summary"]["tau"], t, x) for t, x in zip(tr.times, tr.right_positions)]
    if len(runs) == 1:
        write_csv(out / "speed.csv", ("t", "position"), ((t, x) for _, t, x in rows))
    else:
        write_csv(out / "speed.csv", ("tau", "t", "position"), rows)
    if args.emit_plot:
        _emit_plot(out, "front-speed")
    summaries = [r["summary"] for r in runs]
    payload = summaries[0] if len(summaries) == 1 else {"runs": summaries}
    write_json(out / "summary.json", payload)
    write_json(out / "manifest.json", _manifest(
        "front-speed", cfg, taus=taus,
        simulations=[r["traj"].manifest() for r in runs],
        level=summaries[0]["level"], discard_fraction=cfg.discard_fraction,
        cone_inner=cfg.inner, cone_outer=cfg.outer))
    print(json.dumps(_jsonable(payload), indent=2))
    return EXIT_OK


def cmd_wave(cfg, args):
    model = cfg.model()
    if cfg.c is None:
        raise ConfigError("c", "wave needs --c")
    prof = solve_profile(cfg.c, model, h=cfg.h, tol=cfg.tol, max_iter=cfg.max_iter)
    out = _outdir(cfg)
    R = residual_field(prof, model)
    write_csv(out / "profile.csv", ("xi", "phi", "residual"), zip(prof.grid.points, prof.phi, R))
    if args.emit_plot:
        _emit_plot(out, "wave")
    note = ("c at or below c* + 1e-6: operator built at c* + 1e-6 and reached by continuation"
            if prof.method == "continuation" else "")
    write_json(out / "manifest.json", _manifest("wave", cfg, tol=cfg.tol, max_iter=cfg.max_iter,
                                                 note=note, **prof.manifest()))
    print(json.dumps(_jsonable({k: prof.manifest()[k] for k in
                                ("c", "method", "q", "eta", "d", "iterations", "residual_sup",
                                 "left_limit", "right_limit", "bracket_ok")}), indent=2))
    return EXIT_OK


def cmd_wave_scan(cfg, args):
    model = cfg.model()
    res = compute_cstar(model.D, model.rate)
    if args.ratios:
        cs = [float(x) * res.c_star for x in args.ratios.split(",")]
    else:
        if cfg.cmin is None or cfg.cmax is None:
            raise ConfigError("cmin", "wave-scan needs --cmin and --cmax (or --ratios)")
        if not cfg.cmin < cfg.cmax:
            raise ConfigError("cmax", "must exceed cmin")
        cs = np.linspace(cfg.cmin, cfg.cmax, cfg.steps).tolist()
    rows = scan_wavespeeds(model, cs, h=cfg.h, tol=cfg.tol, max_iter=cfg.max_iter, workers=cfg.workers)
    out = _outdir(cfg)
    cols = ("c", "ratio", "status", "converged", "residual", "left_limit", "right_limit",
            "lambda1", "iterations", "method")
    write_csv(out / "scan.csv", cols, ([getattr(r, k) for k in cols] for r in rows))
    write_json(out / "manifest.json", _manifest("wave-scan", cfg, c_star=res.c_star, c_values=cs,
                                                 rows=[r.as_dict() for r in rows]))
    for r in rows:
        print(f"{r.c:.6f}  {r.ratio:.3f}  {r.status}")
    return EXIT_OK


COMMANDS = {
    "check-hypotheses": cmd_check_hypotheses,
    "speed": cmd_speed,
    "roots": cmd_roots,
    "simulate": cmd_simulate,
    "front-speed": cmd_front_speed,
    "wave": cmd_wave,
    "wave-scan": cmd_wave_scan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", dest="output", help="output directory")
    common.add_argument("--D", type=float, help="coupling strength")
    common.add_argument("--tau", type=float, help="delay")
    common.add_argument("--r", type=float, help="logistic growth rate")
    common.add_argument("--a", type=float, help="logistic competition weight")
    common.add_argument("-v", "--verbose", action="store_true")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--N", type=int)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--T", type=float)
    sim.add_argument("--stride", type=int)
    sim.add_argument("--emit-plot", action="store_true", help="write plot.py next to the CSVs")

    wave = argparse.ArgumentParser(add_help=False)
    wave.add_argument("--h", type=float, help="wave grid spacing")
    wave.add_argument("--tol", type=float)
    wave.add_argument("--max-iter", dest="max_iter", type=int)
    wave.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="delaylattice", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check-hypotheses", parents=[common], help="screen H1-H4 and report E")
    sub.add_parser("speed", parents=[common], help="critical speed c* and lambda*")
    r = sub.add_parser("roots", parents=[common], help="decay rates at speed c, plus delta.csv")
    r.add_argument("--c", type=float)
    r.add_argument("--emit-plot", action="store_true")
    sub.add_parser("simulate", parents=[common, sim], help="integrate the lattice system")
    f = sub.add_parser("front-speed", parents=[common, sim], help="empirical spreading speed and cone checks")
    f.add_argument("--level", type=float)
    f.add_argument("--taus", help="comma-separated delays run side by side")
    f.add_argument("--workers", type=int)
    w = sub.add_parser("wave", parents=[common, wave], help="travelling-wave profile at speed c")
    w.add_argument("--c", type=float)
    w.add_argument("--emit-plot", action="store_true")
    s = sub.add_parser("wave-scan", parents=[common, wave], help="existence table over a range of speeds")
    s.add_argument("--cmin", type=float)
    s.add_argument("--cmax", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--ratios", help="comma-separated multiples of c* (instead of cmin/cmax)")
    return p


def _fail(code: int, kind: str, exc: Exception, cfg: Optional[RunConfig]) -> int:
    record = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc),
              "exit_code": code}
    if isinstance(exc, ConfigError):
        record["field"] = exc.field
    for attr in ("gap", "iterations"):
        if hasattr(exc, attr):
            record[attr] = getattr(exc, attr)
    if cfg is not None:
        try:
            write_json(_outdir(cfg) / "error.json", record)
        except OSError:
            pass
    print(json.dumps(_jsonable(record)), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    try:
        cfg = load_config(args.config, _num_overrides(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc, cfg)
    except (NoRealRootsError, SimulationError, IterationStalled, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", exc, cfg)
    except (ValueError, TypeError) as exc:
        # precondition failures of the library (dt above the stability bound, N too small, ...)
        return _fail(EXIT_CONFIG, "config", exc, cfg)


if __name__ == "__main__":
    sys.exit(main())
