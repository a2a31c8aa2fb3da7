"""Command-line front end: solve, continue, derivs, validate, signs and replay.

Exit codes: 0 ok, 1 validation failure, 2 no convergence, 3 continuation
stall, 64 usage error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .contour import GeometryError, QuadratureSpec
from .continuation import (
    ContinuationControls,
    ContinuationStallError,
    NewtonOptions,
    NoConvergenceError,
    continue_parameter,
    newton_solve,
    scan_initializer,
    sign_condition_check,
)
from .ffunction import JumpFunction, nls_jump_function, synthetic_polynomial_f
from .radical import RadicalError
from .rhpcore import GeometryOptions, RHPSolution, eval_h_robust
from .validation import (
    GENUS2_UPPER,
    SUITES,
    UnknownSuiteError,
    ValidationConfig,
    appendix_I1,
    derivative_reports,
    genus2_fixture,
    suite_run,
    FDSpec,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NO_CONVERGENCE, EXIT_STALL, EXIT_USAGE = 0, 1, 2, 3, 64
PROBLEMS = ("nls-genus0", "nls-genus2", "synthetic", "appendix-toy")
NLS_NAMES = ("mu", "x", "t")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    problem: str = "nls-genus0"
    parameters: dict = field(default_factory=lambda: {"mu": 2.2, "x": 1.0, "t": 0.0})
    sweep: dict | None = None
    initial_alphas: list | None = None
    quadrature: dict = field(default_factory=dict)
    newton: dict = field(default_factory=dict)
    loop_offset_factor: float = 0.3
    output: dict = field(default_factory=lambda: {"path": "out", "formats": ["csv", "json"]})
    synthetic: dict = field(default_factory=dict)
    signs: dict = field(default_factory=lambda: {"grid": 200, "pad": 0.5})
    validate: dict = field(default_factory=dict)
    seed: int = 20240607

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise UsageError("config must be a mapping")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise UsageError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**copy.deepcopy(d))
        cfg.validate_fields()
        return cfg

    def validate_fields(self) -> None:
        if self.problem not in PROBLEMS:
            raise UsageError(f"problem must be one of {PROBLEMS}")
        if not isinstance(self.parameters, dict):
            raise UsageError("parameters must be a mapping")
        names = self.beta_names
        missing = [n for n in names if n not in self.parameters]
        if missing:
            raise UsageError(f"missing parameters {missing}")
        unknown = [n for n in self.parameters if n not in names]
        if unknown:
            raise UsageError(f"unknown parameters {unknown}; declared {names}")
        try:
            [float(self.parameters[n]) for n in names]
            float(self.loop_offset_factor)
        except (TypeError, ValueError) as e:
            raise UsageError(f"non-numeric parameter: {e}") from None
        if self.sweep is not None:
            s = self.sweep
            if not isinstance(s, dict) or not {"component", "from", "to", "steps"} <= set(s):
                raise UsageError("sweep needs component, from, to, steps")
            if s["component"] not in names:
                raise UsageError(f"sweep component {s['component']!r} is not one of {names}")
            if int(s["steps"]) < 1:
                raise UsageError("sweep steps must be >= 1")
        if self.initial_alphas is not None:
            parse_alphas(self.initial_alphas)
        try:
            self.quadrature_spec()
            self.newton_options()
            self.geometry()
        except (TypeError, ValueError) as e:
            raise UsageError(f"invalid option: {e}") from None

    @property
    def beta_names(self) -> tuple:
        if self.problem == "appendix-toy":
            return ("mu",)
        if self.problem == "synthetic" and "coeffs" in self.synthetic:
            return tuple(self.synthetic.get("beta_names", ("x", "t")))
        return NLS_NAMES

    def beta(self) -> tuple:
        return tuple(float(self.parameters[n]) for n in self.beta_names)

    def quadrature_spec(self) -> QuadratureSpec:
        return QuadratureSpec(**self.quadrature)

    def newton_options(self) -> NewtonOptions:
        return NewtonOptions(**self.newton)

    def geometry(self) -> GeometryOptions:
        return GeometryOptions(offset_factor=float(self.loop_offset_factor))


def parse_points(raw) -> list:
    out = []
    try:
        for a in raw:
            if isinstance(a, (list, tuple)):
                re_, im_ = a
                out.append(complex(float(re_), float(im_)))
            elif isinstance(a, str):
                out.append(complex(a.replace(" ", "").replace("i", "j")))
            else:
                out.append(complex(a))
    except (TypeError, ValueError):
        raise UsageError("points must be [re, im] pairs or complex strings") from None
    return out


def parse_alphas(raw) -> list:
    out = parse_points(raw)
    if len(out) < 2 or len(out) % 2:
        raise UsageError("initial_alphas needs an even number (2N+2) of points")
    return out


def _set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        nxt = cur.get(p)
        if nxt is None:
            nxt = cur[p] = {}
        if not isinstance(nxt, dict):
            raise UsageError(f"--set {key}: {p} is not a mapping")
        cur = nxt
    cur[parts[-1]] = value


def load_config(path: str | None, sets: Sequence[str] = ()) -> RunConfig:
    """Structured-text (YAML or JSON) config plus ``key=value`` overrides.

    A RunRecord file is accepted too; its config snapshot is used.
    """
    d = asdict(RunConfig())
    if path:
        try:
            text = FsPath(path).read_text()
            loaded = yaml.safe_load(text)
        except (OSError, yaml.YAMLError) as e:
            raise UsageError(f"cannot read config {path}: {e}") from None
        if isinstance(loaded, dict) and "config" in loaded and "tool" in loaded:
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise UsageError("config must be a mapping")
        for k, v in loaded.items():
            d[k] = v
    for s in sets:
        if "=" not in s:
            raise UsageError(f"--set expects key=value, got {s!r}")
        k, v = s.split("=", 1)
        try:
            val = yaml.safe_load(v)
        except yaml.YAMLError:
            val = v
        _set_dotted(d, k.strip(), val)
    return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------


def make_problem(cfg: RunConfig):
    """(f, initial_alphas or None, notes) for the configured problem."""
    notes = {}
    if cfg.problem == "nls-genus0":
        return nls_jump_function(), cfg.initial_alphas and parse_alphas(cfg.initial_alphas), notes
    if cfg.problem == "nls-genus2":
        if cfg.initial_alphas is None:
            raise UsageError("nls-genus2 needs initial_alphas (the scan initializer covers genus 0)")
        al = parse_alphas(cfg.initial_alphas)
        if len(al) != 6:
            raise UsageError("nls-genus2 needs six initial_alphas")
        return nls_jump_function(), al, notes
    if cfg.problem == "synthetic":
        syn = cfg.synthetic
        if "coeffs" in syn:
            f = synthetic_polynomial_f(syn["coeffs"], cfg.beta_names)
            return f, cfg.initial_alphas and parse_alphas(cfg.initial_alphas), notes
        upper = tuple(parse_points(syn["upper"])) if "upper" in syn else GENUS2_UPPER
        fixture_beta = tuple(float(v) for v in syn.get("fixture_parameters", cfg.beta()))
        f, sol = genus2_fixture(fixture_beta, upper, newton=cfg.newton_options())
        notes["fixture_coefficients"] = [float(c) for c in f.coeffs.real]
        notes["fixture_parameters"] = list(fixture_beta)
        al = list(sol.alphas.alphas)
        return f, cfg.initial_alphas and parse_alphas(cfg.initial_alphas) or al, notes
    raise UsageError("appendix-toy supports the derivs and validate commands only")


def solve_point(cfg: RunConfig, beta, f: JumpFunction, init, notes: dict) -> RHPSolution:
    spec, geom, nopts = cfg.quadrature_spec(), cfg.geometry(), cfg.newton_options()
    if init is None:
        cands = scan_initializer(beta, f, spec=spec, geometry=geom)
        if not cands:
            raise NoConvergenceError("scan initializer found no admissible candidate", [], None)
        notes["initializer"] = {"method": "scan", "candidates": [[[a.real, a.imag] for a in c] for c in cands]}
        last = None
        for c in cands:
            try:
                return newton_solve(c, beta, f, nopts, spec, geom)
            except (NoConvergenceError, GeometryError, RadicalError, ArithmeticError) as e:
                last = e
        raise last
    notes["initializer"] = {"method": "given"}
    return newton_solve(init, beta, f, nopts, spec, geom)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _num(v) -> str:
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_csv(path: FsPath, head: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in r])


def _solution_json(sol: RHPSolution) -> dict:
    d = sol.to_json()
    d["diagnostics"] = _jsonable(d["diagnostics"])
    return d


def _sign_json(rep) -> dict:
    return {
        "passed": rep.passed, "main_arcs": rep.main_arcs_ok, "sides": rep.sides_ok, "comp_arcs": rep.comp_arcs_ok,
        "extensions": rep.extensions_ok, "worst": _jsonable(list(rep.worst)),
    }


class Recorder:
    def __init__(self, command: str, cfg: RunConfig, out: FsPath):
        self.out = out
        self.record = {
            "tool": "gfunc-rhp", "version": __version__, "command": command, "config": asdict(cfg),
            "started": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }

    def write(self, name: str = "run_record.json") -> FsPath:
        self.out.mkdir(parents=True, exist_ok=True)
        self.record["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        p = self.out / name
        p.write_text(json.dumps(_jsonable(self.record), indent=2))
        return p


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: FsPath) -> int:
    rec = Recorder("solve", cfg, out)
    f, init, notes = make_problem(cfg)
    rec.record["notes"] = notes
    try:
        sol = solve_point(cfg, cfg.beta(), f, init, notes)
    except NoConvergenceError as e:
        rec.record["error"] = {"type": "no-convergence", "message": str(e), "residual_history": e.history}
        rec.write()
        print(f"no convergence: {e}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    rec.record["solution"] = _solution_json(sol)
    rec.record["sign_report"] = _sign_json(sign_condition_check(sol))
    rec.write()
    print(" ".join(f"alpha{j}={a.real:.17g}{a.imag:+.17g}i" for j, a in enumerate(sol.alphas.alphas)))
    print(f"residual={sol.residual_norm:.3e} signs={'ok' if rec.record['sign_report']['passed'] else 'violated'}")
    return EXIT_OK


def cmd_continue(cfg: RunConfig, out: FsPath) -> int:
    if cfg.sweep is None:
        raise UsageError("continue needs a sweep {component, from, to, steps}")
    rec = Recorder("continue", cfg, out)
    f, init, notes = make_problem(cfg)
    rec.record["notes"] = notes
    names = cfg.beta_names
    k = names.index(cfg.sweep["component"])
    b0 = list(cfg.beta())
    b0[k] = float(cfg.sweep["from"])
    b1 = list(b0)
    b1[k] = float(cfg.sweep["to"])
    controls = ContinuationControls(steps=int(cfg.sweep["steps"]))
    rec.record["controls"] = asdict(controls)
    try:
        start = solve_point(cfg, tuple(b0), f, init, notes)
    except NoConvergenceError as e:
        rec.record["error"] = {"type": "no-convergence", "message": str(e), "residual_history": e.history}
        rec.write()
        return EXIT_NO_CONVERGENCE
    code = EXIT_OK
    try:
        traj = continue_parameter(start, tuple(b1), controls, cfg.newton_options())
    except ContinuationStallError as e:
        traj = e.trajectory
        rec.record["error"] = {"type": "continuation-stall", "message": str(e)}
        code = EXIT_STALL
    head, rows = traj.rows(names)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.output.get("formats", ["csv", "json"]):
        write_csv(out / "trajectory.csv", head, rows)
    rec.record["trajectory"] = {
        "columns": head, "rows": rows, "step_log": traj.step_log, "smoothness": traj.smoothness,
        "solutions": [_solution_json(s) for s in traj.solutions],
    }
    rec.write()
    print(f"{len(rows)} rows, {sum(1 for s in traj.step_log if not s['accepted'])} rejected steps")
    return code


def cmd_derivs(cfg: RunConfig, out: FsPath) -> int:
    rec = Recorder("derivs", cfg, out)
    fd = FDSpec(**cfg.validate.get("fd", {}))
    tol = float(cfg.validate.get("fd_tol", 1e-5))
    if cfg.problem == "appendix-toy":
        mu = cfg.beta()[0]
        toy = cfg.synthetic or {}
        reps = list(appendix_I1(toy.get("c", 1.0), complex(toy.get("z0", 0.0)), complex(toy.get("z1", -1.0)),
                                complex(toy.get("z2", 1.0)), mu, fd=fd))
    else:
        f, init, notes = make_problem(cfg)
        rec.record["notes"] = notes
        try:
            sol = solve_point(cfg, cfg.beta(), f, init, notes)
        except NoConvergenceError as e:
            rec.record["error"] = {"type": "no-convergence", "message": str(e), "residual_history": e.history}
            rec.write()
            return EXIT_NO_CONVERGENCE
        nopts = NewtonOptions(**{**cfg.newton, "residual_tol": min(cfg.newton_options().residual_tol, 1e-11)})
        rec.record["solution"] = _solution_json(sol)
        reps = derivative_reports(sol, tol, fd, nopts)
    rec.record["reports"] = [r.to_json() for r in reps]
    rec.write("derivs.json")
    for r in reps:
        print(r.line())
    return EXIT_OK if all(r.passed for r in reps) else EXIT_VALIDATION


def cmd_validate(cfg: RunConfig, out: FsPath, suites: Sequence[str] | None) -> int:
    names = list(suites) if suites else list(SUITES)
    v = cfg.validate
    vc = ValidationConfig(
        beta=tuple(cfg.beta()) if cfg.problem == "nls-genus0" else ValidationConfig.beta,
        initial_alphas=tuple(parse_alphas(cfg.initial_alphas)) if cfg.initial_alphas and cfg.problem == "nls-genus0" else None,
        seed=int(cfg.seed),
        quad_tol=float(v.get("quad_tol", 1e-8)),
        fd_tol=float(v.get("fd_tol", 1e-5)),
    )
    rec = Recorder("validate", cfg, out)
    try:
        reps = suite_run(names, vc)
    except UnknownSuiteError as e:
        raise UsageError(str(e)) from None
    rec.record["reports"] = [r.to_json() for r in reps]
    rec.write("validation.json")
    for r in reps:
        print(r.line())
    return EXIT_OK if all(r.passed for r in reps) else EXIT_VALIDATION


def sign_grid(sol: RHPSolution, n: int, pad: float, chunk: int = 2000):
    """Im h on an n x n grid around the contour, with a region label per point."""
    cfg = sol.config
    L = cfg.loops
    allpts = np.concatenate([p.sample(32) for p in [L.outer] + list(L.main_loops)])
    lo_re, hi_re = allpts.real.min() - pad, allpts.real.max() + pad
    lo_im, hi_im = allpts.imag.min() - pad, allpts.imag.max() + pad
    # shift by a fraction of a cell so no node falls exactly on a straight arc
    re = np.linspace(lo_re, hi_re, n) + 1e-7 * (hi_re - lo_re) / n
    im = np.linspace(lo_im, hi_im, n) + 1.3e-7 * (hi_im - lo_im) / n
    Z = (re[None, :] + 1j * im[:, None]).ravel()
    imh = np.full(Z.size, np.nan)
    near_arc = cfg.branch.cut_distance(Z) < 1e-9 * cfg.scale
    for arc in cfg.comp_arcs:
        near_arc |= arc.distance(Z) < 1e-9 * cfg.scale
    idx = np.nonzero(~near_arc)[0]
    for s in range(0, idx.size, chunk):
        sl = idx[s:s + chunk]
        imh[sl] = np.imag(eval_h_robust(Z[sl], sol, strict=False))
    inside = L.outer.contains(Z)
    region = np.where(inside, "inside", "outside").astype(object)
    for j, p in enumerate(L.main_loops):
        region[p.contains(Z)] = f"main{j}"
    for j, p in enumerate(L.comp_loops):
        region[p.contains(Z)] = f"comp{j + 1}"
    region[near_arc] = "arc"
    return Z, imh, region


def cmd_signs(cfg: RunConfig, out: FsPath) -> int:
    rec = Recorder("signs", cfg, out)
    f, init, notes = make_problem(cfg)
    rec.record["notes"] = notes
    try:
        sol = solve_point(cfg, cfg.beta(), f, init, notes)
    except NoConvergenceError as e:
        rec.record["error"] = {"type": "no-convergence", "message": str(e), "residual_history": e.history}
        rec.write()
        return EXIT_NO_CONVERGENCE
    n = int(cfg.signs.get("grid", 200))
    pad = float(cfg.signs.get("pad", 0.5))
    Z, imh, region = sign_grid(sol, n, pad)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "imh_grid.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "Imh", "region"])
        for z, v, r in zip(Z, imh, region):
            w.writerow([_num(z.real), _num(z.imag), _num(v) if np.isfinite(v) else "nan", r])
    rep = sign_condition_check(sol)
    rec.record["solution"] = _solution_json(sol)
    rec.record["sign_report"] = _sign_json(rep)
    rec.record["grid"] = {"n": n, "pad": pad, "rows": int(Z.size), "file": "imh_grid.csv"}
    rec.write()
    print(f"{Z.size} grid rows; signs {'ok' if rep.passed else 'violated'}")
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def _record_alphas(record: dict) -> np.ndarray:
    if "solution" in record:
        return np.array([[complex(*a) for a in record["solution"]["alphas"]]])
    if "trajectory" in record:
        return np.array([[complex(*a) for a in s["alphas"]] for s in record["trajectory"]["solutions"]])
    raise UsageError("record holds no solution or trajectory")


def replay(record_path: str, out: FsPath) -> tuple[int, float]:
    """Re-run a RunRecord's command from its config snapshot; returns (code, max alpha difference)."""
    try:
        old = json.loads(FsPath(record_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read record {record_path}: {e}") from None
    if "config" not in old or old.get("command") not in ("solve", "continue", "signs", "derivs"):
        raise UsageError("not a replayable RunRecord")
    cfg = RunConfig.from_dict(old["config"])
    cmd = {"solve": cmd_solve, "continue": cmd_continue, "signs": cmd_signs, "derivs": cmd_derivs}[old["command"]]
    code = cmd(cfg, out)
    name = "derivs.json" if old["command"] == "derivs" else "run_record.json"
    new = json.loads((out / name).read_text())
    a, b = _record_alphas(old), _record_alphas(new)
    diff = float(np.max(np.abs(a - b))) if a.shape == b.shape else math.inf
    return code, diff


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gfunc-rhp", description="Scalar RHP g-function solver and continuation driver.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, hlp in (
        ("solve", "solve the modulation equations at one parameter point"),
        ("continue", "continue a solution along a parameter sweep"),
        ("derivs", "check derivative formulas against finite differences"),
        ("validate", "run validation suites"),
        ("signs", "write an Im h grid and check the sign conditions"),
    ):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", help="YAML/JSON config (a RunRecord is accepted)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--suite", default=None, help="comma-separated suite names (validate)")
        s.add_argument("--seed", type=int, default=None, help="seed for sampled suites")
    r = sub.add_parser("replay", help="re-run a RunRecord and compare branchpoints")
    r.add_argument("record")
    r.add_argument("--out", default=None)
    r.add_argument("--tol", type=float, default=1e-12)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command")
        if args.command == "replay":
            out = FsPath(args.out or "replay_out")
            code, diff = replay(args.record, out)
            print(f"max |alpha difference| = {diff:.3e}")
            if code != EXIT_OK:
                return code
            return EXIT_OK if diff <= args.tol else EXIT_VALIDATION
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg.seed = int(args.seed)
        out = FsPath(args.out or cfg.output.get("path", "out"))
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "continue":
            return cmd_continue(cfg, out)
        if args.command == "derivs":
            return cmd_derivs(cfg, out)
        if args.command == "validate":
            suites = [s.strip() for s in args.suite.split(",") if s.strip()] if args.suite else None
            return cmd_validate(cfg, out, suites)
        return cmd_signs(cfg, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
