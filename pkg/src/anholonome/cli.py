"""Command-line entry point: ``simulate | reduce | verify | list-systems``.

Exit codes: 0 success, 1 failed verification, 2 usage or model error,
3 dynamics failure, 4 crosscheck beyond tolerance.

Initial states are given per coordinate as ``--<coord>0`` and per
constraint quasi-velocity as ``--v<label>0`` (e.g. ``--x0 0 --vx0 1``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager

import jsonschema
import numpy as np

from . import __version__
from . import dynamics as dyn
from . import reduction as red
from . import routh
from .csvout import write_csv
from .errors import AnholonomeError, DynamicsError
from .frames import quasi_from_natural
from .integrators import STEPPERS
from .verify import DEFAULT_SEED, format_report, verify_all, verify_system
from .zoo import ZOO, get_spec

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DYNAMICS, EXIT_CROSSCHECK = 0, 1, 2, 3, 4

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system"],
    "properties": {
        "system": {"type": "string"},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "initial": {"type": "object", "additionalProperties": {"type": "number"}},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "minimum": 0},
        "method": {"enum": sorted(STEPPERS)},
        "out": {"type": "string"},
        "crosscheck": {"type": "boolean"},
        "routh": {"type": "boolean"},
        "mu": {"type": "array", "items": {"type": "number"}},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    },
}

DEFAULTS = {"h": 1e-3, "T": 1.0, "method": "rk4", "crosscheck": False, "routh": False, "tol": 1e-6}


class UsageError(Exception):
    pass


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a number") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anholonome", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub_kw = {"allow_abbrev": False}

    def run_args(p):
        p.add_argument("--system")
        p.add_argument("--config", help="JSON scenario file; flags override its values")
        p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE")
        p.add_argument("--h", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--method", choices=sorted(STEPPERS))
        p.add_argument("--out", help="CSV path (default: stdout)")

    run_args(sub.add_parser("simulate", help="integrate the constrained dynamics", **sub_kw))
    p = sub.add_parser("reduce", help="integrate the reduced or Routh dynamics", **sub_kw)
    run_args(p)
    p.add_argument("--crosscheck", action="store_true", default=None,
                   help="compare against a projected full run")
    p.add_argument("--routh", action="store_true", default=None)
    p.add_argument("--mu", type=float, nargs="+", help="momentum level (default: from the initial state)")
    p.add_argument("--tol", type=float, help="crosscheck tolerance (default 1e-6)")

    p = sub.add_parser("verify", help="run the property suites", **sub_kw)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--system")
    target.add_argument("--all", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="tolerance for the invariance checks")
    p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE")
    p.add_argument("--out")

    sub.add_parser("list-systems", help="describe the built-in systems", **sub_kw)
    return parser


def _initial_flags(extra: list[str]) -> dict[str, float]:
    """Parse ``--<name>0 VALUE`` pairs left over by argparse."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise UsageError(f"unrecognized argument {tok!r}")
        if "=" in tok:
            name, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"{tok} needs a value")
            name, value = tok[2:], extra[i + 1]
            i += 2
        if not name.endswith("0"):
            raise UsageError(f"unrecognized argument --{name}")
        try:
            out[name[:-1]] = float(value)
        except ValueError:
            raise UsageError(f"--{name} needs a number, got {value!r}") from None
    return out


def _config(args, extra) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        try:
            jsonschema.validate(cfg, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise UsageError(f"invalid config: {exc.message}") from None
    for key in ("system", "h", "T", "method", "out", "crosscheck", "routh", "mu", "tol"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if args.param:
        cfg["params"] = {**cfg.get("params", {}), **dict(args.param)}
    flags = _initial_flags(extra)
    cfg["initial_flags"] = flags
    if "system" not in cfg:
        raise UsageError("no system given (use --system or a config file)")
    for key, value in DEFAULTS.items():
        cfg.setdefault(key, value)
    return cfg


def _initial_state(spec, built, cfg) -> dyn.CState:
    sysm = built.system
    coords = list(sysm.coord_labels)
    vels = list(sysm.velocity_labels)
    values = {**spec.initial, **cfg.get("initial", {})}
    known = set(coords) | {f"v_{v}" for v in vels}
    unknown = set(cfg.get("initial", {})) - known
    for name, value in cfg["initial_flags"].items():
        if name in coords:
            values[name] = value
        elif name.startswith("v") and name[1:] in vels:
            values[f"v_{name[1:]}"] = value
        else:
            unknown.add(name)
    if unknown:
        raise UsageError(f"unknown initial-state names {sorted(unknown)} for {spec.name}; coordinates "
                         f"{coords}, velocities {['v' + v for v in vels]}")
    x = [values.get(c, 0.0) for c in coords]
    v = [values.get(f"v_{lab}", 0.0) for lab in vels]
    return dyn.CState(x, v)


@contextmanager
def _sink(path):
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _summary(traj: dyn.Trajectory, extra: dict | None = None) -> None:
    final = {"t": float(traj.times[-1])}
    final.update({lab: float(v) for lab, v in zip(traj.coord_labels, traj.coords[-1])})
    final.update({f"v_{lab}": float(v) for lab, v in zip(traj.velocity_labels, traj.velocities[-1])})
    e_drift = float(np.max(np.abs(traj.energy - traj.energy[0])))
    p_drift = max((float(np.max(np.abs(p - p[0]))) for p in traj.momenta.values()), default=0.0)
    print("final: " + " ".join(f"{k}={v:.10g}" for k, v in final.items()), file=sys.stderr)
    print(f"max_energy_drift={e_drift:.3e}", file=sys.stderr)
    print(f"max_momentum_drift={p_drift:.3e}", file=sys.stderr)
    for key, value in (extra or {}).items():
        print(f"{key}={value:.3e}", file=sys.stderr)


def run_simulate(cfg: dict) -> int:
    spec = get_spec(cfg["system"])
    built = spec.build(cfg.get("params"))
    s0 = _initial_state(spec, built, cfg)
    traj = dyn.integrate(built.system, s0, cfg["h"], cfg["T"], cfg["method"], momenta=built.momentum_fields)
    with _sink(cfg.get("out")) as fh:
        write_csv(traj, fh, {"params": cfg.get("params", {})})
    _summary(traj)
    return EXIT_OK


def _reduced_gap(split, full: dyn.Trajectory, traj: dyn.Trajectory) -> float:
    proj = np.array([red.project_state(split, s).as_vector() for s in full.states])
    mine = np.hstack([traj.coords, traj.velocities])
    return float(np.max(np.abs(proj - mine)))


def _routh_gap(model, full: dyn.Trajectory, traj: dyn.Trajectory) -> float:
    sysm = model.split.system
    worst = float(np.max(np.abs(full.coords - traj.coords)))
    for s, vk in zip(full.states, traj.velocities):
        w = quasi_from_natural(model.frame, s.x, dyn.natural_velocity(sysm, s))[: model.nk]
        worst = max(worst, float(np.max(np.abs(w - vk), initial=0.0)))
    return worst


def run_reduce(cfg: dict) -> int:
    spec = get_spec(cfg["system"])
    built = spec.build(cfg.get("params"))
    if built.split is None:
        raise UsageError(f"{spec.name} declares no symmetry split")
    s0 = _initial_state(spec, built, cfg)
    sysm, h, T, method = built.system, cfg["h"], cfg["T"], cfg["method"]
    diagnostics = {}
    if cfg["routh"]:
        model = built.horizontal
        if model is None:
            raise UsageError(f"{spec.name} declares no horizontal symmetries")
        rs0, mu0 = routh.routh_state(model, s0)
        mu = np.asarray(cfg["mu"], dtype=float) if cfg.get("mu") is not None else mu0
        if mu.shape != mu0.shape:
            raise UsageError(f"--mu needs {len(mu0)} value(s) for {spec.name}")
        traj = routh.integrate_routh(model, mu, rs0, h, T, method)
        if cfg["crosscheck"]:
            start = routh.full_state(model, mu, rs0)
            full = dyn.integrate(sysm, start, h, T, method)
            diagnostics["crosscheck_error"] = _routh_gap(model, full, traj)
    else:
        traj = red.integrate_reduced(built.split, red.project_state(built.split, s0), h, T, method)
        if cfg["crosscheck"]:
            full = dyn.integrate(sysm, s0, h, T, method)
            diagnostics["crosscheck_error"] = _reduced_gap(built.split, full, traj)
    with _sink(cfg.get("out")) as fh:
        write_csv(traj, fh, {"params": cfg.get("params", {})})
    _summary(traj, diagnostics)
    if diagnostics.get("crosscheck_error", 0.0) > cfg["tol"]:
        print(f"crosscheck failed: {diagnostics['crosscheck_error']:.3e} > {cfg['tol']:.1e}", file=sys.stderr)
        return EXIT_CROSSCHECK
    return EXIT_OK


def _default_seed() -> int:
    raw = os.environ.get("ANHOLONOME_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"ANHOLONOME_SEED must be an integer, got {raw!r}") from None


def run_verify(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.all:
        if args.param:
            raise UsageError("--param applies to a single system")
        results = verify_all(seed, args.tol)
    else:
        get_spec(args.system)
        results = verify_system(args.system, seed, args.tol, dict(args.param) or None)
    with _sink(args.out) as fh:
        fh.write(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def run_list() -> int:
    for spec in ZOO.values():
        tag = " [negative control]" if spec.negative_control else ""
        print(f"{spec.name}{tag}: {spec.description}")
        for key, value in spec.defaults.items():
            unit = spec.units.get(key, "")
            print(f"    {key} = {value:g}" + (f"  ({unit})" if unit else ""))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "list-systems":
            if extra:
                raise UsageError(f"unrecognized arguments {extra}")
            return run_list()
        if args.command == "verify":
            if extra:
                raise UsageError(f"unrecognized arguments {extra}")
            return run_verify(args)
        cfg = _config(args, extra)
        return run_simulate(cfg) if args.command == "simulate" else run_reduce(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DynamicsError as exc:
        print(f"error: dynamics failed at t={exc.time:.6g}: {exc}", file=sys.stderr)
        return EXIT_DYNAMICS
    except (AnholonomeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
