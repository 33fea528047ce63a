"""Command-line front end.

Every command reads an optional JSON config (``--config``) whose keys are
the long flag names with dashes replaced by underscores; flags given on the
command line override the file. Unknown keys are rejected.

Exit codes: 0 ok, 1 acceptance failure, 2 config error, 3 residual check
failed, 4 Korn/kernel cross-check failed.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .constraints import ConstraintError, ConstraintKind, CornerPolicy
from .eigensolver import SolveConfig, residual_report, setup_problem, solve_eigen
from .korn import estimate_korn, korn_cross_check
from .material import MaterialError, MaterialParams, validate
from .mesh import SHAPES, MeshError, SigmaSelector, mesh_from_spec, save_mesh
from .output import make_report, write_eigen_csv, write_json, write_vtk
from .rigid_motions import classify

log = logging.getLogger("jonesfem")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_RESIDUAL, EXIT_CROSSCHECK = 0, 1, 2, 3, 4
DEFAULT_RESIDUAL_TOL = 1e-8


class ConfigError(ValueError):
    pass


GEOMETRY_KEYS = {
    "shape": str,
    "a": float,
    "b": float,
    "nx": int,
    "ny": int,
    "r": float,
    "nb": int,
    "nr": int,
    "r_in": float,
    "r_out": float,
    "mesh": str,
}
SIGMA_KEYS = {"sigma": str, "kind": str, "corner_policy": str, "corner_angle": float}
MATERIAL_KEYS = {"mu": float, "lam": float, "rho": float}
SOLVER_KEYS = {"k": int, "shift": str, "max_dense": int, "tol": float, "c_geo": float, "residual_tol": float}

COMMAND_KEYS = {
    "mesh": {**GEOMETRY_KEYS, "output": str},
    "classify": {**GEOMETRY_KEYS, **SIGMA_KEYS, "output": str},
    "solve": {**GEOMETRY_KEYS, **SIGMA_KEYS, **MATERIAL_KEYS, **SOLVER_KEYS, "output": str, "vtk": str, "csv": str},
    "korn": {**GEOMETRY_KEYS, **SIGMA_KEYS, "max_dense": int, "output": str},
    "verify": {"only": str, "fixtures": str, "output": str},
}

DEFAULTS = {
    "shape": "rect",
    "a": 1.0,
    "b": 1.0,
    "r": 1.0,
    "r_out": 1.0,
    "sigma": "all",
    "kind": "normal",
    "corner_policy": "auto",
    "mu": 1.0,
    "lam": 0.5,
    "rho": 1.0,
    "k": 6,
    "shift": "auto",
    "tol": 0.0,
    "c_geo": 1.0,
    "residual_tol": DEFAULT_RESIDUAL_TOL,
}


# -- config -----------------------------------------------------------------


def load_config(command: str, path, overrides: dict) -> dict:
    """Merge the JSON file and flag overrides, check keys and types."""
    schema = COMMAND_KEYS[command]
    cfg: dict = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must contain a JSON object")
        unknown = sorted(set(cfg) - set(schema))
        if unknown:
            raise ConfigError(f"unknown config key(s) for '{command}': {', '.join(unknown)}")
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    out = {}
    for key, typ in schema.items():
        if key in cfg:
            out[key] = _coerce(key, cfg[key], typ)
        elif key in DEFAULTS:
            out[key] = DEFAULTS[key]
    return out


def _coerce(key, value, typ):
    if key == "sigma" and isinstance(value, list):
        return ",".join(str(v) for v in value)
    if key == "only" and isinstance(value, list):
        return ",".join(str(v) for v in value)
    try:
        if typ is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if typ is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if not isinstance(value, str):
            raise ValueError
        return value
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} must be of type {typ.__name__}, got {value!r}") from None


def geometry_spec(cfg: dict) -> dict:
    if cfg.get("mesh"):
        return {"shape": "file", "path": cfg["mesh"]}
    shape = cfg["shape"]
    if shape not in SHAPES or shape == "file":
        raise ConfigError(f"unknown shape {shape!r}; valid shapes: rect, disk, annulus (or --mesh FILE)")
    keys = {"rect": ("a", "b", "nx", "ny"), "disk": ("r", "nb", "nr"), "annulus": ("r_in", "r_out", "nb", "nr")}[shape]
    spec = {"shape": shape}
    for k in keys:
        if k in cfg:
            spec[k] = cfg[k]
    if shape == "rect" and "nx" not in spec:
        raise ConfigError("rect geometry needs nx")
    if shape in ("disk", "annulus") and ("nb" not in spec or "nr" not in spec):
        raise ConfigError(f"{shape} geometry needs nb and nr")
    if shape == "annulus" and "r_in" not in spec:
        raise ConfigError("annulus geometry needs r_in")
    return spec


def sigma_selector(mesh, value: str) -> SigmaSelector:
    if value == "all":
        return SigmaSelector(mesh.tags)
    try:
        tags = [int(t) for t in value.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"sigma must be 'all' or comma-separated tags, got {value!r}") from None
    return SigmaSelector(tags)


def _kind(cfg) -> ConstraintKind:
    try:
        return ConstraintKind.parse(cfg["kind"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _corner_policy(cfg) -> CornerPolicy:
    try:
        return CornerPolicy(cfg["corner_policy"])
    except ValueError:
        raise ConfigError(f"corner_policy must be one of auto, pin, merge; got {cfg['corner_policy']!r}") from None


def _emit(report: dict, output) -> None:
    if output:
        write_json(output, report)
    else:
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")


# -- commands ---------------------------------------------------------------


def cmd_mesh(cfg: dict) -> int:
    if not cfg.get("output"):
        raise ConfigError("mesh needs an output file (-o)")
    mesh = mesh_from_spec(geometry_spec(cfg))
    save_mesh(mesh, cfg["output"])
    print(f"wrote {cfg['output']}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, {mesh.n_facets} boundary facets")
    return EXIT_OK


def _corner_kwargs(cfg) -> dict:
    kw = {}
    if "corner_angle" in cfg:
        kw["corner_angle"] = cfg["corner_angle"]
    return kw


def cmd_classify(cfg: dict) -> int:
    mesh = mesh_from_spec(geometry_spec(cfg))
    sel = sigma_selector(mesh, cfg["sigma"])
    rep = classify(mesh, sel, **_corner_kwargs(cfg))
    _emit(make_report("classify", cfg, rep.to_dict()), cfg.get("output"))
    return EXIT_OK


def cmd_solve(cfg: dict) -> int:
    mesh = mesh_from_spec(geometry_spec(cfg))
    sel = sigma_selector(mesh, cfg["sigma"])
    params = validate(MaterialParams(cfg["mu"], cfg["lam"], cfg["rho"]), mesh)
    try:
        scfg = SolveConfig(
            kind=_kind(cfg),
            shift=cfg["shift"],
            k=cfg["k"],
            tol=cfg["tol"],
            corner_policy=_corner_policy(cfg),
            c_geo=cfg["c_geo"],
            **({"max_dense": cfg["max_dense"]} if "max_dense" in cfg else {}),
            **_corner_kwargs(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    problem = setup_problem(mesh, params, sel, scfg.kind, scfg.corner_policy, scfg.corner_angle)
    res = solve_eigen(mesh, params, sel, scfg, problem=problem)
    check = residual_report(res, problem.A, problem.B, problem.reduction)
    ok = bool(np.all(check <= cfg["residual_tol"]))
    payload = res.to_dict()
    payload.update({"residual_tol": cfg["residual_tol"], "residual_ok": ok, "n_free": problem.reduction.n_free})
    if cfg.get("csv"):
        write_eigen_csv(cfg["csv"], res.eigenvalues)
    if cfg.get("vtk"):
        fields = {f"mode_{i}": res.modes[:, i] for i in range(res.k)}
        write_vtk(cfg["vtk"], mesh, fields, title=f"jonesfem {scfg.kind.value} eigenmodes")
    _emit(make_report("solve", cfg, payload), cfg.get("output"))
    if not ok:
        log.error("residual check failed: max %.3e > %.1e", float(np.max(check)), cfg["residual_tol"])
        return EXIT_RESIDUAL
    return EXIT_OK


def cmd_korn(cfg: dict) -> int:
    mesh = mesh_from_spec(geometry_spec(cfg))
    sel = sigma_selector(mesh, cfg["sigma"])
    kind = _kind(cfg)
    kw = _corner_kwargs(cfg)
    est = estimate_korn(
        mesh,
        sel,
        kind,
        corner_policy=_corner_policy(cfg),
        **({"max_dense": cfg["max_dense"]} if "max_dense" in cfg else {}),
        **kw,
    )
    cc = korn_cross_check(mesh, sel, kind, estimate=est, **kw)
    payload = {**est.to_dict(), "cross_check": cc.to_dict()}
    _emit(make_report("korn", cfg, payload), cfg.get("output"))
    if not cc.consistent:
        log.error("cross-check failed: kernel dim %d but theta_min %.3e", cc.kernel_dim, cc.theta_min)
        return EXIT_CROSSCHECK
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    from .verify import Verifier, select

    try:
        numbers = select(cfg.get("only", "").split(",") if cfg.get("only") else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fixtures = cfg.get("fixtures")
    if fixtures and not Path(fixtures).is_dir():
        raise ConfigError(f"fixture directory {fixtures} does not exist")
    results = Verifier(fixtures).run(numbers)
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    if failed:
        print("failed criteria: " + ", ".join(str(n) for n in failed))
    summary = {"passed": not failed, "failed": failed, "criteria": [r.to_dict() for r in results]}
    if cfg.get("output"):
        write_json(cfg["output"], make_report("verify", cfg, summary))
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "classify": cmd_classify, "solve": cmd_solve, "korn": cmd_korn, "verify": cmd_verify}


# -- argument parsing -------------------------------------------------------


def _add_flags(p: argparse.ArgumentParser, command: str) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    short = {"output": ("-o",)}
    for key, typ in COMMAND_KEYS[command].items():
        flags = short.get(key, ()) + ("--" + key.replace("_", "-"),)
        extra = {}
        if key == "shape":
            extra["help"] = f"one of {', '.join(s for s in SHAPES if s != 'file')}"
        elif key == "sigma":
            extra["help"] = "'all' or comma-separated boundary tags"
        elif key == "kind":
            extra["help"] = "normal or tangential"
        elif key == "only":
            extra["help"] = "comma-separated criterion numbers or group names"
        p.add_argument(*flags, dest=key, type=typ, default=None, **extra)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jonesfem", description="Constrained elastic eigenproblems on planar meshes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "mesh": "generate a mesh file",
        "classify": "rigid-motion kernel and axisymmetry report",
        "solve": "smallest eigenpairs of the constrained problem",
        "korn": "discrete Korn constant and cross-check",
        "verify": "run the acceptance matrix",
    }
    for name in COMMANDS:
        _add_flags(sub.add_parser(name, help=helps[name]), name)
    return parser


@contextlib.contextmanager
def _thread_limit():
    n = os.environ.get("JONES_NUM_THREADS")
    if not n:
        yield
        return
    from threadpoolctl import threadpool_limits

    try:
        n = int(n)
    except ValueError:
        raise ConfigError(f"JONES_NUM_THREADS must be a positive integer, got {n!r}") from None
    if n < 1:
        raise ConfigError(f"JONES_NUM_THREADS must be a positive integer, got {n}")
    # OpenBLAS sizes its buffers for the cores present at load time and can
    # crash when asked for more threads than that
    n = min(n, os.cpu_count() or 1)
    with threadpool_limits(limits=n):
        yield


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = load_config(args.command, args.config, overrides)
        with _thread_limit():
            return COMMANDS[args.command](cfg)
    except (ConfigError, MeshError, MaterialError, ConstraintError) as exc:
        print(f"jonesfem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
