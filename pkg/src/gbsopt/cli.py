"""Command-line front end: ``gbsopt <command> [--config FILE] [--out DIR] ...``.

Every command reads an optional JSON config (validated, unknown fields
rejected); command-line options override config values. Results go to
``--out`` as JSON/CSV and a one-line summary is printed. Exit status is 0
on success, 1 on a numerical failure and 2 on a usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import jsonschema

from . import __version__
from .extrapolation import CATALOG_CORES, CATALOG_NAMES, ExtrapolationScheme, catalog_scheme, partition_plan
from .gbs import ButcherTableau, classical_rk4, forward_euler, tableau_stability_polynomial
from .numkernel import RationalPolynomial, parse_rational
from .optimizer import (
    SolverError,
    imaginary_axis,
    imaginary_with_bulge,
    maximize_h,
    rationalize_scheme,
    search_fully_determined,
)
from .stability import (
    ISB_TOL,
    boundary_scan,
    isb,
    normalized_isb,
    polynomial_evaluator,
    scheme_evaluator,
    write_boundary_csv,
)
from .waveharness import convect, convergence_study, write_study_csv

log = logging.getLogger("gbsopt")

COMMANDS = ("catalog", "isb", "domain", "optimize", "search-fd", "convect", "study")

_METHOD = {"type": "string", "minLength": 1}
_COUNTS = {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMAS: dict[str, dict] = {
    "catalog": {"name": {"enum": list(CATALOG_NAMES)}, "cores": {"type": "integer", "minimum": 1}},
    "isb": {"method": _METHOD, "polynomial": {"type": "array", "items": {"type": ["string", "integer"]}}},
    "domain": {"method": _METHOD, "resolution": {"type": "integer", "minimum": 64}},
    "optimize": {
        "order": {"type": "integer", "minimum": 1},
        "step_counts": _COUNTS,
        "n_max": {"type": "integer", "minimum": 2},
        "exclude": _COUNTS,
        "n_dep": _COUNTS,
        "cores": {"type": "integer", "minimum": 1},
        "contour": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["imaginary_axis", "imaginary_with_real_bulge"]},
                "samples": {"type": "integer", "minimum": 128},
                "eps_r": {"type": "number", "minimum": 0},
                "beta": _POSITIVE,
                "bulge_samples": {"type": "integer", "minimum": 2},
            },
        },
        "tol_h": _POSITIVE,
        "method": {"enum": ["socp", "lp"]},
        "rationalize": {"oneOf": [{"type": "boolean"}, {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2}]},
        "name": {"type": "string"},
    },
    "search-fd": {
        "order": {"type": "integer", "minimum": 1},
        "max_count": {"type": "integer", "minimum": 2},
        "max_combinations": {"type": "integer", "minimum": 1},
    },
    "convect": {
        "method": _METHOD,
        "nx": {"type": "integer", "minimum": 4},
        "sigma": _POSITIVE,
        "precision": {"type": "integer", "minimum": 16},
    },
    "study": {
        "methods": {"type": "array", "items": _METHOD, "minItems": 1},
        "grids": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 3},
        "sigma": _POSITIVE,
        "precision": {"type": "integer", "minimum": 16},
        "weights": {"enum": ["exact", "double"]},
    },
}

_SCHEME_OUT = {
    "type": "object",
    "required": ["name", "order", "n_dep", "c_dep", "n_free", "c_free"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "order": {"type": "integer"},
        "n_dep": {"type": "array", "items": {"type": "integer"}},
        "c_dep": {"type": "array", "items": {"type": "string"}},
        "n_free": {"type": "array", "items": {"type": "integer"}},
        "c_free": {"type": "array", "items": {"type": "string"}},
    },
}
_REPORT_OUT = {
    "type": "object",
    "required": ["isb", "isb_normalized", "critical_path_evals", "a_p1", "a_p2", "rk4_ratio"],
    "properties": {k: {"type": "number"} for k in ("isb", "isb_normalized", "a_p1", "a_p2", "rk4_ratio")},
}


class UsageError(Exception):
    """Bad config or arguments; exit status 2."""


def config_schema(command: str) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": CONFIG_SCHEMAS[command]}


def load_config(command: str, path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    validate(data, config_schema(command), f"config {path}")
    return data


def validate(data: Any, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"{what}: {loc}: {exc.message}") from exc


def write_json(data: dict, path: Path, schema: dict | None = None) -> None:
    """Write JSON; floats use ``repr``, the shortest exact round-trip form."""
    if schema is not None:
        validate(data, schema, f"output {path.name}")
    path.write_text(json.dumps(data, indent=2) + "\n")


def resolve_method(method_ref: str):
    """Catalog name, ``RK4``, ``FE``, or a path to a scheme or tableau JSON file."""
    if method_ref in CATALOG_NAMES:
        return catalog_scheme(method_ref)
    if method_ref.upper() == "RK4":
        return classical_rk4()
    if method_ref.upper() == "FE":
        return forward_euler()
    path = Path(method_ref)
    if path.suffix == ".json" and path.exists():
        data = json.loads(path.read_text())
        if "order" in data:
            return ExtrapolationScheme.from_json(data)
        if "A" in data:
            return ButcherTableau.from_json(data)
        raise UsageError(f"{method_ref}: neither a scheme nor a tableau file")
    raise UsageError(f"unknown method {method_ref!r}; use one of {', '.join(CATALOG_NAMES)}, RK4, FE or a JSON file")


def _evaluator(method):
    if isinstance(method, ExtrapolationScheme):
        return scheme_evaluator(method)
    if isinstance(method, ButcherTableau):
        return polynomial_evaluator(tableau_stability_polynomial(method))
    return polynomial_evaluator(method)


def _name(method) -> str:
    return getattr(method, "name", "") or "polynomial"


def _pick(args, cfg: dict, key: str, default=None):
    value = getattr(args, key, None)
    return cfg.get(key, default) if value is None else value


def cmd_catalog(args, cfg, out: Path) -> str:
    name = _pick(args, cfg, "name")
    if name is None:
        raise UsageError("catalog needs a scheme name")
    if name not in CATALOG_NAMES:
        raise UsageError(f"unknown catalog scheme {name!r}; choose from {', '.join(CATALOG_NAMES)}")
    scheme = catalog_scheme(name)
    cores = cfg.get("cores", CATALOG_CORES[name])
    plan = partition_plan(scheme.step_counts, cores)
    report = normalized_isb(scheme, plan, tol=args.tolerance or ISB_TOL)
    write_json(scheme.to_json(), out / f"{name}.json", _SCHEME_OUT)
    write_json({**report.to_json(), "plan": plan.to_json()}, out / f"{name}_report.json", _REPORT_OUT)
    return (f"{name}: ISB {report.isb:.6f}, ISBn {report.isb_normalized:.6f} "
            f"(critical path {report.critical_path_evals}), RK4 ratio {report.rk4_ratio:.4f}")


def cmd_isb(args, cfg, out: Path) -> str:
    if cfg.get("polynomial") and not args.method:
        method = RationalPolynomial([parse_rational(str(c)) for c in cfg["polynomial"]])
    else:
        method_ref = _pick(args, cfg, "method")
        if method_ref is None:
            raise UsageError("isb needs a method")
        method = resolve_method(method_ref)
    value = isb(_evaluator(method), tol=args.tolerance or ISB_TOL)
    result = {"method": _name(method), "isb": value}
    if isinstance(method, ExtrapolationScheme):
        rep = normalized_isb(method, tol=args.tolerance or ISB_TOL)
        result.update(isb_normalized=rep.isb_normalized, critical_path_evals=rep.critical_path_evals)
    write_json(result, out / "isb.json")
    return f"{result['method']}: ISB {value:.10g}"


def cmd_domain(args, cfg, out: Path) -> str:
    method_ref = _pick(args, cfg, "method")
    if method_ref is None:
        raise UsageError("domain needs a method")
    method = resolve_method(method_ref)
    pts = boundary_scan(_evaluator(method), _pick(args, cfg, "resolution", 256))
    path = out / f"{_name(method)}_boundary.csv"
    write_boundary_csv(pts, path)
    extent = max((abs(z.imag) for z in pts), default=0.0)
    axis = isb(_evaluator(method), tol=args.tolerance or ISB_TOL)
    write_json({"method": _name(method), "points": len(pts), "imag_extent": extent, "isb": axis},
               out / f"{_name(method)}_domain.json")
    return f"{_name(method)}: {len(pts)} boundary points, |Im| extent {extent:.6f}, ISB {axis:.6f}"


def _optimize_counts(cfg: dict, args) -> list[int]:
    counts = _pick(args, cfg, "step_counts")
    n_max = _pick(args, cfg, "n_max")
    if counts is None:
        if n_max is None:
            raise UsageError("optimize needs step_counts or n_max")
        counts = list(range(2, n_max + 1, 2))
    exclude = set(cfg.get("exclude", []))
    return [n for n in counts if n not in exclude]


def cmd_optimize(args, cfg, out: Path) -> str:
    order = _pick(args, cfg, "order")
    if order is None:
        raise UsageError("optimize needs an order")
    if order % 4:
        raise UsageError(f"order {order} is not a multiple of 4; GBS extrapolation only reaches "
                         "such orders with imaginary-axis stability")
    counts = _optimize_counts(cfg, args)
    c = cfg.get("contour", {})
    samples = c.get("samples", 512)
    if c.get("kind", "imaginary_axis") == "imaginary_axis":
        contour = imaginary_axis(samples)
    else:
        contour = imaginary_with_bulge(c.get("eps_r", 0.0), c.get("beta", 1.0), samples, c.get("bulge_samples", 128))
    cores = cfg.get("cores")
    plan = partition_plan(counts, cores) if cores else None
    try:
        opt = maximize_h(contour, counts, order, tol_h=args.tolerance or cfg.get("tol_h", 1e-5),
                         n_dep=cfg.get("n_dep"), plan=plan, method=cfg.get("method", "socp"),
                         name=cfg.get("name", ""))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    scheme, isbn = opt.scheme, opt.isb_normalized
    rat = cfg.get("rationalize", False)
    if rat is not False:
        scheme, _, isbn = rationalize_scheme(opt, None if rat is True else rat, plan=plan)
    report = normalized_isb(scheme, plan)
    write_json(scheme.to_json(), out / f"{scheme.name}.json", _SCHEME_OUT)
    write_json({**report.to_json(), "h": opt.h, "r": opt.r, "optimized_isb_normalized": opt.isb_normalized,
                "contour": contour.to_json(), "trajectory": [list(t) for t in opt.trajectory]},
               out / f"{scheme.name}_report.json", _REPORT_OUT)
    return f"{scheme.name}: h {opt.h:.6f}, ISBn {report.isb_normalized:.6f} (critical path {report.critical_path_evals})"


def cmd_search_fd(args, cfg, out: Path) -> str:
    order = _pick(args, cfg, "order")
    if order is None:
        raise UsageError("search-fd needs an order")
    if order not in (8, 12, 16):
        raise UsageError("search-fd supports orders 8, 12 and 16")
    try:
        res = search_fully_determined(order, _pick(args, cfg, "max_count", 24),
                                      cfg.get("max_combinations", 20_000))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_json(res.to_json(), out / f"search_fd_{order}.json")
    return f"order {order}: best {list(res.best.step_counts)} with ISBn {res.isb_normalized:.6f}"


def cmd_convect(args, cfg, out: Path) -> str:
    method_ref = _pick(args, cfg, "method")
    if method_ref is None:
        raise UsageError("convect needs a method")
    run = convect(resolve_method(method_ref), _pick(args, cfg, "nx", 128), _pick(args, cfg, "sigma", 0.99),
                  max_workers=args.cores, precision=cfg.get("precision"))
    write_json(run.to_json(), out / f"convect_{run.method}_{run.nx}.json")
    state = "stable" if run.stable else "UNSTABLE"
    return f"{run.method} Nx={run.nx}: {run.steps} steps, error {run.error:.3e} ({state})"


def cmd_study(args, cfg, out: Path) -> str:
    methods = cfg.get("methods", ["GBS_8_6", "GBS_12_8", "RK4"])
    grids = cfg.get("grids", [16, 32, 64, 128, 256, 512])
    runs = convergence_study([resolve_method(m) for m in methods], grids, cfg.get("sigma", 0.99),
                             max_workers=args.cores, precision=cfg.get("precision"),
                             weights=cfg.get("weights", "exact"))
    write_study_csv(runs, out / "study.csv")
    slopes = {r.method: r.slope for r in runs}
    return "slopes: " + ", ".join(f"{m} {s:.3f}" for m, s in slopes.items())


HANDLERS = {
    "catalog": cmd_catalog,
    "isb": cmd_isb,
    "domain": cmd_domain,
    "optimize": cmd_optimize,
    "search-fd": cmd_search_fd,
    "convect": cmd_convect,
    "study": cmd_study,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file for the command")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--cores", type=int, help="cap on integrator worker threads")
    common.add_argument("--tolerance", type=float,
                        help="ISB scan tolerance (optimize: relative h tolerance)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gbsopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", parents=[common], help="published scheme and its stability report")
    p.add_argument("name", nargs="?")
    p = sub.add_parser("isb", parents=[common], help="imaginary stability boundary of a method")
    p.add_argument("method", nargs="?")
    p = sub.add_parser("domain", parents=[common], help="stability-domain boundary as CSV")
    p.add_argument("method", nargs="?")
    p.add_argument("--resolution", type=int)
    p = sub.add_parser("optimize", parents=[common], help="optimize free weights for a large ISB")
    p.add_argument("--order", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p = sub.add_parser("search-fd", parents=[common], help="exhaustive fully-determined scheme search")
    p.add_argument("--order", type=int)
    p.add_argument("--max-count", dest="max_count", type=int)
    p = sub.add_parser("convect", parents=[common], help="one-way wave run at the stability limit")
    p.add_argument("method", nargs="?")
    p.add_argument("--nx", type=int)
    p.add_argument("--sigma", type=float)
    sub.add_parser("study", parents=[common], help="convergence study over grids, CSV output")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.cores is not None and args.cores < 1:
            raise UsageError("--cores must be >= 1")
        if args.tolerance is not None and not args.tolerance > 0:
            raise UsageError("--tolerance must be positive")
        cfg = load_config(args.command, args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        print(HANDLERS[args.command](args, cfg, out))
    except UsageError as exc:
        print(f"gbsopt {args.command}: {exc}", file=sys.stderr)
        return 2
    except (SolverError, FloatingPointError, ArithmeticError) as exc:
        print(f"gbsopt {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
