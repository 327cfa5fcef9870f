"""``csgeo`` command line: analyze, reconstruct, family, verify.

Exit codes: 0 success, 1 tolerance failure (or no reconstruction branch),
2 bad input (spec, grid, flags, domain).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import fixtures
from .analysis import Analysis, analyze
from .errors import (
    CsgeoError,
    DomainGuard,
    GridMismatch,
    IncompatibleConnection,
    NoBranch,
    SpecError,
)
from .exprlang import load_surface_spec
from .identities import DEFAULT_TOLERANCES
from .reconstruct import (
    InvariantConstants,
    circle_family,
    reconstruct,
    solve_constant_invariants,
)
from .surface import Grid, write_grid_csv

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

#: invariants recovered by the round trip and their tolerances
ROUNDTRIP_TOL = {"beta": 1e-6, "alpha": 1e-6, "a": 1e-5, "b": 1e-6, "mean_curvature": 1e-5}


class UsageError(Exception):
    pass


def dumps(obj: Any) -> str:
    """Deterministic JSON: insertion-ordered keys, shortest round-trip floats."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite value in report")
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# argument plumbing
# --------------------------------------------------------------------------


def parse_grid(text: str) -> tuple[int, int]:
    try:
        nu, nv = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--grid expects NxM, got {text!r}") from None
    if nu < 5 or nv < 5:
        raise UsageError(f"grid must be at least 5x5, got {nu}x{nv}")
    return nu, nv


def parse_domain(text: str | None):
    if text is None:
        return None
    try:
        u0, u1, v0, v1 = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--domain expects u0,u1,v0,v1, got {text!r}") from None
    if not (u1 > u0 and v1 > v0):
        raise UsageError("--domain ranges must be increasing")
    return (u0, u1), (v0, v1)


def parse_tolerances(items: Sequence[str] | None) -> dict[str, float]:
    """``--tol 1e-8`` sets every tolerance, ``--tol name=1e-8`` one of them."""
    out: dict[str, float] = {}
    for item in items or ():
        name, _, val = item.rpartition("=")
        try:
            x = float(val)
        except ValueError:
            raise UsageError(f"bad tolerance {item!r}") from None
        if not (x > 0 and math.isfinite(x)):
            raise UsageError(f"tolerances must be positive, got {item!r}")
        if name:
            if name not in DEFAULT_TOLERANCES:
                raise UsageError(f"unknown identity {name!r}")
            out[name] = x
        else:
            out.update({k: x for k in DEFAULT_TOLERANCES})
    return out


def _make_grid(args, default: Grid | None = None) -> Grid:
    nu, nv = parse_grid(args.grid) if args.grid else (default.shape if default else (64, 64))
    dom = parse_domain(args.domain)
    if dom is None and default is not None:
        return Grid.box(nu, nv, (default.u[0], default.u[0] + _span(default, 0)),
                        (default.v[0], default.v[0] + _span(default, 1)), default.periodic)
    ur, vr = dom or ((0.0, 2 * math.pi), (0.0, 2 * math.pi))
    periodic = tuple(abs((r[1] - r[0]) - 2 * math.pi) < 1e-9 for r in (ur, vr))
    return Grid.box(nu, nv, ur, vr, periodic)


def _span(g: Grid, axis: int) -> float:
    x = g.u if axis == 0 else g.v
    n = len(x)
    h = float(x[1] - x[0])
    return h * n if g.periodic[axis] else float(x[-1] - x[0])


def _load_input(spec: str):
    """A spec path, a JSON string or ``fixture:NAME``; returns (surface, default grid or None)."""
    if spec.startswith("fixture:"):
        f = fixtures.get(spec.split(":", 1)[1])
        return f.surface(), f.grid()
    return load_surface_spec(spec), None


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    for key, val in cfg.items():
        attr = key.replace("-", "_")
        if attr in {"command", "func"} or not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r}")
        setattr(args, attr, val)


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(args, name: str, report: dict) -> None:
    text = dumps(report)
    out = _out_dir(args)
    if out is not None:
        (out / name).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# analysis report
# --------------------------------------------------------------------------


def analysis_report(an: Analysis) -> dict:
    rep: dict[str, Any] = {"grid": list(an.grid.shape), "periodic": list(an.grid.periodic)}
    if an.error is not None:
        rep["status"] = "error"
        rep["error"] = {"type": type(an.error).__name__, "message": str(an.error)}
        return rep
    rep["status"] = "ok"
    rep["invariants"] = an.summary()
    rep["intrinsic_relations"] = dict(an.intrinsic)
    rep["identities"] = an.identities.to_json()
    rep["passed"] = an.identities.passed
    return rep


def _point_columns(an: Analysis) -> dict[str, np.ndarray]:
    fs = an.fields
    return {n: getattr(fs, n) for n in ("alpha", "beta", "a", "b", "alpha1", "alpha2", "beta1", "beta2",
                                        "K_intrinsic", "mean_curvature")}


def cmd_analyze(args) -> int:
    surface, default = _load_input(args.spec)
    grid = _make_grid(args, default)
    an = analyze(surface, grid, h=args.h, tolerances=parse_tolerances(args.tol),
                 codazzi3_variant=args.codazzi3)
    rep = {"command": "analyze", "input": args.spec, **analysis_report(an)}
    if args.format == "csv" and an.ok:
        out = _out_dir(args)
        if out is None:
            raise UsageError("--format csv needs --out DIR")
        write_grid_csv(out / "points.csv", grid, _point_columns(an))
    _emit(args, "analyze_report.json", rep)
    if args.strict and an.ok and not an.identities.passed:
        return EXIT_FAIL
    return EXIT_OK


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------


SNAP_TOL = {"alpha": 1e-6, "a": 1e-5}


def _constants_from_args(args) -> tuple[InvariantConstants, dict | None]:
    """Constants to reconstruct, plus the raw explicit input when it was refined.

    Explicit constants lying within SNAP_TOL of a solver branch (typically
    values typed with 7 digits) are replaced by that branch, since the
    truncated values are not exactly compatible.
    """
    if args.beta is None:
        raise UsageError("reconstruct needs --beta")
    beta = float(args.beta)
    if args.alpha is None and args.a is None:
        branches = solve_constant_invariants(beta)
        return max(branches, key=lambda k: (k.a, -abs(k.alpha - math.pi / 2))), None
    if args.alpha is None or args.a is None:
        raise UsageError("explicit constants need both --alpha and --a")
    given = InvariantConstants(beta, float(args.alpha), float(args.a), float(args.b or 0.0))
    raw = {"beta": given.beta, "alpha": given.alpha, "a": given.a, "b": given.b}
    if given.b != 0.0:
        return given, None
    try:
        branches = solve_constant_invariants(beta)
    except NoBranch:
        return given, None
    for k in branches:
        if abs(k.alpha - given.alpha) <= SNAP_TOL["alpha"] and abs(k.a - given.a) <= SNAP_TOL["a"]:
            return k, raw
    return given, None


def roundtrip_summary(k: InvariantConstants, an: Analysis) -> dict:
    fs = an.fields
    err = {
        "beta": float(np.max(np.abs(fs.beta - k.beta))),
        "alpha": float(np.max(np.abs(fs.alpha - k.alpha))),
        "a": float(np.max(np.abs(np.abs(fs.a) - abs(k.a)))),
        "b": float(np.max(np.abs(fs.b))),
        "mean_curvature": float(np.max(fs.mean_curvature)),
    }
    return {"errors": err, "tolerances": dict(ROUNDTRIP_TOL),
            "passed": all(err[n] <= ROUNDTRIP_TOL[n] for n in err)}


def cmd_reconstruct(args) -> int:
    grid = _make_grid(args)
    tol = parse_tolerances(args.tol)
    k, raw = _constants_from_args(args)
    rec = reconstruct(k, grid, method=args.method, h=args.h, tolerances=tol)
    an = rec.analysis
    rep: dict[str, Any] = {
        "command": "reconstruct",
        "constants": k.to_json(),
        "refined_from": raw,
        "maurer_cartan": {
            "commutator_norm": rec.mc.commutator_norm,
            "compat_residual": rec.mc.compat_residual,
            "complex_structure_residual": rec.mc.complex_structure_residual(),
        },
        "integration": rec.integration.to_json(),
        "modes": {"lambda": rec.immersion.lam.tolist(), "mu": rec.immersion.mu.tolist(),
                  "amplitudes": np.linalg.norm(rec.immersion.w, axis=1).tolist()},
        "analysis": analysis_report(an),
    }
    ok = an.ok and an.identities.passed
    if an.ok:
        rt = roundtrip_summary(k, an)
        rep["roundtrip"] = rt
        ok = ok and rt["passed"]
    rep["passed"] = ok
    out = _out_dir(args)
    if out is not None:
        (out / "surface.json").write_text(dumps(rec.immersion.to_surface().to_json()), encoding="utf-8")
        if args.format == "csv":
            rec.integration.to_csv(out / "immersion.csv")
        else:
            (out / "immersion.json").write_text(dumps(rec.integration.to_json(include_points=True)),
                                                encoding="utf-8")
    _emit(args, "reconstruct_report.json", rep)
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# circle family
# --------------------------------------------------------------------------


def cmd_family(args) -> int:
    if args.beta is None:
        raise UsageError("family needs --beta")
    pts = circle_family(float(args.beta), int(args.n))
    rows = [{"beta": p.beta, "a": p.a, "b": p.b, "kenmotsu": p.kenmotsu, "new_family": p.new_family,
             "membership_residual": p.membership_residual()} for p in pts]
    worst = max(r["membership_residual"] for r in rows)
    if args.format == "json":
        _emit(args, "family.json", {"command": "family", "beta": float(args.beta), "n": len(rows),
                                    "max_membership_residual": worst, "points": rows})
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else str(v).lower() for v in r.values()])
        out = _out_dir(args)
        if out is not None:
            (out / "family.csv").write_text(buf.getvalue(), encoding="utf-8")
        sys.stdout.write(buf.getvalue())
    return EXIT_OK if worst < 1e-12 else EXIT_FAIL


# --------------------------------------------------------------------------
# verification suite
# --------------------------------------------------------------------------

ROUNDTRIP_FIXTURE = "torus_pi3"


def _verify_fixture(name: str, grid_shape, h: float, tol: dict) -> dict:
    if name == ROUNDTRIP_FIXTURE:
        k = max(solve_constant_invariants(math.pi / 3), key=lambda c: c.a)
        rec = reconstruct(k, Grid.box(*grid_shape), h=h, tolerances=tol)
        entry = {"fixture": name, "expected": "roundtrip", **analysis_report(rec.analysis)}
        failures = [] if rec.analysis.ok else [type(rec.analysis.error).__name__]
        if rec.analysis.ok:
            rt = roundtrip_summary(k, rec.analysis)
            entry["roundtrip"] = rt
            failures += rec.analysis.identities.failures()
            failures += [f"roundtrip.{n}" for n, e in rt["errors"].items() if e > ROUNDTRIP_TOL[n]]
        entry["failures"] = failures
        entry["passed"] = not failures
        return entry
    f = fixtures.get(name)
    an = analyze(f.surface(), f.grid(*grid_shape), h=h, tolerances=tol)
    entry = {"fixture": name, "expected": f.expect_error or ("minimal" if f.expect_minimal else "not_minimal"),
             **analysis_report(an)}
    failures = []
    if f.expect_error:
        got = type(an.error).__name__ if an.error is not None else None
        if got != f.expect_error:
            failures.append(f"expected {f.expect_error}, got {got}")
    elif an.error is not None:
        failures.append(type(an.error).__name__)
    else:
        minimal = bool(np.max(an.fields.mean_curvature) <= 1e-6)
        if minimal != f.expect_minimal:
            failures.append("minimality")
        failures += an.identities.failures()
    entry["failures"] = failures
    entry["passed"] = not failures
    return entry


def cmd_verify(args) -> int:
    names = list(fixtures.FIXTURES) + [ROUNDTRIP_FIXTURE]
    if args.fixtures:
        wanted = [n.strip() for n in args.fixtures.split(",") if n.strip()]
        unknown = [n for n in wanted if n not in names]
        if unknown:
            raise UsageError(f"unknown fixtures {unknown}; choose from {names}")
        names = wanted
    grid_shape = parse_grid(args.grid) if args.grid else (64, 64)
    tol = parse_tolerances(args.tol)
    results = [_verify_fixture(n, grid_shape, args.h, tol) for n in names]
    ok = all(r["passed"] for r in results)
    table = [{"fixture": r["fixture"], "passed": r["passed"], "failures": r["failures"]} for r in results]
    _emit(args, "verify_report.json", {"command": "verify", "grid": list(grid_shape), "h": args.h,
                                       "passed": ok, "summary": table, "fixtures": results})
    for r in results:
        line = f"{r['fixture']}: {'PASS' if r['passed'] else 'FAIL'}"
        if r["failures"]:
            line += " (" + ", ".join(r["failures"]) + ")"
        print(line, file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", help="analysis grid NxM (default 64x64)")
    common.add_argument("--domain", help="u0,u1,v0,v1 (an axis spanning 2 pi is periodic)")
    common.add_argument("--h", type=float, default=1e-4, help="frame differencing step")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("json", "csv"), help="output format (family defaults to csv)")
    common.add_argument("--strict", action="store_true", help="exit 1 on tolerance failures")
    common.add_argument("--tol", action="append", metavar="[NAME=]VALUE", help="tolerance override")
    common.add_argument("--config", help="JSON file whose keys override the flags")
    common.add_argument("--codazzi3", choices=("additive", "multiplied", "a_factor"), default="additive",
                        help="reading of the third Codazzi equation")

    p = argparse.ArgumentParser(prog="csgeo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="analyze a surface spec")
    a.add_argument("spec", help="spec file, JSON string or fixture:NAME")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reconstruct", parents=[common], help="reconstruct from constant invariants")
    r.add_argument("--beta", type=float, help="contact angle (required)")
    r.add_argument("--alpha", type=float, help="holomorphic angle (default: solver branch)")
    r.add_argument("--a", type=float, help="II^3(e1, e1) coefficient (default: solver branch)")
    r.add_argument("--b", type=float, help="II^3(e1, e2) coefficient, must be 0")
    r.add_argument("--method", choices=("auto", "expm", "rk4"), default="auto", help="frame integrator")
    r.set_defaults(func=cmd_reconstruct)

    f = sub.add_parser("family", parents=[common], help="sample the (a, b) circle family")
    f.add_argument("--beta", type=float, help="contact angle in (0, pi/2]")
    f.add_argument("-n", type=int, default=16, help="number of sample points")
    f.set_defaults(func=cmd_family, default_format="csv")

    v = sub.add_parser("verify", parents=[common], help="run the built-in fixture suite")
    v.add_argument("--fixtures", help="comma-separated subset")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        _apply_config(args)
        if args.format is None:
            args.format = getattr(args, "default_format", "json")
        return args.func(args)
    except (UsageError, SpecError, GridMismatch, DomainGuard, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoBranch, IncompatibleConnection, CsgeoError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
