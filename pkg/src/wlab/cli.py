"""Batch front door: run configs in, JSON reports and CSV field dumps out.

Subcommands
-----------
    wlab analyze <config.json> [--out report.json]
    wlab convergence <config.json> --sizes 16,32,64 [--out table.json]
    wlab gallery list
    wlab fields <config.json> --out fields.csv

A run config is a JSON object:

    {
      "surface": {"name": "clifford", "params": {}},
      "grid": {"nu": 64, "nv": 64},
      "tolerances": {"flat_normal": 1e-4},          # optional overrides
      "transforms": [{"include_n": 5},
                     {"mobius": {"seed": 1, "magnitude": 1.0}}],
      "outputs": [{"kind": "report", "path": "report.json"}],
      "seed": 0
    }

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 config error,
3 chart construction error, 4 analysis error.  WLAB_THREADS caps the
worker threads used by convergence sweeps (default: all cores).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .calculus import classify_order, convergence_order
from .diagnostics import DiagnosticsReport, analyze, convergence_L_inf
from .frame import Chart, ChartError
from .gallery import GALLERY, apply_mobius, build_surface, include_in_higher_sphere
from .lorentz import random_mobius

EXIT_VERDICT_FAIL = 1
EXIT_CONFIG = 2
EXIT_CONSTRUCTION = 3
EXIT_ANALYSIS = 4

RESIDUAL_CSV_COLUMNS = [
    "kkbar", "abs_kk", "theta", "res_willmore", "res_swillmore",
    "res_flat", "res_gauss", "res_codazzi", "omega_abs",
]


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return validate_config(cfg)


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"surface", "grid", "tolerances", "transforms", "outputs", "seed"}
    for key in cfg:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    surface = cfg.get("surface")
    if not isinstance(surface, dict) or "name" not in surface:
        raise ConfigError("config key 'surface' must be an object with a 'name'")
    if surface["name"] not in GALLERY:
        raise ConfigError(
            f"surface name {surface['name']!r} is not in the gallery "
            f"({', '.join(sorted(GALLERY))})"
        )
    grid = cfg.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("config key 'grid' must be an object")
    nu = grid.get("nu", 64)
    nv = grid.get("nv", 64)
    if not (isinstance(nu, int) and isinstance(nv, int) and nu >= 8 and nv >= 8):
        raise ConfigError("config key 'grid' needs integer nu, nv >= 8")
    tol = cfg.get("tolerances", {})
    if not isinstance(tol, dict) or not all(
        isinstance(v, (int, float)) for v in tol.values()
    ):
        raise ConfigError("config key 'tolerances' must map residual names to numbers")
    transforms = cfg.get("transforms", [])
    if not isinstance(transforms, list):
        raise ConfigError("config key 'transforms' must be a list")
    for tr in transforms:
        if not isinstance(tr, dict) or len(tr) != 1:
            raise ConfigError("each transform must be a one-key object")
        key = next(iter(tr))
        if key not in ("include_n", "mobius"):
            raise ConfigError(f"unknown transform {key!r}")
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("config key 'seed' must be an integer")
    return {
        "surface": surface,
        "grid": {"nu": nu, "nv": nv},
        "tolerances": tol,
        "transforms": transforms,
        "outputs": cfg.get("outputs", []),
        "seed": seed,
    }


def build_chart(cfg: dict, nu=None, nv=None) -> Chart:
    surface = cfg["surface"]
    chart = build_surface(
        surface["name"],
        nu or cfg["grid"]["nu"],
        nv or cfg["grid"]["nv"],
        surface.get("params", {}),
    )
    for tr in cfg["transforms"]:
        key, val = next(iter(tr.items()))
        if key == "include_n":
            chart = include_in_higher_sphere(chart, int(val))
        else:
            mob = random_mobius(
                chart.ambient_n,
                int(val.get("seed", cfg["seed"])),
                float(val.get("magnitude", 1.0)),
            )
            chart = apply_mobius(chart, mob)
    return chart


def run_analysis(cfg: dict, nu=None, nv=None) -> DiagnosticsReport:
    chart = build_chart(cfg, nu, nv)
    return analyze(chart, tolerances=cfg["tolerances"], seed=cfg["seed"])


def _construct_and_analyze(cfg: dict):
    """(exit_code, report_or_None): maps failures to their exit codes."""
    try:
        chart = build_chart(cfg)
    except (ChartError, ValueError, KeyError, RuntimeError) as exc:
        print(f"chart construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION, None, None
    try:
        report = analyze(chart, tolerances=cfg["tolerances"], seed=cfg["seed"])
    except Exception as exc:  # noqa: BLE001 - analysis stage maps to exit 4
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS, None, None
    return 0, report, chart


def report_json(report: DiagnosticsReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _thread_cap() -> int:
    env = os.environ.get("WLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    code, report, _ = _construct_and_analyze(cfg)
    if code:
        return code
    out_path = args.out or _configured_path(cfg, "report")
    _emit(report_json(report), out_path)
    for e in report.entries:
        print(f"{e.name:<18} L_inf={e.L_inf:.3e} tol={e.tolerance:.1e} {e.verdict}",
              file=sys.stderr)
    return 0 if report.passed else EXIT_VERDICT_FAIL


def cmd_convergence(args) -> int:
    cfg = load_config(args.config)
    try:
        sizes = [int(s) for s in args.sizes.split(",")]
    except ValueError:
        print("--sizes must be a comma-separated list of integers", file=sys.stderr)
        return EXIT_CONFIG
    if len(sizes) < 3:
        print("need at least 3 sizes", file=sys.stderr)
        return EXIT_CONFIG

    def run(n):
        return run_analysis(cfg, nu=n, nv=n)

    try:
        with ThreadPoolExecutor(max_workers=min(_thread_cap(), len(sizes))) as pool:
            reports = list(pool.map(run, sizes))
    except (ChartError, ValueError, KeyError, RuntimeError) as exc:
        print(f"chart construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION

    field_of = {
        "willmore": "res_willmore", "swillmore": "res_swillmore",
        "flat_normal": "res_flat", "isothermic": "res_isothermic",
        "gauss": "res_gauss", "codazzi": "res_codazzi",
        "ricci": "res_ricci", "omega_abs": "omega_abs",
        "omega_holomorphy": "omega_holomorphy",
    }
    names = [e.name for e in reports[0].entries]
    table = {"sizes": sizes, "residual_L_inf": {}, "fitted_order": {}}
    for name in names:
        linfs = [convergence_L_inf(r, field_of[name]) for r in reports]
        table["residual_L_inf"][name] = linfs
        if any(np.isnan(linfs)) or any(x <= 0 for x in linfs):
            table["fitted_order"][name] = "skipped"
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            slope = convergence_order(dict(zip(sizes, linfs)).__getitem__, sizes)
        table["fitted_order"][name] = {
            "slope": slope, "label": classify_order(slope, linfs)
        }

    header = "residual".ljust(18) + "".join(f"n={n}".rjust(13) for n in sizes) + "  order"
    print(header)
    for name in names:
        linfs = table["residual_L_inf"][name]
        fit = table["fitted_order"][name]
        label = fit if isinstance(fit, str) else fit["label"]
        row = name.ljust(18) + "".join(
            "      nan".rjust(13) if np.isnan(x) else f"{x:13.3e}" for x in linfs
        )
        print(f"{row}  {label}")
    if args.out:
        _emit(json.dumps(table, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def cmd_gallery(args) -> int:
    if args.action != "list":
        print(f"unknown gallery action {args.action!r}", file=sys.stderr)
        return EXIT_CONFIG
    for name in sorted(GALLERY):
        print(name)
        for pname, doc in GALLERY[name]["params"].items():
            print(f"    {pname}: {doc}")
    return 0


def cmd_fields(args) -> int:
    cfg = load_config(args.config)
    code, report, chart = _construct_and_analyze(cfg)
    if code:
        return code
    spec = chart.spec
    uu, vv = spec.meshgrid()
    out_path = args.out or _configured_path(cfg, "fields")
    rows = [["u", "v"] + RESIDUAL_CSV_COLUMNS]
    flat = {c: np.asarray(report.fields[c]).ravel() for c in RESIDUAL_CSV_COLUMNS}
    for i, (u, v) in enumerate(zip(uu.ravel(), vv.ravel())):
        rows.append([repr(float(u)), repr(float(v))]
                    + [repr(float(flat[c][i])) for c in RESIDUAL_CSV_COLUMNS])
    text = "\n".join(",".join(r) for r in rows) + "\n"
    _emit(text, out_path)
    return 0


def _configured_path(cfg: dict, kind: str):
    for out in cfg.get("outputs", []):
        if isinstance(out, dict) and out.get("kind") == kind and out.get("path"):
            return out["path"]
    return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wlab",
        description="conformal-geometry diagnostics for surfaces in spheres",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="run the full diagnostic pipeline")
    p_an.add_argument("config")
    p_an.add_argument("--out", help="report path (default: config outputs or stdout)")
    p_an.set_defaults(func=cmd_analyze)

    p_cv = sub.add_parser("convergence", help="re-run across grid sizes and fit orders")
    p_cv.add_argument("config")
    p_cv.add_argument("--sizes", required=True, help="comma-separated grid sizes")
    p_cv.add_argument("--out", help="optional JSON table path")
    p_cv.set_defaults(func=cmd_convergence)

    p_ga = sub.add_parser("gallery", help="inspect the surface gallery")
    p_ga.add_argument("action", choices=["list"])
    p_ga.set_defaults(func=cmd_gallery)

    p_fd = sub.add_parser("fields", help="dump per-point fields as CSV")
    p_fd.add_argument("config")
    p_fd.add_argument("--out", help="CSV path (default: config outputs or stdout)")
    p_fd.set_defaults(func=cmd_fields)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
