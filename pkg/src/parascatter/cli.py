"""Command-line runner: one scenario per invocation, all outputs plus a manifest.

    parascatter <mode> --config FILE [--out DIR] [--grid-nx INT] [--k REAL]
                [--beta DEG] [--gamma REAL|inf] [--n-points INT] [--threads INT]

The config is JSON. Flags override config fields; PARASCATTER_THREADS is
the fallback for --threads. The manifest written next to the outputs is
itself a valid config, so any run can be replayed from it.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import re
import sys
import time
import warnings
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from . import analytic, bwm, spectrum
from .geometry import (IMPENETRABLE, BilliardSpec, curvature_profile, discretize_barrier,
                       knife_edge_wall)
from .io import (GridSpec, export_grid, export_resonances, export_spectrum, export_tmatrix,
                 write_json)

logger = logging.getLogger("parascatter")

MODES = ("analytic-infinite", "analytic-knife", "analytic-finite", "bwm-barrier",
         "bwm-billiard", "spectrum", "refine", "validate")

_strength = {"anyOf": [{"type": "number", "minimum": 0}, {"enum": ["inf"]}]}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "units": {"const": "rydberg"},
        "wave": {
            "type": "object", "additionalProperties": False,
            "properties": {"k": _pos, "beta_deg": {"type": "number"}},
        },
        "barrier": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "eta0": {"type": "number", "minimum": 0},
                "xi0": _pos,
                "gamma0": _strength,
                "profile": {"enum": ["curvature", "constant"]},
                "n_points": {"type": "integer", "minimum": 2},
            },
        },
        "billiard": {
            "type": "object", "additionalProperties": False,
            "properties": {"xi0": _pos, "eta0": _pos},
        },
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "x_min": {"type": "number"}, "x_max": {"type": "number"},
                "y_min": {"type": "number"}, "y_max": {"type": "number"},
                "nx": {"type": "integer", "minimum": 2}, "ny": {"type": "integer", "minimum": 2},
            },
        },
        "numerics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "max_terms": {"type": "integer", "minimum": 1, "maximum": 60},
                "tail_tol": _pos,
                "n_terms": {"anyOf": [{"type": "integer", "minimum": 1, "maximum": 60},
                                      {"type": "null"}]},
                "quad_tol": _pos,
                "n_points": {"type": "integer", "minimum": 4},
                "gamma": _strength,
                "diagonal": {"enum": list(bwm.DIAGONAL_RULES)},
                "threads": {"type": "integer", "minimum": 1},
                "export_tmatrix": {"type": "boolean"},
            },
        },
        "spectrum": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "k_min": _pos, "k_max": _pos,
                "samples": {"type": "integer", "minimum": 2},
                "spacing": {"enum": ["k", "energy"]},
                "prominence_frac": _pos,
                "epsilon": _pos,
                "max_iter": {"type": "integer", "minimum": 1},
                "refine_samples": {"type": "integer", "minimum": 3},
                "delta_k": {"anyOf": [_pos, {"type": "null"}]},
                "seeds": {"type": "array", "items": _pos},
            },
        },
        "validate": {
            "type": "object", "additionalProperties": False,
            "properties": {"barrier_xi0": _pos, "n_points": {"type": "integer", "minimum": 2}},
        },
        # written by runs; accepted back so a manifest replays as a config
        "outputs": {"type": "object"},
        "warnings": {"type": "array"},
        "package": {"type": "object"},
        "results": {"type": "object"},
    },
}

DEFAULTS = {
    "units": "rydberg",
    "wave": {"k": 10.0, "beta_deg": 0.0},
    "barrier": {"eta0": 0.5, "xi0": 1.0, "gamma0": 1.0, "profile": "curvature", "n_points": 300},
    "billiard": {"xi0": 3.0, "eta0": 2.0},
    "grid": {"x_min": -2.0, "x_max": 2.0, "y_min": -2.0, "y_max": 2.0, "nx": 101, "ny": 101},
    "numerics": {"max_terms": 60, "tail_tol": 1e-12, "n_terms": None, "quad_tol": 1e-10,
                 "n_points": 200, "gamma": "inf", "diagonal": bwm.DEFAULT_DIAGONAL,
                 "threads": 1, "export_tmatrix": True},
    "spectrum": {"k_min": 2.0 / 300, "k_max": 2.0, "samples": 300, "spacing": "k",
                 "prominence_frac": 0.05, "epsilon": 1e-6, "max_iter": 30,
                 "refine_samples": spectrum.REFINE_SAMPLES, "delta_k": None, "seeds": []},
    "validate": {"barrier_xi0": 6.0, "n_points": 1500},
}


class ConfigError(ValueError):
    """A config file that cannot be parsed or violates the schema."""


def _line_of(text: str, path) -> int:
    """Best-effort 1-based line of the JSON key path in the raw text."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for e in errors:
            where = "/".join(str(p) for p in e.path) or "<root>"
            msgs.append(f"{path}:{_line_of(text, list(e.path))}: {where}: {e.message}")
        raise ConfigError("\n".join(msgs))
    return cfg


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_strength(text):
    if str(text).strip().lower() in ("inf", "infinity"):
        return "inf"
    value = float(text)
    if math.isinf(value):
        return "inf"
    if value < 0:
        raise argparse.ArgumentTypeError("strength must be >= 0 or inf")
    return value


def resolve(mode: str, cfg: dict, args) -> dict:
    """Defaults <- config <- flags, with the mode recorded."""
    if "mode" in cfg and cfg["mode"] != mode:
        raise ConfigError(f"config mode {cfg['mode']!r} does not match subcommand {mode!r}")
    run = {k: v for k, v in cfg.items() if k not in ("outputs", "warnings", "package", "results")}
    res = _merge(DEFAULTS, run)
    res["mode"] = mode
    if args.k is not None:
        res["wave"]["k"] = args.k
    if args.beta is not None:
        res["wave"]["beta_deg"] = args.beta
    if args.gamma is not None:
        if mode in ("bwm-billiard", "spectrum", "refine"):
            res["numerics"]["gamma"] = args.gamma
        else:
            res["barrier"]["gamma0"] = args.gamma
    if args.grid_nx is not None:
        res["grid"]["nx"] = args.grid_nx
    if args.n_points is not None:
        if mode in ("bwm-billiard", "spectrum", "refine"):
            res["numerics"]["n_points"] = args.n_points
        elif mode == "validate":
            res["validate"]["n_points"] = args.n_points
        else:
            res["barrier"]["n_points"] = args.n_points
    threads = args.threads
    if threads is None and os.environ.get("PARASCATTER_THREADS"):
        threads = int(os.environ["PARASCATTER_THREADS"])
    if threads is not None:
        res["numerics"]["threads"] = threads
    try:
        jsonschema.validate(res, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.path) or "<root>"
        raise ConfigError(f"resolved parameters: {where}: {exc.message}") from None
    return res


# --------------------------------------------------------------------------
# scenarios


def _grid(res) -> GridSpec:
    return GridSpec(**res["grid"])


def _wave(res):
    return float(res["wave"]["k"]), math.radians(float(res["wave"]["beta_deg"]))


def _field_meta(res, what):
    return {"mode": res["mode"], "k": res["wave"]["k"], "quantity": what, "scenario": res}


def _barrier_wall(res):
    b = res["barrier"]
    g0 = b["gamma0"]
    n = int(b["n_points"])
    eta0, xi0 = float(b["eta0"]), float(b["xi0"])
    if eta0 == 0:
        return knife_edge_wall(0.5 * xi0 * xi0, n, g0)
    if g0 == "inf":
        return discretize_barrier(xi0, eta0, n, IMPENETRABLE)
    if b["profile"] == "curvature":
        return discretize_barrier(xi0, eta0, n, curvature_profile(float(g0), eta0))
    return discretize_barrier(xi0, eta0, n, float(g0) * math.sqrt(math.pi / 8.0))


def _solve_bwm(boundary, res, out, results):
    k, beta = _wave(res)
    num = res["numerics"]
    est = bwm.BoundaryWallScatterer(k=k, beta=beta, n_threads=num["threads"],
                                    diagonal=num["diagonal"]).fit(boundary)
    grid = _grid(res)
    psi = est.predict(grid.points())
    outputs = {"field": str(export_grid(psi, grid, out / "psi.psgr", _field_meta(res, "psi")))}
    boundary.to_json(out / "boundary.json")
    outputs["boundary"] = str(out / "boundary.json")
    if num["export_tmatrix"]:
        outputs["tmatrix"] = str(export_tmatrix(est.system_.T, out / "tmatrix_abs.f32",
                                                {"k": k, "mode": res["mode"]}))
    results.update({"t_norm": est.t_norm_, "condition": est.system_.condition,
                    "n_points": boundary.n})
    return outputs


def run_analytic_infinite(res, out, results):
    k, beta = _wave(res)
    b = res["barrier"]
    est = analytic.InfiniteBarrierScatterer(k=k, beta=beta, eta0=b["eta0"], gamma0=b["gamma0"],
                                            max_terms=res["numerics"]["max_terms"]).fit()
    grid = _grid(res)
    psi = est.predict(grid.points())
    return {"field": str(export_grid(psi, grid, out / "psi.psgr", _field_meta(res, "psi")))}


def run_analytic_knife(res, out, results):
    k, _ = _wave(res)
    est = analytic.KnifeEdgeScatterer(k=k, gamma0=res["barrier"]["gamma0"]).fit()
    grid = _grid(res)
    psi = est.predict(grid.points())
    return {"field": str(export_grid(psi, grid, out / "psi.psgr", _field_meta(res, "psi")))}


def run_analytic_finite(res, out, results):
    k, beta = _wave(res)
    b, num = res["barrier"], res["numerics"]
    est = analytic.FiniteBarrierScatterer(k=k, beta=beta, eta0=b["eta0"], xi0=b["xi0"],
                                          gamma0=b["gamma0"], n_terms=num["n_terms"],
                                          quad_tol=num["quad_tol"]).fit()
    results.update({"n_terms": est.system_.n_terms, "condition": est.system_.condition,
                    "quad_panels": est.system_.quad_panels})
    grid = _grid(res)
    psi = est.predict(grid.points())
    return {"field": str(export_grid(psi, grid, out / "psi.psgr", _field_meta(res, "psi")))}


def run_bwm_barrier(res, out, results):
    return _solve_bwm(_barrier_wall(res), res, out, results)


def run_bwm_billiard(res, out, results):
    spec = BilliardSpec(**res["billiard"])
    boundary = spectrum.billiard_boundary(spec, res["numerics"]["n_points"], res["numerics"]["gamma"])
    return _solve_bwm(boundary, res, out, results)


def _scan(res):
    s, num = res["spectrum"], res["numerics"]
    spec = BilliardSpec(**res["billiard"])
    return spec, spectrum.scan(spec, s["k_min"], s["k_max"], s["samples"], num["n_points"],
                               num["gamma"], s["spacing"], num["threads"], num["diagonal"])


def run_spectrum(res, out, results):
    _, sc = _scan(res)
    peaks = spectrum.find_peaks(sc, res["spectrum"]["prominence_frac"])
    results.update({"peaks_k": peaks.tolist(), "peaks_k2": (peaks**2).tolist(),
                    "failed_samples": {str(k): v for k, v in sc.errors.items()}})
    return {"spectrum": str(export_spectrum(sc, out / "spectrum.csv"))}


def run_refine(res, out, results):
    spec, sc = _scan(res)
    s, num = res["spectrum"], res["numerics"]
    seeds = list(spectrum.find_peaks(sc, s["prominence_frac"])) + list(s["seeds"])
    dk = s["delta_k"] or float(np.max(np.diff(sc.k_values)))
    boundary = spectrum.billiard_boundary(spec, num["n_points"], num["gamma"])
    found = [spectrum.refine_peak(spec, k0, dk, s["epsilon"], s["max_iter"], num["n_points"],
                                  num["gamma"], s["refine_samples"], boundary, num["diagonal"])
             for k0 in seeds]
    found = spectrum.dedupe(found, 10 * s["epsilon"])
    results.update({"seeds_k": [float(x) for x in seeds], "n_resonances": len(found)})
    meta = {"billiard": res["billiard"], "n_points": num["n_points"], "gamma": num["gamma"],
            "epsilon": s["epsilon"], "delta_k": dk, "shrink": spectrum.SHRINK,
            "samples_per_window": s["refine_samples"], "max_iter": s["max_iter"]}
    return {"spectrum": str(export_spectrum(sc, out / "spectrum.csv")),
            "resonances": str(export_resonances(found, out / "resonances.json", meta))}


def run_validate(res, out, results):
    """Analytic infinite curvature wall against BWM on a long truncated wall."""
    k, beta = _wave(res)
    b, v, num = res["barrier"], res["validate"], res["numerics"]
    grid = _grid(res)
    pts = grid.points()
    exact = analytic.InfiniteBarrierScatterer(k=k, beta=beta, eta0=b["eta0"], gamma0=b["gamma0"],
                                              max_terms=num["max_terms"]).fit().predict(pts)
    g0 = b["gamma0"]
    gam = IMPENETRABLE if g0 == "inf" else curvature_profile(float(g0), float(b["eta0"]))
    wall = discretize_barrier(v["barrier_xi0"], b["eta0"], v["n_points"], gam)
    approx = bwm.BoundaryWallScatterer(k=k, beta=beta, n_threads=num["threads"],
                                       diagonal=num["diagonal"]).fit(wall).predict(pts)
    diff = np.abs(np.abs(exact) ** 2 - np.abs(approx) ** 2)
    results.update({"max_density_diff": float(diff.max()), "mean_density_diff": float(diff.mean())})
    write_json(out / "validation.json", results)
    return {"analytic": str(export_grid(exact, grid, out / "psi_analytic.psgr", _field_meta(res, "psi"))),
            "bwm": str(export_grid(approx, grid, out / "psi_bwm.psgr", _field_meta(res, "psi"))),
            "report": str(out / "validation.json")}


RUNNERS = {
    "analytic-infinite": run_analytic_infinite,
    "analytic-knife": run_analytic_knife,
    "analytic-finite": run_analytic_finite,
    "bwm-barrier": run_bwm_barrier,
    "bwm-billiard": run_bwm_billiard,
    "spectrum": run_spectrum,
    "refine": run_refine,
    "validate": run_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parascatter",
                                description="Delta-wall scattering by parabolic barriers and billiards.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="JSON scenario file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--grid-nx", type=int, dest="grid_nx")
    p.add_argument("--k", type=float, help="wavenumber")
    p.add_argument("--beta", type=float, help="incidence angle in degrees")
    p.add_argument("--gamma", type=_parse_strength, help="wall strength or inf")
    p.add_argument("--n-points", type=int, dest="n_points")
    p.add_argument("--threads", type=int, help="worker threads (fallback: PARASCATTER_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(mode: str, config_path, out_dir, args) -> dict:
    cfg = load_config(config_path)
    res = resolve(mode, cfg, args)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        outputs = RUNNERS[mode](res, out, results)
    results["elapsed_s"] = time.perf_counter() - t0
    manifest = dict(res)
    manifest["outputs"] = outputs
    manifest["results"] = results
    manifest["warnings"] = [f"{w.category.__name__}: {w.message}" for w in caught]
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    manifest["package"] = {"name": "parascatter", "version": version}
    write_json(out / "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        manifest = run(args.mode, args.config, args.out, args)
    except ConfigError as exc:
        print(f"parascatter: config error\n{exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"parascatter: {exc}", file=sys.stderr)
        return 1
    for w in manifest["warnings"]:
        logger.warning(w)
    print(json.dumps({"mode": manifest["mode"], "outputs": manifest["outputs"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
