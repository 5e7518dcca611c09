"""Experiment runner: validate a JSON config, dispatch a solver, emit artifacts.

Exit codes: 0 success, 2 config/schema violation, 3 solver failure, 4 I/O
error.  Reruns with the same config produce byte-identical CSV payload rows
regardless of ``--threads``.
"""

import argparse
import datetime
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import jsonschema

from . import analysis, bogoliubov_k, bogoliubov_real, dtwa, ed, io_schema
from .lattice import LatticeSpec, build_bilayer, sample_filling
from .couplings import ModelParams, coupling_matrices

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lattice", "params", "run", "output"],
    "properties": {
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L", "a_Z"],
            "properties": {
                "L": {"type": "integer", "minimum": 2},
                "a_Z": {"type": "number", "exclusiveMinimum": 0},
                "boundary": {"enum": ["periodic", "open"]},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta0": {"type": "number"},
                "eta": {"type": "number"},
                "J": {"type": "number", "exclusiveMinimum": 0},
                "bias_x": {"type": "number"},
                "bias_h": {"type": "number"},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "required": ["solver"],
            "properties": {
                "solver": {"enum": ["bogoliubov-k", "bdg-real", "dtwa", "ed", "compare"]},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "n_t": {"type": "integer", "minimum": 2},
                "n_traj": {"type": "integer", "minimum": 1},
                "n_realizations": {"type": "integer", "minimum": 1},
                "f": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "seed": {"type": "integer"},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "minimum": 0},
                "rel_tol": {"type": "number", "minimum": 0, "maximum": 1},
                "correlations": {"type": "boolean"},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "required": ["param", "values"],
            "properties": {
                "param": {"enum": ["theta0", "bias_x", "bias_h", "eta"]},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dir"],
            "properties": {"dir": {"type": "string"}},
        },
    },
}

_SOLVER_NEEDS = {
    "bogoliubov-k": [],
    "bdg-real": ["t_max", "n_realizations", "seed"],
    "dtwa": ["t_max", "n_t", "n_traj", "seed"],
    "ed": ["t_max", "n_t"],
    "compare": ["t_max", "n_t", "n_traj", "seed"],
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    p = config.get("params", {})
    if "bias_x" in p and "bias_h" in p:
        raise ConfigError("params.bias_x and params.bias_h are mutually exclusive")
    run = config["run"]
    missing = [k for k in _SOLVER_NEEDS[run["solver"]] if k not in run]
    if missing:
        raise ConfigError(f"solver {run['solver']!r} requires run keys {missing}")
    return config


def _model(config) -> ModelParams:
    p = config.get("params", {})
    return ModelParams(
        theta0=p.get("theta0", 0.0), eta=p.get("eta", 0.0), J=p.get("J", 1.0),
        bias_h=p.get("bias_h"), bias_x=p.get("bias_x"),
    )


def _spec(config) -> LatticeSpec:
    lat = config["lattice"]
    return LatticeSpec(L=lat["L"], a_Z=lat["a_Z"], boundary=lat.get("boundary", "periodic"))


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        return out.stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        return None


def _report_json(report) -> dict:
    return {
        "gamma": report.gamma,
        "k_star": [[float(kx), float(ky)] for kx, ky in report.k_star],
        "topology": report.topology,
        "component_count": report.component_count,
    }


def _emit_bogoliubov_k(config, outdir, threads):
    spec, params = _spec(config), _model(config)
    run = config["run"]
    field = bogoliubov_k.dispersion_field(spec, params)
    report = bogoliubov_k.instability_report(
        field, tol=run.get("tol", 1e-9), rel_tol=run.get("rel_tol", 0.0)
    )
    rows = [
        (k[0], k[1], field.eps[i], field.omega[i].real, field.omega[i].imag,
         field.eps_tilde[i], field.xi[i].real, field.xi[i].imag)
        for i, k in enumerate(field.kgrid.momenta)
    ]
    io_schema.write_csv(outdir / "dispersion.csv", "dispersion", rows)
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(_report_json(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["dispersion.csv", "report.json"]


def _emit_bdg_real(config, outdir, threads):
    spec, params = _spec(config), _model(config)
    run = config["run"]
    mean, stderr = bogoliubov_real.disorder_average(
        spec, params, run.get("f", 1.0), run["t_max"],
        run["n_realizations"], run["seed"],
    )
    kg = bogoliubov_k.k_grid(spec)
    rows = [(k[0], k[1], mean[i], stderr[i]) for i, k in enumerate(kg.momenta)]
    io_schema.write_csv(outdir / "nk_avg.csv", "nk_avg", rows)
    return ["nk_avg.csv"]


def _series_rows(times, kgrid, nk_a, nk_b, se_a, se_b):
    rows = []
    for it, t in enumerate(times):
        for layer, nk, se in (("A", nk_a, se_a), ("B", nk_b, se_b)):
            for i, k in enumerate(kgrid.momenta):
                rows.append((t, k[0], k[1], layer, nk[it, i], se[it, i]))
    return rows


def _emit_series(series, outdir):
    artifacts = []
    rows = _series_rows(series.times, series.kgrid, series.nk_a, series.nk_b,
                        series.nk_a_stderr, series.nk_b_stderr)
    io_schema.write_csv(outdir / "nk_t.csv", "nk_t", rows)
    artifacts.append("nk_t.csv")
    rows = [(t, series.npair[i], series.npair_stderr[i]) for i, t in enumerate(series.times)]
    io_schema.write_csv(outdir / "npair_t.csv", "npair_t", rows)
    artifacts.append("npair_t.csv")
    if series.cpm_a is not None:
        rows = []
        for it, t in enumerate(series.times):
            for layer, c in (("A", series.cpm_a), ("B", series.cpm_b)):
                for j, (dx, dy) in enumerate(series.cpm_displacements):
                    rows.append((t, dx, dy, layer, c[it, j].real, c[it, j].imag))
        io_schema.write_csv(outdir / "cpm_t.csv", "cpm_t", rows)
        artifacts.append("cpm_t.csv")
    return artifacts


def _run_dtwa_series(config, threads):
    spec, params = _spec(config), _model(config)
    run = config["run"]
    geom = build_bilayer(spec)
    fill = sample_filling(geom, run.get("f", 1.0), run["seed"])
    coup = coupling_matrices(geom, fill, params)
    t_grid = np.linspace(0.0, run["t_max"], run["n_t"])
    return dtwa.run_experiment(
        geom, fill, params, coup, t_grid, run["n_traj"], run["seed"],
        rtol=run.get("rtol", 1e-9), threads=threads,
        correlations=run.get("correlations", False),
    )


def _emit_dtwa(config, outdir, threads):
    series = _run_dtwa_series(config, threads)
    artifacts = _emit_series(series, outdir)
    extra = {"t10": series.t10, "n_traj": series.n_traj, "n_occ": series.n_occ}
    with open(outdir / "series.json", "w", encoding="utf-8") as fh:
        json.dump(extra, fh, indent=2, sort_keys=True)
        fh.write("\n")
    artifacts.append("series.json")
    return artifacts


def _emit_ed(config, outdir, threads):
    spec, params = _spec(config), _model(config)
    run = config["run"]
    geom = build_bilayer(spec)
    fill = sample_filling(geom, run.get("f", 1.0), run.get("seed", 0))
    system = ed.EdSystem(geom, fill, params)
    t_grid = np.linspace(0.0, run["t_max"], run["n_t"])
    n_k = spec.n_sites
    nk_a = np.empty((len(t_grid), n_k))
    nk_b = np.empty_like(nk_a)
    npair = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        state = system.evolve(t)
        nk_a[i], nk_b[i] = system.structure_factor(state)
        ca, cb = system.excitation_counts(state)
        npair[i] = 0.5 * (ca + cb)
    zeros = np.zeros_like(nk_a)
    kg = bogoliubov_k.k_grid(spec)
    io_schema.write_csv(outdir / "nk_t.csv", "nk_t",
                        _series_rows(t_grid, kg, nk_a, nk_b, zeros, zeros))
    io_schema.write_csv(outdir / "npair_t.csv", "npair_t",
                        [(t, npair[i], 0.0) for i, t in enumerate(t_grid)])
    return ["nk_t.csv", "npair_t.csv"]


def _emit_compare(config, outdir, threads):
    spec, params = _spec(config), _model(config)
    run = config["run"]
    series = _run_dtwa_series(config, threads)
    artifacts = _emit_series(series, outdir)
    field = bogoliubov_k.dispersion_field(spec, params)
    nk_bogo = np.stack([bogoliubov_k.mode_population(field, t) for t in series.times])
    ref = {"times": series.times, "nk": nk_bogo, "npair": nk_bogo.mean(axis=1) * spec.n_sites}
    cand = {"times": series.times, "nk": 0.5 * (series.nk_a + series.nk_b),
            "npair": series.npair}
    result = analysis.compare_solvers(ref, cand, n_sites=spec.n_sites)
    payload = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in result.items()}
    payload["t10"] = series.t10
    with open(outdir / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    artifacts.append("comparison.json")
    return artifacts


_EMITTERS = {
    "bogoliubov-k": _emit_bogoliubov_k,
    "bdg-real": _emit_bdg_real,
    "dtwa": _emit_dtwa,
    "ed": _emit_ed,
    "compare": _emit_compare,
}


def _write_manifest(outdir, config, threads, wall, artifacts):
    io_schema.write_manifest(outdir / "manifest.json", {
        "schema_version": io_schema.SCHEMA_VERSION,
        "solver": config["run"]["solver"],
        "config": config,
        "seed": config["run"].get("seed"),
        "threads": threads,
        "wall_time_s": wall,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "git_describe": _git_describe(),
        "artifacts": artifacts,
    })


def cmd_run(config, outdir, threads):
    emit = _EMITTERS[config["run"]["solver"]]
    start = time.monotonic()
    artifacts = emit(config, outdir, threads)
    _write_manifest(outdir, config, threads, time.monotonic() - start, artifacts)
    return 0


def cmd_scan(config, outdir, threads):
    if "scan" not in config:
        raise ConfigError("scan command requires a 'scan' section in the config")
    if config["run"]["solver"] != "bogoliubov-k":
        raise ConfigError("scan is supported for the bogoliubov-k solver")
    spec, params = _spec(config), _model(config)
    run = config["run"]
    start = time.monotonic()
    results = bogoliubov_k.scan(
        spec, params, config["scan"]["param"], config["scan"]["values"],
        tol=run.get("tol", 1e-9), rel_tol=run.get("rel_tol", 0.0),
    )
    artifacts = []
    rows = []
    for i, (value, report) in enumerate(results):
        sub = outdir / f"point_{i:03d}"
        sub.mkdir(exist_ok=True)
        with open(sub / "report.json", "w", encoding="utf-8") as fh:
            json.dump(_report_json(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        artifacts.append(f"point_{i:03d}/report.json")
        rows.append((value, report.gamma,
                     json.dumps([[float(a), float(b)] for a, b in report.k_star]),
                     report.topology))
    io_schema.write_csv(outdir / "summary.csv", "summary", rows)
    artifacts.append("summary.csv")
    _write_manifest(outdir, config, threads, time.monotonic() - start, artifacts)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pairgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "scan"):
        p = sub.add_parser(name)
        p.add_argument("config", type=Path)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=None)
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("PAIRGEN_THREADS", "1"))
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["run"]["seed"] = args.seed
        if args.out is not None:
            config["output"]["dir"] = str(args.out)
    except ConfigError as exc:
        print(f"pairgen: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        outdir = Path(config["output"]["dir"])
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"pairgen: io error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.command == "run":
            return cmd_run(config, outdir, threads)
        return cmd_scan(config, outdir, threads)
    except ConfigError as exc:
        print(f"pairgen: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"pairgen: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # solver-level failure
        print(f"pairgen: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
