"""Experiment driver: one flat JSON config in, deterministic CSV/JSON out.

Commands
--------
bound          Gaussian-approximation report for a kernel file.
gamma          Gamma-approximation report for a kernel file.
breuer-major   Exact Kolmogorov-bound table over a list of grid sizes n.
chi2-example   Quadratic-functional example: kernel M[k,l] = a(k-l)/n with
               a(r) = 1 + 2^{-|r|} for r != 0, swept over n, reported
               through the Gamma bound at nu = 1 (target N^2 - 1).
pearson        Sampled density/tau grid and the log-derivative coefficients
               for a quadratic-tau spec.
simulate       Monte Carlo Z_n batch, empirical Kolmogorov distance against
               the standard normal, and the exact bound next to it.

Every run writes one CSV data file (fixed column order, floats at 17
significant digits, byte-identical across reruns of the same config) plus a
manifest JSON echoing the config, versions and timings.  Exit codes: 0 ok,
2 config parse error, 3 precondition violation, 4 file I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from . import __version__
from .bounds import (
    BoundError,
    BoundReport,
    gamma_bound_single,
    gauss_bound_single,
)
from .breuer_major import BmInstance, BreuerMajorError, bm_bound_exact, bm_table
from .chaos import ChaosError
from .pearson import PearsonError, PearsonSpec, density_from_tau, pearson_classify
from .simulate import SimulationError, empirical_kolmogorov, sample_Zn
from .tensors import GramSpace, SymKernel, TensorError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_IO = 4

_PRECONDITION_ERRORS = (
    TensorError,
    ChaosError,
    BoundError,
    BreuerMajorError,
    PearsonError,
    SimulationError,
)


class ConfigError(Exception):
    """Malformed or incomplete run configuration."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _load_kernel(path: Path) -> SymKernel:
    obj = json.loads(path.read_text())
    return SymKernel.from_json_obj(obj)


def _require(params: dict, key: str):
    if key not in params:
        raise ConfigError(f"missing parameter {key!r}")
    return params[key]


def _report_rows(report: BoundReport, prefix: list) -> tuple[list[str], list[list]]:
    header = ["metric", "variance_term", "squared_total", "bound"]
    row = prefix + [
        report.metric,
        report.variance_term,
        report.squared_total,
        report.bound,
    ]
    return header, [row]


def _cmd_bound(params: dict, out_dir: Path) -> dict:
    kernel = _load_kernel(Path(_require(params, "kernel")))
    metric = params.get("metric", "kolmogorov")
    report = gauss_bound_single(kernel, metric)
    header, rows = _report_rows(report, [])
    _write_csv(out_dir / "bound.csv", header, rows)
    return {"files": ["bound.csv"], "report": report.to_json_obj()}


def _cmd_gamma(params: dict, out_dir: Path) -> dict:
    kernel = _load_kernel(Path(_require(params, "kernel")))
    nu = float(_require(params, "nu"))
    metric = params.get("metric", "h2")
    report = gamma_bound_single(kernel, nu, metric)
    header, rows = _report_rows(report, [])
    _write_csv(out_dir / "gamma.csv", header, rows)
    return {"files": ["gamma.csv"], "report": report.to_json_obj()}


def _cmd_breuer_major(params: dict, out_dir: Path) -> dict:
    H = float(_require(params, "H"))
    q = int(_require(params, "q"))
    ns = [int(n) for n in _require(params, "ns")]
    for n in ns:
        BmInstance(H, q, n)  # validate every row before computing anything
    rows_dicts = bm_table(H, q, ns)
    header = [
        "H", "q", "n", "variance_term", "squared_total", "kol_bound", "rate_exponent",
    ]
    rows = [[r[c] for c in header] for r in rows_dicts]
    _write_csv(out_dir / "breuer_major.csv", header, rows)
    return {"files": ["breuer_major.csv"], "rows": len(rows)}


def _chi2_sequence(r: np.ndarray) -> np.ndarray:
    out = 1.0 + np.power(2.0, -np.abs(r, dtype=float))
    out[r == 0] = 1.0
    return out


def _cmd_chi2_example(params: dict, out_dir: Path) -> dict:
    ns = [int(n) for n in params.get("ns", [16, 32, 64, 128, 256, 512])]
    if any(n < 1 for n in ns):
        raise ConfigError("all n must be >= 1")
    metric = params.get("metric", "h1")
    header = ["n", "variance_term", "squared_total", "bound"]
    rows = []
    bounds = []
    for n in ns:
        offsets = np.arange(n)[:, None] - np.arange(n)[None, :]
        matrix = _chi2_sequence(offsets) / n
        kernel = SymKernel.from_dense(GramSpace.standard(n), matrix)
        report = gamma_bound_single(kernel, 1.0, metric)
        rows.append([n, report.variance_term, report.squared_total, report.bound])
        bounds.append(report.bound)
    slope = None
    if len(ns) >= 2:
        slope = float(
            np.polyfit(np.log(np.array(ns, dtype=float)), np.log(bounds), 1)[0]
        )
    _write_csv(out_dir / "chi2_example.csv", header, rows)
    return {"files": ["chi2_example.csv"], "slope": slope}


def _cmd_pearson(params: dict, out_dir: Path) -> dict:
    spec = PearsonSpec.from_json_obj(
        {k: _require(params, k) for k in ("alpha", "beta", "gamma", "a", "b")}
    )
    grid_size = int(params.get("grid", 401))
    density = density_from_tau(spec)
    lo, hi = density.effective_range()
    span = hi - lo
    xs = np.linspace(lo + 1e-4 * span, hi - 1e-4 * span, grid_size)
    header = ["x", "pdf", "tau"]
    rows = [[float(x), float(density.pdf(x)), float(spec.tau(x))] for x in xs]
    _write_csv(out_dir / "pearson.csv", header, rows)
    ode = pearson_classify(spec)
    return {
        "files": ["pearson.csv"],
        "normalization": density.normalization,
        "moments": [density.moment(k) for k in range(5)],
        "ode_derived": list(ode.derived),
        "ode_printed": list(ode.printed),
    }


def _cmd_simulate(params: dict, out_dir: Path) -> dict:
    H = float(_require(params, "H"))
    q = int(_require(params, "q"))
    n = int(_require(params, "n"))
    count = int(params.get("count", 100_000))
    seed = int(params.get("seed", 0))
    inst = BmInstance(H, q, n)
    batch = sample_Zn(H, q, n, count, seed)
    report = bm_bound_exact(inst)
    ks = empirical_kolmogorov(batch.values, ndtr)
    header = [
        "H", "q", "n", "count", "seed",
        "sample_mean", "sample_var", "ks_vs_normal", "kol_bound",
    ]
    row = [
        H, q, n, count, seed,
        float(np.mean(batch.values)),
        float(np.var(batch.values)),
        ks,
        report.bound,
    ]
    _write_csv(out_dir / "simulate.csv", header, [row])
    files = ["simulate.csv"]
    if params.get("dump_samples"):
        sample_path = out_dir / "samples.csv"
        lines = ["# " + json.dumps(batch.meta, sort_keys=True), "value"]
        lines.extend(_fmt(float(v)) for v in batch.values)
        sample_path.write_text("\n".join(lines) + "\n")
        files.append("samples.csv")
    return {"files": files, "ks": ks, "bound": report.bound}


_COMMANDS = {
    "bound": _cmd_bound,
    "gamma": _cmd_gamma,
    "breuer-major": _cmd_breuer_major,
    "chi2-example": _cmd_chi2_example,
    "pearson": _cmd_pearson,
    "simulate": _cmd_simulate,
}


def run(config: dict, out_dir: Path, seed_override: int | None = None,
        threads: int | None = None) -> dict:
    """Execute one validated config; returns the manifest dictionary."""
    if not isinstance(config, dict) or "command" not in config:
        raise ConfigError("config must be an object with a 'command' field")
    command = config["command"]
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    params = dict(config.get("parameters", {}))
    if seed_override is not None:
        params["seed"] = int(seed_override)
    started = time.time()
    result = _COMMANDS[command](params, out_dir)
    manifest = {
        "command": command,
        "config": {"command": command, "parameters": params},
        "version": __version__,
        "threads": threads,
        "elapsed_seconds": time.time() - started,
        "result": result,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=float))
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="steinchaos",
        description="Chaos distance bounds and Monte Carlo experiments",
    )
    parser.add_argument("--config", required=True, help="path to the run config JSON")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--threads", type=int, default=None,
        help="advisory worker count; results never depend on it",
    )
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        manifest = run(config, out_dir, seed_override=args.seed, threads=args.threads)
    except ConfigError as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _PRECONDITION_ERRORS as exc:
        print(f"error: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"command": manifest["command"], "result": manifest["result"]},
                     default=float))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
