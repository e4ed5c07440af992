"""Command line interface.

``python -m ginibre_overlaps run --experiment NAME [options]`` runs one
experiment and writes CSV tables, ``summary.json``, ``manifest.json`` and
figure data (``<name>.dat`` with ``<name>.meta.json``) to ``--out``.
``verify`` runs the oracle suite and ``formulas`` tabulates the closed forms.

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid configuration,
3 numerical backend failure.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import BackendFailure, ConfigInvalid, DecompositionFailed, NonConvergence
from .experiments import EXPERIMENTS, ExperimentResult
from .rand_ensembles import ENSEMBLE_KINDS

log = logging.getLogger("ginibre_overlaps")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3

CONFIG_KEYS = {
    "experiment": str, "n": int, "trials": int, "seed": int, "workers": int, "out": str,
    "ensemble": str, "matrices": int, "z": float, "dt": float, "steps": int, "paths": int, "t": float,
    "radius": float, "eps": float, "omega_min": float, "omega_max": float, "bulk_radius": float,
}

CSV_SCHEMAS = {
    "diag": ["z_re", "z_im", "n", "mean", "stderr"],
    "pair": ["omega_lo", "omega_hi", "n", "reO12", "imO12", "absO12sq", "O11O22"],
    "ks": ["test_name", "n", "distance", "threshold", "pass"],
    "angles": ["omega", "n", "ks", "pass"],
    "paths": ["t", "k", "re", "im", "O_kk"],
}


def parse_config_file(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def coerce_config(raw: dict) -> dict:
    """Validate keys and convert values to their types."""
    cfg = {}
    for key, value in raw.items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigInvalid(f"unknown config key {key!r}")
        typ = CONFIG_KEYS[key]
        try:
            cfg[key] = typ(float(value)) if typ is int and isinstance(value, str) and "e" in value.lower() else typ(value)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"invalid value {value!r} for {key!r}") from exc
    for key in ("trials", "n", "workers", "paths", "steps", "matrices"):
        if key in cfg and cfg[key] < (0 if key == "matrices" else 1):
            raise ConfigInvalid(f"{key!r} must be positive, got {cfg[key]}")
    for key in ("dt", "t", "radius", "eps"):
        if key in cfg and not cfg[key] > 0:
            raise ConfigInvalid(f"{key!r} must be positive, got {cfg[key]}")
    if "ensemble" in cfg and cfg["ensemble"] not in ENSEMBLE_KINDS:
        raise ConfigInvalid(f"unknown ensemble {cfg['ensemble']!r}")
    if "seed" in cfg and cfg["seed"] < 0:
        raise ConfigInvalid("'seed' must be non-negative")
    return cfg


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_outputs(result: ExperimentResult, out: Path, config: dict, wall: float, seed: Optional[int]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in result.tables.items():
        fields = CSV_SCHEMAS.get(name) or list(dict.fromkeys(k for r in rows for k in r))
        with open(out / f"{name}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, restval="")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: r.get(k, "") for k in fields})
    for name, (data, meta) in result.figures.items():
        cols = meta.get("columns", [])
        np.savetxt(out / f"{name}.dat", data, header=" ".join(cols))
        (out / f"{name}.meta.json").write_text(json.dumps(_jsonable(meta), indent=2))
    summary = {"experiment": result.name, "passed": result.passed,
               "checks": [{"name": c.name, "value": c.value, "threshold": c.threshold, "pass": c.passed}
                          for c in result.checks],
               "results": result.summary}
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2))
    manifest = {"experiment": result.name, "version": __version__, "config": config, "seed": seed,
                "wall_time_s": wall, "worker_trial_ranges": result.trial_ranges, "rejections": result.rejections}
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ginibre-overlaps", description="Eigenvector overlap experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run one experiment"), ("verify", "run the oracle suite"),
                            ("formulas", "tabulate closed-form expectations")):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--experiment", choices=sorted(EXPERIMENTS), default=None)
        s.add_argument("--config", default=None, help="flat key = value file; flags override it")
        s.add_argument("--n", type=int, default=None, help="matrix size")
        s.add_argument("--trials", type=int, default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--workers", type=int, default=None)
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> dict:
    raw = parse_config_file(args.config) if args.config else {}
    for key in ("experiment", "n", "trials", "seed", "workers", "out"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    cfg = coerce_config(raw)
    if args.command == "verify":
        cfg["experiment"] = "verify"
    elif args.command == "formulas":
        cfg["experiment"] = "formulas"
    if "experiment" not in cfg:
        raise ConfigInvalid("no experiment given (use --experiment or an 'experiment' config key)")
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigInvalid(f"unknown experiment {cfg['experiment']!r}")
    return cfg


def run_from_config(cfg: dict) -> ExperimentResult:
    fn = EXPERIMENTS[cfg["experiment"]]
    accepted = inspect.signature(fn).parameters
    kwargs = {k: v for k, v in cfg.items() if k in accepted}
    return fn(**kwargs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if "seed" not in cfg:
        cfg["seed"] = int(np.random.SeedSequence().entropy % (1 << 63))
        log.info("no seed given, drew root seed %d from entropy", cfg["seed"])
    start = time.perf_counter()
    try:
        result = run_from_config(cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendFailure, NonConvergence, DecompositionFailed, np.linalg.LinAlgError) as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    wall = time.perf_counter() - start
    for c in result.checks:
        print(c.line())
    if cfg.get("out"):
        write_outputs(result, Path(cfg["out"]), cfg, wall, cfg.get("seed"))
    return EXIT_OK if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
