"""``distill`` command line front end.

    distill <experiment> [--key value ...] [--config path] [--out dir] [--seed u64] [--threads n]

Writes ``<out>/<experiment>.csv`` plus a ``<experiment>.meta.json`` sidecar
and prints a short summary. Exit codes: 0 success, 1 a sanity check
failed, 2 usage error, 3 numerical failure. Errors go to stderr as a single
``error code=<CODE> message=...`` line.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
from pathlib import Path

from . import __version__
from .errors import DistillError, InvalidParameterError, NotMixingError, NumericalFailure
from .experiments import EXPERIMENTS, settings_for

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

# settings whose values are ints; the rest are floats except the ones listed as str
_INT_KEYS = {"n", "N", "n_max", "n_traj", "seed", "threads", "order"}
_STR_KEYS = {"variant"}
TOLERANCES = {"unitarity": 1e-12, "trace_preservation": 1e-12, "choi_min": -1e-10,
              "fixed_point_residual": 1e-10, "mixing": 1e-9, "quadrature_refine": 1e-11}


class UsageError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("USAGE", message)


def _fail(code: str, message: str, status: int) -> int:
    print(f"error code={code} message={json.dumps(message)}", file=sys.stderr)
    return status


def _convert(key: str, raw):
    if raw is None or (isinstance(raw, str) and raw.lower() == "none"):
        return None
    if key in _STR_KEYS:
        return str(raw)
    try:
        if key in _INT_KEYS or key.endswith("_count"):
            return int(raw)
        return float(raw)
    except ValueError:
        raise UsageError("BAD_VALUE", f"{key} = {raw!r} is not a number") from None


def read_config(path: Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError("CONFIG_UNREADABLE", f"{path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("CONFIG_SYNTAX", f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_settings(experiment: str, config: dict, flags: dict) -> dict:
    settings = settings_for(experiment)
    for source in (config, flags):
        for key, raw in source.items():
            if key not in settings:
                raise UsageError("UNKNOWN_KEY", f"{key!r} is not a setting of {experiment}")
            settings[key] = _convert(key, raw)
    for key in settings:
        if key.endswith("_count") and settings[key] < 1:
            raise UsageError("INVALID_GRID", f"{key} must be >= 1")
        if key.endswith("_start"):
            axis = key[:-6]
            start, stop = settings[key], settings[f"{axis}_stop"]
            if not (math.isfinite(start) and math.isfinite(stop)) or stop < start:
                raise UsageError("INVALID_GRID", f"{axis} grid [{start}, {stop}] is empty")
    if settings["threads"] < 1:
        raise UsageError("BAD_VALUE", "threads must be >= 1")
    if not 0 <= settings["seed"] < 2**64:
        raise UsageError("BAD_VALUE", "seed must be an unsigned 64-bit integer")
    return settings


def _git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _fmt(x) -> str:
    if isinstance(x, (int, bool)) and not isinstance(x, float):
        return str(int(x))
    return format(float(x), ".15g")


def write_outputs(out_dir: Path, experiment: str, result, settings: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{experiment}.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([_fmt(v) for v in row])
    meta = {
        "experiment": experiment,
        "version": __version__,
        "git_revision": _git_revision(),
        "units": "momenta and couplings in units of pi",
        "settings": settings,
        "tolerances": TOLERANCES,
        "checks": {c.name: {"passed": bool(c.passed), "detail": c.detail} for c in result.checks},
    }
    (out_dir / f"{experiment}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path


def build_parser(experiment: str | None = None) -> argparse.ArgumentParser:
    parser = _Parser(prog="distill", description="Repeated-scattering singlet preparation experiments.")
    parser.add_argument("experiment", help=", ".join(EXPERIMENTS))
    parser.add_argument("--config", type=Path, help="flat key = value settings file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    if experiment in EXPERIMENTS:
        for key in settings_for(experiment):
            parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        head = _Parser(add_help=False)
        head.add_argument("experiment", nargs="?")
        known, _ = head.parse_known_args(argv)
        experiment = known.experiment
        if experiment is not None and experiment not in EXPERIMENTS and experiment not in ("-h", "--help"):
            raise UsageError("UNKNOWN_EXPERIMENT", f"unknown experiment {experiment!r}; "
                             f"choose from {', '.join(EXPERIMENTS)}")
        args = build_parser(experiment).parse_args(argv)
        flags = {k: v for k, v in vars(args).items()
                 if k not in ("experiment", "config", "out") and v is not None}
        config = read_config(args.config) if args.config else {}
        settings = resolve_settings(experiment, config, flags)
    except UsageError as exc:
        return _fail(exc.code, str(exc), EXIT_USAGE)

    try:
        result = EXPERIMENTS[experiment](settings)
    except (NumericalFailure, NotMixingError, ArithmeticError) as exc:
        return _fail("NUMERICAL", str(exc), EXIT_NUMERICAL)
    except (InvalidParameterError, DistillError, ValueError) as exc:
        return _fail("BAD_PARAMETER", str(exc), EXIT_USAGE)

    try:
        path = write_outputs(args.out, experiment, result, settings)
    except OSError as exc:
        return _fail("UNWRITABLE_OUTPUT", f"{args.out}: {exc.strerror}", EXIT_USAGE)

    print(f"{experiment}: {len(result.rows)} rows -> {path}")
    for j, name in enumerate(result.header):
        col = [r[j] for r in result.rows]
        finite = [float(v) for v in col if not math.isnan(float(v))]
        if finite:
            print(f"  {name:>22s}  min {min(finite):.6g}  max {max(finite):.6g}")
    for c in result.checks:
        print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in result.checks) else EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
