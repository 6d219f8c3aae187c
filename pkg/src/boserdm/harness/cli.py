"""Command line entry point: ``boserdm run|validate|selftest``.

Failures print one line ``boserdm: error code=<exit> kind=<Type>: <reason>``
to stderr; exit codes are 2 for invalid input, 3 for a sector beyond the
dimension cap and 4 for numerical failure.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

from ..errors import BoserdmError
from ..fock_sector import MAX_DIM_ENV
from .config import load_config
from .runner import run_scenario, validate_scenario


def _fail(exc: BoserdmError) -> int:
    reason = str(exc).replace("\n", " ")
    print(f"boserdm: error code={exc.exit_code} kind={type(exc).__name__}: {reason}", file=sys.stderr)
    return exc.exit_code


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    manifest = run_scenario(cfg)
    out = cfg.path(cfg.output_dir)
    for eng, info in manifest["engines"].items():
        print(f"{eng}: {out / info['csv']} ({info['rows']} rows)")
    print(f"manifest: {out / (cfg.prefix + '_manifest.json')}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate_scenario(cfg)
    dims = " ".join(f"dim(d={cfg.d},N={k})={v}" for k, v in report["sector_dimensions"].items())
    for w in report["warnings"]:
        print(f"warning: {w}")
    print(f"OK {dims}")
    return 0


def _find_acceptance(explicit) -> Path | None:
    candidates = [Path(explicit)] if explicit else [
        Path.cwd() / "tests" / "test_acceptance.py",
        Path(__file__).resolve().parents[3] / "tests" / "test_acceptance.py",
    ]
    return next((p for p in candidates if p.exists()), None)


def cmd_selftest(args) -> int:
    path = _find_acceptance(args.suite)
    if path is None:
        print("boserdm: error code=2 kind=ConfigError: acceptance suite tests/test_acceptance.py not found", file=sys.stderr)
        return 2
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-s", str(path)])
    return 0 if proc.returncode == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="boserdm",
        description="Reduced-density-matrix dynamics of identical bosons.",
        epilog=f"Set {MAX_DIM_ENV} to override the sector dimension cap.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the engines of a scenario and write CSV + manifest")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("--suite", default=None, help="path to test_acceptance.py")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BoserdmError as exc:
        return _fail(exc)
    except MemoryError as exc:
        print(f"boserdm: error code=3 kind=MemoryError: dense sector arrays do not fit in memory ({exc})", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"boserdm: error code=2 kind=ConfigError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
