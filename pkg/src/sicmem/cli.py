"""Command-line entry point.

    sicmem <experiment> [--config FILE] [--seed S] [--workers W] [--out DIR] [--set key=value ...]
    sicmem validate --config FILE

Exit status: 0 on success, 2 for an invalid configuration, 1 when the
computation fails. Errors are printed to stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .config import EXPERIMENTS, build_config, diagnostics, load_raw, parse_overrides, validate_file
from .experiments import RUNNERS

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sicmem", description="Divacancy nuclear-memory simulations.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate",):
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON run configuration")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. --set census.F_min=0.95")
        if name != "validate":
            s.add_argument("--seed", type=int)
            s.add_argument("--workers", type=int)
            s.add_argument("--out", help="output directory")
    return p


def _error(kind: str, message: str, details=None, out_dir: Path | None = None) -> None:
    record = {"error": kind, "message": message, "details": details or []}
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(text + "\n")
        except OSError:
            pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_artifacts(out_dir: Path, artifacts: dict[str, str], cfg, wall: float) -> Path:
    """Write every artifact, then the manifest listing their digests."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name in sorted(artifacts):
        data = artifacts[name].encode()
        path = out_dir / name
        if path.resolve().parent != out_dir.resolve():
            raise ValueError(f"artifact {name!r} would escape the output directory")
        path.write_bytes(data)
        files.append({"path": name, "sha256": _sha256(data), "bytes": len(data)})
    manifest = {"config": cfg.model_dump(mode="json", by_alias=True), "code_version": __version__, "seed": cfg.seed,
                "wall_time_s": wall, "outputs": files}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run(command: str, config_path=None, overrides=(), seed=None, workers=None, out=None) -> int:
    cli_over = parse_overrides(overrides)
    for key, val in (("seed", seed), ("workers", workers), ("output", out)):
        if val is not None:
            cli_over[key] = val
    out_dir = Path(out) if out is not None else None
    try:
        raw = load_raw(config_path)
        cfg = build_config(raw, cli_over)
    except ValidationError as exc:
        _error("invalid_config", "configuration failed validation", diagnostics(exc), out_dir)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        _error("invalid_config", str(exc), None, out_dir)
        return EXIT_CONFIG
    if cfg.experiment is not None and cfg.experiment != command:
        _error("invalid_config", f"config is for experiment {cfg.experiment!r}, not {command!r}",
               [{"field": "experiment", "message": "does not match the subcommand"}], out_dir)
        return EXIT_CONFIG
    out_dir = Path(cfg.output)
    start = time.perf_counter()
    try:
        artifacts = RUNNERS[command](cfg)
    except Exception as exc:  # noqa: BLE001 - reported as a record, not a traceback
        _error("compute_failure", f"{type(exc).__name__}: {exc}", None, out_dir)
        return EXIT_COMPUTE
    write_artifacts(out_dir, artifacts, cfg, time.perf_counter() - start)
    print(json.dumps({"status": "ok", "output": str(out_dir), "files": sorted(artifacts)}))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        diags = validate_file(args.config, args.overrides)
        print(json.dumps({"diagnostics": diags}, indent=2))
        return EXIT_OK if not diags else EXIT_CONFIG
    return run(args.command, args.config, args.overrides, args.seed, args.workers, args.out)


if __name__ == "__main__":
    sys.exit(main())
