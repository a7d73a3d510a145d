"""Command line: ``gibbsids run|list|validate``.

Exit codes: 0 when every certification passes, 2 when any check fails,
1 on configuration or runtime errors (partial outputs are removed).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, ConfigError, load_config
from .io import write_csv

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def list_experiments() -> str:
    lines = []
    for kind, (desc, keys) in EXPERIMENTS.items():
        lines.append(f"{kind}: {desc}")
        lines.append(f"    required: {', '.join(keys)}")
    return "\n".join(lines)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run(config_path, out_dir=None, jobs: int | None = None, seed: int | None = None,
        stream=None) -> int:
    from .experiments import run_experiment

    stream = stream or sys.stdout
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if seed is not None:
        cfg = cfg.with_seed(seed)
    out = Path(out_dir or os.environ.get("GIBBSIDS_OUT") or ".")
    jobs = jobs or os.cpu_count() or 1
    start = _now()
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        result = run_experiment(cfg, jobs)
        stem = f"{cfg.kind}__{cfg.hash}"
        for t in result.tables:
            name = f"{stem}.csv" if t is result.tables[0] else f"{stem}__{t.name}.csv"
            written.append(write_csv(out / name, t.header, t.rows))
        for name, text in result.texts.items():
            p = out / f"{stem}__{name}"
            p.write_text(text, encoding="utf-8", newline="\n")
            written.append(p)
        checks = [c.summary() for c in result.checks]
        summary = out / f"{stem}__summary.txt"
        summary.write_text("\n".join(checks) + "\n", encoding="utf-8", newline="\n")
        written.append(summary)
        manifest = {
            "config_hash": cfg.hash,
            "experiment": cfg.kind,
            "seed": cfg.seed,
            "toolkit_version": __version__,
            "start": start,
            "end": _now(),
            "files": [p.name for p in written],
            "passed": result.passed,
        }
        mpath = out / f"{stem}__manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except Exception as exc:  # noqa: BLE001 - report and clean up any failure
        for p in written:
            p.unlink(missing_ok=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for line in checks:
        print(line, file=stream)
    print(f"outputs: {', '.join(p.name for p in written)} + {mpath.name}", file=stream)
    return EXIT_OK if result.passed else EXIT_FAIL


def validate(config_path, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"ok: {cfg.kind} (hash {cfg.hash})", file=stream)
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="gibbsids", description="Gibbs-driven random Schrodinger toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: $GIBBSIDS_OUT or the current directory)")
    r.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    r.add_argument("--seed", type=int, help="override experiment.seed")
    sub.add_parser("list", help="list experiment kinds")
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("config")
    args = ap.parse_args(argv)
    if args.command == "list":
        print(list_experiments())
        return EXIT_OK
    if args.command == "validate":
        return validate(args.config)
    return run(args.config, args.out, args.jobs, args.seed)


if __name__ == "__main__":
    sys.exit(main())
