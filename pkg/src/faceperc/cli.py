"""Command line entry point: ``faceperc <kind> --config PATH --out DIR``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .runner import KINDS, ConfigError, ExperimentConfig, emit_plotdata, error_document, load_summaries, run


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faceperc", description="Face-percolation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", *KINDS):
        sp = sub.add_parser(name, help="run the config" if name == "run" else f"run a config of kind {name}")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, help="worker processes (default: $FACEPERC_WORKERS or 1)")
        sp.add_argument("--seed", type=int, help="root seed (overrides the config)")
        sp.add_argument("--resume", action="store_true", help="skip cells already written")
    pd = sub.add_parser("plotdata", help="emit a long-format TSV from a finished run")
    pd.add_argument("--out", required=True, help="run output directory")
    pd.add_argument("--file", help="TSV path (default: OUT/plotdata.tsv)")
    va = sub.add_parser("validate", help="check a config and print its normalized form")
    va.add_argument("--config", required=True)
    return ap


def _load(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return ExperimentConfig.from_json(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            sys.stdout.write(_load(args.config).to_json())
            return 0
        if args.command == "plotdata":
            target = args.file or str(Path(args.out) / "plotdata.tsv")
            emit_plotdata(load_summaries(args.out), target)
            print(json.dumps({"status": "ok", "plotdata": target}))
            return 0
        cfg = _load(args.config)
        if args.command != "run" and cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.validate()
        out = args.out or cfg.out
        if out is None:
            raise ConfigError("no output directory: pass --out or set 'out'")
        res = run(cfg, out, args.workers, args.resume)
        print(json.dumps({"status": "ok", "out": str(res.out_dir), "cells": len(res.outputs),
                          "skipped": len(res.skipped)}))
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error document
        doc = error_document(exc)
        print(json.dumps(doc, sort_keys=True))
        return doc["exit_status"]


if __name__ == "__main__":
    sys.exit(main())
