"""Command line entry point: ``inflowkit <command> [flags]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import pipeline
from .errors import CorpusError, InvalidConfig

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3
COMMANDS = ("validate", "synth", "test1", "test2", "test3", "all")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inflowkit", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--corpus-dir", help="corpus directory (default: bundled synthetic corpus)")
    p.add_argument("--out-dir", default=None, help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--granularity", choices=("month", "release"), default=None)
    p.add_argument("--lag", type=int, default=None)
    p.add_argument("--split-fraction", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", help="JSON RunConfig; its keys override the flags")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> pipeline.RunConfig:
    flags = {
        "corpus_dir": args.corpus_dir,
        "out_dir": args.out_dir,
        "seed": args.seed,
        "granularity": args.granularity,
        "lag": args.lag,
        "split_fraction": args.split_fraction,
        "threads": args.threads,
    }
    cfg = pipeline.RunConfig.from_dict({k: v for k, v in flags.items() if v is not None})
    if args.seed is not None:
        # one seed drives both the learners and the generator
        cfg = dataclasses.replace(cfg, synth=dataclasses.replace(cfg.synth, seed=args.seed))
    if args.config:
        cfg = pipeline.load_config_file(args.config, cfg)
    return cfg


def _summary(command: str, rep: dict) -> dict:
    out = {"command": command, "corpus": rep.get("corpus")}
    if "test2" in rep:
        out["selected"] = rep["test2"]["selected"]["algorithm"], rep["test2"]["annotation"]
        if "ground_truth" in rep["test2"]:
            out["agreement"] = rep["test2"]["ground_truth"]["agreement"]
    if "test3" in rep and "causal_cluster_in_forest_top3" in rep["test3"]:
        out["causal_cluster_in_forest_top3"] = rep["test3"]["causal_cluster_in_forest_top3"]
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except InvalidConfig as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate":
            diag, code = pipeline.cmd_validate(cfg.resolved_corpus_dir())
            print(json.dumps(diag, indent=1, sort_keys=True))
            return code
        if args.command == "synth":
            paths = pipeline.cmd_synth(cfg)
            for p in paths:
                print(p)
            return EXIT_OK
        if args.command == "test1":
            rep = pipeline.cmd_test1(cfg)
        elif args.command == "test2":
            rep, _, _ = pipeline.cmd_test2(cfg)
        elif args.command == "test3":
            rep = pipeline.cmd_test3(cfg)
        else:
            rep = pipeline.cmd_all(cfg)
        print(json.dumps(_summary(args.command, rep), indent=1, sort_keys=True))
        return EXIT_OK
    except InvalidConfig as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CorpusError, FileNotFoundError) as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - reported with its stage label
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
