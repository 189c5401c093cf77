"""Command-line entry point: ``voxwofe run``, per-stage subcommands and ``synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import VoxWofeError
from .pipeline import STAGES, run_pipeline, run_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxwofe", description="Voxel weights-of-evidence prospectivity pipeline")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="pipeline config file")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for voxel loops")

    run = sub.add_parser("run", help="run the whole pipeline, or one stage with --stage")
    common(run)
    run.add_argument("--stage", choices=STAGES, help="run only this stage")
    for name in STAGES:
        common(sub.add_parser(name, help=f"run the {name} stage from saved intermediates"))
    synth = sub.add_parser("synth", help="write the synthetic test fixture")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--seed", type=int, default=7)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "synth":
        from .synthetic import generate
        print(generate(args.out, args.seed))
        return 0
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.out)
        stage = args.stage if args.command == "run" else args.command
        if stage:
            run_stage(stage, cfg, args.threads)
        else:
            run_pipeline(cfg, args.threads)
            print((Path(cfg.output_dir) / "report.txt").read_text(encoding="utf-8"), end="")
    except VoxWofeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
