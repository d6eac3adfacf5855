"""Command-line entry point.

Subcommands mirror the pipeline stages; a preset or a JSON config file
selects the experiment.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import PRESETS, load_config, paper_scale, preset, save_config
from .errors import ConfigError, MaxwellInvError
from .pipeline import cmd_complete, cmd_invert, cmd_pipeline, cmd_synth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxwellinv",
        description="Reconstruct localized refractive-index perturbations "
                    "from partial boundary measurements of a time-harmonic "
                    "Maxwell field.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
            ("synth", "solve the direct problem and write the dataset"),
            ("complete", "transmit patch data onto the interior circle"),
            ("invert", "localize peaks and fit the perturbation"),
            ("pipeline", "run synth, complete, and invert in sequence")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="path to a JSON experiment config")
        p.add_argument("--preset", choices=PRESETS,
                       help="use a shipped experiment configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--paper-scale", action="store_true",
                       help="use full-fidelity mesh sizes")
        if name == "complete":
            p.add_argument("--dataset", required=True,
                           help="dataset file from 'synth'")
        if name == "invert":
            p.add_argument("--traces", required=True,
                           help="completed-trace file from 'complete'")
    return parser


def _resolve_config(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("a config is required: pass --config or --preset")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.paper_scale:
        cfg = paper_scale(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        save_config(cfg, f"{args.out}/config.json")
        if args.command == "synth":
            path = cmd_synth(cfg, args.out)
            print(f"dataset written to {path}")
        elif args.command == "complete":
            path = cmd_complete(cfg, args.dataset, args.out)
            print(f"completed traces written to {path}")
        elif args.command == "invert":
            out = cmd_invert(cfg, args.traces, args.out)
            _print_stages(out.stages)
            print(f"result written to {out.result}")
        else:
            artifacts = cmd_pipeline(cfg, args.out)
            print(f"artifacts written to {artifacts.out_dir}")
            print(f"result: {artifacts.result}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MaxwellInvError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _print_stages(stages) -> None:
    for stage, res, dt in stages:
        line = (f"stage {stage}: cost {res.cost:.3e}, "
                f"amplitude {res.amplitude:.4f} ({dt:.1f}s)")
        if res.errors:
            errs = ", ".join(f"{k} {v:.1%}" for k, v in res.errors.items())
            line += f" | rel errors: {errs}"
        print(line)


if __name__ == "__main__":
    sys.exit(main())
