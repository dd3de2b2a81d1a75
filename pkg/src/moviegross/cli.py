"""Command-line interface.

Subcommands: ingest, explore, efa, fit, predict, all.  Every config-file
key can be overridden by a same-named flag; --config points at a flat
``key = value`` file.
"""

from __future__ import annotations

import argparse
import sys

from .errors import MovieGrossError
from .pipeline import EXIT_ERROR, Pipeline, load_config


def _add_common(parser):
    parser.add_argument("--config", default=None, help="path to a key = value config file")
    parser.add_argument("--input", default=None, help="input movie table (delimited)")
    parser.add_argument("--output", "--output-dir", dest="output_dir", default=None,
                        help="artifact output directory")
    parser.add_argument("--seed", type=int, default=None, help="split/shuffle seed")
    parser.add_argument("--delimiter", default=None, help="field delimiter (default comma)")
    parser.add_argument("--format", choices=("delimited", "structured"), default=None,
                        help="report style: machine delimited or human structured")
    parser.add_argument("--n-factors", dest="n_factors", type=int, default=None)
    parser.add_argument("--min-gross", dest="min_gross", type=float, default=None)
    parser.add_argument("--gross-cap", dest="gross_cap", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moviegross",
        description="Genre factor analysis and log-linear revenue modeling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("ingest", "parse, filter, and log-transform the movie table"),
        ("explore", "correlation matrices and eigenvalue series"),
        ("efa", "factor extraction, rotation, and per-movie scores"),
        ("all", "run the whole pipeline"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("fit", help="fit the built-in model specifications")
    _add_common(p)
    p.add_argument("--stage", choices=("pre-production", "post-release", "both"),
                   default="both")

    p = sub.add_parser("predict", help="predict revenue from a model artifact")
    _add_common(p)
    p.add_argument("--model", required=True, help="model artifact (JSON)")
    p.add_argument("--records", required=True, help="new records file")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in ("input", "output_dir", "seed", "delimiter", "format",
                    "n_factors", "min_gross", "gross_cap")
        if getattr(args, key, None) is not None
    }
    try:
        config = load_config(args.config, overrides)
        pipeline = Pipeline(config)
        if args.command == "ingest":
            return pipeline.cmd_ingest()
        if args.command == "explore":
            return pipeline.cmd_explore()
        if args.command == "efa":
            return pipeline.cmd_efa()
        if args.command == "fit":
            stages = (("pre-production", "post-release")
                      if args.stage == "both" else (args.stage,))
            for stage in stages:
                code = pipeline.cmd_fit(stage)
                if code:
                    return code
            return 0
        if args.command == "predict":
            return pipeline.cmd_predict(args.model, args.records)
        if args.command == "all":
            return pipeline.cmd_all()
        raise AssertionError(args.command)
    except MovieGrossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
