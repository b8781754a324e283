"""Command-line front end.

Five subcommands mirror the pipeline stages; all take ``--config`` (scenario
JSON), ``--seed`` (overrides the scenario seed) and ``--out`` (artifact
directory, shared across stages so later stages find earlier outputs).

Exit codes: 0 success, 1 usage/configuration problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import ConfigError, UsageError


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; remap to our usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, "
                                         f"got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sarcal",
                     description="SAR ADC simulation and blind-calibration "
                                 "experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True,
                       help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--out", default=None,
                       help="output directory (default: scenario out_dir)")

    add_common(sub.add_parser(
        "simulate", help="capture main + reference code streams"))
    add_common(sub.add_parser(
        "calibrate-ref", help="build the reference-ADC histogram LUT"))
    add_common(sub.add_parser(
        "train", help="fit the correction network from captured streams"))

    p_eval = sub.add_parser(
        "evaluate", help="write a before/after metrics report")
    add_common(p_eval)
    p_eval.add_argument("--quantized-bits", type=int, default=None,
                        help="run inference through the fixed-point path at "
                             "this weight width")

    p_sweep = sub.add_parser(
        "sweep", help="capacity/feature grid of post-calibration metrics")
    add_common(p_sweep)
    p_sweep.add_argument("--hidden", type=_int_list, default=None,
                         help="comma-separated hidden-layer sizes")
    p_sweep.add_argument("--features", type=_int_list, default=None,
                         help="comma-separated feature counts")
    p_sweep.add_argument("--n-seeds", type=int, default=None,
                         help="training seeds per grid point")
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="N",
                         help="worker threads for sweep points (default 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        scenario = harness.load_scenario(args.config, seed=args.seed)
        if args.command == "simulate":
            main_path, ref_path = harness.cmd_simulate(scenario, args.out)
            print(f"wrote {main_path} and {ref_path}")
        elif args.command == "calibrate-ref":
            lut_path = harness.cmd_calibrate_ref(scenario, args.out)
            print(f"wrote {lut_path}")
        elif args.command == "train":
            model_path, history_path = harness.cmd_train(scenario, args.out)
            print(f"wrote {model_path} and {history_path}")
        elif args.command == "evaluate":
            report_path = harness.cmd_evaluate(
                scenario, args.out, quantized_bits=args.quantized_bits)
            print(f"wrote {report_path}")
        elif args.command == "sweep":
            sweep_path = harness.cmd_sweep(
                scenario, args.out, hidden_list=args.hidden,
                feature_list=args.features, n_seeds=args.n_seeds,
                workers=max(1, args.parallel))
            print(f"wrote {sweep_path}")
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command!r}")
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"sarcal: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: divergence, overdrive, ...
        print(f"sarcal: runtime error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
