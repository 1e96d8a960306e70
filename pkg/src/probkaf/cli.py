"""Command-line driver for data generation, experiments and evaluation."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .data import LorenzConfig, lorenz_generate, save_csv
from .evaluation import mse
from .experiments import (
    ConfigError,
    DataError,
    NumericalError,
    read_predictions_csv,
    run_experiment,
    sweep_learning_rate,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (defaults apply for missing keys)")
    p.add_argument("--seed", type=int, help="random seed (required here or in the config)")
    p.add_argument("--outdir", help="output directory (overrides the config)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override any config field; repeatable",
    )


def _collect_overrides(args: argparse.Namespace) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        dotted, value = item.split("=", 1)
        overrides[dotted.strip()] = value.strip()
    if args.seed is not None:
        overrides["experiment.seed"] = str(args.seed)
    if args.outdir is not None:
        overrides["experiment.outdir"] = args.outdir
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probkaf",
        description="Probabilistic initialisation and fully-adaptive kernel adaptive filtering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lorenz-gen", help="generate a Lorenz first-channel series as CSV")
    p.add_argument("--n", type=int, default=1000, help="number of samples")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--rho", type=float, default=28.0)
    p.add_argument("--beta", type=float, default=8.0 / 3.0)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--z0", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output CSV path")

    for name, help_text in (
        ("fit-offline", "offline fit on a training prefix, predict the rest"),
        ("pretrain-klms", "pre-trained KLMS versus a calibrated novelty baseline"),
        ("klms", "standard KLMS over a series"),
        ("adaptive", "sliding-window fully-adaptive run"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_experiment_args(p)

    p = sub.add_parser("sweep-lr", help="grid-sweep a learning rate and record MSEs")
    _add_experiment_args(p)
    p.add_argument("--kind", choices=("klms", "pretrain-klms"), help="experiment kind if no config")
    p.add_argument("--key", help="dotted config field to sweep (default by kind)")
    p.add_argument("--grid", help="comma-separated learning rates (default 1e-3..1e-1 log grid)")

    p = sub.add_parser("eval", help="MSE of a predictions.csv from a start index")
    p.add_argument("--predictions", required=True, help="index,target,prediction CSV")
    p.add_argument("--start-index", type=int, default=0, help="series index from which to score")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "lorenz-gen":
            series = lorenz_generate(
                LorenzConfig(
                    sigma=args.sigma,
                    rho=args.rho,
                    beta=args.beta,
                    dt=args.dt,
                    n_steps=args.n,
                    initial_state=(args.x0, args.y0, args.z0),
                )
            )
            save_csv(series, args.out)
            print(f"wrote {args.n} samples to {args.out}")
            return 0
        if args.command in ("fit-offline", "pretrain-klms", "klms", "adaptive"):
            overrides = _collect_overrides(args)
            report = run_experiment(args.config, overrides=overrides, kind=args.command)
            print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
            return 0
        if args.command == "sweep-lr":
            overrides = _collect_overrides(args)
            grid = None
            if args.grid:
                try:
                    grid = [float(x) for x in args.grid.split(",") if x.strip()]
                except ValueError:
                    raise ConfigError(f"--grid: cannot parse {args.grid!r}") from None
            result = sweep_learning_rate(
                args.config,
                overrides=overrides,
                kind=getattr(args, "kind", None),
                key=args.key,
                grid=grid,
            )
            print(json.dumps(result, indent=2, sort_keys=True))
            return 0
        if args.command == "eval":
            _, targets, preds = read_predictions_csv(args.predictions)
            idx, _, _ = read_predictions_csv(args.predictions)
            offset = int(args.start_index) - int(idx[0])
            value = mse(preds, targets, start_index=max(offset, 0))
            print(json.dumps({"mse": value, "start_index": int(args.start_index)}, indent=2))
            return 0
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
