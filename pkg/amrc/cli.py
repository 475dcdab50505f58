"""amrc: Adaptive minimax risk classification of drifting data streams.

Usage:
  amrc run --out=<path> [--name=<name>] [--config=<file>] [--dataset=<data>]
           [--map=<map>] [--rff-dim=<D>] [--rff-scale=<gamma>] [--order=<k>]
           [--window=<W>] [--cache=<N>] [--iters=<K>] [--delta=<delta>]
           [--mode=<mode>] [--rule=<rule>] [--seed=<seed>] [--steps=<T>]
           [--omega=<omega>] [--noise-std=<std>] [--lambda-mode=<lmode>]
           [--checkpoints=<n>] [--trials=<n>] [--label-column=<column>]
           [--max-subset-size=<n>] [--noise-timing=<timing>]
           [--no-standardize] [--no-timing] [-d]
  amrc synth --out=<path> [--omega=<omega>] [--steps=<T>] [--seed=<seed>]
             [--noise-std=<std>] [-d]
  amrc presets
  amrc -h | --help
  amrc -v | --version

Options:
  -h --help                  Show this screen.
  -v --version               Show version.
  run                        Run the online learner and write results.
  synth                      Write the synthetic drifting stream as CSV.
  presets                    List the named configs.
  -o --out=<path>            Results CSV path. The JSON summary is written next
                               to it with a .json suffix.
  -n --name=<name>           Named config to start from.
  -c --config=<file>         JSON file of config keys. Falls back to $AMRC_CONFIG.
  --dataset=<data>           "synthetic" or the path of a CSV file.
  --map=<map>                Instance map: "linear", "rff" or "auto".
  --rff-dim=<D>              Number of random Fourier features.
  --rff-scale=<gamma>        Scale of the random vectors. Defaults to the
                               median-distance heuristic.
  --order=<k>                Order of the kinematic state model.
  --window=<W>               Labels kept for the label probabilities.
  --cache=<N>                Affine pieces kept between steps.
  --iters=<K>                Optimizer iterations per step.
  --delta=<delta>            Confidence of the accumulated-mistake bound.
  --mode=<mode>              "multidim" or "unidim".
  --rule=<rule>              "randomized", "deterministic" or "both".
  --seed=<seed>              Seed for features, sampling and synthetic data.
  --steps=<T>                Length of the synthetic stream.
  --omega=<omega>            Angular rate of the synthetic drift.
  --noise-std=<std>          Noise standard deviation of the synthetic stream.
  --lambda-mode=<lmode>      "estimated" or "oracle" (synthetic only).
  --checkpoints=<n>          Evenly spaced steps with oracle columns (synthetic).
  --trials=<n>               Monte-Carlo draws per checkpoint.
  --label-column=<column>    Label column name or index. Defaults to the last.
  --max-subset-size=<n>      Largest label subset used for the affine pieces.
  --noise-timing=<timing>    Noise estimation "before" or "after" the update.
  --no-standardize           Use raw CSV features.
  --no-timing                Leave the wall_time column blank.
  -d --debug                 Enable debugging/verbose mode.

Environment variables:
  AMRC_CONFIG: JSON config file used when --config is not given.
  NO_COLOR: Disable ANSI colors.
"""
from pathlib import Path
import logging
import os
import sys
import typing

from docopt import docopt

from amrc import __version__
from amrc.config import RunConfig, available_presets, resolve_config
from amrc.errors import AMRCError
from amrc.harness import (
    emit_results,
    run_online,
    summarize,
    synthetic_config,
    write_synthetic,
)

logger = logging.getLogger(__name__)

# Command-line options and the config keys they set
OPTION_KEYS = {
    "--dataset": "dataset",
    "--map": "map",
    "--rff-dim": "rff_dim",
    "--rff-scale": "rff_scale",
    "--order": "order",
    "--window": "window",
    "--cache": "cache",
    "--iters": "iters",
    "--delta": "delta",
    "--mode": "mode",
    "--rule": "rule",
    "--seed": "seed",
    "--steps": "steps",
    "--omega": "omega",
    "--noise-std": "noise_std",
    "--lambda-mode": "lambda_mode",
    "--checkpoints": "checkpoints",
    "--trials": "trials",
    "--label-column": "label_column",
    "--max-subset-size": "max_subset_size",
    "--noise-timing": "noise_timing",
}

RED = 31
GREEN = 32
BOLD = 1
RESET_ALL = 0


def style(
    text: str,
    fg: typing.Optional[int] = None,
    *,
    bold: bool = False,
    file: typing.IO = sys.stdout,
) -> str:
    use_color = not os.environ.get("NO_COLOR") and file.isatty()
    if use_color:
        parts = [
            fg and f"\033[{fg}m",
            bold and f"\033[{BOLD}m",
            text,
            f"\033[{RESET_ALL}m",
        ]
        return "".join([e for e in parts if e])
    else:
        return text


def sprint(text: str, *args: typing.Any, **kwargs: typing.Any) -> None:
    file = kwargs.pop("file", sys.stdout)
    return print(style(text, file=file, *args, **kwargs), file=file)


def print_error(text: str) -> None:
    prefix = style("ERROR", RED, file=sys.stderr)
    return sprint(f"{prefix}: {text}", file=sys.stderr)


def overrides_from_args(
    args: typing.Mapping[str, typing.Any]
) -> typing.Dict[str, typing.Any]:
    """Config keys set explicitly on the command line."""
    overrides = {
        key: args[option]
        for option, key in OPTION_KEYS.items()
        if args.get(option) is not None
    }
    if args.get("--no-standardize"):
        overrides["standardize"] = False
    if args.get("--no-timing"):
        overrides["record_timing"] = False
    return overrides


def _fmt(value: typing.Optional[float], suffix: str = "") -> str:
    return "n/a" if value is None else f"{value:.2f}{suffix}"


def run_command(args: typing.Mapping[str, typing.Any]) -> None:
    cfg = resolve_config(
        name=args["--name"],
        config_file=args["--config"],
        overrides=overrides_from_args(args),
    )
    logger.debug(f"Running with config {cfg}")
    result = run_online(cfg)
    csv_path, json_path = emit_results(result, args["--out"], cfg)
    summary = summarize(result, cfg)
    print(
        f"T={summary['T']} "
        f"error_rand={_fmt(summary['error_rand_pct'], '%')} "
        f"error_det={_fmt(summary['error_det_pct'], '%')} "
        f"bound_final={_fmt(summary['bound_final'])}"
    )
    print(style(f"Wrote {csv_path} and {json_path}", GREEN))


def synth_command(args: typing.Mapping[str, typing.Any]) -> None:
    cfg = RunConfig(**overrides_from_args(args)).validate()
    path = Path(args["--out"])
    write_synthetic(synthetic_config(cfg), path)
    print(style(f"Wrote {cfg['steps']} steps to {path}", GREEN))


def parse_args(argv: typing.Optional[typing.Sequence] = None) -> typing.Dict[str, str]:
    """Exposes the docopt command-line arguments parser.
    Return a dictionary of arguments.
    """
    return docopt(__doc__, argv=argv, version=__version__)


def main(argv: typing.Optional[typing.Sequence] = None) -> typing.NoReturn:
    """Main entry point for the amrc CLI."""
    args = parse_args(argv)

    if args["--debug"]:
        logging.basicConfig(
            format="%(levelname)s %(filename)s: %(message)s", level=logging.DEBUG
        )
    logger.debug(args)

    try:
        if args["presets"]:
            for name in available_presets():
                print(name)
        elif args["synth"]:
            synth_command(args)
        elif args["run"]:
            run_command(args)
    except AMRCError as error:
        print_error(str(error))
        sys.exit(1)
    except OSError as error:
        print_error(str(error))
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
