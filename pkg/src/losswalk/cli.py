"""Command line interface.

Subcommands: ``run`` executes an experiment and writes a run directory,
``summarise`` prints the tables of a persisted run, ``plot`` renders a
loss-gradient cloud, and ``basins`` applies the stagnation analysis to a
plain one-column series file.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 every walk of
a run failed numerically.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exceptions import AllWalksFailedError, DataFormatError, UsageError
from .experiment import (
    config_from,
    read_config_file,
    read_lg_cloud,
    run_experiment,
    summarise_run,
)
from .plots import emit_scatter_plot
from .stagnation import StagnationParams, analyse_walk, load_series


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep usage errors on 1
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="losswalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a walk experiment", add_help=True)
    run.add_argument("--config", help="key=value config file; flags override it")
    run.add_argument("--problem", help="benchmark problem name")
    run.add_argument("--loss", choices=("sse", "ce"))
    run.add_argument("--granularity", choices=("micro", "macro"))
    run.add_argument("--init-range", type=float, choices=(1.0, 10.0), dest="init_range")
    run.add_argument("--walks", type=int, help="number of walks (default 10 x dim)")
    run.add_argument("--seed", type=int, help="master seed (default 0)")
    run.add_argument("--hessian", choices=("on", "off", "auto"))
    run.add_argument("--out", help="run directory to create")
    run.add_argument("--data", help="dataset file (CSV problems) or directory (mnist)")
    run.add_argument("--threads", type=int, help="worker processes (default 1)")
    run.add_argument("--steps", type=int, help="override the per-walk step count")
    run.add_argument("--batch-size", type=int, dest="batch_size",
                     help="override the per-walk evaluation batch size")

    summarise = sub.add_parser("summarise", help="print the tables of a run")
    summarise.add_argument("run_dir")

    plot = sub.add_parser("plot", help="render the loss-gradient cloud of a run")
    plot.add_argument("run_dir")
    plot.add_argument("--colour-by", choices=("curvature", "e_g"),
                      default="curvature", dest="colour_by")
    plot.add_argument("--max-loss", type=float, dest="max_loss",
                      help="keep only records with e_t at most this value")
    plot.add_argument("--log-colour", action="store_true", dest="log_colour",
                      help="logarithmic colour scale (e_g colouring)")
    plot.add_argument("--out", help="output file (default RUN_DIR/lg_cloud.svg)")

    basins = sub.add_parser(
        "basins", help="stagnation metrics of a one-value-per-line series file"
    )
    basins.add_argument("series_file")
    basins.add_argument("--windows", help="comma-separated even window sizes")
    return parser


def _cmd_run(args) -> int:
    values = read_config_file(args.config) if args.config else {}
    for key in ("problem", "loss", "granularity", "init_range", "walks", "seed",
                "hessian", "out", "data", "threads", "steps", "batch_size"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if values.get("out") is None:
        raise UsageError("an output directory is required (--out)")
    result = run_experiment(config_from(values))
    print(result.summary, end="")
    print(f"run directory: {result.run_dir}")
    return 0


def _cmd_summarise(args) -> int:
    print(summarise_run(args.run_dir), end="")
    return 0


def _cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    records = read_lg_cloud(run_dir / "lg_cloud.csv")
    out = Path(args.out) if args.out else run_dir / "lg_cloud.svg"
    info = emit_scatter_plot(
        records, out, colour_by=args.colour_by,
        max_loss=args.max_loss, log_colour=args.log_colour,
    )
    print(f"wrote {info.path} ({info.points} points)")
    return 0


def _cmd_basins(args) -> int:
    series = load_series(args.series_file)
    params = StagnationParams()
    if args.windows:
        try:
            windows = tuple(int(w) for w in args.windows.split(","))
        except ValueError:
            raise UsageError(f"bad --windows value: {args.windows!r}") from None
        params = StagnationParams(window_candidates=windows)
    result = analyse_walk(series, params)
    print(f"n_stag={result.n} l_stag={result.length:.5f} window={result.window}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "summarise": _cmd_summarise,
    "plot": _cmd_plot,
    "basins": _cmd_basins,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except AllWalksFailedError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
