"""Command-line interface for sentiment-ensemble.

Subcommands:

- ``run``: backtest the configured strategies, once per seed;
- ``ablate``: run the sentiment ensemble and its ablations;
- ``synth``: write a synthetic market CSV and headline file;
- ``score-headlines``: print per-period headline sentiment.

Exit codes are 0 on success, 1 for configuration errors, 2 for data errors
and 3 for any other failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import pandas as pd

from sentiment_ensemble.backtest import load_inputs, run, run_ablations, seed_dir
from sentiment_ensemble.config import apply_overrides, load_config
from sentiment_ensemble.errors import ConfigError, SentimentEnsembleError
from sentiment_ensemble.io import (
    bundled_lexicon,
    dump_headlines,
    dump_market_csv,
    load_headlines_file,
    load_lexicon_file,
    load_market_file,
)
from sentiment_ensemble.report import BacktestReport
from sentiment_ensemble.sentiment import PeriodSentiment, consecutive_period_sentiments
from sentiment_ensemble.synthetic import Regime, SyntheticSpec, generate_synthetic

logger = logging.getLogger(__name__)

MARKET_FILENAME = "market.csv"
HEADLINES_FILENAME = "headlines.jsonl"

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _regime(value: str) -> Regime:
    """Parse ``START:DRIFT:VOLATILITY:SENTIMENT``."""
    try:
        start, drift, volatility, sentiment = value.split(":")
        return Regime(int(start), float(drift), float(volatility), float(sentiment))
    except ValueError as err:
        raise argparse.ArgumentTypeError(
            f"Invalid regime {value!r}, expected START:DRIFT:VOLATILITY:SENTIMENT ({err})"
        ) from err


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", type=Path, help="Path to the YAML run configuration")
    parser.add_argument(
        "--seed",
        type=int,
        action="append",
        default=None,
        help="Run seed; repeat for a multi-seed sweep (default: from config)",
    )
    parser.add_argument(
        "--output-dir", type=Path, default=None, help="Parent directory of run outputs"
    )
    parser.add_argument("--alpha", type=float, default=None, help="Sharpe weight of chi")
    parser.add_argument("--beta", type=float, default=None, help="Sentiment trigger threshold")
    parser.add_argument(
        "--period-days", type=int, default=None, help="Trading days per validation period"
    )
    parser.add_argument(
        "--workers", type=int, default=None, help="Concurrent training/validation workers"
    )


def get_parser() -> argparse.ArgumentParser:
    """Create and configure the command-line argument parser.

    Returns
    -------
    argparse.ArgumentParser
        Configured argument parser ready to parse command-line arguments.
    """
    parser = argparse.ArgumentParser(
        prog="sentiment_ensemble",
        description="Backtest a sentiment-switched ensemble of trading agents",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument(
        "--verbose", action="store_true", default=False, help="Log progress messages"
    )
    verbosity.add_argument(
        "--debug", action="store_true", default=False, help="Log debug messages"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser(
        "run",
        help="Backtest the configured strategies",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_run_arguments(run_parser)
    run_parser.add_argument(
        "--strategy",
        action="append",
        default=None,
        help="Strategy to run; repeatable (sentiment_ensemble, fixed_ensemble, "
        "buy_and_hold, single:<ALGORITHM>)",
    )
    run_parser.add_argument(
        "--save-agents",
        action="store_true",
        default=None,
        help="Write checkpoints of the trained agents",
    )

    ablate_parser = commands.add_parser(
        "ablate",
        help="Run the sentiment ensemble and its ablations",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_run_arguments(ablate_parser)

    synth_parser = commands.add_parser(
        "synth",
        help="Generate a synthetic market and headlines",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    synth_parser.add_argument("output_dir", type=Path, help="Directory for the generated files")
    synth_parser.add_argument(
        "--config", type=Path, default=None, help="Take settings from a config's synthetic section"
    )
    synth_parser.add_argument("--tickers", type=int, default=3, help="Number of tickers")
    synth_parser.add_argument("--days", type=int, default=500, help="Number of trading days")
    synth_parser.add_argument("--seed", type=int, default=0, help="Generator seed")
    synth_parser.add_argument(
        "--regime",
        type=_regime,
        action="append",
        default=None,
        help="Regime START:DRIFT:VOLATILITY:SENTIMENT; repeatable",
    )
    synth_parser.add_argument(
        "--headlines-per-day", type=int, default=15, help="Headlines per trading day"
    )
    synth_parser.add_argument(
        "--lexicon", type=Path, default=None, help="Lexicon file (default: bundled subset)"
    )

    score_parser = commands.add_parser(
        "score-headlines",
        help="Print headline sentiment per block of trading days",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    score_parser.add_argument("headlines", type=Path, help="Headline file (JSON lines)")
    score_parser.add_argument(
        "--market",
        type=Path,
        default=None,
        help="Market CSV whose dates form the calendar (default: business days)",
    )
    score_parser.add_argument(
        "--lexicon", type=Path, default=None, help="Lexicon file (default: bundled subset)"
    )
    score_parser.add_argument(
        "--period-days", type=int, default=62, help="Trading days per block"
    )
    score_parser.add_argument(
        "--output", type=Path, default=None, help="Write the CSV here instead of stdout"
    )
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.WARNING
    if args.verbose:
        level = logging.INFO
    if args.debug:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _load_run_config(args: argparse.Namespace):
    config = load_config(args.config)
    overrides = dict(
        alpha=args.alpha,
        beta=args.beta,
        period_days=args.period_days,
        workers=args.workers,
        output_dir=args.output_dir,
        seeds=tuple(args.seed) if args.seed else None,
    )
    if getattr(args, "strategy", None):
        overrides["strategies"] = tuple(args.strategy)
    if getattr(args, "save_agents", None):
        overrides["save_agents"] = True
    return apply_overrides(config, **overrides)


def _print_summary(seed: int, reports: Sequence[BacktestReport]) -> None:
    print(f"\nSeed {seed}:")
    for report in reports:
        metrics = report.metrics
        sharpe = "n/a" if metrics.sharpe is None else f"{metrics.sharpe:.3f}"
        print(
            f"  {report.strategy:<24} cumulative return {metrics.cumulative_return:8.2%}"
            f"  sharpe {sharpe}"
        )


def _run_command(args: argparse.Namespace) -> None:
    config = _load_run_config(args)
    inputs = load_inputs(config)
    for seed in config.seeds:
        if args.command == "ablate":
            reports = list(run_ablations(config, seed, inputs).values())
        else:
            reports = run(config, seed, inputs)
        _print_summary(seed, reports)
        logger.info("Results written to %s", seed_dir(config, seed))


def _synth_command(args: argparse.Namespace) -> None:
    lexicon = bundled_lexicon() if args.lexicon is None else load_lexicon_file(args.lexicon)
    if args.config is not None:
        spec = load_config(args.config).synthetic
        if spec is None:
            raise ConfigError(f"{args.config} has no synthetic section")
    else:
        try:
            spec = SyntheticSpec(
                tickers=args.tickers,
                days=args.days,
                regimes=tuple(args.regime or (Regime(0),)),
                seed=args.seed,
                headlines_per_day=args.headlines_per_day,
            )
        except ValueError as err:
            raise ConfigError(f"Invalid synthetic settings: {err}") from err
    try:
        dataset, headlines = generate_synthetic(spec, lexicon)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    args.output_dir.mkdir(parents=True, exist_ok=True)
    (args.output_dir / MARKET_FILENAME).write_text(dump_market_csv(dataset), encoding="utf-8")
    (args.output_dir / HEADLINES_FILENAME).write_text(
        dump_headlines(headlines), encoding="utf-8"
    )
    print(
        f"Wrote {len(dataset)} days of {dataset.n_tickers} tickers and "
        f"{len(headlines)} headlines to {args.output_dir}"
    )


def periods_csv(periods: Sequence[PeriodSentiment]) -> str:
    """CSV ``start_date,end_date,score,headline_count``; absent scores are empty."""
    table = pd.DataFrame(
        {
            "start_date": [period.start_date.isoformat() for period in periods],
            "end_date": [period.end_date.isoformat() for period in periods],
            "score": pd.Series([period.score for period in periods], dtype="float64"),
            "headline_count": pd.Series(
                [period.headline_count for period in periods], dtype="int64"
            ),
        }
    )
    return table.to_csv(index=False, lineterminator="\n", na_rep="")


def _score_command(args: argparse.Namespace) -> None:
    if args.period_days < 1:
        raise ConfigError("--period-days must be at least 1")
    lexicon = bundled_lexicon() if args.lexicon is None else load_lexicon_file(args.lexicon)
    headlines = load_headlines_file(args.headlines)
    if args.market is not None:
        calendar = load_market_file(args.market).dates
    elif headlines:
        calendar = [
            ts.date() for ts in pd.bdate_range(headlines[0].date, headlines[-1].date)
        ]
    else:
        calendar = []
    if calendar and headlines and calendar[0] > headlines[0].date:
        logger.warning("Headlines before %s fall outside the calendar", calendar[0])
    periods = consecutive_period_sentiments(headlines, calendar, args.period_days, lexicon)
    text = periods_csv(periods)
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="utf-8")
        logger.info("Wrote %d periods to %s", len(periods), args.output)


COMMANDS = {
    "run": _run_command,
    "ablate": _run_command,
    "synth": _synth_command,
    "score-headlines": _score_command,
}


def main(argv: Sequence[str] | None = None) -> None:
    """Main entry point for the command-line interface.

    Parses command-line arguments, configures logging and dispatches to the
    selected subcommand.

    Parameters
    ----------
    argv : Sequence[str] or None, optional
        Arguments to parse instead of ``sys.argv[1:]``.

    Raises
    ------
    SystemExit
        With code 1 on configuration errors or interruption, 2 on data errors
        and 3 on any other failure.
    """
    args = get_parser().parse_args(argv)
    _configure_logging(args)
    try:
        COMMANDS[args.command](args)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(1)
    except SentimentEnsembleError as err:
        logger.error("%s", err.message)
        logger.debug("Full traceback:", exc_info=True)
        sys.exit(err.exit_code)
    except Exception as err:
        logger.error("Unexpected error: %s", err)
        logger.debug("Full traceback:", exc_info=True)
        sys.exit(3)
