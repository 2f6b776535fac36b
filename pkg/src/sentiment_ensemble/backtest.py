"""Backtest pipeline: load data, train agents, run strategies, write reports.

Run directories are laid out as ``<output_dir>/<name>/seed-<seed>/``, with
one sub-directory per strategy (see :mod:`sentiment_ensemble.report`) plus
``comparison.csv`` (metrics side by side), ``plot_data.csv`` (cumulative
returns over time) and, when enabled, ``agents/`` checkpoints.
"""

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from sentiment_ensemble.agents import AgentPolicy, Algorithm
from sentiment_ensemble.config import RunConfig, parse_strategy, resolve_windows
from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.ensemble import run_ensemble, run_fixed_period_ensemble
from sentiment_ensemble.errors import ConfigError
from sentiment_ensemble.io import (
    Dataset,
    bundled_lexicon,
    load_headlines_file,
    load_lexicon_file,
    load_market_file,
    save_policy,
)
from sentiment_ensemble.market_env import EnvConfig, TradeRecord, run_episode
from sentiment_ensemble.report import BacktestReport, metrics_table_csv, write_report
from sentiment_ensemble.seeding import spawn_seeds
from sentiment_ensemble.sentiment import Headline, Lexicon
from sentiment_ensemble.synthetic import generate_synthetic
from sentiment_ensemble.training import AgentSpec, train_agents

logger = logging.getLogger(__name__)

COMPARISON_FILENAME = "comparison.csv"
PLOT_DATA_FILENAME = "plot_data.csv"
ABLATION_FILENAME = "ablation.csv"
AGENTS_DIRNAME = "agents"

#: Ablation arm labels
FULL_ARM = "S-E"
NO_SORTINO_ARM = "S-E (w.o. Sortino)"
NO_DYNAMIC_ARM = "S-E (w.o. DS)"


@dataclass(frozen=True)
class RunInputs:
    """Loaded data and resolved windows of a run."""

    dataset: Dataset
    headlines: list[Headline]
    lexicon: Lexicon
    training_window: DateWindow
    evaluation_window: DateWindow


def load_inputs(config: RunConfig) -> RunInputs:
    """Load or generate the data of ``config`` and resolve its windows."""
    lexicon = (
        bundled_lexicon() if config.lexicon_path is None else load_lexicon_file(config.lexicon_path)
    )
    if config.synthetic is not None:
        try:
            dataset, headlines = generate_synthetic(config.synthetic, lexicon)
        except ValueError as err:
            raise ConfigError(f"Cannot generate synthetic data: {err}") from err
    else:
        dataset = load_market_file(config.market_path)
        headlines = []
        if config.headlines_path is not None:
            headlines = load_headlines_file(config.headlines_path)
    training, evaluation = resolve_windows(config, dataset)
    logger.info("Training on %s, evaluating on %s", training, evaluation)
    return RunInputs(dataset, headlines, lexicon, training, evaluation)


def seed_dir(config: RunConfig, seed: int) -> Path:
    return config.output_dir / config.name / f"seed-{seed}"


def strategy_dirname(strategy: str) -> str:
    return strategy.replace(":", "-").replace(" ", "_")


def agent_seeds(seed: int) -> dict[Algorithm, int]:
    """Training seed of every algorithm, independent of which ones run."""
    return dict(zip(Algorithm, spawn_seeds(seed, len(Algorithm))))


def train_policies(
    config: RunConfig,
    inputs: RunInputs,
    seed: int,
    algorithms: Sequence[Algorithm],
) -> dict[Algorithm, AgentPolicy]:
    """Train each algorithm once on the training window."""
    seeds = agent_seeds(seed)
    specs = [
        AgentSpec(a, config.hyperparameters_for(a), seeds[a], a.value) for a in algorithms
    ]
    frames = inputs.dataset.window_frames(inputs.training_window)
    policies = train_agents(specs, config.env, frames, config.workers)
    return dict(zip(algorithms, policies))


def buy_and_hold(
    dataset: Dataset, env_config: EnvConfig, risk_free: float = 0.0
) -> BacktestReport:
    """Equal-weight buy-and-hold of every ticker.

    On the first day each ticker receives ``initial_balance / D`` of cash and
    buys as many whole shares as that budget pays for, costs included; the
    holdings are then kept to the end.

    Parameters
    ----------
    dataset : Dataset
        Market history to hold through.
    env_config : EnvConfig
        Initial balance and transaction cost rate.
    risk_free : float, optional
        Annual risk-free rate for the metrics.

    Returns
    -------
    BacktestReport
        Report with strategy ``"buy_and_hold"``.
    """
    rate = env_config.transaction_cost_rate
    first = dataset.frames[0]
    budget = env_config.initial_balance / dataset.n_tickers
    balance = env_config.initial_balance
    holdings = np.zeros(dataset.n_tickers, dtype=np.int64)
    trades = []
    for ticker, price in enumerate(first.close_prices.tolist()):
        shares = int(budget // (price * (1.0 + rate)))
        while shares > 0 and price * shares + rate * (price * shares) > min(budget, balance):
            shares -= 1
        if shares == 0:
            continue
        cost = rate * (price * shares)
        balance -= price * shares + cost
        holdings[ticker] = shares
        trades.append(TradeRecord(first.date, ticker, shares, price, cost))
    values = [float(frame.close_prices @ holdings) + balance for frame in dataset.frames]
    return BacktestReport.build(
        "buy_and_hold", dataset.dates, values, trades, dataset.tickers, risk_free
    )


def single_agent(
    policy: AgentPolicy,
    dataset: Dataset,
    evaluation_window: DateWindow,
    env_config: EnvConfig,
    seed: int,
    risk_free: float = 0.0,
) -> BacktestReport:
    """Trade one trained policy through the evaluation window."""
    frames = dataset.window_frames(evaluation_window)
    log = run_episode(policy, env_config, frames, seed)
    return BacktestReport.build(
        f"single:{policy.algorithm.value}",
        log.dates,
        log.account_values,
        log.trades,
        dataset.tickers,
        risk_free,
    )


def run_strategy(
    strategy: str,
    config: RunConfig,
    inputs: RunInputs,
    policies: dict[Algorithm, AgentPolicy],
    seed: int,
) -> BacktestReport:
    """Run one strategy on already-trained policies."""
    kind, algorithm = parse_strategy(strategy)
    switch = config.switch
    if kind == "buy_and_hold":
        report = buy_and_hold(
            inputs.dataset.slice(inputs.evaluation_window), config.env, switch.risk_free
        )
    elif kind == "single":
        report = single_agent(
            policies[algorithm],
            inputs.dataset,
            inputs.evaluation_window,
            config.env,
            seed,
            switch.risk_free,
        )
    else:
        members = [policies[a] for a in config.members]
        common = dict(
            evaluation_window=inputs.evaluation_window,
            training_window=inputs.training_window,
            workers=config.workers,
        )
        if kind == "sentiment_ensemble":
            report, _ = run_ensemble(
                members,
                inputs.dataset,
                inputs.headlines,
                inputs.lexicon,
                switch,
                config.env,
                seed,
                **common,
            )
        else:
            report, _ = run_fixed_period_ensemble(
                members, inputs.dataset, switch, config.env, seed, **common
            )
    return dataclasses.replace(report, config={**config.to_dict(), "seed": seed})


def _needed_algorithms(config: RunConfig, strategies: Sequence[str]) -> list[Algorithm]:
    needed = []
    for strategy in strategies:
        kind, algorithm = parse_strategy(strategy)
        if kind == "single":
            needed.append(algorithm)
        elif kind != "buy_and_hold":
            needed.extend(config.members)
    return [a for a in Algorithm if a in needed]


def _save_policies(policies: dict[Algorithm, AgentPolicy], directory: Path) -> None:
    for algorithm, policy in policies.items():
        save_policy(policy, directory / AGENTS_DIRNAME / algorithm.value)


def run(
    config: RunConfig,
    seed: int | None = None,
    inputs: RunInputs | None = None,
    write: bool = True,
) -> list[BacktestReport]:
    """Run every configured strategy for one seed.

    Parameters
    ----------
    config : RunConfig
        Run configuration.
    seed : int or None, optional
        Seed of the run; defaults to the first configured seed.
    inputs : RunInputs or None, optional
        Pre-loaded data; loaded from ``config`` when omitted.
    write : bool, optional
        Whether to write report files. Default is True.

    Returns
    -------
    list of BacktestReport
        One report per strategy, in configuration order.
    """
    seed = config.seeds[0] if seed is None else seed
    inputs = inputs or load_inputs(config)
    policies = train_policies(
        config, inputs, seed, _needed_algorithms(config, config.strategies)
    )
    reports = [
        run_strategy(strategy, config, inputs, policies, seed)
        for strategy in config.strategies
    ]
    for report in reports:
        logger.info(
            "%s: cumulative return %.4f", report.strategy, report.metrics.cumulative_return
        )
    if write:
        directory = seed_dir(config, seed)
        for report in reports:
            write_report(report, directory / strategy_dirname(report.strategy))
        write_comparison(reports, directory / COMPARISON_FILENAME)
        emit_plot_data(reports, directory / PLOT_DATA_FILENAME)
        if config.save_agents:
            _save_policies(policies, directory)
    return reports


def run_ablations(
    config: RunConfig,
    seed: int | None = None,
    inputs: RunInputs | None = None,
    write: bool = True,
) -> dict[str, BacktestReport]:
    """Run the full sentiment ensemble and its two ablations on shared agents.

    The arms are ``S-E`` (as configured), ``S-E (w.o. Sortino)`` (alpha 1,
    so chi is the Sharpe ratio) and ``S-E (w.o. DS)`` (fixed-period
    re-selection without sentiment).

    Returns
    -------
    dict
        Report per arm label, in the order above.
    """
    seed = config.seeds[0] if seed is None else seed
    inputs = inputs or load_inputs(config)
    policies = train_policies(config, inputs, seed, _needed_algorithms(config, ["fixed_ensemble"]))
    no_sortino = dataclasses.replace(
        config, switch=dataclasses.replace(config.switch, alpha=1.0)
    )
    arms = {
        FULL_ARM: run_strategy("sentiment_ensemble", config, inputs, policies, seed),
        NO_SORTINO_ARM: run_strategy(
            "sentiment_ensemble", no_sortino, inputs, policies, seed
        ),
        NO_DYNAMIC_ARM: run_strategy("fixed_ensemble", config, inputs, policies, seed),
    }
    arms = {label: dataclasses.replace(r, strategy=label) for label, r in arms.items()}
    if write:
        directory = seed_dir(config, seed)
        for report in arms.values():
            write_report(report, directory / "ablation" / strategy_dirname(report.strategy))
        write_comparison(list(arms.values()), directory / ABLATION_FILENAME)
    return arms


def _unique_labels(reports: Sequence[BacktestReport]) -> list[str]:
    seen: dict[str, int] = {}
    labels = []
    for report in reports:
        count = seen.get(report.strategy, 0) + 1
        seen[report.strategy] = count
        labels.append(report.strategy if count == 1 else f"{report.strategy} ({count})")
    return labels


def write_comparison(reports: Sequence[BacktestReport], path: Path) -> Path:
    """Write metric rows by strategy columns."""
    columns = dict(zip(_unique_labels(reports), (r.metrics for r in reports)))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(metrics_table_csv(columns), encoding="utf-8")
    return path


def plot_frame(reports: Sequence[BacktestReport]) -> pd.DataFrame:
    """Cumulative returns per strategy, aligned on date."""
    series = [
        pd.Series(r.cumulative_returns, index=pd.Index(r.dates, name="date"), name=label)
        for label, r in zip(_unique_labels(reports), reports)
    ]
    return pd.concat(series, axis=1).sort_index()


def emit_plot_data(reports: Sequence[BacktestReport], path: Path) -> Path:
    """Write the aligned cumulative-return CSV of ``reports``.

    Columns follow the order of ``reports``; repeated strategy names get a
    `` (n)`` suffix. Days missing from a report are left empty.

    Raises
    ------
    ValueError
        If ``reports`` is empty.
    """
    if not reports:
        raise ValueError("emit_plot_data needs at least one report")
    frame = plot_frame(reports)
    frame.index = [day.isoformat() for day in frame.index]
    frame.index.name = "date"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, lineterminator="\n")
    logger.info("Wrote plot data for %d strategies to %s", len(reports), path)
    return path
