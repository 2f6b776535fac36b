"""Sentiment-ensemble: backtest a sentiment-switched ensemble of trading agents.

This package trains DDPG, PPO, A2C and TD3 agents on a stock-trading
environment, scores news headlines with a valence lexicon, and switches the
active agent whenever headline sentiment shifts past a threshold. Every
strategy is reported with a full set of risk/return metrics.

Main Functions
--------------
run_ensemble : function
    Sentiment-triggered ensemble backtest.
run_fixed_period_ensemble : function
    Ensemble that re-selects its agent every fixed period.
train_agent : function
    Train one agent on a window of market frames.
full_report : function
    Every metric of an equity curve.

Examples
--------
Using programmatically:
    >>> from sentiment_ensemble import SyntheticSpec, generate_synthetic
    >>> dataset, headlines = generate_synthetic(SyntheticSpec(tickers=2, days=300))

Using from command line:
    $ sentiment_ensemble synth data/ --tickers 3 --days 2000
    $ sentiment_ensemble --verbose run configs/synthetic.yaml --seed 0 --seed 1
    $ sentiment_ensemble ablate configs/synthetic.yaml
    $ sentiment_ensemble score-headlines data/headlines.jsonl --period-days 62
"""

from sentiment_ensemble.agents import AgentHyperparameters, AgentPolicy, Algorithm
from sentiment_ensemble.ensemble import (
    AgentTimeline,
    SwitchConfig,
    run_ensemble,
    run_fixed_period_ensemble,
)
from sentiment_ensemble.errors import (
    ConfigError,
    DataError,
    SentimentEnsembleError,
)
from sentiment_ensemble.io import Dataset, load_headlines, load_market_csv
from sentiment_ensemble.market_env import EnvConfig
from sentiment_ensemble.metrics import MetricsReport, full_report
from sentiment_ensemble.report import BacktestReport
from sentiment_ensemble.sentiment import Lexicon, load_lexicon, period_sentiment
from sentiment_ensemble.synthetic import Regime, SyntheticSpec, generate_synthetic
from sentiment_ensemble.training import AgentSpec, train_agent

__all__ = [
    "AgentHyperparameters",
    "AgentPolicy",
    "AgentSpec",
    "AgentTimeline",
    "Algorithm",
    "BacktestReport",
    "ConfigError",
    "DataError",
    "Dataset",
    "EnvConfig",
    "Lexicon",
    "MetricsReport",
    "Regime",
    "SentimentEnsembleError",
    "SwitchConfig",
    "SyntheticSpec",
    "full_report",
    "generate_synthetic",
    "load_headlines",
    "load_lexicon",
    "load_market_csv",
    "period_sentiment",
    "run_ensemble",
    "run_fixed_period_ensemble",
    "train_agent",
]
