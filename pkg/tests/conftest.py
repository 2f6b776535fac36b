"""Pytest configuration and shared fixtures."""

import datetime as dt

import numpy as np
import pandas as pd
import pytest

from sentiment_ensemble.agents import AgentHyperparameters
from sentiment_ensemble.io import Dataset
from sentiment_ensemble.market_env import EnvConfig, MarketFrame
from sentiment_ensemble.sentiment import Lexicon

START_DATE = dt.date(2020, 1, 1)


def business_days(count: int, start: dt.date = START_DATE) -> list[dt.date]:
    """First ``count`` business days from ``start``."""
    return [ts.date() for ts in pd.bdate_range(start, periods=count)]


def make_frames(closes, start: dt.date = START_DATE) -> list[MarketFrame]:
    """Market frames from a ``(days, tickers)`` close matrix."""
    closes = np.atleast_2d(np.asarray(closes, dtype=np.float64))
    return [
        MarketFrame(day_index=i, date=day, close_prices=row)
        for i, (day, row) in enumerate(zip(business_days(len(closes), start), closes))
    ]


def make_dataset(closes, start: dt.date = START_DATE) -> Dataset:
    """Dataset with tickers ``T0, T1, ...`` from a ``(days, tickers)`` close matrix."""
    closes = np.asarray(closes, dtype=np.float64)
    tickers = [f"T{i}" for i in range(closes.shape[1])]
    return Dataset.from_closes(business_days(len(closes), start), tickers, closes)


@pytest.fixture
def lexicon():
    """Small lexicon with one phrase.

    Returns
    -------
    Lexicon
        ``good``/``great`` positive, ``bad``/``terrible`` negative and the
        phrase ``cool stuff``.
    """
    return Lexicon(
        {"good": 3, "great": 3, "bad": -3, "terrible": -3, "cool stuff": 3},
        name="test",
    )


@pytest.fixture
def zero_cost_config():
    """Environment without transaction costs."""
    return EnvConfig(initial_balance=10_000.0, h_max=10, transaction_cost_rate=0.0)


@pytest.fixture
def env_config():
    """Environment with the default cost rate and a small account."""
    return EnvConfig(initial_balance=10_000.0, h_max=10, transaction_cost_rate=0.001)


@pytest.fixture
def flat_frames():
    """Thirty days of constant prices for two tickers."""
    return make_frames(np.tile([10.0, 20.0], (30, 1)))


@pytest.fixture
def trending_dataset():
    """A seeded two-ticker random walk of 120 days."""
    rng = np.random.Generator(np.random.PCG64(11))
    steps = rng.normal(0.0005, 0.01, size=(119, 2))
    closes = 50.0 * np.exp(np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)]))
    return make_dataset(closes)


@pytest.fixture
def tiny_hyperparameters():
    """Hyperparameters small enough for fast training in tests."""
    return AgentHyperparameters(
        hidden_sizes=(8,),
        total_timesteps=60,
        learning_starts=10,
        batch_size=8,
        n_steps=16,
        minibatch_size=8,
        ppo_epochs=2,
    )


@pytest.fixture
def market_csv_text():
    """Well-formed market CSV with 2 tickers and 3 days, rows out of order."""
    return (
        "date,ticker,open,high,low,close,volume\n"
        "2020-01-02,BBB,20,21,19,20.5,200\n"
        "2020-01-02,AAA,10,11,9,10.5,100\n"
        "2020-01-03,AAA,10.5,12,10,11,110\n"
        "2020-01-03,BBB,20.5,21,20,21,210\n"
        "2020-01-06,AAA,11,11.5,10.5,11.25,120\n"
        "2020-01-06,BBB,21,22,20.5,21.5,220\n"
    )


@pytest.fixture
def headlines_text():
    """Three headline records on two days, out of date order."""
    return (
        '{"date": "2020-01-03", "source": "wire", "headline": "Great rally"}\n'
        '{"date": "2020-01-02", "source": "wire", "headline": "Bad day for banks"}\n'
        "\n"
        '{"date": "2020-01-02", "source": "desk", "headline": "Good news"}\n'
    )


TINY_RUN_CONFIG = """\
synthetic:
  tickers: 2
  days: 80
  seed: 5
  headlines_per_day: 3
  regimes:
    - {start_day: 0, drift: 0.001, volatility: 0.01, sentiment: 2.0}
    - {start_day: 60, drift: -0.001, volatility: 0.01, sentiment: -2.0}
windows:
  evaluation_days: 30
env:
  initial_balance: 100000.0
  h_max: 100
agents:
  common:
    hidden_sizes: [8]
    total_timesteps: 40
    learning_starts: 10
    batch_size: 8
    n_steps: 16
    minibatch_size: 8
    ppo_epochs: 1
ensemble:
  members: [DDPG, PPO, A2C, TD3]
switch:
  period_days: 10
  beta: 1.0
run:
  strategies:
    - sentiment_ensemble
    - fixed_ensemble
    - "single:TD3"
    - buy_and_hold
  seeds: [0]
  output_dir: runs
"""


@pytest.fixture
def run_config_file(tmp_path):
    """A fast synthetic run configuration written to disk.

    Parameters
    ----------
    tmp_path : Path
        Pytest temporary directory.

    Returns
    -------
    Path
        Path of ``tiny.yaml``; outputs go to ``tmp_path / "runs"``.
    """
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_RUN_CONFIG, encoding="utf-8")
    return path
