"""Stock-trading environment.

The state is ``[p, h, b]``: close prices, integer share holdings and cash
balance. An action asks to buy or sell up to ``h_max`` shares of every ticker;
trades execute at the current close with a proportional transaction cost,
never leaving the balance or any holding negative. The reward is the change
in portfolio value ``p @ h + b`` after prices advance one trading day.
"""

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol, Sequence

import numpy as np

from sentiment_ensemble.errors import DimensionMismatch, EmptyData, EndOfData
from sentiment_ensemble.seeding import make_rng

logger = logging.getLogger(__name__)


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MarketFrame:
    """Close prices of every ticker on one trading day."""

    day_index: int
    date: dt.date
    close_prices: np.ndarray

    def __post_init__(self) -> None:
        prices = _frozen_array(self.close_prices, np.float64)
        if prices.ndim != 1 or prices.size == 0:
            raise DimensionMismatch("close_prices must be a non-empty vector")
        if not np.all(prices > 0):
            raise ValueError(f"Close prices on {self.date} must be positive")
        object.__setattr__(self, "close_prices", prices)

    @property
    def n_tickers(self) -> int:
        return self.close_prices.size


@dataclass(frozen=True, eq=False)
class PortfolioState:
    """Environment state ``[p, h, b]`` at a position in the frame sequence.

    ``day_index`` is the 0-based position of the current frame within the
    sequence passed to :func:`reset`.
    """

    prices: np.ndarray
    holdings: np.ndarray
    balance: float
    day_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", _frozen_array(self.prices, np.float64))
        object.__setattr__(self, "holdings", _frozen_array(self.holdings, np.int64))
        object.__setattr__(self, "balance", float(self.balance))
        if self.prices.shape != self.holdings.shape:
            raise DimensionMismatch("prices and holdings must have the same shape")
        if self.balance < 0:
            raise ValueError(f"Balance must be nonnegative, got {self.balance}")
        if np.any(self.holdings < 0):
            raise ValueError("Holdings must be nonnegative")

    @property
    def n_tickers(self) -> int:
        return self.prices.size


@dataclass(frozen=True, eq=False)
class TradeAction:
    """Integer share deltas: negative sells, positive buys, zero holds."""

    shares_delta: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "shares_delta", _frozen_array(self.shares_delta, np.int64)
        )


@dataclass(frozen=True)
class EnvConfig:
    """Trading constraints of the environment.

    Attributes
    ----------
    initial_balance : float
        Starting cash.
    h_max : int
        Maximum shares traded per ticker per step.
    transaction_cost_rate : float
        Cost as a fraction of trade notional, in [0, 1).
    n_tickers : int or None
        Expected number of tickers; None accepts whatever the data holds.
    """

    initial_balance: float = 1_000_000.0
    h_max: int = 100
    transaction_cost_rate: float = 0.001
    n_tickers: int | None = None

    def __post_init__(self) -> None:
        if not self.initial_balance > 0:
            raise ValueError("initial_balance must be positive")
        if self.h_max < 1:
            raise ValueError("h_max must be at least 1")
        if not 0 <= self.transaction_cost_rate < 1:
            raise ValueError("transaction_cost_rate must be in [0, 1)")
        if self.n_tickers is not None and self.n_tickers < 1:
            raise ValueError("n_tickers must be positive")


@dataclass(frozen=True)
class TradeRecord:
    """One executed trade; ``shares`` is negative for sells."""

    date: dt.date
    ticker: int
    shares: int
    price: float
    cost: float


class StepOutcome(NamedTuple):
    state: PortfolioState
    reward: float
    executed: TradeAction
    trades: list[TradeRecord]


class TradingPolicy(Protocol):
    """Anything that maps a portfolio state to a raw action in [-1, 1]^D."""

    name: str

    def decide(
        self,
        state: PortfolioState,
        config: EnvConfig,
        rng: np.random.Generator,
        explore: bool = False,
    ) -> np.ndarray: ...


@dataclass
class ZeroPolicy:
    """Never trades."""

    name: str = "zero"

    def decide(self, state, config, rng, explore=False) -> np.ndarray:
        return np.zeros(state.n_tickers)


@dataclass
class RandomPolicy:
    """Draws every action uniformly from [-1, 1]^D."""

    name: str = "random"

    def decide(self, state, config, rng, explore=False) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=state.n_tickers)


def check_frames(data: Sequence[MarketFrame], config: EnvConfig | None = None) -> int:
    """Validate a frame sequence and return its number of tickers.

    Raises
    ------
    EmptyData
        If ``data`` is empty.
    DimensionMismatch
        If frames disagree on the number of tickers, or disagree with
        ``config.n_tickers``.
    """
    if len(data) == 0:
        raise EmptyData("Market data has no frames")
    n_tickers = data[0].n_tickers
    for frame in data:
        if frame.n_tickers != n_tickers:
            raise DimensionMismatch(
                f"Frame {frame.date} has {frame.n_tickers} tickers, expected {n_tickers}"
            )
    if config is not None and config.n_tickers not in (None, n_tickers):
        raise DimensionMismatch(
            f"Data has {n_tickers} tickers but config expects {config.n_tickers}"
        )
    return n_tickers


def reset(config: EnvConfig, data: Sequence[MarketFrame]) -> PortfolioState:
    """Initial state: first frame's prices, no holdings, full balance."""
    n_tickers = check_frames(data, config)
    return PortfolioState(
        prices=data[0].close_prices,
        holdings=np.zeros(n_tickers, dtype=np.int64),
        balance=config.initial_balance,
        day_index=0,
    )


def portfolio_value(state: PortfolioState) -> float:
    """Total account value ``p @ h + b``."""
    return float(state.prices @ state.holdings) + state.balance


def action_to_shares(raw_action: np.ndarray, h_max: int) -> np.ndarray:
    """Scale a raw action in [-1, 1]^D by ``h_max``, truncating toward zero."""
    clipped = np.clip(np.asarray(raw_action, dtype=np.float64), -1.0, 1.0)
    return np.trunc(clipped * h_max).astype(np.int64)


def execute_step(
    state: PortfolioState,
    raw_action: np.ndarray,
    data: Sequence[MarketFrame],
    config: EnvConfig,
) -> StepOutcome:
    """Apply an action and advance one trading day.

    Sells execute first, clipped to current holdings. Buys then execute in
    ascending ticker order, each clipped to what the remaining balance can pay
    including costs.

    Parameters
    ----------
    state : PortfolioState
        Current state.
    raw_action : numpy.ndarray
        Raw action in [-1, 1]^D; values outside are clipped.
    data : Sequence[MarketFrame]
        The frame sequence ``state`` indexes into.
    config : EnvConfig
        Trading constraints.

    Returns
    -------
    StepOutcome
        Next state, reward, executed share deltas and trade records.

    Raises
    ------
    EndOfData
        If there is no frame after ``state.day_index``.
    DimensionMismatch
        If the action length differs from the number of tickers.
    """
    next_index = state.day_index + 1
    if next_index >= len(data):
        raise EndOfData(
            f"No market frame after position {state.day_index}",
            day_index=state.day_index,
        )
    requested = action_to_shares(raw_action, config.h_max)
    if requested.shape != state.holdings.shape:
        raise DimensionMismatch(
            f"Action has {requested.size} entries, expected {state.n_tickers}"
        )

    rate = config.transaction_cost_rate
    prices = state.prices
    holdings = state.holdings.copy()
    balance = state.balance
    executed = np.zeros_like(holdings)
    trades = []
    day = data[state.day_index].date

    for ticker in np.flatnonzero(requested < 0):
        shares = int(min(-requested[ticker], holdings[ticker]))
        if shares == 0:
            continue
        notional = float(prices[ticker]) * shares
        cost = rate * notional
        balance += notional - cost
        holdings[ticker] -= shares
        executed[ticker] = -shares
        trades.append(TradeRecord(day, int(ticker), -shares, float(prices[ticker]), cost))

    for ticker in np.flatnonzero(requested > 0):
        price = float(prices[ticker])
        shares = int(min(requested[ticker], balance // (price * (1.0 + rate))))
        while shares > 0 and price * shares + rate * (price * shares) > balance:
            shares -= 1
        if shares == 0:
            continue
        notional = price * shares
        cost = rate * notional
        balance -= notional + cost
        holdings[ticker] += shares
        executed[ticker] = shares
        trades.append(TradeRecord(day, int(ticker), shares, price, cost))

    next_state = PortfolioState(
        prices=data[next_index].close_prices,
        holdings=holdings,
        balance=balance,
        day_index=next_index,
    )
    reward = portfolio_value(next_state) - portfolio_value(state)
    return StepOutcome(next_state, reward, TradeAction(executed), trades)


def step(
    state: PortfolioState,
    raw_action: np.ndarray,
    data: Sequence[MarketFrame],
    config: EnvConfig,
) -> tuple[PortfolioState, float]:
    """Apply an action and advance one day; see :func:`execute_step`.

    Returns
    -------
    tuple of (PortfolioState, float)
        Next state and reward ``PV(s') - PV(s)``.
    """
    outcome = execute_step(state, raw_action, data, config)
    return outcome.state, outcome.reward


@dataclass
class EpisodeLog:
    """Account values (one per frame) and trades of one pass over the data."""

    dates: list[dt.date] = field(default_factory=list)
    account_values: list[float] = field(default_factory=list)
    trades: list[TradeRecord] = field(default_factory=list)


def run_episode(
    policy: TradingPolicy,
    config: EnvConfig,
    data: Sequence[MarketFrame],
    seed: int,
    explore: bool = False,
) -> EpisodeLog:
    """Drive ``policy`` through every frame of ``data``.

    Parameters
    ----------
    policy : TradingPolicy
        Policy choosing the raw action each day.
    config : EnvConfig
        Trading constraints.
    data : Sequence[MarketFrame]
        Market frames; the episode makes ``len(data) - 1`` steps.
    seed : int
        Seed of the generator handed to the policy.
    explore : bool, optional
        Whether the policy may act stochastically. Default is False.

    Returns
    -------
    EpisodeLog
        One account value per frame and the executed trades.
    """
    rng = make_rng(seed)
    state = reset(config, data)
    log = EpisodeLog(dates=[data[0].date], account_values=[portfolio_value(state)])
    while state.day_index + 1 < len(data):
        action = policy.decide(state, config, rng, explore=explore)
        outcome = execute_step(state, action, data, config)
        state = outcome.state
        log.trades.extend(outcome.trades)
        log.dates.append(data[state.day_index].date)
        log.account_values.append(portfolio_value(state))
    logger.debug(
        "Episode of %s over %d frames ended at %.2f",
        policy.name,
        len(data),
        log.account_values[-1],
    )
    return log
