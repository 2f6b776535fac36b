"""Ensemble controller: score agents, pick one, and re-pick on sentiment shifts.

Agents are scored on a validation window by ``chi = alpha * Sharpe +
(1 - alpha) * Sortino`` and the best one trades. The sentiment-triggered
strategy re-validates all agents whenever the trailing headline sentiment
moves by at least ``beta``; the fixed-period strategy re-validates at every
period boundary instead.
"""

import datetime as dt
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from sentiment_ensemble.agents import AgentPolicy
from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.errors import ConfigError, NoValidScores
from sentiment_ensemble.io import Dataset
from sentiment_ensemble.market_env import (
    EnvConfig,
    MarketFrame,
    TradingPolicy,
    execute_step,
    portfolio_value,
    reset,
    run_episode,
)
from sentiment_ensemble.metrics import ReturnSeries, sharpe_ratio, sortino_ratio
from sentiment_ensemble.report import BacktestReport
from sentiment_ensemble.seeding import make_rng
from sentiment_ensemble.sentiment import (
    Headline,
    Lexicon,
    PeriodSentiment,
    SentimentIndex,
)
from sentiment_ensemble.training import AgentSpec, train_agent, train_agents

logger = logging.getLogger(__name__)


class TriggerMode(str, Enum):
    DELTA = "delta"
    ABSOLUTE = "absolute"


class CheckCadence(str, Enum):
    DAILY = "daily"
    PERIOD_BOUNDARY = "period_boundary"


class SwitchReason(str, Enum):
    INITIAL = "initial"
    SENTIMENT_SWITCH = "sentiment_switch"
    SCHEDULED_REEVALUATION = "scheduled_reevaluation"


@dataclass(frozen=True)
class SwitchConfig:
    """Agent selection and switching settings.

    Attributes
    ----------
    alpha : float
        Weight of the Sharpe ratio in chi, in [0, 1].
    beta : float
        Sentiment trigger threshold (after scaling).
    period_days : int
        Trading days of a validation period and of a fixed-ensemble period.
    trigger_mode : TriggerMode
        ``delta`` compares consecutive sentiments, ``absolute`` the current one.
    sentiment_scale : float
        Factor applied to sentiment differences before comparing with ``beta``.
    check_cadence : CheckCadence
        ``daily`` checks every evaluation day; ``period_boundary`` only every
        ``period_days``.
    sentiment_window_days : int or None
        Trading days of the trailing sentiment window; defaults to
        ``period_days``.
    fine_tune_timesteps : int
        Steps of extra training on the expanding window before each
        re-validation; 0 disables fine-tuning.
    risk_free : float
        Annual risk-free rate used in validation ratios.
    """

    alpha: float = 0.25
    beta: float = 15.0
    period_days: int = 62
    trigger_mode: TriggerMode = TriggerMode.DELTA
    sentiment_scale: float = 1.0
    check_cadence: CheckCadence = CheckCadence.DAILY
    sentiment_window_days: int | None = None
    fine_tune_timesteps: int = 0
    risk_free: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "trigger_mode", TriggerMode(self.trigger_mode))
        object.__setattr__(self, "check_cadence", CheckCadence(self.check_cadence))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.period_days < 1:
            raise ValueError("period_days must be at least 1")
        if not self.sentiment_scale > 0:
            raise ValueError("sentiment_scale must be positive")
        if self.sentiment_window_days is not None and self.sentiment_window_days < 1:
            raise ValueError("sentiment_window_days must be at least 1")
        if self.fine_tune_timesteps < 0:
            raise ValueError("fine_tune_timesteps must be nonnegative")

    @property
    def sentiment_window(self) -> int:
        return self.sentiment_window_days or self.period_days


@dataclass(frozen=True)
class ValidationScore:
    """Validation outcome of one agent.

    ``sharpe`` and ``sortino`` are the raw ratios (None when undefined).
    ``chi`` is computed after an undefined component has been replaced by the
    worst value of that component among the other agents; it is None when no
    agent has that component.
    """

    agent_id: int
    agent: str
    sharpe: float | None
    sortino: float | None
    chi: float | None
    window: DateWindow | None = None

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "agent": self.agent,
            "sharpe": self.sharpe,
            "sortino": self.sortino,
            "chi": self.chi,
        }


@dataclass(frozen=True)
class ValidationEvent:
    """One validation round: when, why, the scores, and the sentiments involved."""

    date: dt.date
    reason: SwitchReason
    scores: tuple[ValidationScore, ...]
    selected: int | None
    previous_sentiment: float | None = None
    current_sentiment: float | None = None

    def to_dict(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "reason": self.reason.value,
            "selected": self.selected,
            "previous_sentiment": self.previous_sentiment,
            "current_sentiment": self.current_sentiment,
            "scores": [score.to_dict() for score in self.scores],
        }


@dataclass(frozen=True)
class TimelineEntry:
    date: dt.date
    agent_id: int
    agent: str
    reason: SwitchReason


@dataclass
class AgentTimeline:
    """Agent selections in date order; the first entry is the initial selection."""

    entries: list[TimelineEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, entry: TimelineEntry) -> None:
        if not self.entries and entry.reason is not SwitchReason.INITIAL:
            raise ValueError("The first timeline entry must be the initial selection")
        if self.entries and entry.date <= self.entries[-1].date:
            raise ValueError(
                f"Timeline date {entry.date} does not follow {self.entries[-1].date}"
            )
        self.entries.append(entry)

    def active_agent(self, day: dt.date) -> int:
        """Agent id in charge on ``day``."""
        active = self.entries[0].agent_id
        for entry in self.entries:
            if entry.date > day:
                break
            active = entry.agent_id
        return active

    def to_rows(self) -> list[dict[str, str]]:
        return [
            {"date": e.date.isoformat(), "agent": e.agent, "reason": e.reason.value}
            for e in self.entries
        ]


def chi(sharpe: float, sortino: float, alpha: float) -> float:
    """Selection score ``alpha * sharpe + (1 - alpha) * sortino``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * sharpe + (1.0 - alpha) * sortino


def score_agents(
    names: Sequence[str],
    ratios: Sequence[tuple[float | None, float | None]],
    alpha: float,
    window: DateWindow | None = None,
) -> list[ValidationScore]:
    """Turn per-agent ``(sharpe, sortino)`` pairs into validation scores.

    A component that is undefined for an agent is replaced by the worst value
    of that component among the agents that have it. A component whose weight
    is zero (alpha 0 or 1) is not needed.
    """
    sharpes = [s for s, _ in ratios if s is not None]
    sortinos = [s for _, s in ratios if s is not None]
    worst_sharpe = min(sharpes) if sharpes else None
    worst_sortino = min(sortinos) if sortinos else None

    scores = []
    for agent_id, (name, (sharpe, sortino)) in enumerate(zip(names, ratios)):
        filled_sharpe = sharpe if sharpe is not None else worst_sharpe
        filled_sortino = sortino if sortino is not None else worst_sortino
        if alpha == 1.0:
            value = filled_sharpe
        elif alpha == 0.0:
            value = filled_sortino
        elif filled_sharpe is None or filled_sortino is None:
            value = None
        else:
            value = chi(filled_sharpe, filled_sortino, alpha)
        scores.append(ValidationScore(agent_id, name, sharpe, sortino, value, window))
    return scores


def select_agent(scores: Sequence[ValidationScore]) -> int:
    """Id of the agent with the highest chi; ties go to the lowest id.

    Raises
    ------
    NoValidScores
        If no score has a chi.
    """
    best: ValidationScore | None = None
    for score in sorted(scores, key=lambda s: s.agent_id):
        if score.chi is None:
            continue
        if best is None or score.chi > best.chi:
            best = score
    if best is None:
        raise NoValidScores("No agent has a validation score")
    return best.agent_id


def should_switch(
    previous: PeriodSentiment | None,
    current: PeriodSentiment | None,
    config: SwitchConfig,
) -> bool:
    """Whether a sentiment change is large enough to re-select the agent.

    Delta mode fires on ``|current - previous| * scale >= beta``; absolute
    mode on ``|current| * scale >= beta``. Absent scores never fire.
    """
    if current is None or current.score is None:
        return False
    if config.trigger_mode is TriggerMode.ABSOLUTE:
        return abs(current.score) * config.sentiment_scale >= config.beta
    if previous is None or previous.score is None:
        return False
    return abs(current.score - previous.score) * config.sentiment_scale >= config.beta


def validate_agent(
    agent: TradingPolicy,
    frames: Sequence[MarketFrame],
    env_config: EnvConfig,
    risk_free: float = 0.0,
    seed: int = 0,
) -> tuple[float | None, float | None]:
    """Sharpe and Sortino ratios of ``agent`` trading ``frames`` from a fresh account."""
    if len(frames) < 3:
        return None, None
    log = run_episode(agent, env_config, frames, seed)
    returns = ReturnSeries.from_values(log.account_values)
    return sharpe_ratio(returns, risk_free), sortino_ratio(returns, risk_free)


def validate_agents(
    agents: Sequence[TradingPolicy],
    frames: Sequence[MarketFrame],
    env_config: EnvConfig,
    config: SwitchConfig,
    seed: int = 0,
    workers: int = 1,
) -> list[ValidationScore]:
    """Score every agent on the same frames, concurrently when ``workers > 1``."""

    def _validate(agent: TradingPolicy):
        return validate_agent(agent, frames, env_config, config.risk_free, seed)

    if workers > 1 and len(agents) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ratios = list(pool.map(_validate, agents))
    else:
        ratios = [_validate(agent) for agent in agents]
    window = DateWindow(frames[0].date, frames[-1].date) if frames else None
    return score_agents([a.name for a in agents], ratios, config.alpha, window)


def _trailing_window(dates: Sequence[dt.date], position: int, days: int) -> DateWindow:
    """Calendar window covering the ``days`` trading days ending at ``position``.

    The window starts the day after the trading day that precedes it, so
    headlines published on non-trading days are included.
    """
    before = position - days
    start = dates[before] + dt.timedelta(days=1) if before >= 0 else dt.date.min
    return DateWindow(start, dates[position])


def _log_trigger(
    day: dt.date,
    previous: PeriodSentiment | None,
    current: PeriodSentiment,
    config: SwitchConfig,
) -> None:
    if previous is None or previous.score is None:
        logger.info(
            "Sentiment trigger on %s: current %.4f (scaled %.4f)",
            day,
            current.score,
            abs(current.score) * config.sentiment_scale,
        )
        return
    logger.info(
        "Sentiment trigger on %s: previous %.4f, current %.4f (scaled delta %.4f)",
        day,
        previous.score,
        current.score,
        abs(current.score - previous.score) * config.sentiment_scale,
    )


def _prepare_agents(
    agents: Sequence["AgentSpec | TradingPolicy"],
    dataset: Dataset,
    training_window: DateWindow | None,
    env_config: EnvConfig,
    workers: int,
) -> list[TradingPolicy]:
    specs = [a for a in agents if isinstance(a, AgentSpec)]
    if not specs:
        return list(agents)
    if training_window is None:
        raise ConfigError("A training window is required to train ensemble agents")
    frames = dataset.window_frames(training_window)
    trained = iter(train_agents(specs, env_config, frames, workers))
    return [next(trained) if isinstance(a, AgentSpec) else a for a in agents]


@dataclass
class _Controller:
    """Shared trading loop of both ensemble strategies."""

    agents: list[TradingPolicy]
    dataset: Dataset
    switch_config: SwitchConfig
    env_config: EnvConfig
    seed: int
    workers: int
    training_window: DateWindow | None
    timeline: AgentTimeline = field(default_factory=AgentTimeline)
    history: list[ValidationEvent] = field(default_factory=list)

    def validation_frames(self, position: int) -> list[MarketFrame]:
        start = max(0, position - self.switch_config.period_days)
        return list(self.dataset.frames[start : position + 1])

    def fine_tune(self, position: int) -> None:
        timesteps = self.switch_config.fine_tune_timesteps
        if timesteps == 0:
            return
        start = 0
        if self.training_window is not None:
            start = self.dataset.position_of(self.training_window.start)
        frames = self.dataset.frames[start : position + 1]
        for i, agent in enumerate(self.agents):
            if isinstance(agent, AgentPolicy):
                hp = replace(agent.hyperparameters, total_timesteps=timesteps)
                self.agents[i] = train_agent(
                    agent.algorithm,
                    self.env_config,
                    frames,
                    hp,
                    agent.seed,
                    name=agent.name,
                    initial_policy=agent,
                )

    def select(
        self,
        position: int,
        reason: SwitchReason,
        previous: PeriodSentiment | None = None,
        current: PeriodSentiment | None = None,
    ) -> int | None:
        if reason is not SwitchReason.INITIAL:
            self.fine_tune(position)
        scores = validate_agents(
            self.agents,
            self.validation_frames(position),
            self.env_config,
            self.switch_config,
            self.seed,
            self.workers,
        )
        day = self.dataset.dates[position]
        try:
            chosen = select_agent(scores)
        except NoValidScores:
            if reason is SwitchReason.INITIAL:
                raise
            logger.warning("No valid validation scores on %s, keeping current agent", day)
            chosen = None
        self.history.append(
            ValidationEvent(
                day,
                reason,
                tuple(scores),
                chosen,
                None if previous is None else previous.score,
                None if current is None else current.score,
            )
        )
        if chosen is not None:
            self.timeline.append(
                TimelineEntry(day, chosen, self.agents[chosen].name, reason)
            )
            logger.info(
                "Selected %s on %s (%s)", self.agents[chosen].name, day, reason.value
            )
        return chosen

    def run(
        self,
        strategy: str,
        evaluation_window: DateWindow,
        check: Callable[[int, int], tuple[SwitchReason, PeriodSentiment | None, PeriodSentiment | None] | None],
    ) -> tuple[BacktestReport, AgentTimeline]:
        lo, hi = self.dataset.positions(evaluation_window)
        frames = self.dataset.frames[lo : hi + 1]
        active = self.select(lo, SwitchReason.INITIAL)
        rng = make_rng(self.seed)
        state = reset(self.env_config, frames)
        values = [portfolio_value(state)]
        trades = []
        for k in range(len(frames) - 1):
            if k > 0:
                trigger = check(k, lo + k)
                if trigger is not None:
                    reason, previous, current = trigger
                    chosen = self.select(lo + k, reason, previous, current)
                    if chosen is not None:
                        active = chosen
            action = self.agents[active].decide(state, self.env_config, rng)
            outcome = execute_step(state, action, frames, self.env_config)
            state = outcome.state
            trades.extend(outcome.trades)
            values.append(portfolio_value(state))

        report = BacktestReport.build(
            strategy,
            [frame.date for frame in frames],
            values,
            trades,
            self.dataset.tickers,
            self.switch_config.risk_free,
            timeline=self.timeline,
            validation_history=self.history,
        )
        return report, self.timeline


def run_ensemble(
    agents: Sequence["AgentSpec | TradingPolicy"],
    dataset: Dataset,
    headlines: Sequence[Headline],
    lexicon: Lexicon,
    switch_config: SwitchConfig,
    env_config: EnvConfig,
    seed: int = 0,
    *,
    evaluation_window: DateWindow,
    training_window: DateWindow | None = None,
    workers: int = 1,
) -> tuple[BacktestReport, AgentTimeline]:
    """Sentiment-triggered ensemble backtest.

    Agents given as :class:`AgentSpec` are first trained on
    ``training_window``. The best agent on the period before the evaluation
    window trades first. At every check point the trailing sentiment is
    compared with the previous one; when :func:`should_switch` fires, every
    agent is re-validated on the trailing period and the best one takes over.

    In daily cadence the previous sentiment is a reference: the trailing
    sentiment at the start (or the first defined one after it). After a
    trigger, checks pause until the trailing window lies entirely after the
    trigger day; the sentiment of that window becomes the new reference. One
    shift therefore fires once, however many ``beta`` it spans. In
    period-boundary cadence the previous sentiment is that of the period
    before the one that just ended.

    Parameters
    ----------
    agents : Sequence[AgentSpec or TradingPolicy]
        Ensemble members, specs to train or ready policies.
    dataset : Dataset
        Market history covering the training and evaluation windows.
    headlines : Sequence[Headline]
        News headlines; may be empty (then no switch ever fires).
    lexicon : Lexicon
        Valence lexicon for headline scoring.
    switch_config : SwitchConfig
        Selection and trigger settings.
    env_config : EnvConfig
        Trading constraints.
    seed : int, optional
        Seed of validation and trading generators.
    evaluation_window : DateWindow
        Dates to trade over.
    training_window : DateWindow or None, optional
        Dates to train specs on.
    workers : int, optional
        Concurrent training and validation workers. Default is 1.

    Returns
    -------
    tuple of (BacktestReport, AgentTimeline)
        The report (whose ``timeline`` is the returned timeline).

    Raises
    ------
    NoValidScores
        If no agent has a validation score at the initial selection.
    """
    members = _prepare_agents(agents, dataset, training_window, env_config, workers)
    controller = _Controller(
        members, dataset, switch_config, env_config, seed, workers, training_window
    )
    index = SentimentIndex(headlines, lexicon)
    dates = dataset.dates
    window_days = switch_config.sentiment_window
    period = switch_config.period_days
    lo, _ = dataset.positions(evaluation_window)
    reference = index.period(_trailing_window(dates, lo, window_days))
    # first position whose trailing window excludes the last trigger day
    settles_at: int | None = None

    def fire(position: int, previous, current):
        if not should_switch(previous, current, switch_config):
            return None
        _log_trigger(dates[position], previous, current, switch_config)
        return SwitchReason.SENTIMENT_SWITCH, previous, current

    def check_daily(k: int, position: int):
        nonlocal reference, settles_at
        current = index.period(_trailing_window(dates, position, window_days))
        if settles_at is not None:
            if position < settles_at:
                return None
            settles_at = None
            reference = current
            return None
        if reference.score is None:
            reference = current
            return None
        trigger = fire(position, reference, current)
        if trigger is not None:
            settles_at = position + window_days
        return trigger

    def check_boundary(k: int, position: int):
        if k % period != 0:
            return None
        current = index.period(_trailing_window(dates, position, window_days))
        previous = None
        if position - window_days >= 0:
            previous = index.period(
                _trailing_window(dates, position - window_days, window_days)
            )
        return fire(position, previous, current)

    check = check_daily
    if switch_config.check_cadence is CheckCadence.PERIOD_BOUNDARY:
        check = check_boundary
    return controller.run("sentiment_ensemble", evaluation_window, check)


def run_fixed_period_ensemble(
    agents: Sequence["AgentSpec | TradingPolicy"],
    dataset: Dataset,
    switch_config: SwitchConfig,
    env_config: EnvConfig,
    seed: int = 0,
    *,
    evaluation_window: DateWindow,
    training_window: DateWindow | None = None,
    workers: int = 1,
) -> tuple[BacktestReport, AgentTimeline]:
    """Conventional ensemble: re-validate and re-select every ``period_days``.

    Sentiment is not used. Boundaries fall every ``period_days`` evaluation
    days, excluding the first and last day.
    """
    members = _prepare_agents(agents, dataset, training_window, env_config, workers)
    controller = _Controller(
        members, dataset, switch_config, env_config, seed, workers, training_window
    )
    period = switch_config.period_days

    def check(k: int, position: int):
        if k % period == 0:
            return SwitchReason.SCHEDULED_REEVALUATION, None, None
        return None

    return controller.run("fixed_ensemble", evaluation_window, check)


def chi_values(history: Sequence[ValidationEvent]) -> list[np.ndarray]:
    """Chi of every agent at every validation round (NaN where undefined)."""
    return [
        np.array([np.nan if s.chi is None else s.chi for s in event.scores])
        for event in history
    ]
