"""Return-series performance metrics.

Conventions
-----------
- 252 trading days per year; ``risk_free`` is an annual rate, applied daily
  as ``risk_free / 252``.
- Standard deviations are sample standard deviations (``ddof=1``).
- The Sortino downside deviation is the root mean square of the negative
  excess returns taken over *all* days.
- Percentiles use linear interpolation.
- Metrics that are undefined on a series (zero variance, no losses, no
  drawdown) are ``None`` rather than infinite or NaN.
"""

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from sentiment_ensemble.errors import EmptyInput, TooShort

TRADING_DAYS = 252

#: Report field names and their display labels, in report order
METRIC_LABELS = {
    "cumulative_return": "Cumulative Return",
    "annual_return": "Annual Return",
    "max_drawdown": "Maximum Drawdown",
    "annual_volatility": "Annual Volatility",
    "sharpe": "Sharpe Ratio",
    "sortino": "Sortino Ratio",
    "calmar": "Calmar Ratio",
    "omega": "Omega Ratio",
    "tail_ratio": "Tail Ratio",
    "stability": "Stability",
    "value_at_risk": "Value at Risk",
}


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Daily simple returns, optionally with their dates."""

    returns: np.ndarray
    dates: tuple | None = None

    def __post_init__(self) -> None:
        returns = np.array(self.returns, dtype=np.float64, copy=True)
        if returns.ndim != 1:
            raise ValueError("returns must be one-dimensional")
        if np.any(returns <= -1.0):
            raise ValueError("returns must be greater than -1")
        returns.setflags(write=False)
        object.__setattr__(self, "returns", returns)

    def __len__(self) -> int:
        return len(self.returns)

    @classmethod
    def from_values(cls, account_values: Sequence[float], dates=None) -> "ReturnSeries":
        values = np.asarray(account_values, dtype=np.float64)
        return cls(values[1:] / values[:-1] - 1.0, None if dates is None else tuple(dates[1:]))


@dataclass(frozen=True)
class MetricsReport:
    """Performance metrics of one equity curve; None marks an undefined metric."""

    cumulative_return: float | None
    annual_return: float | None
    max_drawdown: float | None
    annual_volatility: float | None
    sharpe: float | None
    sortino: float | None
    calmar: float | None
    omega: float | None
    tail_ratio: float | None
    stability: float | None
    value_at_risk: float | None

    def to_dict(self) -> dict[str, float | None]:
        """Values keyed by display label (``"Sharpe Ratio"``...)."""
        return {METRIC_LABELS[key]: value for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        by_label = {label: key for key, label in METRIC_LABELS.items()}
        values = {by_label.get(key, key): value for key, value in data.items()}
        return cls(**{f.name: values.get(f.name) for f in fields(cls)})


def _returns(series: "ReturnSeries | Sequence[float]") -> np.ndarray:
    if isinstance(series, ReturnSeries):
        return series.returns
    return ReturnSeries(series).returns


def _require_length(returns: np.ndarray, minimum: int = 2) -> None:
    if len(returns) < minimum:
        raise TooShort(
            f"Need at least {minimum} returns, got {len(returns)}", length=len(returns)
        )


def _daily_rate(risk_free: float) -> float:
    return risk_free / TRADING_DAYS


def sharpe_ratio(
    series: "ReturnSeries | Sequence[float]", risk_free: float = 0.0
) -> float | None:
    """Annualized Sharpe ratio ``mean(r - rf) / std(r) * sqrt(252)``.

    Returns
    -------
    float or None
        None when the returns have zero variance.

    Raises
    ------
    TooShort
        If there are fewer than two returns.
    """
    returns = _returns(series)
    _require_length(returns)
    std = np.std(returns, ddof=1)
    if std == 0:
        return None
    excess = returns - _daily_rate(risk_free)
    return float(np.mean(excess) / std * math.sqrt(TRADING_DAYS))


def sortino_ratio(
    series: "ReturnSeries | Sequence[float]", risk_free: float = 0.0
) -> float | None:
    """Annualized Sortino ratio, mean excess return over downside deviation.

    Returns
    -------
    float or None
        None when no day has a negative excess return.

    Raises
    ------
    TooShort
        If there are fewer than two returns.
    """
    returns = _returns(series)
    _require_length(returns)
    excess = returns - _daily_rate(risk_free)
    downside = np.minimum(excess, 0.0)
    if not np.any(downside < 0):
        return None
    downside_deviation = math.sqrt(np.mean(downside * downside))
    return float(np.mean(excess) / downside_deviation * math.sqrt(TRADING_DAYS))


def max_drawdown(account_values: Sequence[float]) -> float:
    """Worst peak-to-trough decline ``min(value / running_peak - 1)``, in [-1, 0].

    Raises
    ------
    EmptyInput
        If ``account_values`` is empty.
    """
    values = np.asarray(account_values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("max_drawdown needs at least one account value")
    peaks = np.maximum.accumulate(values)
    return float(min(0.0, np.min(values / peaks - 1.0)))


def omega_ratio(returns: np.ndarray) -> float | None:
    """Sum of gains over sum of losses at threshold 0; None without losses."""
    losses = -np.sum(returns[returns < 0])
    if losses == 0:
        return None
    return float(np.sum(returns[returns > 0]) / losses)


def tail_ratio(returns: np.ndarray) -> float | None:
    """``|95th percentile| / |5th percentile|``; None when the 5th percentile is 0."""
    low = abs(np.percentile(returns, 5))
    if low == 0:
        return None
    return float(abs(np.percentile(returns, 95)) / low)


def stability(returns: np.ndarray) -> float | None:
    """R-squared of a straight-line fit to cumulative log returns.

    None when the cumulative log return is constant.
    """
    cumulative = np.cumsum(np.log1p(returns))
    x = np.arange(len(cumulative), dtype=np.float64)
    dx = x - x.mean()
    dy = cumulative - cumulative.mean()
    ss_y = np.sum(dy * dy)
    if ss_y == 0:
        return None
    r_squared = np.sum(dx * dy) ** 2 / (np.sum(dx * dx) * ss_y)
    return float(min(1.0, max(0.0, r_squared)))


def value_at_risk(returns: np.ndarray, level: float = 5.0) -> float:
    """Historical daily value at risk: the ``level``-th percentile of returns."""
    return float(np.percentile(returns, level))


def full_report(account_values: Sequence[float], risk_free: float = 0.0) -> MetricsReport:
    """Every metric of an equity curve.

    Parameters
    ----------
    account_values : Sequence[float]
        Daily account values, at least three.
    risk_free : float, optional
        Annual risk-free rate. Default is 0.

    Returns
    -------
    MetricsReport
        All eleven metrics.

    Raises
    ------
    TooShort
        If fewer than three account values are given.
    """
    values = np.asarray(account_values, dtype=np.float64)
    if values.size < 3:
        raise TooShort(
            f"full_report needs at least 3 account values, got {values.size}",
            length=int(values.size),
        )
    returns = ReturnSeries.from_values(values).returns
    cumulative = float(values[-1] / values[0] - 1.0)
    annual = float((1.0 + cumulative) ** (TRADING_DAYS / len(returns)) - 1.0)
    drawdown = max_drawdown(values)
    return MetricsReport(
        cumulative_return=cumulative,
        annual_return=annual,
        max_drawdown=drawdown,
        annual_volatility=float(np.std(returns, ddof=1) * math.sqrt(TRADING_DAYS)),
        sharpe=sharpe_ratio(returns, risk_free),
        sortino=sortino_ratio(returns, risk_free),
        calmar=annual / abs(drawdown) if drawdown < 0 else None,
        omega=omega_ratio(returns),
        tail_ratio=tail_ratio(returns),
        stability=stability(returns),
        value_at_risk=value_at_risk(returns),
    )
