"""Backtest results and their on-disk layout.

A run directory holds:

- ``report.json``: config echo, metrics, timeline and validation history;
- ``equity.csv``: ``date,account_value`` per evaluation day;
- ``trades.csv``: ``date,ticker,shares,price,cost`` per executed trade;
- ``timeline.csv``: ``date,agent,reason`` per agent selection;
- ``metrics.csv``: one header row of metric labels and one row of values.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Sequence

import pandas as pd

from sentiment_ensemble.market_env import TradeRecord
from sentiment_ensemble.metrics import METRIC_LABELS, MetricsReport, full_report

if TYPE_CHECKING:
    from sentiment_ensemble.ensemble import AgentTimeline, ValidationEvent

logger = logging.getLogger(__name__)

REPORT_FILENAME = "report.json"
EQUITY_FILENAME = "equity.csv"
TRADES_FILENAME = "trades.csv"
TIMELINE_FILENAME = "timeline.csv"
METRICS_FILENAME = "metrics.csv"


@dataclass
class BacktestReport:
    """Everything one strategy produced over the evaluation window.

    Attributes
    ----------
    strategy : str
        Strategy label, e.g. ``"sentiment_ensemble"`` or ``"single:DDPG"``.
    dates : list of datetime.date
        Evaluation trading days.
    account_values : list of float
        Account value at the close of each evaluation day.
    trades : list of TradeRecord
        Executed trades, in execution order.
    tickers : tuple of str
        Ticker symbols, indexed by ``TradeRecord.ticker``.
    metrics : MetricsReport
        Metrics of ``account_values``.
    timeline : AgentTimeline or None
        Agent selections; None for strategies without agents.
    validation_history : list of ValidationEvent
        Every validation round with its scores.
    config : dict
        Echo of the configuration that produced the report.
    """

    strategy: str
    dates: list[dt.date]
    account_values: list[float]
    trades: list[TradeRecord]
    tickers: tuple[str, ...]
    metrics: MetricsReport
    timeline: AgentTimeline | None = None
    validation_history: list[ValidationEvent] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        strategy: str,
        dates: Sequence[dt.date],
        account_values: Sequence[float],
        trades: Sequence[TradeRecord],
        tickers: Sequence[str],
        risk_free: float = 0.0,
        **extra: Any,
    ) -> BacktestReport:
        """Assemble a report, computing its metrics from ``account_values``."""
        return cls(
            strategy=strategy,
            dates=list(dates),
            account_values=list(account_values),
            trades=list(trades),
            tickers=tuple(tickers),
            metrics=full_report(account_values, risk_free),
            **extra,
        )

    @property
    def cumulative_returns(self) -> list[float]:
        start = self.account_values[0]
        return [value / start - 1.0 for value in self.account_values]

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy,
            "config": self.config,
            "start_date": self.dates[0].isoformat(),
            "end_date": self.dates[-1].isoformat(),
            "days": len(self.dates),
            "final_value": self.account_values[-1],
            "trade_count": len(self.trades),
            "metrics": self.metrics.to_dict(),
            "timeline": [] if self.timeline is None else self.timeline.to_rows(),
            "validation_history": [event.to_dict() for event in self.validation_history],
        }


def _csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n", na_rep="")


def equity_csv(report: BacktestReport) -> str:
    return _csv_text(
        pd.DataFrame(
            {
                "date": [day.isoformat() for day in report.dates],
                "account_value": pd.Series(report.account_values, dtype="float64"),
            }
        )
    )


def trades_csv(report: BacktestReport) -> str:
    trades = report.trades
    return _csv_text(
        pd.DataFrame(
            {
                "date": [t.date.isoformat() for t in trades],
                "ticker": [report.tickers[t.ticker] for t in trades],
                "shares": pd.Series([t.shares for t in trades], dtype="int64"),
                "price": pd.Series([t.price for t in trades], dtype="float64"),
                "cost": pd.Series([t.cost for t in trades], dtype="float64"),
            }
        )
    )


def timeline_csv(report: BacktestReport) -> str:
    rows = [] if report.timeline is None else report.timeline.to_rows()
    return _csv_text(pd.DataFrame(rows, columns=["date", "agent", "reason"]))


def metrics_csv(report: BacktestReport) -> str:
    values = report.metrics.to_dict()
    return _csv_text(
        pd.DataFrame(
            {label: pd.Series([value], dtype="float64") for label, value in values.items()}
        )
    )


def metrics_table_csv(columns: dict[str, MetricsReport]) -> str:
    """Metric rows by strategy columns, the layout of comparison tables."""
    table = {"metric": pd.Series(list(METRIC_LABELS.values()))}
    for name, metrics in columns.items():
        values = [getattr(metrics, key) for key in METRIC_LABELS]
        table[name] = pd.Series(values, dtype="float64")
    return _csv_text(pd.DataFrame(table))


def write_report(report: BacktestReport, run_dir: Path) -> Path:
    """Write every file of a report into ``run_dir`` (created if missing).

    Runs are laid out by name and seed, so rerunning a configuration replaces
    its earlier files; a warning is logged when that happens.

    Returns
    -------
    Path
        The run directory.
    """
    if (run_dir / REPORT_FILENAME).exists():
        logger.warning("Overwriting existing %s report in %s", report.strategy, run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / REPORT_FILENAME, mode="w", encoding="utf-8") as file:
        json.dump(report.to_dict(), file, indent=2, allow_nan=False)
        file.write("\n")
    for filename, text in (
        (EQUITY_FILENAME, equity_csv(report)),
        (TRADES_FILENAME, trades_csv(report)),
        (TIMELINE_FILENAME, timeline_csv(report)),
        (METRICS_FILENAME, metrics_csv(report)),
    ):
        (run_dir / filename).write_text(text, encoding="utf-8")
    logger.info("Wrote %s report to %s", report.strategy, run_dir)
    return run_dir
