"""Exception hierarchy for sentiment-ensemble.

Errors fall into three families, which the command-line interface maps to
exit codes:

- :class:`ConfigError` (exit code 1): invalid run configuration.
- :class:`DataError` (exit code 2): malformed or unusable input data.
- any other :class:`SentimentEnsembleError` (exit code 3): failures while
  training, trading or computing metrics.
"""

from typing import Any


class SentimentEnsembleError(Exception):
    """Base exception for every error raised by this package.

    Attributes
    ----------
    message : str
        The error message.
    details : dict
        Extra context about the failure (offending values, positions).
    """

    exit_code = 3

    def __init__(self, message: str, **details: Any):
        self.message = message
        self.details = details
        super().__init__(self.message)


class ConfigError(SentimentEnsembleError):
    """Raised when a run configuration is invalid."""

    exit_code = 1


class DataError(SentimentEnsembleError):
    """Raised when input data cannot be used."""

    exit_code = 2


class ParseError(DataError, ValueError):
    """Raised when a line of an input file cannot be parsed.

    Attributes
    ----------
    line_number : int
        1-based line number of the offending line.
    """

    def __init__(self, message: str, line_number: int, **details: Any):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}", **details)


class DataGap(DataError):
    """Raised when a ticker has no row on a trading date."""

    def __init__(self, date: str, ticker: str):
        self.date = date
        self.ticker = ticker
        super().__init__(
            f"Missing row for ticker {ticker!r} on {date}", date=date, ticker=ticker
        )


class NonPositivePrice(DataError):
    """Raised when a close price is zero or negative."""


class EmptyData(DataError):
    """Raised when a market data sequence is empty."""


class InsufficientData(DataError):
    """Raised when a data window is too short for the requested operation."""


class EmptyLexicon(DataError):
    """Raised when a lexicon source holds no valid entries."""


class EmptyHeadline(DataError):
    """Raised when a headline tokenizes to zero terms."""


class DimensionMismatch(SentimentEnsembleError, ValueError):
    """Raised when vector or matrix dimensions disagree."""


class EndOfData(SentimentEnsembleError):
    """Raised when stepping past the last market frame."""


class EmptyBatch(SentimentEnsembleError):
    """Raised when an update rule receives an empty batch."""


class NoValidScores(SentimentEnsembleError):
    """Raised when no agent has a usable validation score."""


class TooShort(SentimentEnsembleError):
    """Raised when a series is too short for a metric."""


class EmptyInput(SentimentEnsembleError):
    """Raised when a metric receives an empty sequence."""
