"""Calendar helpers shared by the data, sentiment and backtest modules."""

import datetime as dt
from dataclasses import dataclass


def parse_date(value: str | dt.date) -> dt.date:
    """Parse an ISO-8601 ``yyyy-mm-dd`` date.

    Parameters
    ----------
    value : str or datetime.date
        Text to parse. Dates (and datetimes, truncated) are returned as dates.

    Returns
    -------
    datetime.date
        The parsed date.

    Raises
    ------
    ValueError
        If the text is not a valid ISO-8601 calendar date.
    """
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip())


@dataclass(frozen=True)
class DateWindow:
    """Inclusive range of calendar dates."""

    start: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(
                f"Window start {self.start} is after window end {self.end}"
            )

    def __contains__(self, day: dt.date) -> bool:
        return self.start <= day <= self.end

    def __str__(self) -> str:
        return f"{self.start.isoformat()}..{self.end.isoformat()}"

    @classmethod
    def parse(cls, start: str | dt.date, end: str | dt.date) -> "DateWindow":
        return cls(parse_date(start), parse_date(end))
