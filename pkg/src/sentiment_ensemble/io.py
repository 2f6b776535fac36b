"""File I/O for sentiment-ensemble.

This module reads and writes the package's on-disk formats: OHLCV market
CSVs, per-line JSON headline files, AFINN-style lexicons and trained-policy
checkpoints.
"""

import bisect
import datetime as dt
import io
import json
import logging
import re
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd
import yaml

from sentiment_ensemble.agents import AgentHyperparameters, AgentPolicy, Algorithm
from sentiment_ensemble.dates import DateWindow, parse_date
from sentiment_ensemble.errors import (
    DataError,
    DataGap,
    EmptyData,
    InsufficientData,
    NonPositivePrice,
    ParseError,
)
from sentiment_ensemble.market_env import MarketFrame
from sentiment_ensemble.nn import MlpParams, params_to_dict
from sentiment_ensemble.sentiment import Headline, Lexicon, load_lexicon

logger = logging.getLogger(__name__)

#: Exact header of market CSV files
MARKET_COLUMNS = ("date", "ticker", "open", "high", "low", "close", "volume")

#: Fields of every headline record
HEADLINE_FIELDS = ("date", "source", "headline")

#: Lexicon shipped with the package
BUNDLED_LEXICON = "lexicon_subset.tsv"

POLICY_METADATA = "policy.yaml"
POLICY_ARRAYS = "params.npz"
POLICY_FORMAT_VERSION = 1

_PANDAS_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rectangular daily market history.

    Attributes
    ----------
    frames : tuple of MarketFrame
        One frame per trading day, ``day_index`` equal to its position.
    tickers : tuple of str
        Ticker symbols in column order.
    open, high, low, volume : numpy.ndarray
        ``(days, tickers)`` matrices kept for format compatibility; only
        close prices feed the environment.
    """

    frames: tuple[MarketFrame, ...]
    tickers: tuple[str, ...]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    volume: np.ndarray

    def __post_init__(self) -> None:
        if not self.frames:
            raise EmptyData("A dataset needs at least one trading day")
        for earlier, later in zip(self.frames, self.frames[1:]):
            if later.date <= earlier.date:
                raise ValueError(f"Dates must increase, got {later.date} after {earlier.date}")
        shape = (len(self.frames), len(self.tickers))
        for name in ("open", "high", "low", "volume"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if array.shape != shape:
                raise ValueError(f"{name} has shape {array.shape}, expected {shape}")
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @classmethod
    def from_closes(
        cls,
        dates: Sequence[dt.date],
        tickers: Sequence[str],
        closes: np.ndarray,
        open: np.ndarray | None = None,
        high: np.ndarray | None = None,
        low: np.ndarray | None = None,
        volume: np.ndarray | None = None,
    ) -> "Dataset":
        """Build a dataset from a ``(days, tickers)`` close matrix.

        Missing OHLV matrices default to the closes (volume to zero).
        """
        closes = np.asarray(closes, dtype=np.float64)
        frames = tuple(
            MarketFrame(day_index=i, date=day, close_prices=closes[i])
            for i, day in enumerate(dates)
        )
        return cls(
            frames=frames,
            tickers=tuple(tickers),
            open=closes if open is None else open,
            high=closes if high is None else high,
            low=closes if low is None else low,
            volume=np.zeros_like(closes) if volume is None else volume,
        )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dates(self) -> list[dt.date]:
        return [frame.date for frame in self.frames]

    @property
    def closes(self) -> np.ndarray:
        return np.stack([frame.close_prices for frame in self.frames])

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    def position_of(self, day: dt.date) -> int:
        """Position of the first trading day on or after ``day``."""
        return bisect.bisect_left(self.dates, day)

    def positions(self, window: DateWindow) -> tuple[int, int]:
        """Inclusive positions of the first and last trading days inside ``window``.

        Raises
        ------
        InsufficientData
            If no trading day falls inside the window.
        """
        dates = self.dates
        lo = bisect.bisect_left(dates, window.start)
        hi = bisect.bisect_right(dates, window.end) - 1
        if hi < lo:
            raise InsufficientData(f"No trading days in {window}", window=str(window))
        return lo, hi

    def window_frames(self, window: DateWindow) -> list[MarketFrame]:
        lo, hi = self.positions(window)
        return list(self.frames[lo : hi + 1])

    def slice(self, window: DateWindow) -> "Dataset":
        """Dataset restricted to the trading days inside ``window``."""
        lo, hi = self.positions(window)
        return Dataset(
            frames=self.frames[lo : hi + 1],
            tickers=self.tickers,
            open=self.open[lo : hi + 1],
            high=self.high[lo : hi + 1],
            low=self.low[lo : hi + 1],
            volume=self.volume[lo : hi + 1],
        )


def _parse_error_line(err: Exception) -> int:
    match = _PANDAS_LINE.search(str(err))
    return int(match.group(1)) if match else 1


def load_market_csv(raw_text: str) -> Dataset:
    """Parse an OHLCV market CSV into a rectangular dataset.

    Parameters
    ----------
    raw_text : str
        CSV content with header ``date,ticker,open,high,low,close,volume``.

    Returns
    -------
    Dataset
        Frames sorted by date, tickers sorted alphabetically.

    Raises
    ------
    ParseError
        If the header is wrong, a row has the wrong field count, a field does
        not parse, or a ``(date, ticker)`` pair repeats.
    NonPositivePrice
        If a close price is zero or negative.
    DataGap
        If a ticker has no row on some trading date.
    EmptyData
        If the file has no data rows.

    Examples
    --------
    >>> text = "date,ticker,open,high,low,close,volume\\n2020-01-02,AAA,1,1,1,1,10\\n"
    >>> load_market_csv(text).tickers
    ('AAA',)
    """
    lines = raw_text.splitlines()
    header = lines[0].strip() if lines else ""
    if header != ",".join(MARKET_COLUMNS):
        raise ParseError(
            f"Expected header {','.join(MARKET_COLUMNS)!r}, got {header!r}", line_number=1
        )
    try:
        table = pd.read_csv(
            io.StringIO(raw_text),
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.ParserError as err:
        raise ParseError(str(err), line_number=_parse_error_line(err)) from err

    table = table[~(table.isna() | (table == "")).all(axis=1)]
    if table.empty:
        raise EmptyData("Market file has no data rows")

    line_numbers = table.index.to_numpy() + 2
    dates = pd.to_datetime(table["date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    bad = dates.isna().to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise ParseError(
            f"Invalid date {table['date'].iloc[row]!r}", line_number=int(line_numbers[row])
        )
    tickers = table["ticker"].str.strip()
    missing_ticker = (tickers.isna() | (tickers == "")).to_numpy()
    if missing_ticker.any():
        row = int(np.argmax(missing_ticker))
        raise ParseError("Missing ticker", line_number=int(line_numbers[row]))

    values = {}
    for column in MARKET_COLUMNS[2:]:
        parsed = pd.to_numeric(table[column].str.strip(), errors="coerce")
        invalid = (parsed.isna() | ~np.isfinite(parsed)).to_numpy()
        if invalid.any():
            row = int(np.argmax(invalid))
            raise ParseError(
                f"Invalid {column} value {table[column].iloc[row]!r}",
                line_number=int(line_numbers[row]),
            )
        values[column] = parsed.to_numpy(dtype=np.float64)

    frame = pd.DataFrame(
        {"date": dates.dt.date.to_numpy(), "ticker": tickers.to_numpy(), **values}
    )
    frame["line"] = line_numbers

    duplicated = frame.duplicated(["date", "ticker"]).to_numpy()
    if duplicated.any():
        row = int(np.argmax(duplicated))
        raise ParseError(
            f"Duplicate row for {frame['ticker'].iloc[row]} on {frame['date'].iloc[row]}",
            line_number=int(frame["line"].iloc[row]),
        )
    non_positive = (frame["close"] <= 0).to_numpy()
    if non_positive.any():
        row = int(np.argmax(non_positive))
        raise NonPositivePrice(
            f"line {int(frame['line'].iloc[row])}: close price "
            f"{frame['close'].iloc[row]} of {frame['ticker'].iloc[row]} on "
            f"{frame['date'].iloc[row]} is not positive",
            line_number=int(frame["line"].iloc[row]),
        )

    symbols = sorted(frame["ticker"].unique())
    calendar = sorted(frame["date"].unique())
    indexed = frame.set_index(["date", "ticker"]).sort_index()
    full_index = pd.MultiIndex.from_product([calendar, symbols], names=["date", "ticker"])
    missing = full_index.difference(indexed.index)
    if len(missing):
        day, ticker = missing[0]
        raise DataGap(day.isoformat(), ticker)

    grid = indexed.reindex(full_index)
    shape = (len(calendar), len(symbols))

    def matrix(column: str) -> np.ndarray:
        return grid[column].to_numpy(dtype=np.float64).reshape(shape)

    dataset = Dataset.from_closes(
        calendar,
        symbols,
        matrix("close"),
        open=matrix("open"),
        high=matrix("high"),
        low=matrix("low"),
        volume=matrix("volume"),
    )
    logger.info(
        "Loaded %d trading days of %d tickers (%s..%s)",
        len(calendar),
        len(symbols),
        calendar[0],
        calendar[-1],
    )
    return dataset


def dump_market_csv(dataset: Dataset) -> str:
    """Serialize a dataset in the format read by :func:`load_market_csv`."""
    days, n_tickers = len(dataset), dataset.n_tickers
    table = pd.DataFrame(
        {
            "date": np.repeat([day.isoformat() for day in dataset.dates], n_tickers),
            "ticker": np.tile(dataset.tickers, days),
            "open": dataset.open.ravel(),
            "high": dataset.high.ravel(),
            "low": dataset.low.ravel(),
            "close": dataset.closes.ravel(),
            "volume": dataset.volume.ravel(),
        },
        columns=list(MARKET_COLUMNS),
    )
    return table.to_csv(index=False, lineterminator="\n")


def load_headlines(raw_text: str) -> list[Headline]:
    """Parse per-line JSON headline records.

    Each non-blank line is an object with string fields ``date``
    (``yyyy-mm-dd``), ``source`` and ``headline``. Records are returned sorted
    by date, keeping file order within a day.

    Raises
    ------
    ParseError
        If a line is not a JSON object, lacks a field, or has an invalid date
        or an empty headline.
    """
    headlines = []
    for line_number, line in enumerate(raw_text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise ParseError(f"Invalid JSON: {err.msg}", line_number) from err
        if not isinstance(record, dict):
            raise ParseError("Expected a JSON object", line_number)
        for name in HEADLINE_FIELDS:
            if not isinstance(record.get(name), str):
                raise ParseError(f"Missing or non-text field {name!r}", line_number)
        try:
            day = parse_date(record["date"])
        except ValueError as err:
            raise ParseError(f"Invalid date {record['date']!r}", line_number) from err
        try:
            headlines.append(Headline(day, record["source"], record["headline"]))
        except ValueError as err:
            raise ParseError(str(err), line_number) from err
    headlines.sort(key=lambda headline: headline.date)
    return headlines


def dump_headlines(headlines: Iterable[Headline]) -> str:
    """Serialize headlines in the format read by :func:`load_headlines`."""
    return "".join(
        json.dumps(
            {"date": h.date.isoformat(), "source": h.source, "headline": h.text},
            ensure_ascii=False,
        )
        + "\n"
        for h in headlines
    )


def read_text(path: Path) -> str:
    """Read a UTF-8 input file, reporting a missing file as a data error."""
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as err:
        raise DataError(f"Input file not found: {path}", path=str(path)) from err


def load_market_file(path: Path) -> Dataset:
    return load_market_csv(read_text(path))


def load_headlines_file(path: Path) -> list[Headline]:
    headlines = load_headlines(read_text(path))
    logger.info("Loaded %d headlines from %s", len(headlines), path)
    return headlines


def load_lexicon_file(path: Path) -> Lexicon:
    lexicon = load_lexicon(read_text(path), name=Path(path).stem)
    logger.info("Loaded lexicon %s with %d entries", lexicon.name, len(lexicon))
    return lexicon


def bundled_lexicon() -> Lexicon:
    """The small AFINN-style lexicon shipped with the package."""
    source = resources.files("sentiment_ensemble") / "data" / BUNDLED_LEXICON
    return load_lexicon(source.read_text(encoding="utf-8"), name="lexicon-subset")


def _network_arrays(prefix: str, params: MlpParams) -> dict[str, np.ndarray]:
    return {f"{prefix}/{i}": array for i, array in enumerate(params.arrays())}


def _restore_network(prefix: str, meta: dict, arrays: Any) -> MlpParams:
    count = 2 * len(meta["activations"])
    try:
        layers = [np.array(arrays[f"{prefix}/{i}"]) for i in range(count)]
    except KeyError as err:
        raise DataError(f"Checkpoint is missing array {err.args[0]}") from err
    return MlpParams.from_arrays(layers, meta["activations"])


def save_policy(policy: AgentPolicy, directory: Path) -> Path:
    """Write a policy checkpoint: ``policy.yaml`` metadata plus ``params.npz``.

    Parameters
    ----------
    policy : AgentPolicy
        Policy to save.
    directory : Path
        Checkpoint directory, created if missing.

    Returns
    -------
    Path
        The checkpoint directory.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hyperparameters = asdict(policy.hyperparameters)
    hyperparameters["hidden_sizes"] = list(policy.hyperparameters.hidden_sizes)
    window = policy.training_window
    metadata = {
        "format_version": POLICY_FORMAT_VERSION,
        "algorithm": policy.algorithm.value,
        "name": policy.name,
        "seed": int(policy.seed),
        "initial_balance": float(policy.initial_balance),
        "h_max": int(policy.h_max),
        "training_window": None
        if window is None
        else {"start": window.start.isoformat(), "end": window.end.isoformat()},
        "hyperparameters": hyperparameters,
        "networks": {
            "actor": params_to_dict(policy.actor),
            "critics": [params_to_dict(c) for c in policy.critics],
            "target_actor": None
            if policy.target_actor is None
            else params_to_dict(policy.target_actor),
            "target_critics": [params_to_dict(c) for c in policy.target_critics],
        },
        "episode_returns": [float(r) for r in policy.episode_returns],
    }
    arrays = {"base_prices": policy.base_prices, **_network_arrays("actor", policy.actor)}
    for i, critic in enumerate(policy.critics):
        arrays.update(_network_arrays(f"critic{i}", critic))
    if policy.target_actor is not None:
        arrays.update(_network_arrays("target_actor", policy.target_actor))
    for i, critic in enumerate(policy.target_critics):
        arrays.update(_network_arrays(f"target_critic{i}", critic))
    if policy.log_std is not None:
        arrays["log_std"] = policy.log_std

    with open(directory / POLICY_METADATA, mode="w", encoding="utf-8") as file:
        yaml.dump(
            metadata,
            file,
            default_flow_style=False,
            allow_unicode=True,
            indent=2,
            sort_keys=False,
        )
    with open(directory / POLICY_ARRAYS, mode="wb") as file:
        np.savez(file, **arrays)
    logger.info("Saved policy %s to %s", policy.name, directory)
    return directory


def load_policy(directory: Path) -> AgentPolicy:
    """Read a checkpoint written by :func:`save_policy`.

    Raises
    ------
    DataError
        If a checkpoint file is missing, malformed, or of another format version.
    """
    directory = Path(directory)
    try:
        with open(directory / POLICY_METADATA, encoding="utf-8") as file:
            metadata = yaml.safe_load(file)
    except FileNotFoundError as err:
        raise DataError(f"No policy checkpoint in {directory}") from err
    if not isinstance(metadata, dict):
        raise DataError(f"{POLICY_METADATA} must be a YAML mapping")
    version = metadata.get("format_version")
    if version != POLICY_FORMAT_VERSION:
        raise DataError(
            f"Unsupported checkpoint format version {version!r}",
            expected=POLICY_FORMAT_VERSION,
        )

    try:
        with np.load(directory / POLICY_ARRAYS, allow_pickle=False) as arrays:
            networks = metadata["networks"]
            actor = _restore_network("actor", networks["actor"], arrays)
            critics = tuple(
                _restore_network(f"critic{i}", meta, arrays)
                for i, meta in enumerate(networks["critics"])
            )
            target_actor = None
            if networks["target_actor"] is not None:
                target_actor = _restore_network(
                    "target_actor", networks["target_actor"], arrays
                )
            target_critics = tuple(
                _restore_network(f"target_critic{i}", meta, arrays)
                for i, meta in enumerate(networks["target_critics"])
            )
            base_prices = np.array(arrays["base_prices"])
            log_std = np.array(arrays["log_std"]) if "log_std" in arrays.files else None
    except FileNotFoundError as err:
        raise DataError(f"No {POLICY_ARRAYS} in {directory}") from err
    except KeyError as err:
        raise DataError(f"Checkpoint metadata is missing {err.args[0]!r}") from err

    window = metadata.get("training_window")
    return AgentPolicy(
        algorithm=Algorithm.parse(metadata["algorithm"]),
        actor=actor,
        critics=critics,
        hyperparameters=AgentHyperparameters(**metadata["hyperparameters"]),
        seed=metadata["seed"],
        base_prices=base_prices,
        initial_balance=metadata["initial_balance"],
        h_max=metadata["h_max"],
        target_actor=target_actor,
        target_critics=target_critics,
        log_std=log_std,
        name=metadata["name"],
        training_window=None
        if window is None
        else DateWindow.parse(window["start"], window["end"]),
        episode_returns=tuple(metadata.get("episode_returns", ())),
    )
