"""Seeded synthetic markets with regime-linked headline sentiment.

Prices follow a geometric random walk whose drift and volatility change at
regime boundaries. Every trading day gets a batch of headlines built from
lexicon words of a single valence, drawn so that the expected headline score
equals the regime's sentiment level.
"""

import datetime as dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from sentiment_ensemble.io import Dataset, bundled_lexicon
from sentiment_ensemble.seeding import make_rng, spawn_seeds
from sentiment_ensemble.sentiment import MAX_VALENCE, MIN_VALENCE, Headline, Lexicon

logger = logging.getLogger(__name__)

#: Words absent from any valence lexicon, used for neutral headlines
NEUTRAL_WORDS = (
    "analysts",
    "index",
    "investors",
    "market",
    "quarter",
    "report",
    "sector",
    "shares",
    "stocks",
    "traders",
)

SOURCE = "synthetic"


@dataclass(frozen=True)
class Regime:
    """Market behaviour from ``start_day`` until the next regime starts.

    Attributes
    ----------
    start_day : int
        First trading day (0-based) of the regime.
    drift : float
        Expected daily log-return before the volatility correction.
    volatility : float
        Daily log-return standard deviation.
    sentiment : float
        Mean headline sentiment, in [-5, 5].
    """

    start_day: int
    drift: float = 0.0
    volatility: float = 0.0
    sentiment: float = 0.0

    def __post_init__(self) -> None:
        if self.start_day < 0:
            raise ValueError("Regime start_day must be nonnegative")
        if self.volatility < 0:
            raise ValueError("Regime volatility must be nonnegative")
        if not MIN_VALENCE <= self.sentiment <= MAX_VALENCE:
            raise ValueError(
                f"Regime sentiment {self.sentiment} is outside [{MIN_VALENCE}, {MAX_VALENCE}]"
            )


@dataclass(frozen=True)
class SyntheticSpec:
    """What to generate.

    Attributes
    ----------
    tickers : int
        Number of tickers.
    days : int
        Number of trading days.
    regimes : tuple of Regime
        Regimes with strictly increasing start days, the first starting at 0.
    seed : int
        Seed of every random draw.
    initial_price : float
        Close price of every ticker on day 0.
    start_date : datetime.date
        First calendar date; trading days are business days from here.
    headlines_per_day : int
        Headlines generated per trading day.
    words_per_headline : int
        Words per generated headline.
    """

    tickers: int
    days: int
    regimes: tuple[Regime, ...] = field(default=(Regime(0),))
    seed: int = 0
    initial_price: float = 100.0
    start_date: dt.date = dt.date(2010, 1, 4)
    headlines_per_day: int = 15
    words_per_headline: int = 6

    def __post_init__(self) -> None:
        regimes = tuple(
            r if isinstance(r, Regime) else Regime(**r) for r in self.regimes
        )
        object.__setattr__(self, "regimes", regimes)
        if self.tickers < 1:
            raise ValueError("tickers must be at least 1")
        if self.days < 1:
            raise ValueError("days must be at least 1")
        if not regimes or regimes[0].start_day != 0:
            raise ValueError("The first regime must start on day 0")
        starts = [r.start_day for r in regimes]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("Regime start days must be strictly increasing")
        if not self.initial_price > 0:
            raise ValueError("initial_price must be positive")
        if self.headlines_per_day < 0:
            raise ValueError("headlines_per_day must be nonnegative")
        if self.words_per_headline < 1:
            raise ValueError("words_per_headline must be at least 1")

    def regime_at(self, day: int) -> Regime:
        current = self.regimes[0]
        for regime in self.regimes:
            if regime.start_day > day:
                break
            current = regime
        return current


def _words_by_valence(lexicon: Lexicon) -> dict[int, list[str]]:
    words: dict[int, list[str]] = {}
    for term, valence in sorted(lexicon.entries.items()):
        if " " not in term and valence != 0:
            words.setdefault(valence, []).append(term)
    words[0] = list(NEUTRAL_WORDS)
    return words


def _prices(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    closes = np.empty((spec.days, spec.tickers), dtype=np.float64)
    closes[0] = spec.initial_price
    shocks = rng.standard_normal((spec.days - 1, spec.tickers))
    for t in range(1, spec.days):
        regime = spec.regime_at(t)
        vol = regime.volatility
        log_return = regime.drift - 0.5 * vol * vol + vol * shocks[t - 1]
        closes[t] = closes[t - 1] * np.exp(log_return)
    return closes


def _headline_valence(level: float, rng: np.random.Generator) -> int:
    low = math.floor(level)
    if low == level:
        return int(low)
    return int(low) + int(rng.random() < level - low)


def generate_synthetic(
    spec: SyntheticSpec, lexicon: Lexicon | None = None
) -> tuple[Dataset, list[Headline]]:
    """Generate a market dataset and matching headlines.

    Parameters
    ----------
    spec : SyntheticSpec
        Generation settings.
    lexicon : Lexicon or None, optional
        Source of valence words. Defaults to the bundled lexicon.

    Returns
    -------
    tuple of (Dataset, list of Headline)
        The market and its date-sorted headlines.

    Raises
    ------
    ValueError
        If the lexicon has no single word of a valence a regime needs.

    Examples
    --------
    >>> spec = SyntheticSpec(tickers=1, days=3, regimes=(Regime(0),))
    >>> dataset, _ = generate_synthetic(spec)
    >>> dataset.closes[:, 0].tolist()
    [100.0, 100.0, 100.0]
    """
    lexicon = lexicon or bundled_lexicon()
    words = _words_by_valence(lexicon)
    for regime in spec.regimes:
        for valence in {math.floor(regime.sentiment), math.ceil(regime.sentiment)}:
            if valence not in words:
                raise ValueError(
                    f"Lexicon {lexicon.name} has no single word of valence {valence}"
                )

    price_seed, headline_seed = spawn_seeds(spec.seed, 2)
    closes = _prices(spec, make_rng(price_seed))
    opens = np.vstack([closes[:1], closes[:-1]])
    dates = [ts.date() for ts in pd.bdate_range(spec.start_date, periods=spec.days)]
    tickers = [f"SYN{i:02d}" for i in range(spec.tickers)]
    dataset = Dataset.from_closes(
        dates,
        tickers,
        closes,
        open=opens,
        high=np.maximum(opens, closes),
        low=np.minimum(opens, closes),
        volume=np.full_like(closes, 1_000_000.0),
    )

    rng = make_rng(headline_seed)
    headlines = []
    for t, day in enumerate(dates):
        level = spec.regime_at(t).sentiment
        for _ in range(spec.headlines_per_day):
            pool = words[_headline_valence(level, rng)]
            picks = rng.integers(0, len(pool), spec.words_per_headline)
            text = " ".join(pool[i] for i in picks)
            headlines.append(Headline(day, SOURCE, text.capitalize()))

    logger.info(
        "Generated %d days of %d tickers with %d headlines (seed %d)",
        spec.days,
        spec.tickers,
        len(headlines),
        spec.seed,
    )
    return dataset, headlines
