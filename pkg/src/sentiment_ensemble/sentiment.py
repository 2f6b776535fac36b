"""Lexicon-based headline sentiment.

A headline's sentiment is the mean valence of its terms, where terms missing
from the lexicon score 0 but still count towards the headline length. A
period's sentiment is the mean of the sentiments of the headlines dated
inside it.

Examples
--------
>>> lexicon = load_lexicon("good\\t3\\nbad\\t-3")
>>> score_text("good bad day", lexicon)
0.0
"""

import bisect
import datetime as dt
import logging
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.errors import EmptyHeadline, EmptyLexicon, ParseError

logger = logging.getLogger(__name__)

#: Valence bounds of AFINN-style lexicons
MIN_VALENCE = -5
MAX_VALENCE = 5

_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})
_PUNCTUATION = re.compile(r"[^\w\s'\-]+")
_EDGE_MARKS = "'-"


@dataclass(frozen=True)
class Lexicon:
    """Immutable mapping from lowercase terms to integer valences.

    Attributes
    ----------
    entries : Mapping[str, int]
        Term (single word or space-separated phrase) to valence in [-5, 5].
    name : str
        Label of the lexicon, e.g. ``"AFINN-en-165"``.
    """

    entries: Mapping[str, int]
    name: str = "lexicon"
    max_phrase_words: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        checked: dict[str, int] = {}
        for term, valence in self.entries.items():
            if not term or not term.strip():
                raise ValueError("Lexicon terms must be non-empty")
            if term != term.lower():
                raise ValueError(f"Lexicon term {term!r} is not lowercase")
            if isinstance(valence, bool) or not isinstance(valence, int):
                raise ValueError(f"Valence of {term!r} must be an integer")
            if not MIN_VALENCE <= valence <= MAX_VALENCE:
                raise ValueError(
                    f"Valence {valence} of {term!r} is outside "
                    f"[{MIN_VALENCE}, {MAX_VALENCE}]"
                )
            checked[term] = valence
        object.__setattr__(self, "entries", MappingProxyType(checked))
        longest = max((len(term.split()) for term in checked), default=1)
        object.__setattr__(self, "max_phrase_words", longest)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, term: object) -> bool:
        return term in self.entries

    def score(self, term: str) -> int:
        """Valence of ``term``, 0 when the term is not in the lexicon."""
        return self.entries.get(term, 0)


@dataclass(frozen=True)
class Headline:
    """A dated news headline."""

    date: dt.date
    source: str
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.date, dt.date):
            raise ValueError(f"Headline date must be a date, got {self.date!r}")
        if not self.text or not self.text.strip():
            raise ValueError("Headline text must be non-empty")


@dataclass(frozen=True)
class PeriodSentiment:
    """Aggregated headline sentiment over a date range.

    ``score`` is None when no headline falls inside the range.
    """

    start_date: dt.date
    end_date: dt.date
    score: float | None
    headline_count: int

    def __post_init__(self) -> None:
        if self.start_date > self.end_date:
            raise ValueError("start_date must not be after end_date")
        if self.headline_count < 0:
            raise ValueError("headline_count must be nonnegative")
        if (self.headline_count == 0) != (self.score is None):
            raise ValueError("score must be absent exactly when there are no headlines")


def load_lexicon(raw_text: str, name: str = "lexicon") -> Lexicon:
    """Parse a lexicon in the AFINN distribution format.

    Each non-blank line holds ``term<TAB>score``. Terms are lowercased; when a
    term appears twice the last occurrence wins, so a corrections file can be
    appended to a base lexicon.

    Parameters
    ----------
    raw_text : str
        Lexicon file content.
    name : str, optional
        Label for the lexicon. Default is "lexicon".

    Returns
    -------
    Lexicon
        The parsed lexicon.

    Raises
    ------
    ParseError
        If a line has no score, a non-integer score, or a score outside [-5, 5].
    EmptyLexicon
        If the text holds no entries.

    Examples
    --------
    >>> load_lexicon("abandon\\t-2").entries["abandon"]
    -2
    """
    entries: dict[str, int] = {}
    for line_number, line in enumerate(raw_text.splitlines(), start=1):
        if not line.strip():
            continue
        term, sep, raw_score = line.rstrip("\r\n").rpartition("\t")
        term = term.strip().lower()
        if not sep:
            raise ParseError(f"missing score in {line!r}", line_number)
        if not term:
            raise ParseError(f"missing term in {line!r}", line_number)
        try:
            valence = int(raw_score.strip())
        except ValueError as err:
            raise ParseError(
                f"score {raw_score.strip()!r} is not an integer", line_number
            ) from err
        if not MIN_VALENCE <= valence <= MAX_VALENCE:
            raise ParseError(
                f"score {valence} is outside [{MIN_VALENCE}, {MAX_VALENCE}]",
                line_number,
            )
        entries.pop(term, None)
        entries[term] = valence

    if not entries:
        raise EmptyLexicon(f"Lexicon {name!r} has no entries")
    logger.debug("Loaded lexicon %s with %d entries", name, len(entries))
    return Lexicon(entries, name=name)


def _split_words(text: str) -> list[str]:
    cleaned = _PUNCTUATION.sub("", text.translate(_APOSTROPHES).lower())
    words = (word.strip(_EDGE_MARKS) for word in cleaned.split())
    return [word for word in words if word]


def tokenize(text: str, lexicon: Lexicon) -> list[str]:
    """Split a headline into terms.

    Text is lowercased and stripped of punctuation (intra-word apostrophes and
    hyphens are kept), split on whitespace, and adjacent words are then merged
    left to right into the longest phrase present in the lexicon.

    Parameters
    ----------
    text : str
        Raw headline text.
    lexicon : Lexicon
        Lexicon whose phrases drive the merging.

    Returns
    -------
    list of str
        The terms of the headline; empty for empty text.

    Examples
    --------
    >>> tokenize("Markets Rally!", load_lexicon("rally\\t2"))
    ['markets', 'rally']
    """
    words = _split_words(text)
    longest = lexicon.max_phrase_words
    if longest < 2:
        return words

    terms = []
    i = 0
    while i < len(words):
        for width in range(min(longest, len(words) - i), 1, -1):
            phrase = " ".join(words[i : i + width])
            if phrase in lexicon:
                terms.append(phrase)
                i += width
                break
        else:
            terms.append(words[i])
            i += 1
    return terms


def score_terms(terms: Sequence[str], lexicon: Lexicon) -> float:
    """Mean valence of ``terms``; unknown terms score 0."""
    if not terms:
        raise EmptyHeadline("Headline has no terms to score")
    return sum(lexicon.score(term) for term in terms) / len(terms)


def score_text(text: str, lexicon: Lexicon) -> float:
    """Sentiment of raw headline text. See :func:`score_headline`."""
    terms = tokenize(text, lexicon)
    if not terms:
        raise EmptyHeadline(f"Headline {text!r} has no terms to score")
    return score_terms(terms, lexicon)


def score_headline(headline: Headline, lexicon: Lexicon) -> float:
    """Sentiment of a headline: the mean valence over all of its terms.

    Parameters
    ----------
    headline : Headline
        Headline to score.
    lexicon : Lexicon
        Valence lexicon.

    Returns
    -------
    float
        Score in [-5, 5].

    Raises
    ------
    EmptyHeadline
        If the headline tokenizes to zero terms.
    """
    return score_text(headline.text, lexicon)


def period_sentiment(
    headlines: Iterable[Headline], window: DateWindow, lexicon: Lexicon
) -> PeriodSentiment:
    """Mean headline sentiment over the headlines dated inside ``window``.

    Headlines that tokenize to zero terms are skipped with a warning and are
    not counted.

    Parameters
    ----------
    headlines : Iterable[Headline]
        Candidate headlines; those outside the window are ignored.
    window : DateWindow
        Inclusive date range.
    lexicon : Lexicon
        Valence lexicon.

    Returns
    -------
    PeriodSentiment
        The period score, absent when no headline falls in the window.
    """
    scores = []
    for headline in headlines:
        if headline.date not in window:
            continue
        try:
            scores.append(score_headline(headline, lexicon))
        except EmptyHeadline:
            logger.warning("Skipping headline without terms: %r", headline.text)

    if not scores:
        return PeriodSentiment(window.start, window.end, None, 0)
    return PeriodSentiment(window.start, window.end, sum(scores) / len(scores), len(scores))


class SentimentIndex:
    """Pre-scored, date-sorted headlines for fast window queries.

    Every headline is scored once at construction; :meth:`period` then sums
    the scores of a window in date order, which gives the same result as
    :func:`period_sentiment` over date-sorted headlines.

    Parameters
    ----------
    headlines : Iterable[Headline]
        Headlines to index.
    lexicon : Lexicon
        Valence lexicon.
    """

    def __init__(self, headlines: Iterable[Headline], lexicon: Lexicon):
        scored = []
        for headline in sorted(headlines, key=lambda item: item.date):
            try:
                scored.append((headline.date, score_headline(headline, lexicon)))
            except EmptyHeadline:
                logger.warning("Skipping headline without terms: %r", headline.text)
        self._dates = [day for day, _ in scored]
        self._scores = [score for _, score in scored]

    def __len__(self) -> int:
        return len(self._scores)

    def period(self, window: DateWindow) -> PeriodSentiment:
        """Sentiment of the headlines dated inside ``window``."""
        lo = bisect.bisect_left(self._dates, window.start)
        hi = bisect.bisect_right(self._dates, window.end)
        if hi <= lo:
            return PeriodSentiment(window.start, window.end, None, 0)
        count = hi - lo
        return PeriodSentiment(
            window.start, window.end, sum(self._scores[lo:hi]) / count, count
        )


def consecutive_period_sentiments(
    headlines: Iterable[Headline],
    calendar: Sequence[dt.date],
    period_days: int,
    lexicon: Lexicon,
) -> list[PeriodSentiment]:
    """Sentiment of back-to-back blocks of ``period_days`` trading days.

    The last block may be shorter than ``period_days``.

    Parameters
    ----------
    headlines : Iterable[Headline]
        Headlines to aggregate.
    calendar : Sequence[datetime.date]
        Ordered trading dates.
    period_days : int
        Trading days per block.
    lexicon : Lexicon
        Valence lexicon.

    Returns
    -------
    list of PeriodSentiment
        One entry per block, in calendar order. Each block spans from its
        first trading date up to the day before the next block starts, so
        headlines on non-trading days are not lost.
    """
    if period_days < 1:
        raise ValueError("period_days must be at least 1")
    index = SentimentIndex(headlines, lexicon)
    starts = list(range(0, len(calendar), period_days))
    periods = []
    for n, start in enumerate(starts):
        first = calendar[start]
        if n + 1 < len(starts):
            last = calendar[starts[n + 1]] - dt.timedelta(days=1)
        else:
            last = calendar[-1]
        periods.append(index.period(DateWindow(first, last)))
    return periods
