"""Tests for the io module."""

import datetime as dt
from dataclasses import replace

import numpy as np
import pytest
import yaml

from sentiment_ensemble.agents import AgentHyperparameters, Algorithm, init_policy
from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.errors import (
    DataError,
    DataGap,
    EmptyData,
    InsufficientData,
    NonPositivePrice,
    ParseError,
)
from sentiment_ensemble.io import (
    POLICY_METADATA,
    Dataset,
    bundled_lexicon,
    dump_headlines,
    dump_market_csv,
    load_headlines,
    load_headlines_file,
    load_lexicon_file,
    load_market_csv,
    load_policy,
    read_text,
    save_policy,
)
from sentiment_ensemble.market_env import EnvConfig, MarketFrame
from tests.conftest import make_dataset

HEADER = "date,ticker,open,high,low,close,volume\n"


class TestLoadMarketCsv:
    """Tests for load_market_csv function."""

    def test_parse_market(self, market_csv_text):
        """Test that rows become a date-by-ticker grid with sorted tickers."""
        dataset = load_market_csv(market_csv_text)

        assert dataset.tickers == ("AAA", "BBB")
        assert dataset.dates == [dt.date(2020, 1, 2), dt.date(2020, 1, 3), dt.date(2020, 1, 6)]
        np.testing.assert_allclose(dataset.closes, [[10.5, 20.5], [11.0, 21.0], [11.25, 21.5]])
        np.testing.assert_allclose(dataset.volume[:, 1], [200, 210, 220])
        assert [frame.day_index for frame in dataset.frames] == [0, 1, 2]

    def test_wrong_header(self):
        """Test that a wrong header is reported on line 1."""
        with pytest.raises(ParseError, match="line 1"):
            load_market_csv("date,symbol,close\n2020-01-02,AAA,1\n")

    def test_invalid_number(self):
        """Test that a non-numeric field reports its line."""
        text = HEADER + "2020-01-02,AAA,1,1,1,1,10\n2020-01-03,AAA,1,1,1,abc,10\n"
        with pytest.raises(ParseError, match="line 3") as info:
            load_market_csv(text)
        assert info.value.line_number == 3

    def test_invalid_date(self):
        """Test that an invalid date is rejected."""
        with pytest.raises(ParseError, match="Invalid date"):
            load_market_csv(HEADER + "2020-13-02,AAA,1,1,1,1,10\n")

    def test_blank_lines_keep_line_numbers(self):
        """Test that blank lines are skipped without shifting line numbers."""
        text = HEADER + "2020-01-02,AAA,1,1,1,1,10\n\n2020-01-03,AAA,1,1,1,x,10\n"
        with pytest.raises(ParseError, match="line 4"):
            load_market_csv(text)

    def test_extra_field(self):
        """Test that a row with too many fields is a parse error."""
        text = HEADER + "2020-01-02,AAA,1,1,1,1,10\n2020-01-03,AAA,1,1,1,1,10,99\n"
        with pytest.raises(ParseError, match="line 3"):
            load_market_csv(text)

    def test_duplicate_row(self):
        """Test that a repeated (date, ticker) pair is rejected."""
        text = HEADER + "2020-01-02,AAA,1,1,1,1,10\n2020-01-02,AAA,1,1,1,2,10\n"
        with pytest.raises(ParseError, match="Duplicate"):
            load_market_csv(text)

    def test_non_positive_close(self):
        """Test that a zero close raises NonPositivePrice."""
        with pytest.raises(NonPositivePrice):
            load_market_csv(HEADER + "2020-01-02,AAA,1,1,1,0,10\n")

    def test_missing_ticker_day(self):
        """Test that a ticker missing on a trading date raises DataGap."""
        text = (
            HEADER
            + "2020-01-02,AAA,1,1,1,1,10\n2020-01-02,BBB,1,1,1,1,10\n"
            + "2020-01-03,AAA,1,1,1,1,10\n"
        )
        with pytest.raises(DataGap) as info:
            load_market_csv(text)
        assert info.value.date == "2020-01-03"
        assert info.value.ticker == "BBB"

    def test_header_only(self):
        """Test that a file without rows raises EmptyData."""
        with pytest.raises(EmptyData):
            load_market_csv(HEADER)

    def test_data_errors_share_a_base(self):
        """Test that every market-file failure is a DataError."""
        with pytest.raises(DataError):
            load_market_csv(HEADER + "2020-01-02,AAA,1,1,1,-2,10\n")

    def test_dump_reloads(self, market_csv_text):
        """Test that a dumped dataset parses back to the same values."""
        dataset = load_market_csv(market_csv_text)
        reloaded = load_market_csv(dump_market_csv(dataset))

        assert reloaded.tickers == dataset.tickers
        assert reloaded.dates == dataset.dates
        np.testing.assert_array_equal(reloaded.closes, dataset.closes)
        np.testing.assert_array_equal(reloaded.high, dataset.high)


class TestDataset:
    """Tests for the Dataset class."""

    def test_positions(self):
        """Test that windows map to inclusive trading-day positions."""
        dataset = make_dataset(np.full((10, 1), 5.0))
        dates = dataset.dates
        window = DateWindow(dates[2] - dt.timedelta(days=1), dates[6])

        assert dataset.positions(window) == (2, 6)
        assert len(dataset.window_frames(window)) == 5
        assert len(dataset.slice(window)) == 5
        assert dataset.position_of(dates[3]) == 3

    def test_empty_window(self):
        """Test that a window without trading days raises InsufficientData."""
        dataset = make_dataset(np.full((3, 1), 5.0))
        with pytest.raises(InsufficientData):
            dataset.positions(DateWindow(dt.date(2030, 1, 1), dt.date(2030, 2, 1)))

    def test_dates_must_increase(self):
        """Test that out-of-order frames are rejected."""
        frames = (
            MarketFrame(0, dt.date(2020, 1, 3), [1.0]),
            MarketFrame(1, dt.date(2020, 1, 2), [1.0]),
        )
        with pytest.raises(ValueError, match="increase"):
            Dataset(frames, ("A",), np.ones((2, 1)), np.ones((2, 1)), np.ones((2, 1)), np.ones((2, 1)))


class TestLoadHeadlines:
    """Tests for load_headlines function."""

    def test_sorted_by_date(self, headlines_text):
        """Test that headlines are date-sorted, keeping file order within a day."""
        headlines = load_headlines(headlines_text)

        assert [h.text for h in headlines] == ["Bad day for banks", "Good news", "Great rally"]
        assert headlines[1].source == "desk"
        assert headlines[2].date == dt.date(2020, 1, 3)

    def test_invalid_json(self):
        """Test that malformed JSON reports its line."""
        text = '{"date": "2020-01-02", "source": "a", "headline": "x"}\n{oops\n'
        with pytest.raises(ParseError, match="line 2"):
            load_headlines(text)

    def test_missing_field(self):
        """Test that a record without a headline is rejected."""
        with pytest.raises(ParseError, match="headline"):
            load_headlines('{"date": "2020-01-02", "source": "a"}\n')

    def test_empty_headline(self):
        """Test that empty headline text is rejected."""
        with pytest.raises(ParseError, match="non-empty"):
            load_headlines('{"date": "2020-01-02", "source": "a", "headline": " "}\n')

    def test_invalid_date(self):
        """Test that an invalid date is rejected."""
        with pytest.raises(ParseError, match="Invalid date"):
            load_headlines('{"date": "02/01/2020", "source": "a", "headline": "x"}\n')

    def test_dump_reloads(self, headlines_text):
        """Test that dumped headlines parse back identically."""
        headlines = load_headlines(headlines_text)
        assert load_headlines(dump_headlines(headlines)) == headlines


class TestFiles:
    """Tests for the file helpers."""

    def test_missing_file(self, tmp_path):
        """Test that a missing input file raises DataError."""
        with pytest.raises(DataError, match="not found"):
            read_text(tmp_path / "missing.csv")

    def test_headlines_file(self, tmp_path, headlines_text):
        """Test that headline files are read as UTF-8 text."""
        path = tmp_path / "headlines.jsonl"
        path.write_text(headlines_text, encoding="utf-8")
        assert len(load_headlines_file(path)) == 3

    def test_lexicon_named_after_file(self, tmp_path):
        """Test that a lexicon file is named after its stem."""
        path = tmp_path / "AFINN-en-165.txt"
        path.write_text("good\t3\n", encoding="utf-8")
        assert load_lexicon_file(path).name == "AFINN-en-165"

    def test_bundled_lexicon(self):
        """Test that the bundled lexicon loads with phrases and full valence range."""
        lexicon = bundled_lexicon()

        assert lexicon.name == "lexicon-subset"
        assert lexicon.score("good") == 3
        assert lexicon.score("bad") == -3
        assert lexicon.max_phrase_words >= 2
        assert {v for v in lexicon.entries.values() if v} == set(range(-5, 6)) - {0}


class TestPolicyCheckpoint:
    """Tests for save_policy and load_policy functions."""

    @pytest.mark.parametrize("algorithm", [Algorithm.TD3, Algorithm.PPO])
    def test_save_and_load(self, tmp_path, algorithm):
        """Test that a saved policy loads back with identical networks and settings."""
        hp = AgentHyperparameters(hidden_sizes=(4, 3), total_timesteps=50)
        policy = init_policy(algorithm, EnvConfig(h_max=7), np.array([10.0, 20.0]), hp, seed=2)
        policy = replace(
            policy,
            training_window=DateWindow(dt.date(2020, 1, 2), dt.date(2020, 3, 1)),
            episode_returns=(1.5, -0.5),
        )

        loaded = load_policy(save_policy(policy, tmp_path / "ckpt"))

        assert loaded.algorithm is algorithm
        assert loaded.hyperparameters == hp
        assert loaded.actor.equals(policy.actor)
        assert all(a.equals(b) for a, b in zip(loaded.critics, policy.critics))
        assert len(loaded.target_critics) == len(policy.target_critics)
        assert loaded.h_max == 7
        assert loaded.training_window == policy.training_window
        assert loaded.episode_returns == (1.5, -0.5)
        np.testing.assert_array_equal(loaded.base_prices, [10.0, 20.0])
        if algorithm is Algorithm.PPO:
            np.testing.assert_array_equal(loaded.log_std, policy.log_std)
            assert loaded.target_actor is None
        else:
            assert loaded.log_std is None
            assert loaded.target_actor.equals(policy.target_actor)

    def test_missing_checkpoint(self, tmp_path):
        """Test that loading from an empty directory raises DataError."""
        with pytest.raises(DataError, match="No policy checkpoint"):
            load_policy(tmp_path)

    def test_wrong_version(self, tmp_path):
        """Test that another format version is rejected."""
        policy = init_policy("DDPG", EnvConfig(), np.array([1.0]), AgentHyperparameters(hidden_sizes=(2,)))
        directory = save_policy(policy, tmp_path)
        metadata = yaml.safe_load((directory / POLICY_METADATA).read_text(encoding="utf-8"))
        metadata["format_version"] = 99
        (directory / POLICY_METADATA).write_text(yaml.safe_dump(metadata), encoding="utf-8")

        with pytest.raises(DataError, match="format version"):
            load_policy(directory)
