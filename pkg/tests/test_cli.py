"""Tests for the CLI module."""

import argparse
import datetime as dt
import json
from pathlib import Path

import pytest

from sentiment_ensemble.cli import _regime, get_parser, main, periods_csv
from sentiment_ensemble.sentiment import PeriodSentiment
from sentiment_ensemble.synthetic import Regime


@pytest.fixture
def lexicon_file(tmp_path):
    """A three-term lexicon file.

    Returns
    -------
    Path
        Path of ``words.tsv``.
    """
    path = tmp_path / "words.tsv"
    path.write_text("good\t3\nbad\t-3\ngreat\t3\n", encoding="utf-8")
    return path


@pytest.fixture
def headlines_file(tmp_path, headlines_text):
    """The shared headline records written to disk."""
    path = tmp_path / "headlines.jsonl"
    path.write_text(headlines_text, encoding="utf-8")
    return path


class TestGetParser:
    """Tests for get_parser function."""

    def test_parse_run(self):
        """Test parsing of the run command with repeated options."""
        args = get_parser().parse_args(
            ["run", "c.yaml", "--seed", "1", "--seed", "2", "--strategy", "buy_and_hold"]
        )

        assert args.command == "run"
        assert args.config == Path("c.yaml")
        assert args.seed == [1, 2]
        assert args.strategy == ["buy_and_hold"]
        assert args.alpha is None
        assert args.save_agents is None

    def test_parse_ablate(self):
        """Test that ablate takes the shared run options."""
        args = get_parser().parse_args(["--verbose", "ablate", "c.yaml", "--beta", "0.5"])

        assert args.command == "ablate"
        assert args.beta == 0.5
        assert args.verbose is True

    def test_parse_synth_defaults(self):
        """Test the synth defaults."""
        args = get_parser().parse_args(["synth", "out"])

        assert args.tickers == 3
        assert args.days == 500
        assert args.regime is None
        assert args.headlines_per_day == 15

    def test_parse_score_headlines(self):
        """Test the score-headlines defaults."""
        args = get_parser().parse_args(["score-headlines", "h.jsonl"])

        assert args.period_days == 62
        assert args.market is None
        assert args.output is None

    def test_verbosity_is_exclusive(self):
        """Test that --verbose and --debug cannot be combined."""
        with pytest.raises(SystemExit):
            get_parser().parse_args(["--verbose", "--debug", "run", "c.yaml"])

    def test_command_required(self):
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            get_parser().parse_args([])


class TestRegime:
    """Tests for _regime function."""

    def test_valid(self):
        """Test parsing of a colon-separated regime."""
        assert _regime("10:0.001:0.02:-1.5") == Regime(10, 0.001, 0.02, -1.5)

    @pytest.mark.parametrize("value", ["1:2", "a:0:0:0", "0:0:0:9"])
    def test_invalid(self, value):
        """Test that malformed or out-of-range regimes are rejected."""
        with pytest.raises(argparse.ArgumentTypeError, match="Invalid regime"):
            _regime(value)


class TestPeriodsCsv:
    """Tests for periods_csv function."""

    def test_absent_score_is_empty(self):
        """Test that a period without headlines has an empty score."""
        day = dt.date(2020, 1, 2)
        text = periods_csv([PeriodSentiment(day, day, 0.5, 2), PeriodSentiment(day, day, None, 0)])

        assert text.splitlines() == [
            "start_date,end_date,score,headline_count",
            "2020-01-02,2020-01-02,0.5,2",
            "2020-01-02,2020-01-02,,0",
        ]

    def test_no_periods_writes_header(self):
        """Test that an empty period list still writes the header row."""
        assert periods_csv([]) == "start_date,end_date,score,headline_count\n"


class TestMain:
    """Tests for main function."""

    def test_synth_writes_files(self, tmp_path, capsys):
        """Test that synth writes a market CSV and a headline file."""
        out = tmp_path / "synthetic"
        main(["synth", str(out), "--tickers", "2", "--days", "10", "--headlines-per-day", "2"])

        market = (out / "market.csv").read_text(encoding="utf-8").splitlines()
        headlines = (out / "headlines.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(market) == 1 + 20
        assert len(headlines) == 20
        assert json.loads(headlines[0])["source"] == "synthetic"
        assert "Wrote 10 days of 2 tickers" in capsys.readouterr().out

    def test_score_headlines_stdout(self, headlines_file, lexicon_file, capsys):
        """Test per-day sentiment printed to stdout."""
        main(
            [
                "score-headlines",
                str(headlines_file),
                "--lexicon",
                str(lexicon_file),
                "--period-days",
                "1",
            ]
        )

        assert capsys.readouterr().out.splitlines() == [
            "start_date,end_date,score,headline_count",
            "2020-01-02,2020-01-02,0.375,2",
            "2020-01-03,2020-01-03,1.5,1",
        ]

    def test_score_headlines_output_file(self, headlines_file, lexicon_file, tmp_path):
        """Test that --output writes the CSV to a file."""
        output = tmp_path / "scores.csv"
        main(
            [
                "score-headlines",
                str(headlines_file),
                "--lexicon",
                str(lexicon_file),
                "--output",
                str(output),
            ]
        )

        lines = output.read_text(encoding="utf-8").splitlines()
        assert lines[1] == "2020-01-02,2020-01-03,0.75,3"

    def test_run_buy_and_hold(self, run_config_file, tmp_path, capsys):
        """Test a run that needs no training."""
        out = tmp_path / "out"
        main(["run", str(run_config_file), "--strategy", "buy_and_hold", "--output-dir", str(out)])

        assert (out / "tiny" / "seed-0" / "buy_and_hold" / "report.json").is_file()
        assert "Seed 0:" in capsys.readouterr().out

    def test_missing_config_exits_1(self, tmp_path):
        """Test that a missing configuration exits with code 1."""
        with pytest.raises(SystemExit) as exc_info:
            main(["run", str(tmp_path / "absent.yaml")])
        assert exc_info.value.code == 1

    def test_missing_data_exits_2(self, tmp_path):
        """Test that a missing input file exits with code 2."""
        with pytest.raises(SystemExit) as exc_info:
            main(["score-headlines", str(tmp_path / "absent.jsonl")])
        assert exc_info.value.code == 2

    def test_invalid_period_exits_1(self, headlines_file):
        """Test that a non-positive block length is a configuration error."""
        with pytest.raises(SystemExit) as exc_info:
            main(["score-headlines", str(headlines_file), "--period-days", "0"])
        assert exc_info.value.code == 1

    def test_synth_without_section_exits_1(self, tmp_path):
        """Test that synth --config needs a synthetic section."""
        config = tmp_path / "data.yaml"
        config.write_text(
            "data: {market: m.csv}\nwindows: {evaluation_days: 5}\n", encoding="utf-8"
        )
        with pytest.raises(SystemExit) as exc_info:
            main(["synth", str(tmp_path / "out"), "--config", str(config)])
        assert exc_info.value.code == 1
