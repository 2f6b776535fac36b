"""Tests for the config module."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from sentiment_ensemble.agents import Algorithm
from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.ensemble import CheckCadence
from sentiment_ensemble.errors import ConfigError
from sentiment_ensemble.config import (
    RunConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    parse_strategy,
    resolve_windows,
)
from sentiment_ensemble.synthetic import SyntheticSpec
from tests.conftest import make_dataset

CONFIGS = Path(__file__).parents[1] / "configs"


@pytest.fixture
def minimal():
    """Smallest valid configuration mapping.

    Returns
    -------
    dict
        A synthetic data source and an evaluation length.
    """
    return {"synthetic": {"tickers": 2, "days": 50}, "windows": {"evaluation_days": 10}}


class TestConfigFromDict:
    """Tests for config_from_dict function."""

    def test_defaults(self, minimal):
        """Test the defaults of a minimal configuration."""
        config = config_from_dict(minimal)

        assert config.synthetic == SyntheticSpec(tickers=2, days=50)
        assert config.members == (Algorithm.DDPG, Algorithm.PPO, Algorithm.A2C)
        assert config.strategies == ("sentiment_ensemble",)
        assert config.switch.alpha == 0.25
        assert config.switch.beta == 15.0
        assert config.switch.period_days == 62
        assert config.seeds == (0,)

    def test_agent_overrides(self, minimal):
        """Test that common settings apply to every algorithm under per-algorithm ones."""
        minimal["agents"] = {"common": {"hidden_sizes": [8]}, "DDPG": {"learning_starts": 5}}
        config = config_from_dict(minimal)

        assert config.hyperparameters_for(Algorithm.DDPG).learning_starts == 5
        assert config.hyperparameters_for(Algorithm.PPO).hidden_sizes == (8,)
        assert config.hyperparameters_for(Algorithm.A2C).n_steps == 5

    def test_switch_section(self, minimal):
        """Test that switch settings are parsed including enums."""
        minimal["switch"] = {"beta": 0.3, "check_cadence": "period_boundary"}
        config = config_from_dict(minimal)

        assert config.switch.beta == 0.3
        assert config.switch.check_cadence is CheckCadence.PERIOD_BOUNDARY

    def test_windows(self, tmp_path):
        """Test that windows parse from mappings or pairs and paths resolve."""
        config = config_from_dict(
            {
                "data": {"market": "market.csv"},
                "windows": {
                    "train": {"start": "2010-01-01", "end": "2016-12-31"},
                    "evaluation": ["2017-01-01", "2019-01-01"],
                },
            },
            base_dir=tmp_path,
        )

        assert config.market_path == tmp_path / "market.csv"
        assert config.training_window == DateWindow.parse("2010-01-01", "2016-12-31")
        assert config.evaluation_window.end.year == 2019

    @pytest.mark.parametrize(
        "change, match",
        [
            ({"extra": {}}, "Unknown section"),
            ({"switch": {"gamma": 1}}, "Unknown key"),
            ({"agents": {"DDPG": {"momentum": 0.9}}}, "Unknown hyperparameter"),
            ({"switch": {"alpha": 2.0}}, "Invalid switch"),
            ({"ensemble": {"members": ["SAC"]}}, "Unknown algorithm"),
            ({"run": {"strategies": ["momentum"]}}, "Unknown strategy"),
            ({"data": {"market": "m.csv"}}, "exactly one"),
            ({"windows": {}}, "evaluation"),
            ({"windows": {"evaluation_days": 2}}, "at least 3"),
        ],
    )
    def test_invalid(self, minimal, change, match):
        """Test that invalid settings raise ConfigError."""
        minimal.update(change)
        with pytest.raises(ConfigError, match=match):
            config_from_dict(minimal)

    def test_overlapping_windows(self):
        """Test that training must end before evaluation starts."""
        with pytest.raises(ConfigError, match="must end before"):
            config_from_dict(
                {
                    "data": {"market": "m.csv"},
                    "windows": {
                        "train": ["2010-01-01", "2017-06-30"],
                        "evaluation": ["2017-01-01", "2019-01-01"],
                    },
                }
            )


class TestParseStrategy:
    """Tests for parse_strategy function."""

    def test_plain_and_single(self):
        """Test that strategies and single-agent selectors parse."""
        assert parse_strategy("buy_and_hold") == ("buy_and_hold", None)
        assert parse_strategy("single:td3") == ("single", Algorithm.TD3)

    def test_unknown_algorithm(self):
        """Test that an unknown single-agent algorithm is rejected."""
        with pytest.raises(ConfigError):
            parse_strategy("single:SAC")


class TestLoadConfig:
    """Tests for load_config function."""

    def test_name_defaults_to_stem(self, tmp_path):
        """Test that the run name defaults to the file stem."""
        path = tmp_path / "small.yaml"
        path.write_text(
            "synthetic: {tickers: 1, days: 30}\nwindows: {evaluation_days: 5}\n", encoding="utf-8"
        )
        assert load_config(path).name == "small"

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        """Test that malformed YAML raises ConfigError."""
        path = tmp_path / "broken.yaml"
        path.write_text("switch: [unclosed\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            load_config(path)

    @pytest.mark.parametrize("name", ["dow_2010_2019.yaml", "synthetic.yaml"])
    def test_shipped_configs(self, name):
        """Test that the shipped configurations are valid."""
        config = load_config(CONFIGS / name)
        assert config.switch.period_days == 62
        assert config.output_dir == CONFIGS / ".." / "runs"


class TestApplyOverrides:
    """Tests for apply_overrides function."""

    def test_switch_and_run_values(self, minimal):
        """Test that selection values go to the switch settings and None is ignored."""
        config = apply_overrides(
            config_from_dict(minimal), alpha=0.5, beta=None, seeds=(1, 2), workers=None
        )

        assert config.switch.alpha == 0.5
        assert config.switch.beta == 15.0
        assert config.seeds == (1, 2)
        assert config.workers == 1

    def test_invalid_override(self, minimal):
        """Test that an out-of-range override raises ConfigError."""
        with pytest.raises(ConfigError):
            apply_overrides(config_from_dict(minimal), period_days=0)


class TestResolveWindows:
    """Tests for resolve_windows function."""

    def test_evaluation_days(self):
        """Test that the last N days are evaluated and the rest trained on."""
        dataset = make_dataset(np.full((20, 1), 5.0))
        config = RunConfig(synthetic=SyntheticSpec(tickers=1, days=20), evaluation_days=5)
        dates = dataset.dates

        training, evaluation = resolve_windows(config, dataset)

        assert evaluation == DateWindow(dates[15], dates[19])
        assert training == DateWindow(dates[0], dates[14])

    def test_training_defaults_to_history(self):
        """Test that training defaults to every day before evaluation."""
        dataset = make_dataset(np.full((20, 1), 5.0))
        dates = dataset.dates
        config = RunConfig(
            synthetic=SyntheticSpec(tickers=1, days=20),
            evaluation_window=DateWindow(dates[10], dates[19]),
        )

        training, _ = resolve_windows(config, dataset)

        assert training == DateWindow(dates[0], dates[9])

    def test_evaluation_too_short(self):
        """Test that an evaluation window under three days is rejected."""
        dataset = make_dataset(np.full((20, 1), 5.0))
        dates = dataset.dates
        config = RunConfig(
            synthetic=SyntheticSpec(tickers=1, days=20),
            evaluation_window=DateWindow(dates[18], dates[19]),
        )
        with pytest.raises(ConfigError, match="at least 3"):
            resolve_windows(config, dataset)

    def test_no_training_days(self):
        """Test that evaluation_days covering the data is rejected."""
        dataset = make_dataset(np.full((5, 1), 5.0))
        config = RunConfig(synthetic=SyntheticSpec(tickers=1, days=5), evaluation_days=4)
        with pytest.raises(ConfigError, match="training days"):
            resolve_windows(config, dataset)


class TestToDict:
    """Tests for RunConfig.to_dict."""

    def test_json_safe_with_infinite_beta(self, minimal):
        """Test that an infinite threshold serializes as strict JSON."""
        config = apply_overrides(config_from_dict(minimal), beta=math.inf)
        data = json.loads(json.dumps(config.to_dict(), allow_nan=False))

        assert data["switch"]["beta"] == "inf"
        assert data["ensemble"]["members"] == ["DDPG", "PPO", "A2C"]
        assert data["switch"]["trigger_mode"] == "delta"
