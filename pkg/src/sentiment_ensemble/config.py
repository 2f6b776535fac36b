"""Run configuration files.

A run configuration is a YAML mapping with these sections, all optional
except for a data source (``data.market`` or ``synthetic``)::

    data:        # market CSV, headline JSON lines and lexicon paths
    synthetic:   # SyntheticSpec fields, used instead of data.market
    windows:     # train / evaluation date ranges, or evaluation_days
    env:         # EnvConfig fields
    agents:      # hyperparameter overrides: ``common`` and per algorithm
    ensemble:    # members and workers
    switch:      # SwitchConfig fields
    run:         # strategies, seeds, output directory, checkpointing

Relative paths resolve against the directory of the configuration file.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from sentiment_ensemble.agents import (
    AgentHyperparameters,
    Algorithm,
    default_hyperparameters,
)
from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.ensemble import SwitchConfig
from sentiment_ensemble.errors import ConfigError, InsufficientData
from sentiment_ensemble.io import Dataset
from sentiment_ensemble.market_env import EnvConfig
from sentiment_ensemble.synthetic import Regime, SyntheticSpec

logger = logging.getLogger(__name__)

SECTIONS = ("data", "synthetic", "windows", "env", "agents", "ensemble", "switch", "run")

#: Strategies without a parameter; ``single:<ALGORITHM>`` is accepted too
STRATEGIES = ("sentiment_ensemble", "fixed_ensemble", "buy_and_hold")
SINGLE_PREFIX = "single:"

DEFAULT_MEMBERS = (Algorithm.DDPG, Algorithm.PPO, Algorithm.A2C)


@dataclass(frozen=True)
class RunConfig:
    """Everything a backtest run needs.

    Attributes
    ----------
    market_path, headlines_path, lexicon_path : Path or None
        Input files. Without a lexicon the bundled one is used.
    synthetic : SyntheticSpec or None
        Generated data source, used when ``market_path`` is None.
    training_window, evaluation_window : DateWindow or None
        Explicit date ranges.
    evaluation_days : int or None
        Evaluate on the last ``evaluation_days`` trading days and train on
        everything before them (overrides missing windows).
    env : EnvConfig
        Trading constraints.
    hyperparameters : dict
        Hyperparameters per algorithm.
    members : tuple of Algorithm
        Algorithms of the ensemble.
    switch : SwitchConfig
        Agent selection settings.
    strategies : tuple of str
        Strategies to run, e.g. ``sentiment_ensemble`` or ``single:TD3``.
    seeds : tuple of int
        One run per seed.
    output_dir : Path
        Parent directory of run directories.
    name : str
        Run label, the first level below ``output_dir``.
    save_agents : bool
        Whether to checkpoint trained agents.
    workers : int
        Concurrent training and validation workers.
    """

    market_path: Path | None = None
    headlines_path: Path | None = None
    lexicon_path: Path | None = None
    synthetic: SyntheticSpec | None = None
    training_window: DateWindow | None = None
    evaluation_window: DateWindow | None = None
    evaluation_days: int | None = None
    env: EnvConfig = field(default_factory=EnvConfig)
    hyperparameters: dict[Algorithm, AgentHyperparameters] = field(
        default_factory=lambda: {a: default_hyperparameters(a) for a in Algorithm}
    )
    members: tuple[Algorithm, ...] = DEFAULT_MEMBERS
    switch: SwitchConfig = field(default_factory=SwitchConfig)
    strategies: tuple[str, ...] = ("sentiment_ensemble",)
    seeds: tuple[int, ...] = (0,)
    output_dir: Path = Path("runs")
    name: str = "run"
    save_agents: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if (self.market_path is None) == (self.synthetic is None):
            raise ConfigError("Configure exactly one of data.market and synthetic")
        if not self.members:
            raise ConfigError("The ensemble needs at least one member")
        if not self.seeds:
            raise ConfigError("At least one seed is required")
        if not self.strategies:
            raise ConfigError("At least one strategy is required")
        for strategy in self.strategies:
            parse_strategy(strategy)
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.evaluation_days is not None and self.evaluation_days < 3:
            raise ConfigError("evaluation_days must be at least 3")
        if self.evaluation_days is None and self.evaluation_window is None:
            raise ConfigError("Configure windows.evaluation or windows.evaluation_days")
        if (
            self.training_window is not None
            and self.evaluation_window is not None
            and self.training_window.end >= self.evaluation_window.start
        ):
            raise ConfigError(
                f"Training window {self.training_window} must end before "
                f"evaluation window {self.evaluation_window} starts"
            )

    def hyperparameters_for(self, algorithm: Algorithm) -> AgentHyperparameters:
        return self.hyperparameters.get(algorithm) or default_hyperparameters(algorithm)

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly echo of the configuration."""

        def window(value: DateWindow | None):
            if value is None:
                return None
            return {"start": value.start.isoformat(), "end": value.end.isoformat()}

        def plain(value: Any) -> Any:
            if dataclasses.is_dataclass(value):
                return {k: plain(v) for k, v in dataclasses.asdict(value).items()}
            if isinstance(value, dict):
                return {str(getattr(k, "value", k)): plain(v) for k, v in value.items()}
            if isinstance(value, (list, tuple)):
                return [plain(v) for v in value]
            if hasattr(value, "isoformat"):
                return value.isoformat()
            if hasattr(value, "value"):
                return value.value
            if isinstance(value, Path):
                return value.as_posix()
            if isinstance(value, float) and not math.isfinite(value):
                return str(value)
            return value

        return {
            "data": {
                "market": plain(self.market_path),
                "headlines": plain(self.headlines_path),
                "lexicon": plain(self.lexicon_path),
            },
            "synthetic": plain(self.synthetic),
            "windows": {
                "train": window(self.training_window),
                "evaluation": window(self.evaluation_window),
                "evaluation_days": self.evaluation_days,
            },
            "env": plain(self.env),
            "agents": {a.value: plain(self.hyperparameters_for(a)) for a in self.members},
            "ensemble": {"members": [a.value for a in self.members], "workers": self.workers},
            "switch": plain(self.switch),
            "run": {"strategies": list(self.strategies), "name": self.name},
        }


def parse_strategy(value: str) -> tuple[str, Algorithm | None]:
    """Split a strategy selector into its kind and optional algorithm.

    Raises
    ------
    ConfigError
        If the selector is not a known strategy.

    Examples
    --------
    >>> parse_strategy("single:td3")
    ('single', <Algorithm.TD3: 'TD3'>)
    """
    if value in STRATEGIES:
        return value, None
    if value.startswith(SINGLE_PREFIX):
        try:
            return "single", Algorithm.parse(value[len(SINGLE_PREFIX) :])
        except ValueError as err:
            raise ConfigError(f"Unknown strategy {value!r}: {err}") from err
    choices = ", ".join((*STRATEGIES, "single:<ALGORITHM>"))
    raise ConfigError(f"Unknown strategy {value!r}, expected one of {choices}")


def _section(data: dict, name: str, allowed: tuple[str, ...]) -> dict:
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"Section {name!r} must be a mapping")
    for key in section:
        if key not in allowed:
            raise ConfigError(
                f"Unknown key {key!r} in section {name!r}", section=name, key=key
            )
    return section


def _field_names(cls) -> tuple[str, ...]:
    return tuple(f.name for f in dataclasses.fields(cls) if f.init)


def _build(cls, section: str, values: dict):
    try:
        return cls(**values)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Invalid {section} settings: {err}", section=section) from err


def _path(value: Any, base_dir: Path) -> Path | None:
    if value is None:
        return None
    path = Path(str(value))
    return path if path.is_absolute() else base_dir / path


def _window(value: Any, name: str) -> DateWindow | None:
    if value is None:
        return None
    try:
        if isinstance(value, dict):
            if set(value) != {"start", "end"}:
                raise ValueError("expected keys 'start' and 'end'")
            return DateWindow.parse(value["start"], value["end"])
        start, end = value
        return DateWindow.parse(start, end)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Invalid window {name!r}: {err}", window=name) from err


def _hyperparameters(section: dict) -> dict[Algorithm, AgentHyperparameters]:
    allowed = _field_names(AgentHyperparameters)
    common = section.get("common") or {}
    result = {}
    for algorithm in Algorithm:
        overrides = {**common, **(section.get(algorithm.value) or {})}
        for key in overrides:
            if key not in allowed:
                raise ConfigError(
                    f"Unknown hyperparameter {key!r} for {algorithm.value}",
                    section="agents",
                    key=key,
                )
        base = default_hyperparameters(algorithm)
        try:
            result[algorithm] = dataclasses.replace(base, **overrides)
        except (TypeError, ValueError) as err:
            raise ConfigError(
                f"Invalid {algorithm.value} hyperparameters: {err}", section="agents"
            ) from err
    return result


def config_from_dict(data: dict | None, base_dir: Path = Path(".")) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed YAML mapping.

    Raises
    ------
    ConfigError
        On unknown sections or keys and on invalid values.
    """
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("A configuration must be a YAML mapping")
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(f"Unknown section {key!r}", section=key)

    paths = _section(data, "data", ("market", "headlines", "lexicon"))
    windows = _section(data, "windows", ("train", "evaluation", "evaluation_days"))
    env = _section(data, "env", _field_names(EnvConfig))
    agents = _section(data, "agents", ("common", *(a.value for a in Algorithm)))
    ensemble = _section(data, "ensemble", ("members", "workers"))
    switch = _section(data, "switch", _field_names(SwitchConfig))
    run = _section(data, "run", ("strategies", "seeds", "output_dir", "name", "save_agents"))

    synthetic = None
    if data.get("synthetic") is not None:
        values = dict(_section(data, "synthetic", _field_names(SyntheticSpec)))
        try:
            values["regimes"] = tuple(Regime(**r) for r in values.get("regimes", [{"start_day": 0}]))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"Invalid synthetic regimes: {err}", section="synthetic") from err
        synthetic = _build(SyntheticSpec, "synthetic", values)

    try:
        members = tuple(Algorithm.parse(m) for m in ensemble.get("members", DEFAULT_MEMBERS))
    except ValueError as err:
        raise ConfigError(str(err), section="ensemble") from err

    return RunConfig(
        market_path=_path(paths.get("market"), base_dir),
        headlines_path=_path(paths.get("headlines"), base_dir),
        lexicon_path=_path(paths.get("lexicon"), base_dir),
        synthetic=synthetic,
        training_window=_window(windows.get("train"), "train"),
        evaluation_window=_window(windows.get("evaluation"), "evaluation"),
        evaluation_days=windows.get("evaluation_days"),
        env=_build(EnvConfig, "env", env),
        hyperparameters=_hyperparameters(agents),
        members=members,
        switch=_build(SwitchConfig, "switch", switch),
        strategies=tuple(run.get("strategies", ("sentiment_ensemble",))),
        seeds=tuple(int(s) for s in run.get("seeds", (0,))),
        output_dir=_path(run.get("output_dir", "runs"), base_dir),
        name=str(run.get("name", "run")),
        save_agents=bool(run.get("save_agents", False)),
        workers=int(ensemble.get("workers", 1)),
    )


def load_config(path: Path) -> RunConfig:
    """Read a YAML run configuration file.

    Parameters
    ----------
    path : Path
        Configuration file.

    Returns
    -------
    RunConfig
        The parsed configuration, with relative paths resolved against the
        file's directory. ``run.name`` defaults to the file stem.

    Raises
    ------
    ConfigError
        If the file is missing, is not valid YAML, or holds invalid settings.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as file:
            data = yaml.safe_load(file)
    except FileNotFoundError as err:
        raise ConfigError(f"Configuration file not found: {path}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"Invalid YAML in {path}: {err}") from err
    if isinstance(data, dict):
        data.setdefault("run", {})
        if isinstance(data["run"], dict):
            data["run"].setdefault("name", path.stem)
    config = config_from_dict(data, base_dir=path.parent)
    logger.info("Loaded configuration %s", path)
    return config


def apply_overrides(config: RunConfig, **overrides: Any) -> RunConfig:
    """Return ``config`` with command-line values applied.

    ``None`` values are ignored. ``alpha``, ``beta``, ``period_days`` and
    ``risk_free`` go to the switch settings; every other key must be a
    :class:`RunConfig` field.
    """
    switch_keys = ("alpha", "beta", "period_days", "risk_free")
    switch = {k: overrides.pop(k) for k in switch_keys if overrides.get(k) is not None}
    values = {k: v for k, v in overrides.items() if v is not None}
    try:
        if switch:
            values["switch"] = dataclasses.replace(config.switch, **switch)
        return dataclasses.replace(config, **values)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Invalid override: {err}") from err


def resolve_windows(config: RunConfig, dataset: Dataset) -> tuple[DateWindow, DateWindow]:
    """Training and evaluation windows of ``config`` on ``dataset``.

    Raises
    ------
    ConfigError
        If a window holds fewer trading days than training or evaluation
        needs, or the evaluation window leaves no training days.
    """
    dates = dataset.dates
    training, evaluation = config.training_window, config.evaluation_window
    if config.evaluation_days is not None and evaluation is None:
        if config.evaluation_days >= len(dates) - 1:
            raise ConfigError(
                f"evaluation_days {config.evaluation_days} leaves fewer than 2 "
                f"training days in {len(dates)} trading days"
            )
        first = len(dates) - config.evaluation_days
        evaluation = DateWindow(dates[first], dates[-1])
        if training is None:
            training = DateWindow(dates[0], dates[first - 1])
    if training is None:
        lo = dataset.position_of(evaluation.start)
        if lo < 2:
            raise ConfigError(f"No training days before evaluation window {evaluation}")
        training = DateWindow(dates[0], dates[lo - 1])
    if training.end >= evaluation.start:
        raise ConfigError(
            f"Training window {training} must end before evaluation window {evaluation} starts"
        )

    for label, window, minimum in (("training", training, 2), ("evaluation", evaluation, 3)):
        try:
            lo, hi = dataset.positions(window)
        except InsufficientData as err:
            raise ConfigError(f"The {label} window {window} has no trading days") from err
        if hi - lo + 1 < minimum:
            raise ConfigError(
                f"The {label} window {window} has {hi - lo + 1} trading days, "
                f"at least {minimum} needed"
            )
    return training, evaluation
