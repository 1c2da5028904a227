"""Experiment configuration and its ``key = value`` text format.

Every key is an :class:`ExperimentConfig` field name; lists are
comma-separated, ``#`` starts a comment, and ``none`` clears an optional
value. ``inf`` in ``snr_grid_db`` requests a noiseless cell. Omitted keys
keep the defaults below: M=32 antennas, N=4 users, 10240 pairs, three
hidden layers of 128, Adagrad at 0.01 for 256 epochs with batch 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .channels import ScenarioKind
from .errors import ConfigError, InvalidArgumentError
from .formats import fmt_real
from .network import TrainConfig

METHODS = ("dnn", "argos", "ls_diag", "ls_full", "crb")
LINEAR_KINDS = (ScenarioKind.LINEAR_TDD, ScenarioKind.LINEAR_SYNTHETIC)


@dataclass(frozen=True)
class ExperimentConfig:
    M: int = 32
    N: int = 4
    P: int = 10240
    scenario: str = "LinearTdd"
    crosstalk_level: float = 1.0
    normalize_hardware: bool = True
    tanh_mode: str = "split"
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    train_snr_db: Optional[float] = None
    train_once_mixed_snr: bool = False
    trials: int = 100
    learning_rate: float = 0.01
    epochs: int = 256
    batch_size: int = 4
    validation_fraction: float = 0.4
    hidden_dims: tuple[int, ...] = (128, 128, 128)
    dnn_mode: str = "per_user"
    output_activation: str = "linear"
    target_scale: float = 1.0 / 3.0
    methods: tuple[str, ...] = METHODS
    reference_antenna: int = 1
    strict: bool = False
    ul_pilot_length: Optional[int] = None
    dl_pilot_length: Optional[int] = None
    master_seed: int = 0
    output_path: str = "results.csv"
    workers: int = 1

    def __post_init__(self):
        try:
            kind = ScenarioKind.parse(self.scenario)
        except InvalidArgumentError as exc:
            raise ConfigError(f"scenario: {exc}") from None
        object.__setattr__(self, "scenario", kind.value)
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "methods", tuple(self.methods))
        _require(min(self.M, self.N) >= 1, "M", "M and N must be >= 1")
        _require(self.P >= 2, "P", "P must be >= 2 so both splits are nonempty")
        _require(len(self.snr_grid_db) > 0, "snr_grid_db", "must not be empty")
        _require(
            all(math.isfinite(s) or s == math.inf for s in self.snr_grid_db),
            "snr_grid_db",
            "values must be finite or inf (noiseless)",
        )
        _require(
            all(a < b for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])),
            "snr_grid_db",
            "must be strictly increasing",
        )
        _require(self.trials >= 1, "trials", "must be >= 1")
        _require(self.workers >= 1, "workers", "must be >= 1")
        _require(0.0 <= self.crosstalk_level <= 1.0, "crosstalk_level", "must be in [0, 1]")
        _require(self.tanh_mode in ("split", "complex"), "tanh_mode", "must be split or complex")
        _require(len(self.methods) > 0, "methods", "must not be empty")
        for m in self.methods:
            _require(m in METHODS, "methods", f"unknown method {m!r}; choose from {','.join(METHODS)}")
        _require(len(set(self.methods)) == len(self.methods), "methods", "duplicate entries")
        _require(1 <= self.reference_antenna <= self.M, "reference_antenna", "must be in [1, M]")
        _require(0 <= self.master_seed < 2**64, "master_seed", "must be a 64-bit unsigned integer")
        for key in ("ul_pilot_length", "dl_pilot_length"):
            value = getattr(self, key)
            _require(value is None or value >= 1, key, "must be >= 1")
        try:
            self.train_config(0)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def kind(self) -> ScenarioKind:
        return ScenarioKind.parse(self.scenario)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            validation_fraction=self.validation_fraction,
            seed=seed,
            hidden_dims=self.hidden_dims,
            mode=self.dnn_mode,
            output_activation=self.output_activation,
            target_scale=self.target_scale,
        )

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _require(ok: bool, field_name: str, message: str):
    if not ok:
        raise ConfigError(f"{field_name}: {message}")


_INT = {"M", "N", "P", "trials", "epochs", "batch_size", "reference_antenna", "master_seed", "workers"}
_FLOAT = {"crosstalk_level", "learning_rate", "validation_fraction", "target_scale"}
_BOOL = {"normalize_hardware", "train_once_mixed_snr", "strict"}
_OPT_FLOAT = {"train_snr_db"}
_OPT_INT = {"ul_pilot_length", "dl_pilot_length"}
_FLOAT_LIST = {"snr_grid_db"}
_INT_LIST = {"hidden_dims"}
_STR_LIST = {"methods"}


def _parse_value(key: str, raw: str):
    if key in _INT:
        return int(raw)
    if key in _FLOAT:
        return float(raw)
    if key in _BOOL:
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"expected true or false, got {raw!r}")
        return low in ("true", "1", "yes")
    if key in _OPT_FLOAT:
        return None if raw.lower() == "none" else float(raw)
    if key in _OPT_INT:
        return None if raw.lower() == "none" else int(raw)
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if key in _FLOAT_LIST:
        return tuple(float(s) for s in items)
    if key in _INT_LIST:
        return tuple(int(s) for s in items)
    if key in _STR_LIST:
        return tuple(items)
    return raw


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_real(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Parse ``key = value`` lines on top of ``base`` (defaults if omitted)."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, raw = content.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return replace(base or ExperimentConfig(), **values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def dumps_config(config: ExperimentConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(config, f.name))}" for f in fields(config)]
    return "\n".join(lines) + "\n"


def save_config(config: ExperimentConfig, path):
    Path(path).write_text(dumps_config(config))
