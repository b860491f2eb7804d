from __future__ import annotations

import configparser
import math
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from polychron.core.exceptions import ConfigError


class Settings(BaseSettings):
    """Process settings read from the environment."""

    model_config = SettingsConfigDict(
        env_prefix="POLYCHRON_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    app_env: str = Field(default="dev", description="Environment (dev/prod)")
    threads: int = Field(default=1, ge=1, description="Worker threads for batch shards")

    # Logging
    log_level: str = Field(default="WARNING", description="Logging level")
    log_format: Literal["console", "json"] = Field(
        default="console", description="Log renderer",
    )

    @property
    def is_development(self) -> bool:
        """Check if running in development."""
        return self.app_env == "dev"


class ModelKind(str, Enum):
    RNN = "rnn"
    TRANSFORMER = "transformer"


class RnnCombine(str, Enum):
    ADD = "add"
    CONCAT = "concat"


class LearningRule(str, Enum):
    """Backward rule used for every LUT in a training run."""

    MIN_PAIR_FLIP = "min-pair-flip"
    ALL_PAIRS = "all-pairs"
    NO_FLIP = "no-flip"
    LAYER_MINIMAL = "layer-minimal"
    SPIKING_SCALAR = "spiking-scalar"


class LrMode(str, Enum):
    WARMUP = "warmup"
    CONSTANT = "constant"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class ModelConfig(_Section):
    """Architecture hyperparameters."""

    kind: ModelKind = Field(default=ModelKind.RNN, description="Model architecture")
    n: int = Field(default=32, ge=2, description="Embedding / hidden dimension")
    n_t: int = Field(default=16, ge=1, description="Look-up tables per transform")
    n_c: int = Field(default=8, ge=1, le=63, description="Comparisons per table")
    n_t_u: int | None = Field(default=None, ge=1, description="Unembedder tables")
    n_c_u: int | None = Field(default=None, ge=1, le=63, description="Unembedder comparisons")
    p: int = Field(default=4, ge=1, description="Positional encoder dimension")
    n_layers: int = Field(default=2, ge=1, description="Transformer blocks")
    heads: int = Field(default=1, ge=1, description="Attention heads per block")
    n_inp: int = Field(default=32, ge=1, description="Context size")
    ffn_enabled: bool = Field(default=True, description="Residual FFN after attention")
    rnn_combine: RnnCombine = Field(default=RnnCombine.ADD, description="RNN input mode")
    init_scale: float = Field(default=0.0, ge=0.0, description="Std of random synapses")
    dtype: Literal["float32", "float64"] = Field(default="float32", description="Row dtype")

    @property
    def unembed_tables(self) -> int:
        return self.n_t_u if self.n_t_u is not None else self.n_t

    @property
    def unembed_comparisons(self) -> int:
        return self.n_c_u if self.n_c_u is not None else self.n_c

    @model_validator(mode="after")
    def _check_index_width(self) -> ModelConfig:
        if self.kind is ModelKind.TRANSFORMER and 2 * self.n_c + self.p > 63:
            raise ValueError("2*n_c + p must fit in 63 index bits")
        return self


class TrainConfig(_Section):
    """Optimization and run-control parameters."""

    rule: LearningRule = Field(default=LearningRule.MIN_PAIR_FLIP, description="Learning rule")
    lr_mode: LrMode = Field(default=LrMode.WARMUP, description="Learning-rate schedule")
    lr_scale: float | None = Field(default=None, ge=0.0, description="Schedule scale (n^-1/2 if unset)")
    warmup_steps: int = Field(default=4000, ge=1, description="Warmup steps")
    batch_size: int = Field(default=16, ge=1, description="Windows per step")
    grad_shards: int = Field(default=1, ge=1, description="Batch shards reduced in order")
    max_steps: int = Field(default=1000, ge=1, description="Training steps")
    eval_interval: int = Field(default=100, ge=1, description="Steps between evaluations")
    checkpoint_interval: int | None = Field(default=None, ge=1, description="Steps between checkpoints")
    max_eval_windows: int | None = Field(default=None, ge=1, description="Cap on validation windows")
    seed: int = Field(default=0, ge=0, description="Seed of the single generator")
    stop_bpc: float | None = Field(default=None, gt=0.0, description="Early-stop validation BPC")

    def scale_for(self, n: int) -> float:
        """Schedule scale, defaulting to n^-1/2."""
        return self.lr_scale if self.lr_scale is not None else 1.0 / math.sqrt(n)

    @property
    def checkpoint_every(self) -> int:
        return self.checkpoint_interval or self.eval_interval


class DataConfig(_Section):
    """Corpus handling."""

    val_fraction: float = Field(default=0.1, gt=0.0, lt=1.0, description="Validation tail fraction")


class ExperimentConfig(_Section):
    """Everything a training run needs besides the corpus bytes."""

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    def to_lines(self) -> list[str]:
        """Serialize as ``section.key=value`` lines (checkpoint config block)."""
        lines: list[str] = []
        for section in ("model", "train", "data"):
            values = getattr(self, section).model_dump(mode="json")
            for key, value in values.items():
                if value is None:
                    value = ""
                elif isinstance(value, bool):
                    value = str(value).lower()
                lines.append(f"{section}.{key}={value}")
        return lines

    @classmethod
    def from_lines(cls, lines: list[str]) -> ExperimentConfig:
        sections: dict[str, dict[str, str]] = {}
        for line in lines:
            if not line.strip():
                continue
            dotted, _, value = line.partition("=")
            section, _, key = dotted.partition(".")
            sections.setdefault(section, {})[key] = value
        return build_experiment_config(sections)


_SECTIONS: dict[str, type[_Section]] = {
    "model": ModelConfig,
    "train": TrainConfig,
    "data": DataConfig,
}


def _clean(raw: dict[str, str]) -> dict[str, Any]:
    # empty INI values mean "unset" for optional fields
    return {key: (None if value == "" else value) for key, value in raw.items()}


def build_experiment_config(sections: dict[str, dict[str, str]]) -> ExperimentConfig:
    """Validate raw section dictionaries, naming the first offending key."""
    parsed: dict[str, _Section] = {}
    for name, raw in sections.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")
        try:
            parsed[name] = _SECTIONS[name].model_validate(_clean(raw))
        except ValidationError as e:
            error = e.errors()[0]
            key = ".".join(str(part) for part in error["loc"]) or "?"
            if error["type"] == "extra_forbidden":
                raise ConfigError(f"unknown config key '{name}.{key}'") from e
            raise ConfigError(f"invalid value for '{name}.{key}': {error['msg']}") from e
    try:
        return ExperimentConfig(**parsed)  # type: ignore[arg-type]
    except ValidationError as e:
        raise ConfigError(str(e.errors()[0]["msg"])) from e


def parse_overrides(overrides: list[str]) -> dict[str, dict[str, str]]:
    """Turn ``section.key=value`` strings into section dictionaries."""
    sections: dict[str, dict[str, str]] = {}
    for item in overrides:
        dotted, sep, value = item.partition("=")
        section, dot, key = dotted.partition(".")
        if not sep or not dot or not key:
            raise ConfigError(f"override '{item}' must look like section.key=value")
        sections.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return sections


def load_experiment_config(
    path: Path | None,
    overrides: dict[str, dict[str, str]] | None = None,
) -> ExperimentConfig:
    """Read an INI file and merge flag overrides on top (flags win)."""
    sections: dict[str, dict[str, str]] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # type: ignore[assignment,method-assign]
        try:
            with path.open(encoding="utf-8") as handle:
                parser.read_file(handle)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config file {path}: {e}") from e
        for name in parser.sections():
            sections[name] = dict(parser.items(name))
    for name, values in (overrides or {}).items():
        sections.setdefault(name, {}).update(values)
    return build_experiment_config(sections)


# Global settings instance
settings = Settings()
