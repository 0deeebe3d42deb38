"""Run configuration loading and validation.

A run configuration is a YAML file with one section per module. Every
section is optional; missing sections take their defaults.
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator

from ..models import (
    DEFAULT_SWEEP_FREQUENCIES,
    ControlSource,
    EstimatorParams,
    FilterKind,
    GaConfig,
    HpeConfig,
    RobotParams,
    SensorConfig,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, message: str, key: str | None = None, code: str = "config_error") -> None:
        super().__init__(message)
        self.key = key
        self.code = code


class HvseSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    filter: FilterKind = FilterKind.KF1
    params: EstimatorParams = Field(default_factory=EstimatorParams)
    params_file: str | None = Field(
        None, description="JSON parameters written by `train`; overrides `params`"
    )


class TrainerSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ga: GaConfig = Field(default_factory=GaConfig)
    dataset: list[str] = Field(default_factory=list)
    sensitivity_fractions: list[float] = Field(default_factory=lambda: [-0.1, 0.1])


class MetricsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    aerial_only: bool = True
    dataset: list[str] = Field(default_factory=list)
    baselines: bool = True
    heights: list[float] = Field(default_factory=list)
    names: list[str] = Field(default_factory=list)


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    frequencies: list[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP_FREQUENCIES))
    h_ch: float = Field(3.0, gt=0)
    control_rate: float = Field(400.0, gt=0)
    duration: float = Field(10.0, gt=0)
    tail: float = Field(2.0, gt=0, description="Trailing window for the final error std (s)")
    settle: float = Field(
        2.0, ge=0, description="Initial span left out of the growth classifier (s)"
    )
    growth_window: float = Field(2.0, gt=0, description="Growth classifier window (s)")

    @field_validator("frequencies")
    @classmethod
    def _non_empty(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("frequency list must not be empty")
        if any(f <= 0 for f in value):
            raise ValueError("frequencies must be positive")
        return value


class AgilitySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inputs: str | None = None


class SubsetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: list[str] = Field(default_factory=list)
    per_height: int | dict[float, int] = 1


class CliSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0)
    out_dir: str = "out"
    control_source: ControlSource = ControlSource.GT
    threads: int = Field(1, ge=1)
    schedule: float | list[tuple[float, float]] = 1.0
    duration: float = Field(5.0, gt=0)
    trials: int = Field(1, ge=1)


class RunConfig(BaseModel):
    """Complete run configuration."""

    model_config = ConfigDict(extra="forbid")

    dynamics: RobotParams = Field(default_factory=RobotParams)
    sensing: SensorConfig = Field(default_factory=SensorConfig)
    hpe: HpeConfig = Field(default_factory=HpeConfig)
    hvse: HvseSection = Field(default_factory=HvseSection)
    trainer: TrainerSection = Field(default_factory=TrainerSection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    agility: AgilitySection = Field(default_factory=AgilitySection)
    subset: SubsetSection = Field(default_factory=SubsetSection)
    cli: CliSection = Field(default_factory=CliSection)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def resolve(self, path: str) -> Path:
        """Resolve a config-relative path."""
        p = Path(path).expanduser()
        return p if p.is_absolute() else self._base_dir / p

    def resolve_all(self, paths: Sequence[str]) -> list[Path]:
        return [self.resolve(p) for p in paths]


def _dotted(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc)


def _from_validation(exc: ValidationError, source: str) -> ConfigError:
    first = exc.errors()[0]
    key = _dotted(first["loc"])
    return ConfigError(f"{source}: invalid value for '{key}': {first['msg']}", key=key)


def parse_run_config(
    data: Any, base_dir: Path | None = None, source: str = "<config>"
) -> RunConfig:
    """Validate already-parsed configuration data.

    Raises:
        ConfigError: On any validation failure or unreadable params file
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        raise _from_validation(e, source) from e
    cfg._base_dir = base_dir or Path.cwd()

    if cfg.hvse.params_file:
        params_path = cfg.resolve(cfg.hvse.params_file)
        if not params_path.is_file():
            raise ConfigError(
                f"{source}: params file not found: {params_path}", key="hvse.params_file"
            )
        try:
            params = EstimatorParams.model_validate_json(params_path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise ConfigError(
                f"{params_path}: invalid estimator parameters: {e.errors()[0]['msg']}",
                key="hvse.params_file",
            ) from e
        cfg = _copy_with(cfg, hvse=cfg.hvse.model_copy(update={"params": params}))
        logger.info("Loaded estimator parameters from %s", params_path)
    return cfg


def load_run_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML run configuration.

    Raises:
        ConfigError: If the file is missing, not valid YAML or fails validation
    """
    config_path = Path(path).expanduser()
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {config_path}", key="config")
    try:
        data = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{config_path}: not valid YAML: {e}", key="config") from e
    return parse_run_config(data, base_dir=config_path.resolve().parent, source=str(config_path))


def _copy_with(cfg: RunConfig, **sections: BaseModel) -> RunConfig:
    updated = cfg.model_copy(update=sections)
    updated._base_dir = cfg._base_dir
    return updated


def apply_overrides(
    cfg: RunConfig,
    *,
    seed: int | None = None,
    out_dir: str | None = None,
    filter_kind: str | None = None,
    control_source: str | None = None,
    threads: int | None = None,
    agility_inputs: str | None = None,
) -> RunConfig:
    """Apply command-line overrides on top of a loaded configuration.

    Raises:
        ConfigError: Naming the overridden key when a value is invalid
    """
    cli_update: dict[str, Any] = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed must be non-negative, got {seed}", key="cli.seed")
        cli_update["seed"] = seed
    if out_dir is not None:
        cli_update["out_dir"] = out_dir
    if threads is not None:
        if threads < 1:
            raise ConfigError(f"threads must be at least 1, got {threads}", key="cli.threads")
        cli_update["threads"] = threads
    if control_source is not None:
        try:
            cli_update["control_source"] = ControlSource(control_source)
        except ValueError as e:
            raise ConfigError(
                f"Unknown control source '{control_source}'", key="cli.control_source"
            ) from e

    sections: dict[str, BaseModel] = {}
    if cli_update:
        sections["cli"] = cfg.cli.model_copy(update=cli_update)
    if filter_kind is not None:
        try:
            kind = FilterKind(filter_kind)
        except ValueError as e:
            raise ConfigError(f"Unknown filter kind '{filter_kind}'", key="hvse.filter") from e
        sections["hvse"] = cfg.hvse.model_copy(update={"filter": kind})
    if agility_inputs is not None:
        sections["agility"] = cfg.agility.model_copy(
            update={"inputs": str(Path(agility_inputs).expanduser().resolve())}
        )
    if seed is not None:
        sections["trainer"] = cfg.trainer.model_copy(
            update={"ga": cfg.trainer.ga.model_copy(update={"seed": seed})}
        )
    return _copy_with(cfg, **sections) if sections else cfg


__all__: list[str] = [
    "AgilitySection",
    "CliSection",
    "ConfigError",
    "HvseSection",
    "MetricsSection",
    "RunConfig",
    "SubsetSection",
    "SweepSection",
    "TrainerSection",
    "apply_overrides",
    "load_run_config",
    "parse_run_config",
]
