"""Helpers shared by the subcommands."""

import logging
from collections.abc import Sequence
from pathlib import Path

import pandas as pd

from ..models import EstimatorParams, FilterKind
from ..services.config import ConfigError, RunConfig
from ..services.dataset import DataError, Dataset, HopLog, load_dataset
from ..services.dynamics import DynamicsFault
from ..services.estimator import EstimatorTrace, replay
from ..services.hvse import EstimatorFault, ImuptRejected
from ..services.metrics import AgilityError, HopRecord, build_hop_records
from ..services.runner import RunnerError
from ..utils.files import ensure_output_directory
from ..utils.results import BatchFailure

logger = logging.getLogger(__name__)

# exceptions a command turns into an error payload
DOMAIN_ERRORS = (
    AgilityError,
    BatchFailure,
    ConfigError,
    DataError,
    DynamicsFault,
    EstimatorFault,
    ImuptRejected,
    RunnerError,
)


def output_dir(cfg: RunConfig, *parts: str) -> Path:
    """Create and return the run's output directory (or a subdirectory of it).

    Raises:
        ConfigError: If the configured directory escapes with '..'
    """
    try:
        return ensure_output_directory(cfg.resolve(cfg.cli.out_dir).joinpath(*parts))
    except ValueError as e:
        raise ConfigError(str(e), key="cli.out_dir") from e


def load_trials(cfg: RunConfig, paths: Sequence[str], key: str) -> Dataset:
    """Load the logs listed under config ``key``.

    Raises:
        ConfigError: If ``key`` lists nothing or a listed path does not exist
    """
    if not paths:
        raise ConfigError(f"'{key}' must list at least one log file or directory", key=key)
    resolved = cfg.resolve_all(paths)
    missing = [str(p) for p in resolved if not p.exists()]
    if missing:
        raise ConfigError(f"Dataset paths not found: {', '.join(missing)}", key=key)
    return load_dataset(resolved, cfg.dynamics)


def replay_records(
    log: HopLog,
    cfg: RunConfig,
    params: EstimatorParams | None = None,
    kind: FilterKind | None = None,
) -> tuple[EstimatorTrace, list[HopRecord]]:
    trace = replay(
        log,
        params or cfg.hvse.params,
        kind or cfg.hvse.filter,
        cfg.dynamics,
        hpe_config=cfg.hpe,
    )
    return trace, build_hop_records(log, trace, cfg.dynamics)


def hop_frame(records: Sequence[HopRecord], **labels: object) -> pd.DataFrame:
    """One row per hop with its apex and touchdown summary."""
    rows = [
        {
            **labels,
            "hop": rec.index,
            "h_desired": rec.h_desired,
            "t_TD": rec.t_TD,
            "h_TD": rec.h_TD,
            "t_HA": rec.t_HA,
            "h_HA": rec.h_HA,
            "t_HA_true": rec.t_HA_true,
            "h_HA_true": rec.h_HA_true,
        }
        for rec in records
    ]
    return pd.DataFrame(rows)


__all__: list[str] = [
    "DOMAIN_ERRORS",
    "hop_frame",
    "load_trials",
    "output_dir",
    "replay_records",
]
