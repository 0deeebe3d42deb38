"""simulate: closed-loop trials written as hop logs, with metrics."""

import asyncio
import logging
from dataclasses import dataclass
from typing import Any

import pandas as pd

from ..cli import app
from ..models import (
    ControlSource,
    EstimatorParams,
    FilterKind,
    HpeConfig,
    MetricsReport,
    RobotParams,
    SensorConfig,
)
from ..services.config import RunConfig
from ..services.dataset import DataError, HopLog, hoplog_csv, parse_hoplog, write_hoplog
from ..services.metrics import compute_metrics, report_row, trial_agility
from ..services.runner import execute
from ..services.simulation import HeightSchedule, simulate_trial, trial_seed
from ..utils.files import write_frame_csv, write_json
from ..utils.results import BatchFailure, exception_response, require_outputs
from .common import DOMAIN_ERRORS, hop_frame, output_dir, replay_records

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SimulationJob:
    robot: RobotParams
    est_params: EstimatorParams
    kind: FilterKind
    sensing: SensorConfig
    schedule: HeightSchedule
    duration: float
    control_source: ControlSource
    control_rate: float | None
    hpe: HpeConfig
    seed: int


def trial_name(index: int) -> str:
    return f"trial{index:03d}"


def _simulate_item(job: SimulationJob, index: int) -> str:
    log = simulate_trial(
        job.robot,
        job.est_params,
        job.kind,
        job.sensing,
        job.schedule,
        job.duration,
        trial_seed(job.seed, index),
        control_source=job.control_source,
        control_rate=job.control_rate,
        hpe_config=job.hpe,
        name=trial_name(index),
    )
    return hoplog_csv(log)


async def simulate_logs(
    job: SimulationJob, indices: dict[str, int], workers: int
) -> dict[str, HopLog]:
    """Run trials in parallel; logs travel back from workers as CSV text.

    Raises:
        BatchFailure: If any trial failed
    """
    raw = await execute(_simulate_item, indices, shared=job, workers=workers, label="simulate")
    outputs = require_outputs(raw)
    return {key: parse_hoplog(outputs[key], name=key, robot=job.robot) for key in indices}


def _job(cfg: RunConfig) -> SimulationJob:
    return SimulationJob(
        robot=cfg.dynamics,
        est_params=cfg.hvse.params,
        kind=cfg.hvse.filter,
        sensing=cfg.sensing,
        schedule=cfg.cli.schedule,
        duration=cfg.cli.duration,
        control_source=cfg.cli.control_source,
        control_rate=None,
        hpe=cfg.hpe,
        seed=cfg.cli.seed,
    )


def _trial_report(log: HopLog, cfg: RunConfig, records: list) -> MetricsReport | None:
    try:
        report = compute_metrics(records, cfg.metrics.aerial_only)
    except DataError as e:
        logger.warning("No metrics for %s: %s", log.name, e)
        return None
    return report.model_copy(update={"agility": trial_agility(log)})


def _summarize(logs: dict[str, HopLog], cfg: RunConfig) -> dict[str, Any]:
    out = output_dir(cfg)
    log_dir = output_dir(cfg, "logs")
    paths = [str(write_hoplog(log, log_dir / f"{name}.csv")) for name, log in logs.items()]

    all_records = []
    trial_reports: dict[str, Any] = {}
    rows = []
    hop_frames = []
    for name, log in logs.items():
        _, records = replay_records(log, cfg)
        all_records.extend(records)
        hop_frames.append(hop_frame(records, trial=name))
        report = _trial_report(log, cfg, records)
        trial_reports[name] = report.model_dump() if report else None
        if report is not None:
            rows.append(report_row(report, trial=name))

    overall = compute_metrics(all_records, cfg.metrics.aerial_only) if all_records else None
    if overall is not None:
        rows.append(report_row(overall, trial="all"))
    payload = {
        "control_source": str(cfg.cli.control_source),
        "filter": str(cfg.hvse.filter),
        "overall": overall.model_dump() if overall else None,
        "trials": trial_reports,
    }
    metrics_path = write_json(out / "metrics.json", payload)
    write_frame_csv(out / "metrics.csv", pd.DataFrame(rows))
    write_frame_csv(out / "hops.csv", pd.concat(hop_frames, ignore_index=True))
    return {
        "logs": paths,
        "metrics": str(metrics_path),
        "n_hops": len(all_records),
        "overall": payload["overall"],
    }


@app.command("simulate", help="Fly closed-loop trials, write hop logs and metrics")
async def simulate(cfg: RunConfig) -> dict[str, Any]:
    """Simulate ``cli.trials`` trials and write logs plus a metrics report.

    Returns:
        Summary with written paths and the overall report, or an error payload
    """
    job = _job(cfg)
    indices = {trial_name(k): k for k in range(cfg.cli.trials)}
    try:
        logs = await simulate_logs(job, indices, cfg.cli.threads)
        return await asyncio.to_thread(_summarize, logs, cfg)
    except BatchFailure as e:
        return e.payload
    except DOMAIN_ERRORS as e:
        logger.exception("simulate failed")
        return exception_response(e)


__all__: list[str] = ["SimulationJob", "simulate", "simulate_logs", "trial_name"]
