"""sweep-freq: estimation error versus sensing and estimation frequency.

Every frequency runs once with sensor noise and once without, so the
noise-free run isolates the effect of aliasing. The controller flies on the
true state in both.
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..cli import app
from ..models import (
    ControlSource,
    EstimatorParams,
    FilterKind,
    HpeConfig,
    RobotParams,
    SensorConfig,
)
from ..services.config import RunConfig
from ..services.dataset import HopLog
from ..services.dynamics import DynamicsFault
from ..services.hvse import EstimatorFault
from ..services.metrics import error_growth
from ..services.runner import execute
from ..services.simulation import simulate_trial
from ..utils.files import write_frame_csv
from ..utils.results import BatchFailure, exception_response, require_outputs
from .common import DOMAIN_ERRORS, output_dir

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SweepJob:
    robot: RobotParams
    est_params: EstimatorParams
    kind: FilterKind
    sensing: SensorConfig
    hpe: HpeConfig
    h_ch: float
    control_rate: float
    duration: float
    tail: float
    settle: float
    growth_window: float
    seed: int


def _error_stats(log: HopLog, job: SweepJob) -> dict[str, Any]:
    row: dict[str, Any] = {"n_samples": len(log)}
    late = log.t >= log.t[-1] - job.tail
    for label, err in (("z", log.z_est - log.z_true), ("v", log.v_est - log.v_true)):
        row[f"mean_{label}"] = float(np.mean(err))
        row[f"mean_abs_{label}"] = float(np.mean(np.abs(err)))
        row[f"std_{label}"] = float(np.std(err))
        row[f"tail_std_{label}"] = float(np.std(err[late]))
    if log.t[-1] - log.t[0] < job.settle + 2.0 * job.growth_window:
        logger.debug("Run %s too short to classify error growth", log.name)
        row["growth_slope"] = float("nan")
        row["unbounded"] = False
        return row
    growth = error_growth(
        log.t, log.z_est - log.z_true, window=job.growth_window, settle=job.settle
    )
    row["growth_slope"] = growth["slope"]
    row["unbounded"] = growth["unbounded"]
    return row


def _sweep_item(job: SweepJob, item: tuple[float, bool]) -> dict[str, Any]:
    frequency, noisy = item
    sensing = job.sensing.model_copy(update={"sensor_rate": frequency, "est_rate": frequency})
    if not noisy:
        sensing = sensing.noiseless()
    row: dict[str, Any] = {"frequency": frequency, "noise": noisy, "fault": ""}
    try:
        log = simulate_trial(
            job.robot,
            job.est_params,
            job.kind,
            sensing,
            job.h_ch,
            job.duration,
            job.seed,
            control_source=ControlSource.GT,
            control_rate=job.control_rate,
            hpe_config=job.hpe,
            name=f"f{frequency:g}_{'noise' if noisy else 'clean'}",
        )
    except (EstimatorFault, DynamicsFault) as e:
        logger.warning("Sweep run at %g Hz (noise=%s) faulted: %s", frequency, noisy, e)
        row.update({"fault": e.code, "unbounded": True})
        return row
    row.update(_error_stats(log, job))
    return row


def sweep_items(frequencies: list[float]) -> dict[str, tuple[float, bool]]:
    return {
        f"{f:g}Hz_{'noise' if noisy else 'clean'}": (float(f), noisy)
        for f in frequencies
        for noisy in (True, False)
    }


@app.command("sweep-freq", help="Error statistics versus sensing/estimation frequency")
async def sweep_freq(cfg: RunConfig) -> dict[str, Any]:
    """One noisy and one noise-free trial per frequency at ``sweep.h_ch``."""
    sw = cfg.sweep
    job = SweepJob(
        robot=cfg.dynamics,
        est_params=cfg.hvse.params,
        kind=cfg.hvse.filter,
        sensing=cfg.sensing,
        hpe=cfg.hpe,
        h_ch=sw.h_ch,
        control_rate=sw.control_rate,
        duration=sw.duration,
        tail=sw.tail,
        settle=sw.settle,
        growth_window=sw.growth_window,
        seed=cfg.cli.seed,
    )
    items = sweep_items(sw.frequencies)
    try:
        raw = await execute(_sweep_item, items, shared=job, workers=cfg.cli.threads, label="sweep")
        outputs = require_outputs(raw)
        frame = pd.DataFrame([outputs[key] for key in items])
        frame = frame.sort_values(["frequency", "noise"], ascending=[False, False], kind="stable")
        path = write_frame_csv(output_dir(cfg) / "sweep.csv", frame)
    except BatchFailure as e:
        return e.payload
    except DOMAIN_ERRORS as e:
        logger.exception("sweep-freq failed")
        return exception_response(e)

    unbounded = sorted(
        {float(r["frequency"]) for r in outputs.values() if r.get("unbounded")}, reverse=True
    )
    return {"sweep": str(path), "frequencies": len(sw.frequencies), "unbounded": unbounded}


__all__: list[str] = ["SweepJob", "sweep_freq", "sweep_items"]
