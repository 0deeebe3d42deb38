"""evaluate: replay recorded logs through the estimator and the baselines."""

import asyncio
import logging
from collections import defaultdict
from typing import Any

import pandas as pd

from ..cli import app
from ..models import BaselineKind, MetricsReport
from ..services.baselines import baseline_estimates
from ..services.config import RunConfig
from ..services.dataset import HEIGHT_DECIMALS, DataError, Dataset
from ..services.metrics import (
    HopRecord,
    build_hop_records,
    compare_estimators,
    compute_metrics,
    optical_flow_error_proxy,
    report_row,
)
from ..utils.files import write_frame_csv, write_json
from ..utils.filters import apply_filters
from ..utils.results import exception_response
from .common import DOMAIN_ERRORS, hop_frame, load_trials, output_dir, replay_records

logger = logging.getLogger(__name__)

ESTIMATOR = "hvse"


def _by_height(records: list[HopRecord]) -> dict[float, list[HopRecord]]:
    grouped: dict[float, list[HopRecord]] = defaultdict(list)
    for rec in records:
        grouped[round(rec.h_desired, HEIGHT_DECIMALS)].append(rec)
    return dict(sorted(grouped.items()))


def _baseline_records(ds: Dataset, kind: BaselineKind, cfg: RunConfig) -> list[HopRecord]:
    records: list[HopRecord] = []
    for log in ds.trials:
        trace = baseline_estimates(log, kind, cfg.dynamics, cfg.hvse.params, cfg.hpe)
        records.extend(build_hop_records(log, trace, cfg.dynamics))
    return records


def _report(records: list[HopRecord], cfg: RunConfig) -> MetricsReport:
    return compute_metrics(records, cfg.metrics.aerial_only)


def _evaluate(cfg: RunConfig) -> dict[str, Any]:
    ds = load_trials(cfg, cfg.metrics.dataset, "metrics.dataset")
    try:
        ds = apply_filters(ds, cfg.metrics.heights, cfg.metrics.names)
    except ValueError as e:
        raise DataError(str(e)) from e

    records: list[HopRecord] = []
    frames = []
    for log in ds.trials:
        _, recs = replay_records(log, cfg)
        records.extend(recs)
        frames.append(hop_frame(recs, trial=log.name))
    if not records:
        raise DataError("No complete hops in the evaluation dataset")

    overall = _report(records, cfg)
    rows = [report_row(overall, estimator=ESTIMATOR, height="all")]
    per_height: dict[str, Any] = {}
    for height, recs in _by_height(records).items():
        try:
            report = _report(recs, cfg)
        except DataError as e:
            logger.warning("No metrics at %g m: %s", height, e)
            continue
        per_height[f"{height:g}"] = report.model_dump()
        rows.append(report_row(report, estimator=ESTIMATOR, height=height))

    baselines: dict[str, Any] = {}
    comparisons: dict[str, Any] = {}
    if cfg.metrics.baselines:
        for kind in BaselineKind:
            try:
                recs = _baseline_records(ds, kind, cfg)
                report = _report(recs, cfg)
            except DataError as e:
                logger.warning("Baseline %s skipped: %s", kind, e)
                continue
            baselines[str(kind)] = report.model_dump()
            rows.append(report_row(report, estimator=str(kind), height="all"))
            comparisons[str(kind)] = [
                t.model_dump() for t in compare_estimators(records, recs, cfg.metrics.aerial_only)
            ]

    out = output_dir(cfg)
    payload = {
        "filter": str(cfg.hvse.filter),
        "params": cfg.hvse.params.model_dump(),
        "overall": overall.model_dump(),
        "optical_flow_error": optical_flow_error_proxy(overall.M1),
        "per_height": per_height,
        "baselines": baselines,
        "t_tests": comparisons,
    }
    path = write_json(out / "evaluation.json", payload)
    write_frame_csv(out / "evaluation.csv", pd.DataFrame(rows))
    write_frame_csv(out / "hops.csv", pd.concat(frames, ignore_index=True))
    return {"evaluation": str(path), "n_hops": overall.n_hops, "overall": payload["overall"]}


@app.command("evaluate", help="Replay logs through the estimator and the baselines")
async def evaluate(cfg: RunConfig) -> dict[str, Any]:
    """Metrics overall and per commanded height, baseline reports and t-tests."""
    try:
        return await asyncio.to_thread(_evaluate, cfg)
    except DOMAIN_ERRORS as e:
        logger.exception("evaluate failed")
        return exception_response(e)


__all__: list[str] = ["evaluate"]
