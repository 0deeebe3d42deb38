"""train: genetic-algorithm training of estimator parameters."""

import asyncio
import logging
from typing import Any

import pandas as pd

from ..cli import app
from ..services.config import RunConfig
from ..services.trainer import GaResult, run_ga
from ..utils.files import write_frame_csv, write_json
from ..utils.results import exception_response
from .common import DOMAIN_ERRORS, load_trials, output_dir

logger = logging.getLogger(__name__)


def _write(result: GaResult, cfg: RunConfig) -> dict[str, Any]:
    out = output_dir(cfg)
    params_path = write_json(out / "best_params.json", result.best.model_dump())
    history_path = write_frame_csv(out / "history.csv", pd.DataFrame(result.history))
    write_json(
        out / "training.json",
        {
            "filter": str(cfg.hvse.filter),
            "trained": list(result.names),
            "cost": result.best_cost.model_dump(),
            "ga": cfg.trainer.ga.model_dump(mode="json"),
        },
    )
    return {
        "best_params": str(params_path),
        "history": str(history_path),
        "cost": result.best_cost.model_dump(),
        "generations": len(result.history),
    }


def _train(cfg: RunConfig) -> dict[str, Any]:
    ds = load_trials(cfg, cfg.trainer.dataset, "trainer.dataset")
    result = run_ga(
        cfg.trainer.ga,
        ds,
        cfg.hvse.filter,
        base=cfg.hvse.params,
        robot=cfg.dynamics,
        hpe_config=cfg.hpe,
        workers=cfg.cli.threads,
    )
    logger.info("Training finished: best L_c %.4f", result.best_cost.L_c)
    return _write(result, cfg)


@app.command("train", help="Train estimator parameters on recorded hop logs")
async def train(cfg: RunConfig) -> dict[str, Any]:
    """Run the genetic algorithm over ``trainer.dataset``.

    Writes ``best_params.json`` (loadable as ``hvse.params_file``),
    ``history.csv`` and ``training.json``.
    """
    try:
        return await asyncio.to_thread(_train, cfg)
    except DOMAIN_ERRORS as e:
        logger.exception("train failed")
        return exception_response(e)


__all__: list[str] = ["train"]
