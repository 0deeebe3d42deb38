"""sensitivity: cost sensitivity around a parameter set."""

import asyncio
import logging
from typing import Any

import pandas as pd

from ..cli import app
from ..services.config import RunConfig
from ..services.trainer import sensitivity_sweep
from ..utils.files import write_frame_csv
from ..utils.results import exception_response
from .common import DOMAIN_ERRORS, load_trials, output_dir

logger = logging.getLogger(__name__)


def _sensitivity(cfg: RunConfig) -> dict[str, Any]:
    ds = load_trials(cfg, cfg.trainer.dataset, "trainer.dataset")
    rows = sensitivity_sweep(
        cfg.hvse.params,
        ds,
        cfg.hvse.filter,
        cfg.trainer.sensitivity_fractions,
        robot=cfg.dynamics,
        hpe_config=cfg.hpe,
        workers=cfg.cli.threads,
    )
    path = write_frame_csv(output_dir(cfg) / "sensitivity.csv", pd.DataFrame(rows))
    return {"sensitivity": str(path), "rows": len(rows)}


@app.command("sensitivity", help="Percent cost change per percent parameter change")
async def sensitivity(cfg: RunConfig) -> dict[str, Any]:
    try:
        return await asyncio.to_thread(_sensitivity, cfg)
    except DOMAIN_ERRORS as e:
        logger.exception("sensitivity failed")
        return exception_response(e)


__all__: list[str] = ["sensitivity"]
