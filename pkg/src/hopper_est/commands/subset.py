"""subset: stratified hop subsets of a dataset."""

import asyncio
import logging
from typing import Any

from ..cli import app
from ..services.config import RunConfig
from ..services.dataset import stratified_subset, write_hoplog
from ..utils.files import write_json
from ..utils.results import exception_response
from .common import DOMAIN_ERRORS, load_trials, output_dir

logger = logging.getLogger(__name__)


def _subset(cfg: RunConfig) -> dict[str, Any]:
    ds = load_trials(cfg, cfg.subset.dataset, "subset.dataset")
    chosen = stratified_subset(ds, cfg.subset.per_height, seed=cfg.cli.seed)
    hop_dir = output_dir(cfg, "subset")
    paths = [str(write_hoplog(hop, hop_dir / f"{hop.name}.csv")) for hop in chosen.trials]
    manifest = write_json(
        output_dir(cfg) / "subset.json",
        {
            "seed": cfg.cli.seed,
            "per_height": {f"{h:g}": n for h, n in (chosen.subset_spec or {}).items()},
            "hops": [hop.name for hop in chosen.trials],
        },
    )
    return {"manifest": str(manifest), "hops": paths}


@app.command("subset", help="Write a stratified subset of hops per commanded height")
async def subset(cfg: RunConfig) -> dict[str, Any]:
    try:
        return await asyncio.to_thread(_subset, cfg)
    except DOMAIN_ERRORS as e:
        logger.exception("subset failed")
        return exception_response(e)


__all__: list[str] = ["subset"]
