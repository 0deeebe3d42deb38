"""agility: agility metrics for a table of hopping platforms."""

import asyncio
import logging
from typing import Any

import pandas as pd
from pydantic import ValidationError

from ..cli import app
from ..models import AgilityInputs
from ..services.config import ConfigError, RunConfig
from ..services.dataset import DataError
from ..services.metrics import AgilityError, agility
from ..utils.files import write_frame_csv
from ..utils.results import exception_response
from .common import DOMAIN_ERRORS, output_dir

logger = logging.getLogger(__name__)

INPUT_FIELDS = tuple(AgilityInputs.model_fields)


def _row_inputs(row: pd.Series) -> dict[str, Any]:
    return {
        name: float(row[name])
        for name in INPUT_FIELDS
        if name in row.index and pd.notna(row[name]) and str(row[name]).strip() != ""
    }


def _describe(exc: Exception) -> str:
    if isinstance(exc, ValidationError):
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        return f"{where}: {first['msg']}" if where else first["msg"]
    return str(exc)


def agility_table(frame: pd.DataFrame) -> tuple[pd.DataFrame, list[dict[str, Any]]]:
    """Compute the metrics for every row; a bad row is reported, not fatal.

    Returns:
        The input columns extended with the results and an ``error`` column,
        plus the list of row-numbered failures (rows counted from 1)
    """
    results: list[dict[str, Any]] = []
    failures: list[dict[str, Any]] = []
    for number, (_, row) in enumerate(frame.iterrows(), start=1):
        out: dict[str, Any] = {"error": ""}
        try:
            res = agility(AgilityInputs.model_validate(_row_inputs(row)))
        except (ValidationError, AgilityError, ValueError) as e:
            message = _describe(e)
            logger.warning("Agility row %d rejected: %s", number, message)
            out["error"] = f"row {number}: {message}"
            failures.append({"row": number, "message": message})
        else:
            for key, value in res.model_dump().items():
                out[f"{key}_computed" if key in frame.columns else key] = value
        results.append(out)
    table = pd.concat([frame.reset_index(drop=True), pd.DataFrame(results)], axis=1)
    return table, failures


def _agility(cfg: RunConfig) -> dict[str, Any]:
    if cfg.agility.inputs is None:
        raise ConfigError("'agility.inputs' must name a CSV of platform rows", key="agility.inputs")
    path = cfg.resolve(cfg.agility.inputs)
    if not path.is_file():
        raise ConfigError(f"Agility inputs not found: {path}", key="agility.inputs")
    try:
        frame = pd.read_csv(path, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"{path}: cannot parse agility table: {e}") from e
    if "h1" not in frame.columns:
        raise DataError(f"{path}: agility table needs an 'h1' column")

    table, failures = agility_table(frame)
    out = write_frame_csv(output_dir(cfg) / "agility.csv", table)
    return {"agility": str(out), "rows": len(table), "failed": failures}


@app.command(
    "agility",
    help="Vertical jumping, hopping and unified agility for a table of platforms",
    arguments=[("--inputs", {"help": "CSV of platform rows (overrides agility.inputs)"})],
)
async def agility_command(cfg: RunConfig) -> dict[str, Any]:
    try:
        return await asyncio.to_thread(_agility, cfg)
    except DOMAIN_ERRORS as e:
        logger.exception("agility failed")
        return exception_response(e)


__all__: list[str] = ["agility_command", "agility_table"]
