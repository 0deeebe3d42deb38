"""Filesystem helpers for run artifacts."""

import json
import os
import tempfile
from pathlib import Path
from typing import Any

import pandas as pd


def ensure_output_directory(out_dir: str | Path) -> Path:
    """Create the output directory if it doesn't exist.

    Args:
        out_dir: Path to the directory to create

    Returns:
        Resolved Path object pointing to the directory

    Raises:
        ValueError: If the path attempts directory traversal using '..'
    """
    if ".." in Path(out_dir).parts:
        raise ValueError("Directory traversal using '..' is not allowed.")

    path = Path(out_dir).expanduser().resolve()
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_atomic(path: Path, content: str) -> Path:
    """Write ``content`` to a temporary file next to ``path``, then rename it.

    Returns:
        Path to the written file
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(content)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def write_json(path: Path, payload: Any) -> Path:
    return write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_frame_csv(path: Path, frame: pd.DataFrame) -> Path:
    return write_atomic(
        path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    )


__all__: list[str] = [
    "ensure_output_directory",
    "write_atomic",
    "write_frame_csv",
    "write_json",
]
