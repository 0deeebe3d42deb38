"""Hop logs, datasets and CSV ingestion.

A HopLog holds one row per estimator tick. Logs are the interchange format
between simulation, training and evaluation, so everything written here must
read back bit-for-bit.
"""

import io
import logging
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..models import EventKind, RobotParams
from ..utils.files import write_atomic
from .dynamics import PENETRATION_TOL, detect_true_transitions, td_body_height

logger = logging.getLogger(__name__)

FLOAT_COLUMNS: tuple[str, ...] = (
    "t",
    "z_true",
    "v_true",
    "a_true",
    "a_lowg",
    "a_highg",
    "a_world_est",
    "z_est",
    "v_est",
    "P00",
    "P01",
    "P11",
    "twr",
    "h_desired",
)
COLUMNS: tuple[str, ...] = (
    "t",
    "z_true",
    "v_true",
    "a_true",
    "a_lowg",
    "a_highg",
    "a_world_est",
    "phase",
    "event",
    "z_est",
    "v_est",
    "P00",
    "P01",
    "P11",
    "twr",
    "h_desired",
    "contact",
)
HEIGHT_DECIMALS = 6
RATE_SNAP = 1e-3


class DataError(ValueError):
    """Raised for malformed logs and unusable datasets."""

    def __init__(self, message: str, code: str = "data_error", details: dict | None = None):
        super().__init__(message)
        self.code = code
        self.details = details


@dataclass(frozen=True, slots=True, eq=False)
class HopLog:
    """Time series of one trial (or one hop segment of a trial)."""

    name: str
    t: np.ndarray
    z_true: np.ndarray
    v_true: np.ndarray
    a_true: np.ndarray
    a_lowg: np.ndarray
    a_highg: np.ndarray
    a_world_est: np.ndarray
    phase: np.ndarray
    event: np.ndarray
    z_est: np.ndarray
    v_est: np.ndarray
    P00: np.ndarray
    P01: np.ndarray
    P11: np.ndarray
    twr: np.ndarray
    h_desired: np.ndarray
    contact: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def est_rate(self) -> float:
        """Tick rate in Hz, snapped to whole Hz when within ``RATE_SNAP`` of it.

        Simulated ticks sit on the integrator grid, so their spacing jitters by
        one internal step around the nominal period.
        """
        if len(self.t) < 2:
            raise DataError(f"Log {self.name} has fewer than two rows")
        rate = (len(self.t) - 1) / float(self.t[-1] - self.t[0])
        whole = round(rate)
        if whole > 0 and abs(rate - whole) <= RATE_SNAP * rate:
            return float(whole)
        return rate

    @property
    def dt(self) -> float:
        return 1.0 / self.est_rate

    def slice(self, start: int, stop: int, name: str | None = None) -> "HopLog":
        arrays = {col: getattr(self, col)[start:stop].copy() for col in COLUMNS}
        return HopLog(name=name or f"{self.name}[{start}:{stop}]", **arrays)

    def equals(self, other: "HopLog") -> bool:
        """Bitwise comparison of every column."""
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, col), getattr(other, col)) for col in COLUMNS
        )

    def events(self) -> list[tuple[int, EventKind]]:
        rows = np.flatnonzero(self.event != "")
        return [(int(i), EventKind(self.event[i])) for i in rows]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({col: getattr(self, col) for col in COLUMNS})
        frame["contact"] = frame["contact"].astype(np.int8)
        return frame

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, name: str, robot: RobotParams | None = None
    ) -> "HopLog":
        """Validate and convert a frame; ``contact`` is inferred when absent.

        Raises:
            DataError: On missing columns, non-numeric or non-finite values, or
                non-increasing time
        """
        required = [col for col in COLUMNS if col != "contact"]
        missing = [col for col in required if col not in frame.columns]
        if missing:
            raise DataError(
                f"Log {name} is missing columns: {', '.join(missing)}",
                details={"missing": missing},
            )

        arrays: dict[str, np.ndarray] = {}
        for col in FLOAT_COLUMNS:
            try:
                values = pd.to_numeric(frame[col], errors="raise").to_numpy(dtype=float)
            except (TypeError, ValueError) as exc:
                raise DataError(f"Log {name}: column {col} is not numeric") from exc
            if not np.isfinite(values).all():
                row = int(np.flatnonzero(~np.isfinite(values))[0])
                raise DataError(f"Log {name}: non-finite {col} at row {row}")
            arrays[col] = values
        if len(arrays["t"]) > 1 and not (np.diff(arrays["t"]) > 0.0).all():
            raise DataError(f"Log {name}: time is not strictly increasing")

        arrays["phase"] = frame["phase"].fillna("").astype(str).to_numpy(dtype=object)
        arrays["event"] = frame["event"].fillna("").astype(str).to_numpy(dtype=object)
        bad = sorted(set(arrays["event"]) - {"", *EventKind})
        if bad:
            raise DataError(f"Log {name}: unknown event labels {bad}")

        if "contact" in frame.columns:
            arrays["contact"] = frame["contact"].to_numpy().astype(bool)
        else:
            arrays["contact"] = infer_contact(arrays["z_true"], robot or RobotParams())
        return cls(name=name, **arrays)

    def commanded_height(self, index: int | None = None) -> float:
        """Commanded apex height at ``index`` (default: the log's median)."""
        if index is None:
            return float(np.median(self.h_desired))
        return float(self.h_desired[index])


def infer_contact(z_true: np.ndarray, rp: RobotParams) -> np.ndarray:
    """Foot contact from body height for ingested logs without a contact column."""
    return np.asarray(z_true) < td_body_height(rp) - PENETRATION_TOL


def _read_frame(source: str | Path | io.StringIO, label: str) -> pd.DataFrame:
    try:
        return pd.read_csv(
            source,
            keep_default_na=False,
            dtype={"phase": str, "event": str},
            float_precision="round_trip",
        )
    except FileNotFoundError as exc:
        raise DataError(f"Log file not found: {label}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"Could not parse {label}: {exc}") from exc


def read_hoplog(path: str | Path, robot: RobotParams | None = None) -> HopLog:
    path = Path(path)
    return HopLog.from_frame(_read_frame(path, str(path)), name=path.stem, robot=robot)


def parse_hoplog(text: str, name: str, robot: RobotParams | None = None) -> HopLog:
    """Parse CSV text produced by ``hoplog_csv``."""
    return HopLog.from_frame(_read_frame(io.StringIO(text), name), name=name, robot=robot)


def hoplog_csv(log: HopLog) -> str:
    buffer = io.StringIO()
    log.to_frame().to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def write_hoplog(log: HopLog, path: str | Path) -> Path:
    return write_atomic(Path(path), hoplog_csv(log))


@dataclass(frozen=True, slots=True)
class Dataset:
    """Trials used for training or evaluation.

    ``subset_spec`` records the hops-per-height request that produced a
    stratified subset.
    """

    trials: tuple[HopLog, ...]
    subset_spec: dict[float, int] | None = None

    def __post_init__(self) -> None:
        for log in self.trials:
            if not any(tr.kind is EventKind.HA for tr in detect_true_transitions(log)):
                raise DataError(f"Trial {log.name} has no true hop apex")

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def n_samples(self) -> int:
        return sum(len(log) for log in self.trials)


def _csv_paths(paths: Iterable[str | Path]) -> list[Path]:
    resolved: list[Path] = []
    for entry in paths:
        path = Path(entry)
        if path.is_dir():
            resolved.extend(sorted(path.glob("*.csv")))
        else:
            resolved.append(path)
    return resolved


def load_dataset(paths: Iterable[str | Path], robot: RobotParams | None = None) -> Dataset:
    """Read every CSV log from files or directories (sorted within a directory)."""
    logs = [read_hoplog(path, robot) for path in _csv_paths(paths)]
    if not logs:
        raise DataError("No hop logs found in the given dataset paths")
    logger.info("Loaded %d logs (%d rows)", len(logs), sum(len(x) for x in logs))
    return Dataset(tuple(logs))


def split_hops(log: HopLog) -> list[HopLog]:
    """Cut a trial into hop segments, one per true apex.

    A segment starts right after the previous apex (the first at the trial
    start), contains the drop, stance and rebound, and ends just before the
    touchdown that follows its own apex so the apex is never the final row.
    """
    transitions = detect_true_transitions(log)
    apexes = [tr.index for tr in transitions if tr.kind is EventKind.HA]
    touchdowns = np.array([tr.index for tr in transitions if tr.kind is EventKind.TD])
    segments = []
    start = 0
    for n, apex in enumerate(apexes):
        pos = int(np.searchsorted(touchdowns, apex, side="right"))
        stop = int(touchdowns[pos]) if pos < len(touchdowns) else len(log)
        segments.append(log.slice(start, stop, name=f"{log.name}_hop{n:03d}"))
        start = apex + 1
    return segments


def hop_height(hop: HopLog) -> float:
    """Commanded height at a segment's true apex, rounded for grouping."""
    apex = next(tr.index for tr in detect_true_transitions(hop) if tr.kind is EventKind.HA)
    return round(hop.commanded_height(apex), HEIGHT_DECIMALS)


def hops_by_height(ds: Dataset) -> dict[float, list[HopLog]]:
    grouped: dict[float, list[HopLog]] = defaultdict(list)
    for log in ds.trials:
        for hop in split_hops(log):
            grouped[hop_height(hop)].append(hop)
    return dict(sorted(grouped.items()))


def stratified_subset(
    ds: Dataset, per_height: int | Mapping[float, int], seed: int = 0
) -> Dataset:
    """Pick ``per_height`` hops at each commanded height without replacement.

    Raises:
        DataError: If any height has fewer hops than requested; ``details``
            maps each short height to the number of missing hops
    """
    grouped = hops_by_height(ds)
    if isinstance(per_height, Mapping):
        request = {round(float(h), HEIGHT_DECIMALS): int(c) for h, c in per_height.items()}
    else:
        request = {height: int(per_height) for height in grouped}

    shortfall = {
        height: count - len(grouped.get(height, []))
        for height, count in request.items()
        if count > len(grouped.get(height, []))
    }
    if shortfall:
        raise DataError(
            "Not enough hops for the requested subset: "
            + ", ".join(f"{h:g} m short by {n}" for h, n in shortfall.items()),
            details={"shortfall": shortfall},
        )

    rng = np.random.default_rng(seed)
    chosen: list[HopLog] = []
    for height, count in sorted(request.items()):
        hops = grouped.get(height, [])
        picks = np.sort(rng.choice(len(hops), size=count, replace=False))
        chosen.extend(hops[int(i)] for i in picks)
        logger.info("Selected %d of %d hops at %g m", count, len(hops), height)
    return Dataset(tuple(chosen), subset_spec=request)


__all__: list[str] = [
    "COLUMNS",
    "FLOAT_COLUMNS",
    "HEIGHT_DECIMALS",
    "RATE_SNAP",
    "DataError",
    "Dataset",
    "HopLog",
    "hop_height",
    "hoplog_csv",
    "hops_by_height",
    "infer_contact",
    "load_dataset",
    "parse_hoplog",
    "read_hoplog",
    "split_hops",
    "stratified_subset",
    "write_hoplog",
]
