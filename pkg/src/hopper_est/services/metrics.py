"""Error metrics, ground-height tracking, agility and estimator comparison.

Hops are TD-to-TD windows cut on the true transitions. Apex estimates come
from the estimator's own HA events, and aerial-only statistics use the
detected phase, as an onboard consumer would see them.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..models import (
    AgilityInputs,
    AgilityResult,
    EventKind,
    MetricsReport,
    Phase,
    RobotParams,
    TTestResult,
)
from .dataset import DataError, HopLog
from .dynamics import detect_true_transitions
from .estimator import EstimatorTrace
from .hvse import compute_Lf

logger = logging.getLogger(__name__)

_AERIAL_LABELS = np.array([str(Phase.DROP), str(Phase.REBOUND)], dtype=object)
_ZERO_DENOMINATOR = 1e-12


class AgilityError(ValueError):
    def __init__(self, message: str, code: str = "agility_error") -> None:
        super().__init__(message)
        self.code = code


@dataclass(frozen=True, slots=True, eq=False)
class HopRecord:
    """One TD-to-TD hop with its truth and estimates.

    ``h_TD`` is the estimated height just before the touchdown update,
    relative to the nominal touchdown height, so it reads zero on flat
    ground with perfect estimates. ``h_HA``/``t_HA`` are the estimated apex.
    """

    index: int
    h_desired: float
    t_TD: float
    t_HA: float
    h_TD: float
    h_HA: float
    h_HA_true: float
    t_HA_true: float
    z: np.ndarray
    z_hat: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    aerial: np.ndarray

    def __post_init__(self) -> None:
        if not self.t_TD < self.t_HA_true:
            raise ValueError(f"Hop {self.index}: touchdown must precede the apex")
        n = len(self.z)
        if any(len(a) != n for a in (self.z_hat, self.v, self.v_hat, self.aerial)):
            raise ValueError(f"Hop {self.index}: sample arrays differ in length")


def _first_event(trace: EstimatorTrace, kind: EventKind, lo: int, hi: int) -> int | None:
    for i, ev in trace.events:
        if lo <= i < hi and ev.kind == kind:
            return i
    return None


def build_hop_records(
    log: HopLog, trace: EstimatorTrace, robot: RobotParams | None = None
) -> list[HopRecord]:
    """Cut a replayed log into hop records.

    A hop without a true apex before the next touchdown (or the log end) is
    dropped. When the estimator emitted no HA inside a hop the highest
    estimate after liftoff stands in for its apex.
    """
    if len(trace) != len(log):
        raise DataError(f"Trace length {len(trace)} does not match log {log.name}")
    offset = compute_Lf(robot or RobotParams())
    transitions = detect_true_transitions(log)
    tds = [tr.index for tr in transitions if tr.kind is EventKind.TD]
    los = [tr.index for tr in transitions if tr.kind is EventKind.LO]
    has = [tr.index for tr in transitions if tr.kind is EventKind.HA]
    aerial = np.isin(trace.phase, _AERIAL_LABELS)

    records: list[HopRecord] = []
    prev_apex = 0
    for k, td in enumerate(tds):
        stop = tds[k + 1] if k + 1 < len(tds) else len(log)
        apex = next((i for i in has if td < i < stop), None)
        if apex is None:
            continue
        lo = next((i for i in los if td < i < apex), td)

        td_est = _first_event(trace, EventKind.TD, prev_apex, apex)
        h_TD = (trace.z_prior[td_est] if td_est is not None else trace.z_est[td]) + offset
        ha_est = _first_event(trace, EventKind.HA, lo, stop)
        if ha_est is None:
            ha_est = lo + int(np.argmax(trace.z_est[lo:stop]))
            logger.debug("Hop %d of %s: no estimated apex, using max height", k, log.name)

        records.append(
            HopRecord(
                index=len(records),
                h_desired=float(log.h_desired[apex]),
                t_TD=float(log.t[td]),
                t_HA=float(trace.t[ha_est]),
                h_TD=float(h_TD),
                h_HA=float(trace.z_est[ha_est]),
                h_HA_true=float(log.z_true[apex]),
                t_HA_true=float(log.t[apex]),
                z=log.z_true[td:stop],
                z_hat=trace.z_est[td:stop],
                v=log.v_true[td:stop],
                v_hat=trace.v_est[td:stop],
                aerial=aerial[td:stop],
            )
        )
        prev_apex = apex
    return records


def _hop_errors(rec: HopRecord, aerial_only: bool) -> tuple[float, float] | None:
    """Per-hop normalized MAE of position and velocity (fractions)."""
    mask = rec.aerial if aerial_only else np.ones(len(rec.z), dtype=bool)
    if mask.sum() < 1:
        return None
    z, z_hat, v, v_hat = rec.z[mask], rec.z_hat[mask], rec.v[mask], rec.v_hat[mask]
    z_scale = float(np.mean(np.abs(z)))
    v_scale = float(np.mean(np.abs(v)))
    if z_scale <= _ZERO_DENOMINATOR or v_scale <= _ZERO_DENOMINATOR:
        return None
    return (
        float(np.mean(np.abs(z_hat - z))) / z_scale,
        float(np.mean(np.abs(v_hat - v))) / v_scale,
    )


def apex_errors(records: Sequence[HopRecord]) -> np.ndarray:
    """Absolute apex-height errors as fractions of the true apex."""
    return np.array([abs(r.h_HA - r.h_HA_true) / abs(r.h_HA_true) for r in records])


def compute_metrics(
    records: Sequence[HopRecord], aerial_only: bool = False
) -> MetricsReport:
    """M1-M5 and the gamma metrics over a set of hops.

    Raises:
        DataError: If there is no hop with at least two samples, or every
            hop was excluded from the normalized errors
    """
    usable = [r for r in records if len(r.z) >= 2]
    if not usable:
        raise DataError("Metrics need at least one hop with two or more samples")

    m1: list[float] = []
    m2: list[float] = []
    excluded: list[int] = []
    for rec in usable:
        errors = _hop_errors(rec, aerial_only)
        if errors is None:
            logger.warning("Hop %d excluded: zero mean truth in normalization", rec.index)
            excluded.append(rec.index)
            continue
        m1.append(errors[0])
        m2.append(errors[1])
    if not m1:
        raise DataError("Every hop was excluded from the normalized errors")

    apex = apex_errors(usable)
    z_err = np.concatenate([r.z_hat - r.z for r in usable])
    v_err = np.concatenate([r.v_hat - r.v for r in usable])
    return MetricsReport(
        M1=100.0 * float(np.mean(m1)),
        M2=100.0 * float(np.mean(m2)),
        M3=100.0 * float(np.mean(apex)),
        M4=float(np.mean([abs(r.t_HA - r.t_HA_true) for r in usable])),
        M5=float(np.mean([abs(r.h_HA_true - r.h_desired) for r in usable])),
        gamma1=float(np.mean(apex)),
        gamma2=float(np.sqrt(np.mean(z_err**2))),
        gamma3=float(np.sqrt(np.mean(v_err**2))),
        n_hops=len(usable),
        excluded_hops=excluded,
        ground_height=ground_height_track(usable).tolist() if len(usable) >= 2 else [],
    )


def ground_height_track(records: Sequence[HopRecord]) -> np.ndarray:
    """Cumulative ground-height estimate per hop, starting at zero.

    Each hop contributes the mean of the change in apex-over-touchdown
    height relative to the previous hop and its own touchdown offset.
    """
    if len(records) < 2:
        raise DataError("Ground-height tracking needs at least two hops")
    h_td = np.array([r.h_TD for r in records])
    h_ha = np.array([r.h_HA for r in records])
    rise = h_ha - h_td
    delta1 = np.diff(rise)
    delta2 = h_td[1:]
    return np.concatenate([[0.0], np.cumsum((delta1 + delta2) / 2.0)])


def _direct_times(a: AgilityInputs) -> tuple[float, float]:
    t_r = a.t_apogee - a.t_s
    if t_r <= 0.0:
        raise AgilityError(f"t_apogee ({a.t_apogee}) must exceed t_s ({a.t_s})")
    if a.t_cycle is None:
        return t_r, t_r
    t_d = a.t_cycle - a.t_apogee
    if t_d <= 0.0:
        raise AgilityError(f"t_cycle ({a.t_cycle}) must exceed t_apogee ({a.t_apogee})")
    return t_r, t_d


def agility(a: AgilityInputs) -> AgilityResult:
    """Unified hopping agility and its two special cases.

    Times come, in order of precedence, from explicit ``t_r``/``t_d``, from
    measured ``t_apogee``/``t_cycle``, or from the average rebound and drop
    accelerations implied by the gamma terms.

    Raises:
        AgilityError: On a non-positive phase acceleration or inconsistent times
    """
    rise_scale = 1.0 - a.gamma_r + a.gamma_lr
    drop_scale = 1.0 - a.gamma_d - a.gamma_ld
    if rise_scale <= 0.0 or drop_scale <= 0.0:
        raise AgilityError(
            f"Non-positive phase acceleration (rebound {rise_scale:g}, drop {drop_scale:g})"
        )
    h0_implied = a.zeta_s**2 * a.h1 * rise_scale / drop_scale
    h0 = a.h0 if a.h0 is not None else (a.h1 if a.t_apogee is not None else h0_implied)

    if a.t_apogee is not None:
        t_r, t_d = _direct_times(a)
    else:
        t_r = math.sqrt(2.0 * a.h1 / (a.g * rise_scale))
        t_d = math.sqrt(2.0 * h0 / (a.g * drop_scale))
    t_r = a.t_r if a.t_r is not None else t_r
    t_d = a.t_d if a.t_d is not None else t_d

    def unified(beta: float) -> float:
        return (a.h1 + beta * h0) / (a.t_s + t_r + beta * t_d)

    return AgilityResult(
        nu_uha=unified(a.beta),
        nu_vja=unified(0.0),
        nu_ha=unified(1.0),
        t_r=t_r,
        t_d=t_d,
        h0_implied=h0_implied,
    )


def trial_agility(log: HopLog) -> AgilityResult | None:
    """Direct-time agility averaged over the complete apex-to-apex cycles of a log."""
    transitions = detect_true_transitions(log)
    heights, t_s, t_apogee, t_cycle = [], [], [], []
    prev_ha = None
    td = lo = None
    for tr in transitions:
        if tr.kind is EventKind.TD:
            td, lo = tr, None
        elif tr.kind is EventKind.LO and td is not None:
            lo = tr
        elif tr.kind is EventKind.HA:
            if prev_ha is not None and td is not None and lo is not None:
                heights.append(tr.z)
                t_s.append(lo.t - td.t)
                t_apogee.append(tr.t - td.t)
                t_cycle.append(tr.t - prev_ha.t)
            prev_ha, td, lo = tr, None, None
    if not heights:
        return None
    return agility(
        AgilityInputs(
            h1=float(np.mean(heights)),
            t_s=float(np.mean(t_s)),
            t_apogee=float(np.mean(t_apogee)),
            t_cycle=float(np.mean(t_cycle)),
        )
    )


def optical_flow_error_proxy(m1: float) -> float:
    """Horizontal optical-flow error implied by the height error.

    Optical flow scales image motion by height, so a relative height error
    of M1 percent carries over one-to-one into the horizontal estimate.
    """
    if m1 < 0.0:
        raise ValueError(f"m1 must be non-negative, got {m1}")
    return m1


def per_hop_errors(
    records: Sequence[HopRecord], aerial_only: bool = False
) -> dict[str, np.ndarray]:
    m1, m2 = [], []
    for rec in records:
        errors = _hop_errors(rec, aerial_only)
        if errors is not None:
            m1.append(100.0 * errors[0])
            m2.append(100.0 * errors[1])
    return {
        "M1": np.array(m1),
        "M2": np.array(m2),
        "apex_error": 100.0 * apex_errors(records),
        "apex_time_error": np.array([abs(r.t_HA - r.t_HA_true) for r in records]),
    }


def compare_estimators(
    a: Sequence[HopRecord], b: Sequence[HopRecord], aerial_only: bool = False
) -> list[TTestResult]:
    """Two-tailed independent t-tests of per-hop errors between two estimators."""
    errors_a = per_hop_errors(a, aerial_only)
    errors_b = per_hop_errors(b, aerial_only)
    results = []
    for metric, values_a in errors_a.items():
        values_b = errors_b[metric]
        if len(values_a) < 2 or len(values_b) < 2:
            statistic, pvalue = math.nan, math.nan
        else:
            res = stats.ttest_ind(values_a, values_b)
            statistic, pvalue = float(res.statistic), float(res.pvalue)
        results.append(
            TTestResult(
                metric=metric,
                statistic=statistic,
                pvalue=pvalue,
                n_a=len(values_a),
                n_b=len(values_b),
            )
        )
    return results


def error_growth(
    t: np.ndarray, err: np.ndarray, window: float = 2.0, settle: float = 2.0
) -> dict[str, float | bool]:
    """Trend of the error spread over consecutive windows after a settling span.

    Samples before ``t[0] + settle`` are ignored, since a run that starts from
    the true state has near-zero error until the first contact. The error is
    unbounded when the windowed standard deviation trends upward and the last
    window is more than twice as wide as the first.

    Raises:
        DataError: On fewer than two samples, or none left after ``settle``
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(t) < 2:
        raise DataError("Error growth needs at least two samples")
    if not window > 0.0 or settle < 0.0:
        raise DataError(f"Invalid growth window {window} or settle {settle}")
    keep = t >= t[0] + settle
    if np.count_nonzero(keep) < 2:
        raise DataError(f"Fewer than two samples after the {settle:g} s settling span")
    t, err = t[keep], err[keep]
    bins = np.floor((t - t[0]) / window).astype(int)
    centers, spreads = [], []
    for b in np.unique(bins):
        sel = bins == b
        if np.count_nonzero(sel) >= 2:
            centers.append(float(np.mean(t[sel])))
            spreads.append(float(np.std(err[sel])))
    if len(spreads) < 2:
        only = spreads[0] if spreads else 0.0
        return {"slope": 0.0, "first_std": only, "last_std": only, "unbounded": False}
    slope = float(np.polyfit(centers, spreads, 1)[0])
    first, last = spreads[0], spreads[-1]
    return {
        "slope": slope,
        "first_std": first,
        "last_std": last,
        "unbounded": bool(slope > 0.0 and last > 2.0 * first),
    }


def report_row(report: MetricsReport, **labels: object) -> dict[str, object]:
    """Flat CSV row of a report (series fields summarized)."""
    row = dict(labels)
    row.update(report.model_dump(exclude={"excluded_hops", "ground_height", "agility"}))
    row["n_excluded"] = len(report.excluded_hops)
    row["ground_height_final"] = report.ground_height[-1] if report.ground_height else 0.0
    if report.agility is not None:
        row.update({f"agility_{k}": v for k, v in report.agility.model_dump().items()})
    return row


__all__: list[str] = [
    "AgilityError",
    "HopRecord",
    "agility",
    "apex_errors",
    "build_hop_records",
    "compare_estimators",
    "compute_metrics",
    "error_growth",
    "ground_height_track",
    "optical_flow_error_proxy",
    "per_hop_errors",
    "report_row",
    "trial_agility",
]
