"""Baseline estimators used only for comparison.

BA1 assumes a ballistic flight from the liftoff state, DR1 dead-reckons the
measured acceleration from liftoff, and KF3 is KF1 restricted to the zero
altitude update at touchdown. BA1 and DR1 read the true state during stance
(a leg-encoder stand-in) and re-anchor at every true liftoff.
"""

import numpy as np

from ..models import (
    BaselineKind,
    EstimatorParams,
    EventKind,
    FilterKind,
    HpeConfig,
    Phase,
    RobotParams,
)
from .dataset import DataError, HopLog
from .dynamics import TrueTransition, detect_true_transitions
from .estimator import EstimatorTrace, replay
from .hpe import PhaseEvent
from .hvse import KF3_SCHEDULE
from .sensing import G0

_PHASE_AFTER = {
    EventKind.TD: Phase.STANCE_DOWN,
    EventKind.MS: Phase.STANCE_UP,
    EventKind.LO: Phase.REBOUND,
    EventKind.HA: Phase.DROP,
}


def _true_phase_trace(
    log: HopLog, transitions: list[TrueTransition], z: np.ndarray, v: np.ndarray, u: np.ndarray
) -> EstimatorTrace:
    phase = np.empty(len(log), dtype=object)
    event = np.full(len(log), "", dtype=object)
    current = Phase.DROP
    marks = {tr.index: tr.kind for tr in transitions}
    for i in range(len(log)):
        if i in marks:
            current = _PHASE_AFTER[marks[i]]
            event[i] = str(marks[i])
        phase[i] = str(current)
    zeros = np.zeros(len(log))
    return EstimatorTrace(
        t=log.t.copy(),
        z_est=z,
        v_est=v,
        z_prior=z.copy(),
        P00=zeros,
        P01=zeros.copy(),
        P11=zeros.copy(),
        a_world_est=u,
        phase=phase,
        event=event,
        events=[(tr.index, PhaseEvent(tr.kind, tr.t)) for tr in transitions],
    )


def _measured_accel(log: HopLog, params: EstimatorParams, g: float) -> np.ndarray:
    lowg = np.abs(log.a_lowg) < params.g_s * G0
    return np.where(lowg, log.a_lowg, log.a_highg) - g


def baseline_estimates(
    log: HopLog,
    kind: BaselineKind,
    robot: RobotParams | None = None,
    params: EstimatorParams | None = None,
    hpe_config: HpeConfig | None = None,
) -> EstimatorTrace:
    """Estimated trajectory of a baseline over a log.

    Raises:
        DataError: If the log has no true liftoff or touchdown
    """
    rp = robot or RobotParams()
    p = params or EstimatorParams()
    transitions = detect_true_transitions(log)
    kinds = {tr.kind for tr in transitions}
    if EventKind.LO not in kinds or EventKind.TD not in kinds:
        raise DataError(f"Log {log.name} has no true liftoff/touchdown for baselines")

    if kind is BaselineKind.KF3:
        return replay(
            log, p, FilterKind.KF1, rp, hpe_config=hpe_config, schedule=KF3_SCHEDULE
        )

    n = len(log)
    t = log.t
    u = _measured_accel(log, p, rp.g)
    z = log.z_true.astype(float).copy()
    v = log.v_true.astype(float).copy()
    anchors = {0} | {tr.index for tr in transitions if tr.kind is EventKind.LO}
    contact = np.asarray(log.contact, dtype=bool)

    anchor = 0
    for i in range(1, n):
        if contact[i]:
            continue
        if i in anchors:
            anchor = i
            continue
        if kind is BaselineKind.BA1:
            tau = t[i] - t[anchor]
            z[i] = log.z_true[anchor] + log.v_true[anchor] * tau - 0.5 * rp.g * tau**2
            v[i] = log.v_true[anchor] - rp.g * tau
        else:
            dt = t[i] - t[i - 1]
            a = u[i - 1]
            z[i] = z[i - 1] + v[i - 1] * dt + 0.5 * a * dt * dt
            v[i] = v[i - 1] + a * dt
    return _true_phase_trace(log, transitions, z, v, u)


__all__: list[str] = ["baseline_estimates"]
