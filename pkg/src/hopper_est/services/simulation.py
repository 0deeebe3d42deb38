"""Closed-loop hopping trials.

Dynamics run at the fixed internal step, the accelerometers are sampled at
``sensor_rate`` by picking raw truth samples, the estimator ticks at
``est_rate`` and the height controller updates at ``control_rate``. Each
estimator tick produces one log row.
"""

import logging
from collections.abc import Sequence

import numpy as np

from ..models import (
    ControlSource,
    EstimatorParams,
    EventKind,
    FilterKind,
    HpeConfig,
    Phase,
    RobotParams,
    SensorConfig,
)
from .dataset import HopLog
from .dynamics import (
    INTERNAL_DT,
    INTERNAL_RATE,
    SimState,
    detect_true_transitions,
    height_control,
    initial_state,
    step,
    td_body_height,
)
from .estimator import MOTOR_COUNT, HoppingEstimator
from .sensing import sample_imu, sample_indices

logger = logging.getLogger(__name__)

HeightSchedule = float | Sequence[tuple[float, float]]


def normalize_schedule(schedule: HeightSchedule) -> list[tuple[float, float]]:
    """Sorted (t_start, height) pairs; a bare number is a constant height."""
    if isinstance(schedule, int | float):
        entries = [(0.0, float(schedule))]
    else:
        entries = sorted((float(t), float(h)) for t, h in schedule)
    if not entries:
        raise ValueError("Height schedule must not be empty")
    for _, height in entries:
        if not height > 0.0:
            raise ValueError(f"Desired heights must be positive, got {height}")
    return entries


def height_at(entries: list[tuple[float, float]], t: float) -> float:
    height = entries[0][1]
    for start, h in entries:
        if start > t:
            break
        height = h
    return height


def _tick_mask(n: int, rate: float) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[sample_indices(n, INTERNAL_RATE, rate)] = True
    return mask


def _controller_active(
    source: ControlSource, state: SimState, est: HoppingEstimator
) -> bool:
    """Thrust is only commanded during rebound; drop and stance get none."""
    if source is ControlSource.GT:
        return not state.in_contact and state.v_B > 0.0
    return est.phase is Phase.REBOUND


def simulate_trial(
    params: RobotParams,
    est_params: EstimatorParams,
    filter_kind: FilterKind,
    sensing_config: SensorConfig,
    h_desired_schedule: HeightSchedule,
    duration: float,
    seed: int,
    *,
    control_source: ControlSource = ControlSource.GT,
    control_rate: float | None = None,
    hpe_config: HpeConfig | None = None,
    z0: float | None = None,
    name: str = "trial",
) -> HopLog:
    """Fly one closed-loop trial and record it.

    The robot starts at rest at the first commanded height (or ``z0``) and
    drops. The same seed always produces a bitwise-identical log.

    Raises:
        ValueError: On a non-positive duration, empty schedule or a start
            height with the foot below ground
        DynamicsFault: Propagated from the integrator
    """
    if not duration > 0.0:
        raise ValueError(f"duration must be positive, got {duration}")
    entries = normalize_schedule(h_desired_schedule)
    cfg = sensing_config
    start = entries[0][1] if z0 is None else float(z0)
    if start < td_body_height(params):
        raise ValueError(
            f"Start height {start} m puts the foot below ground "
            f"(minimum {td_body_height(params):.4f} m)"
        )

    n = int(round(duration / INTERNAL_DT)) + 1
    sensor_mask = _tick_mask(n, cfg.sensor_rate)
    est_mask = _tick_mask(n, cfg.est_rate)
    control_mask = _tick_mask(n, control_rate or cfg.est_rate)

    rng = np.random.default_rng(seed)
    state = initial_state(start, params)
    est = HoppingEstimator(
        est_params,
        filter_kind,
        params,
        cfg.est_rate,
        hpe_config=hpe_config,
        z0=state.z_B,
        v0=state.v_B,
        t0=0.0,
    )

    rows: list[tuple[float, ...]] = []
    phases: list[str] = []
    events: list[str] = []
    contact: list[bool] = []
    sample = None
    twr = 0.0

    for i in range(n):
        t = i * INTERNAL_DT
        h_des = height_at(entries, t)
        if sensor_mask[i]:
            sample = sample_imu(state.a_B + params.g, cfg, rng, t)
        if est_mask[i]:
            out = est.tick(sample, h_des, MOTOR_COUNT * twr)
            rows.append(
                (
                    t,
                    state.z_B,
                    state.v_B,
                    state.a_B + params.g,
                    sample.a_lowg,
                    sample.a_highg,
                    out.u,
                    out.z,
                    out.v,
                    out.P00,
                    out.P01,
                    out.P11,
                    twr,
                    h_des,
                )
            )
            phases.append(str(out.phase))
            events.append("" if out.event is None else str(out.event.kind))
            contact.append(state.in_contact)
        if control_mask[i]:
            if _controller_active(control_source, state, est):
                if control_source is ControlSource.GT:
                    twr = height_control(state.z_B, state.v_B, h_des, params.g)
                else:
                    twr = height_control(est.z, est.v, h_des, params.g)
            else:
                twr = 0.0
        if i + 1 < n:
            state = step(state, twr, params)

    data = np.array(rows, dtype=float)
    log = HopLog(
        name=name,
        t=data[:, 0].copy(),
        z_true=data[:, 1].copy(),
        v_true=data[:, 2].copy(),
        a_true=data[:, 3].copy(),
        a_lowg=data[:, 4].copy(),
        a_highg=data[:, 5].copy(),
        a_world_est=data[:, 6].copy(),
        phase=np.array(phases, dtype=object),
        event=np.array(events, dtype=object),
        z_est=data[:, 7].copy(),
        v_est=data[:, 8].copy(),
        P00=data[:, 9].copy(),
        P01=data[:, 10].copy(),
        P11=data[:, 11].copy(),
        twr=data[:, 12].copy(),
        h_desired=data[:, 13].copy(),
        contact=np.array(contact, dtype=bool),
    )
    apexes = sum(1 for tr in detect_true_transitions(log) if tr.kind is EventKind.HA)
    logger.info(
        "Simulated %s: %.2fs, %d ticks at %g Hz, %d apexes (control=%s, filter=%s)",
        name,
        duration,
        len(log),
        cfg.est_rate,
        apexes,
        control_source,
        filter_kind,
    )
    return log


def trial_seed(master: int, index: int) -> int:
    return master + index


__all__: list[str] = [
    "HeightSchedule",
    "height_at",
    "normalize_schedule",
    "simulate_trial",
    "trial_seed",
]
