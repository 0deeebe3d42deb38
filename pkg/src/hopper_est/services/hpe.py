"""Hopping phase estimator.

A four-phase cycle driven by the f_HPE-filtered, gravity-compensated vertical
acceleration, its slope (jerk) and the HVSE velocity estimate:

    Drop --TD--> StanceDown --MS--> StanceUp --LO--> Rebound --HA--> Drop
"""

import logging
from dataclasses import dataclass

from ..models import EventKind, HpeConfig, Phase

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class PhaseState:
    phase: Phase = Phase.DROP
    a_hist: tuple[float, ...] = ()
    jerk_threshold: float = 2000.0
    t_last: float = 0.0
    window: int = 2


@dataclass(frozen=True, slots=True)
class PhaseEvent:
    kind: EventKind
    t: float


def jerk_threshold_for_rate(
    base: float, est_rate: float, reference_rate: float = 840.0
) -> float:
    """Scale a jerk threshold quoted at ``reference_rate`` to ``est_rate``."""
    return base * est_rate / reference_rate


def initial_phase_state(
    cfg: HpeConfig, est_rate: float, phase: Phase = Phase.DROP, t0: float = 0.0
) -> PhaseState:
    return PhaseState(
        phase=phase,
        jerk_threshold=jerk_threshold_for_rate(
            cfg.jerk_threshold, est_rate, cfg.reference_rate
        ),
        t_last=t0,
        window=cfg.window,
    )


def _slope(hist: tuple[float, ...] | list[float], dt: float) -> float:
    n = len(hist)
    if n == 2:
        return (hist[1] - hist[0]) / dt
    # least-squares slope over equally spaced samples
    mid = (n - 1) / 2.0
    num = sum((i - mid) * a for i, a in enumerate(hist))
    den = sum((i - mid) ** 2 for i in range(n))
    return num / (den * dt)


_NEXT = {
    Phase.DROP: (EventKind.TD, Phase.STANCE_DOWN),
    Phase.STANCE_DOWN: (EventKind.MS, Phase.STANCE_UP),
    Phase.STANCE_UP: (EventKind.LO, Phase.REBOUND),
    Phase.REBOUND: (EventKind.HA, Phase.DROP),
}


def _fired(
    phase: Phase,
    jerk: float | None,
    a_filt: float,
    v_est: float,
    threshold: float,
    t: float,
) -> bool:
    if phase is Phase.DROP:
        return jerk is not None and jerk > threshold
    if phase is Phase.STANCE_DOWN:
        return jerk is not None and jerk < 0.0
    if jerk is not None and jerk > threshold:
        logger.debug(
            "Touchdown-size jerk %.0f m/s^3 at t=%.4fs ignored in phase %s",
            jerk,
            t,
            phase,
        )
    if phase is Phase.STANCE_UP:
        return a_filt < 0.0
    return v_est <= 0.0


def hpe_update(
    state: PhaseState, a_filt: float, v_est: float, dt: float
) -> tuple[PhaseState, PhaseEvent | None]:
    """Advance the phase machine by one estimator tick.

    Args:
        state: Current phase state
        a_filt: f_HPE-filtered world-frame vertical acceleration (m/s^2)
        v_est: HVSE vertical velocity estimate after this tick's prediction
        dt: Estimator period in seconds

    Returns:
        The new state and the emitted event, if any
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    t = state.t_last + dt
    hist = (*state.a_hist, a_filt)[-state.window :]
    jerk = _slope(hist, dt) if len(hist) >= 2 else None

    phase = state.phase
    event = None
    if _fired(phase, jerk, a_filt, v_est, state.jerk_threshold, t):
        kind, phase = _NEXT[phase]
        event = PhaseEvent(kind, t)
    return PhaseState(phase, hist, state.jerk_threshold, t, state.window), event


class PhaseTracker:
    """In-place phase machine for a fixed estimator period.

    Emits the same events as chaining ``hpe_update`` from ``state``.
    """

    __slots__ = ("dt", "hist", "jerk_threshold", "phase", "t", "window")

    def __init__(self, state: PhaseState, dt: float) -> None:
        if not dt > 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.phase = state.phase
        self.hist = list(state.a_hist[-state.window :])
        self.jerk_threshold = state.jerk_threshold
        self.t = state.t_last
        self.window = state.window
        self.dt = dt

    def update(self, a_filt: float, v_est: float) -> PhaseEvent | None:
        self.t += self.dt
        hist = self.hist
        hist.append(a_filt)
        if len(hist) > self.window:
            del hist[0]
        jerk = _slope(hist, self.dt) if len(hist) >= 2 else None
        if _fired(self.phase, jerk, a_filt, v_est, self.jerk_threshold, self.t):
            kind, self.phase = _NEXT[self.phase]
            return PhaseEvent(kind, self.t)
        return None

    def snapshot(self) -> PhaseState:
        return PhaseState(self.phase, tuple(self.hist), self.jerk_threshold, self.t, self.window)


__all__: list[str] = [
    "PhaseEvent",
    "PhaseState",
    "PhaseTracker",
    "hpe_update",
    "initial_phase_state",
    "jerk_threshold_for_rate",
]
