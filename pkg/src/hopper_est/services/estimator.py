"""Per-tick HPE + HVSE pipeline and recorded-log replay.

The same ``HoppingEstimator`` runs inside the closed-loop simulation and in
replay, so replaying a simulated log with the parameters it was flown with
reproduces its estimates exactly.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..models import (
    EstimatorParams,
    FilterKind,
    HpeConfig,
    ImuptKind,
    Phase,
    RobotParams,
)
from .dataset import HopLog
from .hpe import PhaseEvent, PhaseState, PhaseTracker, initial_phase_state
from .hvse import (
    IMUPT_SCHEDULE,
    FilterState,
    ImuptContext,
    ScalarFilter,
    build_imupt,
    imupts_for,
    initial_filter_state,
)
from .sensing import ImuSample, LowPass, select_channel

logger = logging.getLogger(__name__)

MOTOR_COUNT = 4

_PHASE_LABEL = {phase: str(phase) for phase in Phase}
_AERIAL = frozenset(phase for phase in Phase if phase.aerial)


@dataclass(frozen=True, slots=True)
class TickOutput:
    z: float
    v: float
    z_prior: float
    P00: float
    P01: float
    P11: float
    u: float
    phase: Phase
    event: PhaseEvent | None


@dataclass(slots=True)
class EstimatorTrace:
    """Per-tick estimator outputs aligned with the rows of a log."""

    t: np.ndarray
    z_est: np.ndarray
    v_est: np.ndarray
    z_prior: np.ndarray
    P00: np.ndarray
    P01: np.ndarray
    P11: np.ndarray
    a_world_est: np.ndarray
    phase: np.ndarray
    event: np.ndarray
    events: list[tuple[int, PhaseEvent]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def event_indices(self, kind: str) -> list[int]:
        return [i for i, ev in self.events if ev.kind == kind]


class HoppingEstimator:
    """Range select, gravity compensation, low-pass, predict, HPE, IMUPTs.

    Attitude is identity, so the world-frame vertical input is the selected
    specific force minus g. Filter, low-pass and phase states are updated in
    place; ``filter`` and ``phase_state`` return snapshots.
    """

    def __init__(
        self,
        params: EstimatorParams,
        kind: FilterKind,
        robot: RobotParams,
        est_rate: float,
        *,
        hpe_config: HpeConfig | None = None,
        schedule: frozenset[ImuptKind] | None = None,
        z0: float = 0.0,
        v0: float = 0.0,
        P0: np.ndarray | None = None,
        t0: float = 0.0,
    ) -> None:
        self.params = params
        self.kind = kind
        self.robot = robot
        self.dt = 1.0 / est_rate
        self.schedule = IMUPT_SCHEDULE[kind] if schedule is None else schedule
        self.kf = ScalarFilter(initial_filter_state(kind, z0, v0, P0))
        self.kf.set_step(self.dt, params.sigma_az, params.sigma_bz)
        self.tracker = PhaseTracker(
            initial_phase_state(hpe_config or HpeConfig(), est_rate, Phase.DROP, t0 - self.dt),
            self.dt,
        )
        self._lp_hvse = LowPass(params.f_HVSE, self.dt)
        self._lp_hpe = LowPass(params.f_HPE, self.dt)
        self._bias_aerial = ImuptKind.ACCEL_BIAS_AERIAL in self.schedule
        self.u = 0.0
        self.z_prior = float(z0)

    @property
    def filter(self) -> FilterState:
        return self.kf.state()

    @property
    def phase_state(self) -> PhaseState:
        return self.tracker.snapshot()

    @property
    def z(self) -> float:
        return self.kf.z

    @property
    def v(self) -> float:
        return self.kf.v

    @property
    def phase(self) -> Phase:
        return self.tracker.phase

    def _context(self, h_ch: float, duty_sum: float, u: float, v_lo: float | None):
        return ImuptContext(
            params=self.params,
            robot=self.robot,
            h_ch=h_ch,
            v_lo_est=v_lo,
            duty_sum=duty_sum,
            u=u,
        )

    def _apply(self, kind: ImuptKind, ctx: ImuptContext) -> None:
        z = build_imupt(self.kf, kind, ctx)
        self.kf.update(z.kind, z.value, z.R)

    def advance(
        self, a_lowg: float, a_highg: float, h_ch: float, duty_sum: float
    ) -> PhaseEvent | None:
        """Run one tick on the raw channel readings and return the emitted event."""
        u_raw = select_channel(a_lowg, a_highg, self.params.g_s) - self.robot.g
        u = self._lp_hvse.update(u_raw)
        a_hpe = self._lp_hpe.update(u_raw)

        kf = self.kf
        kf.predict(u)
        self.u = u
        self.z_prior = kf.z
        event = self.tracker.update(a_hpe, kf.v)

        if event is not None:
            kinds = imupts_for(self.schedule, event.kind)
            if kinds:
                ctx = self._context(h_ch, duty_sum, u, kf.v)
                for kind in kinds:
                    self._apply(kind, ctx)
        elif self._bias_aerial and self.tracker.phase in _AERIAL:
            self._apply(ImuptKind.ACCEL_BIAS_AERIAL, self._context(h_ch, duty_sum, u, None))
        return event

    def tick(self, sample: ImuSample, h_ch: float, duty_sum: float) -> TickOutput:
        event = self.advance(sample.a_lowg, sample.a_highg, h_ch, duty_sum)
        kf = self.kf
        return TickOutput(
            z=kf.z,
            v=kf.v,
            z_prior=self.z_prior,
            P00=kf.p00,
            P01=kf.p01,
            P11=kf.p11,
            u=self.u,
            phase=self.tracker.phase,
            event=event,
        )


class TraceRecorder:
    """Accumulates estimator ticks into an EstimatorTrace."""

    def __init__(self) -> None:
        self._rows: list[tuple[float, ...]] = []
        self._phase: list[str] = []
        self._event: list[str] = []
        self._events: list[tuple[int, PhaseEvent]] = []

    def record(self, t: float, est: HoppingEstimator, event: PhaseEvent | None) -> None:
        kf = est.kf
        self._rows.append((t, kf.z, kf.v, est.z_prior, kf.p00, kf.p01, kf.p11, est.u))
        self._phase.append(_PHASE_LABEL[est.tracker.phase])
        if event is None:
            self._event.append("")
        else:
            self._events.append((len(self._rows) - 1, event))
            self._event.append(str(event.kind))

    def build(self) -> EstimatorTrace:
        data = np.array(self._rows, dtype=float).reshape(-1, 8)
        return EstimatorTrace(
            t=data[:, 0].copy(),
            z_est=data[:, 1].copy(),
            v_est=data[:, 2].copy(),
            z_prior=data[:, 3].copy(),
            P00=data[:, 4].copy(),
            P01=data[:, 5].copy(),
            P11=data[:, 6].copy(),
            a_world_est=data[:, 7].copy(),
            phase=np.array(self._phase, dtype=object),
            event=np.array(self._event, dtype=object),
            events=list(self._events),
        )


def replay(
    log: HopLog,
    params: EstimatorParams,
    kind: FilterKind,
    robot: RobotParams | None = None,
    *,
    hpe_config: HpeConfig | None = None,
    schedule: frozenset[ImuptKind] | None = None,
    P0: np.ndarray | None = None,
) -> EstimatorTrace:
    """Run the estimator over a recorded log's IMU stream.

    The filter starts from the true state of the first row. Motor duties are
    recovered from the logged TWR command (each motor runs at the TWR duty).
    """
    rp = robot or RobotParams()
    est = HoppingEstimator(
        params,
        kind,
        rp,
        log.est_rate,
        hpe_config=hpe_config,
        schedule=schedule,
        z0=float(log.z_true[0]),
        v0=float(log.v_true[0]),
        P0=P0,
        t0=float(log.t[0]),
    )
    recorder = TraceRecorder()
    advance, record = est.advance, recorder.record
    duty = (MOTOR_COUNT * np.asarray(log.twr, dtype=float)).tolist()
    columns = zip(
        log.t.tolist(), log.a_lowg.tolist(), log.a_highg.tolist(), log.h_desired.tolist(), duty
    )
    for t, a_lowg, a_highg, h_ch, duty_sum in columns:
        record(t, est, advance(a_lowg, a_highg, h_ch, duty_sum))
    return recorder.build()


__all__: list[str] = [
    "MOTOR_COUNT",
    "EstimatorTrace",
    "HoppingEstimator",
    "TickOutput",
    "TraceRecorder",
    "replay",
]
