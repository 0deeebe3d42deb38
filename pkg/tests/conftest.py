"""Shared fixtures: analytic hop logs and hand-built hop records."""

import math
from collections.abc import Callable

import numpy as np
import pytest

from hopper_est.models import Phase, RobotParams
from hopper_est.services.dataset import HopLog, write_hoplog
from hopper_est.services.dynamics import detect_true_transitions, td_body_height
from hopper_est.services.estimator import EstimatorTrace
from hopper_est.services.hpe import PhaseEvent
from hopper_est.services.metrics import HopRecord

G = 9.81
# body on the main spring: sqrt(K_s / m_B)
STANCE_OMEGA = 35.4


def analytic_hops(
    n_hops: int = 2,
    height: float = 1.0,
    rate: float = 840.0,
    name: str = "synthetic",
    h_desired: float | None = None,
    z_offset: float = 0.0,
) -> HopLog:
    """Identical hops starting at an apex: ballistic flight and half-sine stance.

    The log ends shortly after the last apex, so it holds ``n_hops`` of every
    true transition. Both accelerometer channels read the exact specific
    force. Estimates equal the truth plus ``z_offset``.
    """
    z_td = td_body_height(RobotParams())
    t_fall = math.sqrt(2.0 * (height - z_td) / G)
    v_td = G * t_fall
    amplitude = v_td / STANCE_OMEGA
    t_stance = math.pi / STANCE_OMEGA
    cycle = 2.0 * t_fall + t_stance

    n = int(math.floor((n_hops * cycle + 0.05) * rate)) + 1
    t = np.arange(n) / rate
    tau = np.mod(t, cycle)
    z = np.empty(n)
    v = np.empty(n)
    acc = np.full(n, -G)
    phase = np.empty(n, dtype=object)

    falling = tau < t_fall
    z[falling] = height - 0.5 * G * tau[falling] ** 2
    v[falling] = -G * tau[falling]
    phase[falling] = str(Phase.DROP)

    stance = (tau >= t_fall) & (tau < t_fall + t_stance)
    s = tau[stance] - t_fall
    z[stance] = z_td - amplitude * np.sin(STANCE_OMEGA * s)
    v[stance] = -amplitude * STANCE_OMEGA * np.cos(STANCE_OMEGA * s)
    acc[stance] = amplitude * STANCE_OMEGA**2 * np.sin(STANCE_OMEGA * s)
    phase[stance] = np.where(s < 0.5 * t_stance, str(Phase.STANCE_DOWN), str(Phase.STANCE_UP))

    rising = tau >= t_fall + t_stance
    r = tau[rising] - t_fall - t_stance
    z[rising] = z_td + v_td * r - 0.5 * G * r**2
    v[rising] = v_td - G * r
    phase[rising] = str(Phase.REBOUND)

    contact = np.zeros(n, dtype=bool)
    contact[stance] = np.sin(STANCE_OMEGA * s) > 0.0
    a_true = acc + G
    zeros = np.zeros(n)
    return HopLog(
        name=name,
        t=t,
        z_true=z,
        v_true=v,
        a_true=a_true,
        a_lowg=a_true.copy(),
        a_highg=a_true.copy(),
        a_world_est=acc.copy(),
        phase=phase,
        event=np.full(n, "", dtype=object),
        z_est=z + z_offset,
        v_est=v.copy(),
        P00=zeros.copy(),
        P01=zeros.copy(),
        P11=zeros.copy(),
        twr=zeros.copy(),
        h_desired=np.full(n, height if h_desired is None else h_desired),
        contact=contact,
    )


def truth_trace(log: HopLog) -> EstimatorTrace:
    """An estimator trace that reproduces the truth and the true transitions."""
    transitions = detect_true_transitions(log)
    event = np.full(len(log), "", dtype=object)
    for tr in transitions:
        event[tr.index] = str(tr.kind)
    zeros = np.zeros(len(log))
    return EstimatorTrace(
        t=log.t.copy(),
        z_est=log.z_true.copy(),
        v_est=log.v_true.copy(),
        z_prior=log.z_true.copy(),
        P00=zeros.copy(),
        P01=zeros.copy(),
        P11=zeros.copy(),
        a_world_est=log.a_true - G,
        phase=log.phase.copy(),
        event=event,
        events=[(tr.index, PhaseEvent(tr.kind, tr.t)) for tr in transitions],
    )


def hop_record(
    index: int = 0,
    *,
    h_HA: float = 1.0,  # noqa: N803
    h_HA_true: float = 1.0,  # noqa: N803
    t_HA: float = 1.0,  # noqa: N803
    t_HA_true: float = 1.0,  # noqa: N803
    h_TD: float = 0.0,  # noqa: N803
    h_desired: float = 1.0,
    z_scale: float = 1.0,
    v_scale: float = 1.0,
) -> HopRecord:
    """A four-sample hop whose estimates are the truth scaled by the given factors."""
    z = np.array([0.5, 1.0, 0.8, 0.3])
    v = np.array([2.0, 1.0, -1.0, -2.0])
    return HopRecord(
        index=index,
        h_desired=h_desired,
        t_TD=0.0,
        t_HA=t_HA,
        h_TD=h_TD,
        h_HA=h_HA,
        h_HA_true=h_HA_true,
        t_HA_true=t_HA_true,
        z=z,
        z_hat=z * z_scale,
        v=v,
        v_hat=v * v_scale,
        aerial=np.ones(4, dtype=bool),
    )


@pytest.fixture
def make_log() -> Callable[..., HopLog]:
    return analytic_hops


@pytest.fixture
def make_trace() -> Callable[[HopLog], EstimatorTrace]:
    return truth_trace


@pytest.fixture
def make_record() -> Callable[..., HopRecord]:
    return hop_record


@pytest.fixture
def write_logs(tmp_path) -> Callable[..., str]:
    """Write analytic logs as CSV under ``tmp_path/logs`` and return the directory."""

    def write(*logs: HopLog) -> str:
        log_dir = tmp_path / "logs"
        for log in logs:
            write_hoplog(log, log_dir / f"{log.name}.csv")
        return str(log_dir)

    return write
