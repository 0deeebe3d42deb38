"""Vertical two-mass hopper dynamics, height controller and true transitions.

The body (m_B) slides on an unactuated prismatic joint along the leg (m_L).
The main power spring pulls the body back toward the leg top when the body
sits below its nominal position; a stiff spring-damper models the hard stop
above it. The foot meets rigid ground through a unilateral penalty contact. Touchdown is
plastic: the leg stops at the surface and stays there until the joint pulls
it up, so the contact never returns energy to the leg.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..models import MAX_TWR, EventKind, RobotParams

if TYPE_CHECKING:
    from .dataset import HopLog

logger = logging.getLogger(__name__)

INTERNAL_DT = 2.5e-5
INTERNAL_RATE = 1.0 / INTERNAL_DT
PENETRATION_TOL = 1e-4
MAX_PENETRATION = 0.01
SLIDING_BAND = 0.33
K_P = MAX_TWR / SLIDING_BAND
# 5% duty "almost no thrust" state, modeled as zero thrust
ACTUATION_FLOOR = 0.05 * MAX_TWR


class DynamicsFault(ValueError):
    """Raised when the integrator leaves the physically valid region."""

    def __init__(self, message: str, field: str, code: str = "dynamics_fault") -> None:
        super().__init__(message)
        self.field = field
        self.code = code


@dataclass(slots=True)
class SimState:
    """Instantaneous state of the two-mass model.

    ``a_B`` is the body acceleration over the step that produced the state,
    which is what the body-mounted accelerometer senses (plus gravity).
    """

    z_B: float
    v_B: float
    z_L: float
    v_L: float
    in_contact: bool
    t: float
    a_B: float = 0.0


@dataclass(frozen=True, slots=True)
class TrueTransition:
    kind: EventKind
    t: float
    z: float
    v: float
    index: int


def nominal_leg_height(z_B: float, rp: RobotParams) -> float:
    """Leg CM height that leaves the joint exactly at its hard stop."""
    return z_B - rp.L_1 + rp.L_3


def td_body_height(rp: RobotParams) -> float:
    """Body CM height at the instant the unextended leg touches the ground."""
    return rp.L_1 + rp.L_2 - rp.L_3


def initial_state(z_B: float, rp: RobotParams, v_B: float = 0.0) -> SimState:
    z_L = nominal_leg_height(z_B, rp)
    return SimState(
        z_B=z_B,
        v_B=v_B,
        z_L=z_L,
        v_L=v_B,
        in_contact=(z_L - rp.L_2) < 0.0,
        t=0.0,
        a_B=-rp.g,
    )


def spring_extension(state: SimState, rp: RobotParams) -> float:
    """Distance the body sits below its nominal position on the leg."""
    return (state.z_L + rp.L_1 - rp.L_3) - state.z_B


def _joint_force(s: float, s_dot: float, rp: RobotParams) -> float:
    """Upward force on the body from the joint (the leg receives the opposite)."""
    if s > 0.0:
        return rp.K_s * s + rp.b_s * s_dot
    if s < 0.0:
        return rp.K_lb * s + rp.b_lb * s_dot
    return 0.0


def _ground_force(foot: float, v_L: float, rp: RobotParams) -> float:
    if foot >= 0.0:
        return 0.0
    return max(0.0, -rp.k_ground * foot - rp.b_ground * v_L)


def step(
    state: SimState,
    twr_command: float,
    params: RobotParams,
    dt: float = INTERNAL_DT,
    twr_limit: float = MAX_TWR,
) -> SimState:
    """Advance the two-mass model by one semi-implicit Euler step.

    Args:
        state: Current state
        twr_command: Thrust-to-weight ratio applied upward on the body
        params: Robot parameters
        dt: Integration step in seconds
        twr_limit: Largest accepted command (raised only by force-balance tests)

    A foot that reaches the ground stops there. A foot already on the
    ground is held at the surface until the joint pulls the leg upward.

    Returns:
        The next state; the input state is not modified

    Raises:
        DynamicsFault: On invalid inputs, non-finite results or gross ground penetration
    """
    if not dt > 0.0:
        raise DynamicsFault(f"dt must be positive, got {dt}", field="dt")
    if not 0.0 <= twr_command <= twr_limit:
        raise DynamicsFault(
            f"twr_command {twr_command} outside [0, {twr_limit}]", field="twr_command"
        )

    rp = params
    s = (state.z_L + rp.L_1 - rp.L_3) - state.z_B
    joint = _joint_force(s, state.v_L - state.v_B, rp)
    ground = _ground_force(state.z_L - rp.L_2, state.v_L, rp)
    thrust = twr_command * (rp.m_B + rp.m_L) * rp.g

    a_B = (joint + thrust) / rp.m_B - rp.g
    a_L = (ground - joint) / rp.m_L - rp.g
    v_B = state.v_B + a_B * dt
    v_L = state.v_L + a_L * dt
    z_B = state.z_B + v_B * dt
    z_L = state.z_L + v_L * dt

    for name, value in (("z_B", z_B), ("v_B", v_B), ("z_L", z_L), ("v_L", v_L)):
        if not math.isfinite(value):
            raise DynamicsFault(f"Non-finite {name} at t={state.t:.6f}s", field=name)

    foot = z_L - rp.L_2
    if foot < -MAX_PENETRATION:
        raise DynamicsFault(
            f"Foot penetrated {-foot:.4f} m into the ground at t={state.t:.6f}s",
            field="z_L",
        )

    # leg free acceleration without the ground: positive once the joint lifts it
    lifting = -joint / rp.m_L - rp.g > 0.0
    if not state.in_contact and foot < 0.0:
        # plastic touchdown
        z_L, v_L, in_contact = rp.L_2, 0.0, True
    elif state.in_contact and foot >= 0.0 and not lifting:
        z_L, v_L, in_contact = rp.L_2, 0.0, True
    else:
        in_contact = foot < 0.0
    return SimState(
        z_B=z_B,
        v_B=v_B,
        z_L=z_L,
        v_L=v_L,
        in_contact=in_contact,
        t=state.t + dt,
        a_B=a_B,
    )


def energy(state: SimState, rp: RobotParams, dt: float = 0.0) -> float:
    """Total mechanical energy (J), gravitational potential referenced to z=0.

    With ``dt`` > 0 the result is the discrete energy that an undamped
    semi-implicit step of that size conserves exactly: the mechanical energy
    plus ``dt/2`` times the power of the conservative forces. It is the
    quantity to compare across steps when checking that the integrated
    model only dissipates.
    """
    kinetic = 0.5 * rp.m_B * state.v_B**2 + 0.5 * rp.m_L * state.v_L**2
    potential = rp.g * (rp.m_B * state.z_B + rp.m_L * state.z_L)
    s = spring_extension(state, rp)
    stiffness = rp.K_s if s > 0.0 else rp.K_lb
    elastic = 0.5 * stiffness * s**2
    foot = state.z_L - rp.L_2
    ground = -rp.k_ground * foot if foot < 0.0 else 0.0
    elastic += 0.5 * ground * -foot
    total = kinetic + potential + elastic
    if dt > 0.0:
        force_B = stiffness * s - rp.m_B * rp.g
        force_L = -stiffness * s - rp.m_L * rp.g + ground
        total += 0.5 * dt * (force_B * state.v_B + force_L * state.v_L)
    return total


def height_control(
    z_est: float, v_est: float, h_desired: float, g: float = 9.81
) -> float:
    """Proportional apex-height controller.

    The ballistic apex predicted from (z_est, v_est) is compared with
    ``h_desired``; the error maps to a TWR command through ``K_P`` and
    saturates at ``MAX_TWR`` once the error exceeds the sliding band.
    """
    if h_desired <= 0.0:
        return 0.0
    rise = v_est * v_est / (2.0 * g) if v_est > 0.0 else 0.0
    error = h_desired - (z_est + rise)
    twr = min(max(K_P * error, 0.0), MAX_TWR)
    return 0.0 if twr < ACTUATION_FLOOR else twr


def _first_at_or_after(candidates: np.ndarray, start: int, stop: int) -> int | None:
    pos = int(np.searchsorted(candidates, start))
    if pos < len(candidates) and candidates[pos] < stop:
        return int(candidates[pos])
    return None


def detect_true_transitions(log: "HopLog") -> list[TrueTransition]:
    """Extract TD/MS/LO/HA from the true states of a log.

    TD and LO are contact onset and release. MS is the first upward zero
    crossing of body velocity inside a contact segment. HA is a downward zero
    crossing of body velocity while airborne.
    """
    contact = np.asarray(log.contact, dtype=bool)
    v = np.asarray(log.v_true, dtype=float)
    n = len(contact)
    if n < 2:
        return []

    prev_c, cur_c = contact[:-1], contact[1:]
    td = np.flatnonzero(~prev_c & cur_c) + 1
    lo = np.flatnonzero(prev_c & ~cur_c) + 1
    ha = np.flatnonzero(~prev_c & ~cur_c & (v[:-1] > 0.0) & (v[1:] <= 0.0)) + 1
    ms_candidates = (
        np.flatnonzero(prev_c & cur_c & (v[:-1] < 0.0) & (v[1:] >= 0.0)) + 1
    )

    segment_starts = list(td)
    if contact[0]:
        segment_starts.insert(0, 0)
    ms = []
    for start in segment_starts:
        pos = int(np.searchsorted(lo, start, side="right"))
        stop = int(lo[pos]) if pos < len(lo) else n
        found = _first_at_or_after(ms_candidates, start, stop)
        if found is not None:
            ms.append(found)

    indexed = [(int(i), EventKind.TD) for i in td]
    indexed += [(i, EventKind.MS) for i in ms]
    indexed += [(int(i), EventKind.LO) for i in lo]
    indexed += [(int(i), EventKind.HA) for i in ha]
    indexed.sort(key=lambda item: item[0])
    return [
        TrueTransition(
            kind=kind,
            t=float(log.t[i]),
            z=float(log.z_true[i]),
            v=float(v[i]),
            index=i,
        )
        for i, kind in indexed
    ]


__all__: list[str] = [
    "ACTUATION_FLOOR",
    "INTERNAL_DT",
    "INTERNAL_RATE",
    "K_P",
    "MAX_PENETRATION",
    "PENETRATION_TOL",
    "SLIDING_BAND",
    "DynamicsFault",
    "SimState",
    "TrueTransition",
    "detect_true_transitions",
    "energy",
    "height_control",
    "initial_state",
    "nominal_leg_height",
    "spring_extension",
    "step",
    "td_body_height",
]
