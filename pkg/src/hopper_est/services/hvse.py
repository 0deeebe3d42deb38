"""Hopping vertical state estimator: filter bank and inferred measurement updates.

KF1 tracks [z, v]; KF2, ESKF1 and ESKF2 add an accelerometer bias state
that is subtracted from the input acceleration. Which inferred measurement
updates (IMUPTs) each filter applies is held in ``IMUPT_SCHEDULE``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..models import (
    PARAM_NAMES,
    EstimatorParams,
    EventKind,
    FilterKind,
    ImuptKind,
    RobotParams,
)

DEFAULT_P0 = np.array([[0.0582, 0.0774], [0.0774, 0.1441]]) * 1e-4
DEFAULT_BIAS_VARIANCE = 1e-4

IMUPT_SCHEDULE: dict[FilterKind, frozenset[ImuptKind]] = {
    FilterKind.KF1: frozenset(
        {
            ImuptKind.POSITION_TD,
            ImuptKind.POSITION_LO,
            ImuptKind.VELOCITY_MS,
            ImuptKind.VELOCITY_LO,
        }
    ),
    FilterKind.KF2: frozenset(
        {
            ImuptKind.POSITION_TD,
            ImuptKind.POSITION_LO,
            ImuptKind.VELOCITY_MS,
            ImuptKind.VELOCITY_LO,
            ImuptKind.ACCEL_BIAS_AERIAL,
        }
    ),
    FilterKind.ESKF1: frozenset(
        {ImuptKind.POSITION_TD, ImuptKind.POSITION_LO, ImuptKind.VELOCITY_MS}
    ),
    FilterKind.ESKF2: frozenset(
        {
            ImuptKind.POSITION_TD,
            ImuptKind.POSITION_LO,
            ImuptKind.VELOCITY_MS,
            ImuptKind.ACCEL_BIAS_AERIAL,
        }
    ),
}
# zero-altitude update at touchdown only
KF3_SCHEDULE: frozenset[ImuptKind] = frozenset({ImuptKind.POSITION_TD})

EVENT_IMUPTS: dict[EventKind, tuple[ImuptKind, ...]] = {
    EventKind.TD: (ImuptKind.POSITION_TD,),
    EventKind.MS: (ImuptKind.VELOCITY_MS,),
    EventKind.LO: (ImuptKind.POSITION_LO, ImuptKind.VELOCITY_LO),
    EventKind.HA: (),
}

_MEASURED_INDEX = {
    ImuptKind.POSITION_TD: 0,
    ImuptKind.POSITION_LO: 0,
    ImuptKind.VELOCITY_MS: 1,
    ImuptKind.VELOCITY_LO: 1,
    ImuptKind.ACCEL_BIAS_AERIAL: 2,
}

_BASE_PARAMS = frozenset({"f_HVSE", "f_HPE", "g_s", "sigma_az", "sigma_vz", "sigma_pz"})
_VELOCITY_LO_PARAMS = frozenset({"c_vel2", "c_vel1", "c_vel0", "c_ch1", "c_ch0"})
_THRUST_PARAMS = frozenset({"c_m1", "c_m0"})


class EstimatorFault(ValueError):
    def __init__(self, message: str, code: str = "estimator_fault") -> None:
        super().__init__(message)
        self.code = code


class ImuptRejected(ValueError):
    def __init__(self, message: str, code: str = "imupt_rejected") -> None:
        super().__init__(message)
        self.code = code


@dataclass(slots=True)
class FilterState:
    """Filter estimate; ``dx`` is the error state of the ESKF kinds."""

    kind: FilterKind
    x: np.ndarray
    P: np.ndarray
    dx: np.ndarray | None = None


@dataclass(frozen=True, slots=True)
class ImuptMeasurement:
    kind: ImuptKind
    value: float
    R: float

    def __post_init__(self) -> None:
        if not self.R > 0.0:
            raise ValueError(f"Measurement variance must be positive, got {self.R}")


@dataclass(frozen=True, slots=True)
class ImuptContext:
    """Everything an IMUPT needs besides the filter state."""

    params: EstimatorParams
    robot: RobotParams
    h_ch: float = 1.0
    v_lo_est: float | None = None
    duty_sum: float = 0.0
    u: float = 0.0
    attitude: np.ndarray = field(default_factory=lambda: np.eye(3))


def trainable_params(kind: FilterKind) -> tuple[str, ...]:
    """Parameters that influence ``kind``, in canonical order."""
    schedule = IMUPT_SCHEDULE[kind]
    enabled = set(_BASE_PARAMS)
    if kind.state_size == 3:
        enabled.add("sigma_bz")
    if ImuptKind.VELOCITY_LO in schedule:
        enabled |= _VELOCITY_LO_PARAMS
    if ImuptKind.ACCEL_BIAS_AERIAL in schedule:
        enabled |= _THRUST_PARAMS
    return tuple(name for name in PARAM_NAMES if name in enabled)


def initial_filter_state(
    kind: FilterKind,
    z0: float = 0.0,
    v0: float = 0.0,
    P0: np.ndarray | None = None,
    bias0: float = 0.0,
) -> FilterState:
    p0 = DEFAULT_P0 if P0 is None else np.asarray(P0, dtype=float)
    if kind.state_size == 2:
        x = np.array([z0, v0], dtype=float)
        P = p0[:2, :2].copy()
    else:
        x = np.array([z0, v0, bias0], dtype=float)
        P = np.zeros((3, 3))
        if p0.shape == (3, 3):
            P[:] = p0
        else:
            P[:2, :2] = p0
            P[2, 2] = DEFAULT_BIAS_VARIANCE
    dx = np.zeros_like(x) if kind.error_state else None
    return FilterState(kind, x, P, dx)


class ScalarFilter:
    """Filter state unrolled into floats and updated in place.

    ``predict`` and ``measurement_update`` both run through this class, and
    the estimator keeps one alive across ticks. P is held as its upper
    triangle; the 2-state kind keeps the bias entries at zero.
    """

    __slots__ = (
        "_dt",
        "_h",
        "_q00",
        "_q01",
        "_q11",
        "_q22",
        "b",
        "kind",
        "n",
        "p00",
        "p01",
        "p02",
        "p11",
        "p12",
        "p22",
        "v",
        "z",
    )

    def __init__(self, fs: FilterState) -> None:
        x, P = fs.x, fs.P
        self.kind = fs.kind
        self.n = fs.kind.state_size
        self.z = float(x[0])
        self.v = float(x[1])
        self.p00 = float(P[0, 0])
        self.p01 = float(P[0, 1])
        self.p11 = float(P[1, 1])
        if self.n == 3:
            self.b = float(x[2])
            self.p02 = float(P[0, 2])
            self.p12 = float(P[1, 2])
            self.p22 = float(P[2, 2])
        else:
            self.b = self.p02 = self.p12 = self.p22 = 0.0
        self._dt = self._h = 0.0
        self._q00 = self._q01 = self._q11 = self._q22 = 0.0

    @property
    def x(self) -> tuple[float, ...]:
        return (self.z, self.v, self.b)[: self.n]

    def set_step(self, dt: float, sigma_az: float, sigma_bz: float) -> None:
        """Fix the prediction period and the process noise Q = G sigma_az^2 G^T."""
        if not dt > 0.0:
            raise EstimatorFault(f"dt must be positive, got {dt}")
        h = 0.5 * dt * dt
        var = sigma_az * sigma_az
        self._dt, self._h = dt, h
        self._q00 = h * h * var
        self._q01 = h * dt * var
        self._q11 = dt * dt * var
        self._q22 = sigma_bz * sigma_bz * dt if self.n == 3 else 0.0

    def predict(self, u: float) -> None:
        """x = F x + G u, P = F P F^T + Q.

        Raises:
            EstimatorFault: If the step was never set or the result is non-finite
        """
        dt, h = self._dt, self._h
        if dt == 0.0:
            raise EstimatorFault("Prediction step not set")
        if self.n == 2:
            v = self.v
            self.z += dt * v + h * u
            self.v = v + dt * u
            p01, p11 = self.p01, self.p11
            self.p00 += dt * (p01 + p01 + dt * p11) + self._q00
            self.p01 = p01 + dt * p11 + self._q01
            self.p11 = p11 + self._q11
        else:
            z, v, b = self.z, self.v, self.b
            self.z = z + dt * v - h * b + h * u
            self.v = v - dt * b + dt * u
            p00, p01, p02 = self.p00, self.p01, self.p02
            p11, p12, p22 = self.p11, self.p12, self.p22
            # A = F P
            a00 = p00 + dt * p01 - h * p02
            a01 = p01 + dt * p11 - h * p12
            a02 = p02 + dt * p12 - h * p22
            a11 = p11 - dt * p12
            a12 = p12 - dt * p22
            # A F^T + Q
            self.p00 = a00 + dt * a01 - h * a02 + self._q00
            self.p01 = a01 - dt * a02 + self._q01
            self.p02 = a02
            self.p11 = a11 - dt * a12 + self._q11
            self.p12 = a12
            self.p22 = p22 + self._q22
        if not math.isfinite(self.z + self.v + self.b + self.p00 + self.p11 + self.p22):
            raise EstimatorFault("Non-finite state after prediction")

    def _rows(self) -> tuple[tuple[float, float, float], ...]:
        p01, p02, p12 = self.p01, self.p02, self.p12
        return (
            (self.p00, p01, p02),
            (p01, self.p11, p12),
            (p02, p12, self.p22),
        )

    def update(self, kind: ImuptKind, value: float, R: float) -> None:  # noqa: N803
        """Scalar Kalman update in Joseph form on the component ``kind`` measures.

        ESKF kinds estimate the error state and inject it; with the error
        state reset every tick the injection is the same additive correction.

        Raises:
            ImuptRejected: If the measured component is not part of the state
            EstimatorFault: If the innovation covariance is not positive
        """
        idx = _MEASURED_INDEX[kind]
        if idx >= self.n:
            raise ImuptRejected(f"{kind} measures a state {self.kind.name} does not carry")
        if math.isinf(R):
            return
        P = self._rows()
        c = P[idx]
        S = c[idx] + R
        if not S > 0.0:
            raise EstimatorFault(f"Singular innovation covariance for {kind}: S={S}")
        K = (c[0] / S, c[1] / S, c[2] / S)
        innovation = value - (self.z, self.v, self.b)[idx]
        self.z += K[0] * innovation
        self.v += K[1] * innovation

        def joseph(i: int, j: int) -> float:
            # (I - K h) P (I - K h)^T + R K K^T, entry (i, j)
            return P[i][j] - K[i] * c[j] - c[i] * K[j] + S * K[i] * K[j]

        self.p00 = joseph(0, 0)
        self.p01 = joseph(0, 1)
        self.p11 = joseph(1, 1)
        if self.n == 3:
            self.b += K[2] * innovation
            self.p02 = joseph(0, 2)
            self.p12 = joseph(1, 2)
            self.p22 = joseph(2, 2)

    def covariance(self) -> np.ndarray:
        n = self.n
        return np.array([row[:n] for row in self._rows()[:n]], dtype=float)

    def state(self) -> FilterState:
        """Snapshot as a ``FilterState`` (fresh arrays)."""
        x = [self.z, self.v, self.b][: self.n]
        arr = np.array(x, dtype=float)
        dx = np.zeros(self.n) if self.kind.error_state else None
        return FilterState(self.kind, arr, self.covariance(), dx)


def predict(fs: FilterState, u: float, dt: float, p: EstimatorParams) -> FilterState:
    """Propagate the state with the world-frame vertical acceleration ``u``.

    Raises:
        EstimatorFault: If ``dt`` is not positive or any input/result is non-finite
    """
    if not dt > 0.0:
        raise EstimatorFault(f"dt must be positive, got {dt}")
    if not math.isfinite(u):
        raise EstimatorFault(f"Non-finite acceleration input: {u}")
    sf = ScalarFilter(fs)
    sf.set_step(float(dt), p.sigma_az, p.sigma_bz)
    sf.predict(u)
    return sf.state()


def measurement_update(fs: FilterState, z: ImuptMeasurement) -> FilterState:
    """Scalar Kalman update in Joseph form.

    ESKF kinds estimate the error state, inject it into the nominal state and
    reset it to zero.

    Raises:
        ImuptRejected: If the measured component is not part of the state
        EstimatorFault: If the innovation covariance is not positive
    """
    sf = ScalarFilter(fs)
    sf.update(z.kind, z.value, z.R)
    return sf.state()


def compute_Lf(rp: RobotParams) -> float:  # noqa: N802
    """Signed CoM-to-foot offset with the spring unextended."""
    com_below_top = (rp.m_B * rp.L_3 + rp.m_L * rp.L_1) / (rp.m_B + rp.m_L)
    return com_below_top - (rp.L_1 + rp.L_2)


def delta_vlo(v_LO: float, h_ch: float, p: EstimatorParams) -> float:  # noqa: N803
    """Liftoff velocity scaling polynomial."""
    return (p.c_vel2 * v_LO * v_LO + p.c_vel1 * v_LO + p.c_vel0) * (
        p.c_ch1 * h_ch + p.c_ch0
    )


def thrust_fit(duty_sum: float, p: EstimatorParams) -> float:
    """Total rotor thrust (N) from the summed motor duties."""
    return p.c_m1 * duty_sum + p.c_m0


def imupts_for(
    schedule: frozenset[ImuptKind], event: EventKind
) -> tuple[ImuptKind, ...]:
    """IMUPTs triggered by ``event`` that ``schedule`` permits, in apply order."""
    return tuple(kind for kind in EVENT_IMUPTS[event] if kind in schedule)


def build_imupt(
    fs: FilterState | ScalarFilter, kind: ImuptKind, ctx: ImuptContext
) -> ImuptMeasurement:
    p, rp = ctx.params, ctx.robot
    if kind in (ImuptKind.POSITION_TD, ImuptKind.POSITION_LO):
        foot_offset = ctx.attitude @ np.array([0.0, 0.0, -compute_Lf(rp)])
        return ImuptMeasurement(kind, float(foot_offset[2]), p.sigma_pz**2)
    if kind is ImuptKind.VELOCITY_MS:
        return ImuptMeasurement(kind, 0.0, p.sigma_vz**2)
    if kind is ImuptKind.VELOCITY_LO:
        v_lo = float(fs.x[1]) if ctx.v_lo_est is None else ctx.v_lo_est
        return ImuptMeasurement(kind, v_lo * delta_vlo(v_lo, ctx.h_ch, p), p.sigma_vz**2)
    # bias: measured input minus the acceleration the commanded thrust explains
    thrust = ctx.attitude @ np.array(
        [0.0, 0.0, thrust_fit(ctx.duty_sum, p) / rp.total_mass]
    )
    expected = float(thrust[2]) - rp.g
    return ImuptMeasurement(kind, ctx.u - expected, p.sigma_bz**2)


def apply_imupt(
    fs: FilterState,
    kind: ImuptKind,
    ctx: ImuptContext,
    schedule: frozenset[ImuptKind] | None = None,
) -> FilterState:
    """Build the inferred measurement ``kind`` and apply it.

    Raises:
        ImuptRejected: If ``kind`` is not scheduled for the filter
    """
    allowed = IMUPT_SCHEDULE[fs.kind] if schedule is None else schedule
    if kind not in allowed:
        raise ImuptRejected(f"{kind} is not scheduled for {fs.kind.name}")
    return measurement_update(fs, build_imupt(fs, kind, ctx))


__all__: list[str] = [
    "DEFAULT_P0",
    "EVENT_IMUPTS",
    "IMUPT_SCHEDULE",
    "KF3_SCHEDULE",
    "EstimatorFault",
    "FilterState",
    "ImuptContext",
    "ImuptMeasurement",
    "ImuptRejected",
    "ScalarFilter",
    "apply_imupt",
    "build_imupt",
    "compute_Lf",
    "delta_vlo",
    "imupts_for",
    "initial_filter_state",
    "measurement_update",
    "predict",
    "thrust_fit",
    "trainable_params",
]
