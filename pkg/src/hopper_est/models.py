"""hopper-est data models.

Configuration sections, reports and result envelopes are pydantic models that
forbid unknown keys, so a typo in a run configuration surfaces as a validation
error naming the offending key.
"""

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of :class:`enum.StrEnum` (str() and format() yield the value)."""

        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()

STANDARD_GRAVITY = 9.81
MAX_TWR = 0.837
DEFAULT_SWEEP_FREQUENCIES: tuple[float, ...] = (
    3360.0,
    1680.0,
    840.0,
    700.0,
    600.0,
    500.0,
    400.0,
    300.0,
    200.0,
    100.0,
    50.0,
    10.0,
)


class FilterKind(StrEnum):
    """Filter bank members."""

    KF1 = "kf1"
    KF2 = "kf2"
    ESKF1 = "eskf1"
    ESKF2 = "eskf2"

    @property
    def state_size(self) -> int:
        return 2 if self is FilterKind.KF1 else 3

    @property
    def error_state(self) -> bool:
        return self in (FilterKind.ESKF1, FilterKind.ESKF2)


class Phase(StrEnum):
    DROP = "Drop"
    STANCE_DOWN = "StanceDown"
    STANCE_UP = "StanceUp"
    REBOUND = "Rebound"

    @property
    def aerial(self) -> bool:
        return self in (Phase.DROP, Phase.REBOUND)


class EventKind(StrEnum):
    TD = "TD"
    MS = "MS"
    LO = "LO"
    HA = "HA"


class ImuptKind(StrEnum):
    POSITION_TD = "PositionTD"
    POSITION_LO = "PositionLO"
    VELOCITY_MS = "VelocityMS"
    VELOCITY_LO = "VelocityLO"
    ACCEL_BIAS_AERIAL = "AccelBiasAerial"


class ControlSource(StrEnum):
    """Where the height controller reads z and v from."""

    GT = "gt"
    SE = "se"


class BaselineKind(StrEnum):
    BA1 = "ba1"
    DR1 = "dr1"
    KF3 = "kf3"


class RobotParams(BaseModel):
    """Vertical two-mass hopper parameters (SI units)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    m_B: float = Field(0.5619, gt=0, description="Body mass")
    m_L: float = Field(0.0981, gt=0, description="Leg mass")
    K_s: float = Field(704.0, gt=0, description="Main power spring constant")
    K_lb: float = Field(281600.0, gt=0, description="Leg-body hard-stop spring")
    b_lb: float = Field(100.0, ge=0, description="Leg-body hard-stop damping")
    L_1: float = Field(0.1053, gt=0, description="Leg top to leg CM")
    L_2: float = Field(0.2821, gt=0, description="Leg bottom to leg CM")
    L_3: float = Field(0.1191, gt=0, description="Body CM from leg top")
    g: float = Field(STANDARD_GRAVITY, gt=0)
    b_s: float = Field(0.0, ge=0, description="Main spring damping")
    k_ground: float = Field(5.0e6, gt=0, description="Ground contact stiffness")
    b_ground: float = Field(2000.0, ge=0, description="Ground contact damping")

    @model_validator(mode="before")
    @classmethod
    def _default_hard_stop(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("K_lb") is None:
            data = {**data, "K_lb": 400.0 * float(data.get("K_s", 704.0))}
        return data

    @property
    def total_mass(self) -> float:
        return self.m_B + self.m_L


class SensorConfig(BaseModel):
    """Dual-range accelerometer synthesis settings.

    Ranges and noise are in g-units, rates in Hz, bias in m/s^2.
    """

    model_config = ConfigDict(extra="forbid")

    lowg_range: float = Field(16.0, gt=0)
    highg_range: float = Field(100.0, gt=0)
    lowg_noise_std: float = Field(0.013, ge=0)
    highg_noise_std: float = Field(0.32, ge=0)
    sensor_rate: float = Field(840.0, gt=0)
    est_rate: float = Field(840.0, gt=0)
    bias: float = 0.0

    @model_validator(mode="after")
    def _check_rates(self) -> "SensorConfig":
        if self.est_rate > self.sensor_rate:
            raise ValueError(
                f"est_rate ({self.est_rate} Hz) must not exceed "
                f"sensor_rate ({self.sensor_rate} Hz)"
            )
        return self

    def noiseless(self) -> "SensorConfig":
        return self.model_copy(update={"lowg_noise_std": 0.0, "highg_noise_std": 0.0})


FREQ_BOUNDS = (5.0, 400.0)
G_SWITCH_BOUNDS = (12.0, 14.5)
SIGMA_BOUNDS = (1e-4, 10.0)
COEF_BOUNDS = (-10.0, 10.0)


class EstimatorParams(BaseModel):
    """Trainable estimator parameters, bounded to the optimizer's search box."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    f_HVSE: float = Field(100.0, ge=FREQ_BOUNDS[0], le=FREQ_BOUNDS[1])
    f_HPE: float = Field(50.0, ge=FREQ_BOUNDS[0], le=FREQ_BOUNDS[1])
    g_s: float = Field(14.24, ge=G_SWITCH_BOUNDS[0], le=G_SWITCH_BOUNDS[1])
    sigma_az: float = Field(1.0, ge=SIGMA_BOUNDS[0], le=SIGMA_BOUNDS[1])
    sigma_bz: float = Field(0.05, ge=SIGMA_BOUNDS[0], le=SIGMA_BOUNDS[1])
    sigma_vz: float = Field(0.05, ge=SIGMA_BOUNDS[0], le=SIGMA_BOUNDS[1])
    sigma_pz: float = Field(0.005, ge=SIGMA_BOUNDS[0], le=SIGMA_BOUNDS[1])
    c_vel2: float = Field(0.0, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])
    c_vel1: float = Field(0.0, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])
    c_vel0: float = Field(1.0, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])
    c_ch1: float = Field(0.0, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])
    c_ch0: float = Field(1.0, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])
    c_m1: float = Field(1.62, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])
    c_m0: float = Field(0.0, ge=COEF_BOUNDS[0], le=COEF_BOUNDS[1])

    def vector(self, names: tuple[str, ...]) -> list[float]:
        return [float(getattr(self, name)) for name in names]

    def with_vector(self, names: tuple[str, ...], values: Any) -> "EstimatorParams":
        """Return a validated copy with ``names`` replaced by ``values``."""
        update = {name: float(value) for name, value in zip(names, values, strict=True)}
        return EstimatorParams.model_validate({**self.model_dump(), **update})


PARAM_NAMES: tuple[str, ...] = tuple(EstimatorParams.model_fields)


def _bound_for(name: str) -> tuple[float, float]:
    if name.startswith("f_"):
        return FREQ_BOUNDS
    if name == "g_s":
        return G_SWITCH_BOUNDS
    if name.startswith("sigma_"):
        return SIGMA_BOUNDS
    return COEF_BOUNDS


PARAM_BOUNDS: dict[str, tuple[float, float]] = {
    name: _bound_for(name) for name in PARAM_NAMES
}

# Published optimized values; sigma_bz and the thrust fit were not trained there.
REFERENCE_TRAINED_PARAMS = EstimatorParams(
    f_HVSE=7.0,
    f_HPE=8.0,
    g_s=14.24,
    sigma_az=9.9857,
    sigma_vz=9.5722,
    sigma_pz=0.0091,
    c_vel2=-1.1246,
    c_vel1=5.9203,
    c_vel0=6.7054,
    c_ch1=6.2138,
    c_ch0=8.4355,
)


class HpeConfig(BaseModel):
    """Phase estimator settings; the jerk threshold is quoted at ``reference_rate``."""

    model_config = ConfigDict(extra="forbid")

    jerk_threshold: float = Field(2000.0, gt=0)
    reference_rate: float = Field(840.0, gt=0)
    window: int = Field(2, ge=2)


class GaConfig(BaseModel):
    """Genetic algorithm campaign settings."""

    model_config = ConfigDict(extra="forbid")

    population: int = Field(1000, ge=2)
    generations: int = Field(20, ge=1)
    elite_frac: float = Field(0.05, ge=0, le=1)
    crossover_frac: float = Field(0.80, ge=0, le=1)
    mutation_frac: float = Field(0.15, ge=0, le=1)
    alpha0: float = Field(0.05, gt=0, description="Step as a fraction of each bound range")
    bounds: dict[str, tuple[float, float]] = Field(default_factory=dict)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_composition(self) -> "GaConfig":
        total = self.elite_frac + self.crossover_frac + self.mutation_frac
        if abs(total - 1.0) > 1e-9:
            raise ValueError(
                f"elite_frac + crossover_frac + mutation_frac must sum to 1, got {total:g}"
            )
        for name, (lo, hi) in self.bounds.items():
            if name not in PARAM_BOUNDS:
                raise ValueError(f"Unknown parameter in bounds: {name}")
            table_lo, table_hi = PARAM_BOUNDS[name]
            if not table_lo <= lo < hi <= table_hi:
                raise ValueError(
                    f"Bounds for {name} must satisfy {table_lo} <= lo < hi <= {table_hi}"
                )
        return self

    def bounds_for(self, name: str) -> tuple[float, float]:
        return self.bounds.get(name, PARAM_BOUNDS[name])

    def composition(self) -> tuple[int, int, int]:
        """Elite, crossover and mutant counts per generation.

        At least one elite survives; crossover absorbs the rounding.
        """
        n_elite = max(1, round(self.elite_frac * self.population))
        n_mut = min(round(self.mutation_frac * self.population), self.population - n_elite)
        return n_elite, self.population - n_elite - n_mut, n_mut


class CostBreakdown(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L_c: float = Field(ge=0)
    gamma1: float = Field(ge=0)
    gamma2: float = Field(ge=0)
    gamma3: float = Field(ge=0)
    n_ha: int = Field(ge=0, description="Estimated apex count")
    n_ha_true: int = Field(ge=0, description="True apex count")


class AgilityInputs(BaseModel):
    """Inputs to the agility metrics.

    Either direct times (``t_apogee`` and optionally ``t_cycle``) or the model
    quantities (``gamma_*``, ``zeta_s``) drive ``t_r`` and ``t_d``; explicit
    ``t_r``/``t_d`` win over both.
    """

    model_config = ConfigDict(extra="forbid")

    h1: float = Field(gt=0)
    h0: float | None = Field(None, gt=0)
    t_s: float = Field(0.0, ge=0)
    t_r: float | None = Field(None, gt=0)
    t_d: float | None = Field(None, gt=0)
    t_apogee: float | None = Field(None, gt=0)
    t_cycle: float | None = Field(None, gt=0)
    gamma_r: float = Field(0.0, lt=1)
    gamma_d: float = Field(0.0, lt=1)
    gamma_lr: float = Field(0.0, ge=0)
    gamma_ld: float = Field(0.0, ge=0)
    zeta_s: float = Field(1.0, gt=0)
    beta: float = Field(1.0, ge=0, le=1)
    g: float = Field(STANDARD_GRAVITY, gt=0)


class AgilityResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nu_uha: float
    nu_vja: float
    nu_ha: float
    t_r: float
    t_d: float
    h0_implied: float


class MetricsReport(BaseModel):
    """Error metrics for a set of hops (units: %, %, %, s, m)."""

    model_config = ConfigDict(extra="forbid")

    M1: float = Field(ge=0)
    M2: float = Field(ge=0)
    M3: float = Field(ge=0)
    M4: float = Field(ge=0)
    M5: float = Field(ge=0)
    gamma1: float = Field(ge=0)
    gamma2: float = Field(ge=0)
    gamma3: float = Field(ge=0)
    n_hops: int = Field(ge=0)
    excluded_hops: list[int] = Field(default_factory=list)
    ground_height: list[float] = Field(default_factory=list)
    agility: AgilityResult | None = None


class TTestResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    metric: str
    statistic: float
    pvalue: float
    n_a: int
    n_b: int


class ErrorResponse(BaseModel):
    """Standard error response payload."""

    model_config = ConfigDict(extra="forbid")

    error: bool = True
    code: str
    message: str
    exception: str | None = None
    details: dict[str, Any] | None = None


class ItemResult(BaseModel):
    """Result of one work item in a parallel batch."""

    model_config = ConfigDict(extra="forbid")

    success: bool
    output: Any = None
    error: ErrorResponse | None = None


__all__: list[str] = [
    "DEFAULT_SWEEP_FREQUENCIES",
    "MAX_TWR",
    "PARAM_BOUNDS",
    "PARAM_NAMES",
    "REFERENCE_TRAINED_PARAMS",
    "STANDARD_GRAVITY",
    "AgilityInputs",
    "AgilityResult",
    "BaselineKind",
    "ControlSource",
    "CostBreakdown",
    "ErrorResponse",
    "EstimatorParams",
    "EventKind",
    "FilterKind",
    "GaConfig",
    "HpeConfig",
    "ImuptKind",
    "ItemResult",
    "MetricsReport",
    "Phase",
    "RobotParams",
    "SensorConfig",
    "TTestResult",
]
