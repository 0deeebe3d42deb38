"""Dual-range accelerometer synthesis, range switching and low-pass filtering."""

import math
from dataclasses import dataclass

import numpy as np

from ..models import STANDARD_GRAVITY, SensorConfig

G0 = STANDARD_GRAVITY


@dataclass(frozen=True, slots=True)
class ImuSample:
    """Vertical specific force from both accelerometers, in m/s^2."""

    t: float
    a_lowg: float
    a_highg: float


@dataclass(frozen=True, slots=True)
class LowPassState:
    cutoff: float
    y_prev: float = 0.0
    initialized: bool = False

    def __post_init__(self) -> None:
        if not self.cutoff > 0.0:
            raise ValueError(f"Low-pass cutoff must be positive, got {self.cutoff}")


def _clip(value: float, limit: float) -> float:
    return min(max(value, -limit), limit)


def sample_imu(
    a_true: float, cfg: SensorConfig, rng: np.random.Generator, t: float = 0.0
) -> ImuSample:
    """Sample both accelerometer channels from the true specific force.

    Each channel adds the configured bias and its own Gaussian noise, then
    clips to its range. Aliasing comes from the caller sampling the 40 kHz
    truth at ``cfg.sensor_rate``; nothing here band-limits the signal.
    """
    if not math.isfinite(a_true):
        raise ValueError(f"a_true must be finite, got {a_true}")
    noise = rng.standard_normal(2)
    a = a_true + cfg.bias
    return ImuSample(
        t=t,
        a_lowg=_clip(a + cfg.lowg_noise_std * G0 * float(noise[0]), cfg.lowg_range * G0),
        a_highg=_clip(
            a + cfg.highg_noise_std * G0 * float(noise[1]), cfg.highg_range * G0
        ),
    )


def sample_gyro(t: float = 0.0) -> np.ndarray:
    """Angular rate stub; attitude is held at identity."""
    return np.zeros(3)


def select_channel(a_lowg: float, a_highg: float, g_s: float) -> float:
    """Low-g channel below the switching threshold, high-g at or above it."""
    if abs(a_lowg) < g_s * G0:
        return a_lowg
    return a_highg


def select_accel(sample: ImuSample, g_s: float) -> float:
    return select_channel(sample.a_lowg, sample.a_highg, g_s)


def lowpass_alpha(cutoff: float, dt: float) -> float:
    return 1.0 - math.exp(-2.0 * math.pi * cutoff * dt)


def low_pass(state: LowPassState, x: float, dt: float) -> tuple[LowPassState, float]:
    """First-order IIR step; the first call initializes the output to ``x``."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not state.initialized:
        return LowPassState(state.cutoff, x, True), x
    y = state.y_prev + lowpass_alpha(state.cutoff, dt) * (x - state.y_prev)
    return LowPassState(state.cutoff, y, True), y


class LowPass:
    """In-place first-order IIR at a fixed step; same output as chained ``low_pass``."""

    __slots__ = ("alpha", "initialized", "y")

    def __init__(self, cutoff: float, dt: float) -> None:
        if not cutoff > 0.0:
            raise ValueError(f"Low-pass cutoff must be positive, got {cutoff}")
        if not dt > 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.alpha = lowpass_alpha(cutoff, dt)
        self.y = 0.0
        self.initialized = False

    def update(self, x: float) -> float:
        if self.initialized:
            self.y += self.alpha * (x - self.y)
        else:
            self.y = x
            self.initialized = True
        return self.y


def sample_indices(n: int, source_rate: float, target_rate: float) -> np.ndarray:
    """Indices into a ``source_rate`` stream of length ``n`` at ``target_rate``.

    No anti-alias filtering is applied: picking raw samples is what makes
    content above the target Nyquist frequency fold back.
    """
    if not 0.0 < target_rate <= source_rate:
        raise ValueError(
            f"target_rate must be in (0, {source_rate}], got {target_rate}"
        )
    count = int(math.floor((n - 1) * target_rate / source_rate + 1e-9)) + 1
    indices = np.rint(np.arange(count) * (source_rate / target_rate)).astype(np.int64)
    return indices[indices < n]


def alias_frequency(f: float, fs: float) -> float:
    """Apparent frequency of a tone at ``f`` Hz sampled at ``fs`` Hz."""
    return abs(f - fs * round(f / fs))


__all__: list[str] = [
    "G0",
    "ImuSample",
    "LowPass",
    "LowPassState",
    "alias_frequency",
    "low_pass",
    "lowpass_alpha",
    "sample_gyro",
    "sample_imu",
    "sample_indices",
    "select_accel",
    "select_channel",
]
