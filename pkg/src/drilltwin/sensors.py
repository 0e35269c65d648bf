"""Force sensing: sample-and-hold sensor simulation and tip force estimation.

Two sensors matter here: one near the drill measuring tool-tissue interaction,
one at the wrist measuring what the operator applies. Both sample slower than
the simulation and hold their last value between samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import RigidTransform, Wrench, invert_wrench_transform, transform_wrench


@dataclass(frozen=True)
class SensorModel:
    name: str
    frame: str                                 # frame tag of produced readings
    rate_hz: float = 200.0
    noise_std_n: float = 0.005
    torque_noise_std_nmm: float = 0.0
    bias_walk_n_per_sqrt_s: float = 0.0        # random-walk bias intensity, default off
    mounting: RigidTransform = field(default_factory=RigidTransform.identity)
    # mounting = pose of the measured frame expressed in the sensor frame

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError("sensor rate must be positive")
        if self.noise_std_n < 0 or self.torque_noise_std_nmm < 0 or self.bias_walk_n_per_sqrt_s < 0:
            raise ValueError("noise parameters must be >= 0")

    @property
    def period_s(self) -> float:
        return 1.0 / self.rate_hz


def default_drill_sensor(noise_std_n: float = 0.005) -> SensorModel:
    # sensor sits 40 mm up the shaft from the tip
    return SensorModel("drill", "drill", noise_std_n=noise_std_n,
                       mounting=RigidTransform(np.eye(3), np.array([0.0, 0.0, -40.0])))


def default_wrist_sensor(noise_std_n: float = 0.005) -> SensorModel:
    return SensorModel("wrist", "wrist", noise_std_n=noise_std_n,
                       mounting=RigidTransform(np.eye(3), np.array([0.0, 0.0, -80.0])))


@dataclass
class SensorReading:
    time_s: float
    wrench: Wrench
    sample_index: int


class SensorSim:
    """Zero-order-hold sampler with seeded Gaussian noise and optional bias walk."""

    def __init__(self, model: SensorModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self.bias = np.zeros(3)
        self.last: Optional[SensorReading] = None
        self._count = 0

    def reset(self) -> None:
        self.bias = np.zeros(3)
        self.last = None
        self._count = 0

    def sample(self, t: float, true_wrench_measured_frame: Wrench) -> SensorReading:
        """Take one sample; the input wrench is expressed in the measured frame
        and comes out re-expressed in the sensor frame, noise added."""
        m = self.model
        w = transform_wrench(true_wrench_measured_frame, m.mounting, m.frame)
        if m.bias_walk_n_per_sqrt_s > 0.0:
            self.bias = self.bias + self.rng.normal(
                0.0, m.bias_walk_n_per_sqrt_s * np.sqrt(m.period_s), 3)
        f = w.force + self.bias
        if m.noise_std_n > 0.0:
            f = f + self.rng.normal(0.0, m.noise_std_n, 3)
        tau = w.torque
        if m.torque_noise_std_nmm > 0.0:
            tau = tau + self.rng.normal(0.0, m.torque_noise_std_nmm, 3)
        self.last = SensorReading(t, Wrench(f, tau, m.frame), self._count)
        self._count += 1
        return self.last

    def held(self) -> Optional[SensorReading]:
        return self.last


@dataclass
class TipForceEstimate:
    wrench: Wrench               # tip frame
    sample_time_s: float
    stale: bool

    @property
    def magnitude(self) -> float:
        return self.wrench.force_magnitude


def estimate_tip_force(reading: SensorReading, model: SensorModel,
                       now_s: float) -> TipForceEstimate:
    """Map a drill-sensor reading back to the tip frame.

    Inverts the mounting transform; readings older than two sensor periods are
    flagged stale rather than silently trusted.
    """
    tip_wrench = invert_wrench_transform(reading.wrench, model.mounting, "tip")
    stale = (now_s - reading.time_s) > 2.0 * model.period_s + 1e-12
    return TipForceEstimate(tip_wrench, reading.time_s, stale)
