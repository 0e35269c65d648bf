"""Scenario definitions and hand-force input sources.

A scenario bundles everything a run needs: anatomy, robot chain, controller
and interaction parameters, rates, seed, and the hand-force input source.
Scenarios serialize to JSON; two runs of the same scenario and seed must be
bit-identical, so nothing here may consult wall-clock time or global RNG.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .anatomy import SdfSet
from .controller import ControllerParams
from .geometry import RigidTransform
from .phantom import PhantomSpec
from .robot import AdmittanceGains

SEGMENT_KINDS = ("hold", "ramp", "approach", "press_structure", "press_to_force", "retract")
INPUT_TYPES = ("script", "replay", "live")


@dataclass(frozen=True)
class Rates:
    sim_hz: int = 1000
    control_hz: int = 500
    sensor_hz: int = 200

    def __post_init__(self):
        if not (self.sim_hz >= self.control_hz >= self.sensor_hz >= 1):
            raise ValueError("need sim_hz >= control_hz >= sensor_hz >= 1")
        if self.sim_hz % self.control_hz or self.sim_hz % self.sensor_hz:
            raise ValueError("control and sensor rates must divide the simulation rate")

    def to_dict(self) -> dict:
        return {"sim_hz": self.sim_hz, "control_hz": self.control_hz, "sensor_hz": self.sensor_hz}

    @staticmethod
    def from_dict(d: dict) -> "Rates":
        return Rates(int(d.get("sim_hz", 1000)), int(d.get("control_hz", 500)),
                     int(d.get("sensor_hz", 200)))


def _segment_problems(segments: list[dict], max_force_n: float) -> list[str]:
    if not segments:
        return ["input.segments: scripted input needs at least one segment"]
    problems = []
    for i, seg in enumerate(segments):
        tag = f"input.segments[{i}]"
        kind = seg.get("kind")
        if kind not in SEGMENT_KINDS:
            problems.append(f"{tag}.kind: {kind!r} is not one of {SEGMENT_KINDS}")
            continue
        if float(seg.get("duration_s", 0.0)) <= 0.0:
            problems.append(f"{tag}.duration_s: must be positive")
        if kind == "press_to_force":
            target = float(seg.get("target_n", 0.0))
            if not 0.0 < target <= max_force_n:
                problems.append(f"{tag}.target_n: must be in (0, max_hand_force_n]")
    return problems


def _validate_segments(segments: list[dict], max_force_n: float = float("inf")) -> None:
    problems = _segment_problems(segments, max_force_n)
    if problems:
        raise ValueError("; ".join(problems))


@dataclass
class Scenario:
    name: str = "unnamed"
    seed: int = 0
    duration_s: float = 2.0
    rates: Rates = field(default_factory=Rates)
    anatomy: dict = field(default_factory=lambda: {"phantom": PhantomSpec().to_dict()})
    chain_file: Optional[str] = None
    initial_q: Optional[list] = None
    registration: Optional[dict] = None
    assist_enabled: bool = True
    drill_power: bool = False
    controller: ControllerParams = field(default_factory=ControllerParams)
    gains: AdmittanceGains = field(default_factory=AdmittanceGains)
    admittance_damping: float = 1e-3
    interaction: dict = field(default_factory=dict)
    sensor_noise_std_n: float = 0.005
    max_hand_force_n: float = 15.0
    input: dict = field(default_factory=lambda: {"type": "script", "segments": [
        {"kind": "hold", "duration_s": 1.0, "force_n": [0.0, 0.0, 0.0]}]})

    def __post_init__(self):
        # Collect every offending field so one error round-trip reports them all.
        problems = []
        if self.duration_s < 0:
            problems.append("duration_s: must be >= 0")
        if self.max_hand_force_n <= 0:
            problems.append("max_hand_force_n: must be positive")
        if self.sensor_noise_std_n < 0:
            problems.append("sensor_noise_std_n: must be >= 0")
        if self.admittance_damping < 0:
            problems.append("admittance_damping: must be >= 0")
        itype = self.input.get("type")
        if itype not in INPUT_TYPES:
            problems.append(f"input.type: must be one of {INPUT_TYPES}")
        elif itype == "script":
            problems.extend(_segment_problems(self.input.get("segments", []),
                                              self.max_hand_force_n))
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "rates": self.rates.to_dict(),
            "anatomy": self.anatomy,
            "chain_file": self.chain_file,
            "initial_q": self.initial_q,
            "registration": self.registration,
            "assist_enabled": self.assist_enabled,
            "drill_power": self.drill_power,
            "controller": self.controller.to_dict(),
            "gains": {"translational": self.gains.translational,
                      "rotational": self.gains.rotational},
            "admittance_damping": self.admittance_damping,
            "interaction": self.interaction,
            "sensor_noise_std_n": self.sensor_noise_std_n,
            "max_hand_force_n": self.max_hand_force_n,
            "input": self.input,
        }

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        base = Scenario()
        gains = d.get("gains", {})
        return Scenario(
            name=str(d.get("name", "unnamed")),
            seed=int(d.get("seed", 0)),
            duration_s=float(d.get("duration_s", base.duration_s)),
            rates=Rates.from_dict(d.get("rates", {})),
            anatomy=d.get("anatomy", base.anatomy),
            chain_file=d.get("chain_file"),
            initial_q=d.get("initial_q"),
            registration=d.get("registration"),
            assist_enabled=bool(d.get("assist_enabled", True)),
            drill_power=bool(d.get("drill_power", False)),
            controller=ControllerParams.from_dict(d.get("controller", {})),
            gains=AdmittanceGains(float(gains.get("translational", 0.25)),
                                  float(gains.get("rotational", 1e-4))),
            admittance_damping=float(d.get("admittance_damping", 1e-3)),
            interaction=d.get("interaction", {}),
            sensor_noise_std_n=float(d.get("sensor_noise_std_n", 0.005)),
            max_hand_force_n=float(d.get("max_hand_force_n", 15.0)),
            input=d.get("input", base.input),
        )

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def registration_transform(self) -> RigidTransform:
        if self.registration is None:
            return RigidTransform.identity()
        return RigidTransform.from_dict(self.registration)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @staticmethod
    def load(path: str | Path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as f:
            return Scenario.from_dict(json.load(f))


def builtin_scenario_names() -> list[str]:
    root = resources.files("drilltwin").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_builtin_scenario(name: str) -> Scenario:
    path = resources.files("drilltwin").joinpath("scenarios").joinpath(f"{name}.json")
    if not path.is_file():
        known = ", ".join(builtin_scenario_names())
        raise FileNotFoundError(f"no builtin scenario {name!r} (known: {known})")
    return Scenario.from_dict(json.loads(path.read_text(encoding="utf-8")))


def resolve_scenario(ref: str) -> Scenario:
    """Accept a path to a scenario JSON or the name of a builtin scenario."""
    p = Path(ref)
    if p.exists():
        return Scenario.load(p)
    return load_builtin_scenario(ref)


class SimContext:
    """What input providers may observe: the true world as the operator feels it."""

    def __init__(self):
        self.tip_anatomy_mm = np.zeros(3)
        self.true_force_mag_n = 0.0
        self.sdfs: Optional[SdfSet] = None
        self.anatomy_from_world_rot = np.eye(3)
        self._grad_cache: dict[int, np.ndarray] = {}

    def direction_toward(self, structure_index: int) -> Optional[np.ndarray]:
        """World-frame unit vector pointing toward a structure, or None when the
        local field gradient is degenerate."""
        from .anatomy import sdf_gradient
        slot = self.sdfs.slot_of(structure_index)
        grad = sdf_gradient(self.sdfs, slot, self.tip_anatomy_mm)
        n = float(np.linalg.norm(grad))
        if n < 1e-9:
            return None
        toward_anat = -grad / n
        return self.anatomy_from_world_rot.T @ toward_anat

    def nearest_structure_index(self) -> Optional[int]:
        from .anatomy import query_distances
        q = query_distances(self.sdfs, self.tip_anatomy_mm)
        return None if not np.isfinite(q.min_distance_mm) else q.nearest_index


class InputProvider:
    def reset(self) -> None:
        pass

    def force(self, t: float, dt: float, ctx: SimContext) -> np.ndarray:
        raise NotImplementedError

    def drill_power(self, t: float, default: bool) -> bool:
        return default


def _clamp_force(f: np.ndarray, max_n: float) -> np.ndarray:
    mag = float(np.linalg.norm(f))
    if mag > max_n and mag > 0.0:
        return f * (max_n / mag)
    return f


class ScriptInput(InputProvider):
    """Deterministic scripted hand force built from timed segments plus tremor.

    press_to_force closes its loop on the TRUE contact force, so the scripted
    intent (reach this force on this structure) does not depend on whether the
    assist is enabled; press_structure applies a fixed-amplitude push toward a
    structure and models an aggressive, open-loop operator.
    """

    def __init__(self, segments: list[dict], tremor_std_n: float, tremor_cutoff_hz: float,
                 max_force_n: float, rng: np.random.Generator):
        _validate_segments(segments, max_force_n)
        self.segments = segments
        self.bounds = np.cumsum([float(s["duration_s"]) for s in segments])
        self.tremor_std_n = float(tremor_std_n)
        self.tremor_cutoff_hz = float(tremor_cutoff_hz)
        self.max_force_n = float(max_force_n)
        self.rng = rng
        self.reset()

    def reset(self) -> None:
        self._seg_idx = 0
        self._amp = 0.0
        self._last_dir = np.array([0.0, 0.0, -1.0])
        self._tremor = np.zeros(3)

    def _segment_at(self, t: float) -> tuple[dict, float]:
        while self._seg_idx < len(self.segments) - 1 and t >= self.bounds[self._seg_idx]:
            self._seg_idx += 1
            self._amp = 0.0
        start = 0.0 if self._seg_idx == 0 else self.bounds[self._seg_idx - 1]
        return self.segments[self._seg_idx], t - start

    def _toward(self, ctx: SimContext, structure_index: Optional[int]) -> np.ndarray:
        idx = structure_index if structure_index is not None else ctx.nearest_structure_index()
        if idx is not None:
            d = ctx.direction_toward(idx)
            if d is not None:
                self._last_dir = d
        return self._last_dir

    def force(self, t: float, dt: float, ctx: SimContext) -> np.ndarray:
        seg, local_t = self._segment_at(t)
        kind = seg["kind"]
        if kind == "hold":
            f = np.asarray(seg["force_n"], dtype=float)
        elif kind == "ramp":
            a = np.asarray(seg["start_n"], dtype=float)
            b = np.asarray(seg["end_n"], dtype=float)
            u = min(max(local_t / float(seg["duration_s"]), 0.0), 1.0)
            f = a + (b - a) * u
        elif kind == "approach":
            target = np.asarray(seg["target_mm"], dtype=float)
            err_anat = target - ctx.tip_anatomy_mm
            err = ctx.anatomy_from_world_rot.T @ err_anat
            f = _clamp_force(float(seg.get("gain_n_per_mm", 2.0)) * err,
                             float(seg.get("max_n", 8.0)))
        elif kind == "press_structure":
            f = float(seg["amplitude_n"]) * self._toward(ctx, int(seg["structure"]))
        elif kind == "press_to_force":
            # Proportional push on the true-force error, slew limited. Amplitude
            # may go negative so an overshoot gets actively pulled back; max_n
            # caps the free-space push so first touch stays gentle.
            target = float(seg["target_n"])
            rate = float(seg.get("ramp_n_per_s", 10.0))
            kp = float(seg.get("gain_n_per_n", 10.0))
            cap = min(float(seg.get("max_n", 6.0)), self.max_force_n)
            desired = kp * (target - ctx.true_force_mag_n)
            step = min(max(desired - self._amp, -rate * dt), rate * dt)
            self._amp = min(max(self._amp + step, -cap), cap)
            f = self._amp * self._toward(ctx, seg.get("structure"))
        elif kind == "retract":
            away = -self._toward(ctx, seg.get("structure"))
            f = float(seg.get("amplitude_n", 3.0)) * away
        else:  # unreachable after validation
            raise ValueError(kind)

        if self.tremor_std_n > 0.0:
            # one-pole low-pass shaped so the steady-state output std matches
            a = float(np.exp(-2.0 * np.pi * self.tremor_cutoff_hz * dt))
            boost = np.sqrt((1.0 + a) / max(1.0 - a, 1e-12))
            white = self.rng.normal(0.0, self.tremor_std_n * boost, 3)
            self._tremor = a * self._tremor + (1.0 - a) * white
            f = f + self._tremor
        return _clamp_force(f, self.max_force_n)


class ReplayInput(InputProvider):
    """Feed back the hand-force and drill-power columns of a recorded run."""

    def __init__(self, forces_per_sim_tick: np.ndarray, drill_on_per_sim_tick: np.ndarray,
                 sim_hz: int):
        self.forces = np.asarray(forces_per_sim_tick, dtype=float)
        self.drill_on = np.asarray(drill_on_per_sim_tick, dtype=bool)
        self._sim_hz = int(sim_hz)

    def _tick(self, t: float) -> int:
        return min(int(round(t * self._sim_hz)), len(self.forces) - 1)

    def force(self, t: float, dt: float, ctx: SimContext) -> np.ndarray:
        return self.forces[self._tick(t)].copy()

    def drill_power(self, t: float, default: bool) -> bool:
        return bool(self.drill_on[self._tick(t)])


class LiveInput(InputProvider):
    """Hand force from an external steer stream, with dead-man decay.

    Commands are zero-order-held; when no fresh command has arrived for
    deadman_s of session time the force ramps linearly to zero over decay_s.
    """

    def __init__(self, deadman_s: float = 0.2, decay_s: float = 0.1):
        self.deadman_s = float(deadman_s)
        self.decay_s = max(float(decay_s), 1e-6)
        self._force = np.zeros(3)
        self._received_t: Optional[float] = None
        self._drill = False

    def submit(self, t: float, force: np.ndarray, drill_power: bool) -> None:
        self._force = np.asarray(force, dtype=float).reshape(3)
        self._received_t = t
        self._drill = bool(drill_power)

    def force(self, t: float, dt: float, ctx: SimContext) -> np.ndarray:
        if self._received_t is None:
            return np.zeros(3)
        gap = t - self._received_t
        if gap <= self.deadman_s:
            return self._force.copy()
        fade = 1.0 - (gap - self.deadman_s) / self.decay_s
        if fade <= 0.0:
            return np.zeros(3)
        return self._force * fade

    def drill_power(self, t: float, default: bool) -> bool:
        if self._received_t is None or (t - self._received_t) > self.deadman_s:
            return False
        return self._drill


def make_input_provider(scenario: Scenario, rng: np.random.Generator) -> InputProvider:
    spec = scenario.input
    itype = spec["type"]
    if itype == "script":
        return ScriptInput(spec["segments"], float(spec.get("tremor_std_n", 0.0)),
                           float(spec.get("tremor_cutoff_hz", 8.0)),
                           scenario.max_hand_force_n, rng)
    if itype == "replay":
        from .runlog import FLAG_DRILL_ON, load_any
        source = load_any(spec["log"])
        drill_on = (source.records["flags"] & FLAG_DRILL_ON) != 0
        return ReplayInput(source.records["f_hand"], drill_on, scenario.rates.sim_hz)
    if itype == "live":
        return LiveInput(float(spec.get("deadman_s", 0.2)), float(spec.get("decay_s", 0.1)))
    raise ValueError(f"unknown input type {itype!r}")
