"""Situational admittance gain scheduling.

The controller watches the estimated tool-tip force and the per-structure
distances, decides which structure is being operated on, and publishes a
scalar admittance scale:

    FREE      no tool contact            -> high gain, free motion
    CONTACT   contact below the active   -> reduced fixed gain
              structure's force limit
    OVERFORCE contact at/above the limit -> gain decays exponentially from the
                                            contact gain toward a floor, driven
                                            by the accumulated force excess

During OVERFORCE the published gain is

    gain(t) = (contact_gain - floor_gain) * exp(-decay_rate * x(t)) + floor_gain

where x(t) is the time integral of (|F| - limit) since onset ("integral" mode)
or the instantaneous excess times elapsed time ("literal" mode). At onset
x = 0, so the gain leaves CONTACT continuously. Contact detection carries a
hysteresis band so sensor tremor near the threshold cannot chatter regimes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .anatomy import StructureSpec


class Regime(enum.IntEnum):
    FREE = 0
    CONTACT = 1
    OVERFORCE = 2


OVERFORCE_MODES = ("integral", "literal")


@dataclass(frozen=True)
class ControllerParams:
    free_gain: float = 1.7
    contact_gain: float = 0.7
    floor_gain: float = 0.3
    decay_rate: float = 1.0            # 1 / (N*s) in integral mode
    contact_threshold_n: float = 0.3
    activation_margin_n: float = 0.2   # limits sit this far below the hard safety bound
    hysteresis_band_n: float = 0.05
    slew_limit_per_s: Optional[float] = None
    overforce_mode: str = "integral"

    def __post_init__(self):
        if not (self.free_gain > self.contact_gain > self.floor_gain > 0.0):
            raise ValueError("gains must satisfy free > contact > floor > 0")
        if self.contact_threshold_n <= 0 or self.activation_margin_n < 0:
            raise ValueError("bad force thresholds")
        if self.hysteresis_band_n < 0 or self.hysteresis_band_n >= self.contact_threshold_n:
            raise ValueError("hysteresis band must be in [0, contact_threshold)")
        if self.decay_rate <= 0:
            raise ValueError("decay rate must be positive")
        if self.slew_limit_per_s is not None and self.slew_limit_per_s <= 0:
            raise ValueError("slew limit must be positive when set")
        if self.overforce_mode not in OVERFORCE_MODES:
            raise ValueError(f"overforce_mode must be one of {OVERFORCE_MODES}")

    def to_dict(self) -> dict:
        return {
            "free_gain": self.free_gain,
            "contact_gain": self.contact_gain,
            "floor_gain": self.floor_gain,
            "decay_rate": self.decay_rate,
            "contact_threshold_n": self.contact_threshold_n,
            "activation_margin_n": self.activation_margin_n,
            "hysteresis_band_n": self.hysteresis_band_n,
            "slew_limit_per_s": self.slew_limit_per_s,
            "overforce_mode": self.overforce_mode,
        }

    @staticmethod
    def from_dict(d: dict) -> "ControllerParams":
        base = ControllerParams()
        return ControllerParams(
            free_gain=float(d.get("free_gain", base.free_gain)),
            contact_gain=float(d.get("contact_gain", base.contact_gain)),
            floor_gain=float(d.get("floor_gain", base.floor_gain)),
            decay_rate=float(d.get("decay_rate", base.decay_rate)),
            contact_threshold_n=float(d.get("contact_threshold_n", base.contact_threshold_n)),
            activation_margin_n=float(d.get("activation_margin_n", base.activation_margin_n)),
            hysteresis_band_n=float(d.get("hysteresis_band_n", base.hysteresis_band_n)),
            slew_limit_per_s=(None if d.get("slew_limit_per_s") is None
                              else float(d["slew_limit_per_s"])),
            overforce_mode=str(d.get("overforce_mode", base.overforce_mode)),
        )


@dataclass
class ControllerState:
    time_s: Optional[float] = None
    in_contact: bool = False
    regime: Regime = Regime.FREE
    structure_slot: Optional[int] = None
    structure_fallback: bool = False
    gain: float = 1.7
    force_limit_n: Optional[float] = None
    overforce_start_s: Optional[float] = None
    overforce_excess: float = 0.0      # integral of (|F| - limit) dt since onset


@dataclass(frozen=True)
class ControlEvent:
    time_s: float
    kind: str                          # regime_change | structure_change
    regime: int
    structure_index: Optional[int]
    gain: float
    force_n: float
    force_limit_n: Optional[float]

    def to_dict(self) -> dict:
        return {
            "time_s": self.time_s,
            "kind": self.kind,
            "regime": int(self.regime),
            "structure_index": self.structure_index,
            "gain": self.gain,
            "force_n": self.force_n,
            "force_limit_n": self.force_limit_n,
        }


def detect_contact(force_mag_n: float, in_contact: bool, params: ControllerParams) -> bool:
    """Threshold with hysteresis: enter at >= threshold, leave below threshold - band."""
    if in_contact:
        return force_mag_n >= params.contact_threshold_n - params.hysteresis_band_n
    return force_mag_n >= params.contact_threshold_n


def estimate_operating_structure(distances_mm: np.ndarray, in_contact: bool,
                                 structures: tuple[StructureSpec, ...]
                                 ) -> tuple[Optional[int], bool]:
    """Pick the structure being operated on from the distance vector.

    The globally nearest structure wins; exact ties prefer critical structures,
    then the lowest label index. If the winner sits outside its own proximity
    band the estimate is still that structure but flagged as a fallback guess.
    Returns (slot in the structure tuple or None, fallback flag).
    """
    if not in_contact:
        return None, False
    d = np.asarray(distances_mm, dtype=float)
    finite = np.flatnonzero(np.isfinite(d))
    if finite.size == 0:
        return None, True
    best = min(finite, key=lambda i: (d[i], not structures[i].critical, structures[i].index))
    fallback = d[best] > structures[best].proximity_radius_mm
    return int(best), bool(fallback)


def compute_gain_adjustment(force_mag_n: float, force_limit_n: float,
                            overforce_elapsed_s: float, overforce_excess: float,
                            params: ControllerParams) -> float:
    """Three-regime gain value; see the module docstring for the decay law."""
    if force_mag_n < params.contact_threshold_n:
        return params.free_gain
    if force_mag_n < force_limit_n:
        return params.contact_gain
    if params.overforce_mode == "integral":
        x = overforce_excess
    else:
        x = (force_mag_n - force_limit_n) * overforce_elapsed_s
    amp = params.contact_gain - params.floor_gain
    gain = amp * float(np.exp(-params.decay_rate * max(x, 0.0))) + params.floor_gain
    return float(min(max(gain, params.floor_gain), params.free_gain))


def _fallback_limit(structures: tuple[StructureSpec, ...]) -> float:
    return min(s.force_limit_n for s in structures)


def step_controller(state: ControllerState, t: float, force_mag_n: float,
                    distances_mm: np.ndarray, params: ControllerParams,
                    structures: tuple[StructureSpec, ...]
                    ) -> tuple[ControllerState, list[ControlEvent]]:
    """Advance the controller one tick.

    Time must be strictly monotone. The overforce accumulator resets whenever
    the regime is re-entered or the operating structure changes, so each onset
    starts at the contact gain and decays afresh.
    """
    if state.time_s is not None and t <= state.time_s:
        raise ValueError(f"non-monotone controller time: {t} after {state.time_s}")
    dt = 0.0 if state.time_s is None else t - state.time_s

    in_contact = detect_contact(force_mag_n, state.in_contact, params)
    slot, fallback = estimate_operating_structure(distances_mm, in_contact, structures)
    if slot is not None:
        limit = structures[slot].force_limit_n
    else:
        limit = _fallback_limit(structures) if in_contact else None

    if not in_contact:
        regime = Regime.FREE
        start, excess = None, 0.0
        gain = params.free_gain
    elif force_mag_n < limit:
        regime = Regime.CONTACT
        start, excess = None, 0.0
        gain = params.contact_gain
    else:
        regime = Regime.OVERFORCE
        entering = state.regime != Regime.OVERFORCE or slot != state.structure_slot
        if entering:
            start, excess = t, 0.0
        else:
            start = state.overforce_start_s
            excess = state.overforce_excess + (force_mag_n - limit) * dt
        gain = compute_gain_adjustment(force_mag_n, limit, t - start, excess, params)

    if params.slew_limit_per_s is not None and dt > 0.0:
        lo = state.gain - params.slew_limit_per_s * dt
        hi = state.gain + params.slew_limit_per_s * dt
        gain = min(max(gain, lo), hi)
    gain = float(min(max(gain, params.floor_gain), params.free_gain))

    new_state = ControllerState(
        time_s=t, in_contact=in_contact, regime=regime, structure_slot=slot,
        structure_fallback=fallback, gain=gain, force_limit_n=limit,
        overforce_start_s=start, overforce_excess=excess,
    )

    events = []
    struct_index = structures[slot].index if slot is not None else None
    if regime != state.regime:
        events.append(ControlEvent(t, "regime_change", int(regime), struct_index,
                                   gain, force_mag_n, limit))
    if slot != state.structure_slot and in_contact:
        events.append(ControlEvent(t, "structure_change", int(regime), struct_index,
                                   gain, force_mag_n, limit))
    return new_state, events
