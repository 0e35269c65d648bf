"""Penalty contact between the drill tip and labeled anatomy, plus burr ablation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .anatomy import (CarveResult, LabeledVolume, SdfSet, _clamped_grid_coords,
                      _trilinear, carve_voxels, sdf_gradient)


@dataclass(frozen=True)
class MaterialContact:
    """Contact model parameters shared across structures (stiffness is per structure)."""

    damping_n_s_per_mm: float = 0.02
    min_normal_mm: float = 1e-9   # gradient magnitudes below this are degenerate

    def __post_init__(self):
        if self.damping_n_s_per_mm < 0:
            raise ValueError("damping must be >= 0")


@dataclass
class ContactResult:
    force_n: np.ndarray                  # total tool force, anatomy frame
    per_structure_n: np.ndarray          # magnitude per structure slot
    penetrating: tuple[int, ...]         # slots with tip inside the structure
    degenerate_normal: bool = False

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.force_n))


class ContactModel:
    """Stateful penalty contact: spring along the surface normal plus a damper
    that only resists approach. Keeps the last valid normal per structure for
    the rare deep-interior points where the interpolated gradient vanishes."""

    def __init__(self, params: MaterialContact = MaterialContact()):
        self.params = params
        self._last_normal: dict[int, np.ndarray] = {}

    def reset(self) -> None:
        self._last_normal.clear()

    def compute(self, sdfs: SdfSet, tip_mm: np.ndarray, tip_vel_mm_s: np.ndarray,
                dists: Optional[np.ndarray] = None) -> ContactResult:
        # dists: interpolated per-slot distances at tip_mm, if the caller
        # already queried them this tick
        n_struct = sdfs.n_structures
        total = np.zeros(3)
        per = np.zeros(n_struct)
        penetrating = []
        degenerate = False
        if dists is None:
            gc, _ = _clamped_grid_coords(sdfs, tip_mm)
            dists = _trilinear(sdfs.fields, gc)
        for slot in range(n_struct):
            d = dists[slot]
            if d >= 0.0 or not np.isfinite(d):
                continue
            penetrating.append(slot)
            grad = sdf_gradient(sdfs, slot, tip_mm)
            norm = float(np.linalg.norm(grad))
            if norm < self.params.min_normal_mm:
                cached = self._last_normal.get(slot)
                if cached is None:
                    degenerate = True
                    continue
                normal = cached
                degenerate = True
            else:
                normal = grad / norm
                self._last_normal[slot] = normal
            penetration = -d
            stiffness = sdfs.structures[slot].stiffness_n_per_mm
            approach = -float(np.dot(tip_vel_mm_s, normal))   # > 0 when moving inward
            mag = stiffness * penetration + self.params.damping_n_s_per_mm * max(0.0, approach)
            total += mag * normal
            per[slot] = mag
        return ContactResult(total, per, tuple(penetrating), degenerate)


@dataclass(frozen=True)
class AblationParams:
    burr_radius_mm: float = 0.9
    cut_threshold_n: float = 0.4        # below this the burr just rubs
    carve_quantum_n_s: float = 0.08     # force-time impulse consumed per carve
    bite_fraction: float = 0.6          # carve center offset into the material, x burr radius

    def __post_init__(self):
        if self.burr_radius_mm <= 0 or self.cut_threshold_n < 0 or self.carve_quantum_n_s <= 0:
            raise ValueError("bad ablation parameters")
        if not 0.0 <= self.bite_fraction <= 1.0:
            raise ValueError("bite_fraction must be in [0, 1]")


class DrillAblation:
    """Converts sustained contact force into carve calls.

    Cutting accrues force-time impulse while the drill is powered and pressing
    above the cut threshold; each time a quantum accumulates, one burr-sized
    ball is carved, centered a bite ahead of the tip along the push direction.
    Higher force therefore carves proportionally faster. Requests that only
    touch critical labels become breach events instead of removing anything.
    """

    def __init__(self, params: AblationParams = AblationParams()):
        self.params = params
        self._impulse = 0.0

    def reset(self) -> None:
        self._impulse = 0.0

    def update(self, dt: float, contact_mag_n: float, tip_mm: np.ndarray,
               contact_force_n: np.ndarray, volume: LabeledVolume,
               sdfs: SdfSet) -> Optional[CarveResult]:
        if contact_mag_n <= self.params.cut_threshold_n:
            return None
        self._impulse += contact_mag_n * dt
        if self._impulse < self.params.carve_quantum_n_s:
            return None
        self._impulse -= self.params.carve_quantum_n_s
        inward = -np.asarray(contact_force_n, dtype=float) / contact_mag_n
        center = np.asarray(tip_mm, dtype=float) + self.params.bite_fraction \
            * self.params.burr_radius_mm * inward
        return carve_voxels(volume, sdfs, center, self.params.burr_radius_mm)
