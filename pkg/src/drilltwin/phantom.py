"""Synthetic drilling phantoms.

The standard phantom is a bone block with a cortical rind, trabecular core,
a pre-drilled access cavity, and three embedded critical structures placed a
millimetre or so behind the cavity walls: a nerve tube (+x wall), a thin
plate (+y wall) and a larger sinus tube (-x wall). Coordinates below are
volume-local millimetres; world placement comes from origin_mm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anatomy import DEFAULT_STRUCTURES, LabeledVolume, StructureSpec

NERVE, TEGMEN, SIGMOID, CORTICAL, TRABECULAR = (s.index for s in DEFAULT_STRUCTURES)


@dataclass(frozen=True)
class PhantomSpec:
    size_voxels: int = 48
    spacing_mm: float = 0.5
    # default placement puts the cavity mouth 8 mm under the arm's home tip
    origin_mm: tuple[float, float, float] = (-12.0, -12.0, 76.0)

    block_xy_mm: tuple[float, float] = (2.0, 22.0)
    block_z_mm: tuple[float, float] = (2.0, 16.0)
    rind_mm: float = 1.5

    cavity_center_mm: tuple[float, float] = (12.0, 12.0)
    cavity_radius_mm: float = 3.0
    cavity_floor_z_mm: float = 9.0

    nerve_x_mm: float = 17.0
    nerve_z_mm: float = 12.0
    nerve_radius_mm: float = 1.0
    nerve_y_mm: tuple[float, float] = (4.0, 20.0)

    plate_y_mm: tuple[float, float] = (16.2, 17.4)
    plate_x_mm: tuple[float, float] = (5.0, 19.0)
    plate_z_mm: tuple[float, float] = (5.0, 15.0)

    sinus_x_mm: float = 6.5
    sinus_y_mm: float = 12.0
    sinus_radius_mm: float = 1.5
    sinus_z_mm: tuple[float, float] = (3.5, 14.0)

    def to_dict(self) -> dict:
        out = {}
        for name, value in self.__dict__.items():
            out[name] = list(value) if isinstance(value, tuple) else value
        return out

    @staticmethod
    def from_dict(d: dict) -> "PhantomSpec":
        base = PhantomSpec()
        kwargs = {}
        for name, default in base.__dict__.items():
            value = d.get(name, default)
            if isinstance(default, tuple):
                value = tuple(float(v) for v in value)
            elif isinstance(default, int):
                value = int(value)
            else:
                value = float(value)
            kwargs[name] = value
        return PhantomSpec(**kwargs)


def make_phantom(spec: PhantomSpec = PhantomSpec(),
                 structures: tuple[StructureSpec, ...] = DEFAULT_STRUCTURES) -> LabeledVolume:
    """Build the standard five-structure drilling phantom."""
    n = spec.size_voxels
    sp = spec.spacing_mm
    scale = n * sp / 24.0  # geometry below is designed on a 24 mm cube
    ax = np.arange(n) * sp
    x = ax[:, None, None]
    y = ax[None, :, None]
    z = ax[None, None, :]

    def s(v):
        return v * scale

    labels = np.zeros((n, n, n), dtype=np.uint8)

    xy0, xy1 = (s(v) for v in spec.block_xy_mm)
    z0, z1 = (s(v) for v in spec.block_z_mm)
    block = (x >= xy0) & (x <= xy1) & (y >= xy0) & (y <= xy1) & (z >= z0) & (z <= z1)
    rind = s(spec.rind_mm)
    core = ((x >= xy0 + rind) & (x <= xy1 - rind)
            & (y >= xy0 + rind) & (y <= xy1 - rind)
            & (z >= z0 + rind) & (z <= z1 - rind))
    labels[block] = CORTICAL
    labels[block & core] = TRABECULAR

    cx, cy = (s(v) for v in spec.cavity_center_mm)
    nerve = (((x - s(spec.nerve_x_mm)) ** 2 + (z - s(spec.nerve_z_mm)) ** 2
              <= s(spec.nerve_radius_mm) ** 2)
             & (y >= s(spec.nerve_y_mm[0])) & (y <= s(spec.nerve_y_mm[1])) & block)
    plate = ((y >= s(spec.plate_y_mm[0])) & (y <= s(spec.plate_y_mm[1]))
             & (x >= s(spec.plate_x_mm[0])) & (x <= s(spec.plate_x_mm[1]))
             & (z >= s(spec.plate_z_mm[0])) & (z <= s(spec.plate_z_mm[1])) & block)
    sinus = (((x - s(spec.sinus_x_mm)) ** 2 + (y - s(spec.sinus_y_mm)) ** 2
              <= s(spec.sinus_radius_mm) ** 2)
             & (z >= s(spec.sinus_z_mm[0])) & (z <= s(spec.sinus_z_mm[1])) & block)
    labels[nerve] = NERVE
    labels[plate] = TEGMEN
    labels[sinus] = SIGMOID

    cavity = (((x - cx) ** 2 + (y - cy) ** 2 <= s(spec.cavity_radius_mm) ** 2)
              & (z >= s(spec.cavity_floor_z_mm)))
    # the access cavity is pre-drilled through bone only
    carvable = (labels == CORTICAL) | (labels == TRABECULAR)
    labels[cavity & carvable] = 0

    return LabeledVolume(labels, np.full(3, sp), np.array(spec.origin_mm), structures)


def flat_slab(structure_index: int, size: tuple[int, int, int], spacing_mm: float,
              axis: int, filled_from: int,
              structures: tuple[StructureSpec, ...] = DEFAULT_STRUCTURES,
              origin_mm=(0.0, 0.0, 0.0)) -> LabeledVolume:
    """Half-space slab of one structure, filled where index >= filled_from along axis."""
    labels = np.zeros(size, dtype=np.uint8)
    idx = [slice(None)] * 3
    idx[axis] = slice(filled_from, None)
    labels[tuple(idx)] = structure_index
    return LabeledVolume(labels, np.full(3, float(spacing_mm)), np.array(origin_mm, dtype=float),
                         structures)
