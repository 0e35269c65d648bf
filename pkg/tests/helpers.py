"""Shared builders for the test suite: small volumes, slabs, and scenarios."""

from __future__ import annotations

import numpy as np

from drilltwin.anatomy import DEFAULT_STRUCTURES, LabeledVolume, StructureSpec
from drilltwin.scenario import Scenario


def brute_force_signed_field(mask: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    """O(N^2) oracle for the signed voxel-center distance field.

    Positive entries are the exact Euclidean distance from an unlabeled voxel
    center to the nearest labeled one; labeled voxels get minus the distance
    to the nearest unlabeled center. Independent of scipy.
    """
    spacing = np.asarray(spacing, dtype=float)
    idx = np.indices(mask.shape).reshape(3, -1).T.astype(float)
    pts = idx * spacing
    flat = mask.ravel()
    inside = pts[flat]
    outside = pts[~flat]
    if inside.size == 0 or outside.size == 0:
        raise ValueError("mask must contain both labeled and unlabeled voxels")

    def min_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        # chunk the pairwise expansion so memory stays bounded
        out = np.empty(len(a))
        step = 4096
        for i in range(0, len(a), step):
            d2 = ((a[i:i + step, None, :] - b[None, :, :]) ** 2).sum(axis=2)
            out[i:i + step] = np.sqrt(d2.min(axis=1))
        return out

    field = np.empty(flat.shape, dtype=float)
    field[~flat] = min_dist(outside, inside)
    field[flat] = -min_dist(inside, outside)
    return field.reshape(mask.shape)


SLAB_STRUCTURES = (
    StructureSpec(1, "facial_nerve", True, 1.5, force_limit_n=0.8, stiffness_n_per_mm=2.5),
    StructureSpec(4, "cortical_bone", False, 0.0, force_limit_n=1.3, stiffness_n_per_mm=3.0),
)


def slab_volume(n: int = 12, spacing: float = 0.5, top_layer: int = 5,
                label: int = 4, structures=SLAB_STRUCTURES) -> LabeledVolume:
    """Flat slab filling z-layers [0, top_layer] with one label, origin at 0."""
    labels = np.zeros((n, n, n), dtype=np.uint8)
    labels[:, :, :top_layer + 1] = label
    return LabeledVolume(labels, np.full(3, spacing), np.zeros(3), structures)


def single_voxel_volume(n: int = 9, spacing: float = 0.5, label: int = 1) -> LabeledVolume:
    labels = np.zeros((n, n, n), dtype=np.uint8)
    c = n // 2
    labels[c, c, c] = label
    return LabeledVolume(labels, np.full(3, spacing), np.zeros(3), SLAB_STRUCTURES)


def quick_scenario(**overrides) -> Scenario:
    """Small fast-running scenario pressing the default phantom floor."""
    base = {
        "name": "quick",
        "seed": 3,
        "duration_s": 1.5,
        "initial_q": [-12.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "input": {
            "type": "script",
            "tremor_std_n": 0.02,
            "segments": [
                {"kind": "approach", "duration_s": 0.6,
                 "target_mm": [0.0, 0.0, 85.1], "gain_n_per_mm": 20.0, "max_n": 15.0},
                {"kind": "press_to_force", "duration_s": 0.9, "target_n": 0.9,
                 "structure": 5, "gain_n_per_n": 16.0, "ramp_n_per_s": 40.0,
                 "max_n": 3.5},
            ],
        },
    }
    base.update(overrides)
    return Scenario.from_dict(base)
