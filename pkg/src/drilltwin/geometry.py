"""Rigid transforms and wrench frame changes.

Conventions: rotation matrices are 3x3 row-major numpy arrays, translations are
millimetres, wrenches stack force (N) over torque (N*mm). A RigidTransform maps
coordinates of a child frame into its parent: p_parent = R @ p_child + t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WRENCH_FRAMES = ("world", "tip", "wrist", "drill")


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation from roll/pitch/yaw (radians), applied as Rz(yaw) Ry(pitch) Rx(roll)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    a = a / n
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_parts(xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(rpy_matrix(*rpy), np.asarray(xyz, dtype=float))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self @ other: apply other first, then self."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack of points (n, 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def apply_vector(self, vec: np.ndarray) -> np.ndarray:
        """Rotate a free vector (no translation)."""
        return np.asarray(vec, dtype=float) @ self.rotation.T

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "RigidTransform":
        return RigidTransform(np.array(d["rotation"], dtype=float),
                              np.array(d["translation"], dtype=float))


@dataclass
class Wrench:
    """Force/torque pair tagged with the frame it is expressed in."""

    force: np.ndarray
    torque: np.ndarray
    frame: str = "world"

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float).reshape(3)
        self.torque = np.asarray(self.torque, dtype=float).reshape(3)
        if self.frame not in WRENCH_FRAMES:
            raise ValueError(f"unknown wrench frame {self.frame!r}")

    @staticmethod
    def zero(frame: str = "world") -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3), frame)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @property
    def force_magnitude(self) -> float:
        return float(np.linalg.norm(self.force))


def transform_wrench(wrench: Wrench, pose: RigidTransform, target_frame: str) -> Wrench:
    """Re-express a wrench in another frame.

    `pose` is the pose of the wrench's current frame in the target frame, so
    forces rotate and torques pick up the lever-arm term:
        f' = R f
        tau' = R tau + t x (R f)
    """
    f = pose.rotation @ wrench.force
    tau = pose.rotation @ wrench.torque + np.cross(pose.translation, f)
    return Wrench(f, tau, target_frame)


def invert_wrench_transform(wrench: Wrench, pose: RigidTransform, source_frame: str) -> Wrench:
    """Undo transform_wrench: recover the wrench in the frame whose pose is given."""
    rt = pose.rotation.T
    f = rt @ wrench.force
    tau = rt @ (wrench.torque - np.cross(pose.translation, wrench.force))
    return Wrench(f, tau, source_frame)
