"""Serial-arm kinematics and the admittance mapping from hand wrench to joint motion.

Twists and wrenches stack the linear part first: [v; w] and [f; tau]. Joint
displacements are mm for prismatic joints and radians for revolute ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import RigidTransform, axis_angle_matrix, rpy_matrix

JOINT_TYPES = ("revolute", "prismatic")


@dataclass(frozen=True)
class Joint:
    name: str
    joint_type: str
    axis: tuple[float, float, float]
    origin_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    origin_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    limit_lo: float = -np.inf
    limit_hi: float = np.inf

    def __post_init__(self):
        if self.joint_type not in JOINT_TYPES:
            raise ValueError(f"unknown joint type {self.joint_type!r}")
        if self.limit_lo >= self.limit_hi:
            raise ValueError(f"joint {self.name}: empty limit range")
        n = float(np.linalg.norm(self.axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"joint {self.name}: axis must be a unit vector")


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple[Joint, ...]
    tip_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tip_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.joints) < 3:
            raise ValueError("chain needs at least 3 joints")

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.limit_lo for j in self.joints])
        hi = np.array([j.limit_hi for j in self.joints])
        return lo, hi

    def tip_offset(self) -> RigidTransform:
        return RigidTransform.from_parts(self.tip_xyz, self.tip_rpy)

    def to_dict(self) -> dict:
        return {
            "joints": [
                {
                    "name": j.name,
                    "type": j.joint_type,
                    "axis": list(j.axis),
                    "origin_xyz": list(j.origin_xyz),
                    "origin_rpy": list(j.origin_rpy),
                    "limits": [j.limit_lo, j.limit_hi],
                }
                for j in self.joints
            ],
            "tip_xyz": list(self.tip_xyz),
            "tip_rpy": list(self.tip_rpy),
        }

    @staticmethod
    def from_dict(d: dict) -> "KinematicChain":
        joints = tuple(
            Joint(
                name=str(jd["name"]),
                joint_type=str(jd["type"]),
                axis=tuple(float(v) for v in jd["axis"]),
                origin_xyz=tuple(float(v) for v in jd.get("origin_xyz", (0, 0, 0))),
                origin_rpy=tuple(float(v) for v in jd.get("origin_rpy", (0, 0, 0))),
                limit_lo=float(jd.get("limits", [-np.inf, np.inf])[0]),
                limit_hi=float(jd.get("limits", [-np.inf, np.inf])[1]),
            )
            for jd in d["joints"]
        )
        return KinematicChain(joints,
                              tuple(float(v) for v in d.get("tip_xyz", (0, 0, 0))),
                              tuple(float(v) for v in d.get("tip_rpy", (0, 0, 0))))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @staticmethod
    def load(path: str | Path) -> "KinematicChain":
        with open(path, "r", encoding="utf-8") as f:
            return KinematicChain.from_dict(json.load(f))


def default_chain() -> KinematicChain:
    """Gantry-style arm: XYZ stages plus a 3-axis wrist, drill pointing down."""
    j = (
        Joint("carriage_z", "prismatic", (0.0, 0.0, 1.0), origin_xyz=(0.0, 0.0, 300.0),
              limit_lo=-150.0, limit_hi=150.0),
        Joint("slide_x", "prismatic", (1.0, 0.0, 0.0), limit_lo=-150.0, limit_hi=150.0),
        Joint("slide_y", "prismatic", (0.0, 1.0, 0.0), limit_lo=-150.0, limit_hi=150.0),
        Joint("wrist_yaw", "revolute", (0.0, 0.0, 1.0), origin_xyz=(0.0, 0.0, -80.0),
              limit_lo=-2.618, limit_hi=2.618),
        Joint("wrist_pitch", "revolute", (0.0, 1.0, 0.0), origin_xyz=(0.0, 0.0, -40.0),
              limit_lo=-2.618, limit_hi=2.618),
        Joint("wrist_roll", "revolute", (1.0, 0.0, 0.0), origin_xyz=(0.0, 0.0, -20.0),
              limit_lo=-2.618, limit_hi=2.618),
    )
    return KinematicChain(j, tip_xyz=(0.0, 0.0, -60.0))


@dataclass
class RobotState:
    q: np.ndarray
    at_limit: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        if self.at_limit.size == 0:
            self.at_limit = np.zeros(self.q.size, dtype=bool)


@dataclass(frozen=True)
class AdmittanceGains:
    """Diagonal wrench-to-twist gains: mm/s per N and rad/s per N*mm."""

    translational: float = 0.25
    rotational: float = 1e-4

    def __post_init__(self):
        if self.translational <= 0 or self.rotational <= 0:
            raise ValueError("admittance gains must be positive")

    def diagonal(self) -> np.ndarray:
        return np.array([self.translational] * 3 + [self.rotational] * 3)


def forward_kinematics(chain: KinematicChain, q: np.ndarray) -> RigidTransform:
    """Base-to-tip pose at configuration q."""
    q = np.asarray(q, dtype=float)
    if q.size != chain.dof:
        raise ValueError(f"expected {chain.dof} joint values, got {q.size}")
    t = RigidTransform.identity()
    for joint, qi in zip(chain.joints, q):
        t = t @ RigidTransform.from_parts(joint.origin_xyz, joint.origin_rpy)
        if joint.joint_type == "prismatic":
            t = t @ RigidTransform(np.eye(3), np.asarray(joint.axis) * qi)
        else:
            t = t @ RigidTransform(axis_angle_matrix(np.asarray(joint.axis), qi), np.zeros(3))
    return t @ chain.tip_offset()


def jacobian(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (6 x dof) mapping joint rates to the tip twist [v; w]."""
    q = np.asarray(q, dtype=float)
    if q.size != chain.dof:
        raise ValueError(f"expected {chain.dof} joint values, got {q.size}")
    t = RigidTransform.identity()
    cols = []
    for joint, qi in zip(chain.joints, q):
        t = t @ RigidTransform.from_parts(joint.origin_xyz, joint.origin_rpy)
        axis_w = t.rotation @ np.asarray(joint.axis)
        pos_w = t.translation.copy()
        cols.append((joint.joint_type, axis_w, pos_w))
        if joint.joint_type == "prismatic":
            t = t @ RigidTransform(np.eye(3), np.asarray(joint.axis) * qi)
        else:
            t = t @ RigidTransform(axis_angle_matrix(np.asarray(joint.axis), qi), np.zeros(3))
    p_tip = (t @ chain.tip_offset()).translation

    jac = np.zeros((6, chain.dof))
    for i, (jtype, axis_w, pos_w) in enumerate(cols):
        if jtype == "prismatic":
            jac[0:3, i] = axis_w
        else:
            jac[0:3, i] = np.cross(axis_w, p_tip - pos_w)
            jac[3:6, i] = axis_w
    return jac


def solve_admittance(jac: np.ndarray, gains: AdmittanceGains, scale: float,
                     wrench_vec: np.ndarray, damping: float = 1e-3) -> np.ndarray:
    """Joint velocity realizing the scaled admittance twist.

    Damped least squares: dq = J^T (J J^T + mu^2 I)^-1 v with v = scale * G * w.
    damping = 0 falls back to the exact pseudoinverse.
    """
    if damping < 0:
        raise ValueError("damping must be >= 0")
    w = np.asarray(wrench_vec, dtype=float).reshape(6)
    v = scale * (gains.diagonal() * w)
    if damping == 0.0:
        return np.linalg.pinv(jac) @ v
    jjt = jac @ jac.T + (damping * damping) * np.eye(6)
    return jac.T @ np.linalg.solve(jjt, v)


def integrate_step(chain: KinematicChain, state: RobotState, dq: np.ndarray,
                   dt: float) -> RobotState:
    """Advance joints one tick, clamping to limits and flagging saturated joints."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    dq = np.asarray(dq, dtype=float).reshape(-1)
    if dq.size != chain.dof:
        raise ValueError(f"expected {chain.dof} joint rates, got {dq.size}")
    lo, hi = chain.limits
    raw = state.q + dq * dt
    q = np.clip(raw, lo, hi)
    return RobotState(q, at_limit=(raw < lo) | (raw > hi))
