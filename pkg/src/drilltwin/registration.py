"""Setup transforms: rigid point-set registration and tool-tip pivot calibration."""

from __future__ import annotations

import numpy as np

from .geometry import RigidTransform


def register_point_sets(source: np.ndarray, target: np.ndarray) -> tuple[RigidTransform, float]:
    """Least-squares rigid transform mapping source points onto target points.

    Centroid-subtracted cross-covariance SVD with reflection correction.
    Requires at least 3 non-collinear correspondences. Returns the transform
    and the residual RMSE in mm.
    """
    a = np.asarray(source, dtype=float)
    b = np.asarray(target, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("point sets must both be (n, 3)")
    if a.shape[0] < 3:
        raise ValueError("registration needs at least 3 correspondences")

    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    a0 = a - ca
    b0 = b - cb
    if np.linalg.matrix_rank(a0, tol=1e-9 * max(1.0, np.abs(a0).max())) < 2:
        raise ValueError("registration points are collinear")

    h = a0.T @ b0
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0.0:
        d = 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cb - r @ ca
    residual = a @ r.T + t - b
    rmse = float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
    return RigidTransform(r, t), rmse


def pivot_calibrate(poses: list[RigidTransform]) -> tuple[np.ndarray, np.ndarray, float]:
    """Tool-tip offset from poses pivoting about a fixed point.

    Each pose satisfies R_i t_tip + p_i = p_pivot; stacking gives the linear
    system [R_i | -I] [t_tip; p_pivot] = -p_i solved in one least-squares pass.
    Returns (tip offset in tool frame, pivot point in base frame, residual RMSE).
    Pose sets without enough rotation diversity are rejected.
    """
    if len(poses) < 3:
        raise ValueError("pivot calibration needs at least 3 poses")
    n = len(poses)
    a = np.zeros((3 * n, 6))
    b = np.zeros(3 * n)
    for i, pose in enumerate(poses):
        a[3 * i:3 * i + 3, 0:3] = pose.rotation
        a[3 * i:3 * i + 3, 3:6] = -np.eye(3)
        b[3 * i:3 * i + 3] = -pose.translation

    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] < 1e-6 * sv[0]:
        raise ValueError("poses lack rotation diversity; pivot system is ill-conditioned")

    x, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    tip = x[0:3]
    pivot = x[3:6]
    residuals = np.array([pose.rotation @ tip + pose.translation - pivot for pose in poses])
    rmse = float(np.sqrt(np.mean(np.sum(residuals ** 2, axis=1))))
    return tip, pivot, rmse
