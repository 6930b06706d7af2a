"""Rigid transforms as rotation matrix + translation.

All point batches are float64 arrays of shape (N, 3). Batch application is
written with explicit per-axis arithmetic (fixed evaluation order, no BLAS)
so a batched call is bit-identical to a loop of single-point calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """World-from-local rigid transform: p_world = R @ p_local + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        self.rotation.setflags(write=False)
        self.translation.setflags(write=False)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self then other applied in local frame: result = self @ other."""
        return RigidTransform(
            rotation=mat3_mul(self.rotation, other.rotation),
            translation=apply_transform(self.rotation, self.translation, other.translation[None])[0],
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T.copy()
        return RigidTransform(rotation=rt, translation=apply_rotation(rt, -self.translation[None])[0])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map local points (N, 3) into the parent frame."""
        return apply_transform(self.rotation, self.translation, points)

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        """Map parent-frame points (N, 3) into the local frame."""
        q = np.asarray(points, dtype=np.float64) - self.translation
        return apply_rotation(self.rotation.T, q)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        r = self.rotation
        return (
            np.all(np.isfinite(r))
            and np.all(np.isfinite(self.translation))
            and np.max(np.abs(r.T @ r - np.eye(3))) <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol
        )


def apply_rotation(rot: np.ndarray, points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    out = np.empty_like(p)
    for j in range(3):
        # fixed summation order: x, then y, then z
        out[:, j] = rot[j, 0] * p[:, 0] + rot[j, 1] * p[:, 1] + rot[j, 2] * p[:, 2]
    return out


def apply_transform(rot: np.ndarray, trans: np.ndarray, points: np.ndarray) -> np.ndarray:
    out = apply_rotation(rot, points)
    out += trans
    return out


def mat3_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]
    return out


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    ax = np.asarray(axis, dtype=np.float64)
    x, y, z = ax
    c, s = np.cos(angle), np.sin(angle)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def rotation_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis XYZ (roll about x, pitch about y, yaw about z): R = Rz @ Ry @ Rx."""
    rx = rotation_about_axis(np.array([1.0, 0.0, 0.0]), roll)
    ry = rotation_about_axis(np.array([0.0, 1.0, 0.0]), pitch)
    rz = rotation_about_axis(np.array([0.0, 0.0, 1.0]), yaw)
    return mat3_mul(rz, mat3_mul(ry, rx))
