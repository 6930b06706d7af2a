"""Serial kinematic chains: description parsing, forward kinematics, link frames.

A robot is described by a small YAML document (``version: 1``) listing links in
chain order; each link carries a joint (kind, axis, origin, limits) and an
optional mesh path. See ``load_robot`` for the schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from sdfplan.transforms import RigidTransform, mat3_mul, rotation_about_axis, rotation_from_rpy

DESCRIPTION_VERSION = 1
JOINT_KINDS = ("revolute", "prismatic", "fixed")
AXIS_TOL = 1e-9


class RobotDescriptionError(ValueError):
    """Raised when a robot description document fails to parse or validate."""


@dataclass(frozen=True)
class JointSpec:
    kind: str
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    origin: RigidTransform = field(default_factory=RigidTransform)
    limits: tuple[float, float] = (0.0, 0.0)
    vel_limit: float = 1.0
    acc_limit: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=np.float64).reshape(3))
        if self.kind not in JOINT_KINDS:
            raise RobotDescriptionError(f"unknown joint kind {self.kind!r}")
        if abs(np.linalg.norm(self.axis) - 1.0) > AXIS_TOL:
            raise RobotDescriptionError(f"joint axis must be unit length, got {self.axis}")
        if self.limits[0] > self.limits[1]:
            raise RobotDescriptionError(f"joint limits inverted: lo={self.limits[0]} > hi={self.limits[1]}")
        if self.vel_limit <= 0 or self.acc_limit <= 0:
            raise RobotDescriptionError("vel_limit and acc_limit must be positive")
        if not self.origin.is_valid():
            raise RobotDescriptionError("joint origin rotation is not orthonormal with det +1")

    @property
    def is_actuated(self) -> bool:
        return self.kind != "fixed"

    def motion(self, value: float) -> RigidTransform:
        """Transform contributed by the joint at position ``value``."""
        if self.kind == "revolute":
            return RigidTransform(rotation=rotation_about_axis(self.axis, value))
        if self.kind == "prismatic":
            return RigidTransform(translation=self.axis * value)
        return RigidTransform()


@dataclass(frozen=True)
class Link:
    name: str
    joint: JointSpec
    mesh_path: Path | None = None


@dataclass(frozen=True)
class RobotModel:
    """Immutable serial chain; link k's parent is link k-1."""

    links: tuple[Link, ...]

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_dof(self) -> int:
        return sum(1 for link in self.links if link.joint.is_actuated)

    @property
    def actuated_indices(self) -> tuple[int, ...]:
        return tuple(k for k, link in enumerate(self.links) if link.joint.is_actuated)

    def joint_limits(self) -> np.ndarray:
        """(n_dof, 2) position bounds of the actuated joints, in chain order."""
        return np.array([self.links[k].joint.limits for k in self.actuated_indices], dtype=np.float64).reshape(-1, 2)

    def vel_limits(self) -> np.ndarray:
        return np.array([self.links[k].joint.vel_limit for k in self.actuated_indices])

    def acc_limits(self) -> np.ndarray:
        return np.array([self.links[k].joint.acc_limit for k in self.actuated_indices])

    def limit_flags(self, q: np.ndarray) -> np.ndarray:
        """Boolean mask of joints whose value falls outside [lo, hi]."""
        q = np.asarray(q, dtype=np.float64)
        lims = self.joint_limits()
        return (q < lims[:, 0]) | (q > lims[:, 1])


@dataclass(frozen=True)
class LinkPoseSet:
    """World-from-link transform per link, plus out-of-limit joint flags."""

    poses: tuple[RigidTransform, ...]
    out_of_limit: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __len__(self) -> int:
        return len(self.poses)


def _parse_origin(raw: dict | None, where: str) -> RigidTransform:
    if raw is None:
        return RigidTransform()
    xyz = np.asarray(raw.get("xyz", [0.0, 0.0, 0.0]), dtype=np.float64)
    if "rpy" in raw:
        rot = rotation_from_rpy(*[float(v) for v in raw["rpy"]])
    elif "rotation" in raw:
        rot = np.asarray(raw["rotation"], dtype=np.float64)
    else:
        rot = np.eye(3)
    if xyz.shape != (3,):
        raise RobotDescriptionError(f"{where}: origin xyz must have 3 entries")
    return RigidTransform(rotation=rot, translation=xyz)


def _parse_joint(raw: dict, where: str) -> JointSpec:
    kind = raw.get("kind")
    if kind not in JOINT_KINDS:
        raise RobotDescriptionError(f"{where}: joint kind must be one of {JOINT_KINDS}, got {kind!r}")
    origin = _parse_origin(raw.get("origin"), where)
    if kind == "fixed":
        return JointSpec(kind=kind, origin=origin)
    axis = np.asarray(raw.get("axis", []), dtype=np.float64)
    if axis.shape != (3,):
        raise RobotDescriptionError(f"{where}: actuated joint needs a 3-vector axis")
    norm = np.linalg.norm(axis)
    if norm < AXIS_TOL:
        raise RobotDescriptionError(f"{where}: invalid axis {axis.tolist()} (zero length)")
    axis = axis / norm
    limits = raw.get("limits")
    if limits is None or len(limits) != 2:
        raise RobotDescriptionError(f"{where}: actuated joint needs limits: [lo, hi]")
    lo, hi = float(limits[0]), float(limits[1])
    if lo > hi:
        raise RobotDescriptionError(f"{where}: limit inversion (lo={lo} > hi={hi})")
    try:
        return JointSpec(
            kind=kind,
            axis=axis,
            origin=origin,
            limits=(lo, hi),
            vel_limit=float(raw.get("vel_limit", 1.0)),
            acc_limit=float(raw.get("acc_limit", 1.0)),
        )
    except RobotDescriptionError as exc:
        raise RobotDescriptionError(f"{where}: {exc}") from exc


def load_robot(source: str | Path | dict) -> RobotModel:
    """Parse a robot description document into a RobotModel.

    ``source`` is a path to a YAML file or an already-parsed mapping. Mesh
    paths are resolved relative to the document's directory.
    """
    base_dir = Path(".")
    if isinstance(source, (str, Path)):
        base_dir = Path(source).parent
        try:
            with open(source, "r", encoding="utf-8") as fh:
                doc = yaml.safe_load(fh)
        except FileNotFoundError:
            raise
        except yaml.YAMLError as exc:
            raise RobotDescriptionError(f"{source}: not valid YAML: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise RobotDescriptionError("robot description must be a mapping")
    version = doc.get("version")
    if version != DESCRIPTION_VERSION:
        raise RobotDescriptionError(f"unsupported description version {version!r} (expected {DESCRIPTION_VERSION})")
    raw_links = doc.get("links")
    if not raw_links:
        raise RobotDescriptionError("robot description lists no links")
    links = []
    for idx, raw in enumerate(raw_links):
        where = f"links[{idx}] ({raw.get('name', '?')})"
        name = raw.get("name")
        if not name:
            raise RobotDescriptionError(f"{where}: missing link name")
        joint = _parse_joint(raw.get("joint", {"kind": "fixed"}), where)
        mesh = raw.get("mesh")
        mesh_path = (base_dir / mesh) if mesh else None
        links.append(Link(name=str(name), joint=joint, mesh_path=mesh_path))
    return RobotModel(links=tuple(links))


def forward_kinematics(model: RobotModel, q: np.ndarray) -> LinkPoseSet:
    """World pose of every link for joint vector ``q`` (length n_dof).

    Out-of-limit joint values are flagged on the result, never rejected.
    """
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != model.n_dof:
        raise ValueError(f"joint vector has {q.shape[0]} entries, robot has {model.n_dof} DoF")
    poses = []
    current = RigidTransform()
    qi = 0
    for link in model.links:
        local = link.joint.origin
        if link.joint.is_actuated:
            local = local.compose(link.joint.motion(q[qi]))
            qi += 1
        current = current.compose(local)
        poses.append(current)
    return LinkPoseSet(poses=tuple(poses), out_of_limit=model.limit_flags(q) if model.n_dof else np.zeros(0, bool))


def world_to_link(poses: LinkPoseSet, k: int, points: np.ndarray) -> np.ndarray:
    """Map world points (N, 3) into link k's canonical frame."""
    if not 0 <= k < len(poses):
        raise IndexError(f"link index {k} out of range for {len(poses)} links")
    return poses.poses[k].apply_inverse(points)


def _batch_rotation_about_axis(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    # mirrors rotation_about_axis termwise so batch results match scalar calls
    x, y, z = axis
    c, s = np.cos(angles), np.sin(angles)
    cc = 1.0 - c
    out = np.empty((angles.shape[0], 3, 3))
    out[:, 0, 0] = c + x * x * cc
    out[:, 0, 1] = x * y * cc - z * s
    out[:, 0, 2] = x * z * cc + y * s
    out[:, 1, 0] = y * x * cc + z * s
    out[:, 1, 1] = c + y * y * cc
    out[:, 1, 2] = y * z * cc - x * s
    out[:, 2, 0] = z * x * cc - y * s
    out[:, 2, 1] = z * y * cc + x * s
    out[:, 2, 2] = c + z * z * cc
    return out


def batch_forward_kinematics(model: RobotModel, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Link poses for M joint vectors at once.

    Returns (rotations, translations) with shapes (M, K, 3, 3) and (M, K, 3).
    Arithmetic mirrors forward_kinematics termwise, so row m equals the
    single-config call for configs[m] exactly.
    """
    configs = np.asarray(configs, dtype=np.float64)
    if configs.ndim != 2 or configs.shape[1] != model.n_dof:
        raise ValueError(f"configs must be (M, {model.n_dof})")
    m = configs.shape[0]
    k_links = model.n_links
    rots = np.empty((m, k_links, 3, 3))
    trans = np.empty((m, k_links, 3))
    r_cur = np.broadcast_to(np.eye(3), (m, 3, 3)).copy()
    t_cur = np.zeros((m, 3))
    qi = 0
    for k, link in enumerate(model.links):
        ro, to = link.joint.origin.rotation, link.joint.origin.translation
        if link.joint.kind == "revolute":
            rm = _batch_rotation_about_axis(link.joint.axis, configs[:, qi])
            r_loc = np.empty((m, 3, 3))
            for i in range(3):
                for j in range(3):
                    r_loc[:, i, j] = ro[i, 0] * rm[:, 0, j] + ro[i, 1] * rm[:, 1, j] + ro[i, 2] * rm[:, 2, j]
            t_loc = np.broadcast_to(to, (m, 3))
            qi += 1
        elif link.joint.kind == "prismatic":
            r_loc = np.broadcast_to(ro, (m, 3, 3))
            shift = link.joint.axis[None, :] * configs[:, qi, None]
            t_loc = np.empty((m, 3))
            for i in range(3):
                t_loc[:, i] = ro[i, 0] * shift[:, 0] + ro[i, 1] * shift[:, 1] + ro[i, 2] * shift[:, 2]
            t_loc = t_loc + to
            qi += 1
        else:
            r_loc = np.broadcast_to(ro, (m, 3, 3))
            t_loc = np.broadcast_to(to, (m, 3))
        r_new = np.empty((m, 3, 3))
        t_new = np.empty((m, 3))
        for i in range(3):
            for j in range(3):
                r_new[:, i, j] = (
                    r_cur[:, i, 0] * r_loc[:, 0, j] + r_cur[:, i, 1] * r_loc[:, 1, j] + r_cur[:, i, 2] * r_loc[:, 2, j]
                )
            t_new[:, i] = (
                r_cur[:, i, 0] * t_loc[:, 0] + r_cur[:, i, 1] * t_loc[:, 1] + r_cur[:, i, 2] * t_loc[:, 2]
            ) + t_cur[:, i]
        r_cur, t_cur = r_new, t_new
        rots[:, k] = r_cur
        trans[:, k] = t_cur
    return rots, trans
