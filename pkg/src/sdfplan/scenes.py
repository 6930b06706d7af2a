"""Obstacle scenes and distance checkers for both benchmarks.

2D scenes are analytic primitive maps (circle / box / polygon, signed distance
negative inside). 3D scenes are sphere sets queried through the composite SDF;
boxes in a scene file are decomposed into face-covering sphere packings at
load time. Scene files are versioned YAML.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from sdfplan.mesh import TriMesh
from sdfplan.neural_sdf import (
    CompositeSdf,
    composite_min_distance_many,
    exact_composite_min_distance_many,
)
from sdfplan.robot import RobotModel

SCENE_FORMAT_VERSION = 1
DEFAULT_SPHERE_RESOLUTION = 0.06  # meters between packed sphere centers


@dataclass(frozen=True)
class Circle:
    center: np.ndarray
    radius: float

    def distance(self, p: np.ndarray) -> np.ndarray:
        return np.linalg.norm(p - self.center, axis=-1) - self.radius


@dataclass(frozen=True)
class Box2D:
    center: np.ndarray
    half_extents: np.ndarray

    def distance(self, p: np.ndarray) -> np.ndarray:
        q = np.abs(p - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.maximum(q[..., 0], q[..., 1]), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Polygon:
    vertices: np.ndarray  # (V, 2) closed loop, last edge wraps to the first

    def distance(self, p: np.ndarray) -> np.ndarray:
        # unsigned distance to edges + even-odd crossing sign (handles concave)
        v = self.vertices
        p = np.asarray(p, dtype=np.float64)
        flat = p.reshape(-1, 2)
        d2 = np.full(flat.shape[0], np.inf)
        inside = np.zeros(flat.shape[0], dtype=bool)
        for i in range(len(v)):
            a = v[i]
            b = v[(i + 1) % len(v)]
            e = b - a
            w = flat - a
            t = np.clip((w @ e) / (e @ e), 0.0, 1.0)
            proj = a + t[:, None] * e
            d2 = np.minimum(d2, np.sum((flat - proj) ** 2, axis=1))
            crosses = (a[1] <= flat[:, 1]) != (b[1] <= flat[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = a[0] + (flat[:, 1] - a[1]) * e[0] / e[1]
            inside ^= crosses & (flat[:, 0] < x_at)
        d = np.sqrt(d2)
        d[inside] *= -1.0
        return d.reshape(p.shape[:-1])


Primitive2D = Circle | Box2D | Polygon


@dataclass
class Scene2D:
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    obstacles: list[Primitive2D]
    start: np.ndarray
    goal: np.ndarray

    def __post_init__(self):
        for name in ("bounds_min", "bounds_max", "start", "goal"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(2))
        for label, p in (("start", self.start), ("goal", self.goal)):
            if np.any(p < self.bounds_min) or np.any(p > self.bounds_max):
                raise ValueError(f"{label} {p.tolist()} lies outside the scene bounds")
            if self.obstacles and scene2d_distance(self, p) <= 0:
                raise ValueError(f"{label} {p.tolist()} is inside an obstacle")


def scene2d_distance(scene: Scene2D, p: np.ndarray) -> np.ndarray:
    """Signed distance to the nearest obstacle (negative inside); +inf if none."""
    p = np.asarray(p, dtype=np.float64)
    if not scene.obstacles:
        return np.full(p.shape[:-1], np.inf) if p.ndim > 1 else np.inf
    d = scene.obstacles[0].distance(p)
    for prim in scene.obstacles[1:]:
        d = np.minimum(d, prim.distance(p))
    return d


def checker_2d(scene: Scene2D):
    """Planner checker: (M, 2) positions -> (M,) clearances."""

    def check(states: np.ndarray) -> np.ndarray:
        return np.atleast_1d(scene2d_distance(scene, np.asarray(states, dtype=np.float64)))

    return check


@dataclass
class Scene3D:
    """Sphere-set obstacles for arm planning, with start/goal joint vectors."""

    centers: np.ndarray  # (S, 3)
    radii: np.ndarray  # (S,)
    start_q: np.ndarray
    goal_q: np.ndarray
    z_floor: float = 0.02

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        self.start_q = np.asarray(self.start_q, dtype=np.float64).reshape(-1)
        self.goal_q = np.asarray(self.goal_q, dtype=np.float64).reshape(-1)
        if self.centers.shape[0] != self.radii.shape[0]:
            raise ValueError("one radius per sphere center required")
        if np.any(self.radii <= 0):
            raise ValueError("sphere radii must be positive")


def box_to_spheres(center, half_extents, resolution: float = DEFAULT_SPHERE_RESOLUTION):
    """Face-covering sphere packing of an axis-aligned box.

    Centers form a grid on each face at roughly ``resolution`` spacing; the
    common radius covers every face point (grid-diagonal over 2, with margin).
    """
    center = np.asarray(center, dtype=np.float64)
    he = np.asarray(half_extents, dtype=np.float64)
    counts = np.maximum(1, np.ceil(2 * he / resolution).astype(int))
    axes_grid = [np.linspace(-he[a], he[a], counts[a] + 1) for a in range(3)]
    pitch = np.array([(2 * he[a]) / counts[a] if counts[a] else 0.0 for a in range(3)])
    radius = 0.75 * float(np.max(pitch))
    seen = set()
    centers = []
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for sign in (-1.0, 1.0):
            for cu in axes_grid[u]:
                for cv in axes_grid[v]:
                    p = np.zeros(3)
                    p[axis] = sign * he[axis]
                    p[u] = cu
                    p[v] = cv
                    key = (round(p[0], 9), round(p[1], 9), round(p[2], 9))
                    if key not in seen:
                        seen.add(key)
                        centers.append(center + p)
    return np.asarray(centers), np.full(len(centers), radius)


def scene3d_checker(
    scene: Scene3D,
    sdf: CompositeSdf | tuple[RobotModel, dict[int, TriMesh] | list[TriMesh]],
):
    """Planner checker over joint vectors: min over spheres of composite - radius.

    ``sdf`` is either a trained CompositeSdf or (model, meshes) for the exact
    oracle. Each call evaluates all sphere centers in one batch per config.
    """

    if isinstance(sdf, CompositeSdf):
        def distances(configs: np.ndarray) -> np.ndarray:
            return composite_min_distance_many(sdf, configs, scene.centers)
    else:
        model, meshes = sdf

        def distances(configs: np.ndarray) -> np.ndarray:
            return exact_composite_min_distance_many(model, meshes, configs, scene.centers)

    def check(states: np.ndarray) -> np.ndarray:
        configs = np.asarray(states, dtype=np.float64)
        squeeze = configs.ndim == 1
        configs = np.atleast_2d(configs)
        if scene.centers.shape[0] == 0:
            out = np.full(configs.shape[0], np.inf)
        else:
            per_sphere = distances(configs) - scene.radii[None, :]
            out = per_sphere.min(axis=1)
        return out[0] if squeeze else out

    return check


def _primitive_to_dict(prim: Primitive2D) -> dict:
    if isinstance(prim, Circle):
        return {"type": "circle", "center": prim.center.tolist(), "radius": float(prim.radius)}
    if isinstance(prim, Box2D):
        return {"type": "box", "center": prim.center.tolist(), "half_extents": prim.half_extents.tolist()}
    return {"type": "polygon", "vertices": prim.vertices.tolist()}


def _primitive_from_dict(raw: dict) -> Primitive2D:
    kind = raw.get("type")
    if kind == "circle":
        return Circle(center=np.asarray(raw["center"], dtype=np.float64), radius=float(raw["radius"]))
    if kind == "box":
        return Box2D(
            center=np.asarray(raw["center"], dtype=np.float64),
            half_extents=np.asarray(raw["half_extents"], dtype=np.float64),
        )
    if kind == "polygon":
        return Polygon(vertices=np.asarray(raw["vertices"], dtype=np.float64))
    raise ValueError(f"unknown 2D primitive type {kind!r}")


def save_scene2d(scene: Scene2D, path: str | Path) -> None:
    doc = {
        "version": SCENE_FORMAT_VERSION,
        "kind": "scene2d",
        "bounds": {"min": scene.bounds_min.tolist(), "max": scene.bounds_max.tolist()},
        "start": scene.start.tolist(),
        "goal": scene.goal.tolist(),
        "obstacles": [_primitive_to_dict(p) for p in scene.obstacles],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def save_scene3d(scene: Scene3D, path: str | Path) -> None:
    doc = {
        "version": SCENE_FORMAT_VERSION,
        "kind": "scene3d",
        "start_q": scene.start_q.tolist(),
        "goal_q": scene.goal_q.tolist(),
        "z_floor": float(scene.z_floor),
        "spheres": [
            {"center": c.tolist(), "radius": float(r)} for c, r in zip(scene.centers, scene.radii)
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def load_scene(path: str | Path, sphere_resolution: float = DEFAULT_SPHERE_RESOLUTION) -> Scene2D | Scene3D:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("version") != SCENE_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported scene file (need version {SCENE_FORMAT_VERSION})")
    kind = doc.get("kind")
    if kind == "scene2d":
        return Scene2D(
            bounds_min=doc["bounds"]["min"],
            bounds_max=doc["bounds"]["max"],
            obstacles=[_primitive_from_dict(p) for p in doc.get("obstacles", [])],
            start=doc["start"],
            goal=doc["goal"],
        )
    if kind == "scene3d":
        centers = [s["center"] for s in doc.get("spheres", [])]
        radii = [s["radius"] for s in doc.get("spheres", [])]
        for raw in doc.get("boxes", []):
            c, r = box_to_spheres(raw["center"], raw["half_extents"],
                                  resolution=raw.get("resolution", sphere_resolution))
            centers.extend(c.tolist())
            radii.extend(r.tolist())
        return Scene3D(
            centers=np.asarray(centers, dtype=np.float64).reshape(-1, 3),
            radii=np.asarray(radii, dtype=np.float64),
            start_q=doc["start_q"],
            goal_q=doc["goal_q"],
            z_floor=float(doc.get("z_floor", 0.02)),
        )
    raise ValueError(f"{path}: unknown scene kind {kind!r}")
