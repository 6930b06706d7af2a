"""Procedural watertight fixture meshes and shipped fixture data access.

All generators produce outward CCW winding and weld shared vertices, so the
results pass the watertight check by construction.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from sdfplan.mesh import TriMesh, clean_mesh


def data_path(*parts: str) -> Path:
    """Path to a shipped fixture file under sdfplan/data."""
    root = resources.files("sdfplan") / "data"
    return Path(str(root.joinpath(*parts)))


def make_icosphere(radius: float = 0.1, subdivisions: int = 3, center=(0.0, 0.0, 0.0)) -> TriMesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        vlist = list(verts)

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = vlist[i] + vlist[j]
                m /= np.linalg.norm(m)
                vlist.append(m)
                cache[key] = len(vlist) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.array(vlist)
        faces = np.array(new_faces, dtype=np.int64)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(vertices=verts, triangles=faces)


def make_box(half_extents=(0.5, 0.5, 0.5), divisions: int = 1, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned box with welded grid faces.

    ``divisions`` is the cell count along the longest edge; the other axes get
    proportionally fewer cells, so thin boxes avoid sliver triangles while
    shared edges still weld (cell counts are per-axis).
    """
    hx, hy, hz = half_extents
    ext = np.array([2 * hx, 2 * hy, 2 * hz], dtype=np.float64)
    n_axis = np.maximum(1, np.round(divisions * ext / ext.max()).astype(int))
    vert_cache: dict[tuple[float, float, float], int] = {}
    verts: list[tuple[float, float, float]] = []
    faces: list[list[int]] = []

    def vid(p) -> int:
        key = (round(p[0], 12), round(p[1], 12), round(p[2], 12))
        if key not in vert_cache:
            vert_cache[key] = len(verts)
            verts.append(key)
        return vert_cache[key]

    # each face: origin corner + two edge vectors whose cross product points
    # outward; axis index of each edge picks its cell count
    face_defs = [
        ((-hx, -hy, hz), (2 * hx, 0, 0), 0, (0, 2 * hy, 0), 1),   # +z
        ((-hx, hy, -hz), (2 * hx, 0, 0), 0, (0, -2 * hy, 0), 1),  # -z
        ((-hx, -hy, -hz), (2 * hx, 0, 0), 0, (0, 0, 2 * hz), 2),  # -y
        ((-hx, hy, hz), (2 * hx, 0, 0), 0, (0, 0, -2 * hz), 2),   # +y
        ((-hx, -hy, -hz), (0, 0, 2 * hz), 2, (0, 2 * hy, 0), 1),  # -x
        ((hx, -hy, hz), (0, 0, -2 * hz), 2, (0, 2 * hy, 0), 1),   # +x
    ]
    for origin, eu, au, ev, av in face_defs:
        nu, nv = int(n_axis[au]), int(n_axis[av])
        o = np.asarray(origin, dtype=np.float64)
        u = np.asarray(eu, dtype=np.float64) / nu
        v = np.asarray(ev, dtype=np.float64) / nv
        for i in range(nu):
            for j in range(nv):
                p00 = vid(o + i * u + j * v)
                p10 = vid(o + (i + 1) * u + j * v)
                p01 = vid(o + i * u + (j + 1) * v)
                p11 = vid(o + (i + 1) * u + (j + 1) * v)
                faces.append([p00, p10, p11])
                faces.append([p00, p11, p01])
    vertices = np.asarray(verts, dtype=np.float64) + np.asarray(center, dtype=np.float64)
    return TriMesh(vertices=vertices, triangles=np.asarray(faces, dtype=np.int64))


def make_plate(width: float = 0.4, depth: float = 0.4, thickness: float = 0.02, divisions: int = 40) -> TriMesh:
    """Thin two-sided plate, tessellated finer than its thickness."""
    return make_box((width / 2, depth / 2, thickness / 2), divisions=divisions)


def make_revolution(profile_z: np.ndarray, profile_r: np.ndarray, segments: int = 24) -> TriMesh:
    """Solid of revolution about +z from a radius profile, capped at both ends.

    profile_r must be positive at every station; end caps are triangle fans to
    pole vertices at the first/last z.
    """
    profile_z = np.asarray(profile_z, dtype=np.float64)
    profile_r = np.asarray(profile_r, dtype=np.float64)
    if np.any(profile_r <= 0):
        raise ValueError("profile radii must be positive")
    n_rings = profile_z.shape[0]
    ang = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    verts = []
    for z, r in zip(profile_z, profile_r):
        for a in ang:
            verts.append((r * np.cos(a), r * np.sin(a), z))
    bottom_pole = len(verts)
    verts.append((0.0, 0.0, profile_z[0]))
    top_pole = len(verts)
    verts.append((0.0, 0.0, profile_z[-1]))

    faces = []
    for k in range(n_rings - 1):
        for s in range(segments):
            s2 = (s + 1) % segments
            a = k * segments + s
            b = k * segments + s2
            c = (k + 1) * segments + s
            d = (k + 1) * segments + s2
            faces.append([a, b, d])
            faces.append([a, d, c])
    for s in range(segments):
        s2 = (s + 1) % segments
        faces.append([bottom_pole, s2, s])  # bottom cap faces -z
        faces.append([top_pole, (n_rings - 1) * segments + s, (n_rings - 1) * segments + s2])
    v, f = clean_mesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))
    return TriMesh(vertices=v, triangles=f)


def make_link_solid(length: float = 0.28, segments: int = 30, stations: int = 26) -> TriMesh:
    """Robot-link-like solid: domed ends, base flange, waisted shaft.

    The ends are domes rather than flat caps so vertex normals cover the full
    sphere of directions; normal-ray dataset synthesis then samples the far
    field in every direction.
    """
    # cosine spacing concentrates stations near the poles for round domes
    theta = np.linspace(0.0, np.pi, stations)
    u = 0.5 * (1.0 - np.cos(theta))  # 0..1
    z = u * length
    dome = np.sqrt(np.maximum(u * (1.0 - u), 0.0))  # ellipsoid-like hull
    flange = 0.45 * np.exp(-(((u - 0.12) / 0.16) ** 2))
    waist = -0.18 * np.exp(-(((u - 0.6) / 0.18) ** 2))
    profile = dome * (1.0 + flange + waist)
    r = 0.16 * length * np.maximum(profile, 0.02)
    return make_revolution(z[1:-1], r[1:-1], segments=segments)


def make_capsule_solid(
    z_lo: float,
    z_hi: float,
    radius: float,
    axis: str = "z",
    segments: int = 16,
    stations: int = 12,
) -> TriMesh:
    """Rounded-end solid spanning [z_lo, z_hi] along a principal axis."""
    length = z_hi - z_lo
    cap = min(radius, 0.35 * length)
    z = np.linspace(0.0, length, stations)
    r = np.full_like(z, radius)
    lo_zone = z < cap
    r[lo_zone] = np.sqrt(np.maximum(radius**2 - (cap - z[lo_zone]) ** 2 * (radius / cap) ** 2, 1e-6))
    hi_zone = z > length - cap
    r[hi_zone] = np.sqrt(np.maximum(radius**2 - (z[hi_zone] - (length - cap)) ** 2 * (radius / cap) ** 2, 1e-6))
    mesh = make_revolution(z, np.maximum(r, 0.2 * radius), segments=segments)
    verts = mesh.vertices.copy()
    verts[:, 2] += z_lo
    if axis == "x":  # +z -> +x
        verts = verts[:, [2, 1, 0]] * np.array([1.0, 1.0, -1.0])
    elif axis == "y":  # +z -> +y
        verts = verts[:, [0, 2, 1]] * np.array([1.0, 1.0, -1.0])
    elif axis == "-y":  # +z -> -y
        verts = verts[:, [0, 2, 1]] * np.array([1.0, -1.0, 1.0])
    elif axis != "z":
        raise ValueError(f"unsupported axis {axis!r}")
    return TriMesh(vertices=verts, triangles=mesh.triangles.copy())


# Panda-like 7-DoF chain: URDF-style origins, all joints revolute about local z.
# Velocity/acceleration limits are 0.1x the published robot limits.
_PANDA_JOINTS = [
    # (name, xyz, rpy, limits, vel, acc)
    ("link1", (0.0, 0.0, 0.333), (0.0, 0.0, 0.0), (-2.8973, 2.8973), 0.2175, 1.5),
    ("link2", (0.0, 0.0, 0.0), (-np.pi / 2, 0.0, 0.0), (-1.7628, 1.7628), 0.2175, 0.75),
    ("link3", (0.0, -0.316, 0.0), (np.pi / 2, 0.0, 0.0), (-2.8973, 2.8973), 0.2175, 1.0),
    ("link4", (0.0825, 0.0, 0.0), (np.pi / 2, 0.0, 0.0), (-3.0718, -0.0698), 0.2175, 1.25),
    ("link5", (-0.0825, 0.384, 0.0), (-np.pi / 2, 0.0, 0.0), (-2.8973, 2.8973), 0.261, 1.5),
    ("link6", (0.0, 0.0, 0.0), (np.pi / 2, 0.0, 0.0), (-0.0175, 3.7525), 0.261, 2.0),
    ("link7", (0.088, 0.0, 0.0), (np.pi / 2, 0.0, 0.0), (-2.8973, 2.8973), 0.261, 2.0),
]


def make_panda_like_meshes() -> list[TriMesh]:
    """Approximate link solids for the 9-link panda_like fixture chain."""
    return [
        make_capsule_solid(-0.05, 0.30, 0.085),       # base column up to the shoulder
        make_capsule_solid(-0.12, 0.03, 0.062),       # link1 shoulder
        make_capsule_solid(0.0, 0.30, 0.058, "-y"),   # link2 upper arm toward joint3
        make_capsule_solid(-0.07, 0.07, 0.055),       # link3 elbow
        make_capsule_solid(0.0, 0.36, 0.05, "y"),     # link4 forearm toward joint5
        make_capsule_solid(-0.12, 0.03, 0.05),        # link5 wrist base
        make_capsule_solid(-0.02, 0.09, 0.048, "x"),  # link6 wrist toward joint7
        make_capsule_solid(-0.02, 0.09, 0.045),       # link7 hand base
        make_capsule_solid(0.0, 0.08, 0.04),          # flange
    ]


def make_trap_scene():
    """Concave C-trap on a 0.2 m tabletop; opening faces the start."""
    from sdfplan.scenes import Box2D, Scene2D

    cx, cy, a, b, w, dy = 0.1, 0.1, 0.024, 0.03, 0.008, 0.015
    obstacles = [
        Box2D(np.array([cx + a - w / 2, cy]), np.array([w / 2, b])),
        Box2D(np.array([cx, cy + b - w / 2]), np.array([a, w / 2])),
        Box2D(np.array([cx, cy - b + w / 2]), np.array([a, w / 2])),
    ]
    return Scene2D(bounds_min=[0.0, 0.0], bounds_max=[0.2, 0.2], obstacles=obstacles,
                   start=[cx - 0.07, cy + dy], goal=[cx + 0.07, cy + dy])


def make_thin_wall_scene():
    """Single 12 mm wall from the floor, passage above its top."""
    from sdfplan.scenes import Box2D, Scene2D

    obstacles = [Box2D(np.array([0.1, 0.06]), np.array([0.006, 0.06]))]
    return Scene2D(bounds_min=[0.0, 0.0], bounds_max=[0.2, 0.2], obstacles=obstacles,
                   start=[0.03, 0.1], goal=[0.17, 0.1])


def make_pillar_scene():
    """Scattered circular pillars between start and goal."""
    from sdfplan.scenes import Circle, Scene2D

    spots = [(0.07, 0.085), (0.1, 0.112), (0.13, 0.09), (0.085, 0.142), (0.115, 0.058)]
    obstacles = [Circle(np.array(c), 0.013) for c in spots]
    return Scene2D(bounds_min=[0.0, 0.0], bounds_max=[0.2, 0.2], obstacles=obstacles,
                   start=[0.03, 0.1], goal=[0.17, 0.1])


def make_narrow_gap_scene():
    """Two staggered bars forcing a zigzag through narrow openings."""
    from sdfplan.scenes import Box2D, Scene2D

    obstacles = [
        Box2D(np.array([0.085, 0.0425]), np.array([0.006, 0.0425])),
        Box2D(np.array([0.115, 0.1575]), np.array([0.006, 0.0425])),
    ]
    return Scene2D(bounds_min=[0.0, 0.0], bounds_max=[0.2, 0.2], obstacles=obstacles,
                   start=[0.03, 0.1], goal=[0.17, 0.1])


ARM_SCENE = {
    "version": 1,
    "kind": "scene3d",
    "start_q": [-0.9, 0.5, 0.0, -1.8, 0.0, 2.3, 0.8],
    "goal_q": [0.9, 0.5, 0.0, -1.8, 0.0, 2.3, 0.8],
    "z_floor": 0.02,
    "spheres": [],
    "boxes": [{"center": [0.58, 0.0, 0.12], "half_extents": [0.07, 0.08, 0.12], "resolution": 0.12}],
}

PLAN2D_CONFIG = {
    "version": 1,
    "planner": {"horizon": 20, "n_samples": 200, "iters": 200, "gamma": 0.5,
                "sigma_f_init": 0.02, "sigma_min": 0.0005, "eta": 0.9, "h": 0.01, "use_kus": True},
    "cost": {"epsilon": 0.005, "interp_points": 5, "obstacle_weight": 10.0, "length_weight": 100.0},
}

PLAN2D_THINWALL_CONFIG = {
    "version": 1,
    "planner": dict(PLAN2D_CONFIG["planner"]),
    "cost": {"epsilon": 0.003, "interp_points": 5, "obstacle_weight": 10.0, "length_weight": 100.0},
}

PLAN_ARM_CONFIG = {
    "version": 1,
    "planner": {"horizon": 20, "n_samples": 50, "iters": 100, "gamma": 0.5,
                "sigma_f_init": 0.1, "sigma_min": 0.012, "eta": 0.9, "h": 0.5, "use_kus": True},
    "cost": {"epsilon": 0.08, "interp_points": 2, "obstacle_weight": 10.0, "length_weight": 1.0,
             "z_floor": 0.02, "boundary_weight": 1.0, "boundary_enabled": True},
}


def write_fixture_tree(root: str | Path) -> None:
    """Materialize the shipped fixture files (robot, meshes, scenes, configs)."""
    import yaml

    from sdfplan.mesh import save_mesh
    from sdfplan.scenes import save_scene2d

    root = Path(root)
    (root / "meshes").mkdir(parents=True, exist_ok=True)
    (root / "scenes").mkdir(parents=True, exist_ok=True)
    (root / "configs").mkdir(parents=True, exist_ok=True)

    for i, mesh in enumerate(make_panda_like_meshes()):
        save_mesh(mesh, root / "meshes" / f"link{i}.off")
    (root / "panda_like.yaml").write_text(
        yaml.safe_dump(panda_like_description(), sort_keys=False), encoding="utf-8"
    )
    save_scene2d(make_trap_scene(), root / "scenes" / "concave_trap2d.yaml")
    save_scene2d(make_thin_wall_scene(), root / "scenes" / "thin_wall2d.yaml")
    save_scene2d(make_pillar_scene(), root / "scenes" / "pillars2d.yaml")
    save_scene2d(make_narrow_gap_scene(), root / "scenes" / "narrow_gap2d.yaml")
    (root / "scenes" / "arm_box.yaml").write_text(yaml.safe_dump(ARM_SCENE, sort_keys=False), encoding="utf-8")
    (root / "configs" / "plan2d.yaml").write_text(yaml.safe_dump(PLAN2D_CONFIG, sort_keys=False), encoding="utf-8")
    (root / "configs" / "plan2d_thinwall.yaml").write_text(
        yaml.safe_dump(PLAN2D_THINWALL_CONFIG, sort_keys=False), encoding="utf-8"
    )
    (root / "configs" / "plan_arm.yaml").write_text(yaml.safe_dump(PLAN_ARM_CONFIG, sort_keys=False), encoding="utf-8")


def panda_like_description(mesh_dir: str = "meshes") -> dict:
    links = [
        {
            "name": "base",
            "joint": {"kind": "fixed", "origin": {"xyz": [0.0, 0.0, 0.05]}},
            "mesh": f"{mesh_dir}/link0.off",
        }
    ]
    for i, (name, xyz, rpy, limits, vel, acc) in enumerate(_PANDA_JOINTS):
        links.append(
            {
                "name": name,
                "joint": {
                    "kind": "revolute",
                    "axis": [0.0, 0.0, 1.0],
                    "origin": {"xyz": list(xyz), "rpy": list(rpy)},
                    "limits": list(limits),
                    "vel_limit": vel,
                    "acc_limit": acc,
                },
                "mesh": f"{mesh_dir}/link{i + 1}.off",
            }
        )
    links.append(
        {
            "name": "flange",
            "joint": {"kind": "fixed", "origin": {"xyz": [0.0, 0.0, 0.107]}},
            "mesh": f"{mesh_dir}/link8.off",
        }
    )
    return {"version": 1, "name": "panda_like", "links": links}
