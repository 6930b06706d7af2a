"""Watertight triangle meshes: exact signed distance and training-set synthesis.

Mesh files use ASCII OFF (the single supported mesh format): an ``OFF`` header
line, a counts line ``V F E``, V vertex lines, then F face lines ``3 i j k``
with counter-clockwise outward winding. Signed distance is exact (BVH
closest-point + ray-parity sign); dataset synthesis samples along vertex
normals and keeps only candidates that re-project onto their source vertex.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from sdfplan import bvh
from sdfplan.rngstreams import stream

DEFAULT_OFFSETS = (-0.01, -0.005, -0.002, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.2)
NORMAL_CONSISTENCY_DOT = 0.7
REPROJECTION_FACTOR = 1.5
DATASET_FORMAT_VERSION = 1

# fixed slightly-irrational directions so parity votes dodge edge/vertex hits
_PARITY_DIRS = np.array(
    [
        [0.57735026918962573, 0.21132486540518713, 0.78867513459481287],
        [-0.33987373669793238, 0.81649658092772603, 0.46700421868434876],
        [0.26726124191242440, -0.53452248382484879, 0.80178372573727319],
    ]
)
_PARITY_DIRS /= np.linalg.norm(_PARITY_DIRS, axis=1, keepdims=True)


class MeshError(ValueError):
    """Raised for unreadable, empty, or structurally unusable meshes."""


class DatasetSynthesisError(RuntimeError):
    """Raised when every candidate sample was rejected; carries rejection stats."""

    def __init__(self, message: str, stats: dict):
        super().__init__(f"{message}: {stats}")
        self.stats = stats


@dataclass
class TriMesh:
    """Cleaned triangle mesh; treat as immutable after construction."""

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_normals: np.ndarray = field(default=None)
    watertight: bool = field(default=False)
    _index: bvh.TriangleBvh = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index out of range")
        if self.vertex_normals is None:
            self.vertex_normals = vertex_normals(self.vertices, self.triangles)
        self.watertight = is_watertight(self.triangles)

    @property
    def index(self) -> bvh.TriangleBvh:
        if self._index is None:
            self._index = bvh.build_bvh(self.vertices, self.triangles)
        return self._index

    def face_normals(self) -> np.ndarray:
        tv = self.vertices[self.triangles]
        n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        norm[norm == 0] = 1.0
        return n / norm

    def bounding_radius(self) -> float:
        center = 0.5 * (self.vertices.min(axis=0) + self.vertices.max(axis=0))
        return float(np.linalg.norm(self.vertices - center, axis=1).max())


def vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals (cross products summed per vertex)."""
    tv = vertices[triangles]
    face_n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])  # length = 2*area
    normals = np.zeros_like(vertices)
    for c in range(3):
        np.add.at(normals, triangles[:, c], face_n)
    norm = np.linalg.norm(normals, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return normals / norm


def is_watertight(triangles: np.ndarray) -> bool:
    """Every undirected edge must be shared by exactly two triangles."""
    if triangles.size == 0:
        return False
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def clean_mesh(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop zero-area triangles and prune unreferenced vertices (with a warning)."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    tv = vertices[triangles]
    areas = 0.5 * np.linalg.norm(np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]), axis=1)
    degenerate = areas <= 0.0
    if degenerate.any():
        warnings.warn(f"dropping {int(degenerate.sum())} zero-area triangles")
        triangles = triangles[~degenerate]
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        warnings.warn(f"pruning {int((~used).sum())} unreferenced vertices")
        remap = -np.ones(len(vertices), dtype=np.int64)
        remap[used] = np.arange(int(used.sum()))
        vertices = vertices[used]
        triangles = remap[triangles]
    return vertices, triangles


def load_mesh(path: str | Path, require_watertight: bool = False) -> TriMesh:
    """Parse an ASCII OFF file into a cleaned TriMesh.

    Non-watertight input warns by default; pass require_watertight=True to
    raise instead.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "OFF":
        raise MeshError(f"{path}: not an OFF file (missing OFF header)")
    try:
        nv, nf, _ = (int(x) for x in lines[1].split())
        verts = np.array([[float(x) for x in lines[2 + i].split()[:3]] for i in range(nv)])
        faces = []
        for i in range(nf):
            parts = lines[2 + nv + i].split()
            if int(parts[0]) != 3:
                raise MeshError(f"{path}: face {i} is not a triangle")
            faces.append([int(parts[1]), int(parts[2]), int(parts[3])])
        tris = np.array(faces, dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: OFF parse failure: {exc}") from exc
    if nv == 0 or nf == 0:
        raise MeshError(f"{path}: empty mesh")
    verts, tris = clean_mesh(verts, tris)
    mesh = TriMesh(vertices=verts, triangles=tris)
    if not mesh.watertight:
        if require_watertight:
            raise MeshError(f"{path}: mesh is not watertight")
        warnings.warn(f"{path}: mesh is not watertight; signed distance may be unreliable")
    return mesh


def save_mesh(mesh: TriMesh, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.triangles)} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def exact_signed_distance(mesh: TriMesh, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact signed distance and outward field gradient for points (N, 3).

    Negative strictly inside. The normal is (p - s)/d for the nearest surface
    point s, or the nearest face normal when p lies on the surface.
    """
    points = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    idx = mesh.index
    n = points.shape[0]
    closest = np.empty((n, 3))
    tri_idx = np.empty(n, dtype=np.int64)
    d2 = np.empty(n)
    bvh.bvh_closest_points(
        points, idx.node_min, idx.node_max, idx.node_left, idx.node_right,
        idx.node_start, idx.node_count, idx.tri_a, idx.tri_b, idx.tri_c,
        closest, tri_idx, d2,
    )
    dist = np.sqrt(d2)

    # a point can only be inside if it is closer to the surface than the
    # largest sphere that fits in the bounding box
    extent = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    inside_bound = 0.5 * float(extent.min()) + 1e-12
    need = np.logical_and(dist <= inside_bound, dist > 0.0).astype(np.int8)
    inside = np.zeros(n, dtype=np.int8)
    bvh.bvh_inside_mask(
        points, _PARITY_DIRS, idx.node_min, idx.node_max, idx.node_left, idx.node_right,
        idx.node_start, idx.node_count, idx.tri_a, idx.tri_b, idx.tri_c,
        need, inside,
    )
    d = np.where(inside == 1, -dist, dist)

    normals = np.zeros((n, 3))
    off_surface = d != 0.0
    normals[off_surface] = (points[off_surface] - closest[off_surface]) / d[off_surface, None]
    on_surface = ~off_surface
    if on_surface.any():
        face_n = mesh.face_normals()
        normals[on_surface] = face_n[idx.tri_order[tri_idx[on_surface]]]
    return d, normals


def vertex_adjacency(triangles: np.ndarray, n_vertices: int) -> list[np.ndarray]:
    neighbors = [set() for _ in range(n_vertices)]
    for a, b, c in triangles:
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
    return [np.fromiter(sorted(s), dtype=np.int64) for s in neighbors]


@dataclass(frozen=True)
class SdfSample:
    p: np.ndarray
    d: float
    n: np.ndarray


@dataclass
class LinkDataset:
    """Accepted SDF samples for one link, with the sampling provenance."""

    link_index: int
    points: np.ndarray
    distances: np.ndarray
    normals: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.points.shape[0]

    def sample(self, i: int) -> SdfSample:
        return SdfSample(p=self.points[i], d=float(self.distances[i]), n=self.normals[i])


def synthesize_dataset(
    mesh: TriMesh,
    offsets: tuple[float, ...] | np.ndarray = DEFAULT_OFFSETS,
    max_samples: int = 20000,
    seed: int = 0,
    link_index: int = 0,
    consistency_dot: float = NORMAL_CONSISTENCY_DOT,
    reprojection_factor: float = REPROJECTION_FACTOR,
) -> LinkDataset:
    """Sample (p, d, n) triples along vertex normals with re-projection rejection.

    For each retained vertex v and offset delta, the candidate v + delta*n_v is
    accepted when the mesh vertex nearest to it (KD-tree) lies within
    ``reprojection_factor`` local mean edge lengths of v. Accepted samples
    store the exact oracle distance and normal, then the set is subsampled
    uniformly to ``max_samples``.
    """
    offsets = np.sort(np.asarray(offsets, dtype=np.float64))
    if max_samples <= 0:
        raise ValueError("max_samples must be positive")
    verts = mesh.vertices
    vnorm = mesh.vertex_normals
    adjacency = vertex_adjacency(mesh.triangles, len(verts))

    # exclude vertices whose normal disagrees with any 1-ring neighbor
    keep = np.ones(len(verts), dtype=bool)
    local_edge = np.zeros(len(verts))
    for v, nbrs in enumerate(adjacency):
        if len(nbrs) == 0:
            keep[v] = False
            continue
        dots = vnorm[nbrs] @ vnorm[v]
        keep[v] = bool(np.min(dots) >= consistency_dot)
        local_edge[v] = float(np.mean(np.linalg.norm(verts[nbrs] - verts[v], axis=1)))

    retained = np.nonzero(keep)[0]
    stats = {
        "n_vertices": int(len(verts)),
        "n_retained_vertices": int(retained.size),
        "n_offsets": int(offsets.size),
    }
    if retained.size == 0:
        raise DatasetSynthesisError("no vertices passed normal-consistency filtering", stats)

    src = np.repeat(retained, offsets.size)
    deltas = np.tile(offsets, retained.size)
    candidates = verts[src] + deltas[:, None] * vnorm[src]
    stats["n_candidates"] = int(candidates.shape[0])

    # forward-backward trace: nearest mesh vertex must re-project onto the source
    tree = cKDTree(verts)
    _, nearest_vertex = tree.query(candidates, k=1)
    back = np.linalg.norm(verts[nearest_vertex] - verts[src], axis=1)
    accepted = back <= reprojection_factor * local_edge[src]
    stats["n_rejected_reprojection"] = int((~accepted).sum())
    if not accepted.any():
        raise DatasetSynthesisError("all candidates rejected by forward-backward trace", stats)

    pts = candidates[accepted]
    stats["n_accepted"] = int(pts.shape[0])
    if pts.shape[0] > max_samples:
        sel = stream(seed, "dataset-subsample", link_index).choice(pts.shape[0], size=max_samples, replace=False)
        sel.sort()
        pts = pts[sel]
    d, n = exact_signed_distance(mesh, pts)
    provenance = {
        "format_version": DATASET_FORMAT_VERSION,
        "offsets": [float(x) for x in offsets],
        "max_samples": int(max_samples),
        "seed": int(seed),
        "consistency_dot": float(consistency_dot),
        "reprojection_factor": float(reprojection_factor),
        **stats,
    }
    return LinkDataset(link_index=link_index, points=pts, distances=d, normals=n, provenance=provenance)


def save_dataset(dataset: LinkDataset, path: str | Path) -> None:
    """Columnar text: provenance header lines, then px py pz d nx ny nz rows."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sdfplan-dataset-v{DATASET_FORMAT_VERSION}\n")
        fh.write(f"# link_index: {dataset.link_index}\n")
        fh.write(f"# provenance: {json.dumps(dataset.provenance, sort_keys=True)}\n")
        fh.write("# columns: px py pz d nx ny nz\n")
        for p, d, n in zip(dataset.points, dataset.distances, dataset.normals):
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {d:.17g} {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")


def load_dataset(path: str | Path) -> LinkDataset:
    path = Path(path)
    link_index = 0
    provenance: dict = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith(f"# sdfplan-dataset-v{DATASET_FORMAT_VERSION}"):
            raise ValueError(f"{path}: not a version-{DATASET_FORMAT_VERSION} dataset file")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("link_index:"):
                    link_index = int(body.split(":", 1)[1])
                elif body.startswith("provenance:"):
                    provenance = json.loads(body.split(":", 1)[1])
                continue
            rows.append([float(x) for x in line.split()])
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 7)
    return LinkDataset(
        link_index=link_index,
        points=arr[:, 0:3],
        distances=arr[:, 3],
        normals=arr[:, 4:7],
        provenance=provenance,
    )
