"""Axis-aligned BVH over triangles with numba query kernels.

Queries are row-local (one output slot per query point, no cross-point
reductions), so batched results are identical for any batch partitioning and
thread count. Closest-point uses Ericson's point-triangle routine; inside
tests use ray-crossing parity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

LEAF_SIZE = 8
STACK_SIZE = 512


@dataclass(frozen=True)
class TriangleBvh:
    """Flat-array BVH; children of node i are left[i], right[i] (-1 on leaves)."""

    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    tri_order: np.ndarray  # leaf-order position -> original triangle index
    tri_a: np.ndarray  # (T, 3) first vertex of each triangle, leaf order
    tri_b: np.ndarray
    tri_c: np.ndarray


def build_bvh(vertices: np.ndarray, triangles: np.ndarray, leaf_size: int = LEAF_SIZE) -> TriangleBvh:
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    tv = vertices[triangles]  # (T, 3, 3)
    lo = tv.min(axis=1)
    hi = tv.max(axis=1)
    centroids = tv.mean(axis=1)

    node_min, node_max = [], []
    node_left, node_right = [], []
    node_start, node_count = [], []
    order = np.arange(triangles.shape[0], dtype=np.int64)

    def new_node() -> int:
        node_min.append(None)
        node_max.append(None)
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(-1)
        node_count.append(0)
        return len(node_min) - 1

    # iterative build; stack holds (node_id, start, end) ranges into `order`
    root = new_node()
    stack = [(root, 0, triangles.shape[0])]
    while stack:
        nid, start, end = stack.pop()
        idx = order[start:end]
        node_min[nid] = lo[idx].min(axis=0)
        node_max[nid] = hi[idx].max(axis=0)
        if end - start <= leaf_size:
            node_start[nid] = start
            node_count[nid] = end - start
            continue
        cent = centroids[idx]
        axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
        local = np.argsort(cent[:, axis], kind="stable")
        order[start:end] = idx[local]
        mid = start + (end - start) // 2
        left = new_node()
        right = new_node()
        node_left[nid] = left
        node_right[nid] = right
        stack.append((left, start, mid))
        stack.append((right, mid, end))

    tv_ord = tv[order]
    return TriangleBvh(
        node_min=np.asarray(node_min, dtype=np.float64),
        node_max=np.asarray(node_max, dtype=np.float64),
        node_left=np.asarray(node_left, dtype=np.int64),
        node_right=np.asarray(node_right, dtype=np.int64),
        node_start=np.asarray(node_start, dtype=np.int64),
        node_count=np.asarray(node_count, dtype=np.int64),
        tri_order=order,
        tri_a=np.ascontiguousarray(tv_ord[:, 0]),
        tri_b=np.ascontiguousarray(tv_ord[:, 1]),
        tri_c=np.ascontiguousarray(tv_ord[:, 2]),
    )


@njit(cache=True, inline="always")
def _closest_on_triangle(ax, ay, az, bx, by, bz, cx, cy, cz, px, py, pz):
    # Ericson, Real-Time Collision Detection, ClosestPtPointTriangle
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@njit(cache=True, inline="always")
def _aabb_dist2(nmin, nmax, nid, px, py, pz):
    d2 = 0.0
    v = nmin[nid, 0] - px
    if v > 0.0:
        d2 += v * v
    v = px - nmax[nid, 0]
    if v > 0.0:
        d2 += v * v
    v = nmin[nid, 1] - py
    if v > 0.0:
        d2 += v * v
    v = py - nmax[nid, 1]
    if v > 0.0:
        d2 += v * v
    v = nmin[nid, 2] - pz
    if v > 0.0:
        d2 += v * v
    v = pz - nmax[nid, 2]
    if v > 0.0:
        d2 += v * v
    return d2


@njit(cache=True, parallel=True)
def bvh_closest_points(
    points,
    nmin,
    nmax,
    nleft,
    nright,
    nstart,
    ncount,
    tri_a,
    tri_b,
    tri_c,
    out_point,
    out_tri,
    out_d2,
):
    for i in prange(points.shape[0]):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        bestx = besty = bestz = 0.0
        best_tri = -1
        stack = np.empty(STACK_SIZE, dtype=np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            nid = stack[top]
            if _aabb_dist2(nmin, nmax, nid, px, py, pz) >= best:
                continue
            left = nleft[nid]
            if left < 0:
                s = nstart[nid]
                for t in range(s, s + ncount[nid]):
                    qx, qy, qz = _closest_on_triangle(
                        tri_a[t, 0], tri_a[t, 1], tri_a[t, 2],
                        tri_b[t, 0], tri_b[t, 1], tri_b[t, 2],
                        tri_c[t, 0], tri_c[t, 1], tri_c[t, 2],
                        px, py, pz,
                    )
                    dx, dy, dz = px - qx, py - qy, pz - qz
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 < best:
                        best = d2
                        bestx, besty, bestz = qx, qy, qz
                        best_tri = t
            else:
                right = nright[nid]
                dl = _aabb_dist2(nmin, nmax, left, px, py, pz)
                dr = _aabb_dist2(nmin, nmax, right, px, py, pz)
                # push farther child first so the nearer one pops next
                if dl <= dr:
                    if dr < best:
                        stack[top] = right
                        top += 1
                    if dl < best:
                        stack[top] = left
                        top += 1
                else:
                    if dl < best:
                        stack[top] = left
                        top += 1
                    if dr < best:
                        stack[top] = right
                        top += 1
        out_point[i, 0] = bestx
        out_point[i, 1] = besty
        out_point[i, 2] = bestz
        out_tri[i] = best_tri
        out_d2[i] = best


@njit(cache=True, inline="always")
def _ray_hits_aabb(nmin, nmax, nid, px, py, pz, inv_dx, inv_dy, inv_dz):
    t0 = 0.0
    t1 = np.inf
    tlo = (nmin[nid, 0] - px) * inv_dx
    thi = (nmax[nid, 0] - px) * inv_dx
    if tlo > thi:
        tlo, thi = thi, tlo
    if tlo > t0:
        t0 = tlo
    if thi < t1:
        t1 = thi
    tlo = (nmin[nid, 1] - py) * inv_dy
    thi = (nmax[nid, 1] - py) * inv_dy
    if tlo > thi:
        tlo, thi = thi, tlo
    if tlo > t0:
        t0 = tlo
    if thi < t1:
        t1 = thi
    tlo = (nmin[nid, 2] - pz) * inv_dz
    thi = (nmax[nid, 2] - pz) * inv_dz
    if tlo > thi:
        tlo, thi = thi, tlo
    if tlo > t0:
        t0 = tlo
    if thi < t1:
        t1 = thi
    return t0 <= t1


@njit(cache=True, inline="always")
def _ray_hits_triangle(t, tri_a, tri_b, tri_c, px, py, pz, dx, dy, dz):
    # Moller-Trumbore; returns hit parameter or -1
    e1x = tri_b[t, 0] - tri_a[t, 0]
    e1y = tri_b[t, 1] - tri_a[t, 1]
    e1z = tri_b[t, 2] - tri_a[t, 2]
    e2x = tri_c[t, 0] - tri_a[t, 0]
    e2y = tri_c[t, 1] - tri_a[t, 1]
    e2z = tri_c[t, 2] - tri_a[t, 2]
    hx = dy * e2z - dz * e2y
    hy = dz * e2x - dx * e2z
    hz = dx * e2y - dy * e2x
    det = e1x * hx + e1y * hy + e1z * hz
    if -1e-14 < det < 1e-14:
        return -1.0
    inv = 1.0 / det
    sx = px - tri_a[t, 0]
    sy = py - tri_a[t, 1]
    sz = pz - tri_a[t, 2]
    u = (sx * hx + sy * hy + sz * hz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@njit(cache=True, parallel=True)
def bvh_inside_mask(
    points,
    dirs,
    nmin,
    nmax,
    nleft,
    nright,
    nstart,
    ncount,
    tri_a,
    tri_b,
    tri_c,
    need_test,
    out_inside,
):
    """Majority ray-parity inside test; points with need_test[i] == 0 are outside."""
    n_rays = dirs.shape[0]
    for i in prange(points.shape[0]):
        if need_test[i] == 0:
            out_inside[i] = 0
            continue
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        votes = 0
        for r in range(n_rays):
            dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
            inv_dx = 1.0 / dx
            inv_dy = 1.0 / dy
            inv_dz = 1.0 / dz
            crossings = 0
            stack = np.empty(STACK_SIZE, dtype=np.int64)
            stack[0] = 0
            top = 1
            while top > 0:
                top -= 1
                nid = stack[top]
                if not _ray_hits_aabb(nmin, nmax, nid, px, py, pz, inv_dx, inv_dy, inv_dz):
                    continue
                left = nleft[nid]
                if left < 0:
                    s = nstart[nid]
                    for t in range(s, s + ncount[nid]):
                        th = _ray_hits_triangle(t, tri_a, tri_b, tri_c, px, py, pz, dx, dy, dz)
                        if th > 1e-12:
                            crossings += 1
                else:
                    stack[top] = left
                    top += 1
                    stack[top] = nright[nid]
                    top += 1
            if crossings % 2 == 1:
                votes += 1
        out_inside[i] = 1 if 2 * votes > n_rays else 0
