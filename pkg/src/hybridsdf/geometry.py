"""Triangle meshes, OBJ loading, BVH closest-hit queries and exact distances."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numba
import numpy as np
from numba import njit, prange

log = logging.getLogger(__name__)

FRONT = 1
BACK = -1
LEAF_SIZE = 4
_STACK_SIZE = 128


class ObjError(ValueError):
    """Raised for unreadable or malformed OBJ input."""


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64
    normals: np.ndarray = field(init=False)  # (T, 3) unit geometric normals
    degenerate: np.ndarray = field(init=False)  # (T,) bool

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("triangle index out of range")
        a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        cross = np.cross(b - a, c - a)
        length = np.linalg.norm(cross, axis=1)
        scale = np.maximum(
            np.linalg.norm(b - a, axis=1) * np.linalg.norm(c - a, axis=1), 1e-300
        )
        degenerate = length <= 1e-12 * scale
        normals = np.zeros_like(cross)
        ok = ~degenerate
        normals[ok] = cross[ok] / length[ok, None]
        # degenerate triangles carry a placeholder unit normal and are never queried
        normals[degenerate] = (0.0, 0.0, 1.0)
        v.setflags(write=False)
        f.setflags(write=False)
        normals.setflags(write=False)
        degenerate.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "degenerate", degenerate)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        f = self.triangles
        return self.vertices[f[:, 0]], self.vertices[f[:, 1]], self.vertices[f[:, 2]]

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.vertices) == 0:
            raise ValueError("empty mesh has no bounding box")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, translation=(0.0, 0.0, 0.0), rotation=None) -> "TriangleMesh":
        v = self.vertices
        if rotation is not None:
            r = np.asarray(rotation, dtype=np.float64)
            if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
                raise ValueError("rotation must be orthonormal with det +1")
            v = v @ r.T
        return TriangleMesh(v + np.asarray(translation, dtype=np.float64), self.triangles)


def merge_meshes(meshes: Sequence[TriangleMesh]) -> TriangleMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    if not verts:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris))


@dataclass(frozen=True)
class SceneInstance:
    """A mesh placed in the world by a per-frame rigid transform.

    Animation is a constant translation per frame on top of a base pose; the
    world-space mesh is rebuilt every frame rather than refitted.
    """

    mesh: TriangleMesh
    translation: tuple = (0.0, 0.0, 0.0)
    rotation: Optional[np.ndarray] = None
    translate_per_frame: tuple = (0.0, 0.0, 0.0)

    def world_mesh(self, frame: int) -> TriangleMesh:
        if frame < 0:
            raise ValueError("frame index must be >= 0")
        offset = np.asarray(self.translation, float) + frame * np.asarray(
            self.translate_per_frame, float
        )
        return self.mesh.transformed(offset, self.rotation)


def _resolve_index(token: str, n_vertices: int, lineno: int) -> int:
    try:
        raw = int(token.split("/")[0])
    except ValueError:
        raise ObjError(f"line {lineno}: bad face index {token!r}") from None
    if raw == 0:
        raise ObjError(f"line {lineno}: face index 0 is invalid")
    idx = raw - 1 if raw > 0 else n_vertices + raw
    if not 0 <= idx < n_vertices:
        raise ObjError(f"line {lineno}: face index {raw} out of range")
    return idx


def load_obj(path) -> TriangleMesh:
    """Read ``v`` and ``f`` records from an OBJ file; polygons are fan-split."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such OBJ file: {path}")
    vertices: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    ignored: Counter = Counter()
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            kind = parts[0]
            if kind == "v":
                if len(parts) < 4:
                    raise ObjError(f"line {lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError:
                    raise ObjError(f"line {lineno}: bad vertex coordinate") from None
            elif kind == "f":
                if len(parts) < 4:
                    raise ObjError(f"line {lineno}: face needs at least 3 indices")
                idx = [_resolve_index(tok, len(vertices), lineno) for tok in parts[1:]]
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
            else:
                ignored[kind] += 1
    for kind, count in sorted(ignored.items()):
        log.warning("%s: ignored %d '%s' record(s)", path.name, count, kind)
    return TriangleMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


# --------------------------------------------------------------------------- BVH


@dataclass(frozen=True)
class Bvh:
    """Flattened median-split BVH.

    Node ``i`` is a leaf iff ``count[i] > 0``; its triangles are
    ``order[start[i]:start[i] + count[i]]``.  Interior nodes store children in
    ``left``/``right``.
    """

    mesh: TriangleMesh
    box_min: np.ndarray
    box_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray  # original triangle ids in leaf order
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    normals: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.count)

    def kernel_args(self):
        return (self.box_min, self.box_max, self.left, self.right, self.start,
                self.count, self.order, self.v0, self.v1, self.v2, self.normals)


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Median split on the longest axis of the centroid bounds."""
    ids = np.flatnonzero(~mesh.degenerate)
    a, b, c = mesh.corners()
    tri_min = np.minimum(np.minimum(a, b), c)
    tri_max = np.maximum(np.maximum(a, b), c)
    centroid = (a + b + c) / 3.0

    box_min, box_max, left, right, start, count = [], [], [], [], [], []
    order: list[int] = []

    def new_node(sel):
        box_min.append(tri_min[sel].min(axis=0) if len(sel) else np.zeros(3))
        box_max.append(tri_max[sel].max(axis=0) if len(sel) else np.zeros(3))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(count) - 1

    if len(ids) == 0:
        new_node(ids)
    else:
        stack = [(new_node(ids), ids)]
        while stack:
            node, sel = stack.pop()
            if len(sel) <= leaf_size:
                start[node] = len(order)
                count[node] = len(sel)
                order.extend(int(i) for i in sel)
                continue
            cen = centroid[sel]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            # lexsort keeps the split deterministic when centroids coincide
            perm = np.lexsort((sel, cen[:, axis]))
            sel = sel[perm]
            half = len(sel) // 2
            lo, hi = sel[:half], sel[half:]
            ln = new_node(lo)
            rn = new_node(hi)
            left[node], right[node] = ln, rn
            stack.append((rn, hi))
            stack.append((ln, lo))
    order_arr = np.array(order, dtype=np.int64)
    bmin = np.array(box_min, dtype=np.float64).reshape(-1, 3)
    bmax = np.array(box_max, dtype=np.float64).reshape(-1, 3)
    # conservative padding so slab rounding never culls a grazing hit
    pad = 1e-9 * (1.0 + np.abs(bmin).max(initial=0.0) + np.abs(bmax).max(initial=0.0))
    return Bvh(
        mesh=mesh,
        box_min=bmin - pad,
        box_max=bmax + pad,
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        start=np.array(start, dtype=np.int64),
        count=np.array(count, dtype=np.int64),
        order=order_arr,
        v0=np.ascontiguousarray(a[order_arr]).reshape(-1, 3),
        v1=np.ascontiguousarray(b[order_arr]).reshape(-1, 3),
        v2=np.ascontiguousarray(c[order_arr]).reshape(-1, 3),
        normals=np.ascontiguousarray(mesh.normals[order_arr]).reshape(-1, 3),
    )


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        if not 0.0 <= self.t_min < self.t_max:
            raise ValueError("need 0 <= t_min < t_max")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Hit:
    t: float
    triangle: int
    facing: int  # FRONT or BACK

    @property
    def front(self) -> bool:
        return self.facing == FRONT


@njit(cache=True, inline="always")
def _ray_setup(d):
    ad0, ad1, ad2 = abs(d[0]), abs(d[1]), abs(d[2])
    kz = 0
    if ad1 > ad0 and ad1 >= ad2:
        kz = 1
    elif ad2 > ad0 and ad2 > ad1:
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    sz = 1.0 / d[kz]
    return kx, ky, kz, d[kx] * sz, d[ky] * sz, sz


@njit(cache=True, inline="always")
def _intersect_tri(o, kx, ky, kz, sx, sy, sz, a, b, c):
    """Watertight ray/triangle test; returns distance or inf.

    Edge functions are shared bit-exactly (up to sign) by neighbouring
    triangles, so a ray can never slip between two triangles of a closed mesh.
    Points on an edge count as inside; either winding is accepted.
    """
    ax = (a[kx] - o[kx]) - sx * (a[kz] - o[kz])
    ay = (a[ky] - o[ky]) - sy * (a[kz] - o[kz])
    bx = (b[kx] - o[kx]) - sx * (b[kz] - o[kz])
    by = (b[ky] - o[ky]) - sy * (b[kz] - o[kz])
    cx = (c[kx] - o[kx]) - sx * (c[kz] - o[kz])
    cy = (c[ky] - o[ky]) - sy * (c[kz] - o[kz])
    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return np.inf
    det = u + v + w
    if det == 0.0:
        return np.inf
    t = (u * sz * (a[kz] - o[kz]) + v * sz * (b[kz] - o[kz]) + w * sz * (c[kz] - o[kz])) / det
    return t


@njit(cache=True, inline="always")
def _slab(ox, oy, oz, ix, iy, iz, bmin, bmax, node, t0, t1):
    """Entry distance of the ray into box ``node``, or inf when it misses [t0, t1]."""
    ta = (bmin[node, 0] - ox) * ix
    tb = (bmax[node, 0] - ox) * ix
    if ta > tb:
        ta, tb = tb, ta
    # nan arises only for an axis-parallel ray on a slab plane; treat it as inside
    if ta > t0:
        t0 = ta
    if tb < t1:
        t1 = tb
    ta = (bmin[node, 1] - oy) * iy
    tb = (bmax[node, 1] - oy) * iy
    if ta > tb:
        ta, tb = tb, ta
    if ta > t0:
        t0 = ta
    if tb < t1:
        t1 = tb
    ta = (bmin[node, 2] - oz) * iz
    tb = (bmax[node, 2] - oz) * iz
    if ta > tb:
        ta, tb = tb, ta
    if ta > t0:
        t0 = ta
    if tb < t1:
        t1 = tb
    if t0 > t1:
        return np.inf
    return t0


@njit(cache=True)
def bvh_closest_hit(box_min, box_max, left, right, start, count, order, v0, v1, v2,
                    normals, o, d, t_min, t_max):
    """Returns (t, triangle id, facing); id -1 on a miss.

    Ties in t resolve to the lowest original triangle id.
    """
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    return bvh_traverse(box_min, box_max, left, right, start, count, order, v0, v1, v2,
                        normals, o, d, t_min, t_max, stack)


@njit(cache=True)
def bvh_traverse(box_min, box_max, left, right, start, count, order, v0, v1, v2,
                 normals, o, d, t_min, t_max, stack):
    """:func:`bvh_closest_hit` with a caller-owned traversal stack."""
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    ox, oy, oz = o[0], o[1], o[2]
    ix = 1.0 / d[0] if d[0] != 0.0 else np.inf
    iy = 1.0 / d[1] if d[1] != 0.0 else np.inf
    iz = 1.0 / d[2] if d[2] != 0.0 else np.inf
    best_t = np.inf
    best_id = -1
    best_slot = -1
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        upper = min(t_max, best_t)
        te = _slab(ox, oy, oz, ix, iy, iz, box_min, box_max, node, t_min, upper)
        if te == np.inf or te > upper:
            continue
        n = count[node]
        if n > 0:
            s = start[node]
            for j in range(s, s + n):
                t = _intersect_tri(o, kx, ky, kz, sx, sy, sz, v0[j], v1[j], v2[j])
                if t < t_min or t > t_max:
                    continue
                tid = order[j]
                if t < best_t or (t == best_t and tid < best_id):
                    best_t = t
                    best_id = tid
                    best_slot = j
        elif left[node] >= 0:
            l = left[node]
            r = right[node]
            tl = _slab(ox, oy, oz, ix, iy, iz, box_min, box_max, l, t_min, upper)
            tr = _slab(ox, oy, oz, ix, iy, iz, box_min, box_max, r, t_min, upper)
            # push the farther child first so the nearer one is popped next
            if tl <= tr:
                if tr != np.inf:
                    stack[sp] = r
                    sp += 1
                if tl != np.inf:
                    stack[sp] = l
                    sp += 1
            else:
                if tl != np.inf:
                    stack[sp] = l
                    sp += 1
                if tr != np.inf:
                    stack[sp] = r
                    sp += 1
    if best_id < 0:
        return np.inf, -1, 0
    facing = FRONT if (d[0] * normals[best_slot, 0] + d[1] * normals[best_slot, 1]
                       + d[2] * normals[best_slot, 2]) < 0.0 else BACK
    return best_t, best_id, facing


@njit(cache=True)
def _brute_closest_hit(v0, v1, v2, normals, valid, o, d, t_min, t_max):
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    best_t = np.inf
    best_id = -1
    for j in range(v0.shape[0]):
        if not valid[j]:
            continue
        t = _intersect_tri(o, kx, ky, kz, sx, sy, sz, v0[j], v1[j], v2[j])
        if t < t_min or t > t_max:
            continue
        if t < best_t:
            best_t = t
            best_id = j
    if best_id < 0:
        return np.inf, -1, 0
    nrm = normals[best_id]
    facing = FRONT if d[0] * nrm[0] + d[1] * nrm[1] + d[2] * nrm[2] < 0.0 else BACK
    return best_t, best_id, facing


@njit(cache=True, parallel=True)
def _closest_hits_kernel(box_min, box_max, left, right, start, count, order, v0, v1, v2,
                         normals, origins, dirs, t_min, t_max, out_t, out_id, out_facing):
    for i in prange(origins.shape[0]):
        stack = np.empty(_STACK_SIZE, dtype=np.int64)
        t, tid, facing = bvh_traverse(box_min, box_max, left, right, start, count,
                                      order, v0, v1, v2, normals, origins[i],
                                      dirs[i], t_min, t_max, stack)
        out_t[i] = t
        out_id[i] = tid
        out_facing[i] = facing


def _as_hit(t, tid, facing) -> Optional[Hit]:
    if tid < 0:
        return None
    return Hit(float(t), int(tid), int(facing))


def closest_hit(bvh: Bvh, ray: Ray) -> Optional[Hit]:
    return _as_hit(*bvh_closest_hit(*bvh.kernel_args(), ray.origin, ray.direction,
                                    float(ray.t_min), float(ray.t_max)))


def closest_hit_bruteforce(mesh: TriangleMesh, ray: Ray) -> Optional[Hit]:
    """Linear scan over every triangle; the BVH's test oracle."""
    a, b, c = mesh.corners()
    return _as_hit(*_brute_closest_hit(a, b, c, mesh.normals, ~mesh.degenerate, ray.origin,
                                       ray.direction, float(ray.t_min), float(ray.t_max)))


def closest_hits(bvh: Bvh, origins, directions, t_min=0.0, t_max=math.inf):
    """Batched closest hits. Returns arrays ``(t, triangle_id, facing)``."""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    out_t = np.empty(n)
    out_id = np.empty(n, dtype=np.int64)
    out_facing = np.empty(n, dtype=np.int64)
    _closest_hits_kernel(*bvh.kernel_args(), origins, directions, float(t_min),
                         float(t_max), out_t, out_id, out_facing)
    return out_t, out_id, out_facing


# ---------------------------------------------------------------- exact distance


@njit(cache=True, inline="always")
def point_triangle_sqdist(p, a, b, c):
    """Squared distance from p to triangle abc (Voronoi-region case analysis)."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = a[0], a[1], a[2]
    else:
        bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
        d5 = abx * cpx + aby * cpy + abz * cpz
        d6 = acx * cpx + acy * cpy + acz * cpz
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = b[0], b[1], b[2]
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            qx, qy, qz = a[0] + v * abx, a[1] + v * aby, a[2] + v * abz
        elif d6 >= 0.0 and d5 <= d6:
            qx, qy, qz = c[0], c[1], c[2]
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            w = d2 / (d2 - d6)
            qx, qy, qz = a[0] + w * acx, a[1] + w * acy, a[2] + w * acz
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            qx = b[0] + w * (c[0] - b[0])
            qy = b[1] + w * (c[1] - b[1])
            qz = b[2] + w * (c[2] - b[2])
        else:
            denom = 1.0 / (va + vb + vc)
            v = vb * denom
            w = vc * denom
            qx = a[0] + abx * v + acx * w
            qy = a[1] + aby * v + acy * w
            qz = a[2] + abz * v + acz * w
    dx, dy, dz = p[0] - qx, p[1] - qy, p[2] - qz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True, parallel=True)
def _exact_distances_kernel(points, a, b, c, out):
    for i in prange(points.shape[0]):
        best = np.inf
        p = points[i]
        for j in range(a.shape[0]):
            s = point_triangle_sqdist(p, a[j], b[j], c[j])
            if s < best:
                best = s
        out[i] = math.sqrt(best)


def _valid_corners(mesh: TriangleMesh):
    if mesh.n_triangles == 0 or mesh.degenerate.all():
        raise ValueError("exact_distance needs a non-empty mesh")
    ok = ~mesh.degenerate
    a, b, c = mesh.corners()
    return (np.ascontiguousarray(a[ok]), np.ascontiguousarray(b[ok]),
            np.ascontiguousarray(c[ok]))


def exact_distances(mesh: TriangleMesh, points) -> np.ndarray:
    """Unsigned distance from each point to the nearest triangle (linear scan)."""
    a, b, c = _valid_corners(mesh)
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(pts))
    _exact_distances_kernel(pts, a, b, c, out)
    return out


def exact_distance(mesh: TriangleMesh, p) -> float:
    return float(exact_distances(mesh, np.asarray(p, dtype=np.float64)[None])[0])


@njit(cache=True, parallel=True)
def _winding_kernel(points, a, b, c, out):
    for i in prange(points.shape[0]):
        p = points[i]
        total = 0.0
        for j in range(a.shape[0]):
            ax, ay, az = a[j, 0] - p[0], a[j, 1] - p[1], a[j, 2] - p[2]
            bx, by, bz = b[j, 0] - p[0], b[j, 1] - p[1], b[j, 2] - p[2]
            cx, cy, cz = c[j, 0] - p[0], c[j, 1] - p[1], c[j, 2] - p[2]
            la = math.sqrt(ax * ax + ay * ay + az * az)
            lb = math.sqrt(bx * bx + by * by + bz * bz)
            lc = math.sqrt(cx * cx + cy * cy + cz * cz)
            det = (ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx)
                   + az * (bx * cy - by * cx))
            den = (la * lb * lc + (ax * bx + ay * by + az * bz) * lc
                   + (bx * cx + by * cy + bz * cz) * la + (cx * ax + cy * ay + cz * az) * lb)
            total += 2.0 * math.atan2(det, den)
        out[i] = total / (4.0 * math.pi)


def winding_numbers(mesh: TriangleMesh, points) -> np.ndarray:
    """Generalized winding number (solid-angle sum); ~1 inside a closed mesh, ~0 outside."""
    a, b, c = _valid_corners(mesh)
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(pts))
    _winding_kernel(pts, a, b, c, out)
    return out


def set_threads(n: int) -> int:
    """Clamp to the thread pool numba was started with and apply."""
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
