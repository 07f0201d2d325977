"""Seed voxelization by orthographic rasterization along +x, +y and +z."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .geometry import TriangleMesh


@dataclass(frozen=True)
class GridSpec:
    """Cubic-voxel grid. Voxel (i, j, k) spans ``origin + [i, i+1) * voxel_size`` per axis."""

    resolution: tuple
    origin: tuple
    voxel_size: float

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolution)
        if len(res) != 3 or min(res) < 2:
            raise ValueError("resolution needs three components >= 2")
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "voxel_size", float(self.voxel_size))

    @classmethod
    def fit(cls, lo, hi, resolution, border: float = 2.0) -> "GridSpec":
        """Smallest cubic-voxel grid holding ``[lo, hi]`` plus ``border`` voxels on every side."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        res = np.broadcast_to(np.asarray(resolution, dtype=np.int64), (3,))
        if np.any(res <= 2 * border):
            raise ValueError("resolution too small for the requested border")
        vs = float(np.max((hi - lo) / (res - 2.0 * border)))
        if vs <= 0:
            vs = 1.0
        center = 0.5 * (lo + hi)
        origin = center - 0.5 * res * vs
        return cls(tuple(int(n) for n in res), tuple(origin), vs)

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def size(self) -> int:
        nx, ny, nz = self.resolution
        return nx * ny * nz

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.resolution) * self.voxel_size

    def refined(self, factor) -> "GridSpec":
        f = np.broadcast_to(np.asarray(factor, dtype=np.int64), (3,))
        if len(set(f.tolist())) != 1 or f[0] < 1:
            raise ValueError("refinement must be one positive integer for cubic voxels")
        return GridSpec(tuple(int(n) * int(f[0]) for n in self.resolution), self.origin,
                        self.voxel_size / int(f[0]))

    def centers(self) -> np.ndarray:
        """World-space voxel centers, shape (nx, ny, nz, 3)."""
        axes = [self.origin[a] + (np.arange(n) + 0.5) * self.voxel_size
                for a, n in enumerate(self.resolution)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def center(self, index) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(index, dtype=np.float64) + 0.5) * self.voxel_size

    def contains(self, lo, hi, border: float = 0.0) -> bool:
        slack = 1e-9 * self.voxel_size
        pad = border * self.voxel_size
        return bool(np.all(np.asarray(lo) - pad >= self.lower - slack)
                    and np.all(np.asarray(hi) + pad <= self.upper + slack))


@dataclass(frozen=True)
class SeedGrid:
    spec: GridSpec
    occupancy: np.ndarray  # (nx, ny, nz) bool

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def coords(self) -> np.ndarray:
        return np.argwhere(self.occupancy)


@njit(cache=True)
def _rasterize(a, b, c, axis, origin, vs, res, samples, occ, out, n_out):
    """Rasterize one triangle along ``axis``.

    Marks ``occ`` when given, and appends voxel coordinates to ``out`` while
    there is room.  Returns the number of covered samples.
    """
    ua = (axis + 1) % 3
    va = (axis + 2) % 3
    x0, y0, z0 = a[ua], a[va], a[axis]
    x1, y1, z1 = b[ua], b[va], b[axis]
    x2, y2, z2 = c[ua], c[va], c[axis]
    area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    if area == 0.0:
        return n_out
    step = 1.0 / samples
    umin = min(x0, x1, x2)
    umax = max(x0, x1, x2)
    vmin = min(y0, y1, y2)
    vmax = max(y0, y1, y2)
    # sample index s covers coordinate origin + (s + 0.5) * vs / samples
    sub = vs / samples
    s_lo_u = max(int(math.ceil((umin - origin[ua]) / sub - 0.5)), 0)
    s_hi_u = min(int(math.floor((umax - origin[ua]) / sub - 0.5)), res[ua] * samples - 1)
    s_lo_v = max(int(math.ceil((vmin - origin[va]) / sub - 0.5)), 0)
    s_hi_v = min(int(math.floor((vmax - origin[va]) / sub - 0.5)), res[va] * samples - 1)
    for su in range(s_lo_u, s_hi_u + 1):
        pu = origin[ua] + (su // samples + (su % samples + 0.5) * step) * vs
        for sv in range(s_lo_v, s_hi_v + 1):
            pv = origin[va] + (sv // samples + (sv % samples + 0.5) * step) * vs
            w0 = (x1 - pu) * (y2 - pv) - (x2 - pu) * (y1 - pv)
            w1 = (x2 - pu) * (y0 - pv) - (x0 - pu) * (y2 - pv)
            w2 = (x0 - pu) * (y1 - pv) - (x1 - pu) * (y0 - pv)
            inside = (w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0) or (
                w0 <= 0.0 and w1 <= 0.0 and w2 <= 0.0)
            if not inside:
                continue
            depth = (w0 * z0 + w1 * z1 + w2 * z2) / area
            k = int(math.floor((depth - origin[axis]) / vs))
            if k < 0 or k >= res[axis]:
                continue
            idx = np.empty(3, dtype=np.int64)
            idx[axis] = k
            idx[ua] = su // samples
            idx[va] = sv // samples
            if occ.shape[0] > 0:
                occ[idx[0], idx[1], idx[2]] = True
            if n_out < out.shape[0]:
                out[n_out, 0] = idx[0]
                out[n_out, 1] = idx[1]
                out[n_out, 2] = idx[2]
            n_out += 1
    return n_out


_AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


def rasterize_triangle(tri, axis, spec: GridSpec, supersample: int = 1) -> list[tuple[int, int, int]]:
    """Voxels produced by rasterizing one world-space triangle along ``axis``.

    Coordinates are unique and sorted.  A triangle seen edge-on along ``axis``
    yields nothing.
    """
    tri = np.asarray(tri, dtype=np.float64).reshape(3, 3)
    origin = np.asarray(spec.origin)
    res = np.asarray(spec.resolution, dtype=np.int64)
    empty_occ = np.zeros((0, 0, 0), dtype=np.bool_)
    ax = _AXES[axis]
    n = _rasterize(tri[0], tri[1], tri[2], ax, origin, spec.voxel_size, res,
                   int(supersample), empty_occ, np.empty((0, 3), dtype=np.int64), 0)
    out = np.empty((n, 3), dtype=np.int64)
    _rasterize(tri[0], tri[1], tri[2], ax, origin, spec.voxel_size, res,
               int(supersample), empty_occ, out, 0)
    return sorted({tuple(int(x) for x in row) for row in out})


def scene_aabb(scene: Sequence[TriangleMesh]):
    boxes = [m.aabb() for m in scene if len(m.vertices)]
    if not boxes:
        return None
    return (np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0))


def voxelize(scene: Sequence[TriangleMesh], spec: GridSpec, supersample: int = 1,
             axes: Sequence[int] = (0, 1, 2)) -> SeedGrid:
    """Union of the per-axis rasterizations of every non-degenerate triangle."""
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    occ = np.zeros(spec.resolution, dtype=np.bool_)
    box = scene_aabb(scene)
    if box is not None and not spec.contains(*box):
        raise ValueError("grid does not contain the scene bounding box")
    origin = np.asarray(spec.origin)
    res = np.asarray(spec.resolution, dtype=np.int64)
    for mesh in scene:
        if mesh.n_triangles == 0:
            continue
        a, b, c = mesh.corners()
        for axis in axes:
            # one axis per call keeps the kernel signature simple
            _voxelize_axis(a, b, c, mesh.degenerate, axis, origin, spec.voxel_size, res,
                           supersample, occ)
    return SeedGrid(spec, occ)


@njit(cache=True)
def _voxelize_axis(v0, v1, v2, skip, axis, origin, vs, res, samples, occ):
    scratch = np.empty((0, 3), dtype=np.int64)
    for t in range(v0.shape[0]):
        if not skip[t]:
            _rasterize(v0[t], v1[t], v2[t], axis, origin, vs, res, samples, occ, scratch, 0)
