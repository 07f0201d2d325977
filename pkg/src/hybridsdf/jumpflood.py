"""3D jump flooding, the exhaustive nearest-seed oracle and the coarse SDF."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit, prange

from .voxelizer import GridSpec, SeedGrid

NONE = -1
SDF_MAGIC = b"SDF1"


@dataclass(frozen=True)
class NearestSeedGrid:
    spec: GridSpec
    seeds: np.ndarray  # (nx, ny, nz, 3) int64 seed coordinates, NONE where no seed exists

    @property
    def valid(self) -> np.ndarray:
        return self.seeds[..., 0] != NONE

    def sq_voxel_distance(self) -> np.ndarray:
        """Squared distance to the stored seed in voxel units; -1 where NONE."""
        idx = np.indices(self.spec.resolution).transpose(1, 2, 3, 0)
        sq = np.sum((self.seeds - idx) ** 2, axis=-1)
        return np.where(self.valid, sq, -1)

    def distance(self) -> np.ndarray:
        sq = self.sq_voxel_distance()
        return np.where(sq >= 0, np.sqrt(np.maximum(sq, 0)) * self.spec.voxel_size, np.inf)


@dataclass(frozen=True)
class ScalarGrid:
    spec: GridSpec
    values: np.ndarray  # (nx, ny, nz) float64, world units

    def __post_init__(self):
        if tuple(self.values.shape) != self.spec.resolution:
            raise ValueError(f"grid values {self.values.shape} do not match {self.spec.resolution}")


@dataclass(frozen=True)
class JfaParams:
    beta: float  # world units

    def validate(self, spec: GridSpec) -> None:
        if self.beta < 0 or self.beta >= spec.voxel_size * math.sqrt(3.0):
            raise ValueError("beta must lie in [0, voxel_size * sqrt(3))")


@njit(cache=True, inline="always")
def _better(sq, sx, sy, sz, bsq, bx, by, bz):
    if bsq < 0:
        return True
    if sq != bsq:
        return sq < bsq
    if sx != bx:
        return sx < bx
    if sy != by:
        return sy < by
    return sz < bz


@njit(cache=True, parallel=True)
def _jfa_pass(src, dst, step):
    nx, ny, nz = src.shape[0], src.shape[1], src.shape[2]
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                bx = src[i, j, k, 0]
                by = src[i, j, k, 1]
                bz = src[i, j, k, 2]
                bsq = -1
                if bx != NONE:
                    bsq = (bx - i) ** 2 + (by - j) ** 2 + (bz - k) ** 2
                for di in range(-1, 2):
                    ii = i + di * step
                    if ii < 0 or ii >= nx:
                        continue
                    for dj in range(-1, 2):
                        jj = j + dj * step
                        if jj < 0 or jj >= ny:
                            continue
                        for dk in range(-1, 2):
                            kk = k + dk * step
                            if kk < 0 or kk >= nz:
                                continue
                            sx = src[ii, jj, kk, 0]
                            if sx == NONE:
                                continue
                            sy = src[ii, jj, kk, 1]
                            sz = src[ii, jj, kk, 2]
                            sq = (sx - i) ** 2 + (sy - j) ** 2 + (sz - k) ** 2
                            if _better(sq, sx, sy, sz, bsq, bx, by, bz):
                                bsq, bx, by, bz = sq, sx, sy, sz
                dst[i, j, k, 0] = bx
                dst[i, j, k, 1] = by
                dst[i, j, k, 2] = bz


def _initial(seeds: SeedGrid) -> np.ndarray:
    buf = np.full(seeds.spec.resolution + (3,), NONE, dtype=np.int64)
    coords = np.argwhere(seeds.occupancy)
    buf[coords[:, 0], coords[:, 1], coords[:, 2]] = coords
    return buf


def jfa_steps(resolution) -> list[int]:
    """Step lengths 2^ceil(log2(max dim)) / 2, ..., 2, 1."""
    top = 1 << max(int(math.ceil(math.log2(max(resolution)))), 1)
    steps = []
    k = top // 2
    while k >= 1:
        steps.append(k)
        k //= 2
    return steps


def jfa_flood(seeds: SeedGrid) -> NearestSeedGrid:
    """Plain jump flooding with ping-pong buffers and a lexicographic tie-break."""
    src = _initial(seeds)
    if seeds.occupancy.any():
        dst = np.empty_like(src)
        for step in jfa_steps(seeds.spec.resolution):
            _jfa_pass(src, dst, step)
            src, dst = dst, src
    return NearestSeedGrid(seeds.spec, src)


@njit(cache=True, parallel=True)
def _nearest_by_list(coords, out):
    nx, ny, nz = out.shape[0], out.shape[1], out.shape[2]
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                bsq = -1
                bx = by = bz = NONE
                # coords are in lexicographic order, so a strict < keeps the smallest on ties
                for s in range(coords.shape[0]):
                    sq = (coords[s, 0] - i) ** 2 + (coords[s, 1] - j) ** 2 + (coords[s, 2] - k) ** 2
                    if bsq < 0 or sq < bsq:
                        bsq = sq
                        bx, by, bz = coords[s, 0], coords[s, 1], coords[s, 2]
                out[i, j, k, 0] = bx
                out[i, j, k, 1] = by
                out[i, j, k, 2] = bz


@njit(cache=True, parallel=True)
def _nearest_by_shells(occ, out):
    nx, ny, nz = occ.shape[0], occ.shape[1], occ.shape[2]
    rmax = max(nx, ny, nz)
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                bsq = -1
                bx = by = bz = NONE
                for r in range(rmax):
                    for di in range(-r, r + 1):
                        ii = i + di
                        if ii < 0 or ii >= nx:
                            continue
                        for dj in range(-r, r + 1):
                            jj = j + dj
                            if jj < 0 or jj >= ny:
                                continue
                            full = abs(di) == r or abs(dj) == r
                            dk = -r
                            while dk <= r:
                                kk = k + dk
                                if 0 <= kk < nz and occ[ii, jj, kk]:
                                    sq = di * di + dj * dj + dk * dk
                                    if _better(sq, ii, jj, kk, bsq, bx, by, bz):
                                        bsq, bx, by, bz = sq, ii, jj, kk
                                if full or r == 0:
                                    dk += 1
                                else:
                                    dk += 2 * r
                    # every seed outside the scanned cube is at least r + 1 away
                    if bsq >= 0 and bsq < (r + 1) * (r + 1):
                        break
                out[i, j, k, 0] = bx
                out[i, j, k, 1] = by
                out[i, j, k, 2] = bz


def exact_nearest(seeds: SeedGrid) -> NearestSeedGrid:
    """Exhaustive nearest seed per voxel with the same tie-break as :func:`jfa_flood`."""
    out = np.full(seeds.spec.resolution + (3,), NONE, dtype=np.int64)
    coords = np.argwhere(seeds.occupancy).astype(np.int64)
    if len(coords) == 0:
        return NearestSeedGrid(seeds.spec, out)
    if len(coords) <= 512:
        _nearest_by_list(np.ascontiguousarray(coords), out)
    else:
        _nearest_by_shells(seeds.occupancy, out)
    return NearestSeedGrid(seeds.spec, out)


def coarse_sdf(nearest: NearestSeedGrid, params: JfaParams) -> ScalarGrid:
    """Distance between voxel centers and their seed centers, minus the bias beta."""
    dist = nearest.distance()
    values = np.where(np.isfinite(dist), dist - params.beta, np.inf)
    return ScalarGrid(nearest.spec, values)


# ----------------------------------------------------------------- dump format


def write_sdf(grid: ScalarGrid, path) -> None:
    """Little-endian "SDF1" dump, x varying fastest."""
    spec = grid.spec
    header = SDF_MAGIC + struct.pack("<3I4f", *spec.resolution, spec.voxel_size, *spec.origin)
    body = np.asarray(grid.values, dtype="<f4").ravel(order="F").tobytes()
    Path(path).write_bytes(header + body)


def read_sdf(path) -> ScalarGrid:
    data = Path(path).read_bytes()
    if data[:4] != SDF_MAGIC:
        raise ValueError(f"{path}: not an SDF1 file")
    nx, ny, nz, vs, ox, oy, oz = struct.unpack_from("<3I4f", data, 4)
    n = nx * ny * nz
    body = np.frombuffer(data, dtype="<f4", count=n, offset=32)
    if len(data) != 32 + 4 * n:
        raise ValueError(f"{path}: truncated SDF1 body")
    values = body.reshape((nx, ny, nz), order="F").astype(np.float64)
    return ScalarGrid(GridSpec((nx, ny, nz), (ox, oy, oz), vs), values)


# ------------------------------------------------------------------- sampling


@njit(cache=True, inline="always")
def trilinear(values, origin, vs, px, py, pz):
    """Trilinear sample at a world point; texel centers sit at ``origin + (i + 0.5) * vs``.

    Points outside the grid clamp to the border texels.  Corners with zero
    weight are skipped so an infinite neighbour cannot poison an exact hit.
    """
    nx, ny, nz = values.shape[0], values.shape[1], values.shape[2]
    gx = min(max((px - origin[0]) / vs - 0.5, 0.0), nx - 1.0)
    gy = min(max((py - origin[1]) / vs - 0.5, 0.0), ny - 1.0)
    gz = min(max((pz - origin[2]) / vs - 0.5, 0.0), nz - 1.0)
    i0 = min(int(gx), nx - 2)
    j0 = min(int(gy), ny - 2)
    k0 = min(int(gz), nz - 2)
    fx, fy, fz = gx - i0, gy - j0, gz - k0
    acc = 0.0
    for di in range(2):
        wx = fx if di else 1.0 - fx
        if wx == 0.0:
            continue
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            if wy == 0.0:
                continue
            for dk in range(2):
                wz = fz if dk else 1.0 - fz
                if wz == 0.0:
                    continue
                acc += wx * wy * wz * values[i0 + di, j0 + dj, k0 + dk]
    return acc


@njit(cache=True, parallel=True)
def _sample_points(values, origin, vs, points, out):
    for n in prange(points.shape[0]):
        out[n] = trilinear(values, origin, vs, points[n, 0], points[n, 1], points[n, 2])


def sample_points(grid: ScalarGrid, points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(pts))
    _sample_points(np.ascontiguousarray(grid.values), np.asarray(grid.spec.origin),
                   grid.spec.voxel_size, pts, out)
    return out


def resample(grid: ScalarGrid, spec: GridSpec) -> ScalarGrid:
    """Trilinear resampling of ``grid`` at the texel centers of ``spec``."""
    values = sample_points(grid, spec.centers().reshape(-1, 3)).reshape(spec.resolution)
    return ScalarGrid(spec, values)
