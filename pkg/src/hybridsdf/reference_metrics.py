"""Distributed-ray-tracing shadow reference and image comparison metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit, prange

from .geometry import _STACK_SIZE, Bvh, bvh_traverse
from .rng import uniform
from .shadower import Camera, VisibilityImage, primary_hits

NORMAL_OFFSET = 1e-4


@dataclass(frozen=True)
class ReferenceParams:
    samples_per_pixel: int
    light_dir: tuple
    light_angular_radius: float
    rng_seed: int = 0
    t_max: float = math.inf

    def __post_init__(self):
        if self.samples_per_pixel < 1:
            raise ValueError("need at least one sample per pixel")
        if not self.light_angular_radius > 0:
            raise ValueError("light angular radius must be positive")
        d = np.asarray(self.light_dir, dtype=np.float64)
        object.__setattr__(self, "light_dir", tuple(d / np.linalg.norm(d)))


@njit(cache=True, inline="always")
def _basis(nx, ny, nz):
    # branchless orthonormal basis (Duff et al. 2017)
    sign = 1.0 if nz >= 0.0 else -1.0
    a = -1.0 / (sign + nz)
    b = nx * ny * a
    return (1.0 + sign * nx * nx * a, sign * b, -sign * nx,
            b, sign + ny * ny * a, -ny)


@njit(cache=True)
def cone_direction(lx, ly, lz, cos_max, u1, u2, out):
    """Direction uniform over the solid angle of the cone of half-angle acos(cos_max)."""
    ct = 1.0 - u1 * (1.0 - cos_max)
    st = math.sqrt(max(0.0, 1.0 - ct * ct))
    phi = 2.0 * math.pi * u2
    t1x, t1y, t1z, t2x, t2y, t2z = _basis(lx, ly, lz)
    c, s = st * math.cos(phi), st * math.sin(phi)
    out[0] = c * t1x + s * t2x + ct * lx
    out[1] = c * t1y + s * t2y + ct * ly
    out[2] = c * t1z + s * t2z + ct * lz


@njit(cache=True)
def _visibility(box_min, box_max, left, right, start, count, order, v0, v1, v2, normals,
                o, lx, ly, lz, cos_max, k, seed, key, t_max, stack, d):
    free = 0
    for s in range(k):
        cone_direction(lx, ly, lz, cos_max, uniform(seed, key, s, 0), uniform(seed, key, s, 1), d)
        t, tid, facing = bvh_traverse(box_min, box_max, left, right, start, count, order,
                                      v0, v1, v2, normals, o, d, 0.0, t_max, stack)
        if tid < 0:
            free += 1
    return free / k


@njit(cache=True, parallel=True)
def _reference_pixels(box_min, box_max, left, right, start, count, order, v0, v1, v2, normals,
                      points, hit, lx, ly, lz, cos_max, k, seed, t_max, out):
    for i in prange(points.shape[0]):
        if not hit[i]:
            out[i] = 1.0
            continue
        stack = np.empty(_STACK_SIZE, dtype=np.int64)
        d = np.empty(3)
        out[i] = _visibility(box_min, box_max, left, right, start, count, order, v0, v1, v2,
                             normals, points[i], lx, ly, lz, cos_max, k, seed, i, t_max,
                             stack, d)


def reference_visibility(bvh: Bvh, p, params: ReferenceParams, normal=None, key: int = 0) -> float:
    """Fraction of cone-sampled shadow rays from ``p`` that escape.

    With ``normal`` the origin is first pushed ``1e-4`` along it.
    """
    o = np.asarray(p, dtype=np.float64).copy()
    if normal is not None:
        o += NORMAL_OFFSET * np.asarray(normal, dtype=np.float64)
    lx, ly, lz = params.light_dir
    return float(_visibility(*bvh.kernel_args(), o, lx, ly, lz,
                             math.cos(params.light_angular_radius), params.samples_per_pixel,
                             np.uint64(params.rng_seed % 2**64), key, params.t_max,
                             np.empty(_STACK_SIZE, dtype=np.int64), np.empty(3)))


def render_reference(bvh: Optional[Bvh], camera: Camera, params: ReferenceParams) -> VisibilityImage:
    p, n, hit = primary_hits(bvh, camera)
    out = np.ones(len(hit))
    if bvh is not None and hit.any():
        origins = np.ascontiguousarray(p + NORMAL_OFFSET * n)
        lx, ly, lz = params.light_dir
        _reference_pixels(*bvh.kernel_args(), origins, hit, lx, ly, lz,
                          math.cos(params.light_angular_radius), params.samples_per_pixel,
                          np.uint64(params.rng_seed % 2**64), params.t_max, out)
    return VisibilityImage(out.reshape(camera.height, camera.width))


def _values(img) -> np.ndarray:
    return img.values if isinstance(img, VisibilityImage) else np.asarray(img, dtype=np.float64)


def rmse(a, b) -> float:
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"image sizes differ: {va.shape} vs {vb.shape}")
    return float(np.sqrt(np.mean((va - vb) ** 2)))


def penumbra_area(img, tau: float = 0.05) -> int:
    """Pixels strictly between ``tau`` and ``1 - tau``."""
    if not 0.0 < tau < 0.5:
        raise ValueError("tau must lie in (0, 0.5)")
    v = _values(img)
    return int(np.count_nonzero((v > tau) & (v < 1.0 - tau)))


def metrics(sdf_img, ref_img, frames: int, config_hash: str, tau: float = 0.05) -> dict:
    return {
        "rmse": rmse(sdf_img, ref_img),
        "penumbra_sdf": penumbra_area(sdf_img, tau),
        "penumbra_ref": penumbra_area(ref_img, tau),
        "frames": int(frames),
        "config_hash": config_hash,
    }
