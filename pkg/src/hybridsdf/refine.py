"""Fine SDF: selective ray-traced distance samples with temporal accumulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit, prange

from .geometry import _STACK_SIZE, BACK, FRONT, Bvh, TriangleMesh, build_bvh, bvh_traverse, merge_meshes
from .jumpflood import ScalarGrid, resample
from .rng import uniform
from .voxelizer import GridSpec


@dataclass(frozen=True)
class RefineParams:
    d: float  # refinement radius, world units
    alpha: float  # temporal decay
    rays_per_texel: int
    fine_spec: GridSpec
    rng_seed: int = 0

    def validate(self, coarse_spec: Optional[GridSpec] = None) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.rays_per_texel < 1:
            raise ValueError("rays_per_texel must be >= 1")
        if self.d < self.fine_spec.voxel_size:
            raise ValueError("d must be at least one fine voxel")
        if coarse_spec is not None:
            ratios = [f / c for f, c in zip(self.fine_spec.resolution, coarse_spec.resolution)]
            if any(r != int(r) for r in ratios):
                raise ValueError("fine resolution must be an integer multiple of the coarse one")
            if not np.allclose(self.fine_spec.origin, coarse_spec.origin):
                raise ValueError("fine and coarse grids must share an origin")


@dataclass(frozen=True)
class FineSdfState:
    """Everything carried from one frame to the next.

    ``f`` holds unsigned magnitudes; inside the refined set ``inf`` means no
    ray has hit anything yet.  ``signed`` is the field handed to the shadow
    marcher.
    """

    f: ScalarGrid
    sign_front: np.ndarray
    sign_back: np.ndarray
    frame: int
    mask: np.ndarray
    coarse: ScalarGrid  # c_t resampled at fine texel centers
    signed: ScalarGrid
    rays_traced: int = 0


def select_refine_mask(coarse: ScalarGrid, params: RefineParams) -> np.ndarray:
    """Fine texels whose trilinear coarse sample is within ``d``."""
    c_fine = coarse if coarse.spec == params.fine_spec else resample(coarse, params.fine_spec)
    return c_fine.values <= params.d


@njit(cache=True, inline="always")
def _sphere_direction(u1, u2):
    z = 2.0 * u1 - 1.0
    s = math.sqrt(max(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * u2
    return s * math.cos(phi), s * math.sin(phi), z


@njit(cache=True, parallel=True)
def _trace_texels(box_min, box_max, left, right, start, count, order, v0, v1, v2, normals,
                  points, texel_ids, frame, seed, n_rays, out_r, out_front, out_back):
    for m in prange(points.shape[0]):
        o = points[m]
        d = np.empty(3)
        stack = np.empty(_STACK_SIZE, dtype=np.int64)
        best = np.inf
        nf = 0
        nb = 0
        tid = texel_ids[m]
        for i in range(n_rays):
            u1 = uniform(seed, tid, frame, 2 * i)
            u2 = uniform(seed, tid, frame, 2 * i + 1)
            d[0], d[1], d[2] = _sphere_direction(u1, u2)
            t, tri, facing = bvh_traverse(box_min, box_max, left, right, start, count,
                                          order, v0, v1, v2, normals, o, d, 0.0, np.inf, stack)
            if tri < 0:
                continue
            if t < best:
                best = t
            if facing == FRONT:
                nf += 1
            elif facing == BACK:
                nb += 1
        out_r[m] = best
        out_front[m] = nf
        out_back[m] = nb


def ray_directions(seed: int, texel: int, frame: int, n: int) -> np.ndarray:
    """The unit directions used for ``texel`` at ``frame`` (for inspection and tests)."""
    out = np.empty((n, 3))
    _fill_directions(np.uint64(seed % 2**64), texel, frame, out)
    return out


@njit(cache=True)
def _fill_directions(seed, texel, frame, out):
    for i in range(out.shape[0]):
        out[i, 0], out[i, 1], out[i, 2] = _sphere_direction(
            uniform(seed, texel, frame, 2 * i), uniform(seed, texel, frame, 2 * i + 1))


def trace_samples(bvh: Bvh, points, texel_ids, frame: int, n_rays: int, seed: int):
    """Batched distance samples. Returns ``(r, front_hits, back_hits)`` arrays."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    ids = np.ascontiguousarray(texel_ids, dtype=np.int64)
    n = len(pts)
    r = np.empty(n)
    front = np.empty(n, dtype=np.int64)
    back = np.empty(n, dtype=np.int64)
    if n:
        _trace_texels(*bvh.kernel_args(), pts, ids, np.int64(frame), np.uint64(seed % 2**64),
                      int(n_rays), r, front, back)
    return r, front, back


def trace_distance_sample(bvh: Bvh, p, n: int, seed: int = 0, texel: int = 0, frame: int = 0):
    """Minimum hit distance over ``n`` uniform sphere directions from ``p``.

    The direction stream is keyed by ``(seed, texel, frame, ray index)``.
    Returns ``(r, front_hits, back_hits)`` with ``r = inf`` when every ray misses.
    """
    if n < 1:
        raise ValueError("need at least one ray")
    r, f, b = trace_samples(bvh, np.asarray(p, dtype=np.float64)[None], [texel], frame, n, seed)
    return float(r[0]), int(f[0]), int(b[0])


def accumulate_fine(f_prev: Optional[ScalarGrid], coarse: ScalarGrid, samples: np.ndarray,
                    mask: Optional[np.ndarray], params: RefineParams) -> ScalarGrid:
    """Temporal update of the unsigned fine field.

    Refined texels: ``min(alpha * f_prev + (1 - alpha) * |c|, r)``; others copy
    ``c``.  ``coarse`` must already be sampled on the fine grid.  A missing
    history (first frame, or ``inf``) contributes nothing to the blend.
    """
    spec = coarse.spec
    r = np.asarray(samples, dtype=np.float64)
    if r.shape != spec.resolution:
        raise ValueError(f"sample grid {r.shape} does not match {spec.resolution}")
    if f_prev is not None and f_prev.values.shape != spec.resolution:
        raise ValueError(f"previous fine grid {f_prev.values.shape} does not match {spec.resolution}")
    c = coarse.values
    refined = (c <= params.d) if mask is None else np.asarray(mask, dtype=bool)
    if refined.shape != spec.resolution:
        raise ValueError("mask shape mismatch")
    alpha = params.alpha
    c_abs = np.abs(c)
    if f_prev is None:
        prev = np.full(spec.resolution, np.inf)
    else:
        prev = f_prev.values
    with np.errstate(invalid="ignore"):
        blended = alpha * prev + (1.0 - alpha) * c_abs
    if alpha == 0.0:
        blended = c_abs
    blended = np.where(np.isfinite(prev), blended, np.inf if alpha > 0.0 else c_abs)
    out = np.where(refined, np.minimum(blended, r), c)
    return ScalarGrid(spec, out)


def update_sign(state: FineSdfState, front: np.ndarray, back: np.ndarray, alpha: float) -> FineSdfState:
    """Decayed front/back tallies; back-face majority makes a refined texel negative."""
    sign_front = alpha * state.sign_front + front
    sign_back = alpha * state.sign_back + back
    negative = sign_back > sign_front
    f = state.f.values
    c = state.coarse.values
    magnitude = np.where(np.isfinite(f), f, np.abs(c))
    signed_refined = np.where(negative, -magnitude, magnitude)
    # texels no ray has reached yet keep the signed coarse value
    signed_refined = np.where(np.isfinite(f), signed_refined, c)
    signed = np.where(state.mask, signed_refined, c)
    return replace(state, sign_front=sign_front, sign_back=sign_back,
                   signed=ScalarGrid(state.f.spec, signed))


def _as_bvh(scene) -> Optional[Bvh]:
    if scene is None:
        return None
    if isinstance(scene, Bvh):
        return scene
    if isinstance(scene, TriangleMesh):
        return build_bvh(scene)
    return build_bvh(merge_meshes(list(scene)))


def build_fine_sdf(scene: Union[Bvh, TriangleMesh, Sequence[TriangleMesh], None],
                   coarse: ScalarGrid, state: Optional[FineSdfState],
                   params: RefineParams) -> FineSdfState:
    """One frame: mask, trace, accumulate, vote. ``state=None`` starts at frame 0."""
    params.validate(coarse.spec)
    spec = params.fine_spec
    frame = 0 if state is None else state.frame
    c_fine = resample(coarse, spec)
    mask = c_fine.values <= params.d
    bvh = _as_bvh(scene)
    r = np.full(spec.resolution, np.inf)
    front = np.zeros(spec.resolution)
    back = np.zeros(spec.resolution)
    n_traced = 0
    if bvh is not None and bvh.order.size and mask.any():
        # texel ids are x-fastest linear indices, matching the dump layout
        idx = np.argwhere(mask)
        nx, ny, _ = spec.resolution
        ids = idx[:, 0] + nx * (idx[:, 1] + ny * idx[:, 2])
        centers = np.asarray(spec.origin) + (idx + 0.5) * spec.voxel_size
        rr, ff, bb = trace_samples(bvh, centers, ids, frame, params.rays_per_texel,
                                   params.rng_seed)
        r[idx[:, 0], idx[:, 1], idx[:, 2]] = rr
        front[idx[:, 0], idx[:, 1], idx[:, 2]] = ff
        back[idx[:, 0], idx[:, 1], idx[:, 2]] = bb
        n_traced = len(ids) * params.rays_per_texel
    f_prev = None if state is None else state.f
    f = accumulate_fine(f_prev, c_fine, r, mask, params)
    if state is None:
        zeros = np.zeros(spec.resolution)
        sign_front, sign_back = zeros, zeros.copy()
    else:
        sign_front, sign_back = state.sign_front, state.sign_back
    interim = FineSdfState(f=f, sign_front=sign_front, sign_back=sign_back, frame=frame + 1,
                           mask=mask, coarse=c_fine, signed=c_fine, rays_traced=n_traced)
    return update_sign(interim, front, back, params.alpha)
