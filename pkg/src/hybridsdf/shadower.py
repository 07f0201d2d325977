"""Soft shadows by sphere tracing the signed fine SDF."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit, prange

from .geometry import _STACK_SIZE, Bvh, bvh_traverse
from .jumpflood import ScalarGrid, trilinear
from .rng import uniform

JITTER_STREAM = 0x4A17
AMBIENT = 0.15
ALBEDO = 0.8
BACKGROUND = (0.55, 0.65, 0.8)


@dataclass(frozen=True)
class ShadowParams:
    epsilon: float
    max_steps: int
    max_step_size: float
    light_dir: tuple  # unit vector pointing towards the light
    light_angular_radius: float  # radians
    jitter_amplitude: float = 0.0
    history_blend: float = 0.9
    t_max: float = 10.0

    def __post_init__(self):
        d = np.asarray(self.light_dir, dtype=np.float64)
        object.__setattr__(self, "light_dir", tuple(d / np.linalg.norm(d)))

    @property
    def penumbra_w(self) -> float:
        return math.tan(self.light_angular_radius)

    def validate(self, voxel_size: Optional[float] = None) -> None:
        if voxel_size is not None and self.epsilon < voxel_size * (1 - 1e-12):
            raise ValueError("epsilon must be at least one fine voxel")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.max_step_size < self.epsilon:
            raise ValueError("max_step_size must be >= epsilon")
        if not self.light_angular_radius > 0:
            raise ValueError("light angular radius must be positive")
        if not 0.0 <= self.history_blend < 1.0:
            raise ValueError("history blend must lie in [0, 1)")


@dataclass(frozen=True)
class Camera:
    position: tuple
    look_at: tuple
    fov_y: float  # radians
    width: int
    height: int
    up: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.fov_y < math.pi:
            raise ValueError("field of view must lie in (0, pi)")

    def basis(self):
        """Rows: right, up, forward."""
        fwd = np.asarray(self.look_at, float) - np.asarray(self.position, float)
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, float))
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return np.array([right, up, fwd])

    def rays(self):
        """Per-pixel unit directions, shape (height * width, 3), row-major from the top."""
        b = self.basis()
        half = math.tan(0.5 * self.fov_y)
        aspect = self.width / self.height
        xs = ((np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0) * half * aspect
        ys = (1.0 - (np.arange(self.height) + 0.5) / self.height * 2.0) * half
        gx, gy = np.meshgrid(xs, ys)
        d = gx[..., None] * b[0] + gy[..., None] * b[1] + b[2]
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return np.ascontiguousarray(d.reshape(-1, 3))


@dataclass
class VisibilityImage:
    values: np.ndarray  # (height, width) in [0, 1]

    def __post_init__(self):
        self.values = np.clip(np.asarray(self.values, dtype=np.float64), 0.0, 1.0)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def sample_sdf(grid: ScalarGrid, p) -> float:
    """Trilinear sample with clamp-to-edge outside the grid."""
    p = np.asarray(p, dtype=np.float64)
    return float(trilinear(grid.values, np.asarray(grid.spec.origin), grid.spec.voxel_size,
                           p[0], p[1], p[2]))


@njit(cache=True)
def march(values, origin, vs, px, py, pz, lx, ly, lz, eps, max_steps, max_step, w, t_max, t0):
    """Sphere trace from ``p + t0 * l`` towards the light.

    Returns ``(visibility, samples taken)``.  Consecutive samples are
    triangulated: with ``y = h^2 / (2 h_prev)`` the closest approach between
    the two sample spheres is ``sqrt(h^2 - y^2)`` at distance ``t - y``.
    """
    res = 1.0
    h_prev = np.inf
    t = t0
    steps = 0
    while steps < max_steps:
        h = trilinear(values, origin, vs, px + t * lx, py + t * ly, pz + t * lz)
        steps += 1
        if h < eps:
            return 0.0, steps
        y = 0.0 if h_prev == np.inf else h * h / (2.0 * h_prev)
        d_close = math.sqrt(max(h * h - y * y, 0.0))
        reach = w * max(t - y, 0.0)
        if reach > 0.0:
            res = min(res, d_close / reach)
        h_prev = h
        t += min(max(h, eps), max_step)
        if t > t_max:
            break
    return min(max(res, 0.0), 1.0), steps


def soft_shadow_visibility(sdf: ScalarGrid, origin, params: ShadowParams, jitter: float = 0.0,
                           normal=None):
    """Visibility of the light from a surface point; ``jitter`` in [0, 1) scales the start offset.

    With ``normal`` the origin is first lifted ``epsilon`` off the surface.
    Returns ``(visibility, samples taken)``.
    """
    o = np.asarray(origin, dtype=np.float64)
    if normal is not None:
        o = o + params.epsilon * np.asarray(normal, dtype=np.float64)
    lx, ly, lz = params.light_dir
    t0 = params.epsilon + params.jitter_amplitude * jitter
    vis, steps = march(sdf.values, np.asarray(sdf.spec.origin), sdf.spec.voxel_size,
                       o[0], o[1], o[2], lx, ly, lz, params.epsilon, params.max_steps,
                       params.max_step_size, params.penumbra_w, params.t_max, t0)
    return float(vis), int(steps)


@njit(cache=True, parallel=True)
def _primary(box_min, box_max, left, right, start, count, order, v0, v1, v2, normals,
             tri_normals, cam_pos, dirs, out_p, out_n, out_hit):
    """Camera hits; normals are flipped to face the camera."""
    for i in prange(dirs.shape[0]):
        stack = np.empty(_STACK_SIZE, dtype=np.int64)
        d = dirs[i]
        t, tid, facing = bvh_traverse(box_min, box_max, left, right, start, count, order,
                                      v0, v1, v2, normals, cam_pos, d, 0.0, np.inf, stack)
        if tid < 0:
            out_hit[i] = False
            continue
        out_hit[i] = True
        s = 1.0 if facing == 1 else -1.0
        for k in range(3):
            out_p[i, k] = cam_pos[k] + t * d[k]
            out_n[i, k] = s * tri_normals[tid, k]


def primary_hits(bvh: Optional[Bvh], camera: Camera):
    """World hit point, camera-facing normal and hit flag per pixel (flattened)."""
    dirs = camera.rays()
    n = len(dirs)
    p = np.zeros((n, 3))
    nrm = np.zeros((n, 3))
    hit = np.zeros(n, dtype=np.bool_)
    if bvh is not None and bvh.order.size:
        _primary(*bvh.kernel_args(), np.ascontiguousarray(bvh.mesh.normals),
                 np.asarray(camera.position, float), dirs, p, nrm, hit)
    return p, nrm, hit


@njit(cache=True, parallel=True)
def _shadow_pixels(values, origin, vs, points, normals, hit, lx, ly, lz, eps, max_steps,
                   max_step, w, t_max, t_base, jitter_amp, seed, frame, out_vis, out_steps):
    for i in prange(points.shape[0]):
        if not hit[i]:
            out_vis[i] = 1.0
            out_steps[i] = 0
            continue
        u = uniform(seed, i, frame, JITTER_STREAM)
        # lift off the surface by epsilon so an oblique light cannot self-occlude at t0
        px = points[i, 0] + eps * normals[i, 0]
        py = points[i, 1] + eps * normals[i, 1]
        pz = points[i, 2] + eps * normals[i, 2]
        vis, steps = march(values, origin, vs, px, py, pz, lx, ly, lz, eps, max_steps,
                           max_step, w, t_max, t_base + jitter_amp * u)
        out_vis[i] = vis
        out_steps[i] = steps


def shade(ndotl: np.ndarray, visibility: np.ndarray, hit: np.ndarray) -> np.ndarray:
    """Lambert with a fixed ambient term; background where nothing was hit."""
    lum = ALBEDO * (AMBIENT + (1.0 - AMBIENT) * np.maximum(ndotl, 0.0) * visibility)
    rgb = np.repeat(lum[..., None], 3, axis=-1)
    rgb[~hit] = BACKGROUND
    return rgb


@dataclass
class FrameResult:
    color: np.ndarray  # (h, w, 3) in [0, 1]
    visibility: VisibilityImage  # temporally resolved
    current: VisibilityImage  # this frame only
    max_steps_taken: int


def render_frame(bvh: Optional[Bvh], sdf: Optional[ScalarGrid], camera: Camera,
                 params: ShadowParams, frame: int, history: Optional[np.ndarray] = None,
                 seed: int = 0) -> FrameResult:
    """Primary visibility by ray tracing, shadows by marching ``sdf``.

    ``history`` is the previous resolved visibility buffer; it is blended as
    ``h * history + (1 - h) * current``.
    """
    p, n, hit = primary_hits(bvh, camera)
    npx = len(hit)
    vis = np.ones(npx)
    steps = np.zeros(npx, dtype=np.int64)
    lx, ly, lz = params.light_dir
    if sdf is not None and hit.any():
        _shadow_pixels(np.ascontiguousarray(sdf.values), np.asarray(sdf.spec.origin),
                       sdf.spec.voxel_size, p, n, hit, lx, ly, lz, params.epsilon,
                       params.max_steps, params.max_step_size, params.penumbra_w,
                       params.t_max, params.epsilon, params.jitter_amplitude,
                       np.uint64(seed % 2**64), np.int64(frame), vis, steps)
    shape = (camera.height, camera.width)
    current = vis.reshape(shape)
    if history is not None:
        h = params.history_blend
        resolved = h * np.asarray(history) + (1.0 - h) * current
    else:
        resolved = current
    ndotl = (n @ np.asarray(params.light_dir)).reshape(shape)
    color = shade(ndotl, resolved, hit.reshape(shape))
    return FrameResult(color, VisibilityImage(resolved), VisibilityImage(current),
                       int(steps.max(initial=0)))
