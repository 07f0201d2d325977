"""Per-frame orchestration: config loading, the voxelize/flood/refine/shadow loop and artifacts."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from .geometry import SceneInstance, build_bvh, load_obj, merge_meshes
from .jumpflood import JfaParams, ScalarGrid, coarse_sdf, jfa_flood, write_sdf
from .netpbm import read_netpbm, write_pgm, write_ppm
from .reference_metrics import ReferenceParams, metrics, render_reference
from .refine import RefineParams, build_fine_sdf
from .shadower import Camera, ShadowParams, render_frame
from .voxelizer import GridSpec, voxelize

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, frame: int, cause: BaseException):
        super().__init__(f"stage {stage!r}, frame {frame}: {cause}")
        self.stage = stage
        self.frame = frame


@dataclass(frozen=True)
class RenderConfig:
    """Every tunable of the pipeline.

    Keys ending in ``_voxels`` are resolution-relative: ``beta_voxels`` is in
    coarse voxels, the others in fine voxels.  Angles are in degrees.
    """

    scene: tuple = ()
    animation: dict = field(default_factory=dict)  # object stem -> translation per frame
    coarse_resolution: int = 64
    fine_factor: int = 2
    grid_border: float = 2.0
    supersample: int = 1
    beta_voxels: float = 0.5
    d_fine_voxels: float = 4.0
    alpha: float = 0.9
    rays_per_texel: int = 8
    epsilon_voxels: float = 1.0
    max_steps: int = 256
    max_step_voxels: float = 4.0
    theta_deg: float = 3.0
    jitter_voxels: float = 1.0
    history_blend: float = 0.9
    t_max: float = 10.0
    light_dir: tuple = (0.0, 1.0, 0.0)
    camera_position: tuple = (0.0, 2.0, 4.0)
    camera_look_at: tuple = (0.0, 0.0, 0.0)
    fov_deg: float = 45.0
    width: int = 128
    height: int = 128
    reference_spp: int = 0
    penumbra_tau: float = 0.05
    frames: int = 1
    rng_seed: int = 0
    output_dir: str = "out"

    # ------------------------------------------------------------- derived

    def scene_instances(self) -> list[SceneInstance]:
        out = []
        for path in self.scene:
            mesh = load_obj(path)
            step = self.animation.get(Path(path).stem, (0.0, 0.0, 0.0))
            out.append(SceneInstance(mesh, translate_per_frame=tuple(step)))
        return out

    def coarse_spec(self, instances: list[SceneInstance]) -> GridSpec:
        """Grid holding the scene over every frame of the animation."""
        los, his = [], []
        for inst in instances:
            for t in (0, max(self.frames - 1, 0)):
                lo, hi = inst.world_mesh(t).aabb()
                los.append(lo)
                his.append(hi)
        if not los:
            raise ConfigError("scene is empty")
        return GridSpec.fit(np.min(los, axis=0), np.max(his, axis=0), self.coarse_resolution,
                            border=self.grid_border)

    def jfa_params(self, coarse: GridSpec) -> JfaParams:
        return JfaParams(self.beta_voxels * coarse.voxel_size)

    def refine_params(self, coarse: GridSpec) -> RefineParams:
        fine = coarse.refined(self.fine_factor)
        return RefineParams(d=self.d_fine_voxels * fine.voxel_size, alpha=self.alpha,
                            rays_per_texel=self.rays_per_texel, fine_spec=fine,
                            rng_seed=self.rng_seed)

    def shadow_params(self, fine: GridSpec) -> ShadowParams:
        vs = fine.voxel_size
        return ShadowParams(epsilon=self.epsilon_voxels * vs, max_steps=self.max_steps,
                            max_step_size=self.max_step_voxels * vs, light_dir=self.light_dir,
                            light_angular_radius=math.radians(self.theta_deg),
                            jitter_amplitude=self.jitter_voxels * vs,
                            history_blend=self.history_blend, t_max=self.t_max)

    def reference_params(self) -> ReferenceParams:
        return ReferenceParams(self.reference_spp, self.light_dir, math.radians(self.theta_deg),
                               rng_seed=self.rng_seed, t_max=self.t_max)

    def camera(self) -> Camera:
        return Camera(self.camera_position, self.camera_look_at, math.radians(self.fov_deg),
                      self.width, self.height)

    def canonical(self) -> dict:
        """Everything that influences output bytes, in a stable form."""
        d = asdict(self)
        d.pop("output_dir")
        d["scene"] = [Path(p).name for p in self.scene]
        d["animation"] = {k: list(v) for k, v in sorted(self.animation.items())}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> None:
        try:
            if self.frames < 1:
                raise ValueError("frames must be >= 1")
            if self.width < 1 or self.height < 1:
                raise ValueError("image size must be positive")
            if self.reference_spp < 0:
                raise ValueError("reference_spp must be >= 0")
            if not 0.0 < self.penumbra_tau < 0.5:
                raise ValueError("penumbra_tau must lie in (0, 0.5)")
            if self.rng_seed < 0 or self.rng_seed >= 2**64:
                raise ValueError("rng_seed must fit in an unsigned 64-bit integer")
            if self.fine_factor < 1:
                raise ValueError("fine_factor must be >= 1")
            if not self.scene:
                raise ValueError("no scene files given")
            for p in self.scene:
                if not Path(p).is_file():
                    raise ValueError(f"scene file not found: {p}")
            stems = {Path(p).stem for p in self.scene}
            unknown = set(self.animation) - stems
            if unknown:
                raise ValueError(f"animation for unknown objects: {sorted(unknown)}")
            if np.linalg.norm(self.light_dir) == 0:
                raise ValueError("light_dir must be non-zero")
            self.camera()
            coarse = GridSpec((self.coarse_resolution,) * 3, (0, 0, 0), 1.0)
            self.jfa_params(coarse).validate(coarse)
            rp = self.refine_params(coarse)
            rp.validate(coarse)
            self.shadow_params(rp.fine_spec).validate(rp.fine_spec.voxel_size)
            if self.reference_spp:
                self.reference_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


_VECTORS = {"light_dir", "camera_position", "camera_look_at"}


def _coerce(name: str, value, default):
    if name in _VECTORS:
        if not (isinstance(value, list) and len(value) == 3
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
            raise ConfigError(f"{name} must be a list of three numbers")
        return tuple(float(x) for x in value)
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{name}: booleans are not accepted")
    if isinstance(default, int):
        if not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    raise ConfigError(f"{name}: unsupported value")


def config_from_dict(raw: dict, base_dir=".") -> RenderConfig:
    """Build a config from parsed TOML; tables are per-object animation entries."""
    base_dir = Path(base_dir)
    defaults = RenderConfig()
    known = {f.name for f in fields(RenderConfig)} - {"animation"}
    kwargs = {}
    animation = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            extra = set(value) - {"translate_per_frame"}
            if extra:
                raise ConfigError(f"unknown key(s) for object {key!r}: {sorted(extra)}")
            step = value.get("translate_per_frame")
            if not (isinstance(step, list) and len(step) == 3):
                raise ConfigError(f"{key}.translate_per_frame must be a list of three numbers")
            animation[key] = tuple(float(x) for x in step)
        elif key == "scene":
            paths = [value] if isinstance(value, str) else value
            if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
                raise ConfigError("scene must be a path or a list of paths")
            kwargs["scene"] = tuple(str((base_dir / p).resolve()) for p in paths)
        elif key in known:
            kwargs[key] = _coerce(key, value, getattr(defaults, key))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    cfg = RenderConfig(animation=animation, **kwargs)
    cfg.validate()
    return cfg


def load_config(path) -> RenderConfig:
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, path.parent)


def with_overrides(cfg: RenderConfig, **overrides) -> RenderConfig:
    """Apply command-line overrides (``None`` means keep) and re-validate."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    out = replace(cfg, **changes)
    out.validate()
    return out


# ------------------------------------------------------------------ frame loop


class _Clock:
    """Back-to-back stage timer; stage durations sum to the frame total by construction."""

    def __init__(self):
        self.t0 = self.last = time.perf_counter()
        self.stages: dict[str, float] = {}

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.stages[name] = self.stages.get(name, 0.0) + (now - self.last)
        self.last = now

    def report(self) -> dict:
        return {"stages": self.stages, "total": self.last - self.t0}


@dataclass
class PipelineResult:
    output_dir: Path
    frames: int
    timings: list
    metrics: Optional[dict] = None
    files: list = field(default_factory=list)


def _stage(name: str, frame: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # report which step failed, keep the cause
        raise PipelineError(name, frame, exc) from exc


def _scene_at(instances, frame):
    return [inst.world_mesh(frame) for inst in instances]


def run_pipeline(cfg: RenderConfig, render: bool = True, reference: Optional[bool] = None,
                 output_dir=None) -> PipelineResult:
    """Run every frame and write the artifacts.

    ``render=False`` stops after the fine SDF (dumps only).  ``reference``
    defaults to ``reference_spp > 0``; it is rendered for the last frame.
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    instances = _stage("load", 0, cfg.scene_instances)
    coarse_spec = _stage("grid", 0, cfg.coarse_spec, instances)
    jp = cfg.jfa_params(coarse_spec)
    rp = cfg.refine_params(coarse_spec)
    sp = cfg.shadow_params(rp.fine_spec)
    camera = cfg.camera()
    files = []
    timings = []
    state = None
    history = None
    frame_out = None
    coarse = bvh = None
    for t in range(cfg.frames):
        clock = _Clock()
        meshes = _scene_at(instances, t)
        seeds = _stage("voxelize", t, voxelize, meshes, coarse_spec, cfg.supersample)
        clock.lap("voxelize")
        coarse = _stage("flood", t, lambda: coarse_sdf(jfa_flood(seeds), jp))
        clock.lap("flood")
        bvh = _stage("bvh", t, build_bvh, merge_meshes(meshes))
        clock.lap("bvh")
        state = _stage("refine", t, build_fine_sdf, bvh, coarse, state, rp)
        clock.lap("refine")
        if render:
            frame_out = _stage("shadow", t, render_frame, bvh, state.signed, camera, sp, t,
                               history, seed=cfg.rng_seed)
            history = frame_out.visibility.values
            clock.lap("shadow")
            for name, writer, data in ((f"frame_{t:04d}.ppm", write_ppm, frame_out.color),
                                       (f"visibility_{t:04d}.pgm", write_pgm, history)):
                writer(out / name, data)
                files.append(name)
            clock.lap("write")
        rep = clock.report()
        rep["frame"] = t
        if render:
            rep["max_march_steps"] = frame_out.max_steps_taken
        timings.append(rep)
        log.info("frame %d: %.3fs", t, rep["total"])
    for name, grid in (("coarse.sdf", coarse), ("fine.sdf", state.signed),
                       ("sign_front.sdf", ScalarGrid(state.f.spec, state.sign_front)),
                       ("sign_back.sdf", ScalarGrid(state.f.spec, state.sign_back))):
        write_sdf(grid, out / name)
        files.append(name)
    result = PipelineResult(out, cfg.frames, timings, files=files)
    if reference is None:
        reference = render and cfg.reference_spp > 0
    if reference:
        t = cfg.frames - 1
        t0 = time.perf_counter()
        ref = _stage("reference", t, render_reference, bvh, camera, cfg.reference_params())
        write_pgm(out / "reference.pgm", ref.values)
        files.append("reference.pgm")
        if render:
            # metrics on the quantized images, so compare() on the files reproduces them
            result.metrics = compare(cfg, out / f"visibility_{t:04d}.pgm", out / "reference.pgm")
            (out / "metrics.json").write_text(json.dumps(result.metrics, indent=2, sort_keys=True))
            files.append("metrics.json")
        timings.append({"reference": time.perf_counter() - t0})
    (out / "timing.json").write_text(json.dumps(timings, indent=2))
    return result


def render_reference_only(cfg: RenderConfig, output_dir=None) -> Path:
    """Ground-truth visibility for the last frame of the animation."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = cfg.frames - 1
    instances = _stage("load", t, cfg.scene_instances)
    bvh = _stage("bvh", t, build_bvh, merge_meshes(_scene_at(instances, t)))
    ref = _stage("reference", t, render_reference, bvh, cfg.camera(), cfg.reference_params())
    path = out / "reference.pgm"
    write_pgm(path, ref.values)
    return path


def compare(cfg: Optional[RenderConfig], sdf_image, ref_image) -> dict:
    """Metrics between two visibility images on disk."""
    for p in (sdf_image, ref_image):
        if not Path(p).is_file():
            raise FileNotFoundError(f"image not found: {p}")
    a = read_netpbm(sdf_image)
    b = read_netpbm(ref_image)
    if a.ndim == 3:
        a = a.mean(axis=-1)
    if b.ndim == 3:
        b = b.mean(axis=-1)
    frames = cfg.frames if cfg is not None else 0
    tau = cfg.penumbra_tau if cfg is not None else 0.05
    chash = cfg.config_hash() if cfg is not None else ""
    return metrics(a, b, frames, chash, tau)


def bench(cfg: RenderConfig, resolutions, frames: int = 2) -> list[dict]:
    """Mean per-stage timings of SDF construction for a sweep of coarse resolutions."""
    rows = []
    for res in resolutions:
        c = with_overrides(cfg, coarse_resolution=int(res), frames=frames, reference_spp=0)
        tmp = Path(cfg.output_dir) / f"bench_{res}"
        result = run_pipeline(c, render=True, output_dir=tmp)
        per_frame = [r for r in result.timings if "stages" in r]
        # the first frame carries compilation cost, so drop it when we can
        if len(per_frame) > 1:
            per_frame = per_frame[1:]
        stages = {}
        for r in per_frame:
            for k, v in r["stages"].items():
                stages[k] = stages.get(k, 0.0) + v / len(per_frame)
        rows.append({"coarse_resolution": int(res), "stages": stages,
                     "total": sum(stages.values())})
    return rows
