import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sphere():
    from hybridsdf.scenes import icosphere

    return icosphere(3)


@pytest.fixture(scope="session")
def sphere_bvh(sphere):
    from hybridsdf.geometry import build_bvh

    return build_bvh(sphere)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sphere_plane_run(tmp_path_factory):
    """The bundled sphere-over-plane config, rendered once per session."""
    import json
    import time

    from hybridsdf.netpbm import read_netpbm
    from hybridsdf.pipeline import load_config, run_pipeline
    from hybridsdf.scenes import DATA_DIR

    cfg = load_config(DATA_DIR / "sphere_plane" / "config.toml")
    out = tmp_path_factory.mktemp("sphere_plane")
    t0 = time.perf_counter()
    res = run_pipeline(cfg, output_dir=out)
    elapsed = time.perf_counter() - t0
    last = cfg.frames - 1
    return {
        "config": cfg,
        "result": res,
        "elapsed": elapsed,
        "sdf": read_netpbm(out / f"visibility_{last:04d}.pgm"),
        "ref": read_netpbm(out / "reference.pgm"),
        "metrics": json.loads((out / "metrics.json").read_text()),
        "out": out,
    }
