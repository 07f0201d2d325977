import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridsdf.geometry import build_bvh, exact_distances
from hybridsdf.jumpflood import JfaParams, ScalarGrid, coarse_sdf, jfa_flood
from hybridsdf.refine import (FineSdfState, RefineParams, accumulate_fine, build_fine_sdf,
                              ray_directions, select_refine_mask, trace_distance_sample,
                              trace_samples, update_sign)
from hybridsdf.rng import uniform_py
from hybridsdf.voxelizer import GridSpec, voxelize


def grid1(value):
    spec = GridSpec((2, 2, 2), (0, 0, 0), 1.0)
    return ScalarGrid(spec, np.full((2, 2, 2), float(value)))


def params(spec, d=1.0, alpha=0.9, rays=8, seed=0):
    return RefineParams(d=d, alpha=alpha, rays_per_texel=rays, fine_spec=spec, rng_seed=seed)


def coarse_for(mesh, res):
    spec = GridSpec.fit(*mesh.aabb(), res)
    c = coarse_sdf(jfa_flood(voxelize([mesh], spec)), JfaParams(0.5 * spec.voxel_size))
    return spec, c


# --- update arithmetic -------------------------------------------------------------------


def test_blend_example():
    c = grid1(0.5)
    f = accumulate_fine(grid1(1.0), c, np.full((2, 2, 2), 0.8), None, params(c.spec))
    assert np.all(f.values == 0.8)
    # without a ray sample the blended branch wins: 0.9 * 1.0 + 0.1 * 0.5
    f = accumulate_fine(grid1(1.0), c, np.full((2, 2, 2), np.inf), None, params(c.spec))
    assert np.all(f.values == 0.9 * 1.0 + (1 - 0.9) * 0.5)


def test_far_texels_pass_coarse_through():
    c = grid1(2.0)
    f = accumulate_fine(grid1(0.1), c, np.full((2, 2, 2), 0.05), None, params(c.spec))
    assert np.all(f.values == 2.0)


def test_alpha_one_is_running_min():
    c = grid1(0.5)
    p = params(c.spec, alpha=1.0)
    f = grid1(0.9)
    seq = [0.95, 0.7, 0.8, np.inf, 0.6]
    vals = []
    for r in seq:
        f = accumulate_fine(f, c, np.full((2, 2, 2), r), None, p)
        vals.append(f.values[0, 0, 0])
    assert vals == [0.9, 0.7, 0.7, 0.7, 0.6]


def test_first_frame_without_history():
    c = grid1(-0.3)
    p = params(c.spec)
    f = accumulate_fine(None, c, np.array([[[0.4, np.inf]] * 2] * 2), None, p)
    assert f.values[0, 0, 0] == 0.4 and np.isinf(f.values[0, 0, 1])
    # alpha = 0 has no history at all: the coarse magnitude competes with the sample
    f = accumulate_fine(None, c, np.full((2, 2, 2), 0.4), None, params(c.spec, alpha=0.0))
    assert np.all(f.values == 0.3)


def test_shape_mismatch():
    c = grid1(0.5)
    with pytest.raises(ValueError):
        accumulate_fine(None, c, np.zeros((3, 2, 2)), None, params(c.spec))


finite = st.floats(0.0, 5.0, allow_nan=False)


@given(st.lists(st.tuples(st.floats(-1.0, 3.0), finite, st.one_of(finite, st.just(math.inf))),
                min_size=8, max_size=8),
       st.floats(0.0, 1.0), st.floats(0.1, 2.0))
def test_branch_exactness_and_bounds(cells, alpha, d):
    c = np.array([x[0] for x in cells]).reshape(2, 2, 2)
    fp = np.array([x[1] for x in cells]).reshape(2, 2, 2)
    r = np.array([x[2] for x in cells]).reshape(2, 2, 2)
    spec = GridSpec((2, 2, 2), (0, 0, 0), 0.05)
    p = params(spec, d=d, alpha=alpha)
    f = accumulate_fine(ScalarGrid(spec, fp), ScalarGrid(spec, c), r, None, p).values
    far = c > d
    assert np.array_equal(f[far], c[far])
    near = ~far
    assert np.all(f[near] <= r[near])
    assert np.all(f[near] >= 0)
    if alpha == 1.0:
        assert np.all(f[near] <= fp[near])


# --- sign vote ----------------------------------------------------------------------------


def state_with(f, c, mask):
    spec = f.spec
    z = np.zeros(spec.resolution)
    return FineSdfState(f=f, sign_front=z, sign_back=z.copy(), frame=1, mask=mask, coarse=c,
                        signed=c)


def test_sign_front_majority_positive():
    f, c = grid1(0.3), grid1(0.2)
    s = update_sign(state_with(f, c, np.ones((2, 2, 2), bool)), np.full((2, 2, 2), 10),
                    np.zeros((2, 2, 2)), 0.9)
    assert np.all(s.signed.values == 0.3)


def test_sign_tie_positive_back_majority_negative():
    f, c = grid1(0.3), grid1(0.2)
    mask = np.ones((2, 2, 2), bool)
    s = update_sign(state_with(f, c, mask), np.full((2, 2, 2), 4), np.full((2, 2, 2), 4), 0.9)
    assert np.all(s.signed.values == 0.3)
    s = update_sign(s, np.zeros((2, 2, 2)), np.full((2, 2, 2), 1), 0.9)
    # 0.9 * 4 + 1 > 0.9 * 4
    assert np.all(s.signed.values == -0.3)
    assert s.sign_back[0, 0, 0] == pytest.approx(4.6)


def test_sign_outside_mask_keeps_coarse():
    f, c = grid1(0.3), grid1(-0.2)
    s = update_sign(state_with(f, c, np.zeros((2, 2, 2), bool)), np.zeros((2, 2, 2)),
                    np.full((2, 2, 2), 5), 1.0)
    assert np.all(s.signed.values == -0.2)


# --- mask ---------------------------------------------------------------------------------


def test_mask_empty_scene():
    spec = GridSpec((4, 4, 4), (0, 0, 0), 1.0)
    c = ScalarGrid(spec, np.full((4, 4, 4), np.inf))
    assert not select_refine_mask(c, params(spec.refined(2))).any()


def test_mask_huge_d(sphere):
    spec, c = coarse_for(sphere, 16)
    fine = spec.refined(2)
    assert select_refine_mask(c, params(fine, d=100.0)).all()


def test_mask_shell_matches_oracle(sphere):
    spec, c = coarse_for(sphere, 32)
    fine = spec.refined(2)
    d = 3 * fine.voxel_size
    mask = select_refine_mask(c, params(fine, d=d))
    ex = exact_distances(sphere, fine.centers().reshape(-1, 3)).reshape(fine.resolution)
    # coarse error: seed quantization plus beta plus trilinear blur, all within this band
    band = spec.voxel_size * (0.5 + math.sqrt(3))
    assert mask[ex <= d - band].all()
    assert not mask[ex > d + band].any()
    assert 0 < mask.sum() < mask.size


# --- tracing ------------------------------------------------------------------------------


def test_directions_are_uniform_unit_and_pure():
    d = ray_directions(5, 123, 7, 4000)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.array_equal(d, ray_directions(5, 123, 7, 4000))
    assert not np.array_equal(d, ray_directions(5, 123, 8, 4000))
    assert np.abs(d.mean(axis=0)).max() < 0.05
    # z = 2 u1 - 1 with the documented key layout
    assert d[3, 2] == pytest.approx(2 * uniform_py(5, 123, 7, 6) - 1)


def test_inside_closed_mesh_only_back_hits(sphere_bvh):
    r, front, back = trace_distance_sample(sphere_bvh, (0.1, -0.2, 0.3), 64, seed=1)
    assert front == 0 and back == 64
    assert r <= 1.0


def test_aimed_ray_bounds(sphere, sphere_bvh):
    p = np.array([0.0, 0.0, 2.0])
    # find a stream key whose rays include one aimed at the center
    key = next(k for k in range(20000) if ray_directions(0, k, 0, 8)[:, 2].min() < -0.999)
    r, front, back = trace_distance_sample(sphere_bvh, p, 8, seed=0, texel=key)
    assert exact_distance_ok(sphere, p, r)
    assert r <= 1.0 + 0.05 and front >= 1


def exact_distance_ok(mesh, p, r):
    return r >= exact_distances(mesh, p[None])[0] - 1e-6


def test_many_rays_approach_exact(sphere, sphere_bvh, rng):
    pts = rng.normal(size=(40, 3))
    pts *= (rng.uniform(1.05, 1.3, 40) / np.linalg.norm(pts, axis=1))[:, None]
    r, _, _ = trace_samples(sphere_bvh, pts, np.arange(40), 0, 4096, 3)
    ex = exact_distances(sphere, pts)
    assert np.all(r >= ex - 1e-9)
    assert np.percentile(r - ex, 99) <= 0.02


def test_all_miss_is_inf():
    from hybridsdf.scenes import quad

    bvh = build_bvh(quad((0, 0, 0), (1, 0, 0), (0, 1, 0)))
    r, f, b = trace_distance_sample(bvh, (50.0, 50.0, 50.0), 4)
    assert r == math.inf and f == b == 0


# --- orchestration ------------------------------------------------------------------------


def test_empty_scene_passes_coarse():
    spec = GridSpec((4, 4, 4), (0, 0, 0), 1.0)
    c = ScalarGrid(spec, np.full((4, 4, 4), np.inf))
    s = build_fine_sdf(None, c, None, params(spec.refined(2), d=2.0))
    assert np.all(np.isinf(s.signed.values)) and s.rays_traced == 0 and s.frame == 1


def test_static_sphere_monotone_and_sound(sphere, sphere_bvh):
    spec, c = coarse_for(sphere, 16)
    fine = spec.refined(2)
    p = params(fine, d=4 * fine.voxel_size, alpha=1.0, seed=11)
    s = None
    prev = None
    for _ in range(6):
        s = build_fine_sdf(sphere_bvh, c, s, p)
        f = s.f.values[s.mask]
        if prev is not None:
            assert np.all(f <= prev)
        prev = f
    ex = exact_distances(sphere, fine.centers()[s.mask])
    ok = np.isfinite(prev)
    assert np.all(prev[ok] >= ex[ok] - 1e-6)
    assert s.frame == 6 and s.sign_front.min() >= 0


def test_fine_must_refine_coarse():
    coarse = GridSpec((4, 4, 4), (0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        params(GridSpec((6, 6, 6), (0, 0, 0), 0.7)).validate(coarse)
    with pytest.raises(ValueError):
        params(coarse.refined(2), d=0.1).validate(coarse)
    with pytest.raises(ValueError):
        params(coarse.refined(2), alpha=1.5).validate(coarse)


def test_thread_count_does_not_change_fine_sdf(sphere, sphere_bvh):
    import numba

    from hybridsdf.geometry import set_threads

    spec, c = coarse_for(sphere, 12)
    p = params(spec.refined(2), d=0.3, seed=9)
    a = build_fine_sdf(sphere_bvh, c, None, p)
    prev = numba.get_num_threads()
    try:
        set_threads(1)
        b = build_fine_sdf(sphere_bvh, c, None, p)
    finally:
        set_threads(prev)
    assert np.array_equal(a.signed.values, b.signed.values)
