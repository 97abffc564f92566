"""Smoke tests for the python bindings: each major pipeline stage runs and
produces sane values through the numpy interface."""

import math

import numpy as np
import pytest

import meshfit as mf


@pytest.fixture(scope="module")
def sphere_grid():
    return mf.bake_analytic_grid("sphere:0.5", 32)


@pytest.fixture(scope="module")
def sphere_mesh(sphere_grid):
    return mf.extract_mesh(sphere_grid)


def test_analytic_sdf_values():
    assert mf.analytic_sdf("sphere:0.5", np.array([0.0, 0.0, 0.0])) == pytest.approx(-0.5)
    assert mf.analytic_sdf("torus:0.5,0.2", np.array([0.5, 0.0, 0.0])) == pytest.approx(-0.2)


def test_field_queries_and_bake():
    field = mf.make_sdf_field(plane_res=16, channels=8, hidden=[16, 16], seed=3)
    p = np.array([0.1, -0.2, 0.3])
    feats = mf.sample_triplane(field, p)
    assert feats.shape == (8,)
    value = mf.query_sdf(field, p)
    grad = mf.sdf_gradient(field, p)
    h = 1e-6
    fd = (
        mf.query_sdf(field, p + np.array([h, 0, 0]))
        - mf.query_sdf(field, p - np.array([h, 0, 0]))
    ) / (2 * h)
    assert grad[0] == pytest.approx(fd, rel=1e-4)
    grid = mf.bake_sdf_grid(field, 8)
    assert grid.values.shape == (8, 8, 8)
    assert grid.values[0, 0, 0] == pytest.approx(value, abs=100)  # finite values


def test_extraction_and_metrics(sphere_grid, sphere_mesh):
    verts = sphere_mesh.vertices
    assert sphere_mesh.num_faces > 1000
    radii = np.linalg.norm(verts, axis=1)
    assert np.abs(radii - 0.5).max() < 1.5 * sphere_grid.cell_size()

    pts_a = mf.sample_surface_points(sphere_mesh, count=4000, seed=1)
    pts_b = mf.sample_surface_points(sphere_mesh, count=4000, seed=2)
    cd = mf.chamfer_distance(pts_a, pts_b)
    assert 0 < cd < 0.05
    assert mf.f1_score(pts_a, pts_b, tau=0.1) == pytest.approx(1.0)


def test_raster_and_shading(sphere_mesh):
    cam = mf.Camera.look_at(
        np.array([0.0, 0.4, 2.4]),
        np.array([0.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
        math.radians(40),
        48,
        48,
    )
    zeta = mf.camera_embedding(cam)
    assert zeta.shape == (16,)
    gb = mf.rasterize_gbuffer(sphere_mesh, cam)
    mask = np.asarray(gb.mask)[..., 0]
    assert 100 < mask.sum() < 48 * 48

    env = mf.EnvironmentMap.constant(np.array([1.0, 1.0, 1.0]), 8)
    diff = mf.render_diffuse(gb, env, mf.Material.clamped(0.0, 0.5), seed=1, samples=32)
    fg = mask > 0.5
    assert np.allclose(diff[fg], 1.0, atol=1e-9)


def test_losses_and_psnr():
    rng = np.random.default_rng(5)
    a = rng.random((48, 48, 3))
    b = np.clip(a + 0.1, 0.0, 10.0)
    mse, proxy, total = mf.rgb_loss(b, a)
    assert mse == pytest.approx(0.01, rel=1e-9)
    assert proxy >= 0.0
    n = rng.standard_normal((8, 8, 3))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    mask = np.ones((8, 8, 1))
    assert mf.normal_loss(n, n, mask) == pytest.approx(0.0)
    assert mf.psnr(a, a) == pytest.approx(99.0)
    stats = mf.normal_benchmark([n], [n], [mask])
    assert stats["pct_below_30"] == pytest.approx(100.0)


def test_micro_fit_runs():
    cfg = mf.GeometryFitConfig()
    cfg.grid_res = 12
    cfg.plane_res = 8
    cfg.channels = 4
    cfg.hidden = [12]
    cfg.iters = 5
    cfg.eik_samples = 256
    cfg.sdf_batch = 512
    cfg.warmstart_iters = 20
    cfg.threads = 1
    res = mf.fit_geometry(cfg)
    assert not res.diverged
    assert len(res.trace) == 5
    assert res.trace[-1].total > 0.0

    noisy = mf.perturb_normals(
        np.tile(np.array([0.0, 0.0, 1.0]), (16, 16, 1)), sigma=0.1, seed=3
    )
    norms = np.linalg.norm(noisy, axis=-1)
    assert np.allclose(norms, 1.0, atol=1e-6)
