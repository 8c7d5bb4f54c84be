import numpy as np
import pytest
from conftest import random_pose

from evmaploc.geometry import CameraIntrinsics, PoseSE3, project_points, render_depth_map
from evmaploc.solver import (
    CorrespondenceSet, DegenerateGeometryError, InsufficientCorrespondencesError, NoConsensusError, PnPConfig,
    flow_to_correspondences, huber_cost, p3p, refine_pose, reprojection_error, reprojection_errors, solve_pnp,
)
from evmaploc.supervision import FlowField


def _angle_deg(P):
    return np.degrees(2 * np.arctan2(np.linalg.norm(P.rotation[1:]), abs(P.rotation[0])))


def _pose_err(a, b):
    d = a.inverse() @ b
    return np.linalg.norm(a.t - b.t), _angle_deg(d)


def scene_correspondences(rng, K, n=100, pose=None):
    """Points in front of ``pose`` and their exact projections."""
    pose = pose or random_pose(rng, 2.0)
    cam = np.column_stack([rng.uniform(-2, 2, n), rng.uniform(-1.5, 1.5, n), rng.uniform(2, 8, n)])
    world = pose.apply(cam)
    uv, _, _ = project_points(cam, K)
    return CorrespondenceSet(world, uv), pose


# ---------------------------------------------------------------- correspondences
def test_correspondence_set_validation():
    with pytest.raises(ValueError):
        CorrespondenceSet(np.zeros((3, 3)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CorrespondenceSet([[0, 0, np.inf]], [[0, 0]])


def test_zero_flow_returns_anchor_pixels(room):
    dm = render_depth_map(room.points, room.poses[0], room.intrinsics)
    c = flow_to_correspondences(dm, FlowField.zeros(*dm.shape))
    assert len(c) == dm.valid.sum()
    np.testing.assert_array_equal(c.pixels, dm.uv[dm.valid])
    rows, cols = np.nonzero(dm.valid)
    np.testing.assert_array_equal(np.floor(c.pixels + 0.5), np.column_stack([cols, rows]))


def test_single_pixel_flow_addition():
    K = CameraIntrinsics(100, 100, 10, 20, 40, 40)
    dm = render_depth_map([[0, 0, 3.0]], PoseSE3.identity(), K)
    assert dm.valid[20, 10]
    f = FlowField.zeros(40, 40)
    f.du[20, 10], f.dv[20, 10] = 2, -3
    c = flow_to_correspondences(dm, f)
    np.testing.assert_allclose(c.pixels, [[12, 17]])
    np.testing.assert_array_equal(c.world, [[0, 0, 3.0]])


def test_margin_drop_matches_loop_oracle(room, rng):
    dm = render_depth_map(room.points, room.poses[1], room.intrinsics)
    H, W = dm.shape
    f = FlowField(rng.uniform(-300, 300, (H, W)), rng.uniform(-300, 300, (H, W)))
    mask = rng.random((H, W)) < 0.5
    c = flow_to_correspondences(dm, f, mask, margin=50)
    expected = 0
    for y, x in zip(*np.nonzero(dm.valid & mask)):
        u, v = dm.uv[y, x, 0] + f.du[y, x], dm.uv[y, x, 1] + f.dv[y, x]
        expected += (-50 <= u < W + 50) and (-50 <= v < H + 50)
    assert len(c) == expected


def test_flow_shape_mismatch(room):
    dm = render_depth_map(room.points, room.poses[0], room.intrinsics)
    with pytest.raises(ValueError):
        flow_to_correspondences(dm, FlowField.zeros(3, 3))


# ---------------------------------------------------------------- reprojection
def test_reprojection_examples():
    K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
    I = PoseSE3.identity()
    assert reprojection_error(([0, 0, 4], [320, 240]), I, K) == 0
    assert reprojection_error(([0, 0, 4], [323, 244]), I, K) == pytest.approx(5.0)
    assert reprojection_error(([0, 0, -4], [320, 240]), I, K) == np.inf


def test_huber_cost():
    assert huber_cost([1.0, 3.0], 2.0) == pytest.approx(0.5 + (6 - 2))
    assert huber_cost([np.inf], 2.0) == np.inf


# ---------------------------------------------------------------- minimal solver
def test_p3p_contains_true_pose(rng):
    K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
    for _ in range(50):
        c, pose = scene_correspondences(rng, K, 3)
        f = np.column_stack([(c.pixels[:, 0] - 320) / 500, (c.pixels[:, 1] - 240) / 500, np.ones(3)])
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        inv = pose.inverse()
        cands = p3p(c.world, f)
        assert any(np.abs(R - inv.R).max() < 1e-6 and np.abs(t - inv.t).max() < 1e-6 for R, t in cands)


# ---------------------------------------------------------------- robust PnP
def test_pnp_noise_free(rng, K):
    for _ in range(10):
        c, pose = scene_correspondences(rng, K)
        est, inl = solve_pnp(c, K)
        dt, dr = _pose_err(est, pose)
        assert dt < 1e-4 and dr < 1e-3
        assert inl.all()


def test_pnp_outliers(rng, K):
    c, pose = scene_correspondences(rng, K, 100)
    pix = c.pixels.copy()
    bad = rng.choice(100, 30, replace=False)
    pix[bad] = np.column_stack([rng.uniform(0, 640, 30), rng.uniform(0, 480, 30)])
    true_inl = np.ones(100, bool)
    true_inl[bad] = False
    # a random pixel can land near its true projection by chance
    true_inl |= np.hypot(*(pix - c.pixels).T) < 12
    est, inl = solve_pnp(CorrespondenceSet(c.world, pix), K)
    assert (inl & true_inl).sum() >= 0.95 * true_inl.sum()
    dt, dr = _pose_err(est, pose)
    assert dt < 1e-2 and dr < 0.05


def test_pnp_inliers_below_threshold(rng, K):
    c, _ = scene_correspondences(rng, K, 80)
    pix = c.pixels + rng.normal(0, 3, c.pixels.shape)
    cs = CorrespondenceSet(c.world, pix)
    cfg = PnPConfig(max_reprojection_error=6.0)
    est, inl = solve_pnp(cs, K, cfg)
    assert np.all(reprojection_errors(cs, est, K)[inl] < 6.0)


def test_pnp_deterministic(rng, K):
    c, _ = scene_correspondences(rng, K, 60)
    pix = c.pixels + rng.normal(0, 2, c.pixels.shape)
    pix[:15] += 80
    cs = CorrespondenceSet(c.world, pix)
    a, ia = solve_pnp(cs, K, PnPConfig(seed=7))
    b, ib = solve_pnp(cs, K, PnPConfig(seed=7))
    assert a == b
    np.testing.assert_array_equal(ia, ib)


def test_pnp_too_few(rng, K):
    c, _ = scene_correspondences(rng, K, 3)
    with pytest.raises(InsufficientCorrespondencesError):
        solve_pnp(c, K)


def test_pnp_collinear_points(K):
    world = np.column_stack([np.linspace(-1, 1, 10), np.zeros(10), np.full(10, 4.0)])
    uv, _, _ = project_points(world, K)
    with pytest.raises(DegenerateGeometryError):
        solve_pnp(CorrespondenceSet(world, uv), K, PnPConfig(max_iterations=50))


def test_pnp_no_consensus(rng, K):
    world = rng.uniform([-1, -1, 3], [1, 1, 6], (30, 3))
    pix = rng.uniform(0, 640, (30, 2)) * [1, 0.75]
    with pytest.raises(NoConsensusError):
        solve_pnp(CorrespondenceSet(world, pix), K, PnPConfig(max_reprojection_error=0.01, max_iterations=200))


def test_refinement_monotone(rng, K):
    c, pose = scene_correspondences(rng, K, 80)
    cs = CorrespondenceSet(c.world, c.pixels + rng.normal(0, 1.0, c.pixels.shape))
    start = pose @ PoseSE3.from_rotvec(np.radians([1.0, -1.0, 0.5]), [0.05, -0.03, 0.04])
    refined, hist = refine_pose(cs, start, K)
    assert all(b < a for a, b in zip(hist, hist[1:]))
    assert hist[-1] < hist[0]
    assert _pose_err(refined, pose)[0] < 0.05


def test_config_validation():
    with pytest.raises(ValueError):
        PnPConfig(max_reprojection_error=0)
    with pytest.raises(ValueError):
        PnPConfig(robust_loss="cauchy")
    with pytest.raises(ValueError):
        PnPConfig(confidence=1.0)
    assert PnPConfig().scale == 12.0
