import numpy as np
import pytest

from evmaploc.geometry import CameraIntrinsics, PoseSE3, project_points, world_to_camera
from evmaploc.solver import InsufficientCorrespondencesError
from evmaploc.supervision import (
    FlowField, OcclusionConfig, UndefinedLossError, compensated_gt_flow, estimate_bias, gt_flow, load_flow,
    masked_epe_loss, render_visible, save_flow,
)


def _angle_deg(P):
    return np.degrees(2 * np.arctan2(np.linalg.norm(P.rotation[1:]), abs(P.rotation[0])))


def small_pose(rng, t=0.2, deg=2.0):
    return PoseSE3.from_rotvec(np.radians(rng.uniform(-deg, deg, 3)), rng.uniform(-t, t, 3))


def test_flow_field_shape_checks():
    with pytest.raises(ValueError):
        FlowField(np.zeros((2, 3)), np.zeros((3, 2)))
    f = FlowField.zeros(4, 5)
    assert f.shape == (4, 5) and f.width == 5 and f.height == 4


def test_equal_poses_zero_flow(room):
    f, m = gt_flow(room.points, room.poses[0], room.poses[0], room.intrinsics)
    assert m.sum() > 500
    assert np.abs(f.du[m]).max() == 0 and np.abs(f.dv[m]).max() == 0


def test_lateral_translation_analytic():
    K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
    pts = np.array([[0.3, -0.2, 5.0], [-1.0, 0.5, 5.0]])
    T_gt = PoseSE3(translation=[0.1, 0, 0])
    f, m = gt_flow(pts, T_gt, PoseSE3.identity(), K)
    assert m.sum() == 2
    np.testing.assert_allclose(f.du[m], -500 * 0.1 / 5.0, atol=1e-6)
    np.testing.assert_allclose(f.dv[m], 0.0, atol=1e-6)


def test_gt_flow_matches_two_projection_oracle(room, rng):
    K = room.intrinsics
    for _ in range(3):
        T_init = room.poses[int(rng.integers(len(room.poses)))]
        T_gt = T_init @ small_pose(rng)
        f, m = gt_flow(room.points, T_gt, T_init, K)
        dm = render_visible(room.points, T_init, K)
        assert not (m & ~dm.valid).any()
        rows, cols = np.nonzero(m)
        P = room.points[dm.point_index[rows, cols]]
        a, _, _ = project_points(world_to_camera(P, T_gt), K)
        b, _, _ = project_points(world_to_camera(P, T_init), K)
        np.testing.assert_allclose(f.du[rows, cols], a[:, 0] - b[:, 0], atol=1e-9)
        np.testing.assert_allclose(f.dv[rows, cols], a[:, 1] - b[:, 1], atol=1e-9)


def test_mask_excludes_points_behind_target():
    K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
    pts = np.array([[0, 0, 1.0], [0.2, 0, 5.0]])
    T_gt = PoseSE3(translation=[0, 0, 2.0])  # camera moves past the near point
    f, m = gt_flow(pts, T_gt, PoseSE3.identity(), K)
    assert m.sum() == 1


def test_mask_respects_occlusion_setting(room):
    on = gt_flow(room.points, room.poses[1], room.poses[0], room.intrinsics)[1]
    off = gt_flow(room.points, room.poses[1], room.poses[0], room.intrinsics, OcclusionConfig(enabled=False))[1]
    assert on.sum() < off.sum()
    assert not (on & ~off).any()


def test_compensated_identity_equals_gt(room, rng):
    T_init = room.poses[2]
    T_gt = T_init @ small_pose(rng)
    a, ma = gt_flow(room.points, T_gt, T_init, room.intrinsics)
    b, mb = compensated_gt_flow(room.points, T_gt, PoseSE3.identity(), T_init, room.intrinsics)
    np.testing.assert_array_equal(ma, mb)
    assert np.abs(a.du - b.du).max() <= 1e-12 and np.abs(a.dv - b.dv).max() <= 1e-12


def test_compensated_back_to_init_is_zero(room, rng):
    T_init = room.poses[4]
    T_gt = T_init @ small_pose(rng)
    f, m = compensated_gt_flow(room.points, T_gt, T_gt.inverse() @ T_init, T_init, room.intrinsics)
    assert np.abs(f.du[m]).max() < 1e-9 and np.abs(f.dv[m]).max() < 1e-9


def test_compensated_uses_right_composition(room, rng):
    T_init = room.poses[5]
    T_gt, T_au = T_init @ small_pose(rng), small_pose(rng, 0.1, 1.0)
    a, _ = compensated_gt_flow(room.points, T_gt, T_au, T_init, room.intrinsics)
    b, _ = gt_flow(room.points, T_gt @ T_au, T_init, room.intrinsics)
    np.testing.assert_array_equal(a.du, b.du)


# ---------------------------------------------------------------- loss
def test_loss_examples(rng):
    gt = FlowField(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
    m = rng.random((8, 8)) < 0.5
    assert masked_epe_loss(gt, gt, m) == 0.0
    assert masked_epe_loss(FlowField(gt.du + 1, gt.dv), gt, m) == pytest.approx(1.0)


def test_loss_matches_loop_oracle(rng):
    for _ in range(20):
        a = FlowField(rng.normal(size=(6, 7)), rng.normal(size=(6, 7)))
        b = FlowField(rng.normal(size=(6, 7)), rng.normal(size=(6, 7)))
        m = rng.random((6, 7)) < 0.4
        m[0, 0] = True
        total, n = 0.0, 0
        for y in range(6):
            for x in range(7):
                if m[y, x]:
                    total += ((a.du[y, x] - b.du[y, x]) ** 2 + (a.dv[y, x] - b.dv[y, x]) ** 2) ** 0.5
                    n += 1
        assert masked_epe_loss(a, b, m) == pytest.approx(total / n, abs=1e-9)


def test_loss_ignores_unmasked(rng):
    a = FlowField(rng.normal(size=(6, 7)), rng.normal(size=(6, 7)))
    b = FlowField(rng.normal(size=(6, 7)), rng.normal(size=(6, 7)))
    m = rng.random((6, 7)) < 0.5
    base = masked_epe_loss(a, b, m)
    c = a.copy()
    c.du[~m] = rng.normal(size=(~m).sum()) * 1e6
    assert masked_epe_loss(c, b, m) == base


def test_loss_empty_mask():
    f = FlowField.zeros(3, 3)
    with pytest.raises(UndefinedLossError):
        masked_epe_loss(f, f, np.zeros((3, 3), bool))


# ---------------------------------------------------------------- bias
def test_bias_zero(room, rng):
    K = room.intrinsics
    T_init = room.poses[0]
    T_gt = T_init @ small_pose(rng)
    f, m = gt_flow(room.points, T_gt, T_init, K)
    dm = render_visible(room.points, T_init, K)
    T_au = estimate_bias(f, m, dm, T_gt, K)
    assert np.linalg.norm(T_au.t) < 1e-6 and _angle_deg(T_au) < 1e-5


def test_bias_round_trip(room, rng):
    K = room.intrinsics
    for k in range(3):
        T_init = room.poses[3 * k]
        T_gt = T_init @ small_pose(rng)
        T_bias = small_pose(rng, 0.2, 2.0)
        f, m = compensated_gt_flow(room.points, T_gt, T_bias, T_init, K)
        dm = render_visible(room.points, T_init, K)
        err = T_bias.inverse() @ estimate_bias(f, m, dm, T_gt, K)
        assert np.linalg.norm(err.t) < 1e-4 and _angle_deg(err) < 1e-3


def test_bias_needs_six_pixels(room):
    K = room.intrinsics
    dm = render_visible(room.points, room.poses[0], K)
    m = np.zeros(dm.shape, bool)
    m[np.nonzero(dm.valid)[0][:5], np.nonzero(dm.valid)[1][:5]] = True
    with pytest.raises(InsufficientCorrespondencesError):
        estimate_bias(FlowField.zeros(*dm.shape), m, dm, room.poses[0], K)


def test_save_load_flow(tmp_path, rng):
    f = FlowField(rng.normal(size=(4, 5)).astype(np.float32).astype(float),
                  rng.normal(size=(4, 5)).astype(np.float32).astype(float))
    m = rng.random((4, 5)) < 0.5
    save_flow(tmp_path / "x.flo", f, m)
    g, m2 = load_flow(tmp_path / "x.flo", (4, 5))
    np.testing.assert_array_equal(m2, m)
    np.testing.assert_array_equal(g.du[m], f.du[m])
