"""Ground-truth event-depth flow, masked end-point error and bias compensation.

Flow lives on the pixel grid of the depth map rendered at the initial pose:
at a valid pixel it is the ground-truth projection of the referenced map
point minus that point's (sub-pixel) projection under the initial pose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formats
from .geometry import (
    EMPTY, Z_MIN, CameraIntrinsics, DepthMap, PoseSE3, project_points,
    remove_occluded, render_depth_map, world_to_camera,
)


class UndefinedLossError(ValueError):
    """The mask selects no pixels."""


@dataclass
class FlowField:
    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        self.du = np.asarray(self.du, dtype=np.float64)
        self.dv = np.asarray(self.dv, dtype=np.float64)
        if self.du.shape != self.dv.shape or self.du.ndim != 2:
            raise ValueError("du and dv must be equal-shaped 2-D arrays")

    @classmethod
    def zeros(cls, height, width) -> FlowField:
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @property
    def height(self):
        return self.du.shape[0]

    @property
    def width(self):
        return self.du.shape[1]

    @property
    def shape(self):
        return self.du.shape

    def stacked(self) -> np.ndarray:
        return np.stack([self.du, self.dv], axis=-1)

    def copy(self) -> FlowField:
        return FlowField(self.du.copy(), self.dv.copy())


@dataclass(frozen=True)
class OcclusionConfig:
    window_radius: int = 4
    ratio: float = 1.3
    enabled: bool = True


def render_visible(points, pose: PoseSE3, K: CameraIntrinsics, occlusion: OcclusionConfig = OcclusionConfig(),
                   z_min: float = Z_MIN) -> DepthMap:
    dm = render_depth_map(points, pose, K, z_min)
    if occlusion.enabled:
        dm = remove_occluded(dm, occlusion.window_radius, occlusion.ratio)
    return dm


def flow_from_depth_map(dm: DepthMap, T_target: PoseSE3, K: CameraIntrinsics,
                        z_min: float = Z_MIN, require_in_frame: bool = False):
    """Flow from ``dm`` (rendered at its ``pose_used``) to the projections under ``T_target``."""
    pts = dm.points
    H, W = dm.shape
    flow = FlowField.zeros(H, W)
    mask = np.zeros((H, W), dtype=bool)
    rows, cols = np.nonzero(dm.valid)
    if len(rows) == 0:
        return flow, mask
    idx = dm.point_index[rows, cols]
    uv_t, _, front = project_points(world_to_camera(pts[idx], T_target), K, z_min)
    ok = front
    if require_in_frame:
        ok = ok & (uv_t[:, 0] >= 0) & (uv_t[:, 0] < K.width) & (uv_t[:, 1] >= 0) & (uv_t[:, 1] < K.height)
    rows, cols, uv_t = rows[ok], cols[ok], uv_t[ok]
    src = dm.uv[rows, cols]
    flow.du[rows, cols] = uv_t[:, 0] - src[:, 0]
    flow.dv[rows, cols] = uv_t[:, 1] - src[:, 1]
    mask[rows, cols] = True
    return flow, mask


def gt_flow(points, T_gt: PoseSE3, T_init: PoseSE3, K: CameraIntrinsics,
            occlusion: OcclusionConfig = OcclusionConfig(), require_in_frame: bool = False,
            z_min: float = Z_MIN):
    """Ground-truth flow ``pi(P, T_gt) - pi(P, T_init)`` anchored on the initial-pose depth map.

    Returns ``(FlowField, mask)``.
    """
    dm = render_visible(points, T_init, K, occlusion, z_min)
    return flow_from_depth_map(dm, T_gt, K, z_min, require_in_frame)


def compensated_gt_flow(points, T_gt: PoseSE3, T_au: PoseSE3, T_init: PoseSE3, K: CameraIntrinsics,
                        occlusion: OcclusionConfig = OcclusionConfig(), require_in_frame: bool = False,
                        z_min: float = Z_MIN):
    """Like :func:`gt_flow` with the target pose ``T_gt @ T_au``."""
    return gt_flow(points, T_gt @ T_au, T_init, K, occlusion, require_in_frame, z_min)


def masked_epe_loss(f_pre: FlowField, f_gt: FlowField, mask) -> float:
    """Mean end-point error over masked pixels."""
    m = np.asarray(mask, dtype=bool)
    n = int(m.sum())
    if n == 0:
        raise UndefinedLossError("mask is empty; loss undefined")
    epe = np.hypot(f_pre.du[m] - f_gt.du[m], f_pre.dv[m] - f_gt.dv[m])
    return float(epe.sum() / n)


def estimate_bias(f_pre: FlowField, mask, dm: DepthMap, T_gt: PoseSE3, K: CameraIntrinsics,
                  cfg=None) -> PoseSE3:
    """Auxiliary pose ``T_au`` such that ``T_gt @ T_au`` best explains ``f_pre``.

    Solves robust PnP on (map point, anchor + predicted flow) pairs, then
    expresses the solution relative to ``T_gt``.
    """
    from .solver import InsufficientCorrespondencesError, PnPConfig, flow_to_correspondences, solve_pnp

    corr = flow_to_correspondences(dm, f_pre, mask)
    if len(corr) < 6:
        raise InsufficientCorrespondencesError(f"bias estimation needs >= 6 masked pixels, got {len(corr)}")
    pose, _ = solve_pnp(corr, K, cfg or PnPConfig())
    return T_gt.inverse() @ pose


def save_flow(path, flow: FlowField, mask=None) -> None:
    formats.write_flow(path, flow.du, flow.dv, mask)


def load_flow(path, expected_shape=None):
    du, dv, mask = formats.read_flow(path, expected_shape)
    return FlowField(du, dv), mask


__all__ = [
    "EMPTY", "FlowField", "OcclusionConfig", "UndefinedLossError", "compensated_gt_flow",
    "estimate_bias", "flow_from_depth_map", "gt_flow", "load_flow", "masked_epe_loss",
    "render_visible", "save_flow",
]
