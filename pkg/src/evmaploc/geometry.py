"""Rigid transforms, pinhole projection and depth-map rendering.

Poses are camera-to-world throughout: ``pose.apply(p_cam)`` gives world
coordinates, and rendering applies the inverse internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels

Z_MIN = 0.1
EMPTY = -1  # point_index sentinel


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------
def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """Shepperd's method; returns (w, x, y, z) with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.asarray(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def rotvec_to_matrix(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    K = skew(w)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return np.eye(3) + np.sin(theta) / theta * K + (1 - np.cos(theta)) / theta**2 * K @ K


def rotvec_to_quat(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        q = np.array([1.0, 0.5 * w[0], 0.5 * w[1], 0.5 * w[2]])
        return q / np.linalg.norm(q)
    axis = w / theta
    return np.concatenate([[np.cos(theta / 2)], np.sin(theta / 2) * axis])


def axis_rotation(axis: str, angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)
    raise ValueError(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform stored as a unit quaternion (w, x, y, z) and a translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float).reshape(4)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        n = np.linalg.norm(q)
        if n == 0:
            raise ValueError("zero quaternion")
        # leave already-normalised input untouched so file round-trips stay exact
        if abs(n - 1.0) > 1e-12:
            q = q / n
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> PoseSE3:
        return cls()

    @classmethod
    def from_matrix(cls, T) -> PoseSE3:
        T = np.asarray(T, dtype=float)
        return cls(matrix_to_quat(T[:3, :3]), T[:3, 3])

    @classmethod
    def from_rt(cls, R, t) -> PoseSE3:
        return cls(matrix_to_quat(R), t)

    @classmethod
    def from_rotvec(cls, rotvec, t=(0.0, 0.0, 0.0)) -> PoseSE3:
        return cls(rotvec_to_quat(rotvec), t)

    @property
    def R(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    @property
    def t(self) -> np.ndarray:
        return self.translation

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> PoseSE3:
        q = self.rotation * np.array([1.0, -1.0, -1.0, -1.0])
        return PoseSE3(q, -(quat_to_matrix(q) @ self.translation))

    def compose(self, other: PoseSE3) -> PoseSE3:
        """``self * other``: apply ``other`` first, then ``self``."""
        return PoseSE3(
            quat_multiply(self.rotation, other.rotation),
            self.R @ other.translation + self.translation,
        )

    __matmul__ = compose

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.R.T + self.translation

    def __eq__(self, other):
        if not isinstance(other, PoseSE3):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        q = ", ".join(f"{v:.6g}" for v in self.rotation)
        t = ", ".join(f"{v:.6g}" for v in self.translation)
        return f"PoseSE3(q=[{q}], t=[{t}])"


def interpolate_pose(a: PoseSE3, b: PoseSE3, s: float) -> PoseSE3:
    """Slerp on rotation, linear on translation."""
    qa, qb = a.rotation, b.rotation
    d = float(np.dot(qa, qb))
    if d < 0:
        qb, d = -qb, -d
    if d > 0.9995:
        q = qa + s * (qb - qa)
    else:
        th = np.arccos(d)
        q = (np.sin((1 - s) * th) * qa + np.sin(s * th) * qb) / np.sin(th)
    return PoseSE3(q / np.linalg.norm(q), (1 - s) * a.translation + s * b.translation)


# ---------------------------------------------------------------------------
# camera
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def scaled(self, width: int, height: int) -> CameraIntrinsics:
        sx, sy = width / self.width, height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite coordinates")
    return pts


def world_to_camera(points, pose: PoseSE3) -> np.ndarray:
    """Map world points into the frame of a camera whose camera-to-world pose is ``pose``."""
    pts = np.asarray(points, dtype=float)
    return (pts - pose.translation) @ pose.R


def camera_to_world(points, pose: PoseSE3) -> np.ndarray:
    return pose.apply(points)


def project(point_cam, K: CameraIntrinsics, z_min: float = Z_MIN):
    """Project one camera-frame point. Returns ``(u, v, depth)`` or None when behind the camera."""
    X, Y, Z = (float(c) for c in point_cam)
    if Z <= z_min:
        return None
    return (K.fx * X / Z + K.cx, K.fy * Y / Z + K.cy, Z)


def project_points(points_cam, K: CameraIntrinsics, z_min: float = Z_MIN):
    """Vectorised :func:`project`. Returns ``(uv, z, in_front)``; ``uv`` is NaN behind the camera."""
    P = np.asarray(points_cam, dtype=float)
    z = P[:, 2]
    front = z > z_min
    uv = np.full((len(P), 2), np.nan)
    zf = z[front]
    uv[front, 0] = K.fx * P[front, 0] / zf + K.cx
    uv[front, 1] = K.fy * P[front, 1] / zf + K.cy
    return uv, z, front


def backproject(u, v, depth, K: CameraIntrinsics) -> np.ndarray:
    u, v, depth = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(depth, float))
    X = (u - K.cx) / K.fx * depth
    Y = (v - K.cy) / K.fy * depth
    return np.stack([X, Y, depth], axis=-1)


# ---------------------------------------------------------------------------
# depth maps
# ---------------------------------------------------------------------------
@dataclass
class DepthMap:
    """Z-buffered rendering of a point cloud.

    ``depth`` is metric Z (0 = empty); ``point_index`` refers back into the
    source cloud (``EMPTY`` where nothing landed); ``uv`` holds the
    sub-pixel projection of the winning point (NaN where empty); ``points``
    is the source cloud itself (shared, not copied).
    """

    depth: np.ndarray
    point_index: np.ndarray
    uv: np.ndarray
    pose_used: PoseSE3
    intrinsics: CameraIntrinsics
    points: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.point_index != EMPTY

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def copy(self) -> DepthMap:
        return DepthMap(self.depth.copy(), self.point_index.copy(), self.uv.copy(), self.pose_used,
                        self.intrinsics, self.points)

    def world_points(self) -> np.ndarray:
        """Source points referenced by the valid pixels, in row-major pixel order."""
        return self.points[self.point_index[self.valid]]


def render_depth_map(points, pose: PoseSE3, K: CameraIntrinsics, z_min: float = Z_MIN) -> DepthMap:
    pts = as_points(points)
    cam = world_to_camera(pts, pose)
    uv, z, front = project_points(cam, K, z_min)
    idx = np.flatnonzero(front)
    # round half up to the nearest pixel
    px = np.floor(uv[idx, 0] + 0.5)
    py = np.floor(uv[idx, 1] + 0.5)
    inside = (px >= 0) & (px < K.width) & (py >= 0) & (py < K.height)
    idx = idx[inside]
    pix = (py[inside].astype(np.int64) * K.width + px[inside].astype(np.int64))
    depth, point_index = kernels.zbuffer(pix, z[idx], idx.astype(np.int64), K.width * K.height)
    depth = depth.reshape(K.height, K.width)
    point_index = point_index.reshape(K.height, K.width)
    out_uv = np.full((K.height, K.width, 2), np.nan)
    valid = point_index != EMPTY
    out_uv[valid] = uv[point_index[valid]]
    return DepthMap(depth, point_index, out_uv, pose, K, pts)


def remove_occluded(dm: DepthMap, window_radius: int = 4, ratio: float = 1.3) -> DepthMap:
    """Clear pixels that have a much nearer valid neighbour within ``window_radius``.

    A pixel of depth d is dropped when some valid pixel in its
    (2*window_radius+1)^2 window has depth d' with d' * ratio < d. The test
    runs against the input map only, so applying it twice changes nothing.
    """
    if window_radius < 1:
        raise ValueError("window_radius must be >= 1")
    if ratio <= 1:
        raise ValueError("ratio must be > 1")
    valid = dm.valid
    d = np.where(valid, dm.depth, np.inf)
    nearest = ndimage.minimum_filter(d, size=2 * window_radius + 1, mode="constant", cval=np.inf)
    occluded = valid & (nearest * ratio < dm.depth)
    out = dm.copy()
    out.depth[occluded] = 0.0
    out.point_index[occluded] = EMPTY
    out.uv[occluded] = np.nan
    return out
