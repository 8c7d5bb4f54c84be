"""2D-3D correspondences from flow, and RANSAC-P3P pose estimation with Huber refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Z_MIN, CameraIntrinsics, DepthMap, PoseSE3, rotvec_to_matrix


class PnPError(RuntimeError):
    pass


class InsufficientCorrespondencesError(PnPError):
    pass


class NoConsensusError(PnPError):
    pass


class DegenerateGeometryError(PnPError):
    pass


@dataclass(frozen=True)
class CorrespondenceSet:
    world: np.ndarray  # (N, 3)
    pixels: np.ndarray  # (N, 2)

    def __post_init__(self):
        w = np.asarray(self.world, dtype=np.float64).reshape(-1, 3)
        p = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        if len(w) != len(p):
            raise ValueError("world points and pixels differ in count")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
            raise ValueError("correspondences must be finite")
        object.__setattr__(self, "world", w)
        object.__setattr__(self, "pixels", p)

    def __len__(self):
        return len(self.world)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return self.world[i], self.pixels[i]
        return CorrespondenceSet(self.world[i], self.pixels[i])


@dataclass(frozen=True)
class PnPConfig:
    max_reprojection_error: float = 12.0  # px
    robust_loss: str = "huber"
    huber_scale: float | None = None  # None: tie to max_reprojection_error
    max_iterations: int = 1000
    confidence: float = 0.999
    refine_iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.max_reprojection_error > 0:
            raise ValueError("max_reprojection_error must be positive")
        if self.robust_loss != "huber":
            raise ValueError(f"unsupported robust loss {self.robust_loss!r}")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")

    @property
    def scale(self) -> float:
        return self.max_reprojection_error if self.huber_scale is None else self.huber_scale


# ---------------------------------------------------------------------------
# correspondences
# ---------------------------------------------------------------------------
def flow_to_correspondences(dm: DepthMap, flow, mask=None, margin: float = 50.0) -> CorrespondenceSet:
    """Pair each valid depth pixel's map point with its anchor moved by the flow.

    The anchor is the sub-pixel projection stored in the depth map. Targets
    more than ``margin`` pixels outside the frame are dropped.
    """
    if flow.shape != dm.shape:
        raise ValueError(f"flow shape {flow.shape} does not match depth map {dm.shape}")
    sel = dm.valid
    if mask is not None:
        sel = sel & np.asarray(mask, dtype=bool)
    rows, cols = np.nonzero(sel)
    anchors = dm.uv[rows, cols]
    targets = anchors + np.stack([flow.du[rows, cols], flow.dv[rows, cols]], axis=1)
    H, W = dm.shape
    keep = (
        np.all(np.isfinite(targets), axis=1)
        & (targets[:, 0] >= -margin) & (targets[:, 0] < W + margin)
        & (targets[:, 1] >= -margin) & (targets[:, 1] < H + margin)
    )
    idx = dm.point_index[rows[keep], cols[keep]]
    return CorrespondenceSet(dm.points[idx], targets[keep])


# ---------------------------------------------------------------------------
# reprojection
# ---------------------------------------------------------------------------
def _project_cw(R, t, world, K: CameraIntrinsics, z_min=Z_MIN):
    Pc = world @ R.T + t
    z = Pc[:, 2]
    front = z > z_min
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * Pc[:, 0] / z + K.cx
        v = K.fy * Pc[:, 1] / z + K.cy
    return np.stack([u, v], axis=1), Pc, front


def _errors_cw(R, t, world, pixels, K, z_min=Z_MIN):
    uv, _, front = _project_cw(R, t, world, K, z_min)
    err = np.hypot(uv[:, 0] - pixels[:, 0], uv[:, 1] - pixels[:, 1])
    err[~front] = np.inf
    return err


def reprojection_errors(corr: CorrespondenceSet, pose: PoseSE3, K: CameraIntrinsics, z_min: float = Z_MIN):
    """Per-correspondence pixel error under a camera-to-world pose; +inf behind the camera."""
    inv = pose.inverse()
    return _errors_cw(inv.R, inv.translation, corr.world, corr.pixels, K, z_min)


def reprojection_error(item, pose: PoseSE3, K: CameraIntrinsics, z_min: float = Z_MIN) -> float:
    world, pixel = item
    c = CorrespondenceSet(np.reshape(world, (1, 3)), np.reshape(pixel, (1, 2)))
    return float(reprojection_errors(c, pose, K, z_min)[0])


# ---------------------------------------------------------------------------
# minimal solver
# ---------------------------------------------------------------------------
def _kabsch(P, Q):
    """R, t minimising |R P + t - Q| for row-stacked point sets."""
    pc, qc = P.mean(axis=0), Q.mean(axis=0)
    Hm = (P - pc).T @ (Q - qc)
    U, _, Vt = np.linalg.svd(Hm)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return R, qc - R @ pc


def p3p(world, bearings):
    """Grunert's P3P. ``world`` (3, 3) points, ``bearings`` (3, 3) unit rays.

    Returns a list of world-to-camera ``(R, t)`` candidates (up to four).
    """
    p1, p2, p3 = world
    j1, j2, j3 = bearings
    a2 = float(np.dot(p2 - p3, p2 - p3))
    b2 = float(np.dot(p1 - p3, p1 - p3))
    c2 = float(np.dot(p1 - p2, p1 - p2))
    if a2 == 0 or b2 == 0 or c2 == 0:
        return []
    ca, cb, cg = float(j2 @ j3), float(j1 @ j3), float(j1 @ j2)
    k = (a2 - c2) / b2
    A4 = (k - 1) ** 2 - 4 * c2 / b2 * ca**2
    A3 = 4 * (k * (1 - k) * cb - (1 - (a2 + c2) / b2) * ca * cg + 2 * c2 / b2 * ca**2 * cb)
    A2 = 2 * (k**2 - 1 + 2 * k**2 * cb**2 + 2 * (b2 - c2) / b2 * ca**2
              - 4 * (a2 + c2) / b2 * ca * cb * cg + 2 * (b2 - a2) / b2 * cg**2)
    A1 = 4 * (-k * (1 + k) * cb + 2 * a2 / b2 * cg**2 * cb - (1 - (a2 + c2) / b2) * ca * cg)
    A0 = (1 + k) ** 2 - 4 * a2 / b2 * cg**2
    coeffs = np.array([A4, A3, A2, A1, A0])
    if not np.all(np.isfinite(coeffs)) or np.all(coeffs == 0):
        return []
    roots = np.roots(coeffs)
    sols = []
    for root in roots:
        if abs(root.imag) > 1e-6 * max(1.0, abs(root.real)):
            continue
        v = root.real
        den = 2 * (cg - v * ca)
        s1sq_den = 1 + v * v - 2 * v * cb
        if v <= 0 or abs(den) < 1e-14 or s1sq_den <= 0:
            continue
        u = ((k - 1) * v * v - 2 * k * cb * v + 1 + k) / den
        if u <= 0:
            continue
        s1 = math.sqrt(b2 / s1sq_den)
        s = _polish_depths(np.array([s1, u * s1, v * s1]), a2, b2, c2, ca, cb, cg)
        Q = s[:, None] * bearings
        sols.append(_kabsch(world, Q))
    return sols


def _polish_depths(s, a2, b2, c2, ca, cb, cg, iters=3):
    # Gauss-Newton on the three law-of-cosines constraints
    for _ in range(iters):
        s1, s2, s3 = s
        r = np.array([
            s2 * s2 + s3 * s3 - 2 * s2 * s3 * ca - a2,
            s1 * s1 + s3 * s3 - 2 * s1 * s3 * cb - b2,
            s1 * s1 + s2 * s2 - 2 * s1 * s2 * cg - c2,
        ])
        J = np.array([
            [0.0, 2 * s2 - 2 * s3 * ca, 2 * s3 - 2 * s2 * ca],
            [2 * s1 - 2 * s3 * cb, 0.0, 2 * s3 - 2 * s1 * cb],
            [2 * s1 - 2 * s2 * cg, 2 * s2 - 2 * s1 * cg, 0.0],
        ])
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        s = s - step
    return s


def _bearings(pixels, K: CameraIntrinsics):
    f = np.column_stack([(pixels[:, 0] - K.cx) / K.fx, (pixels[:, 1] - K.cy) / K.fy, np.ones(len(pixels))])
    return f / np.linalg.norm(f, axis=1, keepdims=True)


def _collinear(P, tol=1e-9):
    e1, e2 = P[1] - P[0], P[2] - P[0]
    scale = max(float(np.dot(e1, e1)), float(np.dot(e2, e2)), 1e-300)
    return float(np.linalg.norm(np.cross(e1, e2))) <= tol * scale


# ---------------------------------------------------------------------------
# Huber refinement
# ---------------------------------------------------------------------------
def huber_cost(err, k) -> float:
    err = np.asarray(err, dtype=np.float64)
    if not np.all(np.isfinite(err)):
        return math.inf
    quad = err <= k
    return float(0.5 * np.sum(err[quad] ** 2) + np.sum(k * err[~quad] - 0.5 * k * k))


def _refine_cw(R, t, world, pixels, K, k, iterations, z_min=Z_MIN):
    """Levenberg-damped IRLS over a left-multiplied 6-vector increment."""
    cost = huber_cost(_errors_cw(R, t, world, pixels, K, z_min), k)
    history = [cost]
    lam = 1e-3
    for _ in range(iterations):
        uv, Pc, _ = _project_cw(R, t, world, K, z_min)
        res = uv - pixels
        err = np.hypot(res[:, 0], res[:, 1])
        w = np.where(err <= k, 1.0, k / np.maximum(err, 1e-300))
        X, Y, Z = Pc[:, 0], Pc[:, 1], Pc[:, 2]
        iz = 1.0 / Z
        # d(uv)/d(Pc), then d(Pc)/d(omega, delta) = [-[Pc]x, I]
        Ju = np.zeros((len(Pc), 2, 3))
        Ju[:, 0, 0] = K.fx * iz
        Ju[:, 0, 2] = -K.fx * X * iz * iz
        Ju[:, 1, 1] = K.fy * iz
        Ju[:, 1, 2] = -K.fy * Y * iz * iz
        Jw = np.zeros((len(Pc), 3, 3))
        Jw[:, 0, 1], Jw[:, 0, 2] = Z, -Y
        Jw[:, 1, 0], Jw[:, 1, 2] = -Z, X
        Jw[:, 2, 0], Jw[:, 2, 1] = Y, -X
        J = np.concatenate([Ju @ Jw, Ju], axis=2)  # (N, 2, 6)
        Jf = J.reshape(-1, 6)
        wf = np.repeat(w, 2)
        A = Jf.T @ (Jf * wf[:, None])
        g = Jf.T @ (wf * res.reshape(-1))
        improved = False
        while lam < 1e12:
            try:
                step = -np.linalg.solve(A + lam * np.diag(np.maximum(np.diag(A), 1e-12)), g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            dR = rotvec_to_matrix(step[:3])
            R_new, t_new = dR @ R, dR @ t + step[3:]
            new_cost = huber_cost(_errors_cw(R_new, t_new, world, pixels, K, z_min), k)
            if new_cost < cost:
                R, t, cost = R_new, t_new, new_cost
                lam = max(lam / 10, 1e-9)
                improved = True
                history.append(cost)
                break
            lam *= 10
        if not improved or np.linalg.norm(step) < 1e-12:
            break
    # re-orthonormalise accumulated rotation
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    return R, t, history


def refine_pose(corr: CorrespondenceSet, pose: PoseSE3, K: CameraIntrinsics, cfg: PnPConfig = PnPConfig()):
    """Huber-robust refinement of a camera-to-world pose over all given correspondences.

    Returns ``(pose, cost_history)``; the history is strictly decreasing
    across accepted steps.
    """
    inv = pose.inverse()
    R, t, hist = _refine_cw(inv.R, inv.translation, corr.world, corr.pixels, K, cfg.scale, cfg.refine_iterations)
    return PoseSE3.from_rt(R, t).inverse(), hist


# ---------------------------------------------------------------------------
# RANSAC
# ---------------------------------------------------------------------------
def _required_iterations(inlier_ratio, confidence, sample_size=4):
    if inlier_ratio <= 0:
        return math.inf
    p_good = inlier_ratio**sample_size
    if p_good >= 1:
        return 1
    return math.ceil(math.log(1 - confidence) / math.log(1 - p_good))


def solve_pnp(corr: CorrespondenceSet, K: CameraIntrinsics, cfg: PnPConfig = PnPConfig()):
    """Robust camera pose from 2D-3D correspondences.

    RANSAC draws four correspondences, solves P3P on three and keeps the
    candidate that best reprojects the fourth; hypotheses are scored by
    inlier count (error below ``max_reprojection_error``). The winner is
    refined with Huber IRLS on its inliers, re-thresholded, and refined
    again until the inlier set settles.

    Returns ``(camera-to-world pose, inlier flags)``.
    """
    n = len(corr)
    if n < 4:
        raise InsufficientCorrespondencesError(f"PnP needs at least 4 correspondences, got {n}")
    world, pixels = corr.world, corr.pixels
    bear = _bearings(pixels, K)
    thr = cfg.max_reprojection_error
    rng = np.random.default_rng(cfg.seed)

    best_count, best = 0, None
    needed = cfg.max_iterations
    degenerate = 0
    it = 0
    while it < min(needed, cfg.max_iterations):
        it += 1
        sample = rng.choice(n, 4, replace=False)
        P = world[sample]
        if _collinear(P[:3]):
            degenerate += 1
            continue
        cands = p3p(P[:3], bear[sample[:3]])
        if not cands:
            continue
        e4 = [_errors_cw(R, t, P[3:], pixels[sample[3:]], K)[0] for R, t in cands]
        R, t = cands[int(np.argmin(e4))]
        count = int(np.count_nonzero(_errors_cw(R, t, world, pixels, K) < thr))
        if count > best_count:
            best_count, best = count, (R, t)
            needed = _required_iterations(count / n, cfg.confidence)
            if count == n:
                break

    if best is None:
        if degenerate == it:
            raise DegenerateGeometryError("every sampled triple was collinear")
        raise NoConsensusError("no hypothesis produced inliers")
    if best_count < 4:
        raise NoConsensusError(f"best hypothesis has only {best_count} inliers")

    R, t = best
    inliers = _errors_cw(R, t, world, pixels, K) < thr
    for _ in range(5):
        R, t, _ = _refine_cw(R, t, world[inliers], pixels[inliers], K, cfg.scale, cfg.refine_iterations)
        new = _errors_cw(R, t, world, pixels, K) < thr
        if np.array_equal(new, inliers):
            break
        if np.count_nonzero(new) < 4:
            break
        inliers = new
    inliers = _errors_cw(R, t, world, pixels, K) < thr
    if np.count_nonzero(inliers) < 4:
        raise NoConsensusError("refinement left fewer than 4 inliers")
    return PoseSE3.from_rt(R, t).inverse(), inliers
