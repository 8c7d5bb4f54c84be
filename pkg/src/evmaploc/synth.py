"""Synthetic room scenes: point cloud, smooth trajectory and edge-driven events.

World frame: x right, y down, z forward, so the identity pose looks down +z.
Box and room edges carry dense strips of points folded over the two faces
that meet there. Events fire within 1 px of the visible projected strips,
sampled at ``substeps`` poses per window, plus uniform salt-and-pepper noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .events import EventStream
from .geometry import CameraIntrinsics, PoseSE3, axis_rotation, project_points, render_depth_map, world_to_camera


@dataclass(frozen=True)
class SceneSpec:
    room: tuple = (8.0, 3.0, 8.0)  # extent along x, y, z (m), centred on the origin
    n_boxes: int = 6
    surface_density: float = 400.0  # points per m^2
    edge_density: float = 400.0  # points per m along edge strips
    edge_width: float = 0.06  # m; strips fold onto both faces meeting at the edge
    n_poses: int = 20
    window_us: int = 100_000
    t0_us: int = 1_700_000_000_000_000  # epoch microseconds, as recording stacks stamp events
    orbit_radius: float = 1.0  # m
    speed: float = 0.4  # m/s along the orbit
    yaw_rate: float = 8.0  # deg/s
    width: int = 480
    height: int = 300
    fx: float = 300.0
    fy: float = 300.0
    substeps: int = 10
    events_per_pixel: float = 1.5  # expected events per band pixel per substep
    noise_rate: float = 0.0  # fraction of all events that are noise
    with_events: bool = True

    def __post_init__(self):
        if min(self.room) <= 0 or self.surface_density <= 0:
            raise ValueError("invalid scene: room must have positive extent and density")
        if self.n_poses < 1:
            raise ValueError("invalid scene: trajectory needs at least one pose")
        if not 0 <= self.noise_rate < 1:
            raise ValueError("noise_rate must lie in [0, 1)")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.width / 2, self.height / 2, self.width, self.height)


@dataclass
class Scene:
    spec: SceneSpec
    points: np.ndarray
    stamps_us: np.ndarray
    poses: list
    events: EventStream
    labels: np.ndarray  # per event: 0 edge, 1 noise
    edge_segments: np.ndarray  # (M, 2, 3)
    edge_point_index: np.ndarray = field(repr=False)  # indices of edge-strip points in ``points``

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return self.spec.intrinsics


def trajectory_pose(spec: SceneSpec, t_us: float) -> PoseSE3:
    """Camera-to-world pose on a smooth orbit with slowly turning yaw."""
    s = (t_us - spec.t0_us) * 1e-6
    w = spec.speed / spec.orbit_radius
    pos = np.array([
        spec.orbit_radius * np.cos(w * s),
        0.15 * np.sin(2.0 * w * s),
        spec.orbit_radius * np.sin(w * s),
    ])
    yaw = np.radians(spec.yaw_rate * s)
    pitch = np.radians(3.0 * np.sin(w * s))
    R = axis_rotation("y", yaw) @ axis_rotation("x", pitch)
    return PoseSE3.from_rt(R, pos)


def _plane_points(rng, origin, u, v, density):
    area = np.linalg.norm(u) * np.linalg.norm(v)
    n = max(int(round(area * density)), 1)
    a, b = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    return origin + a[:, None] * u + b[:, None] * v


def _box_faces(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    d = hi - lo
    ex, ey, ez = np.diag(d)
    return [
        (lo, ey, ez), (lo + ex, ey, ez),
        (lo, ex, ez), (lo + ey, ex, ez),
        (lo, ex, ey), (lo + ez, ex, ey),
    ]


def _box_edges(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    segs = []
    for i in range(8):
        for j in range(i + 1, 8):
            if np.count_nonzero(corners[i] != corners[j]) == 1:
                segs.append((corners[i], corners[j]))
    return np.array(segs)


def _layout_boxes(rng, spec):
    hx, hy, hz = (0.5 * v for v in spec.room)
    boxes = []
    for k in range(spec.n_boxes):
        ang = 2 * np.pi * (k + rng.uniform(0.2, 0.8)) / max(spec.n_boxes, 1)
        dist = rng.uniform(0.55, 0.8) * min(hx, hz)
        cx, cz = dist * np.cos(ang), dist * np.sin(ang)
        size = rng.uniform([0.4, 0.5, 0.4], [0.9, 1.6, 0.9])
        lo = np.array([cx - size[0] / 2, hy - size[1], cz - size[2] / 2])
        boxes.append((lo, lo + size))
    return boxes


def _build_cloud(rng, spec):
    hx, hy, hz = (0.5 * v for v in spec.room)
    room_lo, room_hi = np.array([-hx, -hy, -hz]), np.array([hx, hy, hz])
    boxes = _layout_boxes(rng, spec)
    surf = [_plane_points(rng, o, u, v, spec.surface_density) for o, u, v in _box_faces(room_lo, room_hi)]
    for lo, hi in boxes:
        surf += [_plane_points(rng, o, u, v, spec.surface_density) for o, u, v in _box_faces(lo, hi)]
    segs, centres = [], []
    for lo, hi in [(room_lo, room_hi)] + boxes:
        e = _box_edges(lo, hi)
        segs.append(e)
        centres.append(np.repeat([(np.asarray(lo) + hi) / 2], len(e), axis=0))
    segs, centres = np.concatenate(segs), np.concatenate(centres)
    strips, seg_id = [], []
    for k, (a, b) in enumerate(segs):
        n = max(int(round(np.linalg.norm(b - a) * spec.edge_density)), 2)
        p = a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)
        if spec.edge_width > 0:
            # spread across the two faces meeting at the edge, towards the box centre
            along = int(np.argmax(np.abs(b - a)))
            offs = []
            for ax in (i for i in range(3) if i != along):
                d = np.zeros(3)
                d[ax] = np.sign(centres[k][ax] - a[ax])
                offs.append(d)
            face = rng.integers(0, 2, n)
            w = rng.uniform(0.0, spec.edge_width, n)
            p = p + w[:, None] * np.asarray(offs)[face]
        strips.append(p)
        seg_id.append(np.full(n, k))
    surf = np.concatenate(surf)
    strips = np.concatenate(strips)
    points = np.concatenate([surf, strips])
    edge_idx = np.arange(len(surf), len(points))
    return points, segs, edge_idx, np.concatenate(seg_id)


def visible_edge_pixels(points, edge_idx, seg_dir, pose, next_pose, K, occlusion_tol=0.03):
    """Pixels of visible edge-strip points at ``pose`` with their motion polarity.

    Returns ``(px, py, polarity)`` with one entry per distinct pixel.
    """
    dm = render_depth_map(points, pose, K)
    cam = world_to_camera(points[edge_idx], pose)
    uv, z, front = project_points(cam, K)
    px = np.floor(uv[:, 0] + 0.5)
    py = np.floor(uv[:, 1] + 0.5)
    ok = front & (px >= 0) & (px < K.width) & (py >= 0) & (py < K.height)
    pxi = np.where(ok, px, 0).astype(np.intp)
    pyi = np.where(ok, py, 0).astype(np.intp)
    zb = dm.depth[pyi, pxi]
    ok &= (zb > 0) & (z <= zb * (1 + occlusion_tol))
    # image motion and projected edge direction decide the polarity
    uv_next, _, front_n = project_points(world_to_camera(points[edge_idx], next_pose), K)
    tip, _, front_t = project_points(cam + 0.01 * (seg_dir @ pose.R), K)
    ok &= front_n & front_t
    vel = uv_next - uv
    d = tip - uv
    pol = (d[:, 0] * vel[:, 1] - d[:, 1] * vel[:, 0]) > 0
    ok &= np.hypot(vel[:, 0], vel[:, 1]) > 1e-6
    lin = pyi[ok] * K.width + pxi[ok]
    lin, first = np.unique(lin, return_index=True)
    return lin % K.width, lin // K.width, pol[ok][first].astype(np.uint8)


def _window_events(rng, points, edge_idx, seg_dir, spec, K, t_end):
    t_start = t_end - spec.window_us
    dt = spec.window_us / spec.substeps
    chunks = []
    for s in range(spec.substeps):
        ts = t_start + s * dt
        pose = trajectory_pose(spec, ts)
        nxt = trajectory_pose(spec, ts + dt)
        px, py, pol = visible_edge_pixels(points, edge_idx, seg_dir, pose, nxt, K)
        if len(px) == 0:
            continue
        # band of Chebyshev radius 1 around the edge; positive polarity wins overlaps
        lab = np.zeros((K.height, K.width), dtype=np.uint8)
        lab[py, px] = pol + 1
        lab = ndimage.maximum_filter(lab, size=3, mode="constant")
        by, bx = np.nonzero(lab)
        bp = lab[by, bx] - 1
        counts = rng.poisson(spec.events_per_pixel, len(bx))
        ex, ey, ep = np.repeat(bx, counts), np.repeat(by, counts), np.repeat(bp, counts)
        lo, hi = int(np.floor(ts)) + 1, int(np.floor(ts + dt)) + 1
        et = rng.integers(lo, max(hi, lo + 1), len(ex))
        chunks.append((et, ex, ey, ep))
    if not chunks:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, z
    return tuple(np.concatenate(c) for c in zip(*chunks))


def synth_scene(spec: SceneSpec = SceneSpec(), seed: int = 0) -> Scene:
    rng = np.random.default_rng(seed)
    K = spec.intrinsics
    points, segs, edge_idx, seg_id = _build_cloud(rng, spec)
    seg_vec = segs[:, 1] - segs[:, 0]
    seg_dir = (seg_vec / np.linalg.norm(seg_vec, axis=1, keepdims=True))[seg_id]
    stamps = spec.t0_us + spec.window_us * np.arange(1, spec.n_poses + 1, dtype=np.int64)
    poses = [trajectory_pose(spec, t) for t in stamps]

    ts, xs, ys, ps, labs = [], [], [], [], []
    if spec.with_events:
        for t_end in stamps:
            et, ex, ey, ep = _window_events(rng, points, edge_idx, seg_dir, spec, K, int(t_end))
            n_noise = int(round(spec.noise_rate / (1 - spec.noise_rate) * len(et)))
            nt = rng.integers(int(t_end) - spec.window_us + 1, int(t_end) + 1, n_noise)
            nx = rng.integers(0, K.width, n_noise)
            ny = rng.integers(0, K.height, n_noise)
            npol = rng.integers(0, 2, n_noise)
            ts += [et, nt]
            xs += [ex, nx]
            ys += [ey, ny]
            ps += [ep, npol]
            labs += [np.zeros(len(et), np.uint8), np.ones(n_noise, np.uint8)]
    if ts:
        t = np.concatenate(ts).astype(np.int64)
        order = np.argsort(t, kind="stable")
        events = EventStream(t[order], np.concatenate(xs)[order], np.concatenate(ys)[order],
                             np.concatenate(ps)[order], K.width, K.height)
        labels = np.concatenate(labs)[order]
    else:
        events = EventStream.empty(K.width, K.height)
        labels = np.zeros(0, np.uint8)
    return Scene(spec, points, stamps, poses, events, labels, segs, edge_idx)
