"""Sources of predicted flow: corrupted ground truth, classical patch matching, flow files."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .geometry import DepthMap
from .supervision import FlowField, load_flow


@dataclass(frozen=True)
class OracleNoiseConfig:
    sigma: float = 0.0  # px, per component
    outlier_ratio: float = 0.0
    outlier_magnitude: float = 50.0  # px
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 <= self.outlier_ratio <= 1:
            raise ValueError("outlier_ratio must lie in [0, 1]")
        if self.outlier_magnitude < 0:
            raise ValueError("outlier_magnitude must be non-negative")


def oracle_corruption(mask, cfg: OracleNoiseConfig):
    """Draw the per-pixel perturbation used by :func:`oracle_flow`.

    Returns ``(ddu, ddv, outliers)``; the outlier set has exactly
    ``round(outlier_ratio * n_masked)`` pixels.
    """
    m = np.asarray(mask, dtype=bool)
    rng = np.random.default_rng(cfg.seed)
    rows, cols = np.nonzero(m)
    n = len(rows)
    noise = rng.normal(0.0, cfg.sigma, size=(n, 2)) if cfg.sigma > 0 else np.zeros((n, 2))
    n_out = int(round(cfg.outlier_ratio * n))
    pick = rng.choice(n, size=n_out, replace=False) if n_out else np.zeros(0, dtype=np.intp)
    # uniform over the disc of radius outlier_magnitude
    rad = cfg.outlier_magnitude * np.sqrt(rng.uniform(0.0, 1.0, n_out))
    ang = rng.uniform(0.0, 2 * np.pi, n_out)
    noise[pick, 0] = rad * np.cos(ang)
    noise[pick, 1] = rad * np.sin(ang)
    ddu = np.zeros(m.shape)
    ddv = np.zeros(m.shape)
    ddu[rows, cols] = noise[:, 0]
    ddv[rows, cols] = noise[:, 1]
    outliers = np.zeros(m.shape, dtype=bool)
    outliers[rows[pick], cols[pick]] = True
    return ddu, ddv, outliers


def oracle_flow(gt: FlowField, mask, cfg: OracleNoiseConfig = OracleNoiseConfig()) -> FlowField:
    """Ground truth plus seeded Gaussian noise and uniform-disc outliers on masked pixels."""
    if cfg.sigma == 0 and cfg.outlier_ratio == 0:
        return gt.copy()
    ddu, ddv, _ = oracle_corruption(mask, cfg)
    return FlowField(gt.du + ddu, gt.dv + ddv)


def depth_edges(dm: DepthMap, fill_radius: float = 3.0) -> np.ndarray:
    """Normalised depth-gradient magnitude in [0, 1].

    Empty pixels within ``fill_radius`` of a valid one borrow the nearest
    valid depth (sparse LiDAR leaves pinholes); the rest stay 0, so the
    boundary between covered and empty regions shows up as an edge.
    """
    depth = np.asarray(dm.depth if isinstance(dm, DepthMap) else dm, dtype=np.float64)
    valid = depth > 0
    if not valid.any():
        return np.zeros_like(depth)
    dist, (iy, ix) = ndimage.distance_transform_edt(~valid, return_indices=True)
    filled = np.where(dist <= fill_radius, depth[iy, ix], 0.0)
    gy, gx = np.gradient(filled)
    mag = np.hypot(gx, gy)
    m = mag.max()
    return mag / m if m > 0 else mag


@dataclass(frozen=True)
class PatchMatchConfig:
    patch_radius: int = 7
    search_radius: int = 16  # per pyramid level
    pyramid_levels: int = 3
    min_texture: float = 1e-3  # variance of the source patch
    min_peak_ratio: float = 1.1
    refine_radius: int = 2
    stride: int = 2
    edge_threshold: float = 0.1  # queries need at least this normalised depth-edge strength

    def __post_init__(self):
        if self.patch_radius < 1:
            raise ValueError("patch_radius must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.search_radius < 1 or self.stride < 1:
            raise ValueError("search_radius and stride must be >= 1")

    @property
    def max_flow(self) -> int:
        return self.search_radius * 2 ** (self.pyramid_levels - 1)


def _downsample(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    a = img[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def _patch_variance(img, r):
    size = 2 * r + 1
    m = ndimage.uniform_filter(img, size, mode="constant")
    m2 = ndimage.uniform_filter(img * img, size, mode="constant")
    return np.maximum(m2 - m * m, 0.0)


def patch_match_flow(event_img, depth_edge_img, cfg: PatchMatchConfig = PatchMatchConfig(), backend=None,
                     query_mask=None):
    """Coarse-to-fine zero-mean NCC search from depth-edge patches into the event image.

    Query pixels are textured depth-edge pixels on a ``stride`` grid (or,
    when given, inside ``query_mask`` instead of the grid). At the
    coarsest level the search spans ``search_radius``; finer levels refine
    the doubled estimate by ``refine_radius``. A match is kept when the
    coarse-level correlation peak beats the best non-adjacent alternative by
    ``min_peak_ratio`` and the total displacement stays within
    ``search_radius * 2**(levels-1)``.
    """
    ev = np.asarray(event_img, dtype=np.float64)
    de = np.asarray(depth_edge_img, dtype=np.float64)
    if ev.shape != de.shape:
        raise ValueError("event and depth-edge images differ in size")
    H, W = de.shape
    flow = FlowField.zeros(H, W)
    mask = np.zeros((H, W), dtype=bool)

    var = _patch_variance(de, cfg.patch_radius)
    if query_mask is None:
        grid = np.zeros((H, W), dtype=bool)
        grid[::cfg.stride, ::cfg.stride] = True
    else:
        grid = np.asarray(query_mask, dtype=bool)
        if grid.shape != de.shape:
            raise ValueError("query mask differs in size from the images")
    qy, qx = np.nonzero(grid & (de >= cfg.edge_threshold) & (de > 0) & (var >= cfg.min_texture))
    if len(qx) == 0:
        return flow, mask

    pyr_src, pyr_dst = [de], [ev]
    for _ in range(cfg.pyramid_levels - 1):
        pyr_src.append(_downsample(pyr_src[-1]))
        pyr_dst.append(_downsample(pyr_dst[-1]))

    dx = np.zeros(len(qx), dtype=np.int64)
    dy = np.zeros(len(qx), dtype=np.int64)
    ok = np.ones(len(qx), dtype=bool)
    for level in range(cfg.pyramid_levels - 1, -1, -1):
        sx, sy = qx >> level, qy >> level
        radius = cfg.search_radius if level == cfg.pyramid_levels - 1 else cfg.refine_radius
        bdx, bdy, best, second = kernels.ncc_search(
            pyr_src[level], pyr_dst[level], sx, sy, dx, dy, cfg.patch_radius, radius, backend=backend
        )
        ok &= np.isfinite(best) & (best > 0)
        if level == cfg.pyramid_levels - 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(second > 0, best / second, np.inf)
            ok &= ratio >= cfg.min_peak_ratio
        dx, dy = bdx, bdy
        if level > 0:
            dx, dy = dx * 2, dy * 2
    ok &= (np.abs(dx) <= cfg.max_flow) & (np.abs(dy) <= cfg.max_flow)
    flow.du[qy[ok], qx[ok]] = dx[ok]
    flow.dv[qy[ok], qx[ok]] = dy[ok]
    mask[qy[ok], qx[ok]] = True
    return flow, mask


def load_external_flow(path, expected_shape=None):
    """Flow predicted out of process (e.g. a learned estimator), in the flow file format."""
    return load_flow(path, expected_shape)
