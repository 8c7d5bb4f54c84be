"""Frame representations of an event window: Time Surface, TSTS and Voxel Grid."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .events import EventStream


@dataclass(frozen=True)
class TimeSurface:
    values: np.ndarray  # (H, W, 2), channel = polarity

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class TSTSParams:
    """Deblur radius ``R`` and scale ``alpha``; denoise radius ``r`` and density threshold ``beta``.

    ``center_reference`` switches the deblur reference from the incoming
    timestamp to the centre pixel's previous value (the literal pseudocode
    reading). ``sticky_mask`` never re-enables a masked pixel.
    """

    R: int = 6
    alpha: float = 15.0
    r: int = 1
    beta: float = 0.7
    center_reference: bool = False
    sticky_mask: bool = False

    def __post_init__(self):
        if self.R < 0 or self.r < 0:
            raise ValueError("radii must be non-negative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")


@dataclass(frozen=True)
class TSTSFrame:
    surface: np.ndarray  # (H, W, 2) masked surface
    mask: np.ndarray  # (H, W) uint8
    raw: np.ndarray  # (H, W, 2) surface before masking
    keep: np.ndarray  # per-event denoise decision at arrival

    @property
    def height(self):
        return self.surface.shape[0]

    @property
    def width(self):
        return self.surface.shape[1]


@dataclass(frozen=True)
class VoxelGrid:
    bins: np.ndarray  # (H, W, B)

    @property
    def bin_count(self):
        return self.bins.shape[2]


def _check_frame(events: EventStream, width, height):
    if len(events) and (int(events.x.max()) >= width or int(events.y.max()) >= height):
        raise ValueError(f"events fall outside a {width}x{height} frame")


def build_time_surface(events: EventStream, width: int, height: int) -> TimeSurface:
    _check_frame(events, width, height)
    values = np.zeros((height, width, 2), dtype=np.float64)
    # events are time-sorted, so a plain fancy-index assignment leaves the
    # latest write; np.maximum.at keeps that true even for unsorted input
    np.maximum.at(values, (events.y.astype(np.intp), events.x.astype(np.intp), events.p.astype(np.intp)),
                  events.t.astype(np.float64))
    return TimeSurface(values)


def build_tsts(events: EventStream, width: int, height: int, params: TSTSParams = TSTSParams(),
               backend: str | None = None) -> TSTSFrame:
    _check_frame(events, width, height)
    raw, mask, keep = kernels.tsts(
        events.t, events.x, events.y, events.p, width, height,
        params.R, params.alpha, params.r, params.beta,
        use_center_ref=params.center_reference, sticky_mask=params.sticky_mask,
        backend=backend,
    )
    return TSTSFrame(raw * mask[:, :, None], mask, raw, keep.astype(bool))


def build_voxel_grid(events: EventStream, width: int, height: int, bin_count: int = 5,
                     t_start: int | None = None, t_end: int | None = None) -> VoxelGrid:
    """Bilinear temporal vote of signed polarity into ``bin_count`` bins.

    Bin centres sit at ``t_start + k * (t_end - t_start) / (bin_count - 1)``;
    the window defaults to the first and last event times.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    _check_frame(events, width, height)
    bins = np.zeros((height, width, bin_count), dtype=np.float64)
    if len(events) == 0:
        return VoxelGrid(bins)
    t = events.t.astype(np.float64)
    t0 = float(t[0]) if t_start is None else float(t_start)
    t1 = float(t[-1]) if t_end is None else float(t_end)
    span = t1 - t0
    if bin_count == 1 or span <= 0:
        tn = np.zeros_like(t)
    else:
        tn = (bin_count - 1) * (t - t0) / span
    pol = np.where(events.p == 1, 1.0, -1.0)
    ys, xs = events.y.astype(np.intp), events.x.astype(np.intp)
    lo = np.floor(tn).astype(np.intp)
    frac = tn - lo
    for k, w in ((lo, 1.0 - frac), (lo + 1, frac)):
        ok = (k >= 0) & (k < bin_count) & (w > 0)
        np.add.at(bins, (ys[ok], xs[ok], k[ok]), pol[ok] * w[ok])
    return VoxelGrid(bins)


def frame_array(frame) -> np.ndarray:
    if isinstance(frame, TimeSurface):
        return frame.values
    if isinstance(frame, TSTSFrame):
        return frame.surface
    if isinstance(frame, VoxelGrid):
        return frame.bins
    return np.asarray(frame, dtype=np.float64)


def normalize_frame(frame) -> np.ndarray:
    """Per-channel min-max over non-zero cells; zero cells stay 0, constant channels map to 1."""
    a = frame_array(frame).astype(np.float64)
    squeeze = a.ndim == 2
    if squeeze:
        a = a[:, :, None]
    out = np.zeros_like(a)
    for c in range(a.shape[2]):
        ch = a[:, :, c]
        nz = ch != 0
        if not nz.any():
            continue
        lo, hi = ch[nz].min(), ch[nz].max()
        if hi > lo:
            out[:, :, c][nz] = (ch[nz] - lo) / (hi - lo)
        else:
            out[:, :, c][nz] = 1.0
    return out[:, :, 0] if squeeze else out


def event_image(frame) -> np.ndarray:
    """Single-channel [0, 1] image of a frame, for matching against depth edges."""
    n = normalize_frame(frame)
    if n.ndim == 2:
        return n
    if isinstance(frame, VoxelGrid):
        a = np.abs(frame.bins).sum(axis=2)
        m = a.max()
        return a / m if m > 0 else a
    return n.max(axis=2)


REPRESENTATIONS = ("ts", "voxel", "tsts")


def build_representation(name: str, events: EventStream, width: int, height: int,
                         tsts_params: TSTSParams = TSTSParams(), bin_count: int = 5):
    if name == "ts":
        return build_time_surface(events, width, height)
    if name == "tsts":
        return build_tsts(events, width, height, tsts_params)
    if name == "voxel":
        return build_voxel_grid(events, width, height, bin_count)
    raise ValueError(f"unknown representation {name!r}; choose from {', '.join(REPRESENTATIONS)}")


def isolated_event_threshold(r: int) -> float:
    """Density of a lone event in its (2r+1)^2 window; any beta above this masks it."""
    return 1.0 / math.pow(2 * r + 1, 2)
