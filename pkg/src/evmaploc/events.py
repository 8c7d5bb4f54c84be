"""Event data model, file ingestion and time-window slicing.

Timestamps are integer microseconds. Streams are held as parallel numpy
arrays (``t`` int64, ``x``/``y`` uint16, ``p`` uint8).
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

BINARY_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])
assert BINARY_DTYPE.itemsize == 13


class EventFormatError(ValueError):
    """Malformed record; ``location`` is a 1-based CSV line or a byte offset."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{message} (at {location})")
        self.location = location


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class WindowConfig:
    duration: int = 100_000  # us

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("window duration must be positive")


@dataclass(frozen=True, eq=False)
class EventStream:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    width: int
    height: int
    resorted: bool = False  # input arrived out of order and was stably sorted

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event arrays differ in length")
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.int64))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.uint16))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.uint16))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.uint8))

    @classmethod
    def from_arrays(cls, t, x, y, p, width, height) -> EventStream:
        """Validate and build a stream, sorting by time if needed."""
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        p = np.asarray(p, dtype=np.int64)
        if len(t) and t.min() < 0:
            raise ValueError("negative timestamp")
        if len(p) and not np.all((p == 0) | (p == 1)):
            raise ValueError("polarity must be 0 or 1")
        bad = (x < 0) | (x >= width) | (y < 0) | (y >= height)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(f"event {i} at ({x[i]}, {y[i]}) outside a {width}x{height} sensor")
        resorted = bool(len(t) > 1 and np.any(np.diff(t) < 0))
        if resorted:
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        return cls(t, x, y, p, int(width), int(height), resorted)

    @classmethod
    def empty(cls, width, height) -> EventStream:
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, width, height)

    def __len__(self):
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, p)

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            return Event(int(self.t[key]), int(self.x[key]), int(self.y[key]), int(self.p[key]))
        return EventStream(self.t[key], self.x[key], self.y[key], self.p[key], self.width, self.height)

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in "txyp")
        )


def _check_bounds(x, y, width, height, where):
    bad = (x >= width) | (y >= height)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EventFormatError(f"event at ({x[i]}, {y[i]}) outside a {width}x{height} sensor", where(i))


def _read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise EventFormatError(f"expected 4 fields, got {len(row)}", f"line {lineno}")
            try:
                vals = [int(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise EventFormatError(f"non-integer field in {row!r}", f"line {lineno}") from None
            if vals[0] < 0 or vals[1] < 0 or vals[2] < 0 or vals[3] not in (0, 1):
                raise EventFormatError(f"invalid values {vals!r}", f"line {lineno}")
            rows.append((vals, lineno))
    lines = np.array([ln for _, ln in rows], dtype=np.int64)
    arr = np.array([v for v, _ in rows], dtype=np.int64).reshape(-1, 4)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], lambda i: f"line {lines[i]}"


def _read_binary(path):
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % BINARY_DTYPE.itemsize:
        off = raw.size - raw.size % BINARY_DTYPE.itemsize
        raise EventFormatError("truncated record", f"byte {off}")
    rec = raw.view(BINARY_DTYPE)
    if rec.size and rec["p"].max() > 1:
        i = int(np.flatnonzero(rec["p"] > 1)[0])
        raise EventFormatError(f"polarity {rec['p'][i]} not in {{0, 1}}", f"byte {i * BINARY_DTYPE.itemsize}")
    if rec.size and rec["t"].max() > np.iinfo(np.int64).max:
        raise EventFormatError("timestamp overflows int64")
    t = rec["t"].astype(np.int64)
    return (
        t,
        rec["x"].astype(np.int64),
        rec["y"].astype(np.int64),
        rec["p"].astype(np.int64),
        lambda i: f"byte {i * BINARY_DTYPE.itemsize}",
    )


def _guess_format(path):
    ext = os.path.splitext(str(path))[1].lower()
    return "csv" if ext in (".csv", ".txt") else "binary"


def read_events(path, format=None, width=None, height=None) -> EventStream:
    """Load events from CSV (``t_us,x,y,p``) or packed 13-byte binary records.

    With ``width``/``height`` given, out-of-range coordinates raise
    :class:`EventFormatError`; otherwise the sensor size is inferred from the
    largest coordinates. Out-of-order input is stably sorted and the result's
    ``resorted`` flag is set.
    """
    fmt = format or _guess_format(path)
    if fmt == "csv":
        t, x, y, p, where = _read_csv(path)
    elif fmt == "binary":
        t, x, y, p, where = _read_binary(path)
    else:
        raise ValueError(f"unknown event format {fmt!r}")
    if width is None:
        width = int(x.max()) + 1 if len(x) else 0
    if height is None:
        height = int(y.max()) + 1 if len(y) else 0
    _check_bounds(x, y, width, height, where)
    return EventStream.from_arrays(t, x, y, p, width, height)


def write_events(stream: EventStream, path, format=None) -> None:
    fmt = format or _guess_format(path)
    if fmt == "binary":
        rec = np.empty(len(stream), dtype=BINARY_DTYPE)
        rec["t"], rec["x"], rec["y"], rec["p"] = stream.t, stream.x, stream.y, stream.p
        rec.tofile(path)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerows(zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist()))
    else:
        raise ValueError(f"unknown event format {fmt!r}")


def slice_window(stream: EventStream, t_end: int, cfg: WindowConfig = WindowConfig()) -> EventStream:
    """Events with ``t_end - duration < t <= t_end``, order preserved."""
    if t_end < cfg.duration:
        raise ValueError(f"t_end={t_end} precedes one full window of {cfg.duration} us")
    lo = np.searchsorted(stream.t, t_end - cfg.duration, side="right")
    hi = np.searchsorted(stream.t, t_end, side="right")
    return stream[lo:hi]
