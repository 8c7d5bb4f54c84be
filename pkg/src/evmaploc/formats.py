"""File formats: PFM/PGM images, ASCII PLY clouds, TUM trajectories, flow files."""
from __future__ import annotations

import re

import numpy as np

from .geometry import PoseSE3

FLOW_MAGIC = np.float32(202021.25)
FLOW_SENTINEL = np.float32(1e9)
FLOW_VALID_LIMIT = 1e8


class BadMagicError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------
def write_pfm(path, image) -> None:
    """Single-channel little-endian PFM (scale -1). Rows stored bottom-up per the format."""
    img = np.asarray(image, dtype="<f4")
    if img.ndim != 2:
        raise ValueError("write_pfm expects a 2-D array")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"Pf", b"PF"):
            raise ValueError(f"{path}: not a PFM file")
        w, h = (int(v) for v in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        ch = 3 if kind == b"PF" else 1
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h * ch)
    shape = (h, w, 3) if ch == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float32)


def write_pgm(path, image01) -> None:
    """8-bit binary PGM of an image already scaled to [0, 1]."""
    img = np.clip(np.asarray(image01, dtype=np.float64), 0.0, 1.0)
    data = np.round(img * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = []
        while len(header) < 4:
            line = fh.readline()
            if line.startswith(b"#"):
                continue
            header += line.split()
        if header[0] != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        w, h = int(header[1]), int(header[2])
        return np.frombuffer(fh.read(w * h), dtype=np.uint8).reshape(h, w)


# ---------------------------------------------------------------------------
# point clouds
# ---------------------------------------------------------------------------
def read_ply(path) -> np.ndarray:
    """ASCII PLY vertices -> (N, 3) float array of x, y, z. Other properties are ignored."""
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise ValueError(f"{path}: missing 'ply' magic")
        n_vertex, props, in_vertex, fmt = None, [], False, None
        for line in fh:
            tok = line.split()
            if not tok or tok[0] == "comment":
                continue
            if tok[0] == "format":
                fmt = tok[1]
            elif tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if fmt != "ascii":
            raise ValueError(f"{path}: only ASCII PLY is supported (got {fmt})")
        if n_vertex is None or not {"x", "y", "z"} <= set(props):
            raise ValueError(f"{path}: vertex element lacks x/y/z")
        cols = [props.index(c) for c in "xyz"]
        data = np.loadtxt(fh, max_rows=n_vertex, ndmin=2) if n_vertex else np.zeros((0, len(props)))
    if data.shape[0] != n_vertex:
        raise ValueError(f"{path}: expected {n_vertex} vertices, found {data.shape[0]}")
    pts = np.ascontiguousarray(data[:, cols], dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{path}: non-finite vertex coordinates")
    return pts


def write_ply(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\nend_header\n")
        for x, y, z in pts.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------
def read_tum(path) -> tuple[np.ndarray, list[PoseSE3]]:
    """TUM lines ``t tx ty tz qx qy qz qw`` -> (timestamps in seconds, camera-to-world poses)."""
    stamps, poses = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = re.split(r"[\s,]+", line)
            if len(tok) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(tok)}")
            t, tx, ty, tz, qx, qy, qz, qw = (float(v) for v in tok)
            stamps.append(t)
            poses.append(PoseSE3(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz])))
    return np.asarray(stamps, dtype=np.float64), poses


def write_tum(path, stamps, poses) -> None:
    with open(path, "w") as fh:
        for t, pose in zip(stamps, poses):
            w, x, y, z = pose.rotation.tolist()
            tx, ty, tz = pose.translation.tolist()
            fh.write(" ".join(repr(float(v)) for v in (t, tx, ty, tz, x, y, z, w)) + "\n")


# ---------------------------------------------------------------------------
# flow files
# ---------------------------------------------------------------------------
def write_flow(path, du, dv, mask=None) -> None:
    """Middlebury-style flow; pixels outside ``mask`` are stored as the 1e9 sentinel."""
    du = np.asarray(du, dtype=np.float32)
    dv = np.asarray(dv, dtype=np.float32)
    if du.shape != dv.shape or du.ndim != 2:
        raise ValueError("du and dv must be equal-shaped 2-D arrays")
    h, w = du.shape
    data = np.stack([du, dv], axis=-1).astype("<f4")
    if mask is not None:
        data[~np.asarray(mask, dtype=bool)] = FLOW_SENTINEL
    with open(path, "wb") as fh:
        fh.write(np.array([FLOW_MAGIC], dtype="<f4").tobytes())
        fh.write(np.array([w, h], dtype="<i4").tobytes())
        fh.write(data.tobytes())


def read_flow(path, expected_shape=None):
    """Returns ``(du, dv, mask)``; mask is ``|du| < 1e8``."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12:
            raise BadMagicError(f"{path}: truncated header")
        magic = np.frombuffer(head[:4], dtype="<f4")[0]
        if magic != FLOW_MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        w, h = (int(v) for v in np.frombuffer(head[4:], dtype="<i4"))
        if expected_shape is not None and (h, w) != tuple(expected_shape):
            raise DimensionMismatchError(f"{path}: flow is {w}x{h}, expected {expected_shape[1]}x{expected_shape[0]}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != 2 * w * h:
        raise DimensionMismatchError(f"{path}: payload has {data.size} values, header implies {2 * w * h}")
    data = data.reshape(h, w, 2)
    du = data[:, :, 0].astype(np.float64)
    dv = data[:, :, 1].astype(np.float64)
    mask = np.abs(du) < FLOW_VALID_LIMIT
    return du, dv, mask
