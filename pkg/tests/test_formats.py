import numpy as np
import pytest
from conftest import random_pose

from evmaploc.formats import (
    FLOW_SENTINEL, BadMagicError, DimensionMismatchError, read_flow, read_pfm, read_pgm, read_ply, read_tum,
    write_flow, write_pfm, write_pgm, write_ply, write_tum,
)


def test_pfm_round_trip(tmp_path, rng):
    img = rng.normal(size=(7, 11)).astype(np.float32)
    write_pfm(tmp_path / "a.pfm", img)
    np.testing.assert_array_equal(read_pfm(tmp_path / "a.pfm"), img)
    assert (tmp_path / "a.pfm").read_bytes().startswith(b"Pf\n11 7\n-1.0\n")


def test_pfm_rows_bottom_up(tmp_path):
    img = np.array([[1, 2], [3, 4]], np.float32)
    write_pfm(tmp_path / "a.pfm", img)
    payload = np.frombuffer((tmp_path / "a.pfm").read_bytes()[-16:], "<f4")
    np.testing.assert_array_equal(payload, [3, 4, 1, 2])


def test_pgm_round_trip(tmp_path):
    img = np.array([[0, 0.5, 1.0], [0.25, 2.0, -1.0]])
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), [[0, 128, 255], [64, 255, 0]])


def test_ply_round_trip(tmp_path, rng):
    pts = rng.normal(size=(50, 3)) * 7
    write_ply(tmp_path / "c.ply", pts)
    np.testing.assert_array_equal(read_ply(tmp_path / "c.ply"), pts)


def test_ply_extra_properties_ignored(tmp_path):
    (tmp_path / "c.ply").write_text(
        "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float intensity\nproperty float z\n"
        "property float x\nproperty float y\nelement face 0\nproperty list uchar int vertex_index\nend_header\n"
        "9 3 1 2\n8 6 4 5\n"
    )
    np.testing.assert_array_equal(read_ply(tmp_path / "c.ply"), [[1, 2, 3], [4, 5, 6]])


@pytest.mark.parametrize("body,msg", [
    ("plx\n", "magic"),
    ("ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n", "ASCII"),
    ("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n", "x/y/z"),
    ("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
     "end_header\n1 2 3\n", "expected 3"),
    ("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
     "end_header\n1 nan 3\n", "non-finite"),
])
def test_ply_errors(tmp_path, body, msg):
    (tmp_path / "c.ply").write_text(body)
    with pytest.raises(ValueError, match=msg):
        read_ply(tmp_path / "c.ply")


def test_tum_round_trip_bit_exact(tmp_path, rng):
    poses = [random_pose(rng, 10) for _ in range(20)]
    stamps = np.cumsum(rng.uniform(0.01, 0.2, 20)) + 1.7e9
    write_tum(tmp_path / "t.txt", stamps, poses)
    s2, p2 = read_tum(tmp_path / "t.txt")
    np.testing.assert_array_equal(s2, stamps)
    assert p2 == poses
    write_tum(tmp_path / "u.txt", s2, p2)
    assert (tmp_path / "t.txt").read_bytes() == (tmp_path / "u.txt").read_bytes()


def test_tum_quaternion_order(tmp_path):
    (tmp_path / "t.txt").write_text("# comment\n1.0 1 2 3 0 0 0 1\n\n")
    s, p = read_tum(tmp_path / "t.txt")
    assert s.tolist() == [1.0]
    np.testing.assert_array_equal(p[0].rotation, [1, 0, 0, 0])
    np.testing.assert_array_equal(p[0].translation, [1, 2, 3])


def test_tum_bad_line(tmp_path):
    (tmp_path / "t.txt").write_text("1 2 3\n")
    with pytest.raises(ValueError, match=":1:"):
        read_tum(tmp_path / "t.txt")


def test_flow_round_trip_bit_exact(tmp_path, rng):
    du = rng.normal(size=(6, 9)).astype(np.float32).astype(np.float64)
    dv = rng.normal(size=(6, 9)).astype(np.float32).astype(np.float64)
    mask = rng.random((6, 9)) < 0.7
    write_flow(tmp_path / "f.flo", du, dv, mask)
    du2, dv2, m2 = read_flow(tmp_path / "f.flo", (6, 9))
    np.testing.assert_array_equal(m2, mask)
    np.testing.assert_array_equal(du2[mask], du[mask])
    np.testing.assert_array_equal(dv2[mask], dv[mask])
    write_flow(tmp_path / "g.flo", du2, dv2, m2)
    assert (tmp_path / "f.flo").read_bytes() == (tmp_path / "g.flo").read_bytes()


def test_flow_sentinel_masks_pixel(tmp_path):
    du = np.zeros((2, 2))
    du[0, 1] = FLOW_SENTINEL
    write_flow(tmp_path / "f.flo", du, np.zeros((2, 2)))
    _, _, m = read_flow(tmp_path / "f.flo")
    assert m.tolist() == [[True, False], [True, True]]


def test_flow_header_layout(tmp_path):
    write_flow(tmp_path / "f.flo", np.zeros((3, 5)), np.zeros((3, 5)))
    raw = (tmp_path / "f.flo").read_bytes()
    assert np.frombuffer(raw[:4], "<f4")[0] == np.float32(202021.25)
    assert np.frombuffer(raw[4:12], "<i4").tolist() == [5, 3]
    assert len(raw) == 12 + 3 * 5 * 2 * 4


def test_flow_bad_magic(tmp_path):
    assert np.frombuffer(b"PIEH", "<f4")[0] == np.float32(202021.25)  # the classic tag is the magic
    (tmp_path / "f.flo").write_bytes(b"HEIP" + bytes(8))
    with pytest.raises(BadMagicError):
        read_flow(tmp_path / "f.flo")


def test_flow_dimension_mismatch(tmp_path):
    write_flow(tmp_path / "f.flo", np.zeros((3, 5)), np.zeros((3, 5)))
    with pytest.raises(DimensionMismatchError):
        read_flow(tmp_path / "f.flo", (5, 3))
    raw = (tmp_path / "f.flo").read_bytes()
    (tmp_path / "g.flo").write_bytes(raw[:-4])
    with pytest.raises(DimensionMismatchError):
        read_flow(tmp_path / "g.flo")
