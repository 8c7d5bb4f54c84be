import csv
import json
import shutil

import numpy as np
import pytest

from evmaploc import cli, formats
from evmaploc.bench import pose_errors


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    assert cli.main(["synth", "--out", str(d), "--poses", "3", "--seed", "2"]) == 0
    return d


def run(*args):
    return cli.main([str(a) for a in args])


def common(scene_dir):
    return ["--cloud", scene_dir / "cloud.ply", "--traj", scene_dir / "traj.txt", "--config", scene_dir / "camera.cfg"]


def test_synth_outputs(scene_dir):
    for name in ("cloud.ply", "traj.txt", "events.bin", "camera.cfg"):
        assert (scene_dir / name).exists()
    stamps, poses = formats.read_tum(scene_dir / "traj.txt")
    assert len(poses) == 3


@pytest.mark.parametrize("sub", sorted(cli.COMMANDS))
def test_help_exits_zero(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([sub, "--help"])
    assert exc.value.code == 0
    assert "--out" in capsys.readouterr().out


def test_frame_count_and_determinism(scene_dir, tmp_path):
    args = ["frame", "--events", scene_dir / "events.bin", "--traj", scene_dir / "traj.txt",
            "--config", scene_dir / "camera.cfg"]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == [f"frame_{i:06d}{s}" for i in range(3) for s in (".pgm", "_p0.pfm", "_p1.pfm")]
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_voxel_frames(scene_dir, tmp_path):
    assert run("frame", "--events", scene_dir / "events.bin", "--traj", scene_dir / "traj.txt",
               "--config", scene_dir / "camera.cfg", "--repr", "voxel", "--out", tmp_path) == 0
    assert (tmp_path / "frame_000000_b4.pfm").exists()


def test_unknown_representation(scene_dir, tmp_path, capsys):
    code = run("frame", "--events", scene_dir / "events.bin", "--traj", scene_dir / "traj.txt",
               "--repr", "bogus", "--out", tmp_path / "x")
    assert code == 2
    assert "config-invalid: repr" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_depth_and_flow(scene_dir, tmp_path):
    assert run("depth", *common(scene_dir), "--out", tmp_path / "d") == 0
    d = formats.read_pfm(tmp_path / "d" / "depth_000000.pfm")
    assert d.shape == (300, 480) and (d > 0).sum() > 500
    assert run("flow", *common(scene_dir), "--traj-init", scene_dir / "traj.txt", "--out", tmp_path / "f") == 0
    du, dv, m = formats.read_flow(tmp_path / "f" / "flow_000001.flo", (300, 480))
    assert m.sum() > 500 and np.abs(du[m]).max() == 0


def test_localize_oracle_recovers_ground_truth(scene_dir, tmp_path):
    assert run("localize", *common(scene_dir), "--out", tmp_path) == 0
    _, gt = formats.read_tum(scene_dir / "traj.txt")
    s, pred = formats.read_tum(tmp_path / "traj_pred.txt")
    errs = np.array([pose_errors(a, b) for a, b in zip(pred, gt)])
    assert np.median(errs[:, 0]) < 0.1 and np.median(errs[:, 1]) < 0.01
    rows = list(csv.DictReader(open(tmp_path / "localize_log.csv")))
    assert [r["status"] for r in rows] == ["ok"] * 3


def test_localize_missing_cloud(scene_dir, tmp_path, capsys):
    code = run("localize", "--cloud", tmp_path / "nope.ply", "--traj", scene_dir / "traj.txt",
               "--out", tmp_path / "o")
    assert code == 2
    assert "config-invalid: cloud" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_external_missing_file_isolated(scene_dir, tmp_path):
    # initial poses = ground truth, so the flow to ground truth is zero
    assert run("flow", *common(scene_dir), "--traj-init", scene_dir / "traj.txt", "--out", tmp_path / "f") == 0
    ext = tmp_path / "ext"
    ext.mkdir()
    for i in (0, 2):
        shutil.copy(tmp_path / "f" / f"flow_{i:06d}.flo", ext / f"{i:06d}.flo")
    assert run("localize", *common(scene_dir), "--traj-init", scene_dir / "traj.txt", "--provider", "external",
               "--flow-dir", ext, "--out", tmp_path / "o") == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "localize_log.csv")))
    assert [r["status"] for r in rows] == ["ok", "flow_unavailable", "ok"]


def test_bias_identity(scene_dir, tmp_path):
    assert run("bias", *common(scene_dir), "--out", tmp_path) == 0
    _, biases = formats.read_tum(tmp_path / "bias.txt")
    assert len(biases) == 3
    for b in biases:
        assert np.linalg.norm(b.t) < 1e-6


def test_bench_synthetic(tmp_path):
    assert run("bench", "--samples", 6, "--poses", 3, "--out", tmp_path / "a") == 0
    assert run("bench", "--samples", 6, "--poses", 3, "--out", tmp_path / "b") == 0
    assert run("bench", "--samples", 6, "--poses", 3, "--seed", 1, "--out", tmp_path / "c") == 0
    a = (tmp_path / "a" / "report.json").read_text()
    assert a == (tmp_path / "b" / "report.json").read_text()
    ra, rc = json.loads(a), json.loads((tmp_path / "c" / "report.json").read_text())
    assert len(ra["samples"]) == 6 and ra["aggregates"]["median_t_cm"] < 0.1
    assert ra.keys() == rc.keys() and ra["samples"] != rc["samples"]
    assert (tmp_path / "a" / "hist_rotation_deg.csv").exists()


def test_bench_from_files(scene_dir, tmp_path):
    assert run("bench", *common(scene_dir), "--samples", 3, "--out", tmp_path) == 0
    r = json.loads((tmp_path / "report.json").read_text())
    assert r["config"]["scene"] == "files" and len(r["samples"]) == 3


def test_config_file_and_flag_precedence(scene_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# run settings\nwidth = 480\nheight = 300\nfx = 300\nsamples = 2\nposes = 2\n"
                   "repr = tsts\n")  # repr belongs to other subcommands too
    assert run("bench", "--config", cfg, "--samples", 1, "--out", tmp_path / "o") == 0
    assert len(json.loads((tmp_path / "o" / "report.json").read_text())["samples"]) == 1


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("frobnicate = 3\n")
    assert run("bench", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "frobnicate" in capsys.readouterr().err


def test_config_file_bad_value(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("samples = lots\n")
    assert run("bench", "--config", cfg, "--out", tmp_path / "o") == 2


@pytest.mark.parametrize("flags,field", [
    (["--occl-ratio", "1.0"], "occl-ratio"),
    (["--occl-radius", "0"], "occl-radius"),
    (["--provider", "neural"], "provider"),
    (["--samples", "-1"], "samples"),
    (["--max-reproj", "0"], "max-reproj"),
])
def test_bench_validation(tmp_path, capsys, flags, field):
    assert run("bench", *flags, "--out", tmp_path / "o") == 2
    assert f"config-invalid: {field}" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_out(capsys):
    assert run("bench") == 2
    assert "config-invalid: out" in capsys.readouterr().err
