"""Command-line entry point: one subcommand per pipeline stage plus end-to-end runs.

Every subcommand validates its whole configuration before creating or
writing any output. Configuration comes from flags, optionally seeded by a
flat ``key = value`` file (``--config``); flags given explicitly win.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import formats
from .bench import PROVIDERS, BenchScene, PerturbConfig, ProviderConfig, emit_report, localize, perturb_pose, \
    run_benchmark, sample_seeds
from .events import WindowConfig, read_events, slice_window
from .flow_provider import OracleNoiseConfig
from .geometry import CameraIntrinsics
from .representation import REPRESENTATIONS, TSTSParams, build_representation, event_image, frame_array
from .solver import InsufficientCorrespondencesError, NoConsensusError, PnPConfig, PnPError
from .supervision import OcclusionConfig, estimate_bias, flow_from_depth_map, render_visible, save_flow

DEFAULT_WIDTH, DEFAULT_HEIGHT = 960, 600
EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending option."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------
def _add_camera(p):
    g = p.add_argument_group("camera")
    g.add_argument("--width", type=int, default=None, help=f"image width (default {DEFAULT_WIDTH})")
    g.add_argument("--height", type=int, default=None, help=f"image height (default {DEFAULT_HEIGHT})")
    g.add_argument("--fx", type=float, default=None)
    g.add_argument("--fy", type=float, default=None)
    g.add_argument("--cx", type=float, default=None, help="default: width / 2")
    g.add_argument("--cy", type=float, default=None, help="default: height / 2")


def _add_repr(p):
    g = p.add_argument_group("event frame")
    g.add_argument("--repr", default="tsts", help=f"one of {', '.join(REPRESENTATIONS)}")
    g.add_argument("--tsts-R", dest="tsts_R", type=int, default=6, help="deblur radius")
    g.add_argument("--tsts-alpha", dest="tsts_alpha", type=float, default=15.0, help="deblur strength")
    g.add_argument("--tsts-r", dest="tsts_r", type=int, default=1, help="denoise radius")
    g.add_argument("--tsts-beta", dest="tsts_beta", type=float, default=0.7, help="valid-rate threshold")
    g.add_argument("--window-ms", dest="window_ms", type=float, default=100.0)


def _add_occlusion(p):
    g = p.add_argument_group("depth")
    g.add_argument("--occl-radius", dest="occl_radius", type=int, default=4)
    g.add_argument("--occl-ratio", dest="occl_ratio", type=float, default=1.3)
    g.add_argument("--no-occlusion", dest="no_occlusion", action="store_true", help="keep occluded map points")


def _add_provider(p):
    g = p.add_argument_group("flow provider")
    g.add_argument("--provider", default="oracle", help=f"one of {', '.join(PROVIDERS)}")
    g.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0, help="oracle Gaussian noise (px)")
    g.add_argument("--outlier-ratio", dest="outlier_ratio", type=float, default=0.0, help="oracle outlier fraction")
    g.add_argument("--outlier-magnitude", dest="outlier_magnitude", type=float, default=50.0)
    g.add_argument("--flow-dir", dest="flow_dir", default=None, help="external provider: directory of .flo files")


def _add_solver(p):
    g = p.add_argument_group("PnP")
    g.add_argument("--max-reproj", dest="max_reproj", type=float, default=12.0, help="inlier threshold (px)")
    g.add_argument("--ransac-iters", dest="ransac_iters", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evmaploc", description="Event-camera localisation in point-cloud maps.")
    sub = ap.add_subparsers(dest="command", required=True)

    def new(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", default=None, help="flat key=value file; explicit flags override it")
        p.add_argument("--out", default=None, help="output directory")
        return p

    p = new("frame", "event frames for each trajectory timestamp")
    p.add_argument("--events", default=None, help="event file (.csv or binary)")
    p.add_argument("--traj", default=None, help="TUM trajectory; its timestamps end the windows")
    p.add_argument("--width", type=int, default=None, help=f"sensor width (default {DEFAULT_WIDTH})")
    p.add_argument("--height", type=int, default=None, help=f"sensor height (default {DEFAULT_HEIGHT})")
    _add_repr(p)

    p = new("depth", "depth maps rendered from the point cloud at each trajectory pose")
    p.add_argument("--cloud", default=None, help="ASCII PLY point cloud")
    p.add_argument("--traj", default=None, help="TUM trajectory")
    _add_camera(p)
    _add_occlusion(p)

    p = new("flow", "ground-truth flow from initial to ground-truth poses")
    p.add_argument("--cloud", default=None)
    p.add_argument("--traj", default=None, help="ground-truth TUM trajectory")
    p.add_argument("--traj-init", dest="traj_init", default=None, help="initial TUM trajectory")
    _add_camera(p)
    _add_occlusion(p)

    p = new("localize", "refine initial poses by flow + PnP")
    p.add_argument("--cloud", default=None)
    p.add_argument("--traj", default=None, help="ground truth (oracle provider, or to perturb when --traj-init is absent)")
    p.add_argument("--traj-init", dest="traj_init", default=None)
    p.add_argument("--events", default=None, help="event file (patchmatch provider)")
    p.add_argument("--seed", type=int, default=0)
    _add_camera(p)
    _add_repr(p)
    _add_occlusion(p)
    _add_provider(p)
    _add_solver(p)

    p = new("bias", "auxiliary pose T_au explaining predicted flow, per timestamp")
    p.add_argument("--cloud", default=None)
    p.add_argument("--traj", default=None, help="ground-truth TUM trajectory")
    p.add_argument("--traj-init", dest="traj_init", default=None)
    p.add_argument("--events", default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_camera(p)
    _add_repr(p)
    _add_occlusion(p)
    _add_provider(p)
    _add_solver(p)

    p = new("bench", "perturb-and-relocalise benchmark (synthetic room unless --cloud/--traj given)")
    p.add_argument("--cloud", default=None)
    p.add_argument("--traj", default=None)
    p.add_argument("--events", default=None)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-translation", dest="max_translation", type=float, default=0.5, help="m per component")
    p.add_argument("--max-rotation", dest="max_rotation", type=float, default=5.0, help="deg per axis")
    p.add_argument("--record-timing", dest="record_timing", action="store_true",
                   help="store per-sample wall time (reports are then no longer byte-reproducible)")
    p.add_argument("--poses", type=int, default=20, help="synthetic trajectory length")
    p.add_argument("--noise-rate", dest="noise_rate", type=float, default=0.0, help="synthetic event noise fraction")
    _add_camera(p)
    _add_repr(p)
    _add_occlusion(p)
    _add_provider(p)
    _add_solver(p)

    p = new("synth", "write a synthetic room scene (cloud, trajectory, events)")
    p.add_argument("--poses", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-rate", dest="noise_rate", type=float, default=0.0)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--fx", type=float, default=None)
    p.add_argument("--fy", type=float, default=None)
    return ap


# ---------------------------------------------------------------------------
# config file merging
# ---------------------------------------------------------------------------
def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys may use dashes or underscores."""
    out = {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {path}")
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _subparser(ap, command):
    for action in ap._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv=None):
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.config is None:
        return ns
    values = read_config_file(ns.config)
    sp = _subparser(ap, ns.command)
    by_dest = {a.dest: a for a in sp._actions if a.dest not in ("help", "config", "command")}
    known = {a.dest for name in COMMANDS for a in _subparser(ap, name)._actions}
    typed = {}
    for key, raw in values.items():
        action = by_dest.get(key)
        if action is None:
            if key in known:  # shared config files may carry other subcommands' options
                continue
            raise ConfigError(key, "unknown option in config file")
        if isinstance(action, argparse._StoreTrueAction):
            typed[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                typed[key] = action.type(raw) if action.type else raw
            except ValueError:
                raise ConfigError(key, f"cannot parse {raw!r}") from None
    sp.set_defaults(**typed)
    return ap.parse_args(argv)


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------
def _require_file(ns, name, flag=None):
    v = getattr(ns, name, None)
    flag = flag or name.replace("_", "-")
    if v is None:
        raise ConfigError(flag, "required")
    if not Path(v).is_file():
        raise ConfigError(flag, f"file not found: {v}")
    return Path(v)


def _optional_file(ns, name):
    return None if getattr(ns, name, None) is None else _require_file(ns, name)


def _require_out(ns):
    if ns.out is None:
        raise ConfigError("out", "required")
    out = Path(ns.out)
    if out.exists() and not out.is_dir():
        raise ConfigError("out", f"not a directory: {out}")
    return out


def _resolution(ns):
    w = DEFAULT_WIDTH if ns.width is None else ns.width
    h = DEFAULT_HEIGHT if ns.height is None else ns.height
    if w <= 0:
        raise ConfigError("width", "must be positive")
    if h <= 0:
        raise ConfigError("height", "must be positive")
    return w, h


def _intrinsics(ns) -> CameraIntrinsics:
    w, h = _resolution(ns)
    for name in ("fx", "fy"):
        if getattr(ns, name) is None:
            raise ConfigError(name, "required")
        if not getattr(ns, name) > 0:
            raise ConfigError(name, "must be positive")
    cx = w / 2 if ns.cx is None else ns.cx
    cy = h / 2 if ns.cy is None else ns.cy
    return CameraIntrinsics(ns.fx, ns.fy, cx, cy, w, h)


def _tsts(ns) -> TSTSParams:
    if ns.repr not in REPRESENTATIONS:
        raise ConfigError("repr", f"unknown representation {ns.repr!r}; choose from {', '.join(REPRESENTATIONS)}")
    try:
        return TSTSParams(R=ns.tsts_R, alpha=ns.tsts_alpha, r=ns.tsts_r, beta=ns.tsts_beta)
    except ValueError as exc:
        raise ConfigError("tsts", str(exc)) from None


def _window(ns) -> WindowConfig:
    us = int(round(ns.window_ms * 1000))
    if us <= 0:
        raise ConfigError("window-ms", "must be positive")
    return WindowConfig(us)


def _occlusion(ns) -> OcclusionConfig:
    if ns.occl_radius < 1:
        raise ConfigError("occl-radius", "must be >= 1")
    if not ns.occl_ratio > 1:
        raise ConfigError("occl-ratio", "must be > 1")
    return OcclusionConfig(ns.occl_radius, ns.occl_ratio, not ns.no_occlusion)


def _solver(ns) -> PnPConfig:
    if ns.ransac_iters < 1:
        raise ConfigError("ransac-iters", "must be >= 1")
    try:
        return PnPConfig(max_reprojection_error=ns.max_reproj, max_iterations=ns.ransac_iters)
    except ValueError as exc:
        raise ConfigError("max-reproj", str(exc)) from None


def _provider(ns, needs_gt_ok: bool) -> ProviderConfig:
    if ns.provider not in PROVIDERS:
        raise ConfigError("provider", f"unknown provider {ns.provider!r}; choose from {', '.join(PROVIDERS)}")
    try:
        oracle = OracleNoiseConfig(ns.noise_sigma, ns.outlier_ratio, ns.outlier_magnitude)
    except ValueError as exc:
        field = "noise-sigma" if "sigma" in str(exc) else "outlier-ratio"
        raise ConfigError(field, str(exc)) from None
    if ns.provider == "oracle" and not needs_gt_ok:
        raise ConfigError("traj", "the oracle provider needs the ground-truth trajectory")
    if ns.provider == "external":
        if ns.flow_dir is None:
            raise ConfigError("flow-dir", "required by the external provider")
        if not Path(ns.flow_dir).is_dir():
            raise ConfigError("flow-dir", f"not a directory: {ns.flow_dir}")
    if ns.provider == "patchmatch" and getattr(ns, "events", None) is None:
        raise ConfigError("events", "required by the patchmatch provider")
    return ProviderConfig(ns.provider, oracle, representation=ns.repr, tsts=_tsts(ns), window=_window(ns),
                          flow_dir=ns.flow_dir)


def _read_traj(path, field):
    try:
        stamps, poses = formats.read_tum(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(field, str(exc)) from None
    return np.round(stamps * 1e6).astype(np.int64), poses


def _read_cloud(path):
    try:
        pts = formats.read_ply(path)
    except (OSError, ValueError) as exc:
        raise ConfigError("cloud", str(exc)) from None
    if len(pts) == 0:
        raise ConfigError("cloud", "point cloud is empty")
    return pts


def _read_event_file(path, width, height):
    try:
        return read_events(path, width=width, height=height)
    except (OSError, ValueError) as exc:
        raise ConfigError("events", str(exc)) from None


def _check_same_stamps(a, b):
    if len(a) != len(b) or not np.array_equal(a, b):
        raise ConfigError("traj-init", "timestamps differ from the ground-truth trajectory")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
@dataclass
class RunConfig:
    """Validated inputs shared by the pipeline commands."""
    out: Path
    K: CameraIntrinsics | None = None
    points: np.ndarray | None = None
    stamps_us: np.ndarray | None = None
    gt: list | None = None
    init: list | None = None
    events: object = None
    provider: ProviderConfig | None = None
    solver: PnPConfig | None = None
    occlusion: OcclusionConfig | None = None


def _channel_names(frame_arr, name):
    if name == "voxel":
        return [f"_b{i}" for i in range(frame_arr.shape[2])]
    return [f"_p{i}" for i in range(frame_arr.shape[2])]


def cmd_frame(ns) -> int:
    out = _require_out(ns)
    events_path = _require_file(ns, "events")
    traj_path = _require_file(ns, "traj")
    w, h = _resolution(ns)
    params = _tsts(ns)
    win = _window(ns)
    stamps, _ = _read_traj(traj_path, "traj")
    if len(stamps) and stamps.min() < win.duration:
        raise ConfigError("traj", "a timestamp precedes one full event window")
    events = _read_event_file(events_path, w, h)

    out.mkdir(parents=True, exist_ok=True)
    for i, t_end in enumerate(stamps):
        window = slice_window(events, int(t_end), win)
        frame = build_representation(ns.repr, window, w, h, params)
        arr = frame_array(frame)
        for k, suffix in enumerate(_channel_names(arr, ns.repr)):
            formats.write_pfm(out / f"frame_{i:06d}{suffix}.pfm", arr[:, :, k])
        formats.write_pgm(out / f"frame_{i:06d}.pgm", event_image(frame))
    print(f"wrote {len(stamps)} frames to {out}")
    return EXIT_OK


def cmd_depth(ns) -> int:
    out = _require_out(ns)
    cloud = _require_file(ns, "cloud")
    traj = _require_file(ns, "traj")
    K = _intrinsics(ns)
    occ = _occlusion(ns)
    pts = _read_cloud(cloud)
    _, poses = _read_traj(traj, "traj")

    out.mkdir(parents=True, exist_ok=True)
    for i, pose in enumerate(poses):
        dm = render_visible(pts, pose, K, occ)
        formats.write_pfm(out / f"depth_{i:06d}.pfm", dm.depth)
        m = dm.depth.max()
        formats.write_pgm(out / f"depth_{i:06d}.pgm", dm.depth / m if m > 0 else dm.depth)
    print(f"wrote {len(poses)} depth maps to {out}")
    return EXIT_OK


def cmd_flow(ns) -> int:
    out = _require_out(ns)
    cloud = _require_file(ns, "cloud")
    traj = _require_file(ns, "traj")
    traj_init = _require_file(ns, "traj_init")
    K = _intrinsics(ns)
    occ = _occlusion(ns)
    pts = _read_cloud(cloud)
    s_gt, gt = _read_traj(traj, "traj")
    s_in, init = _read_traj(traj_init, "traj-init")
    _check_same_stamps(s_gt, s_in)

    out.mkdir(parents=True, exist_ok=True)
    for i, (T_gt, T_init) in enumerate(zip(gt, init)):
        dm = render_visible(pts, T_init, K, occ)
        flow, mask = flow_from_depth_map(dm, T_gt, K)
        save_flow(out / f"flow_{i:06d}.flo", flow, mask)
    print(f"wrote {len(gt)} flow files to {out}")
    return EXIT_OK


def _pipeline_config(ns) -> RunConfig:
    out = _require_out(ns)
    cloud = _require_file(ns, "cloud")
    traj = _optional_file(ns, "traj")
    traj_init = _optional_file(ns, "traj_init")
    K = _intrinsics(ns)
    occ = _occlusion(ns)
    solver = _solver(ns)
    provider = _provider(ns, needs_gt_ok=traj is not None)
    events_path = _optional_file(ns, "events")
    if traj is None and traj_init is None:
        raise ConfigError("traj-init", "required (or give --traj to perturb it)")
    pts = _read_cloud(cloud)
    gt = init = None
    if traj is not None:
        stamps, gt = _read_traj(traj, "traj")
    if traj_init is not None:
        s_in, init = _read_traj(traj_init, "traj-init")
        if gt is not None:
            _check_same_stamps(stamps, s_in)
        stamps = s_in
    else:
        init = [perturb_pose(T, PerturbConfig(), rng=sample_seeds(ns.seed, i)[0]) for i, T in enumerate(gt)]
    events = _read_event_file(events_path, K.width, K.height) if events_path is not None else None
    return RunConfig(out, K, pts, stamps, gt, init, events, provider, solver, occ)


def cmd_localize(ns) -> int:
    rc = _pipeline_config(ns)
    rc.out.mkdir(parents=True, exist_ok=True)
    poses, rows = [], []
    for i, T_init in enumerate(rc.init):
        _, noise_seed, ransac_seed = sample_seeds(ns.seed, i)
        T_gt = rc.gt[i] if rc.gt is not None else T_init
        solver = replace(rc.solver, seed=ransac_seed)
        pose, n_in, status = localize(rc.points, T_init, T_gt, rc.K, rc.provider, solver, rc.occlusion,
                                      rc.events, rc.stamps_us[i], f"{i:06d}", noise_seed)
        poses.append(pose)
        rows.append((i, int(rc.stamps_us[i]), status, n_in))
    formats.write_tum(rc.out / "traj_pred.txt", rc.stamps_us / 1e6, poses)
    _write_log(rc.out / "localize_log.csv", ("index", "t_us", "status", "inliers"), rows)
    failed = sum(r[2] != "ok" for r in rows)
    print(f"localized {len(rows) - failed}/{len(rows)} poses; output in {rc.out}")
    return EXIT_OK


def cmd_bias(ns) -> int:
    rc = _pipeline_config(ns)
    if rc.gt is None:
        raise ConfigError("traj", "bias estimation needs the ground-truth trajectory")
    from .bench import FlowUnavailableError, provide_flow

    rc.out.mkdir(parents=True, exist_ok=True)
    stamps, poses, rows = [], [], []
    for i, (T_gt, T_init) in enumerate(zip(rc.gt, rc.init)):
        _, noise_seed, ransac_seed = sample_seeds(ns.seed, i)
        solver = replace(rc.solver, seed=ransac_seed)
        try:
            dm = render_visible(rc.points, T_init, rc.K, rc.occlusion)
            flow, mask = provide_flow(rc.provider, dm, T_gt, rc.K, rc.events, rc.stamps_us[i], f"{i:06d}",
                                      noise_seed)
            T_au = estimate_bias(flow, mask, dm, T_gt, rc.K, solver)
        except InsufficientCorrespondencesError:
            rows.append((i, int(rc.stamps_us[i]), "insufficient_correspondences"))
            continue
        except NoConsensusError:
            rows.append((i, int(rc.stamps_us[i]), "no_consensus"))
            continue
        except (PnPError, FlowUnavailableError, ValueError, OSError) as exc:
            rows.append((i, int(rc.stamps_us[i]), "error:" + type(exc).__name__))
            continue
        stamps.append(rc.stamps_us[i] / 1e6)
        poses.append(T_au)
        rows.append((i, int(rc.stamps_us[i]), "ok"))
    formats.write_tum(rc.out / "bias.txt", stamps, poses)
    _write_log(rc.out / "bias_log.csv", ("index", "t_us", "status"), rows)
    print(f"estimated {len(poses)}/{len(rows)} auxiliary poses; output in {rc.out}")
    return EXIT_OK


def _synth_spec(ns, n_poses, noise_rate=0.0, with_events=True):
    from .synth import SceneSpec

    w, h = (480, 300) if ns.width is None and ns.height is None else _resolution(ns)
    fx = ns.fx if ns.fx is not None else 0.625 * w
    fy = ns.fy if ns.fy is not None else fx
    if n_poses < 1:
        raise ConfigError("poses", "must be >= 1")
    if not 0 <= noise_rate < 1:
        raise ConfigError("noise-rate", "must lie in [0, 1)")
    if fx <= 0 or fy <= 0:
        raise ConfigError("fx", "must be positive")
    return SceneSpec(n_poses=n_poses, width=w, height=h, fx=fx, fy=fy, noise_rate=noise_rate,
                     with_events=with_events)


def cmd_bench(ns) -> int:
    out = _require_out(ns)
    if ns.samples < 0:
        raise ConfigError("samples", "must be non-negative")
    try:
        perturb = PerturbConfig(ns.max_translation, ns.max_rotation)
    except ValueError as exc:
        raise ConfigError("max-translation", str(exc)) from None
    occ = _occlusion(ns)
    solver = _solver(ns)
    real = ns.cloud is not None or ns.traj is not None
    if real:
        cloud = _require_file(ns, "cloud")
        traj = _require_file(ns, "traj")
        events_path = _optional_file(ns, "events")
        K = _intrinsics(ns)
        provider = _provider(ns, needs_gt_ok=True)
        stamps, poses = _read_traj(traj, "traj")
        events = _read_event_file(events_path, K.width, K.height) if events_path is not None else None
        scene = BenchScene(_read_cloud(cloud), K, stamps, poses, events)
    else:
        provider = _provider(ns, needs_gt_ok=True)
        spec = _synth_spec(ns, ns.poses, ns.noise_rate, with_events=provider.name == "patchmatch")
        from .synth import synth_scene

        scene = synth_scene(spec, ns.seed)
    report = run_benchmark(scene, provider, solver, perturb, ns.samples, ns.seed, occ, ns.record_timing)
    report.config["scene"] = "files" if real else "synthetic"
    emit_report(report, out)
    agg = report.aggregates
    if ns.samples:
        print(f"{ns.samples} samples: median {agg['init_median_t_cm']:.2f} cm / {agg['init_median_r_deg']:.3f} deg"
              f" -> {agg['median_t_cm']:.4f} cm / {agg['median_r_deg']:.4f} deg; report in {out}")
    else:
        print(f"empty report written to {out}")
    return EXIT_OK


def cmd_synth(ns) -> int:
    out = _require_out(ns)
    spec = _synth_spec(ns, ns.poses, ns.noise_rate)
    from .events import write_events
    from .synth import synth_scene

    scene = synth_scene(spec, ns.seed)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_ply(out / "cloud.ply", scene.points)
    formats.write_tum(out / "traj.txt", scene.stamps_us / 1e6, scene.poses)
    write_events(scene.events, out / "events.bin")
    K = scene.intrinsics
    (out / "camera.cfg").write_text(
        f"width = {K.width}\nheight = {K.height}\nfx = {K.fx!r}\nfy = {K.fy!r}\ncx = {K.cx!r}\ncy = {K.cy!r}\n")
    print(f"wrote {len(scene.points)} points, {len(scene.poses)} poses, {len(scene.events)} events to {out}")
    return EXIT_OK


def _write_log(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


COMMANDS = {
    "frame": cmd_frame, "depth": cmd_depth, "flow": cmd_flow, "localize": cmd_localize,
    "bias": cmd_bias, "bench": cmd_bench, "synth": cmd_synth,
}


def main(argv=None) -> int:
    try:
        ns = parse_args(argv)
        return COMMANDS[ns.command](ns)
    except ConfigError as exc:
        print(f"config-invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
