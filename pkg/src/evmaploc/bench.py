"""Perturb-and-relocalise protocol: initial-guess sampling, error metrics and reports."""
from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .events import EventStream, WindowConfig, slice_window
from .flow_provider import OracleNoiseConfig, PatchMatchConfig, depth_edges, load_external_flow, oracle_flow, \
    patch_match_flow
from .geometry import CameraIntrinsics, PoseSE3, axis_rotation
from .representation import TSTSParams, build_representation, event_image
from .solver import DegenerateGeometryError, InsufficientCorrespondencesError, NoConsensusError, PnPConfig, \
    flow_to_correspondences, solve_pnp
from .supervision import OcclusionConfig, flow_from_depth_map, render_visible

PROVIDERS = ("oracle", "patchmatch", "external")
HIST_BINS = 50
ROTATION_PARAMETERIZATION = "per-axis euler xyz, right-multiplied"


@dataclass(frozen=True)
class PerturbConfig:
    max_translation: float = 0.5  # m, per component
    max_rotation: float = 5.0  # deg, per axis
    seed: int = 0

    def __post_init__(self):
        if self.max_translation < 0 or self.max_rotation < 0:
            raise ValueError("perturbation bounds must be non-negative")


def _rng(rng_or_seed):
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.default_rng(rng_or_seed)


def perturb_pose(T_gt: PoseSE3, cfg: PerturbConfig = PerturbConfig(), rng=None) -> PoseSE3:
    """Initial guess ``T_gt @ delta``; delta has uniform per-axis angles and translation components.

    ``rng`` overrides ``cfg.seed`` (a Generator or anything ``default_rng`` accepts).
    """
    g = _rng(cfg.seed if rng is None else rng)
    ax, ay, az = np.radians(g.uniform(-cfg.max_rotation, cfg.max_rotation, 3))
    dt = g.uniform(-cfg.max_translation, cfg.max_translation, 3)
    R = axis_rotation("x", ax) @ axis_rotation("y", ay) @ axis_rotation("z", az)
    return T_gt @ PoseSE3.from_rt(R, dt)


def _rot(x):
    return x.R if isinstance(x, PoseSE3) else np.asarray(x, dtype=np.float64)


def _trans(x):
    return x.t if isinstance(x, PoseSE3) else np.asarray(x, dtype=np.float64)


def rotation_error(Ra, Rb) -> float:
    """Geodesic angle between two rotations (matrices or poses), in degrees."""
    c = (np.trace(_rot(Ra) @ _rot(Rb).T) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def translation_error(ta, tb) -> float:
    """Euclidean distance in centimetres (vectors or poses, in metres)."""
    return float(np.linalg.norm(_trans(ta) - _trans(tb)) * 100.0)


def pose_errors(a: PoseSE3, b: PoseSE3) -> tuple[float, float]:
    return translation_error(a, b), rotation_error(a, b)


@dataclass(frozen=True)
class SampleResult:
    sample_id: int
    initial_error: tuple  # (cm, deg)
    final_error: tuple
    solver_status: str
    inlier_count: int
    timing_ms: float | None = None

    def __post_init__(self):
        if min(self.initial_error) < 0 or min(self.final_error) < 0:
            raise ValueError("errors must be non-negative")


AGGREGATE_KEYS = ("mean_t_cm", "median_t_cm", "mean_r_deg", "median_r_deg",
                  "init_mean_t_cm", "init_median_t_cm", "init_mean_r_deg", "init_median_r_deg")


def compute_aggregates(samples) -> dict:
    """Mean and median errors; every value is ``None`` for an empty sample list."""
    if not samples:
        return dict.fromkeys(AGGREGATE_KEYS)
    cols = {
        "t_cm": [s.final_error[0] for s in samples],
        "r_deg": [s.final_error[1] for s in samples],
        "init_t_cm": [s.initial_error[0] for s in samples],
        "init_r_deg": [s.initial_error[1] for s in samples],
    }
    out = {}
    for prefix, name in (("", "t_cm"), ("", "r_deg"), ("init_", "t_cm"), ("init_", "r_deg")):
        vals = cols[prefix + name]
        out[f"{prefix}mean_{name}"] = float(statistics.mean(vals))
        out[f"{prefix}median_{name}"] = float(statistics.median(vals))
    return {k: out[k] for k in AGGREGATE_KEYS}


def histogram_table(initial, final, bins: int = HIST_BINS):
    """Rows ``(bin_low, bin_high, count_initial, count_final)`` over ``[0, max observed]``."""
    initial = np.asarray(initial, dtype=np.float64)
    final = np.asarray(final, dtype=np.float64)
    if initial.size == 0 and final.size == 0:
        return []
    top = float(max(initial.max(initial=0.0), final.max(initial=0.0)))
    edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
    ci, _ = np.histogram(initial, edges)
    cf, _ = np.histogram(final, edges)
    return [(float(edges[i]), float(edges[i + 1]), int(ci[i]), int(cf[i])) for i in range(bins)]


def compute_histograms(samples, bins: int = HIST_BINS) -> dict:
    return {
        "translation_cm": histogram_table([s.initial_error[0] for s in samples],
                                          [s.final_error[0] for s in samples], bins),
        "rotation_deg": histogram_table([s.initial_error[1] for s in samples],
                                        [s.final_error[1] for s in samples], bins),
    }


@dataclass
class BenchmarkReport:
    samples: list
    aggregates: dict
    histograms: dict
    config: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, config=None) -> BenchmarkReport:
        samples = list(samples)
        return cls(samples, compute_aggregates(samples), compute_histograms(samples), dict(config or {}))

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "samples": [
                {
                    "id": s.sample_id,
                    "init_t_cm": s.initial_error[0],
                    "init_r_deg": s.initial_error[1],
                    "final_t_cm": s.final_error[0],
                    "final_r_deg": s.final_error[1],
                    "status": s.solver_status,
                    "inliers": s.inlier_count,
                    "ms": s.timing_ms,
                }
                for s in self.samples
            ],
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_json_dict(cls, d) -> BenchmarkReport:
        samples = [
            SampleResult(int(s["id"]), (s["init_t_cm"], s["init_r_deg"]), (s["final_t_cm"], s["final_r_deg"]),
                         s["status"], int(s["inliers"]), s["ms"])
            for s in d["samples"]
        ]
        return cls(samples, dict(d["aggregates"]), compute_histograms(samples), dict(d["config"]))


def report_json(report: BenchmarkReport) -> str:
    return json.dumps(report.to_json_dict(), indent=2) + "\n"


def emit_report(report: BenchmarkReport, out_dir) -> dict:
    """Write ``report.json`` plus one histogram CSV per error kind; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json"}
    paths["report"].write_text(report_json(report))
    for kind, rows in report.histograms.items():
        p = out / f"hist_{kind}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_low", "bin_high", "count_initial", "count_final"])
            w.writerows(rows)
        paths[kind] = p
    return paths


def read_report(path) -> BenchmarkReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return BenchmarkReport.from_json_dict(json.loads(p.read_text()))


@dataclass
class BenchScene:
    """Inputs for a benchmark run; a synthetic :class:`~evmaploc.synth.Scene` fits this shape too."""
    points: np.ndarray
    intrinsics: CameraIntrinsics
    stamps_us: np.ndarray
    poses: list
    events: EventStream | None = None


class FlowUnavailableError(RuntimeError):
    """The provider produced no flow for this sample."""


@dataclass(frozen=True)
class ProviderConfig:
    name: str = "oracle"
    oracle: OracleNoiseConfig = OracleNoiseConfig()
    patch_match: PatchMatchConfig = PatchMatchConfig()
    representation: str = "tsts"
    tsts: TSTSParams = TSTSParams()
    window: WindowConfig = WindowConfig()
    flow_dir: str | None = None  # external provider: <flow_dir>/<key>.flo

    def __post_init__(self):
        if self.name not in PROVIDERS:
            raise ValueError(f"unknown provider {self.name!r}; choose from {', '.join(PROVIDERS)}")


def provide_flow(cfg: ProviderConfig, dm, T_gt: PoseSE3, K: CameraIntrinsics, events=None, t_end=None,
                 key=None, noise_seed=0):
    """Flow on the grid of ``dm`` (rendered at the initial pose) from the configured provider."""
    if cfg.name == "oracle":
        gt, mask = flow_from_depth_map(dm, T_gt, K)
        ocfg = OracleNoiseConfig(cfg.oracle.sigma, cfg.oracle.outlier_ratio, cfg.oracle.outlier_magnitude,
                                 noise_seed)
        return oracle_flow(gt, mask, ocfg), mask
    if cfg.name == "patchmatch":
        if events is None or t_end is None:
            raise FlowUnavailableError("patch matching needs an event stream")
        window = slice_window(events, int(t_end), cfg.window)
        frame = build_representation(cfg.representation, window, K.width, K.height, cfg.tsts)
        flow, mask = patch_match_flow(event_image(frame), depth_edges(dm), cfg.patch_match, query_mask=dm.valid)
        return flow, mask
    if cfg.flow_dir is None or key is None:
        raise FlowUnavailableError("external provider needs a flow directory")
    path = Path(cfg.flow_dir) / f"{key}.flo"
    if not path.exists():
        raise FlowUnavailableError(f"missing flow file {path}")
    flow, mask = load_external_flow(path, dm.shape)
    return flow, mask & dm.valid


def status_of(exc: BaseException) -> str:
    for cls, name in ((InsufficientCorrespondencesError, "insufficient_correspondences"),
                      (NoConsensusError, "no_consensus"), (DegenerateGeometryError, "degenerate"),
                      (FlowUnavailableError, "flow_unavailable")):
        if isinstance(exc, cls):
            return name
    return "error:" + type(exc).__name__


def localize(points, T_init: PoseSE3, T_gt: PoseSE3, K: CameraIntrinsics, provider: ProviderConfig,
             solver: PnPConfig = PnPConfig(), occlusion: OcclusionConfig = OcclusionConfig(),
             events=None, t_end=None, key=None, noise_seed=0):
    """One relocalisation: render at ``T_init``, get flow, solve PnP.

    ``T_gt`` is only read by the oracle provider. Returns ``(pose, inlier_count, status)``;
    on failure the pose is ``T_init``.
    """
    try:
        dm = render_visible(points, T_init, K, occlusion)
        flow, mask = provide_flow(provider, dm, T_gt, K, events, t_end, key, noise_seed)
        corr = flow_to_correspondences(dm, flow, mask)
        pose, inliers = solve_pnp(corr, K, solver)
    except (RuntimeError, ValueError, OSError) as exc:
        return T_init, 0, status_of(exc)
    return pose, int(np.count_nonzero(inliers)), "ok"


def sample_seeds(master_seed: int, sample_id: int):
    """Independent (perturbation, oracle noise, RANSAC) seeds for one sample."""
    ss = np.random.SeedSequence([int(master_seed), int(sample_id)])
    perturb, noise, ransac = ss.spawn(3)
    return np.random.default_rng(perturb), int(noise.generate_state(1)[0]), int(ransac.generate_state(1)[0])


def run_benchmark(scene, provider: ProviderConfig = ProviderConfig(), solver: PnPConfig = PnPConfig(),
                  perturb: PerturbConfig = PerturbConfig(), n_samples: int = 100, seed: int = 0,
                  occlusion: OcclusionConfig = OcclusionConfig(), record_timing: bool = False) -> BenchmarkReport:
    """Perturb ground-truth poses, relocalise each and collect errors.

    Sample ``i`` uses trajectory pose ``i % len(poses)``. With ``record_timing``
    off, ``ms`` is null so reports of equal seeds are byte-identical.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be non-negative")
    poses = list(scene.poses)
    if n_samples and not poses:
        raise ValueError("scene has no trajectory poses")
    K = scene.intrinsics
    events = getattr(scene, "events", None)
    samples = []
    for i in range(n_samples):
        j = i % len(poses)
        T_gt = poses[j]
        g, noise_seed, ransac_seed = sample_seeds(seed, i)
        T_init = perturb_pose(T_gt, perturb, rng=g)
        cfg = replace(solver, seed=ransac_seed)
        t0 = time.perf_counter()
        pose, n_in, status = localize(scene.points, T_init, T_gt, K, provider, cfg, occlusion, events,
                                      scene.stamps_us[j], f"sample_{i:06d}", noise_seed)
        ms = (time.perf_counter() - t0) * 1e3 if record_timing else None
        samples.append(SampleResult(i, pose_errors(T_init, T_gt), pose_errors(pose, T_gt), status, n_in, ms))
    config = {
        "provider": provider.name,
        "n_samples": n_samples,
        "seed": seed,
        "perturb": {"max_translation_m": perturb.max_translation, "max_rotation_deg": perturb.max_rotation,
                    "rotation_parameterization": ROTATION_PARAMETERIZATION},
        "solver": {k: v for k, v in asdict(solver).items() if k != "seed"},
        "occlusion": asdict(occlusion),
    }
    if provider.name == "oracle":
        config["oracle"] = {k: v for k, v in asdict(provider.oracle).items() if k != "seed"}
    elif provider.name == "patchmatch":
        config["representation"] = provider.representation
        config["tsts"] = asdict(provider.tsts)
        config["patch_match"] = asdict(provider.patch_match)
    return BenchmarkReport.from_samples(samples, config)


__all__ = [
    "AGGREGATE_KEYS", "BenchScene", "BenchmarkReport", "FlowUnavailableError", "HIST_BINS", "PROVIDERS",
    "PerturbConfig", "ProviderConfig", "SampleResult", "compute_aggregates", "compute_histograms", "emit_report",
    "histogram_table", "localize", "perturb_pose", "pose_errors", "provide_flow", "read_report",
    "report_json", "rotation_error", "run_benchmark", "sample_seeds", "translation_error",
]
