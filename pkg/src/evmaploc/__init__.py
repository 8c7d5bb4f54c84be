"""Event-camera localisation in point-cloud maps via event-depth flow and PnP."""
from .bench import (
    BenchmarkReport, BenchScene, PerturbConfig, ProviderConfig, SampleResult, emit_report, perturb_pose,
    read_report, rotation_error, run_benchmark, translation_error,
)
from .events import Event, EventFormatError, EventStream, WindowConfig, read_events, slice_window, write_events
from .flow_provider import (
    OracleNoiseConfig, PatchMatchConfig, depth_edges, load_external_flow, oracle_flow, patch_match_flow,
)
from .geometry import (
    CameraIntrinsics, DepthMap, PoseSE3, backproject, project, project_points, remove_occluded,
    render_depth_map, world_to_camera,
)
from .kernels import BACKEND
from .representation import (
    TimeSurface, TSTSFrame, TSTSParams, VoxelGrid, build_time_surface, build_tsts, build_voxel_grid,
    normalize_frame,
)
from .solver import (
    CorrespondenceSet, DegenerateGeometryError, InsufficientCorrespondencesError, NoConsensusError, PnPConfig,
    PnPError, flow_to_correspondences, reprojection_error, solve_pnp,
)
from .supervision import (
    FlowField, OcclusionConfig, UndefinedLossError, compensated_gt_flow, estimate_bias, gt_flow, masked_epe_loss,
)
from .synth import Scene, SceneSpec, synth_scene

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "backproject", "BenchmarkReport", "BenchScene", "build_time_surface", "build_tsts",
    "build_voxel_grid", "CameraIntrinsics", "compensated_gt_flow", "CorrespondenceSet", "DegenerateGeometryError",
    "depth_edges", "DepthMap", "emit_report", "estimate_bias", "Event", "EventFormatError", "EventStream",
    "flow_to_correspondences", "FlowField", "gt_flow", "InsufficientCorrespondencesError", "load_external_flow",
    "masked_epe_loss", "NoConsensusError", "normalize_frame", "OcclusionConfig", "oracle_flow", "OracleNoiseConfig",
    "patch_match_flow", "PatchMatchConfig", "perturb_pose", "PerturbConfig", "PnPConfig", "PnPError", "PoseSE3",
    "project", "project_points", "ProviderConfig", "read_events", "read_report", "remove_occluded",
    "render_depth_map", "reprojection_error", "rotation_error", "run_benchmark", "SampleResult", "Scene",
    "SceneSpec", "slice_window", "solve_pnp", "synth_scene", "TimeSurface", "translation_error", "TSTSFrame",
    "TSTSParams", "UndefinedLossError", "VoxelGrid", "WindowConfig", "world_to_camera", "write_events",
    "__version__",
]
