"""Agent-based estimator of pedestrian-safety benefits from V2I cooperative perception."""

__version__ = "0.1.0"

from .geometry import (
    BoundingBox,
    CameraIntrinsics,
    CameraPoint,
    PixelPoint,
    RigidTransform,
    backproject,
    bbox_iou,
    cluster_depths,
    intrinsics_from_spec,
    pedestrian_distance_from_bbox,
    project,
    transfer_pixel,
    transfer_point,
)
from .stochastic import (
    DemographicsTable,
    ExponentialModel,
    LogNormalModel,
    PedestrianProfile,
    SceneParams,
    derive_seed,
    exp_pdf,
    fit_exponential,
    fit_lognormal,
    lognormal_pdf,
    make_stream,
    sample_headway,
    sample_initial_scene,
    sample_profile,
    sample_speed,
)
from .perception import Detection, SensorRig, SensorSpec, fuse_v2i, perceive, try_detect, visible_fraction
from .world import (
    EpisodeRecord,
    RoadLayout,
    ScenarioConfig,
    builtin_scenario,
    check_collision,
    run_episode,
    step,
)
from .safety import (
    ConflictIndicators,
    SafetyParams,
    SafetyReport,
    aggregate,
    classify_event,
    compute_indicators,
    first_detection_distance,
    injury_probability,
)
from .harness import (
    ExperimentConfig,
    build_scenario,
    emit_plot_data,
    load_config,
    run_experiment,
    run_one_episode,
    validate_config,
)
