"""Camera geo-localisation from slice poses with a contrario reliability scores."""

from .acontrario import (
    DEFAULT_TAU,
    STRICT_TAU,
    RigidityResult,
    log_epsilon,
    optimal_subset,
    osa_cvl,
    rigidity_alpha,
)
from .errors import SliceLocError
from .evaluation import EvalRecord, confusion_and_rates, metrics
from .geometry import (
    AnnularSector,
    CameraPose,
    ErrorMode,
    ImagePoint,
    SlicePose,
    camera_heading,
    geometric_error,
    ray_intersection,
    refine_location,
    search_region,
)
from .nullmodel import DEFAULT_PARAMS, NullModelParams, calibrate, q_cdf, q_density, sample_errors
from .projection import DepthPanorama, GeoTransform, SlicePlan, equirect_to_pinhole_map, scene_centroid
from .simulator import ScenarioConfig, generate_scene, run_trials, simulate_null_thetas

__version__ = "0.1.0"
