"""Window-based surface fault detection: split, segment, filter, cluster, monitor."""

from .analysis import (
    AreaSample,
    AreaThresholds,
    ClusterOutcome,
    ClusterParams,
    analyze_image,
    cluster_areas,
    compute_areas,
    decide,
)
from .config import LimitsDoc, PipelineConfig, load_config, load_limits
from .errors import (
    BackendUnavailable,
    CalibrationContaminated,
    ConfigError,
    FixtureMiss,
    MalformedBackendReply,
    MaskInvariantError,
    WindowLargerThanImage,
    WinspectError,
)
from .evaluation import (
    ConfusionMatrix,
    MetricReport,
    ScoredLabel,
    compute_auroc,
    compute_metrics,
    confusion_from_predictions,
)
from .monitor import (
    ControlLimits,
    EwmaState,
    MonitorTrace,
    calibrate_ucl,
    calibrate_z0,
    ewma_series,
    ewma_update,
    monitor_stream,
)
from .raster import ImageRaster, WindowSpec, WindowView, preprocess, split_image, window_origins
from .segmenter import MaskRecord, Segmenter, SegmenterConfig, reference_segment, segment_window

__version__ = "0.1.0"

__all__ = [
    "AreaSample",
    "AreaThresholds",
    "BackendUnavailable",
    "CalibrationContaminated",
    "ClusterOutcome",
    "ClusterParams",
    "ConfigError",
    "ConfusionMatrix",
    "ControlLimits",
    "EwmaState",
    "FixtureMiss",
    "ImageRaster",
    "LimitsDoc",
    "MalformedBackendReply",
    "MaskInvariantError",
    "MaskRecord",
    "MetricReport",
    "MonitorTrace",
    "PipelineConfig",
    "ScoredLabel",
    "Segmenter",
    "SegmenterConfig",
    "WindowLargerThanImage",
    "WindowSpec",
    "WindowView",
    "WinspectError",
    "analyze_image",
    "calibrate_ucl",
    "calibrate_z0",
    "cluster_areas",
    "compute_areas",
    "compute_auroc",
    "compute_metrics",
    "confusion_from_predictions",
    "decide",
    "ewma_series",
    "ewma_update",
    "load_config",
    "load_limits",
    "monitor_stream",
    "preprocess",
    "reference_segment",
    "segment_window",
    "split_image",
    "window_origins",
    "__version__",
]
