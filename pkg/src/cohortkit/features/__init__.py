"""Digital-biomarker feature families computed from raw topic records.

Each operation is a pure function of (records in window, participant tz,
config); every numeric threshold lives in :class:`FeatureConfig` so projects
can override the defaults and provenance sidecars can record them.
"""

from .config import FeatureConfig
from .sleep import StageBout, SleepPeriod, detect_sleep_period, sleep_features, sleep_variability
from .location import ClusterModel, fit_location_clusters, infer_home_cluster, location_features
from .nbdc import nbdc_features, nbdc_frequency_features
from .phone import phone_use_features, step_features
from .cardiac import heart_features
from .eda import eda_features
from .motion import accel_magnitude_sd
from .pipeline import (
    DailyWindow,
    FeatureVector,
    FEATURE_COLUMNS,
    run_pipeline,
    write_matrix,
    write_provenance,
)

__all__ = [
    "FeatureConfig",
    "StageBout",
    "SleepPeriod",
    "detect_sleep_period",
    "sleep_features",
    "sleep_variability",
    "ClusterModel",
    "fit_location_clusters",
    "infer_home_cluster",
    "location_features",
    "nbdc_features",
    "nbdc_frequency_features",
    "phone_use_features",
    "step_features",
    "heart_features",
    "eda_features",
    "accel_magnitude_sd",
    "DailyWindow",
    "FeatureVector",
    "FEATURE_COLUMNS",
    "run_pipeline",
    "write_matrix",
    "write_provenance",
]
