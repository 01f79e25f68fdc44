"""Configuration package for the BSS toolkit"""

from .constants import *
from .paths import *
from .settings import *

__all__ = [
    "QUAD_RTOL",
    "SERIES_RTOL",
    "CROSS_CHECK_RTOL",
    "SIZE_CAP",
    "WARMUP_FACTOR",
    "DEFAULT_SUBSTEPS",
    "D_N_SEQUENCE",
    "MAX_LAGS",
    "D_CONVERGENCE_RTOL",
    "PSD_TOL",
    "MAX_D_SIZE",
    "LIMIT_RESOLUTION",
    "EPSILON_FRACTION",
    "SE_MULTIPLIER",
    "DEFAULT_OUTPUT_DIR",
    "DEFAULT_DATA_DIR",
    "DEFAULT_LOGS_DIR",
    "DEFAULT_CONFIG_DIR",
    "ExperimentConfig",
    "EXPERIMENT_KINDS",
    "REPORT_FORMATS",
]
