"""Utils package for shared numerical helpers"""

from .quadrature import *
from .rng import *
from .stats import *

__all__ = [
    "integrate_panel",
    "integrate_panels",
    "tail_cutoff",
    "substream",
    "mean_and_se",
    "covariance_and_se",
    "z_score",
    "passes_normality",
]
