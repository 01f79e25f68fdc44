"""Constants module for numerical tolerances and simulation defaults"""

# Quadrature
QUAD_RTOL = 1e-10
QUAD_ATOL = 1e-300
QUAD_LIMIT = 400
TAIL_EPS = 1e-16

# Series
SERIES_RTOL = 1e-10
SERIES_MAX_TERMS = 600
SERIES_POLE_GAP = 1e-6
SERIES_CANCELLATION_LIMIT = 1e5

# Cross-check between independent evaluation paths
CROSS_CHECK_RTOL = 1e-8

# Correlation tables
CORRELATION_TOL = 1e-9

# Simulation
SIZE_CAP = 6000
WARMUP_FACTOR = 40.0
DEFAULT_SUBSTEPS = 4
JITTER_START = 1e-12
JITTER_MAX = 1e-8
JITTER_FACTOR = 10.0

# Asymptotic covariance
D_N_SEQUENCE = (2**10, 2**12, 2**14)
MAX_LAGS = 10_000
D_CONVERGENCE_RTOL = 1e-3
PSD_TOL = 1e-8
MAX_D_SIZE = 512
LIMIT_RESOLUTION = 2**16

# Statistics
EPSILON_FRACTION = 0.05
SE_MULTIPLIER = 3.0
BOOTSTRAP_RESAMPLES = 500
KURTOSIS_UNSTABLE = 50.0
NORMALITY_LEVEL = 0.005
MIN_INCREMENTS = 30

# Assumption diagnostics
MIN_AUDIT_LAGS = 10
DELTA_LOWER = -0.5
DELTA_UPPER = 0.5
