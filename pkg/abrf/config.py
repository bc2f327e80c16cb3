"""
Environment-driven defaults.

Values come from a local .env file (see .env.example) or the process
environment. Command-line flags always win over these.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()


def _flag(name, default):
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() not in ("0", "false", "no", "off", "")


DEFAULT_SEED = int(os.getenv("ABRF_SEED", "0"))
DEFAULT_N_TREES = int(os.getenv("ABRF_N_TREES", "100"))
REPORTS_DIR = Path(os.getenv("ABRF_REPORTS_DIR", "reports"))
DATA_DIR = Path(os.getenv("ABRF_DATA_DIR", "data"))
WORKERS = int(os.getenv("ABRF_WORKERS", str(os.cpu_count() or 1)))
VERBOSE = _flag("ABRF_VERBOSE", True)

# Tuning grids
REGRESSION_EPS_GRID = [k / 9 for k in range(10)]
CLASSIFICATION_EPS_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]
TAU_GRID = [0.01, 0.1, 0.5, 1.0, 5.0, 10.0, 100.0]

# Solver defaults
QP_TOLERANCE = 1e-9
QP_GRID_TOLERANCE = 1e-6
QP_MAX_ITERS = 50000
LP_MAX_PIVOTS = 20000
GRAD_LEARNING_RATE = 0.1
GRAD_MAX_ITERS = 5000
GRAD_TOLERANCE = 1e-8
