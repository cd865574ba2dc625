"""
Configuration for exactmeta.

Runtime settings come from environment variables; numerical defaults are
module constants so the CLI, the library and the simulation harness agree.
"""
import logging
import os

# Runtime settings
THREADS_ENV = "EXACTMETA_THREADS"
LOG_LEVEL = os.getenv("EXACTMETA_LOG_LEVEL", "WARNING")
CELERY_BROKER_URL = os.getenv("CELERY_BROKER_URL", "redis://localhost:6379/0")
CELERY_RESULT_BACKEND = os.getenv("CELERY_RESULT_BACKEND", "redis://localhost:6379/1")

# Monte Carlo and inversion defaults
DEFAULT_ALPHA = 0.05
DEFAULT_B = 1000
DEFAULT_TOL_FRACTION = 1e-4  # bisection tolerance as a fraction of the Wald half-width
DEFAULT_MAX_EXPAND = 20
DEFAULT_REGION_POINTS = 200
SMOOTHING_WINDOW = 7
CHI2_1_95 = 3.841459

# Experiment-specific Monte Carlo sizes
SIMULATION_B = {"table1": 1000, "table2": 500, "table3": 1000}

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def thread_count() -> int:
    """
    Number of worker threads allowed for replicate evaluation.

    Reads EXACTMETA_THREADS at call time so tests and callers can change it
    without reloading the module. Invalid or non-positive values fall back to 1.
    """
    raw = os.getenv(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring invalid {THREADS_ENV}={raw!r}")
        return 1
    return max(1, value)


def setup_logging(level: str | None = None) -> None:
    """Configure the root logger once for command-line use (stderr)."""
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format=LOG_FORMAT
    )
