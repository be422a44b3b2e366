"""
Prometheus metrics for solver runs and scenario sweeps
"""
from loguru import logger
from prometheus_client import Counter, Gauge, Histogram, start_http_server

from .config import settings

# Prometheus metrics
SCENARIOS_RUN = Counter(
    'polyscal_scenarios_run_total',
    'Total number of scenarios run'
)
SCENARIOS_FAILED = Counter(
    'polyscal_scenarios_failed_total',
    'Total number of scenarios that ended with an error or failed verdict'
)
SOLVER_ITERATIONS = Counter(
    'polyscal_solver_iterations_total',
    'Total number of accepted descent steps'
)
SOLVE_DURATION = Histogram(
    'polyscal_solve_duration_seconds',
    'Time spent in one minimize run',
    buckets=[0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0]
)
NEWTON_ITERATIONS = Counter(
    'polyscal_newton_iterations_total',
    'Total number of Newton iterations for foliation leaves'
)
LEAVES_ACCEPTED = Counter(
    'polyscal_leaves_accepted_total',
    'Total number of accepted foliation leaves'
)
LAST_ENERGY = Gauge(
    'polyscal_last_energy',
    'Capillary energy of the most recent minimizer'
)

_server_started = False


def start_metrics_server() -> bool:
    """Expose metrics over HTTP when enabled in settings; returns True if the server runs"""
    global _server_started
    if not settings.metrics_enabled:
        return False
    if _server_started:
        return True
    try:
        start_http_server(settings.metrics_port)
        _server_started = True
        logger.info(f"Prometheus metrics server started on port {settings.metrics_port}")
    except OSError as e:
        logger.warning(f"Failed to start metrics server: {e}")
    return _server_started
