"""
Configuration settings for polyscal numerics, solvers and runner
"""
from typing import Optional
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables (POLYSCAL_*)"""

    # ===================================
    # Numerics
    # ===================================
    fd_step_fraction: float = 1e-3  # finite-difference step, fraction of box diameter
    degeneracy_tolerance: float = 1e-12
    box_padding: float = 0.1  # metric box = domain bounding box padded by this fraction
    quadrature_segment_points: int = 4
    quadrature_height_points: int = 8

    # ===================================
    # Capillary solver
    # ===================================
    solver_tol: float = 1e-6  # gradient tolerance, multiplied by domain scale
    solver_max_iter: int = 50000
    solver_step0_fraction: float = 0.1  # first trial displacement, fraction of h
    armijo_c: float = 1e-4
    armijo_max_halvings: int = 40
    obstacle_clearance_factor: float = 2.0  # clearance threshold = factor * h
    obstacle_touch_tol: float = 1e-6  # contact when clearance < tol * scale

    # ===================================
    # Stability / eigen-solver
    # ===================================
    eigen_max_iter: int = 500
    eigen_tol: float = 1e-10
    minimal_tolerance: float = 0.05  # |H|_inf accepted as "approximately minimal"

    # ===================================
    # Foliation
    # ===================================
    leaf_tol: float = 1e-8
    newton_max_iter: int = 30
    continuation_easy_steps: int = 3
    neumann_tol: float = 1e-12

    # ===================================
    # Runner
    # ===================================
    out_dir: str = "runs"
    baseline_dir: str = "baselines/v1"
    threads: int = 1
    seed: int = 0
    h_override: Optional[float] = None

    # Logging
    log_level: str = "INFO"

    # ===================================
    # Monitoring
    # ===================================
    metrics_enabled: bool = False
    metrics_port: int = 9108

    class Config:
        env_file = ".env"
        env_prefix = "POLYSCAL_"
        case_sensitive = False

    def get_fd_step(self, diameter: float) -> float:
        """Finite-difference step for a metric box of the given diameter"""
        if diameter <= 0:
            raise ValueError(f"Box diameter must be positive, got {diameter}")
        if not 0 < self.fd_step_fraction < 0.1:
            raise ValueError(f"POLYSCAL_FD_STEP_FRACTION out of range: {self.fd_step_fraction}")
        return self.fd_step_fraction * diameter

    def get_solver_tol(self, scale: float) -> float:
        """Gradient tolerance for a domain of the given scale"""
        if scale <= 0:
            raise ValueError(f"Domain scale must be positive, got {scale}")
        return self.solver_tol * scale

    def get_threads(self) -> int:
        """Worker count for scenario sweeps"""
        if self.threads < 1:
            raise ValueError(f"POLYSCAL_THREADS must be >= 1, got {self.threads}")
        return self.threads


# Global settings instance
settings = Settings()
