"""
Configuration settings
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional, Tuple


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="FREDHOLM_",
        case_sensitive=False,
        extra="ignore",  # Ignore extra environment variables
    )

    # Logging
    log_level: str = "INFO"
    log_dir: Optional[str] = None  # Run logs stay in memory unless set

    # Cell means (projection onto piecewise constants)
    cell_mean_order: int = 8  # Gauss-Legendre points per subinterval
    cell_mean_rtol: float = 1e-12
    cell_mean_max_intervals: int = 4096  # Bisection budget per cell piece

    # Oscillation / modulus of continuity sampling
    w1_samples: int = 64  # Shifts u in [0, h], endpoints included
    w2_base_points: int = 64  # Base lattice is w2_base_points x w2_base_points
    w2_directions: int = 16  # Displacements on the max-norm circle of radius h

    # Singular quadrature oracle
    singular_quad_order: int = 16
    singular_quad_tol: float = 1e-12
    singular_quad_max_intervals: int = 2000
    singular_grading_exponent: int = 4  # t = t* + L u^q near the singular point

    # Matrix assembly
    outer_order: int = 12  # Gauss-Legendre points per outer cell
    graded_subintervals: int = 8  # Outer refinement on the band |i - j| <= 1
    assembly_method: str = "auto"  # auto | exact | quadrature

    # Nonlinearity derivative self-check
    derivative_check_points: int = 32
    derivative_check_tol: float = 1e-6
    derivative_check_bracket: Tuple[float, float] = (-1.0, 3.0)

    # Newton iteration
    newton_tol: float = 1e-14
    newton_max_iter: int = 50
    singular_pivot: float = 1e-300  # LU pivots below this are treated as zero
    root_match_rtol: float = 1e-10  # Final relative error allowed when the exact discrete root is known


settings = Settings()
