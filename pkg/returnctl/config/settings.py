"""
Centralized configuration management using Pydantic
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional
from pathlib import Path


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix RETURNCTL_)"""

    # Application
    app_name: str = "returnctl"
    log: str = Field(default="WARNING", validation_alias="RETURNCTL_LOG")

    # Fluid integration
    fluid_dt: float = 0.01  # days

    # Contour table (congested region)
    contour_lines: int = 2000
    contour_tau_max: float = 50.0  # initial clearing-time range, doubled on demand
    contour_tolerance: float = 1e-8

    # Backward shooting grid (empty-queue region)
    shot_anchors: int = 200
    shot_horizon: float = 60.0
    shot_dt: float = 0.02
    shot_store_every: int = 5
    shot_lattice_points: int = 241  # per axis of the region N costate lattice

    # Simulation
    warmup_days: float = 500.0
    n_batches: int = 20
    batch_length: float = 500.0
    finite_horizon: float = 90.0
    replications: int = 2000
    confidence_level: float = 0.95
    jobs: Optional[int] = None  # None -> os.cpu_count()

    # Output
    output_dir: Path = Path("results")

    # Experiment registry
    experiments_config_path: Path = Path(__file__).resolve().parent / "experiments.yaml"

    model_config = SettingsConfigDict(
        env_prefix="RETURNCTL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
