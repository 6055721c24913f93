"""
Settings for the spin-cooling simulator.
This module contains the process-wide numerical policy and logging options.
Every value can be overridden from the environment (prefix ``SPINCOOL_``) or a ``.env`` file.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="SPINCOOL_", extra="ignore")

    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False

    # renormalise the state every RENORM_EVERY integration steps
    RENORM_EVERY: int = 10_000
    # measurement branches below this probability cannot be sampled
    DEGENERACY_THRESHOLD: float = 1e-12
    # warn when dt * (largest single-spin frequency) exceeds this
    STABILITY_THRESHOLD: float = 0.05
    NORM_TOLERANCE: float = 1e-6

    # at or below this many spins the eigensolver works on the dense matrix
    DENSE_CUTOFF: int = 3
    EIGEN_TOL: float = 1e-8
    EIGEN_MAX_ITER: int = 10_000

    SAMPLE_EVERY: int = 100


settings = Settings()
