"""
Configuration settings for wtapool.

Every numerical tolerance, capacity bound and solver knob lives here so that
library defaults, CLI defaults and tests agree. Override any field with an
environment variable prefixed ``WTAPOOL_`` (e.g. ``WTAPOOL_MC_SAMPLES=200000``).
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings."""

    # Numerical tolerances
    tail_tol: float = 1e-12  # residual Poisson tail mass for truncated sums
    max_tail_tol: float = 1e-8  # loosest tail tolerance accepted
    simplex_tol: float = 1e-9
    zero_sum_tol: float = 1e-9
    indifference_tol: float = 1e-12

    # Capacity bounds for exact pipelines
    max_exact_processes: int = 6  # ordered partitions of 6 processes: 4683
    max_count_vectors: int = 100_000
    max_opponent_profiles: int = 100_000

    # Monte Carlo
    mc_samples: int = 1_000_000
    mc_min_samples: int = 10_000
    mc_chunk_size: int = 100_000
    mc_workers: int = 4

    # Root finding
    bisection_xtol: float = 1e-8  # boundary curves, in lambda units
    root_xtol: float = 1e-12  # symmetric-equilibrium polynomial roots
    verify_tol: float = 1e-8  # payoff gap accepted when checking a root

    # Equilibrium solvers
    solver_tol: float = 1e-8
    max_iterations: int = 100_000
    dedup_tol: float = 1e-6
    temperature_floor: float = 1e-6
    mirror_step: float = 0.5
    response_step: float = 0.1
    polish_every: int = 25
    polish_threshold: float = 0.05
    support_threshold: float = 1e-3
    support_gap: float = 1e-2  # payoff shortfall from the best reply still counted as support when polishing
    polish_temperature: float = 1e-3  # dynamics polish only once the softmax temperature is this low

    # Ensembles
    ensemble_runs: int = 100
    ensemble_workers: int = 4
    max_nonconverged_fraction: float = 0.2

    # Logging
    log_level: str = "INFO"

    class Config:
        env_prefix = "WTAPOOL_"


settings = Settings()
