"""Tabular posterior-sampling agents, PSR certificates and complexity checks."""

from _geclab import (
    CapacityError,
    ConfigError,
    Error,
    ModelError,
    RankError,
    certify_psr,
    de_dimension,
    elliptical_potential,
    gec_certificate,
    hellinger_squared,
    information_gain,
    kl,
    plan,
    run_acceptance,
    run_experiment,
    total_variation,
    validate_model,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "Error",
    "ModelError",
    "RankError",
    "certify_psr",
    "de_dimension",
    "elliptical_potential",
    "gec_certificate",
    "hellinger_squared",
    "information_gain",
    "kl",
    "plan",
    "run_acceptance",
    "run_experiment",
    "total_variation",
    "validate_model",
]
