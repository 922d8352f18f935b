"""Experiment orchestration, persistence and the command line."""

from .cli import cli_dispatch, main
from .config import ExperimentConfig, load_config_file
from .experiments import (
    AprioriVerdict,
    HardyVerdict,
    IdentityReport,
    SweepCell,
    SweepReport,
    TruncationPair,
    TruncationReport,
    apriori_for,
    build_problem,
    build_spec,
    certify_blowup,
    fode_comparison_campaign,
    identity_check,
    near_extremal_profile,
    random_admissible_profile,
    run_threshold_sweep,
    run_truncation_study,
    verify_apriori,
    verify_hardy,
)
from .io import SCHEMA_VERSION, OutputBundle, RunManifest

__all__ = [
    "AprioriVerdict",
    "ExperimentConfig",
    "HardyVerdict",
    "IdentityReport",
    "OutputBundle",
    "RunManifest",
    "SCHEMA_VERSION",
    "SweepCell",
    "SweepReport",
    "TruncationPair",
    "TruncationReport",
    "apriori_for",
    "build_problem",
    "build_spec",
    "certify_blowup",
    "cli_dispatch",
    "fode_comparison_campaign",
    "identity_check",
    "load_config_file",
    "main",
    "near_extremal_profile",
    "random_admissible_profile",
    "run_threshold_sweep",
    "run_truncation_study",
    "verify_apriori",
    "verify_hardy",
]
