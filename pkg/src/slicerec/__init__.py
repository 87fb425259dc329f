"""Sliced error correction of Gaussian key elements."""

from .channel import ChannelParams, IntegrationError, sample_pairs
from .distill import PaParams, RateReport, privacy_amplify, rate_report, toeplitz_hash
from .quantizer import (
    IntervalPartition,
    MutualInfoReport,
    OptimizationError,
    OptimizerSettings,
    interval_probability,
    mutual_information,
    optimize_partition,
)
from .reconciliation import (
    AccountingMode,
    Cascade,
    CascadeConfig,
    DiscloseAll,
    DiscloseNone,
    LeakageLedger,
    Transcript,
    run_sec,
)
from .slicing import SliceDesign, SliceEstimator, SliceSystem, design_system, slice_error_rates

__all__ = [
    "AccountingMode",
    "Cascade",
    "CascadeConfig",
    "ChannelParams",
    "DiscloseAll",
    "DiscloseNone",
    "IntegrationError",
    "IntervalPartition",
    "LeakageLedger",
    "MutualInfoReport",
    "OptimizationError",
    "OptimizerSettings",
    "PaParams",
    "RateReport",
    "SliceDesign",
    "SliceEstimator",
    "SliceSystem",
    "Transcript",
    "design_system",
    "interval_probability",
    "mutual_information",
    "optimize_partition",
    "privacy_amplify",
    "rate_report",
    "run_sec",
    "sample_pairs",
    "slice_error_rates",
    "toeplitz_hash",
]
