"""Finite-key statistical-fluctuation bounds and decoy-state BB84 key rates."""

from .channel import ChannelModel, gains_and_errors, simulate_counts
from .decoy import (
    AbortSignal,
    KeyRateReport,
    ObservedCounts,
    ProtocolParams,
    SecurityBudget,
    evaluate,
)
from .numerics import DomainError, NumericalError, binary_entropy, erfc_inv
from .optimizer import OptimizationSpace, OptimizerConfig, max_secure_distance, optimize_keyrate
from .tail_bounds import (
    Deviation,
    Direction,
    MethodTag,
    SampleSplit,
    chernoff_delta_lower,
    chernoff_delta_upper,
    expected_lower,
    gamma_upper_analytic,
    gamma_upper_numeric,
    sampling_gamma,
    variant_delta_lower,
    variant_delta_upper,
)

__version__ = "0.1.0"

__all__ = [
    "AbortSignal",
    "ChannelModel",
    "Deviation",
    "Direction",
    "DomainError",
    "KeyRateReport",
    "MethodTag",
    "NumericalError",
    "ObservedCounts",
    "OptimizationSpace",
    "OptimizerConfig",
    "ProtocolParams",
    "SampleSplit",
    "SecurityBudget",
    "binary_entropy",
    "chernoff_delta_lower",
    "chernoff_delta_upper",
    "erfc_inv",
    "evaluate",
    "expected_lower",
    "gains_and_errors",
    "gamma_upper_analytic",
    "gamma_upper_numeric",
    "max_secure_distance",
    "optimize_keyrate",
    "sampling_gamma",
    "simulate_counts",
    "variant_delta_lower",
    "variant_delta_upper",
]
