"""Feynman-Kac Monte Carlo for semi-relativistic Schrodinger operators and
the relativistic Pauli-Fierz model, with deterministic verification oracles."""

from .errors import (AuditFailed, BetaOutOfRange, ConfigError, DegenerateEstimate, NoConvergence, NonDyadicSplit,
                     OutOfDomain, QuadratureError, RejectedMZero, SrpfmcError, SupportOverlap, TableCoverageExceeded,
                     ZeroWavevector)
from .estimate import Estimate
from .field import CutoffSpec, KernelTable, RadialProfile, TestFunctionSpec, build_kernel_table
from .params import ModelParams
from .potentials import PotentialSpec
from .stochastic import PathConfig, sample_path, sample_paths

__version__ = "0.1.0"

__all__ = [
    "AuditFailed", "BetaOutOfRange", "ConfigError", "CutoffSpec", "DegenerateEstimate", "Estimate", "KernelTable",
    "ModelParams", "NoConvergence", "NonDyadicSplit", "OutOfDomain", "PathConfig", "PotentialSpec",
    "QuadratureError", "RadialProfile", "RejectedMZero", "SrpfmcError", "SupportOverlap", "TableCoverageExceeded",
    "TestFunctionSpec", "ZeroWavevector", "build_kernel_table", "sample_path", "sample_paths",
]
