"""Norm-integral certificates for linear periodic systems.

Lower bounds on periods, oscillation tests for periodic solutions and
strong-stability tests for periodic Hamiltonian systems, each checked
against an independent Floquet-multiplier computation.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import FloquetError, InputError, NumericalFailure
from .linalg import NormKind, eigenvalues, expm, mat_norm, spectral_radius
from .system import (
    GainFunction,
    HamiltonianSpec,
    MatrixNormGain,
    SecondOrderSpec,
    SystemSpec,
    TrigMatrixFunction,
    companion_lift,
    parse_system_file,
)

__all__ = [
    "__version__",
    "FloquetError",
    "InputError",
    "NumericalFailure",
    "NormKind",
    "eigenvalues",
    "expm",
    "mat_norm",
    "spectral_radius",
    "GainFunction",
    "HamiltonianSpec",
    "MatrixNormGain",
    "SecondOrderSpec",
    "SystemSpec",
    "TrigMatrixFunction",
    "companion_lift",
    "parse_system_file",
]
