"""Gradient-descent quantum state tomography with rank-controlled parameterizations."""
from .ansatz import init_ansatz
from .baseline import imle, linear_inversion
from .measurement import DataSet, husimi_set, measure, pauli_set
from .metrics import uj_fidelity, wigner
from .optimize import ReconstructionResult, RunConfig, reconstruct

__version__ = "0.1.0"

__all__ = [
    "DataSet",
    "ReconstructionResult",
    "RunConfig",
    "husimi_set",
    "imle",
    "init_ansatz",
    "linear_inversion",
    "measure",
    "pauli_set",
    "reconstruct",
    "uj_fidelity",
    "wigner",
]
