"""Target states for tomography: qubit registers and truncated single-mode states.

States are plain numpy arrays. Pure states are 1-d complex vectors, density
matrices are square complex arrays. Qubit 0 is the most significant bit of the
computational-basis index.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import InvalidArgumentError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-8
NORM_TOL = 1e-10


def _check_qubits(n_qubits):
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise InvalidArgumentError(f"n_qubits must be a positive integer, got {n_qubits}")
    return int(n_qubits)


def ghz_state(n_qubits: int) -> np.ndarray:
    n = _check_qubits(n_qubits)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / math.sqrt(2)
    return psi


def hadamard_state(n_qubits: int) -> np.ndarray:
    n = _check_qubits(n_qubits)
    return np.full(2**n, 2 ** (-n / 2), dtype=complex)


def random_density(dim: int, rank: int, seed: int) -> np.ndarray:
    """Ginibre-ensemble mixed state of rank at most ``rank``.

    ``G`` is a ``rank x dim`` matrix of standard complex Gaussians and the
    state is ``G^dag G / Tr(G^dag G)``.
    """
    if dim < 1 or rank < 1 or rank > dim:
        raise InvalidArgumentError(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((rank, dim)) + 1j * rng.standard_normal((rank, dim))
    rho = g.conj().T @ g
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_pure_state(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def _coherent_amplitudes(xi, dim):
    n = np.arange(dim)
    # log-space Poisson weights stay finite for large |xi| and dim
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if xi == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return amps
    mag = np.exp(-abs(xi) ** 2 / 2 + n * math.log(abs(xi)) - 0.5 * log_fact)
    return mag * np.exp(1j * n * np.angle(xi))


def coherent_state(xi: complex, dim: int, *, warn: bool = True) -> np.ndarray:
    """Truncated coherent state, renormalized after truncation."""
    if dim < 2:
        raise InvalidArgumentError(f"dim must be >= 2, got {dim}")
    r = abs(xi)
    if warn and r * r + 5 * r > dim:
        warnings.warn(
            f"Fock truncation dim={dim} is small for |xi|={r:.3g}", RuntimeWarning, stacklevel=2
        )
    amps = _coherent_amplitudes(complex(xi), dim)
    return amps / np.linalg.norm(amps)


def cat_state(xi: complex, dim: int) -> np.ndarray:
    """Even cat state proportional to |xi> + |-xi>."""
    psi = coherent_state(xi, dim) + coherent_state(-xi, dim)
    return psi / np.linalg.norm(psi)


def fock_state(n: int, dim: int) -> np.ndarray:
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2))


def validity_report(rho: np.ndarray) -> dict:
    """Hermiticity defect, trace defect and minimum eigenvalue of ``rho``."""
    rho = np.asarray(rho)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace_err = float(abs(np.trace(rho) - 1))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return {"hermitian_err": herm, "trace_err": trace_err, "min_eig": min_eig}


def is_density(rho: np.ndarray) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    rep = validity_report(rho)
    return (
        rep["hermitian_err"] <= HERMITIAN_TOL
        and rep["trace_err"] <= TRACE_TOL
        and rep["min_eig"] >= PSD_TOL
    )


def check_density(rho: np.ndarray) -> np.ndarray:
    """Return ``rho`` unchanged or raise if it is not a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError(f"density matrix must be square, got shape {rho.shape}")
    rep = validity_report(rho)
    if rep["hermitian_err"] > HERMITIAN_TOL:
        raise InvalidArgumentError(f"not Hermitian (defect {rep['hermitian_err']:.3g})")
    if rep["trace_err"] > TRACE_TOL:
        raise InvalidArgumentError(f"trace is not 1 (defect {rep['trace_err']:.3g})")
    if rep["min_eig"] < PSD_TOL:
        raise InvalidArgumentError(f"not positive semidefinite (min eigenvalue {rep['min_eig']:.3g})")
    return rho


def check_pure(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.ndim != 1:
        raise InvalidArgumentError("pure state must be a 1-d vector")
    if abs(np.linalg.norm(psi) - 1) > NORM_TOL:
        raise InvalidArgumentError("pure state is not normalized")
    return psi


def numerical_rank(rho: np.ndarray, tol: float = 1e-10) -> int:
    return int(np.sum(np.linalg.eigvalsh(rho) > tol))
