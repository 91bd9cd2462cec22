"""Least-squares reconstruction loss with optional L1 penalty, and its gradients.

For parameters ``theta`` the gradients returned are conjugate Wirtinger
derivatives ``dL/d conj(theta)``. For a real coordinate ``x`` of ``theta``,
``dL/dRe(theta) = 2 Re(G)`` and ``dL/dIm(theta) = 2 Im(G)``.

All three gradients factor through the Hermitian matrix
``Gamma = dL/d conj(rho) = sum_i r_i Pi_i + (lam/2) sign(rho)``
where ``r_i = Tr(Pi_i rho) - B_i`` are batch residuals.
"""
from __future__ import annotations

import numpy as np

from .ansatz import CholeskyAnsatz, PNAnsatz, StiefelAnsatz, cd_to_density, lower_mask
from .measurement import DataSet, ObservableSet


def _batch(data: DataSet, batch):
    if batch is None:
        return data.indices, data.values
    batch = np.asarray(batch, dtype=np.int64)
    return data.indices[batch], data.values[batch]


def residuals(rho, data: DataSet, obs: ObservableSet, batch=None) -> np.ndarray:
    ops, vals = _batch(data, batch)
    return obs.expectations(rho, ops) - vals


def complex_sign(z):
    mag = np.abs(z)
    return np.where(mag > 0, z / np.where(mag > 0, mag, 1), 0)


def loss(rho, data: DataSet, obs: ObservableSet, batch=None, lam: float = 0.0) -> float:
    """Sum of squared batch residuals plus ``lam`` times the entrywise modulus sum of ``rho``."""
    r = residuals(rho, data, obs, batch)
    out = float(r @ r)
    if lam:
        out += lam * float(np.abs(rho).sum())
    return out


def density_gradient(rho, data: DataSet, obs: ObservableSet, batch=None, lam: float = 0.0):
    ops, vals = _batch(data, batch)
    r = obs.expectations(rho, ops) - vals
    gamma = obs.weighted_sum(r, ops)
    if lam:
        gamma = gamma + 0.5 * lam * complex_sign(rho)
    return gamma


def grad_cd(a: CholeskyAnsatz, data, obs, batch=None, lam: float = 0.0) -> np.ndarray:
    T = a.T
    rho = cd_to_density(a)
    s = np.vdot(T, T).real
    gamma = density_gradient(rho, data, obs, batch, lam)
    tr = np.vdot(gamma, rho).real  # Tr(Gamma rho), both Hermitian
    G = 2.0 * (T @ gamma - tr * T) / s
    if a.triangular:
        G = np.where(lower_mask(a.dim), G, 0)
    return G


def grad_sm(a: StiefelAnsatz, data, obs, batch=None, lam: float = 0.0) -> np.ndarray:
    blocks = a.blocks
    rho = blocks.T @ blocks.conj()
    gamma = density_gradient(rho, data, obs, batch, lam)
    return (2.0 * blocks @ gamma.T).ravel()


def grad_pn(a: PNAnsatz, data, obs, batch=None, lam: float = 0.0):
    """Gradients at the current point, treating ``C`` and ``Q`` as free (no projection Jacobian)."""
    C, Q = a.C, a.Q
    rho = (Q.T * C) @ Q.conj()
    gamma = density_gradient(rho, data, obs, batch, lam)
    gq = Q @ gamma.T  # row a holds Gamma q_a
    dC = 2.0 * np.einsum("ab,ab->a", Q.conj(), gq).real
    dQ = 2.0 * C[:, None] * gq
    return dC, dQ
