"""Fidelity between density matrices and Wigner functions of single-mode states."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError
from .qstates import PSD_TOL

# eigenvalues below this (times dim) are treated as eigensolver dust
_DUST = 1e-14


def psd_sqrt(rho: np.ndarray) -> np.ndarray:
    """Square root of the Hermitian part of ``rho`` with negative and dust eigenvalues clamped to 0."""
    h = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(h)
    w = np.where(w > _DUST * len(w), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def uj_fidelity(rho: np.ndarray, sigma: np.ndarray, check: bool = True) -> float:
    """Uhlmann-Jozsa fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``, clamped to [0, 1].

    ``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` equals the sum of singular values of
    ``sqrt(rho) sqrt(sigma)``; the SVD route avoids taking square roots of
    rounding noise. With ``check=False`` non-PSD inputs (e.g. linear-inversion
    output) are accepted and their negative eigenvalues clamped.
    """
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape or rho.ndim != 2:
        raise InvalidArgumentError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    if check:
        for m in (rho, sigma):
            if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < PSD_TOL:
                raise InvalidArgumentError("fidelity input is not positive semidefinite")
    s = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    return float(np.clip(np.sum(s) ** 2, 0.0, 1.0))


def pure_fidelity(psi: np.ndarray, sigma: np.ndarray) -> float:
    """``<psi|sigma|psi>`` for a normalized pure state."""
    return float(np.clip(np.vdot(psi, sigma @ psi).real, 0.0, 1.0))


@dataclass
class PhaseGrid:
    """Real field sampled on a square grid; ``values[iy, ix]`` at ``axis[ix] + 1j*axis[iy]``."""

    extent: float
    steps: int
    values: np.ndarray

    @property
    def axis(self):
        return np.linspace(-self.extent, self.extent, self.steps)

    @property
    def cell_area(self):
        h = 2 * self.extent / (self.steps - 1)
        return h * h

    def to_csv(self, path):
        ax = self.axis
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "w"])
            for iy, y in enumerate(ax):
                for ix, x in enumerate(ax):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[iy, ix]))])


@lru_cache(maxsize=16)
def _displacement_basis(dim):
    """Eigendecomposition of the Hermitian ``i(a^dag - a)`` in ``dim`` Fock levels."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    return np.linalg.eigh(1j * (a.T - a))


def displacement(beta: complex, dim: int) -> np.ndarray:
    """``exp(beta a^dag - conj(beta) a)`` with the generator truncated to ``dim`` levels."""
    mu, v = _displacement_basis(dim)
    u = np.exp(1j * np.angle(beta) * np.arange(dim))
    core = (v * np.exp(-1j * abs(beta) * mu)) @ v.conj().T
    return (u[:, None] * core) * u.conj()[None, :]


def _cutoff(dim, radius):
    # generator cutoff that keeps the dim x dim corner of the displacement exact to ~1e-13
    k = dim + radius**2 + 6 * radius + 20
    return int(32 * np.ceil(max(k, 2 * dim) / 32))


def wigner_values(rho: np.ndarray, betas: np.ndarray, chunk: int = 128) -> np.ndarray:
    """Complex-valued ``(2/pi) Tr[D(b)^dag rho D(b) P]`` at each point ``b`` of ``betas``.

    Uses ``D(b) P D(b)^dag = D(2b) P``, so only the ``dim x dim`` corner of the
    displacement by ``2b`` is needed. That corner is taken from the generator
    exponentiated in a larger truncated space whose cutoff grows with ``|b|``.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    betas = np.asarray(betas, dtype=complex).ravel()
    order = np.argsort(np.abs(betas), kind="stable")
    n = np.arange(d)
    sign = (1 - 2 * (n % 2)).astype(float)
    # rho_nm (-1)^n, arranged to contract with D_mn
    weight = (rho * sign[:, None]).T
    out = np.empty(len(betas), dtype=complex)
    for s in range(0, len(order), chunk):
        sel = order[s : s + chunk]
        alpha = 2 * betas[sel]
        mu, v = _displacement_basis(_cutoff(d, float(np.abs(alpha).max())))
        vd = v[:d]
        core = (vd[None, :, :] * np.exp(-1j * np.abs(alpha)[:, None, None] * mu[None, None, :])) @ vd.conj().T
        ph = np.exp(1j * np.angle(alpha)[:, None, None] * (n[None, :, None] - n[None, None, :]))
        out[sel] = (2 / np.pi) * np.einsum("cmn,mn->c", ph * core, weight)
    return out


def wigner(rho: np.ndarray, extent: float, steps: int) -> PhaseGrid:
    """Wigner function of a Fock-basis density matrix on a square phase-space grid."""
    rho = np.asarray(rho)
    if rho.shape[0] < 2:
        raise InvalidArgumentError("wigner needs dim >= 2")
    ax = np.linspace(-extent, extent, steps)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    vals = wigner_values(rho, xx + 1j * yy)
    return PhaseGrid(float(extent), int(steps), vals.real.reshape(steps, steps))
