"""Rank-controlled density-matrix parameterizations.

Three forms map unconstrained or manifold-constrained parameters to a valid
density matrix:

* Cholesky: ``rho = T^dag T / Tr(T^dag T)`` with ``T`` an ``m x d`` matrix.
* Stiefel: ``rho = sum_a w_a w_a^dag`` for a unit vector ``W`` made of ``m``
  stacked blocks ``w_a`` of length ``d``.
* Projective normalization: ``rho = sum_a c_a q_a q_a^dag`` with ``c`` on the
  probability simplex and unit rows ``q_a``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConstraintViolationError, DegenerateAnsatzError, InvalidArgumentError, ZeroGradient

KINDS = ("cd", "cd-tri", "sm", "pn")


@dataclass(frozen=True)
class CholeskyAnsatz:
    T: np.ndarray
    triangular: bool = False

    @property
    def rank(self):
        return self.T.shape[0]

    @property
    def dim(self):
        return self.T.shape[1]

    def density(self):
        return cd_to_density(self)


@dataclass(frozen=True)
class StiefelAnsatz:
    W: np.ndarray
    rank: int

    @property
    def dim(self):
        return len(self.W) // self.rank

    @property
    def blocks(self):
        return self.W.reshape(self.rank, -1)

    def density(self):
        return sm_to_density(self)


@dataclass(frozen=True)
class PNAnsatz:
    C: np.ndarray
    Q: np.ndarray

    @property
    def rank(self):
        return len(self.C)

    @property
    def dim(self):
        return self.Q.shape[1]

    def density(self):
        return pn_to_density(self)


def lower_mask(dim):
    return np.tril(np.ones((dim, dim), dtype=bool))


def cd_to_density(a: CholeskyAnsatz) -> np.ndarray:
    T = a.T
    s = np.vdot(T, T).real
    if s <= 1e-30:
        raise DegenerateAnsatzError("Cholesky factor is zero")
    rho = T.conj().T @ T / s
    return 0.5 * (rho + rho.conj().T)


def sm_to_density(a: StiefelAnsatz) -> np.ndarray:
    norm2 = np.vdot(a.W, a.W).real
    if abs(norm2 - 1) > 1e-6:
        raise ConstraintViolationError(f"Stiefel vector has squared norm {norm2:.12g}")
    blocks = a.blocks
    rho = blocks.T @ blocks.conj()
    return 0.5 * (rho + rho.conj().T)


def sm_retract_step(a: StiefelAnsatz, G: np.ndarray, eta: float) -> StiefelAnsatz:
    """One Cayley-retracted descent step on the unit sphere in ``C^(m*d)``.

    ``G`` is the Euclidean gradient with respect to ``conj(W)``. Only its
    direction matters: the step uses ``G / ||G||``. With ``A = [g, W]`` and
    ``B = [W, -g]`` the Cayley update reduces, by Sherman-Morrison-Woodbury,
    to a 2x2 solve.
    """
    W = a.W
    gnorm = np.linalg.norm(G)
    if gnorm <= 1e-30:
        raise ZeroGradient("gradient vanished")
    g = G / gnorm
    wg = np.vdot(W, g)
    ww = np.vdot(W, W).real
    gw = np.conj(wg)
    # B^dag A for A = [g, W], B = [W, -g]
    h = 0.5 * eta
    m00, m01 = 1 + h * wg, h * ww
    m10, m11 = -h * 1.0, 1 - h * gw
    # B^dag W
    r0, r1 = ww, -gw
    det = m00 * m11 - m01 * m10
    s0 = (m11 * r0 - m01 * r1) / det
    s1 = (-m10 * r0 + m00 * r1) / det
    W_new = W - eta * (g * s0 + W * s1)
    return replace(a, W=W_new)


def sm_renormalize(a: StiefelAnsatz) -> StiefelAnsatz:
    return replace(a, W=a.W / np.linalg.norm(a.W))


def pn_to_density(a: PNAnsatz) -> np.ndarray:
    C, Q = a.C, a.Q
    if np.any(C < 0) or abs(C.sum() - 1) > 1e-10:
        raise ConstraintViolationError("PN weights are not a probability vector")
    if np.max(np.abs(np.linalg.norm(Q, axis=1) - 1)) > 1e-10:
        raise ConstraintViolationError("PN state rows are not normalized")
    rho = (Q.T * C) @ Q.conj()
    return 0.5 * (rho + rho.conj().T)


def softmax(x):
    z = np.exp(x - np.max(x))
    return z / z.sum()


def pn_project(C_raw, Q_raw) -> PNAnsatz:
    """Softmax the weights and divide each state row by its norm."""
    Q_raw = np.atleast_2d(np.asarray(Q_raw, dtype=complex))
    norms = np.linalg.norm(Q_raw, axis=1)
    if np.any(norms <= 1e-30):
        raise DegenerateAnsatzError("PN state row has zero norm")
    return PNAnsatz(softmax(np.asarray(C_raw, dtype=float)), Q_raw / norms[:, None])


def init_ansatz(kind: str, dim: int, rank: int, seed: int):
    """Random starting point: i.i.d. standard complex Gaussians, then projected."""
    if kind not in KINDS:
        raise InvalidArgumentError(f"unknown parameterization {kind!r}; expected one of {KINDS}")
    if kind == "cd-tri":
        rank = dim
    if rank < 1 or rank > dim:
        raise InvalidArgumentError(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    rng = np.random.default_rng(seed)

    def cgauss(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    if kind == "cd":
        return CholeskyAnsatz(cgauss((rank, dim)))
    if kind == "cd-tri":
        return CholeskyAnsatz(np.where(lower_mask(dim), cgauss((dim, dim)), 0), triangular=True)
    if kind == "sm":
        W = cgauss(rank * dim)
        return StiefelAnsatz(W / np.linalg.norm(W), rank)
    return pn_project(rng.standard_normal(rank), cgauss((rank, dim)))
