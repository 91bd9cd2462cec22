"""Non-gradient reference reconstructions: linear inversion and iterative maximum likelihood."""
from __future__ import annotations

import logging
import warnings

import numpy as np

from .errors import ConstraintViolationError, InformationallyIncompleteError, InvalidArgumentError
from .measurement import DataSet, ObservableSet

log = logging.getLogger(__name__)

# observable-set kinds made of positive rank-1 operators
PROJECTOR_KINDS = ("husimi-projector", "projector")


def build_sensing(obs: ObservableSet, idx=None) -> np.ndarray:
    """Sensing matrix ``A[m, n] = Tr(Pi_m E_n)`` with ``E_n = |i><j|`` for ``n = i*dim + j``.

    ``Tr(Pi |i><j|) = Pi[j, i]``, so row ``m`` is the transpose of ``Pi_m`` flattened.
    """
    idx = obs._index(idx)
    d = obs.dim
    basis = np.eye(d * d, dtype=complex).reshape(d * d, d, d)
    return np.array([obs.expectations_complex(e, idx) for e in basis]).T


def linear_inversion(data: DataSet, obs: ObservableSet, rcond: float = 1e-10) -> np.ndarray:
    """Least-squares solution of ``A vec(rho) = B`` over the rows present in ``data``.

    The result is Hermitian but not necessarily positive semidefinite.
    """
    data.check_against(obs)
    A = build_sensing(obs, data.indices)
    d = obs.dim
    sol, _, rank, _ = np.linalg.lstsq(A, data.values.astype(complex), rcond=rcond)
    if rank < d * d:
        raise InformationallyIncompleteError(
            f"sensing matrix has numerical rank {rank} < {d * d}; data are not informationally complete",
            rank=rank,
        )
    rho = sol.reshape(d, d)
    return 0.5 * (rho + rho.conj().T)


def log_likelihood(rho, data: DataSet, obs: ObservableSet) -> float:
    p = obs.expectations(rho, data.indices)
    mask = data.values > 0
    return float(np.sum(data.values[mask] * np.log(np.maximum(p[mask], 1e-300))))


def imle(
    data: DataSet,
    obs: ObservableSet,
    max_iters: int = 5000,
    tol: float = 1e-12,
    rho0: np.ndarray | None = None,
    strict: bool = True,
    callback=None,
    record_every: int = 10,
):
    """Iterative maximum likelihood: ``rho <- N[R rho R]`` with ``R = sum_j (B_j / Tr(P_j rho)) P_j``.

    Only for sets of positive rank-1 operators with nonnegative data. Starts
    from ``I/dim`` unless ``rho0`` is given. Stops after ``max_iters`` or when
    the Frobenius change of an update drops below ``tol``. A log-likelihood
    drop above 1e-9 raises ConstraintViolationError, or is only logged when
    ``strict`` is false.
    ``callback(t, rho)`` runs at iteration 0 and every ``record_every`` steps;
    a truthy return value stops the iteration.

    Returns ``(rho, iterations_run)``.
    """
    data.check_against(obs)
    if obs.kind not in PROJECTOR_KINDS:
        raise InvalidArgumentError(f"iMLE needs a set of rank-1 projectors, got kind {obs.kind!r}")
    B = data.values
    if np.any(B < 0):
        raise InvalidArgumentError("iMLE needs nonnegative data (frequencies)")
    d = obs.dim
    rho = np.eye(d, dtype=complex) / d if rho0 is None else np.array(rho0, dtype=complex)
    ops = data.indices
    pos = B > 0
    prev_ll = -np.inf
    warned = False
    if callback is not None and callback(0, rho):
        return rho, 0
    t = 0
    for t in range(1, max_iters + 1):
        p = obs.expectations(rho, ops)
        # likelihood of the current iterate, reused from the update's own p
        ll = float(np.sum(B[pos] * np.log(np.maximum(p[pos], 1e-300))))
        if ll < prev_ll - 1e-9:
            msg = f"iMLE log-likelihood decreased by {prev_ll - ll:.3g} at iteration {t - 1}"
            if strict:
                raise ConstraintViolationError(msg)
            log.warning(msg)
        prev_ll = ll
        starved = (p < 1e-300) & pos
        if np.any(starved) and not warned:
            warnings.warn(
                f"{int(starved.sum())} data points have vanishing predicted probability; skipped",
                RuntimeWarning,
                stacklevel=2,
            )
            warned = True
        w = np.where(pos & ~starved, B / np.where(starved | (p <= 0), 1.0, p), 0.0)
        if not np.any(w):
            raise InvalidArgumentError(f"no data point has support in the iMLE iterate at iteration {t}")
        R = obs.weighted_sum(w, ops)
        new = R @ rho @ R
        new = 0.5 * (new + new.conj().T)
        new /= np.trace(new).real
        step = np.linalg.norm(new - rho)
        rho = new
        if callback is not None and (t % record_every == 0 or step < tol or t == max_iters):
            if callback(t, rho):
                break
        if step < tol:
            break
    return rho, t
