"""Measurement operator sets and simulated expectation-value data.

Pauli strings are never stored as dense matrices. A Pauli string maps each
basis state ``|j>`` to ``phase_j |j ^ xmask>``, so ``Tr(P rho)`` and weighted
sums of strings need only O(d) work per operator. Dense matrices are built on
request for inspection and testing.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .qstates import _coherent_amplitudes

PAULI_LETTERS = "IXYZ"
_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _popcount(a):
    a = np.asarray(a, dtype=np.int64)
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a = a >> 1
    return count


class ObservableSet:
    """Ordered collection of Hermitian measurement operators on a ``dim``-level system."""

    kind = "dense"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __len__(self):
        raise NotImplementedError

    def _index(self, idx):
        if idx is None:
            return np.arange(len(self))
        return np.asarray(idx, dtype=np.int64)

    def expectations(self, rho, idx=None) -> np.ndarray:
        """Real parts of ``Tr(Pi_i rho)`` for the operators in ``idx``."""
        return self.expectations_complex(rho, idx).real

    def expectations_complex(self, rho, idx=None) -> np.ndarray:
        raise NotImplementedError

    def weighted_sum(self, weights, idx=None) -> np.ndarray:
        """``sum_i weights_i Pi_i`` over the operators in ``idx``."""
        raise NotImplementedError

    def operator(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def matrices(self, idx=None) -> np.ndarray:
        return np.array([self.operator(i) for i in self._index(idx)])


class DenseObservableSet(ObservableSet):
    """Arbitrary Hermitian operators held as a ``(M, d, d)`` array."""

    def __init__(self, operators, kind="dense"):
        ops = np.asarray(operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise InvalidArgumentError(f"operators must have shape (M, d, d), got {ops.shape}")
        if np.max(np.abs(ops - ops.conj().transpose(0, 2, 1)), initial=0.0) > 1e-12:
            raise InvalidArgumentError("operators must be Hermitian")
        super().__init__(ops.shape[1])
        self.ops = ops
        self.kind = kind

    def __len__(self):
        return len(self.ops)

    def expectations_complex(self, rho, idx=None):
        ops = self.ops[self._index(idx)]
        # Tr(P rho) = sum_ab P_ab rho_ba
        return np.einsum("iab,ba->i", ops, rho)

    def weighted_sum(self, weights, idx=None):
        ops = self.ops[self._index(idx)]
        return np.tensordot(np.asarray(weights), ops, axes=1)

    def operator(self, i):
        return self.ops[i].copy()


class PauliSet(ObservableSet):
    """All ``4**n`` Pauli strings in lexicographic order of their letters (I<X<Y<Z)."""

    kind = "pauli"

    def __init__(self, n_qubits: int):
        if int(n_qubits) != n_qubits or n_qubits < 1:
            raise InvalidArgumentError(f"n_qubits must be a positive integer, got {n_qubits}")
        n = int(n_qubits)
        super().__init__(2**n)
        self.n_qubits = n
        m = 4**n
        # letter code per qubit, qubit 0 first (most significant)
        codes = (np.arange(m)[:, None] // 4 ** np.arange(n - 1, -1, -1)[None, :]) % 4
        weights = 2 ** np.arange(n - 1, -1, -1)
        is_x = (codes == 1) | (codes == 2)
        is_z = (codes == 2) | (codes == 3)
        self.codes = codes
        self.xmask = (is_x * weights).sum(axis=1)
        self.zmask = (is_z * weights).sum(axis=1)
        self.n_y = (codes == 2).sum(axis=1)
        d = self.dim
        j = np.arange(d)
        self._phase = (1j ** self.n_y)[:, None] * (
            1 - 2 * (_popcount(j[None, :] & self.zmask[:, None]) % 2)
        )
        # (x, j) -> (j ^ x, j) is a bijection of the d x d entries
        self._rows = j[None, :] ^ j[:, None]

    def __len__(self):
        return 4**self.n_qubits

    def label(self, i: int) -> str:
        return "".join(PAULI_LETTERS[c] for c in self.codes[i])

    def index_of(self, label: str) -> int:
        if len(label) != self.n_qubits:
            raise InvalidArgumentError(f"label {label!r} has wrong length")
        out = 0
        for ch in label.upper():
            out = 4 * out + PAULI_LETTERS.index(ch)
        return out

    def expectations_complex(self, rho, idx=None):
        idx = self._index(idx)
        rho = np.asarray(rho)
        d = self.dim
        # gathered[x, j] = rho[j, j ^ x]
        gathered = rho[np.arange(d)[None, :], self._rows]
        return np.sum(self._phase[idx] * gathered[self.xmask[idx]], axis=1)

    def weighted_sum(self, weights, idx=None):
        idx = self._index(idx)
        d = self.dim
        contrib = np.asarray(weights)[:, None] * self._phase[idx]
        acc = np.zeros((d, d), dtype=complex)
        np.add.at(acc, self.xmask[idx], contrib)
        out = np.empty((d, d), dtype=complex)
        out[self._rows, np.arange(d)[None, :]] = acc
        return out

    def operator(self, i):
        out = np.ones((1, 1), dtype=complex)
        for c in self.codes[i]:
            out = np.kron(out, _PAULI_MATS[PAULI_LETTERS[c]])
        return out


class HusimiSet(ObservableSet):
    """Scaled coherent-state projectors ``(1/pi)|beta><beta|`` on a square grid.

    The grid runs over ``[-extent, extent]`` in both quadratures with ``steps``
    points each, ordered row-major with the imaginary part outer. Probe states
    are truncated to ``dim`` Fock levels and, by default, renormalized.
    """

    kind = "husimi-projector"

    def __init__(self, extent: float, steps: int, dim: int, renormalize: bool = True):
        if steps < 2 or dim < 2:
            raise InvalidArgumentError("husimi grid needs steps >= 2 and dim >= 2")
        super().__init__(dim)
        self.extent = float(extent)
        self.steps = int(steps)
        self.renormalize = renormalize
        axis = np.linspace(-extent, extent, steps)
        yy, xx = np.meshgrid(axis, axis, indexing="ij")
        self.betas = (xx + 1j * yy).ravel()
        kets = np.array([_coherent_amplitudes(b, dim) for b in self.betas]).T
        if renormalize:
            kets = kets / np.linalg.norm(kets, axis=0)
        self.kets = kets

    def __len__(self):
        return len(self.betas)

    def expectations_complex(self, rho, idx=None):
        k = self.kets[:, self._index(idx)]
        return np.sum(k.conj() * (rho @ k), axis=0) / np.pi

    def weighted_sum(self, weights, idx=None):
        k = self.kets[:, self._index(idx)]
        return (k * np.asarray(weights)) @ k.conj().T / np.pi

    def operator(self, i):
        k = self.kets[:, i]
        return np.outer(k, k.conj()) / np.pi


def pauli_set(n_qubits: int) -> PauliSet:
    return PauliSet(n_qubits)


def husimi_set(extent: float, steps: int, dim: int, renormalize: bool = True) -> HusimiSet:
    return HusimiSet(extent, steps, dim, renormalize=renormalize)


@dataclass(frozen=True)
class DataSet:
    """Expectation values paired with the operator indices they were measured on."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if idx.ndim != 1 or idx.shape != vals.shape:
            raise InvalidArgumentError("indices and values must be 1-d arrays of equal length")
        if len(np.unique(idx)) != len(idx):
            raise InvalidArgumentError("operator indices must be unique")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.indices)

    def check_against(self, obs: ObservableSet):
        if len(self) and (self.indices.min() < 0 or self.indices.max() >= len(obs)):
            raise InvalidArgumentError("data refers to operators outside the observable set")
        return self

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "value"])
            for i, v in zip(self.indices, self.values):
                w.writerow([int(i), repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            np.array([int(r["index"]) for r in rows], dtype=np.int64),
            np.array([float(r["value"]) for r in rows]),
        )


def measure(rho, obs: ObservableSet) -> DataSet:
    rho = np.asarray(rho)
    if rho.shape != (obs.dim, obs.dim):
        raise InvalidArgumentError(f"state of shape {rho.shape} does not match operator dim {obs.dim}")
    vals = obs.expectations_complex(rho)
    resid = np.max(np.abs(vals.imag), initial=0.0)
    if resid > 1e-10:
        raise InvalidArgumentError(f"expectation values have imaginary residue {resid:.3g}; is rho Hermitian?")
    return DataSet(np.arange(len(obs)), vals.real.copy())


def depolarize(rho, eps: float) -> np.ndarray:
    if not 0.0 <= eps <= 1.0:
        raise InvalidArgumentError(f"eps must lie in [0, 1], got {eps}")
    rho = np.asarray(rho)
    d = rho.shape[0]
    return (1 - eps) * rho + (eps / d) * np.eye(d)


def gaussian_noise(data: DataSet, sigma: float, seed: int) -> DataSet:
    """Replace each value by an independent draw from N(value, sigma**2). No clipping."""
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    noisy = rng.normal(data.values, sigma) if sigma > 0 else data.values.copy()
    return DataSet(data.indices.copy(), noisy)


def subsample(data: DataSet, size: int, seed: int, keep_identity: bool = True) -> DataSet:
    """Uniform random subset without replacement, preserving the original entry order.

    With ``keep_identity`` the entry for operator index 0 (the all-identity
    Pauli string) is always kept when present.
    """
    n = len(data)
    if size < 1 or size > n:
        raise InvalidArgumentError(f"cannot draw {size} entries from a data set of {n}")
    rng = np.random.default_rng(seed)
    forced = np.flatnonzero(data.indices == 0) if keep_identity else np.array([], dtype=np.int64)
    pool = np.setdiff1d(np.arange(n), forced)
    picked = rng.choice(pool, size=size - len(forced), replace=False)
    keep = np.sort(np.concatenate([forced, picked]))
    return DataSet(data.indices[keep], data.values[keep])
