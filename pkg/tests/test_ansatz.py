import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tomograd import ansatz as az
from tomograd import qstates
from tomograd.errors import ConstraintViolationError, DegenerateAnsatzError, InvalidArgumentError, ZeroGradient


def test_cd_identity_gives_maximally_mixed():
    rho = az.cd_to_density(az.CholeskyAnsatz(np.eye(3, dtype=complex)))
    assert np.allclose(rho, np.eye(3) / 3)


def test_cd_scale_invariant_pure():
    rho = az.cd_to_density(az.CholeskyAnsatz(np.array([[7.0, 7.0]], dtype=complex)))
    assert np.allclose(rho, 0.5 * np.ones((2, 2)))


def test_cd_zero_factor_rejected():
    with pytest.raises(DegenerateAnsatzError):
        az.cd_to_density(az.CholeskyAnsatz(np.zeros((1, 2), dtype=complex)))


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(az.KINDS), dim=st.integers(2, 10), data=st.data(), seed=st.integers(0, 2**31))
def test_init_ansatz_gives_valid_density_of_bounded_rank(kind, dim, data, seed):
    rank = data.draw(st.integers(1, dim))
    a = az.init_ansatz(kind, dim, rank, seed)
    rho = a.density()
    assert qstates.is_density(rho)
    expected = dim if kind == "cd-tri" else rank
    assert qstates.numerical_rank(rho, 1e-12) <= expected


def test_cd_tri_is_lower_triangular():
    a = az.init_ansatz("cd-tri", 5, 2, 0)
    assert a.triangular and a.rank == 5
    assert np.all(a.T[~az.lower_mask(5)] == 0)


def test_init_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        az.init_ansatz("xx", 4, 1, 0)
    with pytest.raises(InvalidArgumentError):
        az.init_ansatz("cd", 4, 5, 0)


def test_sm_density_is_sum_of_block_outer_products():
    a = az.init_ansatz("sm", 4, 3, 1)
    blocks = a.W.reshape(3, 4)
    ref = sum(np.outer(b, b.conj()) for b in blocks)
    assert np.allclose(a.density(), ref)


def test_sm_norm_violation():
    a = az.StiefelAnsatz(np.ones(4, dtype=complex), 2)
    with pytest.raises(ConstraintViolationError):
        a.density()


def _cayley_dense(W, G, eta):
    """Reference Cayley step with the full k x k inverse."""
    g = G / np.linalg.norm(G)
    A = np.column_stack([g, W])
    B = np.column_stack([W, -g])
    U = A @ B.conj().T
    k = len(W)
    return np.linalg.solve(np.eye(k) + 0.5 * eta * U, (np.eye(k) - 0.5 * eta * U) @ W)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), eta=st.floats(1e-3, 5.0))
def test_retraction_matches_dense_cayley_and_keeps_norm(seed, eta):
    rng = np.random.default_rng(seed)
    a = az.init_ansatz("sm", 3, 2, seed)
    G = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    new = az.sm_retract_step(a, G, eta)
    assert np.allclose(new.W, _cayley_dense(a.W, G, eta), atol=1e-12)
    assert abs(np.linalg.norm(new.W) - 1) < 1e-12


def test_retraction_descends_for_small_step():
    a = az.init_ansatz("sm", 4, 1, 3)
    target = np.zeros(4, dtype=complex)
    target[0] = 1
    # f(W) = -|<target|W>|^2, gradient wrt conj(W) is -target <target|W>
    G = -target * np.vdot(target, a.W)
    new = az.sm_retract_step(a, G, 1e-2)
    assert abs(np.vdot(target, new.W)) > abs(np.vdot(target, a.W))


def test_retraction_zero_gradient():
    a = az.init_ansatz("sm", 2, 1, 0)
    with pytest.raises(ZeroGradient):
        az.sm_retract_step(a, np.zeros(2, dtype=complex), 0.1)


def test_softmax_and_projection():
    p = az.softmax(np.array([1000.0, 1000.0, -np.inf]))
    assert np.allclose(p, [0.5, 0.5, 0])
    a = az.pn_project([0.0, 0.0], [[3, 4j], [0, 2]])
    assert np.allclose(a.C, 0.5)
    assert np.allclose(np.linalg.norm(a.Q, axis=1), 1)
    with pytest.raises(DegenerateAnsatzError):
        az.pn_project([0.0], [[0, 0]])


def test_pn_invariants_checked():
    with pytest.raises(ConstraintViolationError):
        az.PNAnsatz(np.array([0.7, 0.7]), np.eye(2, dtype=complex)).density()
    with pytest.raises(ConstraintViolationError):
        az.PNAnsatz(np.array([1.0]), np.array([[1.0, 1.0]], dtype=complex)).density()


def test_retraction_norm_drift_over_many_steps():
    rng = np.random.default_rng(0)
    a = az.init_ansatz("sm", 4, 2, 0)
    for _ in range(1000):
        G = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        a = az.sm_retract_step(a, G, 0.3)
    assert abs(np.linalg.norm(a.W) - 1) < 1e-8


def test_retraction_vanishes_with_step():
    a = az.init_ansatz("sm", 3, 1, 1)
    G = np.array([1.0, -2.0, 0.5j])
    G = G - a.W * np.vdot(a.W, G)
    assert np.linalg.norm(az.sm_retract_step(a, G, 1e-9).W - a.W) < 1e-8


def test_sm_examples():
    W = np.concatenate([np.sqrt(0.5) * np.array([1, 0]), np.sqrt(0.5) * np.array([0, 1])]).astype(complex)
    assert np.allclose(az.StiefelAnsatz(W, 2).density(), np.eye(2) / 2)
