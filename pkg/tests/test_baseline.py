import logging

import numpy as np
import pytest

from tomograd import qstates
from tomograd.baseline import build_sensing, imle, linear_inversion, log_likelihood
from tomograd.errors import InformationallyIncompleteError, InvalidArgumentError
from tomograd.measurement import DataSet, DenseObservableSet, gaussian_noise, husimi_set, measure, pauli_set


def test_sensing_matrix_rows():
    obs = pauli_set(1)
    A = build_sensing(obs)
    rho = qstates.random_density(2, 2, 0)
    assert np.allclose(A @ rho.ravel(), obs.expectations_complex(rho))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_linear_inversion_exact_on_complete_data(n):
    obs = pauli_set(n)
    for seed in range(20):
        rho = qstates.random_density(2**n, 2**n, seed)
        est = linear_inversion(measure(rho, obs), obs)
        assert np.max(np.abs(est - rho)) < 1e-9


def test_linear_inversion_incomplete():
    obs = pauli_set(2)
    with pytest.raises(InformationallyIncompleteError) as info:
        linear_inversion(DataSet([0], [1.0]), obs)
    assert info.value.rank == 1


def test_linear_inversion_may_return_negative_eigenvalues():
    obs = pauli_set(2)
    rho = qstates.projector(qstates.random_pure_state(4, 1))
    noisy = gaussian_noise(measure(rho, obs), 0.2, 0)
    est = linear_inversion(noisy, obs)
    assert np.allclose(est, est.conj().T)
    assert np.linalg.eigvalsh(est)[0] < 0


def test_imle_fixed_point_at_truth():
    # a wide, fine grid makes the frame sum close to a multiple of the identity
    obs = husimi_set(6.0, 48, 8, renormalize=False)
    truth = qstates.random_density(8, 2, 5)
    data = measure(truth, obs)
    rho, _ = imle(data, obs, max_iters=1, rho0=truth)
    assert np.max(np.abs(rho - truth)) < 1e-6


def mub_projectors(d):
    """Computational and Fourier basis projectors: a tight frame summing to 2*I."""
    f = np.exp(2j * np.pi * np.outer(np.arange(d), np.arange(d)) / d) / np.sqrt(d)
    vecs = np.vstack([np.eye(d), f.T])
    return DenseObservableSet(np.einsum("ki,kj->kij", vecs, vecs.conj()), "projector")


def test_imle_symmetric_data_keeps_mixed_state():
    obs = mub_projectors(5)
    data = DataSet(np.arange(len(obs)), np.full(len(obs), 0.2))
    rho, iters = imle(data, obs, max_iters=10, tol=1e-15)
    assert np.allclose(rho, np.eye(5) / 5, atol=1e-8)


def test_imle_on_generic_projectors_recovers_diagonal_state():
    obs = mub_projectors(3)
    truth = np.diag([0.6, 0.3, 0.1]).astype(complex)
    rho, _ = imle(measure(truth, obs), obs, max_iters=2000)
    assert np.max(np.abs(rho - truth)) < 1e-6


def test_imle_iterates_valid_and_likelihood_monotone():
    obs = husimi_set(3.0, 12, 8)
    truth = qstates.projector(qstates.coherent_state(0.8 + 0.5j, 8, warn=False))
    data = measure(truth, obs)
    lls = []

    def cb(t, rho):
        qstates.check_density(rho)
        lls.append(log_likelihood(rho, data, obs))

    rho, iters = imle(data, obs, max_iters=200, strict=True, callback=cb, record_every=1)
    assert iters == 200
    assert np.all(np.diff(lls) >= -1e-9)
    assert np.real(np.trace(rho @ truth)) > 0.9


def test_imle_callback_can_stop():
    obs = husimi_set(3.0, 8, 6)
    data = measure(np.eye(6) / 6, obs)
    _, iters = imle(data, obs, max_iters=100, callback=lambda t, rho: t >= 20, record_every=10)
    assert iters == 20


def test_imle_rejects_wrong_inputs():
    with pytest.raises(InvalidArgumentError):
        imle(measure(np.eye(2) / 2, pauli_set(1)), pauli_set(1))
    obs = husimi_set(2.0, 4, 4)
    with pytest.raises(InvalidArgumentError):
        imle(DataSet([0, 1], [0.1, -0.1]), obs)


def test_imle_starved_terms():
    obs = mub_projectors(2)  # |0>, |1>, |+>, |->
    rho0 = qstates.projector(qstates.fock_state(1, 2))
    with pytest.warns(RuntimeWarning, match="vanishing"):
        rho, _ = imle(DataSet([0, 2], [0.5, 0.5]), obs, max_iters=1, rho0=rho0)
    qstates.check_density(rho)
    with pytest.raises(InvalidArgumentError, match="support"):
        with pytest.warns(RuntimeWarning):
            imle(DataSet([0], [1.0]), obs, max_iters=1, rho0=rho0)
