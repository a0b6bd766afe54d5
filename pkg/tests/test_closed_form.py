import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from kernelseq.closed_form import (
    eigen_residual, eigh_topk, hsic_gradient, hsic_objective, ism_q, ism_solve, kme_weights,
    orthonormalize, penalty_profile, stiefel_projected_gradient,
)
from kernelseq.data import gen_blobs
from kernelseq.errors import ConvergenceFailure, InvalidArgumentError
from kernelseq.kernel_core import gamma_matrix, median_distance, one_hot

seeds = st.integers(0, 2**31 - 1)


# ---------------------------------------------------------------- kernel mean embedding

def test_kme_sums_per_class():
    R = np.array([[-1.0], [-1.2], [1.0], [1.1]])
    W = kme_weights(R, np.array([0, 0, 1, 1]), normalize=False)
    np.testing.assert_allclose(W, [[-2.2, 2.1]], atol=1e-15)


def test_kme_one_sample_per_class_and_normalization():
    R = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    W = kme_weights(R, np.array([0, 1, 2]))
    scale = np.linalg.norm(R)
    np.testing.assert_allclose(W, R.T / scale, atol=1e-15)
    assert np.linalg.norm(W) == pytest.approx(1.0, abs=1e-14)


def test_kme_rejects_empty_class():
    with pytest.raises(InvalidArgumentError):
        kme_weights(np.ones((3, 2)), np.array([0, 0, 2]))


# ---------------------------------------------------------------- Q matrix

def test_weighted_outer_sum_identity_hand_case():
    X = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    Psi = np.array([[0.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 1.0]])
    D = np.diag(Psi.sum(axis=1))
    np.testing.assert_allclose(oracles.weighted_outer_sum(Psi, X), 2 * X.T @ (D - Psi) @ X,
                               atol=1e-12)


def test_ism_q_hand_instance():
    R = np.array([[0.0, 1.0], [1.0, 0.5], [2.0, -1.0]])
    G = gamma_matrix(one_hot(np.array([0, 1, 0])))
    W = np.array([[0.6], [0.8]])
    state = ism_q(R, G, W, 0.9)
    np.testing.assert_allclose(state.Q, oracles.ism_q(R, G, W, 0.9), atol=1e-12)
    np.testing.assert_allclose(state.gamma_hat,
                               G * oracles.gaussian(R @ W, 0.9), atol=1e-14)


@given(seeds)
def test_ism_q_matches_brute_force_and_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    R, labels, G = oracles.random_instance(rng)
    W = orthonormalize(rng.standard_normal((R.shape[1], 2)))
    sigma = float(rng.uniform(0.3, 3.0))
    Q = ism_q(R, G, W, sigma).Q
    np.testing.assert_allclose(Q, oracles.ism_q(R, G, W, sigma), atol=1e-9)
    assert np.abs(Q - Q.T).max() <= 1e-10


def test_ism_q_vanishes_for_zero_diagonal_gamma_at_tiny_sigma():
    rng = np.random.default_rng(2)
    R = rng.standard_normal((5, 3))
    _, _, G = oracles.random_instance(rng, n_range=(5, 6), q_range=(3, 4))
    np.fill_diagonal(G, 0.0)
    Q = ism_q(R, G, np.eye(3)[:, :2], 1e-6).Q
    np.testing.assert_allclose(Q, 0.0, atol=1e-12)


def test_ism_q_rejects_bad_sigma():
    with pytest.raises(InvalidArgumentError):
        ism_q(np.ones((2, 2)), np.eye(2), np.eye(2), 0.0)


# ---------------------------------------------------------------- eigh_topk

def test_eigh_topk_diagonal():
    V, lam = eigh_topk(np.diag([3.0, 1.0, 0.0]))
    np.testing.assert_allclose(lam, [3.0, 1.0])
    np.testing.assert_allclose(V, np.eye(3)[:, :2], atol=1e-15)


def test_eigh_topk_identity_and_random():
    V, lam = eigh_topk(np.eye(4))
    assert V.shape == (4, 4)
    assert eigen_residual(np.eye(4), V) <= 1e-12
    A = np.random.default_rng(0).standard_normal((5, 5))
    S = A + A.T
    V, lam = eigh_topk(S)
    assert np.linalg.norm(S @ V - V * lam) <= 1e-8
    np.testing.assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-8)
    assert np.all(np.diff(lam) <= 0) and np.all(lam > 0)


def test_eigh_topk_sign_convention_and_floor():
    A = np.random.default_rng(1).standard_normal((6, 6))
    V, _ = eigh_topk(A @ A.T)
    pivots = np.abs(V).argmax(axis=0)
    assert np.all(V[pivots, np.arange(V.shape[1])] > 0)
    V, lam = eigh_topk(-np.eye(3))
    assert V.shape == (3, 1)


def test_eigh_topk_rejects_asymmetric():
    with pytest.raises(InvalidArgumentError):
        eigh_topk(np.array([[1.0, 2.0], [0.0, 1.0]]))


# ---------------------------------------------------------------- ISM

def test_ism_blobs_direction():
    ds = gen_blobs(n_per_class=30, separation=6.0, seed=1)
    G = gamma_matrix(ds.Y)
    sigma = median_distance(ds.X)
    W, state = ism_solve(ds.X, G, sigma)
    # oracle: exhaustive search over unit directions in the plane
    angles = np.linspace(0.0, np.pi, 3601)[:-1]
    values = [oracles.hsic_objective(ds.X, G, np.array([[np.cos(t)], [np.sin(t)]]), sigma)
              for t in angles[::10]]
    best = angles[::10][int(np.argmax(values))]
    fine = angles[np.abs(angles - best) <= np.radians(1)]
    values = [hsic_objective(ds.X, G, np.array([[np.cos(t)], [np.sin(t)]]), sigma) for t in fine]
    best = fine[int(np.argmax(values))]
    u = np.array([np.cos(best), np.sin(best)])
    means = ds.X[ds.labels == 1].mean(0) - ds.X[ds.labels == 0].mean(0)
    means /= np.linalg.norm(means)
    angle = lambda a, b: np.degrees(np.arccos(min(1.0, abs(a @ b))))  # noqa: E731
    assert angle(W[:, 0], u) <= 5.0
    assert angle(W[:, 0], means) <= 5.0


def test_ism_separable_1d_beats_kme():
    R = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.4], [2.2]])
    labels = np.array([0, 0, 0, 1, 1, 1])
    G = gamma_matrix(one_hot(labels))
    W, _ = ism_solve(R, G, 1.0)
    assert W.shape[1] >= 1
    assert hsic_objective(R, G, W, 1.0) >= hsic_objective(R, G, kme_weights(R, labels), 1.0) - 1e-9


def test_ism_single_class_rejected():
    R = np.random.default_rng(0).standard_normal((5, 2))
    with pytest.raises(InvalidArgumentError):
        ism_solve(R, gamma_matrix(np.ones((5, 1))), 1.0)


def test_ism_convergence_failure_carries_iterate():
    ds = gen_blobs(n_per_class=10, classes=3, d=3, separation=2.0, seed=0)
    with pytest.raises(ConvergenceFailure) as info:
        ism_solve(ds.X, gamma_matrix(ds.Y), 0.05, max_iter=1)
    assert info.value.weights is not None and info.value.state.iterations == 1


@pytest.mark.parametrize("seed", range(10))
def test_ism_stationarity(seed):
    rng = np.random.default_rng(seed)
    R, labels, G = oracles.random_instance(rng, n_range=(10, 30), q_range=(2, 6))
    sigma = median_distance(R)
    conv_tol = 1e-8
    W, state = ism_solve(R, G, sigma, conv_tol=conv_tol, max_iter=200)
    assert eigen_residual(ism_q(R, G, W, sigma).Q, W) <= 10 * conv_tol
    np.testing.assert_allclose(W.T @ W, np.eye(W.shape[1]), atol=1e-8)
    assert np.all(np.diff(state.eigenvalues) <= 0)
    # first-order stationarity off span(W)
    g = hsic_gradient(R, G, W, sigma)
    assert np.linalg.norm(g - W @ (W.T @ g)) <= 1e-5


# ---------------------------------------------------------------- gradient

def test_gradient_zero_for_zero_gamma():
    R = np.random.default_rng(0).standard_normal((4, 3))
    np.testing.assert_array_equal(hsic_gradient(R, np.zeros((4, 4)), np.eye(3)[:, :2], 1.0), 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    R, labels, G = oracles.random_instance(rng, n_range=(4, 5), q_range=(3, 4))
    W = rng.standard_normal((3, 2))
    f = lambda V: oracles.hsic_objective(R, G, V, 1.1)  # noqa: E731
    fd = oracles.finite_difference_gradient(f, W)
    g = hsic_gradient(R, G, W, 1.1)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


def test_projected_gradient_is_tangent():
    rng = np.random.default_rng(4)
    R, labels, G = oracles.random_instance(rng, n_range=(6, 9), q_range=(4, 5))
    W = orthonormalize(rng.standard_normal((4, 2)))
    P = stiefel_projected_gradient(R, G, W, 1.0)
    WtP = W.T @ P
    np.testing.assert_allclose(WtP + WtP.T, 0.0, atol=1e-12)


# ---------------------------------------------------------------- penalty

def test_penalty_diagonal_only_gamma():
    R = np.random.default_rng(0).standard_normal((4, 3))
    prof = penalty_profile(R, np.diag([1.0, 2.0, 0.5, 1.5]), np.eye(3)[:, :2], 0.7)
    assert prof.surrogate_value == pytest.approx(0.0, abs=1e-12)
    assert prof.expanded_value == pytest.approx(0.0, abs=1e-12)


def test_penalty_hand_instance():
    R = np.array([[0.0, 1.0], [1.0, 0.5], [2.0, -1.0]])
    G = gamma_matrix(one_hot(np.array([0, 1, 0])))
    W = np.array([[0.6], [0.8]])
    prof = penalty_profile(R, G, W, 0.9)
    expected = oracles.penalty_expanded(R, G, W, 0.9)
    assert prof.surrogate_value == pytest.approx(expected, abs=1e-12)
    assert prof.expanded_value == pytest.approx(expected, abs=1e-12)
    # row sums include the self term
    K = oracles.gaussian(R @ W, 0.9)
    np.testing.assert_allclose(prof.d, (G * K).sum(axis=1) / 0.81, atol=1e-14)


def test_penalty_mean_after_ism_step_is_logged(capsys):
    # soft check: reported, not asserted
    ds = gen_blobs(n_per_class=15, seed=3)
    G = gamma_matrix(ds.Y)
    sigma = median_distance(ds.X)
    W0 = orthonormalize(kme_weights(ds.X, ds.labels))
    W1, _ = ism_solve(ds.X, G, sigma)
    before = penalty_profile(ds.X, G, W0, sigma).d.mean()
    after = penalty_profile(ds.X, G, W1, sigma).d.mean()
    print(f"mean penalty before {before:.6g}, after {after:.6g}")
    assert np.isfinite(before) and np.isfinite(after)
