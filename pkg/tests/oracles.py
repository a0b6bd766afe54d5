"""Brute-force reference implementations used as independent test oracles.

Everything here is written with explicit Python loops over sample pairs so
that it shares no code path with the vectorized library functions.
"""
import itertools
import math

import numpy as np


def sq_dist(a, b):
    return sum((float(x) - float(y)) ** 2 for x, y in zip(a, b))


def gaussian(R, sigma):
    n = len(R)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = math.exp(-sq_dist(R[i], R[j]) / (2 * sigma * sigma))
    return K


def hsic_pairwise(K, gamma, labels):
    """Same-class pairs add Gamma_ij k_ij, cross-class pairs subtract |Gamma_ij| k_ij,
    plus the diagonal Gamma_ii k_ii terms."""
    n = len(labels)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                total += gamma[i][i] * K[i][i]
            elif labels[i] == labels[j]:
                total += gamma[i][j] * K[i][j]
            else:
                total -= abs(gamma[i][j]) * K[i][j]
    return total


def scatter_ratio(Z, labels):
    within = between = 0.0
    for i, j in itertools.combinations(range(len(labels)), 2):
        d = sq_dist(Z[i], Z[j])
        if labels[i] == labels[j]:
            within += d
        else:
            between += d
    return within / between


def csr(Phi, labels):
    same = cross = 0.0
    for i, j in itertools.combinations(range(len(labels)), 2):
        v = float(np.dot(Phi[i], Phi[j]))
        if labels[i] == labels[j]:
            same += v
        else:
            cross += v
    return cross / same


def separation(R, labels, sigma):
    same, cross = [], []
    for i, j in itertools.combinations(range(len(labels)), 2):
        k = math.exp(-sq_dist(R[i], R[j]) / (2 * sigma * sigma))
        (same if labels[i] == labels[j] else cross).append(k)
    return sum(same) / len(same) - sum(cross) / len(cross)


def weighted_outer_sum(Psi, X):
    """sum_ij Psi_ij (x_i - x_j)(x_i - x_j)^T."""
    n, d = X.shape
    S = np.zeros((d, d))
    for i in range(n):
        for j in range(n):
            v = X[i] - X[j]
            S += Psi[i, j] * np.outer(v, v)
    return S


def ism_q(R, gamma, W, sigma):
    """-1/2 sum_ij Gamma_ij k_W(r_i, r_j) A_ij."""
    P = R @ W
    n = R.shape[0]
    Q = np.zeros((R.shape[1], R.shape[1]))
    for i in range(n):
        for j in range(n):
            k = math.exp(-sq_dist(P[i], P[j]) / (2 * sigma * sigma))
            v = R[i] - R[j]
            Q -= 0.5 * gamma[i, j] * k * np.outer(v, v)
    return Q


def hsic_objective(R, gamma, W, sigma):
    """sum_ij Gamma_ij exp(-tr(W^T A_ij W) / 2 sigma^2)."""
    n = R.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            v = R[i] - R[j]
            A = np.outer(v, v)
            total += gamma[i, j] * math.exp(-np.trace(W.T @ A @ W) / (2 * sigma * sigma))
    return total


def finite_difference_gradient(f, W, h=1e-5):
    G = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        G[idx] = (f(W + E) - f(W - E)) / (2 * h)
    return G


def penalty_expanded(R, gamma, W, sigma):
    """Elementwise sum_ij G_ij p_i.p_j - sum_i d_i |p_i|^2 with G = Gamma * k / sigma^2."""
    P = R @ W
    n = R.shape[0]
    G = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            G[i, j] = gamma[i, j] * math.exp(-sq_dist(P[i], P[j]) / (2 * sigma * sigma)) / sigma**2
    total = 0.0
    for i in range(n):
        d_i = sum(G[i, j] for j in range(n))
        total -= d_i * float(P[i] @ P[i])
        for j in range(n):
            total += G[i, j] * float(P[i] @ P[j])
    return total


def random_instance(rng, n_range=(4, 9), q_range=(2, 5), tau_range=(2, 4), beta=None):
    """Random (R, labels, gamma) with every class present."""
    from kernelseq.kernel_core import gamma_matrix, one_hot

    n = int(rng.integers(*n_range))
    tau = int(rng.integers(tau_range[0], min(tau_range[1], n)))
    q = int(rng.integers(*q_range))
    labels = np.arange(n) % tau
    rng.shuffle(labels)
    R = rng.standard_normal((n, q))
    return R, labels, gamma_matrix(one_hot(labels, tau))
