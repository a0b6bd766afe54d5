"""Closed-form layer weights.

* ``kme_weights`` - kernel mean embedding: one column per class holding the
  sum of that class's layer inputs.
* ``ism_solve`` - the layer-optimal weights: dominant eigenvectors of
  Q(W) = R^T (Gamma_hat - Diag(Gamma_hat 1)) R, found by fixed-point
  iteration with Gamma_hat = Gamma * K_{RW} (elementwise).

Plus the analytic gradient of the layer HSIC objective and the
per-sample penalty decomposition of its spectral surrogate.
"""
from dataclasses import dataclass

import numpy as np

from kernelseq.errors import ConvergenceFailure, InvalidArgumentError
from kernelseq.kernel_core import _as_matrix, _check_sigma, gaussian_kernel


@dataclass
class IsmState:
    Q: np.ndarray
    gamma_hat: np.ndarray
    eigenvalues: np.ndarray
    iterations: int = 0
    subspace_residual: float = float("nan")


@dataclass
class PenaltyProfile:
    d: np.ndarray
    surrogate_value: float
    expanded_value: float


def kme_weights(R, labels, normalize=True, n_classes=None):
    """Per-class sums of the rows of ``R`` as a q x tau weight matrix.

    With ``normalize`` the result is divided by its Frobenius norm.
    """
    R = _as_matrix(R)
    labels = np.asarray(labels)
    if labels.shape != (R.shape[0],):
        raise InvalidArgumentError("labels must have one entry per row of R")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        raise InvalidArgumentError(f"empty class(es): {np.flatnonzero(counts == 0).tolist()}")
    W = np.zeros((R.shape[1], n_classes))
    for c in range(n_classes):
        W[:, c] = R[labels == c].sum(axis=0)
    if normalize:
        zeta = float((W * W).sum())
        if zeta > 0:
            W = W / np.sqrt(zeta)
    return W


def _check_gamma(R, gamma):
    gamma = np.asarray(gamma, dtype=np.float64)
    n = R.shape[0]
    if gamma.shape != (n, n):
        raise InvalidArgumentError(f"gamma must be {n}x{n}, got {gamma.shape}")
    return gamma


def _q_from_gamma_hat(R, gamma_hat):
    M = gamma_hat - np.diag(gamma_hat.sum(axis=1))
    Q = R.T @ M @ R
    return 0.5 * (Q + Q.T)


def ism_q(R, gamma, W, sigma):
    """Build Q(W) and Gamma_hat for the current projection ``W``."""
    sigma = _check_sigma(sigma)
    R = _as_matrix(R)
    gamma = _check_gamma(R, gamma)
    W = _as_matrix(W, "W")
    gamma_hat = gamma * gaussian_kernel(R @ W, sigma)
    Q = _q_from_gamma_hat(R, gamma_hat)
    rayleigh = np.sort(np.einsum("ij,ij->j", W, Q @ W))[::-1]
    return IsmState(Q=Q, gamma_hat=gamma_hat, eigenvalues=rayleigh)


def eigh_topk(S, rank_tol=1e-6, abs_tol=1e-12, sym_tol=1e-8):
    """Dominant eigenpairs of a symmetric matrix.

    Keeps eigenvalues above ``rank_tol * max(lambda_1, abs_tol)`` that are
    positive. The leading pair is always returned so the result is never
    empty. Each eigenvector is signed so that its largest-magnitude entry
    is positive.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError(f"S must be square, got {S.shape}")
    scale = max(float(np.abs(S).max()) if S.size else 0.0, 1.0)
    if np.abs(S - S.T).max(initial=0.0) > sym_tol * scale:
        raise InvalidArgumentError("S is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    cutoff = rank_tol * max(vals[0], abs_tol)
    keep = max(int(np.count_nonzero((vals > cutoff) & (vals > 0))), 1)
    vals = vals[:keep]
    vecs = vecs[:, :keep].copy()
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(keep)])
    signs[signs == 0] = 1.0
    return vecs * signs, vals


def _top_columns(Q, k):
    vals, vecs = np.linalg.eigh(0.5 * (Q + Q.T))
    vals = vals[::-1][:k]
    vecs = vecs[:, ::-1][:, :k].copy()
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return vecs * signs, vals


def _projector_distance(A, B):
    return float(np.linalg.norm(A @ A.T - B @ B.T))


def eigen_residual(Q, W):
    """||Q W - W Lambda||_F with Lambda = W^T Q W."""
    QW = Q @ W
    return float(np.linalg.norm(QW - W @ (W.T @ QW)))


def ism_solve(R, gamma, sigma, rank_tol=1e-6, conv_tol=1e-8, max_iter=100, initial=None):
    """Fixed-point iteration for the layer-optimal weights.

    Starts from Gamma_hat = Gamma (an all-ones kernel) unless ``initial``
    (a precomputed ``eigh_topk`` result for that start) is given. Stops
    once the subspace moves by at most ``conv_tol`` in projector distance
    and the stationarity residual is at most ``10 * conv_tol``. If the
    retained rank flips back and forth between two values, the rank whose
    iterate scores the larger objective is frozen for the rest of the run.

    Returns ``(W, state)``. Raises :class:`ConvergenceFailure` carrying the
    last iterate after ``max_iter`` iterations.
    """
    sigma = _check_sigma(sigma)
    R = _as_matrix(R)
    gamma = _check_gamma(R, gamma)
    if np.abs(gamma).max(initial=0.0) < 1e-14:
        raise InvalidArgumentError("gamma is zero: a single class carries no label signal")
    if initial is None:
        initial = eigh_topk(_q_from_gamma_hat(R, gamma), rank_tol)
    W, lam = initial
    state = None
    ranks = []
    fixed_rank = None
    for it in range(1, max_iter + 1):
        state = ism_q(R, gamma, W, sigma)
        W_next, lam = eigh_topk(state.Q, rank_tol)
        if fixed_rank is not None:
            W_next, lam = _top_columns(state.Q, fixed_rank)
        elif W_next.shape != W.shape:
            ranks.append((W.shape[1], W, hsic_objective(R, gamma, W, sigma)))
            if len(ranks) >= 3 and ranks[-1][0] == ranks[-3][0]:
                # rank flips back and forth: keep the rank with the larger objective
                best = max(ranks[-2:], key=lambda r: r[2])
                fixed_rank = best[0]
                W_next, lam = _top_columns(state.Q, fixed_rank)
        moved = _projector_distance(W_next, W) if W_next.shape == W.shape else np.inf
        W = W_next
        if moved <= conv_tol:
            final = ism_q(R, gamma, W, sigma)
            residual = eigen_residual(final.Q, W)
            if residual <= 10 * conv_tol:
                final.eigenvalues = lam
                final.iterations = it
                final.subspace_residual = residual
                return W, final
    final = ism_q(R, gamma, W, sigma)
    final.eigenvalues = lam
    final.iterations = max_iter
    final.subspace_residual = eigen_residual(final.Q, W)
    raise ConvergenceFailure(
        f"ISM did not converge in {max_iter} iterations "
        f"(residual {final.subspace_residual:.3e})",
        weights=W,
        state=final,
    )


def hsic_objective(R, gamma, W, sigma):
    """sum_ij Gamma_ij exp(-||W^T (r_i - r_j)||^2 / 2 sigma^2)."""
    R = _as_matrix(R)
    gamma = _check_gamma(R, gamma)
    return float((gamma * gaussian_kernel(R @ _as_matrix(W, "W"), sigma)).sum())


def hsic_gradient(R, gamma, W, sigma):
    """Gradient of :func:`hsic_objective` with respect to ``W``.

    Equals -(1/sigma^2) sum_ij Gamma_hat_ij A_ij W with
    A_ij = (r_i - r_j)(r_i - r_j)^T, evaluated as (2/sigma^2) Q(W) W.
    """
    sigma = _check_sigma(sigma)
    W = _as_matrix(W, "W")
    return (2.0 / sigma**2) * (ism_q(R, gamma, W, sigma).Q @ W)


def stiefel_projected_gradient(R, gamma, W, sigma):
    """Riemannian gradient on {W : W^T W = I}: G - W sym(W^T G)."""
    G = hsic_gradient(R, gamma, W, sigma)
    WtG = W.T @ G
    return G - W @ (0.5 * (WtG + WtG.T))


def orthonormalize(W):
    """Closest matrix with orthonormal columns (polar factor)."""
    U, _, Vt = np.linalg.svd(np.asarray(W, dtype=np.float64), full_matrices=False)
    return U @ Vt


def penalty_profile(R, gamma, W, sigma):
    """Per-sample penalties D_i(W) and both sides of the surrogate identity.

    ``d`` holds the row sums of Gamma * K_{RW} / sigma^2 (self term
    included). ``surrogate_value`` is Tr(W^T R^T (Gamma_hat - D) R W);
    ``expanded_value`` is sum_ij Gamma_hat_ij r_i^T W W^T r_j minus
    sum_i d_i ||W^T r_i||^2, accumulated elementwise.
    """
    sigma = _check_sigma(sigma)
    R = _as_matrix(R)
    gamma = _check_gamma(R, gamma)
    W = _as_matrix(W, "W")
    P = R @ W
    gamma_hat = gamma * gaussian_kernel(P, sigma) / sigma**2
    d = gamma_hat.sum(axis=1)
    surrogate = float(np.trace(W.T @ R.T @ (gamma_hat - np.diag(d)) @ R @ W))
    inner = P @ P.T
    expanded = float((gamma_hat * inner).sum() - (d * np.diag(inner)).sum())
    return PenaltyProfile(d=d, surrogate_value=surrogate, expanded_value=expanded)
