"""Pure numpy versions of the hot kernels (fallback for ``_ckernels``)."""
import numpy as np


def sq_dists(A):
    A = np.ascontiguousarray(A, dtype=np.float64)
    sq = np.einsum("ij,ij->i", A, A)
    D = sq[:, None] + sq[None, :] - 2.0 * (A @ A.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    # symmetrize away rounding in the Gram product
    return 0.5 * (D + D.T)


def cross_sq_dists(A, B):
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    D = (np.einsum("ij,ij->i", A, A)[:, None]
         + np.einsum("ij,ij->i", B, B)[None, :]
         - 2.0 * (A @ B.T))
    np.maximum(D, 0.0, out=D)
    return D


def gaussian_gram(A, sigma):
    return np.exp(sq_dists(A) / (-2.0 * sigma * sigma))


def cross_gaussian(A, B, sigma):
    return np.exp(cross_sq_dists(A, B) / (-2.0 * sigma * sigma))


def separation_curve(d2_same, d2_diff, sigmas):
    d2_same = np.asarray(d2_same, dtype=np.float64)
    d2_diff = np.asarray(d2_diff, dtype=np.float64)
    out = np.empty(len(sigmas))
    for k, s in enumerate(sigmas):
        c = -0.5 / (s * s)
        out[k] = np.exp(c * d2_same).mean() - np.exp(c * d2_diff).mean()
    return out
