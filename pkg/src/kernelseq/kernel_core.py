"""Gaussian kernels, label centering, HSIC, random Fourier features and
the geometric convergence metrics (scatter trace ratio, cosine similarity
ratio).

Kernel matrices and label kernels are plain ``numpy`` arrays.
"""
from dataclasses import dataclass, field

import numpy as np

from kernelseq._backend import kernels
from kernelseq.errors import DegenerateInputError, InvalidArgumentError


def _as_matrix(A, name="R"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return A


def _check_sigma(sigma):
    if not np.isfinite(sigma) or sigma <= 0:
        raise InvalidArgumentError(f"sigma must be a positive finite number, got {sigma!r}")
    return float(sigma)


def centering_matrix(n):
    """H = I - 11^T/n."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    return np.eye(n) - np.full((n, n), 1.0 / n)


def one_hot(labels, n_classes=None):
    labels = np.asarray(labels)
    if labels.ndim != 1 or (labels.size and labels.min() < 0):
        raise InvalidArgumentError("labels must be a 1-D array of non-negative class indices")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    Y = np.zeros((labels.size, n_classes))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


def gamma_matrix(Y):
    """Centered label kernel HYY^TH for a one-hot label matrix ``Y``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise InvalidArgumentError("Y must be a non-empty n x tau matrix")
    if not (np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=1) == 1)):
        raise InvalidArgumentError("Y rows must be one-hot")
    if np.any(Y.sum(axis=0) == 0):
        raise InvalidArgumentError("every class must have at least one sample")
    # H Y Y^T H without forming H: subtract column means of Y
    Yc = Y - Y.mean(axis=0)
    G = Yc @ Yc.T
    return 0.5 * (G + G.T)


def gaussian_kernel(R, sigma):
    """K_ij = exp(-||r_i - r_j||^2 / (2 sigma^2))."""
    sigma = _check_sigma(sigma)
    R = _as_matrix(R)
    return kernels.gaussian_gram(R, sigma)


def gaussian_cross_kernel(A, B, sigma):
    sigma = _check_sigma(sigma)
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"column mismatch: {A.shape[1]} vs {B.shape[1]}")
    return kernels.cross_gaussian(A, B, sigma)


def median_distance(R):
    """Median of the non-zero pairwise Euclidean distances between rows (0 if none)."""
    R = _as_matrix(R)
    n = R.shape[0]
    if n < 2:
        return 0.0
    d = np.sqrt(kernels.sq_dists(R)[np.triu_indices(n, 1)])
    d = d[d > 0]
    return float(np.median(d)) if d.size else 0.0


def hsic_raw(K, gamma):
    """Tr(Gamma K)."""
    K = np.asarray(K, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if K.shape != gamma.shape or K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidArgumentError(f"shape mismatch: K {K.shape} vs gamma {gamma.shape}")
    return float(np.einsum("ij,ji->", gamma, K))


def _centered(K):
    # H K H
    K = K - K.mean(axis=0, keepdims=True)
    return K - K.mean(axis=1, keepdims=True)


def hsic_normalized(K_X, K_Y):
    """Kernel alignment <HK_XH, HK_YH> / (||HK_XH|| ||HK_YH||).

    Lies in [-1, 1]; raises :class:`DegenerateInputError` when either
    centered kernel vanishes.
    """
    K_X = np.asarray(K_X, dtype=np.float64)
    K_Y = np.asarray(K_Y, dtype=np.float64)
    if K_X.shape != K_Y.shape or K_X.ndim != 2 or K_X.shape[0] != K_X.shape[1]:
        raise InvalidArgumentError(f"shape mismatch: {K_X.shape} vs {K_Y.shape}")
    Xc = _centered(K_X)
    Yc = _centered(K_Y)
    # Tr(HKxH Ky) = <HKxH, HKyH> for symmetric inputs
    xx = float(np.vdot(Xc, Xc))
    yy = float(np.vdot(Yc, Yc))
    scale = max(np.abs(K_X).max(), np.abs(K_Y).max(), 1.0) ** 2 * K_X.size
    if xx <= 1e-24 * scale or yy <= 1e-24 * scale:
        raise DegenerateInputError("centered kernel is zero (constant features or a single class)")
    return float(np.vdot(Xc, Yc) / np.sqrt(xx * yy))


@dataclass
class RffMap:
    """Random Fourier feature map sqrt(2/D) cos(r @ frequencies + phases).

    ``frequencies`` already carries the 1/sigma scaling.
    """

    frequencies: np.ndarray
    phases: np.ndarray
    sigma: float
    seed: int = 0

    kind = "rff"

    @property
    def width(self):
        return self.phases.shape[0]

    @property
    def in_dim(self):
        return self.frequencies.shape[0]

    def apply(self, R):
        return rff_apply(self, R)

    def to_dict(self):
        return {
            "kind": self.kind,
            "sigma": self.sigma,
            "seed": self.seed,
            "frequencies": self.frequencies.tolist(),
            "phases": self.phases.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        freq = np.array(d["frequencies"], dtype=np.float64)
        return cls(
            frequencies=freq.reshape(len(d["frequencies"]), -1),
            phases=np.array(d["phases"], dtype=np.float64),
            sigma=float(d["sigma"]),
            seed=int(d["seed"]),
        )


def rff_sample(q, sigma, width=300, seed=0):
    """Draw a Gaussian-kernel RFF map for ``q``-dimensional inputs.

    Frequencies are N(0, 1/sigma^2) per coordinate, phases U[0, 2pi).
    For a fixed seed the base draws do not depend on sigma, so maps at
    different bandwidths share their random numbers.
    """
    sigma = _check_sigma(sigma)
    if int(q) != q or q < 1:
        raise InvalidArgumentError(f"input dimension must be a positive integer, got {q!r}")
    if int(width) != width or width < 1:
        raise InvalidArgumentError(f"width must be a positive integer, got {width!r}")
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((int(q), int(width)))
    phases = rng.uniform(0.0, 2.0 * np.pi, int(width))
    return RffMap(frequencies=base / sigma, phases=phases, sigma=sigma, seed=int(seed))


def rff_apply(rff, R):
    R = _as_matrix(R)
    if R.shape[1] != rff.in_dim:
        raise InvalidArgumentError(f"input has {R.shape[1]} columns, map expects {rff.in_dim}")
    return np.sqrt(2.0 / rff.width) * np.cos(R @ rff.frequencies + rff.phases)


@dataclass
class PairSets:
    """Same-class and different-class unordered pairs (i < j) of a labelling."""

    labels: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)

    @property
    def n(self):
        return self.labels.size

    def _pairs(self):
        if "pairs" not in self._cache:
            i, j = np.triu_indices(self.n, 1)
            same = self.labels[i] == self.labels[j]
            self._cache["pairs"] = (np.stack([i[same], j[same]], 1),
                                    np.stack([i[~same], j[~same]], 1))
        return self._cache["pairs"]

    @property
    def same_class(self):
        return self._pairs()[0]

    @property
    def diff_class(self):
        return self._pairs()[1]

    @property
    def n_same(self):
        counts = np.bincount(self.labels)
        return int((counts * (counts - 1) // 2).sum())

    @property
    def n_diff(self):
        return self.n * (self.n - 1) // 2 - self.n_same


def pair_sets(labels):
    return PairSets(np.asarray(labels))


def _labels_of(pairs_or_labels):
    if isinstance(pairs_or_labels, PairSets):
        return pairs_or_labels.labels
    return np.asarray(pairs_or_labels)


def scatter_trace_ratio(Z, labels):
    """Tr(S_w) / Tr(S_b) over same-class vs different-class pairs of rows of Z."""
    Z = _as_matrix(Z, "Z")
    labels = _labels_of(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise InvalidArgumentError("scatter trace ratio needs at least two classes")
    n = Z.shape[0]
    # sum over pairs i<j of ||z_i - z_j||^2 = m * sum ||z_i - mean||^2
    total = n * float(((Z - Z.mean(axis=0)) ** 2).sum())
    within = 0.0
    for c in classes:
        Zc = Z[labels == c]
        within += Zc.shape[0] * float(((Zc - Zc.mean(axis=0)) ** 2).sum())
    between = total - within
    if between <= 1e-14 * max(total, 1e-300) or between <= 0:
        raise DegenerateInputError("between-class scatter is zero")
    return max(within, 0.0) / between


def cosine_similarity_ratio(Phi, pairs):
    """Sum of cross-class inner products over sum of same-class inner products.

    Diagonal (i, i) terms are excluded from both sums.
    """
    Phi = _as_matrix(Phi, "Phi")
    labels = _labels_of(pairs)
    sq_norms = float(np.einsum("ij,ij->", Phi, Phi))
    total_vec = Phi.sum(axis=0)
    all_pairs = 0.5 * (float(total_vec @ total_vec) - sq_norms)
    same = 0.0
    for c in np.unique(labels):
        s = Phi[labels == c].sum(axis=0)
        same += float(s @ s)
    same = 0.5 * (same - sq_norms)
    diff = all_pairs - same
    if abs(same) <= 1e-300 or (isinstance(pairs, PairSets) and pairs.n_same == 0):
        raise DegenerateInputError("same-class inner products sum to zero")
    return diff / same
