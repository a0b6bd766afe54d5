"""Frozen Gaussian feature maps used as layer activations.

``RffMap`` (random Fourier features) approximates the Gaussian kernel with
a finite random basis. ``ExactMap`` is the empirical kernel map over the
training preactivations: phi(z) = k(z, landmarks) V diag(lam)^-1/2 where
(lam, V) is the eigendecomposition of the training Gram matrix, so
phi(L) phi(L)^T reproduces that Gram matrix exactly.
"""
from dataclasses import dataclass

import numpy as np

from kernelseq.errors import InvalidArgumentError
from kernelseq.kernel_core import (
    RffMap, _as_matrix, _check_sigma, gaussian_cross_kernel, gaussian_kernel, rff_sample,
)

EIG_CUTOFF = 1e-12


@dataclass
class ExactMap:
    landmarks: np.ndarray
    projection: np.ndarray
    sigma: float

    kind = "exact"

    def __post_init__(self):
        # fixed memory layout so a reloaded map multiplies bit-identically
        self.landmarks = np.ascontiguousarray(self.landmarks, dtype=np.float64)
        self.projection = np.ascontiguousarray(self.projection, dtype=np.float64)

    @property
    def width(self):
        return self.projection.shape[1]

    @property
    def in_dim(self):
        return self.landmarks.shape[1]

    def apply(self, Z):
        Z = _as_matrix(Z, "Z")
        if Z.shape[1] != self.in_dim:
            raise InvalidArgumentError(f"input has {Z.shape[1]} columns, map expects {self.in_dim}")
        if Z.shape[0] == 0:
            return np.zeros((0, self.width))
        return gaussian_cross_kernel(Z, self.landmarks, self.sigma) @ self.projection

    def to_dict(self):
        return {
            "kind": self.kind,
            "sigma": self.sigma,
            "landmarks": self.landmarks.tolist(),
            "projection": self.projection.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        L = np.array(d["landmarks"], dtype=np.float64).reshape(len(d["landmarks"]), -1)
        P = np.array(d["projection"], dtype=np.float64).reshape(L.shape[0], -1)
        return cls(landmarks=L, projection=P, sigma=float(d["sigma"]))


def exact_map(Z, sigma, K=None):
    """Empirical kernel map fitted on the rows of ``Z``."""
    sigma = _check_sigma(sigma)
    Z = _as_matrix(Z, "Z")
    if K is None:
        K = gaussian_kernel(Z, sigma)
    lam, V = np.linalg.eigh(K)
    keep = lam > EIG_CUTOFF * lam.max()
    return ExactMap(landmarks=Z.copy(), projection=V[:, keep] / np.sqrt(lam[keep]), sigma=sigma)


def make_feature_map(kind, Z, sigma, width=300, seed=0):
    """Build a frozen feature map for preactivations ``Z`` at bandwidth ``sigma``."""
    if kind == "rff":
        return rff_sample(_as_matrix(Z, "Z").shape[1], sigma, width=width, seed=seed)
    if kind == "exact":
        return exact_map(Z, sigma)
    raise InvalidArgumentError(f"unknown feature map {kind!r} (expected 'rff' or 'exact')")


def map_from_dict(d):
    if d["kind"] == "rff":
        return RffMap.from_dict(d)
    if d["kind"] == "exact":
        return ExactMap.from_dict(d)
    raise InvalidArgumentError(f"unknown feature map kind {d['kind']!r}")


def activation_kernel(kind, Z, sigma, width=300, seed=0):
    """Training Gram matrix of the activation that ``make_feature_map`` would produce.

    For the exact map this is the Gaussian kernel itself, so the search
    can skip the eigendecomposition.
    """
    if kind == "exact":
        return gaussian_kernel(Z, sigma)
    Phi = make_feature_map(kind, Z, sigma, width, seed).apply(Z)
    return Phi @ Phi.T
