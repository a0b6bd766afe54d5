"""Bandwidth selection.

Three searches over the Gaussian bandwidth:

* maximum kernel separation: mean same-class kernel minus mean
  cross-class kernel (self pairs excluded);
* maximum normalized HSIC after solving the layer weights at each sigma;
* the decreasing ladder used with kernel-mean-embedding layers, which
  walks sigma down until the layer HSIC beats the previous layer.

The first two use a log-spaced grid scan followed by golden-section
refinement between the grid neighbours of the best point.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from kernelseq._backend import kernels
from kernelseq.closed_form import eigh_topk, ism_solve, _q_from_gamma_hat
from kernelseq.errors import ConvergenceFailure, DegenerateInputError, InvalidArgumentError
from kernelseq.kernel_core import (
    PairSets, _as_matrix, _check_sigma, gaussian_kernel, hsic_normalized, median_distance,
)

GRID_POINTS = 64
BRACKET_SPAN = 1e2


@dataclass
class SigmaSearchResult:
    sigma: float
    objective: float
    evaluations: int
    bracket: tuple
    at_boundary: bool = False
    improved: bool = True
    trace: list = field(default_factory=list, repr=False)
    weights: np.ndarray = field(default=None, repr=False)


def _pairs(pair_sets):
    if not isinstance(pair_sets, PairSets):
        pair_sets = PairSets(np.asarray(pair_sets))
    if pair_sets.n_same == 0 or pair_sets.n_diff == 0:
        raise InvalidArgumentError("separation needs both same-class and cross-class pairs")
    return pair_sets


def _pair_sq_dists(R, pair_sets):
    D = kernels.sq_dists(_as_matrix(R))
    s, c = pair_sets.same_class, pair_sets.diff_class
    return D[s[:, 0], s[:, 1]], D[c[:, 0], c[:, 1]]


def separation_objective(R, pair_sets, sigma):
    """Mean same-class kernel value minus mean cross-class kernel value."""
    sigma = _check_sigma(sigma)
    pair_sets = _pairs(pair_sets)
    d2_same, d2_diff = _pair_sq_dists(R, pair_sets)
    return float(kernels.separation_curve(d2_same, d2_diff, np.array([sigma]))[0])


def separation_q_matrix(labels):
    """Matrix Q with separation_objective = -Tr(K Q) - n g for any Gaussian K.

    Q = gbar 11^T - (g + gbar) YY^T with g = 1/(2|S|) and gbar = 1/(2|S^c|)
    over unordered pairs; the n g term removes the unit diagonal.
    Returns ``(Q, n * g)``.
    """
    pair_sets = _pairs(labels)
    labels = pair_sets.labels
    g = 1.0 / (2 * pair_sets.n_same)
    gbar = 1.0 / (2 * pair_sets.n_diff)
    same = (labels[:, None] == labels[None, :]).astype(np.float64)
    return gbar - (g + gbar) * same, labels.size * g


def default_bracket(R):
    """[m / 100, 100 m] around the median pairwise distance m."""
    m = median_distance(R)
    if m <= 0:
        raise DegenerateInputError("all samples coincide; no bandwidth scale")
    return (m / BRACKET_SPAN, m * BRACKET_SPAN)


def _check_bracket(bracket):
    lo, hi = (float(b) for b in bracket)
    if not (0 < lo < hi and np.isfinite(hi)):
        raise InvalidArgumentError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")
    return lo, hi


def scan_and_refine(f, bracket, grid_points=GRID_POINTS, values=None, xtol=1e-4):
    """Maximize ``f`` over a log grid, then golden-section between neighbours.

    ``values`` may hold precomputed objective values on the grid; ``xtol``
    is the golden-section tolerance in log-sigma.
    Returns ``(sigma, value, evaluations, at_boundary)``.
    """
    lo, hi = _check_bracket(bracket)
    grid = np.geomspace(lo, hi, grid_points)
    if values is None:
        values = np.array([f(s) for s in grid])
    evals = len(grid)
    i = int(np.argmax(values))
    best_s, best_v = float(grid[i]), float(values[i])
    if i == 0 or i == len(grid) - 1:
        return best_s, best_v, evals, True
    counter = [0]

    def neg(t):
        counter[0] += 1
        return -f(float(np.exp(t)))

    a, b, c = np.log(grid[i - 1]), np.log(grid[i]), np.log(grid[i + 1])
    try:
        res = minimize_scalar(neg, bracket=(a, b, c), method="golden",
                              options={"xtol": xtol})
        t = float(np.clip(res.x, a, c))
        v = f(float(np.exp(t)))
        counter[0] += 1
        if v > best_v:
            best_s, best_v = float(np.exp(t)), float(v)
    except ValueError:
        # flat neighbourhood: the grid point stands
        pass
    return best_s, best_v, evals + counter[0], False


def optimize_sigma_separation(R, pair_sets, bracket=None, grid_points=GRID_POINTS):
    """Bandwidth maximizing :func:`separation_objective`."""
    R = _as_matrix(R)
    pair_sets = _pairs(pair_sets)
    if bracket is None:
        bracket = default_bracket(R)
    lo, hi = _check_bracket(bracket)
    d2_same, d2_diff = _pair_sq_dists(R, pair_sets)

    def f(s):
        return float(kernels.separation_curve(d2_same, d2_diff, np.array([s]))[0])

    grid = np.geomspace(lo, hi, grid_points)
    values = np.asarray(kernels.separation_curve(d2_same, d2_diff, grid))
    s, v, n, edge = scan_and_refine(f, (lo, hi), grid_points, values=values)
    return SigmaSearchResult(sigma=s, objective=v, evaluations=n, bracket=(lo, hi), at_boundary=edge)


class IsmObjective:
    """Normalized HSIC of the Gaussian kernel on R W*(sigma).

    The starting eigendecomposition does not depend on sigma and is
    computed once. Converged weights are cached per sigma.
    """

    def __init__(self, R, gamma, rank_tol=1e-6, conv_tol=1e-8, max_iter=100):
        self.R = _as_matrix(R)
        self.gamma = np.asarray(gamma, dtype=np.float64)
        self.rank_tol = rank_tol
        self.conv_tol = conv_tol
        self.max_iter = max_iter
        self.initial = eigh_topk(_q_from_gamma_hat(self.R, self.gamma), rank_tol)
        self.cache = {}

    def weights(self, sigma):
        if sigma not in self.cache:
            try:
                W, _ = ism_solve(self.R, self.gamma, sigma, self.rank_tol, self.conv_tol,
                                 self.max_iter, initial=self.initial)
                converged = True
            except ConvergenceFailure as exc:
                W, converged = exc.weights, False
            self.cache[sigma] = (W, converged)
        return self.cache[sigma]

    def __call__(self, sigma):
        W, _ = self.weights(sigma)
        return hsic_normalized(gaussian_kernel(self.R @ W, sigma), self.gamma)


def optimize_sigma_hsic(R, gamma, solve="ism", bracket=None, grid_points=GRID_POINTS,
                        rank_tol=1e-6, conv_tol=1e-8, max_iter=100, xtol=1e-4):
    """Bandwidth maximizing the normalized HSIC of the projected Gaussian kernel.

    ``solve`` is ``"ism"`` (optimal weights solved at every sigma) or a
    fixed weight matrix. The returned result carries the weights used at
    the chosen sigma.
    """
    R = _as_matrix(R)
    if isinstance(solve, str):
        if solve != "ism":
            raise InvalidArgumentError(f"unknown weight rule {solve!r}")
        objective = IsmObjective(R, gamma, rank_tol, conv_tol, max_iter)
        get_weights = lambda s: objective.weights(s)[0]  # noqa: E731
    else:
        W = _as_matrix(solve, "W")
        objective = lambda s: hsic_normalized(gaussian_kernel(R @ W, s), gamma)  # noqa: E731
        get_weights = lambda s: W  # noqa: E731
    if bracket is None:
        bracket = default_bracket(R)
    lo, hi = _check_bracket(bracket)
    s, v, n, edge = scan_and_refine(objective, (lo, hi), grid_points, xtol=xtol)
    return SigmaSearchResult(sigma=s, objective=v, evaluations=n, bracket=(lo, hi),
                             at_boundary=edge, weights=get_weights(s))


def next_sigma_for_ws(start_sigma, R, gamma, W_s, decay=0.9, max_steps=50,
                      prev_hsic=None, evaluate=None, refine=True):
    """Walk sigma = start_sigma * decay^k down until the layer HSIC improves.

    ``evaluate(sigma)`` returns the layer HSIC; by default the exact
    Gaussian kernel on R W_s against ``gamma``. Without ``prev_hsic``
    (first layer) the best value on the whole ladder is returned. With
    ``refine`` the walk continues past the first improvement while the
    HSIC keeps rising. If nothing beats ``prev_hsic`` the best value seen
    is returned with ``improved=False``.
    """
    start_sigma = _check_sigma(start_sigma)
    if not 0 < decay < 1:
        raise InvalidArgumentError(f"decay must lie in (0, 1), got {decay!r}")
    if int(max_steps) != max_steps or max_steps < 0:
        raise InvalidArgumentError(f"max_steps must be a non-negative integer, got {max_steps!r}")
    if evaluate is None:
        Z = _as_matrix(R) @ _as_matrix(W_s, "W_s")
        evaluate = lambda s: hsic_normalized(gaussian_kernel(Z, s), gamma)  # noqa: E731
    first_layer = prev_hsic is None
    threshold = -np.inf if first_layer else float(prev_hsic)
    trace = []
    best_s, best_h = None, -np.inf
    improved = False
    for k in range(int(max_steps) + 1):
        s = start_sigma * decay**k
        h = float(evaluate(s))
        trace.append((s, h))
        if h > best_h:
            best_s, best_h = s, h
        elif improved and not first_layer:
            break
        if h > threshold and not improved:
            improved = True
            if not refine and not first_layer:
                break
    return SigmaSearchResult(
        sigma=best_s, objective=best_h, evaluations=len(trace),
        bracket=(trace[-1][0], start_sigma), at_boundary=best_s in (start_sigma, trace[-1][0]),
        improved=improved and best_h > threshold, trace=trace,
    )
