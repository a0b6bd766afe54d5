"""Greedy layer-wise kernel network.

Each layer projects its input with closed-form weights and passes the
projection through a frozen Gaussian feature map:

    Z_l = R_{l-1} W_l        (preactivation)
    R_l = phi_l(Z_l)         (activation)

Layers are added one at a time, each maximizing the normalized HSIC of
its activation kernel against the labels, until that HSIC passes a
threshold. Prediction is nearest class centroid in the final
preactivation space.
"""
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from kernelseq import __version__
from kernelseq.closed_form import kme_weights
from kernelseq.errors import DegenerateInputError, InvalidArgumentError, KernelSeqError
from kernelseq.features import activation_kernel, make_feature_map, map_from_dict
from kernelseq.kernel_core import (
    _as_matrix, cosine_similarity_ratio, gamma_matrix, hsic_normalized, median_distance,
    one_hot, scatter_trace_ratio,
)
from kernelseq.sigma_search import (
    IsmObjective, default_bracket, next_sigma_for_ws, optimize_sigma_hsic,
    optimize_sigma_separation, scan_and_refine, separation_objective,
)

SOLVERS = ("ws", "wstar")
STRATEGIES = ("auto", "max_hsic", "max_separation", "decay", "fixed")
FEATURE_MAPS = ("rff", "exact")
NETWORK_FORMAT = "kernelseq-network"


@dataclass
class RunConfig:
    """Training settings. ``sigma_strategy='auto'`` means decay for the
    kernel-mean-embedding solver and max_hsic for the optimal solver."""

    solver: str = "wstar"
    sigma_strategy: str = "auto"
    feature_map: str = "rff"
    rff_width: int = 300
    hsic_threshold: float = 0.99
    max_layers: int = 30
    rank_tol: float = 1e-6
    conv_tol: float = 1e-8
    ism_max_iter: int = 30
    grid_points: int = 16
    sigma_xtol: float = 1e-2
    decay: float = 0.8
    decay_steps: int = 50
    decay_start: float = 3.0
    fixed_sigma: float = 1.0
    ce_clamp: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.solver not in SOLVERS:
            raise InvalidArgumentError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.sigma_strategy not in STRATEGIES:
            raise InvalidArgumentError(
                f"sigma_strategy must be one of {STRATEGIES}, got {self.sigma_strategy!r}")
        if self.feature_map not in FEATURE_MAPS:
            raise InvalidArgumentError(
                f"feature_map must be one of {FEATURE_MAPS}, got {self.feature_map!r}")
        if not 0 < self.hsic_threshold <= 1:
            raise InvalidArgumentError("hsic_threshold must lie in (0, 1]")
        for name in ("max_layers", "rff_width", "ism_max_iter", "grid_points"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer")
        if self.grid_points < 3:
            raise InvalidArgumentError("grid_points must be at least 3")
        if not 0 < self.decay < 1:
            raise InvalidArgumentError("decay must lie in (0, 1)")
        if int(self.decay_steps) != self.decay_steps or self.decay_steps < 0:
            raise InvalidArgumentError("decay_steps must be a non-negative integer")
        for name in ("decay_start", "fixed_sigma", "rank_tol", "conv_tol", "sigma_xtol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be a positive number")
        if not 0 < self.ce_clamp < 0.1:
            raise InvalidArgumentError("ce_clamp must lie in (0, 0.1)")

    @property
    def strategy(self):
        if self.sigma_strategy != "auto":
            return self.sigma_strategy
        return "decay" if self.solver == "ws" else "max_hsic"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise InvalidArgumentError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**d)


@dataclass
class Layer:
    weights: np.ndarray
    sigma: float
    feature_map: object
    improved: bool = True
    converged: bool = True
    # (sigma, hsic) pairs visited by the decay ladder; not serialized
    trace: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.feature_map.in_dim != self.weights.shape[1]:
            raise InvalidArgumentError("feature map input dim must equal the weight column count")

    @property
    def in_dim(self):
        return self.weights.shape[0]

    @property
    def out_dim(self):
        return self.feature_map.width

    def preactivation(self, R):
        return R @ self.weights

    def __call__(self, R):
        Z = self.preactivation(R)
        return Z, self.feature_map.apply(Z)

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "sigma": self.sigma,
            "feature_map": self.feature_map.to_dict(),
            "improved": self.improved,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d):
        W = np.array(d["weights"], dtype=np.float64).reshape(len(d["weights"]), -1)
        return cls(weights=W, sigma=float(d["sigma"]), feature_map=map_from_dict(d["feature_map"]),
                   improved=bool(d["improved"]), converged=bool(d["converged"]))


@dataclass
class MetricsRecord:
    layer: int
    hsic_norm: float
    scatter_ratio: float
    csr: float
    mse: float
    ce: float
    train_accuracy: float
    sigma: float
    width: int
    improved: bool = True
    converged: bool = True
    flags: str = ""

    COLUMNS = ("layer", "hsic_norm", "scatter_ratio", "csr", "mse", "ce",
               "train_accuracy", "sigma", "width", "improved", "converged", "flags")


@dataclass
class Network:
    layers: list
    centroids: np.ndarray = None
    basis: np.ndarray = None
    history: list = field(default_factory=list)
    config: RunConfig = None
    n_classes: int = 0
    input_mean: np.ndarray = None
    input_scale: np.ndarray = None
    class_names: list = None

    @property
    def depth(self):
        return len(self.layers)

    @property
    def in_dim(self):
        return self.layers[0].in_dim if self.layers else 0


# ---------------------------------------------------------------- metrics

def class_centroids(Z, labels, n_classes=None):
    Z = _as_matrix(Z, "Z")
    labels = np.asarray(labels)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        raise InvalidArgumentError(f"missing class(es): {np.flatnonzero(counts == 0).tolist()}")
    C = np.zeros((n_classes, Z.shape[1]))
    np.add.at(C, labels, Z)
    return C / counts[:, None]


def nearest_centroid(Z, centroids):
    """Index of the closest centroid per row; ties go to the lowest index."""
    Z = _as_matrix(Z, "Z")
    if Z.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    d2 = ((Z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def realigned_mse(Z, labels, n_classes=None):
    """Mean squared distance of each preactivation to its class centroid.

    This is the squared error left after translating every class centroid
    onto its own label vertex.
    """
    Z = _as_matrix(Z, "Z")
    labels = np.asarray(labels)
    C = class_centroids(Z, labels, n_classes)
    return float(((Z - C[labels]) ** 2).sum(axis=1).mean())


def class_medoids(Phi, labels, n_classes=None):
    """Per class, the row with the largest mean kernel to its classmates."""
    Phi = _as_matrix(Phi, "Phi")
    labels = np.asarray(labels)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    idx = np.empty(n_classes, dtype=np.int64)
    for c in range(n_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            raise InvalidArgumentError(f"missing class {c}")
        P = Phi[members]
        idx[c] = members[int(np.argmax((P @ P.T).mean(axis=1)))]
    return idx


def realigned_ce(Phi, basis, Y, clamp_eps=1e-12):
    """Cross-entropy of inner products with the class representatives.

    Scores p_ij = <phi_i, xi_j> are clamped to [clamp_eps, 1] and each row
    renormalized to sum to one.
    """
    if not 0 < clamp_eps < 0.1:
        raise InvalidArgumentError("clamp_eps must lie in (0, 0.1)")
    Phi = _as_matrix(Phi, "Phi")
    basis = _as_matrix(basis, "basis")
    Y = np.asarray(Y, dtype=np.float64)
    if Phi.shape[0] == 0:
        return 0.0
    P = np.clip(Phi @ basis.T, clamp_eps, 1.0)
    P /= P.sum(axis=1, keepdims=True)
    return float(-(Y * np.log(P)).sum(axis=1).mean())


def kernel_block_means(K, labels):
    """Mean off-diagonal same-class entry and mean cross-class entry of ``K``."""
    K = np.asarray(K, dtype=np.float64)
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    cross = labels[:, None] != labels[None, :]
    within = float(K[same].mean()) if same.any() else float("nan")
    between = float(K[cross].mean()) if cross.any() else float("nan")
    return within, between


def centroid_projection(Phi, labels):
    """1-D coordinates of the rows of ``Phi`` along the line through the
    first two class means (unit direction from class 0 to class 1)."""
    Phi = _as_matrix(Phi, "Phi")
    labels = np.asarray(labels)
    direction = Phi[labels == 1].mean(axis=0) - Phi[labels == 0].mean(axis=0)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise DegenerateInputError("class means coincide")
    return Phi @ (direction / norm)


def separable_1d(values, labels):
    """True when one class lies entirely below the other on the line."""
    a, b = values[labels == 0], values[labels == 1]
    return bool(a.max() < b.min() or b.max() < a.min())


def _safe(fn, flags, name):
    try:
        return float(fn())
    except (DegenerateInputError, InvalidArgumentError):
        flags.append(name)
        return float("nan")


def layer_metrics(R_prev, layer, gamma, pair_sets, Y, index=1, clamp_eps=1e-12):
    """Evaluate one frozen layer on its training input.

    Returns ``(record, Z, Phi, centroids, basis)``. Degenerate metrics are
    stored as NaN and named in ``record.flags``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.argmax(Y, axis=1)
    n_classes = Y.shape[1]
    Z, Phi = layer(R_prev)
    flags = []
    H = _safe(lambda: hsic_normalized(Phi @ Phi.T, gamma), flags, "hsic")
    T = _safe(lambda: scatter_trace_ratio(Z, labels), flags, "scatter")
    C = _safe(lambda: cosine_similarity_ratio(Phi, pair_sets), flags, "csr")
    centroids = class_centroids(Z, labels, n_classes)
    basis = Phi[class_medoids(Phi, labels, n_classes)]
    mse = realigned_mse(Z, labels, n_classes)
    ce = realigned_ce(Phi, basis, Y, clamp_eps)
    acc = float(np.mean(nearest_centroid(Z, centroids) == labels))
    record = MetricsRecord(
        layer=index, hsic_norm=H, scatter_ratio=T, csr=C, mse=mse, ce=ce,
        train_accuracy=acc, sigma=layer.sigma, width=layer.weights.shape[1],
        improved=layer.improved, converged=layer.converged, flags=",".join(flags),
    )
    return record, Z, Phi, centroids, basis


# ---------------------------------------------------------------- training

def layer_seed(seed, index):
    """Seed for the random feature map of layer ``index`` (1-based)."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _choose_layer(R, gamma, labels, n_classes, pair_sets, config, index, prev_hsic):
    """Weights, bandwidth and flags for one new layer on input ``R``."""
    strategy = config.strategy
    seed = layer_seed(config.seed, index)
    converged = True
    if config.solver == "ws":
        W = kme_weights(R, labels, n_classes=n_classes)
        weights_of = lambda s: (W, True)  # noqa: E731
    else:
        ism = IsmObjective(R, gamma, config.rank_tol, config.conv_tol, config.ism_max_iter)
        weights_of = ism.weights
        W = ism.initial[0]
    improved = None
    trace = []

    if strategy == "fixed":
        sigma = config.fixed_sigma
    elif strategy == "max_hsic":
        res = optimize_sigma_hsic(R, gamma, solve="ism" if config.solver == "wstar" else W,
                                  grid_points=config.grid_points, rank_tol=config.rank_tol,
                                  conv_tol=config.conv_tol, max_iter=config.ism_max_iter,
                                  xtol=config.sigma_xtol)
        sigma = res.sigma
    elif strategy == "max_separation":
        if config.solver == "ws":
            sigma = optimize_sigma_separation(R @ W, pair_sets, grid_points=config.grid_points).sigma
        else:
            f = lambda s: separation_objective(R @ weights_of(s)[0], pair_sets, s)  # noqa: E731
            sigma = scan_and_refine(f, default_bracket(R), config.grid_points,
                                    xtol=config.sigma_xtol)[0]
    else:  # decay
        scale = median_distance(R @ W)
        if scale <= 0:
            raise DegenerateInputError(f"layer {index}: all preactivations coincide")

        def evaluate(s):
            Z = R @ weights_of(s)[0]
            K = activation_kernel(config.feature_map, Z, s, config.rff_width, seed)
            return hsic_normalized(K, gamma)

        res = next_sigma_for_ws(config.decay_start * scale, R, gamma, W, config.decay,
                                config.decay_steps, prev_hsic=prev_hsic, evaluate=evaluate)
        sigma, improved, trace = res.sigma, res.improved, res.trace
    W, converged = weights_of(sigma)
    Z = R @ W
    fmap = make_feature_map(config.feature_map, Z, sigma, config.rff_width, seed)
    return Layer(weights=W, sigma=float(sigma), feature_map=fmap,
                 improved=True if improved is None else improved, converged=converged,
                 trace=trace)


def train(dataset, config=None, callback=None):
    """Grow layers until the activation HSIC exceeds ``config.hsic_threshold``.

    ``callback(record)`` is called after every layer.
    """
    config = config or RunConfig()
    config.validate()
    X = _as_matrix(dataset.X, "X")
    labels = np.asarray(dataset.labels)
    n_classes = dataset.n_classes
    if np.unique(labels).size < 2:
        raise DegenerateInputError("training needs at least two classes")
    Y = one_hot(labels, n_classes)
    gamma = gamma_matrix(Y)
    pair_sets = dataset.pair_sets
    net = Network(layers=[], config=config, n_classes=n_classes,
                  input_mean=dataset.mean, input_scale=dataset.scale,
                  class_names=dataset.class_names)
    R = X
    prev = None
    for index in range(1, config.max_layers + 1):
        layer = _choose_layer(R, gamma, labels, n_classes, pair_sets, config, index, prev)
        record, Z, Phi, centroids, basis = layer_metrics(R, layer, gamma, pair_sets, Y,
                                                         index, config.ce_clamp)
        if config.strategy != "decay":
            layer.improved = record.improved = prev is None or record.hsic_norm > prev
        net.layers.append(layer)
        net.history.append(record)
        net.centroids, net.basis = centroids, basis
        if callback is not None:
            callback(record)
        R = Phi
        if math.isfinite(record.hsic_norm):
            prev = record.hsic_norm if prev is None else max(prev, record.hsic_norm)
        if record.hsic_norm > config.hsic_threshold:
            break
    return net


def forward(network, X):
    """Replay the frozen layers; one ``(preactivation, activation)`` pair per layer."""
    if not network.layers:
        raise KernelSeqError("network has no layers")
    R = np.asarray(X, dtype=np.float64)
    if R.ndim != 2 or R.shape[1] != network.in_dim:
        raise InvalidArgumentError(
            f"expected an n x {network.in_dim} matrix, got shape {R.shape}")
    out = []
    for layer in network.layers:
        Z, R = layer(R)
        out.append((Z, R))
    return out


def predict(network, X):
    """Nearest final-preactivation centroid; ties go to the lowest class index."""
    if network.centroids is None:
        raise KernelSeqError("network is untrained")
    Z = forward(network, X)[-1][0]
    return nearest_centroid(Z, network.centroids)


def standardize_input(network, raw):
    """Apply the training standardization stored in the network to raw features."""
    raw = np.asarray(raw, dtype=np.float64)
    if network.input_mean is None:
        return raw
    return (raw - network.input_mean) / network.input_scale


# ---------------------------------------------------------------- serialization

def _tolist(a):
    return None if a is None else np.asarray(a).tolist()


def network_to_dict(network):
    return {
        "format": NETWORK_FORMAT,
        "version": __version__,
        "config": network.config.to_dict() if network.config else None,
        "n_classes": network.n_classes,
        "class_names": network.class_names,
        "input_mean": _tolist(network.input_mean),
        "input_scale": _tolist(network.input_scale),
        "layers": [layer.to_dict() for layer in network.layers],
        "centroids": _tolist(network.centroids),
        "basis": _tolist(network.basis),
        "history": [asdict(r) for r in network.history],
    }


def network_from_dict(d):
    if d.get("format") != NETWORK_FORMAT:
        raise InvalidArgumentError("not a network file")

    def arr(key):
        return None if d.get(key) is None else np.array(d[key], dtype=np.float64)

    return Network(
        layers=[Layer.from_dict(x) for x in d["layers"]],
        centroids=arr("centroids"),
        basis=arr("basis"),
        history=[MetricsRecord(**r) for r in d["history"]],
        config=RunConfig.from_dict(d["config"]) if d.get("config") else None,
        n_classes=int(d["n_classes"]),
        input_mean=arr("input_mean"),
        input_scale=arr("input_scale"),
        class_names=d.get("class_names"),
    )


def save_network(network, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(network), fh, allow_nan=True)
        fh.write("\n")


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))
