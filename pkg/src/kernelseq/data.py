"""Datasets: standardization, CSV ingestion, synthetic generators, k-fold splits."""
import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from kernelseq.errors import InvalidArgumentError
from kernelseq.kernel_core import one_hot, pair_sets


class DataFormatError(InvalidArgumentError):
    """A data file cannot be parsed into a dataset."""


def standardize(X, mean=None, scale=None):
    """Center columns to 0 and scale to unit standard deviation.

    Returns ``(X_std, mean, scale, constant)``. Constant columns keep
    scale 1 and end up all zero; ``constant`` flags them. Pass ``mean`` and
    ``scale`` to reuse statistics from another split.
    """
    X = np.asarray(X, dtype=np.float64)
    if mean is None:
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std <= 1e-12 * np.maximum(np.abs(mean), 1.0)
        scale = np.where(constant, 1.0, std)
    else:
        mean = np.asarray(mean, dtype=np.float64)
        scale = np.asarray(scale, dtype=np.float64)
        constant = np.zeros(X.shape[1], dtype=bool)
    Xs = (X - mean) / scale
    Xs[:, constant] = 0.0
    return Xs, mean, scale, constant


@dataclass
class Dataset:
    """Standardized features with integer labels in ``[0, n_classes)``."""

    X: np.ndarray
    labels: np.ndarray
    raw: np.ndarray = None
    mean: np.ndarray = None
    scale: np.ndarray = None
    constant_columns: np.ndarray = None
    class_names: list = None
    name: str = "data"
    _pairs: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_raw(cls, raw, labels, class_names=None, name="data", mean=None, scale=None):
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2:
            raise InvalidArgumentError("feature matrix must be 2-D")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (raw.shape[0],):
            raise InvalidArgumentError("one label per row required")
        X, mean, scale, constant = standardize(raw, mean, scale)
        return cls(X=X, labels=labels, raw=raw, mean=mean, scale=scale,
                   constant_columns=constant, class_names=class_names, name=name)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n_classes(self):
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def Y(self):
        return one_hot(self.labels, self.n_classes)

    @property
    def pair_sets(self):
        if self._pairs is None:
            self._pairs = pair_sets(self.labels)
        return self._pairs

    def split(self, train_idx, test_idx):
        """Train/test datasets; both standardized with the training statistics."""
        train = Dataset.from_raw(self.raw[train_idx], self.labels[train_idx],
                                 self.class_names, self.name)
        test = Dataset.from_raw(self.raw[test_idx], self.labels[test_idx],
                                self.class_names, self.name,
                                mean=train.mean, scale=train.scale)
        test.constant_columns = train.constant_columns
        test.X[:, train.constant_columns] = 0.0
        return train, test


def factorize(values):
    """Map labels to 0..tau-1 in order of first appearance."""
    names = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        codes[i] = names.setdefault(v, len(names))
    return codes, list(names)


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=None):
    """Read a comma-separated file into a standardized :class:`Dataset`.

    ``label_column`` is a header name or a column index; the last column
    is used by default. A first row whose feature cells are not all
    numeric is treated as a header.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    width = len(rows[0])
    header = None
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        header = [c.strip() for c in rows[0]]
        if label_column not in header:
            raise DataFormatError(f"{path}: label column {label_column!r} not found in header")
        col = header.index(label_column)
        rows = rows[1:]
    else:
        col = width - 1 if label_column is None else int(label_column)
        if col < 0:
            col += width
        if not 0 <= col < width:
            raise DataFormatError(f"{path}: label column index {label_column} out of range")
        first = [c.strip() for i, c in enumerate(rows[0]) if i != col]
        if not all(_is_number(c) for c in first):
            header = [c.strip() for c in rows[0]]
            rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: header only, no data rows")
    feats, labels = [], []
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise DataFormatError(f"{path}:{lineno}: expected {width} cells, got {len(r)}")
        try:
            feats.append([float(c) for i, c in enumerate(r) if i != col])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: unparseable cell ({exc})") from None
        labels.append(r[col].strip())
    codes, names = factorize(labels)
    if len(names) < 2:
        raise DataFormatError(f"{path}: only one class present")
    raw = np.array(feats, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise DataFormatError(f"{path}: non-finite feature values")
    ds = Dataset.from_raw(raw, codes, names, name=str(path))
    if ds.constant_columns.any():
        warnings.warn(f"{path}: constant feature columns "
                      f"{np.flatnonzero(ds.constant_columns).tolist()} set to zero",
                      stacklevel=2)
    return ds


def gen_adversarial(n_per_class=40, noise=0.01, seed=0):
    """Class 1 is class 0 jittered by ``noise`` Gaussian noise."""
    if n_per_class < 2:
        raise InvalidArgumentError("n_per_class must be at least 2")
    rng = np.random.default_rng(seed)
    X1 = rng.random((n_per_class, 2))
    X2 = X1 + noise * rng.standard_normal((n_per_class, 2))
    if noise == 0:
        warnings.warn("noise=0 duplicates every sample with a conflicting label", stacklevel=2)
    labels = np.repeat([0, 1], n_per_class)
    return Dataset.from_raw(np.vstack([X1, X2]), labels, name="adversarial")


def gen_random(n=80, d=2, seed=0):
    """Gaussian features with labels independent of them (floor(n/2) zeros)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2:] = 1
    rng.shuffle(labels)
    return Dataset.from_raw(X, labels, name="random")


def gen_spiral(n_per_class=100, classes=3, turns=1.75, noise=0.1, seed=0):
    """Interleaved Archimedean spiral arms with Gaussian angular noise."""
    if classes < 2 or n_per_class < 1:
        raise InvalidArgumentError("need at least two classes and one sample per class")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.1, 1.0, n_per_class)
    X, labels = [], []
    for c in range(classes):
        theta = 2 * np.pi * (turns * t + c / classes) + noise * rng.standard_normal(n_per_class)
        X.append(np.column_stack([t * np.cos(theta), t * np.sin(theta)]))
        labels.append(np.full(n_per_class, c))
    return Dataset.from_raw(np.vstack(X), np.concatenate(labels), name="spiral")


def gen_blobs(n_per_class=30, classes=2, d=2, separation=4.0, seed=0):
    """Isotropic unit Gaussian blobs with centers ``separation`` apart along axes."""
    rng = np.random.default_rng(seed)
    X, labels = [], []
    for c in range(classes):
        center = np.zeros(d)
        center[c % d] = separation * (1 + c // d)
        X.append(center + rng.standard_normal((n_per_class, d)))
        labels.append(np.full(n_per_class, c))
    return Dataset.from_raw(np.vstack(X), np.concatenate(labels), name="blobs")


GENERATORS = {
    "adversarial": gen_adversarial,
    "random": gen_random,
    "spiral": gen_spiral,
    "blobs": gen_blobs,
}


@dataclass
class FoldSplit:
    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        if self.k == 1:
            return np.arange(self.assignments.size)
        return np.flatnonzero(self.assignments != fold)

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def kfold(labels, k=10, seed=0):
    """Stratified fold assignment.

    Samples are shuffled within each class, concatenated class by class
    and dealt round-robin, so fold sizes differ by at most one and each
    class is spread as evenly as possible.
    """
    if isinstance(labels, Dataset):
        labels = labels.labels
    labels = np.asarray(labels)
    n = labels.size
    if int(k) != k or k < 1 or k > n:
        raise InvalidArgumentError(f"k must be an integer in [1, {n}], got {k!r}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c))
                            for c in np.unique(labels)])
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    return FoldSplit(k=int(k), assignments=assignments, seed=seed)
