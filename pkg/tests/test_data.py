import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kernelseq.data import (
    Dataset, DataFormatError, factorize, gen_adversarial, gen_blobs, gen_random, gen_spiral,
    kfold, load_csv, standardize,
)
from kernelseq.errors import InvalidArgumentError
from kernelseq.kernel_core import gamma_matrix, gaussian_kernel, hsic_normalized, median_distance


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def wine_csv(tmp_path):
    sklearn = pytest.importorskip("sklearn.datasets")
    wine = sklearn.load_wine()
    lines = [",".join(wine.feature_names + ["class"])]
    for row, y in zip(wine.data, wine.target):
        lines.append(",".join(repr(float(v)) for v in row) + f",c{y}")
    return write(tmp_path, "\n".join(lines) + "\n", "wine.csv")


# ---------------------------------------------------------------- standardization and CSV

def test_two_row_standardization(tmp_path):
    ds = load_csv(write(tmp_path, "1,a\n3,b\n"))
    np.testing.assert_allclose(ds.X[:, 0], [-1.0, 1.0])
    assert ds.labels.tolist() == [0, 1] and ds.class_names == ["a", "b"]


def test_constant_column_zeroed_and_flagged(tmp_path):
    with pytest.warns(UserWarning, match="constant"):
        ds = load_csv(write(tmp_path, "x,y,label\n1,5,a\n2,5,b\n4,5,a\n"))
    assert ds.constant_columns.tolist() == [False, True]
    np.testing.assert_array_equal(ds.X[:, 1], 0.0)


def test_labels_first_appearance_order(tmp_path):
    ds = load_csv(write(tmp_path, "label,x\nz,1\na,2\nz,3\nm,4\n"), label_column="label")
    assert ds.labels.tolist() == [0, 1, 0, 2] and ds.class_names == ["z", "a", "m"]
    ds = load_csv(write(tmp_path, "z,1\na,2\nz,3\n"), label_column=0)
    assert ds.labels.tolist() == [0, 1, 0]
    assert factorize(["b", "b", "a"]) == (pytest.approx([0, 0, 1]), ["b", "a"])


@pytest.mark.parametrize("text, kw", [
    ("1,a\n2,x,b\n", {}),
    ("1,a\nfoo,b\n", {}),
    ("1,a\n2,a\n", {}),
    ("x,label\n1,a\n2,b\n", {"label_column": "missing"}),
    ("1,a\n2,b\n", {"label_column": 5}),
    ("x,label\n", {}),
    ("", {}),
    ("nan,a\n1,b\n", {}),
])
def test_csv_errors(tmp_path, text, kw):
    with pytest.raises(DataFormatError):
        load_csv(write(tmp_path, text), **kw)


def test_wine_shape(tmp_path):
    ds = load_csv(wine_csv(tmp_path), label_column="class")
    assert (ds.n, ds.d, ds.n_classes) == (178, 13, 3)
    assert np.abs(ds.X.mean(axis=0)).max() <= 1e-9
    assert np.abs(ds.X.std(axis=0) - 1).max() <= 1e-6


@given(st.integers(0, 2**31 - 1))
def test_standardize_idempotent(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(rng.uniform(-5, 5, 4), rng.uniform(0.1, 10, 4), (int(rng.integers(3, 30)), 4))
    X[:, 2] = 7.0
    once = standardize(X)[0]
    np.testing.assert_allclose(standardize(once)[0], once, atol=1e-9)
    assert np.abs(once.mean(axis=0)).max() <= 1e-9


def test_split_uses_training_statistics():
    ds = gen_blobs(n_per_class=10, seed=0)
    train, test = ds.split(np.arange(0, 20, 2), np.arange(1, 20, 2))
    np.testing.assert_allclose(test.X, (ds.raw[1::2] - train.mean) / train.scale)
    assert np.abs(train.X.mean(axis=0)).max() <= 1e-9


# ---------------------------------------------------------------- generators

def _consistent(ds):
    assert ds.Y.shape == (ds.n, ds.n_classes)
    np.testing.assert_array_equal(ds.Y.argmax(axis=1), ds.labels)
    assert ds.Y.sum() == ds.n
    ps = ds.pair_sets
    assert ps.n_same + ps.n_diff == ds.n * (ds.n - 1) // 2
    assert all(ds.labels[i] == ds.labels[j] for i, j in ps.same_class)
    assert all(ds.labels[i] != ds.labels[j] for i, j in ps.diff_class)


@pytest.mark.parametrize("gen", [gen_adversarial, gen_random, gen_spiral, gen_blobs])
def test_generators_deterministic_and_consistent(gen):
    a, b, c = gen(seed=3), gen(seed=3), gen(seed=4)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.X, c.X)
    _consistent(a)


def test_adversarial_shape():
    ds = gen_adversarial(n_per_class=40)
    assert (ds.n, ds.d, ds.n_classes) == (80, 2, 2)
    assert (ds.raw[:40] >= 0).all() and (ds.raw[:40] <= 1).all()
    assert np.abs(ds.raw[40:] - ds.raw[:40]).max() < 0.1
    with pytest.raises(InvalidArgumentError):
        gen_adversarial(n_per_class=1)


def test_adversarial_without_noise_warns():
    with pytest.warns(UserWarning, match="conflicting"):
        ds = gen_adversarial(noise=0.0)
    np.testing.assert_array_equal(ds.raw[:40], ds.raw[40:])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gen_adversarial()


def test_random_shape_balance_and_low_hsic():
    ds = gen_random(n=80, d=2)
    assert (ds.n, ds.d) == (80, 2)
    assert np.bincount(ds.labels).tolist() == [40, 40]
    assert gen_random(n=81).labels.tolist().count(0) == 40
    G = gamma_matrix(ds.Y)
    assert hsic_normalized(gaussian_kernel(ds.X, median_distance(ds.X)), G) < 0.3


def test_spiral_shape_and_disjoint_arms():
    ds = gen_spiral(n_per_class=100, classes=3)
    assert (ds.n, ds.d, ds.n_classes) == (300, 2, 3)
    ds = gen_spiral(classes=2, noise=0.0)
    A, B = ds.X[ds.labels == 0], ds.X[ds.labels == 1]
    d = np.sqrt(((A[:, None] - B[None]) ** 2).sum(-1)).min()
    assert d > 0


# ---------------------------------------------------------------- folds

def test_kfold_leave_one_out():
    split = kfold(np.array([0, 1] * 5), k=10)
    assert split.sizes().tolist() == [1] * 10


def test_kfold_wine_sizes():
    labels = np.repeat([0, 1, 2], [59, 71, 48])
    split = kfold(labels, k=10, seed=0)
    assert set(split.sizes().tolist()) == {17, 18}


@pytest.mark.parametrize("seed", range(10))
def test_kfold_stratified(seed):
    labels = np.repeat([0, 1, 2], [59, 71, 48])
    split = kfold(labels, k=10, seed=seed)
    for f in range(10):
        assert np.unique(labels[split.train_indices(f)]).size == 3
        per_class = np.bincount(labels[split.test_indices(f)], minlength=3)
        assert (np.abs(per_class - np.array([59, 71, 48]) / 10) < 1).all()
    again = kfold(labels, k=10, seed=seed)
    np.testing.assert_array_equal(split.assignments, again.assignments)


def test_kfold_single_fold_and_errors():
    split = kfold(np.array([0, 1, 0, 1]), k=1)
    assert split.train_indices(0).tolist() == [0, 1, 2, 3]
    for k in (0, 5, 2.5):
        with pytest.raises(InvalidArgumentError):
            kfold(np.array([0, 1, 0, 1]), k=k)


def test_dataset_from_raw_validation():
    with pytest.raises(InvalidArgumentError):
        Dataset.from_raw(np.ones(3), [0, 1, 0])
    with pytest.raises(InvalidArgumentError):
        Dataset.from_raw(np.ones((3, 1)), [0, 1])
