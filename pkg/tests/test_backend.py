import ast
import os
import subprocess
import sys

import numpy as np
import pytest

from kernelseq._backend import BACKEND, compiled_kernels, python_kernels

needs_compiled = pytest.mark.skipif(compiled_kernels is None, reason="extension not built")


def _cases(rng):
    A = rng.standard_normal((37, 5))
    B = rng.standard_normal((11, 5))
    d_same = rng.uniform(0, 4, 50)
    d_diff = rng.uniform(0, 9, 70)
    sigmas = np.geomspace(0.05, 20, 13)
    return [
        ("sq_dists", (A,)),
        ("cross_sq_dists", (A, B)),
        ("gaussian_gram", (A, 0.7)),
        ("cross_gaussian", (A, B, 1.9)),
        ("separation_curve", (d_same, d_diff, sigmas)),
    ]


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_compiled_matches_python(seed):
    for name, args in _cases(np.random.default_rng(seed)):
        a = getattr(python_kernels, name)(*args)
        b = getattr(compiled_kernels, name)(*args)
        assert a.shape == b.shape, name
        np.testing.assert_allclose(b, a, rtol=0, atol=1e-12, err_msg=name)


@pytest.mark.parametrize("module", [python_kernels, compiled_kernels], ids=["python", "cython"])
def test_kernel_basics(module):
    if module is None:
        pytest.skip("extension not built")
    A = np.array([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_array_equal(module.sq_dists(A), [[0.0, 25.0], [25.0, 0.0]])
    K = module.gaussian_gram(A, 5.0)
    np.testing.assert_allclose(K, [[1.0, np.exp(-0.5)], [np.exp(-0.5), 1.0]], atol=1e-15)
    assert module.sq_dists(np.zeros((0, 3))).shape == (0, 0)


def test_backend_name():
    assert BACKEND == ("cython" if compiled_kernels is not None else "python")


def test_pure_python_switch():
    env = dict(os.environ, KERNELSEQ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from kernelseq._backend import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_training_identical_across_backends():
    code = ("import numpy as np\n"
            "from kernelseq.data import gen_blobs\n"
            "from kernelseq.network import RunConfig, train\n"
            "net = train(gen_blobs(n_per_class=10, separation=5.0), RunConfig(feature_map='exact'))\n"
            "print(repr([r.hsic_norm for r in net.history]))\n")
    runs = []
    for flag in ("0", "1"):
        env = dict(os.environ, KERNELSEQ_PURE_PYTHON=flag)
        runs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    a, b = (np.array(ast.literal_eval(r)) for r in runs)
    assert a.shape == b.shape
    np.testing.assert_allclose(a, b, atol=1e-9)
