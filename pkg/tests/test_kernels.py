import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from directive_dse import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _random_problem(seed, n, nf, levels, criterion):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, size=(n, nf)).astype(float)
    if criterion == _kernels.CRITERION_GINI:
        y = (rng.random(n) < 0.4).astype(float)
    else:
        y = rng.normal(size=n).round(2)
    codes, bv, nb = _kernels.bin_features(X)
    rows = rng.integers(0, n, n)
    keys = rng.random((2 * n - 1, nf))
    return X, (codes, bv, nb, y, rows, keys)


@needs_numba
@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 60), nf=st.integers(1, 8), levels=st.integers(1, 6),
       n_sub=st.integers(1, 8), depth=st.integers(1, 12), leaf=st.integers(1, 4),
       criterion=st.sampled_from([_kernels.CRITERION_MSE, _kernels.CRITERION_GINI]))
def test_backends_build_identical_trees(seed, n, nf, levels, n_sub, depth, leaf, criterion):
    X, args = _random_problem(seed, n, nf, levels, criterion)
    n_sub = min(n_sub, nf)
    a = _kernels.build_tree_numba(*args, n_sub, depth, leaf, criterion)
    b = _kernels.build_tree_numpy(*args, n_sub, depth, leaf, criterion)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)
    roots = np.zeros(1, np.int64)
    pa = _kernels.predict_forest_numba(*a, roots, X)
    pb = _kernels.predict_forest_numpy(*b, roots, X)
    assert np.array_equal(pa, pb)


def test_bin_features_codes_index_sorted_uniques():
    X = np.array([[3.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0]])
    codes, bv, nb = _kernels.bin_features(X)
    assert nb.tolist() == [3, 1]
    assert codes[0].tolist() == [2, 0, 1, 2]
    assert bv[0, :3].tolist() == [1.0, 2.0, 3.0] and np.isinf(bv[1, 1:]).all()


def test_tree_thresholds_are_midpoints():
    X = np.array([[0.0], [1.0], [4.0], [5.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    codes, bv, nb = _kernels.bin_features(X)
    f, th, *_ = _kernels.build_tree(codes, bv, nb, y, np.arange(4), np.zeros((7, 1)), 1, 3, 1,
                                    _kernels.CRITERION_MSE)
    assert f[0] == 0 and th[0] == 2.5


def test_feature_tie_goes_to_lowest_index():
    # two identical columns: the split must use column 0
    x = np.array([0.0, 1.0, 2.0, 3.0])
    X = np.column_stack([x, x])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    codes, bv, nb = _kernels.bin_features(X)
    f, *_ = _kernels.build_tree(codes, bv, nb, y, np.arange(4), np.full((7, 2), 0.99), 2, 3, 1,
                                _kernels.CRITERION_MSE)
    assert f[0] == 0


def test_env_flag_selects_numpy_backend():
    code = "from directive_dse import _kernels; print(_kernels.backend())"
    env = dict(os.environ, DIRECTIVE_DSE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
