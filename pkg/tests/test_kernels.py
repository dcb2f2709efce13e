import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcsum import kernels as K

token_lists = st.lists(st.integers(0, 5), max_size=25)


def _lcs_oracle(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    return table[-1][-1]


@settings(max_examples=200, deadline=None)
@given(token_lists, token_lists)
def test_lcs_paths_agree(a, b):
    a, b = np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)
    want = _lcs_oracle(a.tolist(), b.tolist())
    assert K._lcs_length_loop(a, b) == want
    assert K._lcs_length_numpy(a, b) == want
    assert K.lcs_length_jit(a, b) == want
    assert K.lcs_length(a, b) == want


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=1, max_size=60), st.sampled_from([0.5, 0.72, 0.9]))
def test_mtld_factor_paths_agree(ids, threshold):
    arr = np.array(ids, dtype=np.int64)
    ref = K._mtld_factor_count_loop(arr, 8, threshold)
    assert K._mtld_factor_count_numpy(arr, 8, threshold) == ref
    assert K.mtld_factor_count_jit(arr, 8, threshold) == ref


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(0, 12), st.data())
def test_trigram_mask_paths_agree(k, t, data):
    rows = [data.draw(st.lists(st.integers(0, 3), min_size=t, max_size=t)) for _ in range(k)]
    hyps = np.array(rows, dtype=np.int64).reshape(k, t)
    want = np.zeros((k, 6), dtype=bool)
    for r, row in enumerate(rows):
        if t >= 3:
            for i in range(t - 2):
                if (row[i], row[i + 1]) == (row[-2], row[-1]):
                    want[r, row[i + 2]] = True
    assert np.array_equal(K._trigram_ban_mask_loop(hyps, 6), want)
    assert np.array_equal(K._trigram_ban_mask_numpy(hyps, 6), want)
    assert np.array_equal(K.trigram_ban_mask(hyps, 6), want)


def test_trigram_mask_rejects_1d():
    with pytest.raises(ValueError):
        K.trigram_ban_mask(np.arange(4), 5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=8), st.data())
def test_subset_sum_paths_agree(weights, data):
    size = data.draw(st.integers(0, len(weights)))
    want = np.zeros(sum(weights) + 1)
    for combo in itertools.combinations(weights, size):
        want[sum(combo)] += 1
    w = np.array(weights, dtype=np.int64)
    assert np.array_equal(K._subset_sum_counts_loop(w, size), want)
    assert np.array_equal(K._subset_sum_counts_numpy(w, size), want)
    assert np.array_equal(K.subset_sum_counts(w, size), want)


def test_subset_sum_rejects_negative():
    with pytest.raises(ValueError):
        K.subset_sum_counts([1, -2], 1)


def test_env_flag_selects_numpy_path():
    code = "import simcsum.kernels as k; print(k.NUMBA_ENABLED, k.lcs_length([1, 2, 3], [2, 3]))"
    env = dict(os.environ, SIMCSUM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "2"]
