"""The compiled kernels must agree with the pure-Python fallback bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simulpolicy import _kernels
from simulpolicy._kernels import _pure

ext = pytest.importorskip("simulpolicy._kernels._ext", reason="compiled extension not built")


@pytest.mark.skipif(os.environ.get("SIMULPOLICY_PURE_PYTHON") == "1", reason="fallback forced")
def test_compiled_kernels_selected_by_default():
    assert _kernels.IMPLEMENTATION == "cython"


def test_env_var_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "from simulpolicy import _kernels; print(_kernels.IMPLEMENTATION)"],
        env={**os.environ, "SIMULPOLICY_PURE_PYTHON": "1"}, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@given(st.lists(st.lists(st.sampled_from("abc"), max_size=6), min_size=1, max_size=5))
def test_lcp_length_agrees(seqs):
    seqs = [tuple(s) for s in seqs]
    assert ext.lcp_length(seqs) == _pure.lcp_length(seqs)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=200), st.floats(0.3, 3.0))
def test_stretch_agrees(xs, speed):
    x = np.array(xs)
    n = max(1, int(len(x) / speed + 0.5))
    assert np.array_equal(ext.stretch_linear(x, speed, n), _pure.stretch_linear(x, speed, n))


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(1, 10), st.integers(0, 2**32 - 1), st.booleans())
def test_prefix_beam_search_agrees(T, V, beam, seed, with_zeros):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(V + 1, 0.5), size=T)
    if with_zeros:
        p[rng.random(p.shape) < 0.2] = 0.0
        p[:, -1] += 1e-3
        p /= p.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    ranks = list(rng.permutation(V))
    n_best = int(rng.integers(1, beam + 1))
    assert ext.prefix_beam_search(logp, ranks, beam, n_best) == _pure.prefix_beam_search(logp, ranks, beam, n_best)

