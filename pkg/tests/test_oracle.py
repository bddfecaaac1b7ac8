import cmath

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import braids, random_braid
from kauffman import jones as kauffman_jones
from knotweave.braid import BraidWord, conjugate_mirror
from knotweave.fib import PHI, basis_codes, weights_array
from knotweave.oracle import (SizeCapError, braid_columns, braid_diagonal, exact_weighted_trace,
                              jones_markov_exact, jones_plat_exact, jones_plat_spliced,
                              plat_amplitude, projector_chain_diag, subspace_view, tn_proj_dense)
from knotweave.rep import braid_unitary, plat_string

T = cmath.exp(2j * cmath.pi / 5)
A_KAUFFMAN = cmath.exp(0.6j * cmath.pi)


def trefoil(t):
    return -t ** -4 + t ** -3 + t ** -1


@pytest.mark.parametrize("k", range(2, 9))
def test_trivial_braid(k):
    assert jones_markov_exact(BraidWord(k, ())) == pytest.approx(PHI ** (k - 1), abs=1e-12)


def test_trefoil_and_mirror():
    right = jones_markov_exact(BraidWord(2, (1, 1, 1)))
    left = jones_markov_exact(BraidWord(2, (-1, -1, -1)))
    assert abs(right - trefoil(T)) < 1e-10
    assert abs(left - trefoil(1 / T)) < 1e-10


def test_figure_eight():
    v = jones_markov_exact(BraidWord(3, (1, -2, 1, -2)))
    assert abs(v - (T ** 2 - T + 1 - 1 / T + T ** -2)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(braids(max_strands=5, max_len=10))
def test_matches_kauffman_state_sum(b):
    assert abs(jones_markov_exact(b) - kauffman_jones(b.strands, b.word, A_KAUFFMAN)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(braids(max_strands=6, max_len=12))
def test_mirror_conjugates(b):
    assert abs(jones_markov_exact(conjugate_mirror(b)) - jones_markov_exact(b).conjugate()) < 1e-10


@pytest.mark.parametrize("strands", [3, 4, 5])
def test_packed_view_matches_dense(strands):
    b = random_braid(np.random.default_rng(strands), strands, 10)
    n = strands + 1
    u = braid_unitary(b)
    codes = basis_codes(n)
    dense = u[np.ix_(codes, codes)]
    assert np.allclose(braid_columns(b), dense, atol=1e-12)
    assert np.allclose(braid_diagonal(b, chunk=2), np.diag(dense), atol=1e-12)
    assert exact_weighted_trace(b) == pytest.approx(weights_array(n) @ np.diag(dense), abs=1e-12)


def test_view_index():
    v = subspace_view(6)
    assert v.index(plat_string(5) + (1,)) == list(basis_codes(6)).index(0b010101)


@pytest.mark.parametrize("strands", [2, 3, 4, 5, 6, 7])
def test_dense_projector_contraction(strands):
    b = random_braid(np.random.default_rng(10 + strands), strands, 12)
    assert abs(tn_proj_dense(b) - exact_weighted_trace(b)) < 1e-10
    # the non-Fibonacci block is projected out by the chain either way
    assert abs(tn_proj_dense(b, zero_nonfib=False) - exact_weighted_trace(b)) < 1e-10


def test_projector_chain_support():
    d = projector_chain_diag(5)
    codes = set(basis_codes(5).tolist())
    assert all((d[x] != 0) == (x in codes) for x in range(32))
    assert d[list(codes)].sum() / PHI ** 4 == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(6))
def test_plat_amplitude_equals_spliced_trace(seed):
    rng = np.random.default_rng(seed)
    strands = 4 if seed % 2 else 6
    b = random_braid(rng, strands, 10)
    assert abs(jones_plat_exact(b) - jones_plat_spliced(b)) < 1e-9


def test_plat_errors_and_caps():
    with pytest.raises(ValueError):
        plat_amplitude(BraidWord(3, (1,)))
    with pytest.raises(SizeCapError):
        exact_weighted_trace(BraidWord(8, ()), cap=6)
    with pytest.raises(SizeCapError):
        tn_proj_dense(BraidWord(12, ()))
