import cmath

import numpy as np
import pytest

from kauffman import jones as kauffman_jones
from knotweave.benchgen import (GRID, BenchmarkBraid, build_three_strand_table, dump_suite,
                                fit_magnitude_design, generate_benchmark, generate_conjugator,
                                generate_suite, identity_permutation, known_value, load_suite,
                                product_braid)
from knotweave.braid import BraidWord, concat, writhe
from knotweave.fib import PHI, make_rng
from knotweave.oracle import braid_columns, jones_markov_exact

A_KAUFFMAN = cmath.exp(0.6j * cmath.pi)


def test_table_frozen_counts():
    table = build_three_strand_table(4)
    # frozen: every one of the 341 words of length <= 4 has a nonzero trace
    assert len(table.entries) == 341
    assert table.m == 9
    assert np.all(table.t <= 0) and np.all(np.diff(table.t) > 0)
    assert sum(len(g) for g in table.groups) == len(table.entries)


def test_table_values_consistent():
    table = build_three_strand_table(2)
    for e in table.entries:
        b = BraidWord(3, e.word)
        assert abs(jones_markov_exact(b) - e.jones) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_design_on_simplex(k):
    table = build_three_strand_table(4)
    d = fit_magnitude_design(table, k)
    assert d.p.min() >= 0 and d.p.sum() == pytest.approx(1.0)
    assert d.converged and d.gap < 1e-8
    a = np.exp(np.outer(GRID, table.t))
    assert np.sum((a @ d.p - (GRID + 1) ** (-1 / k)) ** 2) == pytest.approx(d.residual)


@pytest.mark.parametrize("strands,layers", [(3, 0), (4, 5), (7, 12), (12, 30)])
def test_conjugator_cancels(strands, layers):
    rng = make_rng(strands, layers)
    a, a_inv = generate_conjugator(strands, layers, rng)
    both = concat(a, a_inv)
    assert identity_permutation(both)
    assert writhe(both) == 0
    if strands <= 7:
        cols = braid_columns(both)
        assert np.abs(cols - np.eye(len(cols))).max() < 1e-12


def test_conjugator_not_a_plain_reversal():
    a, a_inv = generate_conjugator(8, 20, make_rng(3))
    assert a_inv.word != tuple(-g for g in reversed(a.word))


@pytest.mark.parametrize("pad", [0, 1, 2])
def test_known_value_matches_oracle(pad):
    rng = make_rng(11, pad)
    table = build_three_strand_table(4)
    design = fit_magnitude_design(table, 2)
    bb = generate_benchmark(2, 6, design, rng, table, pad)
    assert bb.B_prime.strands == 6 + pad
    assert abs(jones_markov_exact(bb.B_prime) - bb.known_jones) < 1e-10


def test_known_value_matches_state_sum():
    table = build_three_strand_table(4)
    design = fit_magnitude_design(table, 1)
    rng = make_rng(4)
    hits = 0
    while hits < 3:
        bb = generate_benchmark(1, 1, design, rng, table, pad=1)
        if bb.B_prime.crossings > 12:
            continue
        b = bb.B_prime
        assert abs(kauffman_jones(b.strands, b.word, A_KAUFFMAN) - bb.known_jones) < 1e-9
        hits += 1


def test_product_and_padding():
    table = build_three_strand_table(4)
    blocks = table.entries[:2]
    b = product_braid(blocks, pad=2)
    assert b.strands == 8
    assert known_value(blocks, 2) == pytest.approx(PHI ** 3 * blocks[0].jones * blocks[1].jones)


def test_suite_reproducible_and_in_range():
    s1 = generate_suite(4, 3, (3, 8), seed=5, pad=(1, 2), crossings=(30, 90))
    s2 = generate_suite(4, 3, (3, 8), seed=5, pad=(1, 2), crossings=(30, 90))
    assert dump_suite(s1) == dump_suite(s2)
    for bb in s1:
        assert 30 <= bb.B_prime.crossings <= 90
        assert 10 <= bb.B_prime.strands <= 11
    back = load_suite(dump_suite(s1))
    assert [x.B_prime for x in back] == [x.B_prime for x in s1]
    assert back[0].known_jones == s1[0].known_jones
    assert BenchmarkBraid.from_json(s1[1].to_json()).pad == s1[1].pad


def test_design_k_mismatch():
    table = build_three_strand_table(4)
    with pytest.raises(ValueError):
        generate_benchmark(2, 3, fit_magnitude_design(table, 1), make_rng(0), table)
