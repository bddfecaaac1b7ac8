import numpy as np
import pytest
from hypothesis import given, settings

from conftest import braids, random_braid
from knotweave.braid import BraidWord, writhe
from knotweave.circuit import circuit_unitary
from knotweave.fib import PHI, sample_weighted
from knotweave.protocol import postprocess_batch
from knotweave.qsim import codes_to_bits, statevector
from knotweave.rep import (FIB3, MAX_POWER, NONFIB3, braid_circuit, braid_phases, braid_unitary, cfev_circuit,
                           closed_form_angles, compensation_angle, compiled_generator,
                           fibonacci_span, fitted_angles, fragment_phases, fragment_unitary,
                           generator_matrix, plat_string, projected_generator, splice_matrix)

E = lambda x: np.exp(1j * np.pi * x)


def span_block(u, n):
    idx = fibonacci_span(n)
    return u[np.ix_(idx, idx)]


def test_printed_matrix_elements():
    u = generator_matrix(1).entries
    assert abs(u[0b101, 0b101] - E(4 / 5) / PHI) < 1e-12
    assert abs(u[0b010, 0b010] - E(-4 / 5)) < 1e-12
    assert abs(u[0b011, 0b011] - E(3 / 5)) < 1e-12
    assert abs(u[0b110, 0b110] - E(3 / 5)) < 1e-12
    assert abs(u[0b111, 0b111] + 1 / PHI) < 1e-12
    assert abs(u[0b111, 0b101] - PHI ** -0.5 * E(-3 / 5)) < 1e-12
    assert abs(u[0b101, 0b111] - PHI ** -0.5 * E(-3 / 5)) < 1e-12
    for x in NONFIB3:
        assert abs(u[x, x] - E(2 / 5)) < 1e-12


@pytest.mark.parametrize("sign", [1, -1])
def test_generator_unitary_and_inverse(sign):
    u = generator_matrix(sign).entries
    assert np.allclose(u @ u.conj().T, np.eye(8), atol=1e-12)
    assert np.allclose(generator_matrix(-sign).entries, u.conj())
    assert np.allclose(u @ generator_matrix(-sign).entries, np.eye(8), atol=1e-12)
    p = projected_generator(sign)
    assert np.allclose(p[np.ix_(FIB3, FIB3)], u[np.ix_(FIB3, FIB3)])
    assert not p[list(NONFIB3)].any()


@pytest.mark.parametrize("n", [4, 5, 6])
def test_braid_relations_on_span(n):
    strands = n - 1
    for i in range(1, strands - 1):
        lhs = braid_unitary(BraidWord(strands, (i, i + 1, i)), n)
        rhs = braid_unitary(BraidWord(strands, (i + 1, i, i + 1)), n)
        assert np.abs(span_block(lhs, n) - span_block(rhs, n)).max() < 1e-12
    for i in range(1, strands):
        for j in range(i + 2, strands):
            a = braid_unitary(BraidWord(strands, (i, j)), n)
            b = braid_unitary(BraidWord(strands, (j, i)), n)
            assert np.abs(a - b).max() < 1e-12


def test_span_is_invariant():
    b = random_braid(np.random.default_rng(0), 4, 12)
    u = braid_unitary(b)
    idx = fibonacci_span(5)
    rest = np.setdiff1d(np.arange(32), idx)
    assert np.abs(u[np.ix_(rest, idx)]).max() < 1e-12


def test_splice_matrix_is_scaled_projector():
    m = splice_matrix()
    # on the span it is phi times a rank-one projector
    blk = m[np.ix_(FIB3, FIB3)]
    assert np.allclose(blk @ blk, PHI * blk, atol=1e-12)
    assert np.linalg.matrix_rank(blk, tol=1e-9) == 2


@pytest.mark.parametrize("k", range(1, MAX_POWER + 1))
@pytest.mark.parametrize("sign", [1, -1])
def test_compiled_fragments(k, sign):
    f = compiled_generator(k, sign)
    err, _, _ = fragment_phases(f.unitary, k, sign)
    assert err < 1e-9
    ops = f.ops()
    assert [o.name for o in ops].count("RZZ") == 3
    assert len(ops) == 10


# frozen: relative |000> phase of the shipped fragments in units of 2pi/5
ZERO_PHASE_UNITS = {1: 1, 2: -1, 3: -2, 4: -1, 5: 0, 6: 1, 7: 2, 8: -2, 9: -1}


@pytest.mark.parametrize("k", range(1, MAX_POWER + 1))
def test_zero_phase_frozen(k):
    f = compiled_generator(k)
    assert f.relative_zero_phase / (2 * np.pi / 5) == pytest.approx(ZERO_PHASE_UNITS[k], abs=1e-9)
    assert compiled_generator(k, -1).relative_zero_phase == pytest.approx(-f.relative_zero_phase)


def test_closed_forms():
    # k=2 reproduces U^2; the printed k=1 form does not
    assert fragment_phases(fragment_unitary(closed_form_angles(2)), 2)[0] < 1e-12
    assert fragment_phases(fragment_unitary(closed_form_angles(1)), 1)[0] > 0.1
    assert fragment_phases(fragment_unitary(fitted_angles(1)), 1)[0] < 1e-9
    with pytest.raises(ValueError):
        closed_form_angles(3)
    with pytest.raises(ValueError):
        compiled_generator(10)


@settings(max_examples=25, deadline=None)
@given(braids(max_strands=5, max_len=12))
def test_braid_circuit_matches_unitary_on_span(b):
    n = b.strands + 1
    c = circuit_unitary(braid_circuit(b))
    u = braid_unitary(b)
    gf, _ = braid_phases(b)
    assert np.abs(span_block(c, n) - np.exp(1j * gf) * span_block(u, n)).max() < 1e-9


def test_compensation_angle_exact_case():
    # only single-generator runs: every segment is k=1, phase 2pi/5 per unit writhe
    b = BraidWord(4, (1, 2, -3, 2, -1, 3))
    want = np.angle(np.exp(1j * writhe(b) * 2 * np.pi / 5))
    assert compensation_angle(b) == pytest.approx(want, abs=1e-9)


def cfev_expectation(b, s, imag):
    c = cfev_circuit(b, s, imag_part=imag, measure=False)
    p = statevector(c).probabilities()
    n = c.n_qubits
    bits = codes_to_bits(np.arange(2 ** n), n)
    _, _, r = postprocess_batch(bits, s)
    return float(p @ r)


@pytest.mark.parametrize("seed", range(4))
def test_cfev_circuit_expectation(seed):
    rng = np.random.default_rng(seed)
    b = random_braid(rng, 4, 8)
    u = braid_unitary(b)
    s = sample_weighted(5, rng).bits
    code = int("".join(map(str, s)), 2)
    amp = u[code, code]
    assert cfev_expectation(b, s, False) == pytest.approx(amp.real, abs=1e-9)
    assert cfev_expectation(b, s, True) == pytest.approx(amp.imag, abs=1e-9)


def test_cfev_rejects_bad_strings():
    b = BraidWord(3, (1,))
    with pytest.raises(ValueError):
        cfev_circuit(b, (0, 0, 1, 1))
    with pytest.raises(ValueError):
        cfev_circuit(b, (0, 1, 1))
    assert plat_string(5) == (0, 1, 0, 1, 0)
    with pytest.raises(ValueError):
        plat_string(4)
