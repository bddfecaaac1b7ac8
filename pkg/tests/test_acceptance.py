"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line; conftest prints them at the end of the
session. Running this file directly prints the same lines.
"""

from __future__ import annotations

import cmath
import math
import time

import numpy as np
from scipy import stats

from conftest import random_braid
from knotweave.benchgen import generate_conjugator, generate_suite, identity_permutation
from knotweave.braid import BraidWord, apply_move, concat, random_move, writhe
from knotweave.fib import (PHI, basis_index, fibonacci, in_basis, make_rng, sample_weighted_batch,
                           weights_array)
from knotweave.mpo import mpo_proj
from knotweave.oracle import (apply_cup_cap, exact_weighted_trace,
                              jones_markov_exact, jones_plat_exact, jones_plat_spliced,
                              markov_prefactor, subspace_view, tn_proj_dense)
from knotweave.protocol import (CfevCompiler, Mitigation, estimate_markov, markov_factor,
                                postprocess_batch, sample_ev_quadruple, shot_level_stats)
from knotweave.qsim import NoiseModel
from knotweave.rep import (FIB3, MAX_POWER, NONFIB3, closed_form_angles, fibonacci_span,
                           fitted_angles, fragment_ops, fragment_phases, fragment_unitary,
                           generator_matrix, braid_unitary, plat_string)
from knotweave.resources import (classical_energy_kwh, classical_time, fit_error_scaling,
                                 quantum_energy_kwh, quantum_time, shots_for_error)

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def span_dev(a, b, n):
    idx = np.union1d(fibonacci_span(n), [0])
    return float(np.abs(a[np.ix_(idx, idx)] - b[np.ix_(idx, idx)]).max())


# -- 1 -----------------------------------------------------------------------

def test_criterion_1_representation():
    t0 = time.perf_counter()
    e = lambda x: cmath.exp(1j * math.pi * x)
    u = generator_matrix(1).entries
    printed = {(0b101, 0b101): e(4 / 5) / PHI, (0b010, 0b010): e(-4 / 5),
               (0b011, 0b011): e(3 / 5), (0b110, 0b110): e(3 / 5), (0b111, 0b111): -1 / PHI,
               (0b101, 0b111): PHI ** -0.5 * e(-3 / 5), (0b111, 0b101): PHI ** -0.5 * e(-3 / 5)}
    elem = max(abs(u[k] - v) for k, v in printed.items())
    zeros = max(abs(u[r, c]) for r in FIB3 for c in FIB3 if r != c and (r, c) not in printed)
    elem = max(elem, zeros)
    unit = max(float(np.abs(m @ m.conj().T - np.eye(8)).max())
               for m in (u, generator_matrix(-1).entries))
    yb_full = yb_span = far = 0.0
    for n in (4, 5, 6):
        s = n - 1
        for i in range(1, s - 1):
            a = braid_unitary(BraidWord(s, (i, i + 1, i)), n)
            b = braid_unitary(BraidWord(s, (i + 1, i, i + 1)), n)
            yb_full = max(yb_full, float(np.abs(a - b).max()))
            yb_span = max(yb_span, span_dev(a, b, n))
        for i in range(1, s):
            for j in range(i + 3, s):
                a = braid_unitary(BraidWord(s, (i, j)), n)
                b = braid_unitary(BraidWord(s, (j, i)), n)
                far = max(far, float(np.abs(a - b).max()))
    dt = time.perf_counter() - t0
    ok = elem < 1e-12 and unit < 1e-12 and yb_full < 1e-12 and far < 1e-12 and dt < 60
    record(1, ok, f"matrix elements {elem:.1e}, unitarity {unit:.1e}, far commutation {far:.1e}, "
                  f"Yang-Baxter on full 2^n space {yb_full:.2e} (on F_n plus |0..0>: {yb_span:.1e}), "
                  f"{dt:.1f} s")


# -- 2 -----------------------------------------------------------------------

def test_criterion_2_compiled_fragments():
    bad = []
    worst = 0.0
    for k in range(1, MAX_POWER + 1):
        a = closed_form_angles(k) if k <= 2 else fitted_angles(k)
        for sign in (1, -1):
            aa = a if sign > 0 else a.negated()
            u = fragment_unitary(aa)
            err, gphase, zphase = fragment_phases(u, k, sign)
            worst = max(worst, err)
            rzz = [op.name for op in fragment_ops(aa)].count("RZZ")
            rel = cmath.exp(1j * (zphase - gphase))
            target = cmath.exp(1j * sign * k * 2 * math.pi / 5)
            leak = max(np.abs(u[np.ix_(FIB3, NONFIB3)]).max(), np.abs(u[1:, 0]).max())
            eig_ok = abs(rel - target) < 1e-9 or abs(rel - target.conjugate()) < 1e-9
            if err > 1e-9 or rzz != 3 or not eig_ok or leak > 1e-9:
                units = (zphase - gphase) / (2 * math.pi / 5)
                bad.append(f"k={k}{'+' if sign > 0 else '-'} span {err:.1e} rzz {rzz} "
                           f"|000> phase {units % 5:.3f} x 2pi/5")
    record(2, not bad, "all fragments match" if not bad else "; ".join(bad))


# -- 3 -----------------------------------------------------------------------

def test_criterion_3_topological_invariance():
    t0 = time.perf_counter()
    worst = 0.0
    moves = 0
    for seq in range(200):
        rng = make_rng(3, seq)
        b = random_braid(rng, int(rng.integers(2, 5)), int(rng.integers(3, 12)))
        v0 = jones_markov_exact(b)
        for _ in range(12):
            m = random_move(b, rng, max_strands=6)
            b = apply_move(b, m)
            moves += 1
            worst = max(worst, abs(jones_markov_exact(b) - v0))
    dt = time.perf_counter() - t0
    record(3, worst < 1e-10 and dt < 300,
           f"200 sequences, {moves} moves, max |dV| {worst:.1e}, {dt:.1f} s")


# -- 4 -----------------------------------------------------------------------

def test_criterion_4_known_values():
    triv = max(abs(jones_markov_exact(BraidWord(k, ())) - PHI ** (k - 1)) for k in range(2, 13))
    t = cmath.exp(2j * math.pi / 5)
    v = lambda t: -t ** -4 + t ** -3 + t ** -1
    right = jones_markov_exact(BraidWord(2, (1, 1, 1)))
    left = jones_markov_exact(BraidWord(2, (-1, -1, -1)))
    # chirality: the mirror pair must map onto {V(t), V(1/t)} one way round
    d1 = max(abs(right - v(t)), abs(left - v(1 / t)))
    d2 = max(abs(right - v(1 / t)), abs(left - v(t)))
    tref = min(d1, d2)
    record(4, triv < 1e-12 and tref < 1e-10,
           f"trivial braids max dev {triv:.1e}; trefoil {tref:.1e} "
           f"({'sigma_1^3 -> V(t)' if d1 <= d2 else 'sigma_1^3 -> V(1/t)'})")


# -- 5 -----------------------------------------------------------------------

def test_criterion_5_plat_theorem():
    worst = 0.0
    for i in range(20):
        strands = 4 if i < 10 else 6
        b = random_braid(make_rng(5, i), strands, 12)
        worst = max(worst, abs(jones_plat_exact(b) - jones_plat_spliced(b)))
    eig = 0.0
    for n in (5, 7, 9):
        view = subspace_view(n)
        v = np.zeros(view.dim, dtype=complex)
        v[view.index(plat_string(n))] = 1
        eig = max(eig, float(np.abs(apply_cup_cap(view, v) - PHI ** ((n - 1) / 2) * v).max()))
    record(5, worst < 1e-9 and eig < 1e-12,
           f"20 braids amplitude vs spliced {worst:.1e}; U_E|alpha> eigen-check {eig:.1e}")


# -- 6 -----------------------------------------------------------------------

def test_criterion_6_sampler():
    details = []
    ok = True
    for n in (4, 8, 12):
        s = sample_weighted_batch(n, 10 ** 6, make_rng(6, n))
        members = bool(not s[:, 0].any() and s[:, 1].all()
                       and not ((s[:, 1:-1] == 0) & (s[:, 2:] == 0)).any())
        f = np.array([fibonacci(j) for j in range(n + 2)])
        idx = ((s[:, 2:] == 0) * f[2:n]).sum(axis=1)
        counts = np.bincount(idx, minlength=fibonacci(n))
        p = stats.chisquare(counts, 10 ** 6 * weights_array(n)).pvalue
        ok &= members and p > 1e-3
        details.append(f"n={n} p={p:.3f}")
    # sanity: index mapping used above agrees with basis_index
    row = tuple(s[0])
    assert in_basis(row) and basis_index(row) == idx[0]
    best = math.inf
    for rep in range(3):
        t0 = time.perf_counter()
        sample_weighted_batch(32, 10 ** 6, make_rng(6, 32, rep))
        best = min(best, (time.perf_counter() - t0) / 10 ** 6)
    ok &= best < 2e-6
    record(6, ok, ", ".join(details) + f"; {best * 1e6:.2f} us/draw at n=32")


# -- 7 -----------------------------------------------------------------------

def test_criterion_7_noiseless_cfev():
    worst_z = 0.0
    discarded = total = 0
    var_sum, var_se2 = 0.0, 0.0
    for i in range(50):
        rng = make_rng(7, i)
        b = random_braid(rng, int(rng.integers(3, 8)), int(rng.integers(5, 30)))
        est = estimate_markov(b, 10 ** 4, seed=7, stream=(i,))
        want = exact_weighted_trace(b)
        z = max(abs(est.R.real - want.real) / est.stderr.real,
                abs(est.R.imag - want.imag) / est.stderr.imag)
        worst_z = max(worst_z, z)
        discarded += est.shots_discarded
        total += est.shots_used + est.shots_discarded
        # variance at fixed s: Var(r) + Var(r_c) = 1
        n = b.strands + 1
        s = np.array((0,) + (1,) * (n - 1), dtype=np.uint8)
        comp = CfevCompiler(b, NoiseModel())
        for imag in (False, True):
            bits = comp.engine(s, imag).run(10 ** 4, make_rng(7, i, 2, int(imag)))
            r = postprocess_batch(bits, s)[2].astype(float)
            v = r.var(ddof=1)
            m4 = np.mean((r - r.mean()) ** 4)
            var_sum += v
            var_se2 += (m4 - v * v) / len(r)
    mean_var = var_sum / 50
    var_se = math.sqrt(var_se2) / 50
    rate = discarded / total
    ok = worst_z < 5 and abs(mean_var - 1) < 3 * var_se and rate < 1e-6
    record(7, ok, f"max |z| {worst_z:.2f} over 50 braids; Var(r)+Var(r_c) = {mean_var:.4f} "
                  f"+- {var_se:.4f}; discard rate {rate:.1e}")


# -- 8 -----------------------------------------------------------------------

def test_criterion_8_mitigation():
    # (a) g2 filtering on a 200-braid noisy suite
    suite = generate_suite(200, 3, (4, 30), seed=8, pad=(1, 3), crossings=(50, 150))
    noise = NoiseModel.from_eps2q(5e-4)
    wins = 0
    for i, bb in enumerate(suite):
        b = bb.B_prime
        est = estimate_markov(b, 10 ** 4, noise, Mitigation(error_detection=True), seed=8,
                              stream=(i,))
        filtered = abs(est.jones - bb.known_jones)
        unfiltered = abs(markov_factor(b) * est.unfiltered_R - bb.known_jones)
        wins += filtered < unfiltered
    frac = wins / len(suite)
    strands = sorted({bb.B_prime.strands for bb in suite})
    # (b) conjugate trick with an injected coherent phase
    worst_conj = 0.0
    for i in range(5):
        b = random_braid(make_rng(8, 1, i), 4, 12)
        want = exact_weighted_trace(b)
        est = estimate_markov(b, 2 * 10 ** 4, NoiseModel(coherent_phase=0.4),
                              Mitigation(conjugate_trick=True), seed=8, stream=(1, i))
        se = est.stderr / math.sqrt(2)
        worst_conj = max(worst_conj, abs(est.R.real - want.real) / se.real,
                         abs(est.R.imag - want.imag) / se.imag)
    # (c) shot-level trick with a uniform random phase per shot
    rng = make_rng(8, 2)
    x, y = 0.6, -0.35
    size = 10 ** 6
    theta = rng.uniform(-math.pi, math.pi, size)
    st = shot_level_stats(*sample_ev_quadruple(x, y, theta, size, rng))
    ax, ay = math.sqrt(st["mean_x2"]), math.sqrt(st["mean_y2"])
    zx = abs(ax - abs(x)) / (st["se_x2"] / (2 * ax))
    zy = abs(ay - abs(y)) / (st["se_y2"] / (2 * ay))
    ok = frac >= 0.8 and worst_conj < 5 and max(zx, zy) < 3
    record(8, ok, f"filtering wins {wins}/{len(suite)} ({strands[0]}-{strands[-1]} strands); "
                  f"conjugate trick max |z| {worst_conj:.2f}; shot-level |z| {zx:.2f}, {zy:.2f}")


# -- 9 -----------------------------------------------------------------------

def test_criterion_9_error_scaling():
    t0 = time.perf_counter()
    suite = generate_suite(200, 3, (4, 50), seed=9, pad=(1, 3), crossings=(50, 200))
    c = np.array([bb.B_prime.crossings for bb in suite], dtype=float)
    errs = {}
    for eps in (5e-4, 1e-4):
        noise = NoiseModel.from_eps2q(eps)
        errs[eps] = np.array([
            estimate_markov(bb.B_prime, 4000, noise, Mitigation(error_detection=True), seed=9,
                            stream=(i,)).relative_error(bb.known_jones)
            for i, bb in enumerate(suite)])
    edges = np.linspace(50, 200, 5)
    which = np.clip(np.digitize(c, edges[1:-1]), 0, 3)
    med = {eps: [float(np.median(e[which == j])) for j in range(4)] for eps, e in errs.items()}
    above = all(a > b for a, b in zip(med[5e-4], med[1e-4]))
    mono = all(np.all(np.diff(m) >= 0) for m in med.values())
    fit = fit_error_scaling(zip(c, errs[5e-4]))
    dt = time.perf_counter() - t0
    ok = above and mono and fit.b > 0 and dt < 4 * 3600
    fmt = lambda m: "/".join(f"{x:.3f}" for x in m)
    record(9, ok, f"bin medians 5e-4 {fmt(med[5e-4])}, 1e-4 {fmt(med[1e-4])}; "
                  f"fit b={fit.b:.2f} (r2 {fit.r2:.2f}); {dt / 60:.1f} min")


# -- 10 ----------------------------------------------------------------------

def test_criterion_10_classical_baselines():
    dense = 0.0
    for i in range(30):
        rng = make_rng(10, i)
        b = random_braid(rng, int(rng.integers(2, 8)), int(rng.integers(1, 25)))
        dense = max(dense, abs(tn_proj_dense(b) - exact_weighted_trace(b)))
    suite = generate_suite(30, 3, (2, 12), seed=10, pad=(0, 3), crossings=(20, 120))
    fib = {fibonacci(j) for j in range(40)}
    worst_rel, bound_ok, on_fib = 0.0, True, 0
    chis = (8, 16, 32, 64, 128, 256)
    rel = {chi: [] for chi in chis}
    for bb in suite:
        b = bb.B_prime
        value, st = mpo_proj(b)
        oracle = exact_weighted_trace(b)
        worst_rel = max(worst_rel, abs(value - oracle) / abs(oracle))
        bound_ok &= st.chi_max_seen <= fibonacci(b.strands + 1)
        on_fib += st.chi_max_seen in fib
        for chi in chis:
            v, _ = mpo_proj(b, chi)
            j = markov_prefactor(b) * v
            rel[chi].append(abs(j - bb.known_jones) / abs(bb.known_jones))
    med = [float(np.median(rel[chi])) for chi in chis]
    trend = all(b <= a for a, b in zip(med, med[1:]))
    ok = dense < 1e-10 and worst_rel < 1e-8 and bound_ok and on_fib >= 24 and trend
    record(10, ok, f"tn dense {dense:.1e}; mpo rel {worst_rel:.1e}, chi_max <= f_n: {bound_ok}, "
                   f"Fibonacci chi_max {on_fib}/30; medians " + "/".join(f"{m:.1e}" for m in med))


# -- 11 ----------------------------------------------------------------------

def test_criterion_11_benchmark_verifiability():
    worst = 0.0
    count = 0
    for k in (1, 2, 3):
        suite = generate_suite(30, k, (1, 20), seed=11 + k, pad=(0, 3), crossings=(1, 150))
        for bb in suite:
            assert bb.B_prime.strands <= 12
            worst = max(worst, abs(jones_markov_exact(bb.B_prime) - bb.known_jones))
            count += 1
    perm_ok = True
    dense_full = dense_span = 0.0
    for i in range(100):
        rng = make_rng(11, i)
        strands = int(rng.integers(2, 13))
        a, a_inv = generate_conjugator(strands, int(rng.integers(0, 20)), rng)
        both = concat(a, a_inv)
        perm_ok &= identity_permutation(both) and writhe(both) == 0
        if strands <= 5:
            u = braid_unitary(both)
            n = strands + 1
            dense_full = max(dense_full, float(np.abs(u - np.eye(2 ** n)).max()))
            dense_span = max(dense_span, span_dev(u, np.eye(2 ** n), n))
    ok = worst < 1e-10 and perm_ok and dense_full < 1e-10
    record(11, ok, f"{count} braids max |oracle - known| {worst:.1e}; permutations identity: "
                   f"{perm_ok}; dense A.A_inv vs I on full 2^n space {dense_full:.2e} "
                   f"(on F_n plus |0..0>: {dense_span:.1e})")


# -- 12 ----------------------------------------------------------------------

def test_criterion_12_resources():
    checks = [
        shots_for_error(0.01) == 10_000,
        shots_for_error(0.1) == 100,
        shots_for_error(0.05) == 400,
        quantum_time(100, 1000) == 6000.0,
        quantum_energy_kwh(6000.0) == 125.0,
        classical_time(3e12) == 3.0,
        classical_energy_kwh(5.2e17) == 2.0,
    ]
    record(12, all(checks), f"{sum(checks)}/{len(checks)} hand-computed values reproduced")


if __name__ == "__main__":
    import sys
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
