"""The Fibonacci representation of the braid group and its compiled circuits.

Generator i (1-based) acts on qubits i-1, i, i+1. On the five three-bit
strings without ``00`` it is the fifth-root-of-unity matrix below; the three
remaining strings pick up the phase ``exp(i 2pi/5)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .braid import BraidWord, writhe
from .circuit import (CNOT, H, MEASURE, PREP, RZ, RZZ, SDG, U1Q, Circuit, Op,
                      apply_matrix, circuit_unitary)
from .fib import PHI, in_basis

FIB3 = (0b010, 0b011, 0b101, 0b110, 0b111)
NONFIB3 = (0b000, 0b001, 0b100)
ALPHA = 2 * np.pi / 5
MAX_POWER = 9


@dataclass(frozen=True)
class GeneratorMatrix:
    entries: np.ndarray
    eigenphase_000: float


def _u_sigma() -> np.ndarray:
    e = lambda x: np.exp(1j * np.pi * x)
    u = np.zeros((8, 8), dtype=complex)
    u[0b010, 0b010] = e(-4 / 5)
    u[0b011, 0b011] = e(3 / 5)
    u[0b110, 0b110] = e(3 / 5)
    u[0b101, 0b101] = e(4 / 5) / PHI
    u[0b111, 0b111] = -1 / PHI
    u[0b111, 0b101] = u[0b101, 0b111] = PHI ** -0.5 * e(-3 / 5)
    for x in NONFIB3:
        u[x, x] = np.exp(1j * ALPHA)
    return u


def generator_matrix(sign: int = 1) -> GeneratorMatrix:
    u = _u_sigma()
    if sign < 0:
        return GeneratorMatrix(u.conj(), -ALPHA)
    return GeneratorMatrix(u, ALPHA)


def projected_generator(sign: int = 1) -> np.ndarray:
    """Generator with the non-Fibonacci action replaced by zero."""
    u = generator_matrix(sign).entries.copy()
    for x in NONFIB3:
        u[x, :] = 0
        u[:, x] = 0
    return u


def splice_matrix() -> np.ndarray:
    """The cup-cap element ``e^{i3pi/5} U + e^{i pi/5} I`` on the Fibonacci span."""
    u = _u_sigma()
    m = np.exp(0.6j * np.pi) * u + np.exp(0.2j * np.pi) * np.eye(8)
    for x in NONFIB3:
        m[x, :] = 0
        m[:, x] = 0
    return m


# -- dense braid unitaries ---------------------------------------------------

def braid_unitary(b: BraidWord, n: int | None = None, projected: bool = False) -> np.ndarray:
    """Dense 2^n unitary of a braid (n defaults to strands + 1)."""
    n = b.strands + 1 if n is None else n
    u = np.eye(2 ** n, dtype=complex)
    for g in b.word:
        i = abs(g)
        mat = projected_generator(g) if projected else generator_matrix(g).entries
        u = apply_matrix(u, mat, (i - 1, i, i + 1), n)
    return u


def fibonacci_span(n: int) -> np.ndarray:
    """Codes of all n-bit strings without ``00`` (qubit 0 most significant)."""
    codes = []
    for x in range(2 ** n):
        bits = [(x >> (n - 1 - q)) & 1 for q in range(n)]
        if all(bits[i] or bits[i + 1] for i in range(n - 1)):
            codes.append(x)
    return np.array(codes)


# -- compiled fragments ------------------------------------------------------

@dataclass(frozen=True)
class FragmentAngles:
    alpha: tuple[float, float, float, float]
    beta: tuple[float, float, float, float]
    chi: tuple[float, float, float]
    theta: tuple[float, float, float]

    def negated(self) -> "FragmentAngles":
        neg = lambda v: tuple(-x for x in v)
        return FragmentAngles(neg(self.alpha), neg(self.beta), neg(self.chi), neg(self.theta))


def closed_form_angles(k: int) -> FragmentAngles:
    """Printed closed-form angles for U_sigma (k=1) and U_sigma^2 (k=2)."""
    pi = np.pi
    if k == 1:
        a = np.arcsin(np.sqrt(3 / (4 * PHI))) - pi
        b = np.arcsin(PHI * np.sqrt(3 / 8))
        return FragmentAngles((a, -a, -a, a),
                              (0.0, -b, -b - 3 * pi / 10, -2 * b - 3 * pi / 10),
                              (-b, pi / 2, -b),
                              (-pi / 10, 2 * b + 3 * pi / 10, pi / 5))
    if k == 2:
        a = np.arcsin(2 / np.sqrt(3 + 2 * PHI))
        b = np.arcsin(np.sqrt(3 * PHI - 1) / 2) - pi
        return FragmentAngles((pi - a, a, -a, pi - a),
                              (0.0, -b, 2 * pi / 5 - b, -2 * b - 3 * pi / 5),
                              (-b, 3 * pi / 5, -b),
                              (pi / 5, 2 * b + 3 * pi / 5, -2 * pi / 5))
    raise ValueError("closed forms exist for k = 1, 2 only")


@lru_cache(maxsize=1)
def _table() -> dict:
    text = resources.files("knotweave").joinpath("data/compiled_angles.json").read_text()
    return json.loads(text)


def fitted_angles(k: int) -> FragmentAngles:
    """Numerically fitted angles for U_sigma^k, k in 1..9."""
    row = _table()["angles"][str(k)]
    return FragmentAngles(tuple(row["alpha"]), tuple(row["beta"]),
                          tuple(row["chi"]), tuple(row["theta"]))


def angles_version() -> int:
    return int(_table()["version"])


def default_angles(k: int) -> FragmentAngles:
    # the printed k=1 closed form does not reproduce U_sigma; use the fit
    if k == 2:
        return closed_form_angles(2)
    return fitted_angles(k)


def fragment_ops(a: FragmentAngles, qubits: Sequence[int] = (0, 1, 2), tag: str = "") -> list[Op]:
    """Ten native gates: four U1Q on the middle qubit, three RZZ, three RZ."""
    q0, q1, q2 = qubits
    pairs = ((q1, q2), (q0, q1), (q1, q2))
    ops: list[Op] = []
    for j in range(4):
        ops.append(U1Q(q1, a.alpha[j], a.beta[j], tag))
        if j < 3:
            ops.append(RZZ(*pairs[j], a.chi[j], tag))
    for q, t in zip((q0, q1, q2), a.theta):
        ops.append(RZ(q, t, tag))
    return ops


def fragment_unitary(a: FragmentAngles) -> np.ndarray:
    return circuit_unitary(Circuit(3, tuple(fragment_ops(a))))


@dataclass(frozen=True)
class CompiledFragment:
    """A compiled power of one generator on qubits (0, 1, 2).

    ``fib_phase`` is the global phase g with fragment = e^{ig} U^k on the
    Fibonacci span; ``zero_phase`` is the phase the fragment puts on |000>.
    """

    power: int
    sign: int
    angles: FragmentAngles
    unitary: np.ndarray
    fib_phase: float
    zero_phase: float

    def ops(self, qubits: Sequence[int] = (0, 1, 2), tag: str = "") -> list[Op]:
        return fragment_ops(self.angles, qubits, tag)

    @property
    def relative_zero_phase(self) -> float:
        return float(np.angle(np.exp(1j * (self.zero_phase - self.fib_phase))))


def fragment_phases(u: np.ndarray, k: int, sign: int = 1) -> tuple[float, float, float]:
    """(max deviation from U^k on the span, fib global phase, |000> phase)."""
    target = np.linalg.matrix_power(generator_matrix(sign).entries, k)
    idx = np.ix_(FIB3, FIB3)
    s, t = u[idx], target[idx]
    ph = np.vdot(t.ravel(), s.ravel())
    ph /= abs(ph)
    err = float(np.abs(s - ph * t).max())
    return err, float(np.angle(ph)), float(np.angle(u[0, 0]))


def fragment_leakage(u: np.ndarray) -> float:
    """Largest amplitude moving between the span and its complement, or off |000>."""
    a = np.abs(u[np.ix_(FIB3, NONFIB3)]).max()
    b = np.abs(u[np.ix_(NONFIB3, FIB3)]).max()
    c = max(np.abs(u[1:, 0]).max(), np.abs(u[0, 1:]).max())
    return float(max(a, b, c))


@lru_cache(maxsize=None)
def compiled_generator(power: int, sign: int = 1) -> CompiledFragment:
    if not 1 <= power <= MAX_POWER:
        raise ValueError(f"power {power} outside 1..{MAX_POWER}")
    a = default_angles(power)
    if sign < 0:
        a = a.negated()
    u = fragment_unitary(a)
    err, gphase, zphase = fragment_phases(u, power, sign)
    err = max(err, fragment_leakage(u))
    if err > 1e-9:
        raise RuntimeError(f"compiled fragment k={power} deviates by {err:.2e}")
    return CompiledFragment(power, 1 if sign > 0 else -1, a, u, gphase, zphase)


# -- braid circuits ----------------------------------------------------------

def braid_segments(b: BraidWord, run_powers: bool = True) -> list[tuple[int, int, int]]:
    """Split a word into (generator, power, sign) blocks."""
    segs: list[tuple[int, int, int]] = []
    for g in b.word:
        i, s = abs(g), (1 if g > 0 else -1)
        if run_powers and segs and segs[-1][0] == i and segs[-1][2] == s and segs[-1][1] < MAX_POWER:
            segs[-1] = (i, segs[-1][1] + 1, s)
        else:
            segs.append((i, 1, s))
    return segs


def braid_circuit(b: BraidWord, run_powers: bool = True) -> Circuit:
    n = b.strands + 1
    ops: list[Op] = []
    for idx, (i, k, s) in enumerate(braid_segments(b, run_powers)):
        ops.extend(compiled_generator(k, s).ops((i - 1, i, i + 1), tag=f"frag{idx}"))
    return Circuit(n, tuple(ops))


def braid_phases(b: BraidWord, run_powers: bool = True) -> tuple[float, float]:
    """Accumulated (Fibonacci-span phase, |0...0> phase) of the braid circuit."""
    gf = gz = 0.0
    for i, k, s in braid_segments(b, run_powers):
        f = compiled_generator(k, s)
        gf += f.fib_phase
        gz += f.zero_phase
    return gf, gz


def compensation_angle(b: BraidWord, run_powers: bool = True) -> float:
    """RZ angle on qubit 1 that aligns the cat branches after the braid.

    With exact generators this is w_B * 2pi/5.
    """
    gf, gz = braid_phases(b, run_powers)
    return float(np.angle(np.exp(1j * (gz - gf))))


def plat_string(n: int) -> tuple[int, ...]:
    """The fixed string 0101...10 of odd length n."""
    if n % 2 == 0:
        raise ValueError("plat string needs odd n")
    return tuple(q % 2 for q in range(n))


def cfev_circuit(b: BraidWord, s, imag_part: bool = False, run_powers: bool = True,
                 measure: bool = True) -> Circuit:
    """Control-free echo-verification circuit estimating <s|U_B|s>.

    Qubit 1 carries the phase; the CNOT fan prepares (|0..0> + |s>)/sqrt 2.
    """
    bits = tuple(getattr(s, "bits", s))
    n = b.strands + 1
    if len(bits) != n:
        raise ValueError(f"string length {len(bits)} does not match {n} qubits")
    if not in_basis(bits):
        raise ValueError("s is not a member of F_n")
    ladder = [CNOT(1, q, "ladder") for q in range(2, n) if bits[q]]
    ops: list[Op] = [PREP, H(1, "cat")]
    ops += ladder
    ops += braid_circuit(b, run_powers).ops
    ops.append(RZ(1, compensation_angle(b, run_powers), "compensation"))
    ops += [CNOT(1, q, "unladder") for q in reversed(range(2, n)) if bits[q]]
    if imag_part:
        ops.append(SDG(1, "imag"))
    ops.append(H(1, "cat"))
    if measure:
        ops.append(MEASURE)
    return Circuit(n, tuple(ops))
