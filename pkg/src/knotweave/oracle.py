"""Exact evaluators working in the packed Fibonacci subspace, plus a dense
projector-chain contraction for small qubit counts.

The packed oracle stores one amplitude per member of F_n and applies each
generator as a diagonal phase plus a 2x2 mix between strings that differ in
the middle bit of a ``1?1`` window. Cost for the weighted trace is
O(c * f_n^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .braid import BraidWord, writhe
from .fib import PHI, basis_array, basis_codes, fibonacci, weights_array
from .rep import generator_matrix, plat_string, projected_generator, splice_matrix
from .circuit import apply_matrix

DEFAULT_CAP = 28


class SizeCapError(ValueError):
    """Raised when a braid needs more qubits than an evaluator allows."""


@dataclass(frozen=True)
class GeneratorKernel:
    diag: np.ndarray      # coefficient on the string itself
    partner: np.ndarray   # index of the string with the middle bit flipped (or self)
    off: np.ndarray       # coefficient on the partner


class SubspaceOperatorView:
    """Packed F_n representation with per-generator kernels."""

    def __init__(self, n: int):
        if n < 3:
            raise ValueError("need at least 3 qubits")
        self.n = n
        self.dim = fibonacci(n)
        self.basis = basis_array(n)
        self.codes = basis_codes(n)
        self._lookup = {int(c): i for i, c in enumerate(self.codes)}
        self._cache: dict[tuple[int, str], GeneratorKernel] = {}

    def index(self, bits) -> int:
        code = 0
        for b in bits:
            code = (code << 1) | int(b)
        return self._lookup[code]

    def kernel(self, g: int, matrix: str = "sigma") -> GeneratorKernel:
        """Kernel for signed generator g; ``matrix='splice'`` gives the M element."""
        key = (g, matrix)
        if key not in self._cache:
            if matrix == "sigma":
                m = generator_matrix(g).entries
            else:
                m = splice_matrix()
            i = abs(g)
            w = (self.basis[:, i - 1].astype(int) << 2) | (self.basis[:, i].astype(int) << 1) \
                | self.basis[:, i + 1].astype(int)
            flip = 1 << (self.n - 1 - i)
            partner = np.array([self._lookup.get(int(c) ^ flip, -1) for c in self.codes])
            diag = m[w, w]
            wp = w ^ 0b010
            off = m[w, wp]
            ok = (w & 0b101) == 0b101
            partner = np.where(ok & (partner >= 0), partner, np.arange(self.dim))
            off = np.where(ok, off, 0)
            self._cache[key] = GeneratorKernel(diag, partner, off)
        return self._cache[key]

    def apply(self, g: int, v: np.ndarray, matrix: str = "sigma") -> np.ndarray:
        k = self.kernel(g, matrix)
        if v.ndim == 1:
            return k.diag * v + k.off * v[k.partner]
        return k.diag[:, None] * v + k.off[:, None] * v[k.partner]

    def evolve(self, word, v: np.ndarray) -> np.ndarray:
        for g in word:
            v = self.apply(g, v)
        return v


@lru_cache(maxsize=32)
def subspace_view(n: int) -> SubspaceOperatorView:
    return SubspaceOperatorView(n)


def _check_cap(n: int, cap: int):
    if n > cap:
        raise SizeCapError(f"{n} qubits exceeds the cap of {cap}")


def braid_diagonal(b: BraidWord, cap: int = DEFAULT_CAP, chunk: int = 2048) -> np.ndarray:
    """<s|U_B|s> for every s in F_n, in basis order."""
    n = b.strands + 1
    _check_cap(n, cap)
    if n < 3:
        raise ValueError("need at least 2 strands")
    view = subspace_view(n)
    d = view.dim
    out = np.empty(d, dtype=complex)
    for start in range(0, d, chunk):
        stop = min(d, start + chunk)
        v = np.zeros((d, stop - start), dtype=complex)
        v[np.arange(start, stop), np.arange(stop - start)] = 1
        v = view.evolve(b.word, v)
        out[start:stop] = v[np.arange(start, stop), np.arange(stop - start)]
    return out


def braid_columns(b: BraidWord, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Packed U_B restricted to F_n (f_n x f_n)."""
    n = b.strands + 1
    _check_cap(n, cap)
    view = subspace_view(n)
    return view.evolve(b.word, np.eye(view.dim, dtype=complex))


def exact_weighted_trace(b: BraidWord, cap: int = DEFAULT_CAP) -> complex:
    """E_{s~p}[<s|U_B|s>]."""
    n = b.strands + 1
    diag = braid_diagonal(b, cap)
    return complex(np.dot(weights_array(n), diag))


def markov_prefactor(b: BraidWord) -> complex:
    n = b.strands + 1
    return (-np.exp(-0.6j * np.pi)) ** (3 * writhe(b)) * PHI ** (n - 2)


def plat_prefactor(b: BraidWord) -> complex:
    n = b.strands + 1
    return (-np.exp(-0.6j * np.pi)) ** (3 * writhe(b)) * PHI ** ((n - 3) / 2)


def jones_markov_exact(b: BraidWord, cap: int = DEFAULT_CAP) -> complex:
    return complex(markov_prefactor(b) * exact_weighted_trace(b, cap))


def plat_amplitude(b: BraidWord, cap: int = DEFAULT_CAP) -> complex:
    """<alpha|U_B|alpha> with alpha = 0101...10."""
    if b.strands % 2:
        raise ValueError("plat closure needs an even strand count")
    n = b.strands + 1
    _check_cap(n, cap)
    view = subspace_view(n)
    a = view.index(plat_string(n))
    v = np.zeros(view.dim, dtype=complex)
    v[a] = 1
    v = view.evolve(b.word, v)
    return complex(v[a])


def jones_plat_exact(b: BraidWord, cap: int = DEFAULT_CAP) -> complex:
    return complex(plat_prefactor(b) * plat_amplitude(b, cap))


def cup_cap_chain(n: int) -> list[int]:
    """Generators carrying the M element: qubit windows (2i, 2i+1, 2i+2)."""
    return [2 * i + 1 for i in range((n - 1) // 2)]


def apply_cup_cap(view: SubspaceOperatorView, v: np.ndarray) -> np.ndarray:
    for g in cup_cap_chain(view.n):
        v = view.apply(g, v, matrix="splice")
    return v


def jones_plat_spliced(b: BraidWord, cap: int = DEFAULT_CAP) -> complex:
    """Plat value from the Markov-style trace of U_B U_E with the M elements spliced in."""
    if b.strands % 2:
        raise ValueError("plat closure needs an even strand count")
    n = b.strands + 1
    _check_cap(n, cap)
    view = subspace_view(n)
    v = np.eye(view.dim, dtype=complex)
    v = apply_cup_cap(view, v)
    v = view.evolve(b.word, v)
    trace = np.dot(weights_array(n), np.diag(v))
    return complex((-np.exp(-0.6j * np.pi)) ** (3 * writhe(b)) * PHI ** (n - 2) * trace)


# -- dense projector chain ---------------------------------------------------

DENSE_CAP = 12


def projector_set() -> dict[str, np.ndarray]:
    def proj(pairs, weights):
        p = np.zeros((4, 4))
        for code, w in zip(pairs, weights):
            p[code, code] = w
        return p

    return {
        "boundary0": proj([0b01], [1.0]),
        "mid": proj([0b01, 0b10, 0b11], [1.0, 1.0, 1.0]),
        "boundary1": proj([0b10, 0b01, 0b11], [1.0, PHI, PHI]),
    }


def projector_chain_diag(n: int) -> np.ndarray:
    """Diagonal of the product of the two-qubit projectors on (q, q+1)."""
    if n < 3:
        raise ValueError("projector chain needs at least 3 qubits")
    ps = projector_set()
    d = np.ones(2 ** n)
    for q in range(n - 1):
        name = "boundary0" if q == 0 else ("boundary1" if q == n - 2 else "mid")
        d = d * _pair_weight(ps[name], q, n)
    return d


def _pair_weight(mat: np.ndarray, q: int, n: int) -> np.ndarray:
    x = np.arange(2 ** n)
    a = (x >> (n - 1 - q)) & 1
    b = (x >> (n - 2 - q)) & 1
    return np.diag(mat)[(a << 1) | b]


def tn_proj_dense(b: BraidWord, zero_nonfib: bool = True, cap: int = DENSE_CAP) -> complex:
    """Weighted trace by dense operator products and the projector chain."""
    n = b.strands + 1
    _check_cap(n, cap)
    u = np.eye(2 ** n, dtype=complex)
    for g in b.word:
        i = abs(g)
        m = projected_generator(g) if zero_nonfib else generator_matrix(g).entries
        u = apply_matrix(u, m, (i - 1, i, i + 1), n)
    w = projector_chain_diag(n)
    return complex(np.sum(w * np.diag(u)) / PHI ** (n - 1))
