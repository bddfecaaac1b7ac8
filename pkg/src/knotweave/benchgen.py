"""Benchmark braids whose Jones value is known in advance.

A product of independent 3-strand blocks has a Jones value equal to the
product of the block values times phi^(k-1). Block words are drawn so that the
magnitude of the weighted trace is roughly uniform on [0, 1], and the product
is hidden by conjugating with a random braid A whose inverse is built by an
odd-even sorting network rather than by reversing A.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .braid import BraidWord, concat, permutation, serialize_braid, shift
from .fib import PHI, make_rng
from .oracle import exact_weighted_trace, markov_prefactor

GRID = np.linspace(0.0, 7.5, 100)
BRICK_P = 2 / 3


@dataclass(frozen=True)
class TableEntry:
    word: tuple[int, ...]
    value: complex        # E_s[<s|U_b|s>] on 3 strands
    jones: complex        # Jones value of the closure


@dataclass
class ThreeStrandTable:
    entries: list[TableEntry]
    t: np.ndarray                  # unique log-magnitudes t_1..t_m
    groups: list[list[int]]        # entry indices per unique value
    length: int = 4

    @property
    def m(self) -> int:
        return len(self.t)


def _group_values(logs: np.ndarray, tol: float = 1e-10):
    order = np.argsort(logs, kind="stable")
    t, groups = [], []
    for i in order:
        if t and abs(logs[i] - t[-1]) <= tol:
            groups[-1].append(int(i))
        else:
            t.append(float(logs[i]))
            groups.append([int(i)])
    return np.array(t), groups


@lru_cache(maxsize=8)
def build_three_strand_table(length: int = 4) -> ThreeStrandTable:
    """All 3-strand words of length <= L with nonzero weighted trace."""
    if length < 1:
        raise ValueError("L must be at least 1")
    entries = []
    for k in range(length + 1):
        for word in itertools.product((1, -1, 2, -2), repeat=k):
            b = BraidWord(3, word)
            v = exact_weighted_trace(b)
            if abs(v) < 1e-12:
                continue
            entries.append(TableEntry(word, v, complex(markov_prefactor(b) * v)))
    logs = np.log(np.array([abs(e.value) for e in entries]))
    logs = np.minimum(logs, 0.0)
    t, groups = _group_values(logs)
    return ThreeStrandTable(entries, t, groups, length)


# -- magnitude design --------------------------------------------------------

@dataclass(frozen=True)
class MagnitudeDesign:
    k: int
    p: np.ndarray
    residual: float
    gap: float
    converged: bool
    iterations: int

    def to_json(self) -> dict:
        return {"k": self.k, "p": self.p.tolist(), "residual": self.residual, "gap": self.gap,
                "converged": self.converged, "iterations": self.iterations}


def _support_solve(a: np.ndarray, y: np.ndarray, support) -> np.ndarray | None:
    """Least squares on the affine hull {sum p = 1} of one support set."""
    cols = list(support)
    sub = a[:, cols]
    base = sub[:, 0]
    if len(cols) == 1:
        q = np.array([1.0])
    else:
        # p = e_0 + sum_j z_j (e_j - e_0)
        diff = sub[:, 1:] - base[:, None]
        z = np.linalg.lstsq(diff, y - base, rcond=None)[0]
        q = np.concatenate([[1.0 - z.sum()], z])
    if q.min() < -1e-13:
        return None
    p = np.zeros(a.shape[1])
    p[cols] = np.maximum(q, 0.0)
    return p / p.sum()


def _gap(a, y, p) -> float:
    g = 2 * a.T @ (a @ p - y)
    return float(p @ g - g.min())


def fit_magnitude_design(table: ThreeStrandTable, k: int, grid: np.ndarray = GRID,
                         tol: float = 1e-8, max_iter: int = 100_000,
                         exact_support_limit: int = 12) -> MagnitudeDesign:
    """Simplex-constrained least squares match of the block MGF to (x+1)^(-1/k).

    Exponentiated gradient from the uniform point, stopped once the simplex
    stationarity gap sum_j p_j g_j - min_j g_j drops below ``tol``. The design
    matrix is badly conditioned, so when the group count is small the result
    is polished by solving every support set exactly and keeping the best
    feasible one.
    """
    if table.m == 0:
        raise ValueError("empty table")
    if k < 1:
        raise ValueError("k must be at least 1")
    a = np.exp(np.outer(grid, table.t))
    y = (grid + 1.0) ** (-1.0 / k)
    m = table.m
    p = np.full(m, 1.0 / m)
    step = 1.0 / (2 * np.linalg.norm(a, 2) ** 2)
    it = 0
    for it in range(1, max_iter + 1):
        g = 2 * a.T @ (a @ p - y)
        if float(p @ g - g.min()) < tol:
            break
        w = np.log(np.maximum(p, 1e-300)) - step * g
        p = np.exp(w - w.max())
        p /= p.sum()
    obj = lambda q: float(np.sum((a @ q - y) ** 2))
    if m <= exact_support_limit and _gap(a, y, p) >= tol:
        best = p
        for size in range(1, m + 1):
            for sup in itertools.combinations(range(m), size):
                q = _support_solve(a, y, sup)
                if q is not None and obj(q) < obj(best):
                    best = q
        p = best
    gap = _gap(a, y, p)
    return MagnitudeDesign(k, p, obj(p), gap, gap < tol, it)


@lru_cache(maxsize=16)
def default_design(k: int, length: int = 4) -> MagnitudeDesign:
    """Design for the default grid, fitted once per (k, L)."""
    return fit_magnitude_design(build_three_strand_table(length), k)


def sample_blocks(table: ThreeStrandTable, design: MagnitudeDesign, rng: np.random.Generator
                  ) -> list[TableEntry]:
    """k block words: group by p, member uniform within the group."""
    out = []
    for g in rng.choice(table.m, size=design.k, p=design.p):
        members = table.groups[int(g)]
        out.append(table.entries[members[int(rng.integers(len(members)))]])
    return out


# -- conjugators -------------------------------------------------------------

def _signed(i: int, order_rank: np.ndarray, at: list[int]) -> int:
    """Sign for a crossing at positions (i, i+1), 1-based i, per the total order."""
    left, right = at[i - 1], at[i]
    return i if order_rank[right] < order_rank[left] else -i


def generate_conjugator(strands: int, layers: int, rng: np.random.Generator,
                        brick_p: float = BRICK_P) -> tuple[BraidWord, BraidWord]:
    """Brick-wall braid A and a sorting-network braid A_inv with A.A_inv trivial."""
    if strands < 2 or layers < 0:
        raise ValueError("need strands >= 2 and layers >= 0")
    rank = rng.permutation(strands)
    at = list(range(strands))          # at[pos] = strand label
    a: list[int] = []
    for layer in range(layers):
        for i in range(1 + layer % 2, strands, 2):
            if rng.random() < brick_p:
                a.append(_signed(i, rank, at))
                at[i - 1], at[i] = at[i], at[i - 1]
    a_inv: list[int] = []
    for rnd in range(strands):
        swapped = False
        for i in range(1 + rnd % 2, strands, 2):
            if at[i - 1] > at[i]:
                a_inv.append(_signed(i, rank, at))
                at[i - 1], at[i] = at[i], at[i - 1]
                swapped = True
        if not swapped and rnd % 2 and all(at[j] == j for j in range(strands)):
            break
    return BraidWord(strands, tuple(a)), BraidWord(strands, tuple(a_inv))


# -- benchmark braids --------------------------------------------------------

@dataclass
class BenchmarkBraid:
    B_prime: BraidWord
    known_jones: complex
    k: int
    layers: int
    seed: int = 0
    pad: int = 0
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"braid_text": serialize_braid(self.B_prime),
                "known_jones_re": self.known_jones.real, "known_jones_im": self.known_jones.imag,
                "k": self.k, "layers": self.layers, "seed": self.seed, "pad": self.pad,
                "blocks": [list(w) for w in self.provenance.get("blocks", [])]}

    @classmethod
    def from_json(cls, obj: dict) -> "BenchmarkBraid":
        from .braid import parse_braid
        return cls(parse_braid(obj["braid_text"]),
                   complex(obj["known_jones_re"], obj["known_jones_im"]),
                   int(obj["k"]), int(obj["layers"]), int(obj.get("seed", 0)),
                   int(obj.get("pad", 0)), {"blocks": obj.get("blocks", [])})


def known_value(blocks: list[TableEntry], pad: int = 0) -> complex:
    """phi^(components-1) times the product of block Jones values."""
    v = complex(PHI ** (len(blocks) + pad - 1))
    for e in blocks:
        v *= e.jones
    return v


def product_braid(blocks: list[TableEntry], pad: int = 0) -> BraidWord:
    strands = 3 * len(blocks) + pad
    parts = [shift(BraidWord(3, e.word), 3 * i, strands) for i, e in enumerate(blocks)]
    return concat(BraidWord(strands, ()), *parts)


def generate_benchmark(k: int, layers: int, design: MagnitudeDesign, rng: np.random.Generator,
                       table: ThreeStrandTable | None = None, pad: int = 0,
                       seed: int = 0) -> BenchmarkBraid:
    """B' = A^-1 (b_1 x ... x b_k) A on 3k + pad strands, with its known Jones value."""
    if design.k != k:
        raise ValueError(f"design was fitted for k={design.k}, not {k}")
    table = table or build_three_strand_table(4)
    blocks = sample_blocks(table, design, rng)
    b = product_braid(blocks, pad)
    a, a_inv = generate_conjugator(b.strands, layers, rng)
    bp = concat(a_inv, b, a)
    return BenchmarkBraid(bp, known_value(blocks, pad), k, layers, seed, pad,
                          {"blocks": [e.word for e in blocks], "A": a.word, "A_inv": a_inv.word})


def generate_suite(count: int, k: int, layers, seed: int, pad=0,
                   crossings: tuple[int, int] | None = None, max_tries: int = 1000,
                   length: int = 4) -> list[BenchmarkBraid]:
    """``count`` braids, braid j drawn from stream (seed, j).

    ``layers`` and ``pad`` may be ints or (lo, hi) inclusive ranges; with
    ``crossings`` set, draws outside the range are rejected and redrawn.
    """
    table = build_three_strand_table(length)
    design = default_design(k, length)
    out = []
    for j in range(count):
        rng = make_rng(seed, j)
        for _ in range(max_tries):
            ly = layers if isinstance(layers, int) else int(rng.integers(layers[0], layers[1] + 1))
            pd = pad if isinstance(pad, int) else int(rng.integers(pad[0], pad[1] + 1))
            bb = generate_benchmark(k, ly, design, rng, table, pd, seed)
            if crossings is None or crossings[0] <= bb.B_prime.crossings <= crossings[1]:
                break
        else:
            raise RuntimeError("could not hit the crossing range")
        bb.provenance["index"] = j
        out.append(bb)
    return out


def dump_suite(suite: list[BenchmarkBraid]) -> str:
    return "".join(json.dumps(bb.to_json(), sort_keys=True) + "\n" for bb in suite)


def load_suite(text: str) -> list[BenchmarkBraid]:
    return [BenchmarkBraid.from_json(json.loads(ln)) for ln in text.splitlines() if ln.strip()]


def identity_permutation(b: BraidWord) -> bool:
    return permutation(b) == list(range(b.strands))
