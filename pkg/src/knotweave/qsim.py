"""Statevector simulation with Pauli-trajectory noise and SPAM bit flips.

Two paths share the same noise semantics:

* :func:`run_shot` is a plain numpy reference that walks a lowered circuit
  gate by gate.
* :class:`ShotEngine` runs many shots of one circuit in compiled code. Gates
  are grouped into fused blocks (a compiled braid fragment, a lowered CNOT,
  ...). A shot only leaves the fused path inside blocks where it has an
  error, and every shot starts from the noiseless state just before its first
  error, which is shared across the batch.

Qubit q is bit ``n-1-q`` of a basis index.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .circuit import Circuit, Op, PAULIS, RZ, apply_matrix, lower, lower_circuit, op_matrix


@dataclass(frozen=True)
class NoiseModel:
    eps_1q: float = 0.0
    eps_2q: float = 0.0
    eps_init: float = 0.0
    eps_meas0: float = 0.0
    eps_meas1: float = 0.0
    coherent_phase: float = 0.0

    def __post_init__(self):
        for name in ("eps_1q", "eps_2q", "eps_init", "eps_meas0", "eps_meas1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @property
    def is_ideal(self) -> bool:
        return not (self.eps_1q or self.eps_2q or self.eps_init or self.eps_meas0
                    or self.eps_meas1 or self.coherent_phase)

    @classmethod
    def from_eps2q(cls, eps_2q: float, **kw) -> "NoiseModel":
        """1q error at a tenth of the 2q rate and SPAM equal to it."""
        base = dict(eps_1q=eps_2q / 10, eps_2q=eps_2q, eps_init=eps_2q,
                    eps_meas0=eps_2q, eps_meas1=eps_2q)
        base.update(kw)
        return cls(**base)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("eps_1q", "eps_2q", "eps_init", "eps_meas0", "eps_meas1", "coherent_phase")}


PRESETS = {
    "ideal": NoiseModel(),
    "h2like": NoiseModel.from_eps2q(5e-4),
    "eps5e-4": NoiseModel.from_eps2q(5e-4),
    "eps1e-4": NoiseModel.from_eps2q(1e-4),
}


def preset(name: str) -> NoiseModel:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown noise preset {name!r}") from None


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        a = np.zeros(2 ** n, dtype=complex)
        a[0] = 1
        return cls(n, a)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def statevector(c: Circuit) -> StateVector:
    """Noiseless amplitudes from |0...0>; measurement markers are ignored."""
    sv = StateVector.zero(c.n_qubits)
    for op in c.gates():
        sv.amplitudes = apply_matrix(sv.amplitudes, op_matrix(op), op.qubits, c.n_qubits)
    return sv


def bits_of(code: int, n: int) -> np.ndarray:
    return np.array([(code >> (n - 1 - q)) & 1 for q in range(n)], dtype=np.uint8)


def codes_to_bits(codes: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def bits_to_codes(bits: np.ndarray) -> np.ndarray:
    n = bits.shape[1]
    w = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ w


def apply_readout(bits: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    if not (noise.eps_meas0 or noise.eps_meas1):
        return bits
    u = rng.random(bits.shape)
    flip = np.where(bits == 1, u < noise.eps_meas1, u < noise.eps_meas0)
    return bits ^ flip.astype(np.uint8)


def with_coherent_phase(c: Circuit, theta: float) -> Circuit:
    """Insert RZ(theta) on qubit 1 right after the compensation gate."""
    if not theta:
        return c
    ops = []
    for op in c.ops:
        ops.append(op)
        if op.tag == "compensation":
            ops.append(RZ(1, theta, "coherent"))
    return Circuit(c.n_qubits, tuple(ops))


@dataclass
class NoiseAudit:
    """Counts of inserted errors by gate type (RZ must stay at zero)."""

    by_kind: dict = field(default_factory=lambda: {"U1Q": 0, "RZZ": 0, "RZ": 0})


def run_shot(c: Circuit, noise: NoiseModel, rng: np.random.Generator,
             audit: NoiseAudit | None = None) -> np.ndarray:
    """One noisy measurement record of a circuit ending in MEASURE."""
    if not c.has_measure:
        raise ValueError("circuit must end with MEASURE")
    n = c.n_qubits
    low = lower_circuit(with_coherent_phase(c, noise.coherent_phase))
    psi = np.zeros(2 ** n, dtype=complex)
    start = 0
    if noise.eps_init:
        for q in range(n):
            if rng.random() < noise.eps_init:
                start ^= 1 << (n - 1 - q)
    psi[start] = 1
    for op in low.gates():
        psi = apply_matrix(psi, op_matrix(op), op.qubits, n)
        if op.name == "U1Q" and noise.eps_1q and rng.random() < noise.eps_1q:
            p = int(rng.integers(1, 4))
            psi = apply_matrix(psi, PAULIS[p], op.qubits, n)
            if audit:
                audit.by_kind["U1Q"] += 1
        elif op.name == "RZZ" and noise.eps_2q and rng.random() < noise.eps_2q:
            p = int(rng.integers(1, 16))
            pm = np.kron(PAULIS[p // 4], PAULIS[p % 4])
            psi = apply_matrix(psi, pm, op.qubits, n)
            if audit:
                audit.by_kind["RZZ"] += 1
    prob = np.abs(psi) ** 2
    code = int(np.searchsorted(np.cumsum(prob), rng.random() * prob.sum(), side="right"))
    code = min(code, 2 ** n - 1)
    return apply_readout(bits_of(code, n)[None, :], noise, rng)[0]


# -- compiled engine ---------------------------------------------------------

MAXNZ = 64

# block kernels
GENERIC, DIAG, ONEQ, MONO, FRAG = 0, 1, 2, 3, 4
_FRAG_PATTERN = {(0, 0), (2, 2), (3, 3), (6, 6), (1, 1), (1, 4), (4, 1), (4, 4),
                 (5, 5), (5, 7), (7, 5), (7, 7)}


@dataclass
class Block:
    """A fused unitary on up to three qubits and the natives it stands for."""

    qubits: tuple[int, ...]
    matrix: np.ndarray
    natives: list[Op]


def _sparse(mat: np.ndarray):
    r, c = np.nonzero(np.abs(mat) > 1e-12)
    return r, c, mat[r, c]


def _kind(mat: np.ndarray, qubits: Sequence[int]) -> int:
    r, c, _ = _sparse(mat)
    if np.all(r == c):
        return DIAG
    if len(qubits) == 1:
        return ONEQ
    if len(set(r.tolist())) == len(r):
        return MONO
    if (len(qubits) == 3 and qubits[1] == qubits[0] + 1 and qubits[2] == qubits[1] + 1
            and set(zip(r.tolist(), c.tolist())) <= _FRAG_PATTERN):
        return FRAG
    return GENERIC


def block_from_natives(natives: Sequence[Op]) -> Block:
    qs = sorted({q for op in natives for q in op.qubits})
    k = len(qs)
    local = {q: j for j, q in enumerate(qs)}
    m = np.eye(2 ** k, dtype=complex)
    for op in natives:
        m = apply_matrix(m, op_matrix(op), [local[q] for q in op.qubits], k)
    return Block(tuple(qs), m, list(natives))


def blocks_from_ops(ops: Sequence[Op]) -> list[Block]:
    """Lower ops and fuse the natives of each braid fragment or abstract gate."""
    out: list[Block] = []
    group: list[Op] = []
    gtag = None
    for op in ops:
        if op.name in ("PREP", "MEASURE"):
            continue
        natives = lower(op)
        tag = op.tag if op.tag.startswith("frag") else None
        if tag is not None and tag == gtag:
            group.extend(natives)
            continue
        if group:
            out.append(block_from_natives(group))
        group, gtag = list(natives), tag
        if tag is None:
            out.append(block_from_natives(group))
            group = []
    if group:
        out.append(block_from_natives(group))
    return out


@dataclass
class Gates:
    """Packed gate table: kind, qubits, dense 8x8 matrix and sparse entries."""

    kind: np.ndarray
    nq: np.ndarray
    q: np.ndarray
    mat: np.ndarray
    nnz: np.ndarray
    r: np.ndarray
    c: np.ndarray
    v: np.ndarray

    def args(self):
        return (self.kind, self.nq, self.q, self.mat, self.nnz, self.r, self.c, self.v)


def _pack(mats, qubit_lists) -> Gates:
    m = len(mats)
    kind = np.zeros(m, np.int64)
    nq = np.zeros(m, np.int64)
    q = np.zeros((m, 3), np.int64)
    dense = np.zeros((m, 8, 8), np.complex128)
    nnz = np.zeros(m, np.int64)
    rr = np.zeros((m, MAXNZ), np.int64)
    cc = np.zeros((m, MAXNZ), np.int64)
    vv = np.zeros((m, MAXNZ), np.complex128)
    for j, (mat, qs) in enumerate(zip(mats, qubit_lists)):
        k = len(qs)
        kind[j] = _kind(mat, qs)
        nq[j] = k
        q[j, :k] = qs
        dense[j, :2 ** k, :2 ** k] = mat
        r, c, v = _sparse(mat)
        nnz[j] = len(r)
        rr[j, :len(r)] = r
        cc[j, :len(r)] = c
        vv[j, :len(r)] = v
    return Gates(kind, nq, q, dense, nnz, rr, cc, vv)


@dataclass
class Program:
    """Natives and fused blocks of one circuit, as flat arrays."""

    n: int
    natives: Gates
    nat_noise: np.ndarray   # 0 none, 1 one-qubit, 2 two-qubit
    blocks: Gates
    blk_start: np.ndarray   # first native index of each block
    blk_stop: np.ndarray

    @property
    def n_natives(self) -> int:
        return len(self.nat_noise)


_native_cache: dict = {}


def _native_entry(op: Op):
    key = (op.name, op.qubits, op.params)
    hit = _native_cache.get(key)
    if hit is None:
        hit = (op_matrix(op), op.qubits)
        if len(_native_cache) < 200000:
            _native_cache[key] = hit
    return hit


def _cat_gates(parts: Sequence[Gates]) -> Gates:
    return Gates(*(np.concatenate([getattr(g, f) for g in parts])
                   for f in ("kind", "nq", "q", "mat", "nnz", "r", "c", "v")))


def concat_programs(*progs: Program) -> Program:
    """Run programs back to back (all on the same qubit count)."""
    n = progs[0].n
    offs = np.cumsum([0] + [p.n_natives for p in progs[:-1]])
    return Program(n, _cat_gates([p.natives for p in progs]),
                   np.concatenate([p.nat_noise for p in progs]),
                   _cat_gates([p.blocks for p in progs]),
                   np.concatenate([p.blk_start + o for p, o in zip(progs, offs)]),
                   np.concatenate([p.blk_stop + o for p, o in zip(progs, offs)]))


def build_program(n: int, blocks: Sequence[Block]) -> Program:
    nat_ops = [op for b in blocks for op in b.natives]
    nat = [_native_entry(op) for op in nat_ops]
    natives = _pack([m for m, _ in nat], [q for _, q in nat])
    noise = np.array([1 if op.name == "U1Q" else 2 if op.name == "RZZ" else 0 for op in nat_ops],
                     dtype=np.int64)
    packed = _pack([b.matrix for b in blocks], [b.qubits for b in blocks])
    sizes = np.array([len(b.natives) for b in blocks], dtype=np.int64)
    stop = np.cumsum(sizes)
    return Program(n, natives, noise, packed, stop - sizes, stop)


@numba.njit(cache=True)
def _apply_gate(psi, n, j, kind, nq, q, mat, nnz, rr, cc, vv):
    k = nq[j]
    dim = psi.shape[0]
    K = kind[j]
    if K == 1:  # diagonal
        p0 = n - 1 - q[j, 0]
        p1 = n - 1 - q[j, 1]
        p2 = n - 1 - q[j, 2]
        for x in range(dim):
            loc = (x >> p0) & 1
            if k > 1:
                loc = (loc << 1) | ((x >> p1) & 1)
            if k > 2:
                loc = (loc << 1) | ((x >> p2) & 1)
            psi[x] *= mat[j, loc, loc]
        return
    if K == 2:  # one qubit
        st = 1 << (n - 1 - q[j, 0])
        m00 = mat[j, 0, 0]
        m01 = mat[j, 0, 1]
        m10 = mat[j, 1, 0]
        m11 = mat[j, 1, 1]
        for hi in range(0, dim, 2 * st):
            for lo in range(st):
                i0 = hi + lo
                a0 = psi[i0]
                a1 = psi[i0 + st]
                psi[i0] = m00 * a0 + m01 * a1
                psi[i0 + st] = m10 * a0 + m11 * a1
        return
    if K == 4:  # compiled fragment on a contiguous window
        L = 1 << (n - 1 - q[j, 2])
        S = L << 3
        d0 = mat[j, 0, 0]
        d2 = mat[j, 2, 2]
        d3 = mat[j, 3, 3]
        d6 = mat[j, 6, 6]
        m11 = mat[j, 1, 1]
        m14 = mat[j, 1, 4]
        m41 = mat[j, 4, 1]
        m44 = mat[j, 4, 4]
        m55 = mat[j, 5, 5]
        m57 = mat[j, 5, 7]
        m75 = mat[j, 7, 5]
        m77 = mat[j, 7, 7]
        for hi in range(0, dim, S):
            for lo in range(L):
                i0 = hi + lo
                a1 = psi[i0 + L]
                a4 = psi[i0 + 4 * L]
                a5 = psi[i0 + 5 * L]
                a7 = psi[i0 + 7 * L]
                psi[i0] *= d0
                psi[i0 + 2 * L] *= d2
                psi[i0 + 3 * L] *= d3
                psi[i0 + 6 * L] *= d6
                psi[i0 + L] = m11 * a1 + m14 * a4
                psi[i0 + 4 * L] = m41 * a1 + m44 * a4
                psi[i0 + 5 * L] = m55 * a5 + m57 * a7
                psi[i0 + 7 * L] = m75 * a5 + m77 * a7
        return
    # generic sparse (and monomial) path over groups
    pos = np.empty(k, np.int64)
    for t in range(k):
        pos[t] = n - 1 - q[j, t]
    srt = np.sort(pos)
    loc_dim = 1 << k
    off = np.zeros(loc_dim, np.int64)
    for loc in range(loc_dim):
        o = 0
        for t in range(k):
            if (loc >> (k - 1 - t)) & 1:
                o |= 1 << pos[t]
        off[loc] = o
    a = np.empty(loc_dim, np.complex128)
    b = np.empty(loc_dim, np.complex128)
    ne = nnz[j]
    for t in range(1 << (n - k)):
        base = t
        for u in range(k):
            p = srt[u]
            low = base & ((1 << p) - 1)
            base = ((base >> p) << (p + 1)) | low
        for loc in range(loc_dim):
            a[loc] = psi[base + off[loc]]
            b[loc] = 0
        for e in range(ne):
            b[rr[j, e]] += vv[j, e] * a[cc[j, e]]
        for loc in range(loc_dim):
            psi[base + off[loc]] = b[loc]


@numba.njit(cache=True)
def _apply_pauli(psi, n, q, p):
    if p == 0:
        return
    m = 1 << (n - 1 - q)
    dim = psi.shape[0]
    for hi in range(0, dim, 2 * m):
        for lo in range(m):
            x = hi + lo
            a0 = psi[x]
            a1 = psi[x + m]
            if p == 1:
                psi[x] = a1
                psi[x + m] = a0
            elif p == 2:
                psi[x] = -1j * a1
                psi[x + m] = 1j * a0
            else:
                psi[x + m] = -a1


@numba.njit(cache=True)
def _sample(psi, u):
    total = 0.0
    for x in range(psi.shape[0]):
        total += psi[x].real ** 2 + psi[x].imag ** 2
    target = u * total
    acc = 0.0
    for x in range(psi.shape[0]):
        acc += psi[x].real ** 2 + psi[x].imag ** 2
        if acc > target:
            return x
    return psi.shape[0] - 1


@numba.njit(cache=True)
def _run_batch(n, nkind, nnq, nq_, nmat, nnnz, nr, nc, nv,
               bkind, bnq, bq, bmat, bnnz, br, bc, bv, blk_start, blk_stop,
               init_mask, err_ptr, err_nat, err_p, uniforms, out, ideal_probs):
    """Simulate shots sorted by first error.

    Shot i carries errors err_nat[err_ptr[i]:err_ptr[i+1]] (native index)
    with Pauli codes err_p, and an initial X mask init_mask[i]. The
    noiseless state is advanced lazily and shared by all shots.
    """
    dim = 1 << n
    nblk = bkind.shape[0]
    ideal = np.zeros(dim, np.complex128)
    ideal[0] = 1.0
    work = np.empty(dim, np.complex128)
    cur = 0
    for i in range(init_mask.shape[0]):
        e0 = err_ptr[i]
        e1 = err_ptr[i + 1]
        first = err_nat[e0] if e1 > e0 else 1 << 60
        if init_mask[i] != 0:
            start_blk = 0
            for x in range(dim):
                work[x] = 0
            work[init_mask[i]] = 1.0
        else:
            while cur < nblk and blk_stop[cur] <= first:
                _apply_gate(ideal, n, cur, bkind, bnq, bq, bmat, bnnz, br, bc, bv)
                cur += 1
            start_blk = cur
            for x in range(dim):
                work[x] = ideal[x]
        e = e0
        for bi in range(start_blk, nblk):
            s1 = blk_stop[bi]
            if e < e1 and err_nat[e] < s1:
                for j in range(blk_start[bi], s1):
                    _apply_gate(work, n, j, nkind, nnq, nq_, nmat, nnnz, nr, nc, nv)
                    while e < e1 and err_nat[e] == j:
                        code = err_p[e]
                        if nnq[j] == 1:
                            _apply_pauli(work, n, nq_[j, 0], code)
                        else:
                            _apply_pauli(work, n, nq_[j, 0], code // 4)
                            _apply_pauli(work, n, nq_[j, 1], code % 4)
                        e += 1
            else:
                _apply_gate(work, n, bi, bkind, bnq, bq, bmat, bnnz, br, bc, bv)
        out[i] = _sample(work, uniforms[i])
    while cur < nblk:
        _apply_gate(ideal, n, cur, bkind, bnq, bq, bmat, bnnz, br, bc, bv)
        cur += 1
    for x in range(dim):
        ideal_probs[x] = ideal[x].real ** 2 + ideal[x].imag ** 2


def sample_errors(prog: Program, noise: NoiseModel, shots: int, rng: np.random.Generator):
    """Draw trajectory errors for ``shots`` runs of ``prog``.

    Returns (init_mask, per-shot sorted lists of (native index, Pauli code)).
    """
    n = prog.n
    p = np.where(prog.nat_noise == 1, noise.eps_1q, np.where(prog.nat_noise == 2, noise.eps_2q, 0.0))
    events: dict[int, list] = {}
    if p.any():
        hits = rng.binomial(shots, p)
        for j in np.nonzero(hits)[0]:
            who = rng.choice(shots, size=int(hits[j]), replace=False)
            ncode = 3 if prog.nat_noise[j] == 1 else 15
            codes = rng.integers(1, ncode + 1, size=len(who))
            for w, c in zip(who, codes):
                events.setdefault(int(w), []).append((int(j), int(c)))
    init = np.zeros(shots, np.int64)
    if noise.eps_init:
        flips = rng.random((shots, n)) < noise.eps_init
        init = (flips.astype(np.int64) << np.arange(n - 1, -1, -1)).sum(axis=1)
    return init, events


def run_program(prog: Program, noise: NoiseModel, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Measurement codes (before readout flips) for ``shots`` noisy runs."""
    init, events = sample_errors(prog, noise, shots, rng)
    bad = sorted(set(events) | set(np.nonzero(init)[0].tolist()))
    # shots with init flips go first; the rest by first error position
    key = lambda i: (-1 if init[i] else min(events[i])[0])
    bad.sort(key=key)
    ptr = [0]
    nat = []
    pc = []
    for i in bad:
        for j, c in sorted(events.get(i, [])):
            nat.append(j)
            pc.append(c)
        ptr.append(len(nat))
    nb = len(bad)
    out = np.zeros(nb, np.int64)
    ideal_probs = np.zeros(2 ** prog.n)
    _run_batch(prog.n, *prog.natives.args(), *prog.blocks.args(), prog.blk_start, prog.blk_stop,
               init[bad].astype(np.int64) if nb else np.zeros(0, np.int64),
               np.array(ptr, np.int64), np.array(nat + [0], np.int64), np.array(pc + [0], np.int64),
               rng.random(nb), out, ideal_probs)
    codes = np.empty(shots, np.int64)
    good = np.ones(shots, bool)
    good[bad] = False
    ng = int(good.sum())
    if ng:
        cdf = np.cumsum(ideal_probs)
        codes[good] = np.minimum(np.searchsorted(cdf, rng.random(ng) * cdf[-1], side="right"),
                                 len(cdf) - 1)
    codes[bad] = out
    return codes


class ShotEngine:
    """Runs batches of a fixed circuit under a noise model."""

    def __init__(self, circuit: Circuit, noise: NoiseModel):
        self.noise = noise
        self.n = circuit.n_qubits
        c = with_coherent_phase(circuit, noise.coherent_phase)
        self.program = build_program(self.n, blocks_from_ops(c.ops))

    @classmethod
    def from_program(cls, program: Program, noise: NoiseModel) -> "ShotEngine":
        """Wrap a prebuilt program (coherent phase must already be in it)."""
        eng = cls.__new__(cls)
        eng.noise, eng.n, eng.program = noise, program.n, program
        return eng

    def run(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        codes = run_program(self.program, self.noise, shots, rng)
        return apply_readout(codes_to_bits(codes, self.n), self.noise, rng)
