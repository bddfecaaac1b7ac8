"""Native-gate circuits and their text serialisation.

Native gates follow the trapped-ion set:

* ``RZ(theta)    = exp(-i theta/2 Z)``
* ``U1Q(a, b)    = exp(-i a/2 (X cos b + Y sin b))``
* ``RZZ(chi)     = exp(-i chi/2 Z(x)Z)``

``H``, ``SDG`` and ``CNOT`` are kept abstract for noiseless work and lowered
to natives (equal up to global phase) before noisy simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NATIVE = ("RZ", "U1Q", "RZZ")
ABSTRACT = ("H", "SDG", "CNOT")
MARKERS = ("PREP", "MEASURE")
ARITY = {"RZ": 1, "U1Q": 1, "RZZ": 2, "H": 1, "SDG": 1, "CNOT": 2, "PREP": 0, "MEASURE": 0}
NPARAMS = {"RZ": 1, "U1Q": 2, "RZZ": 1, "H": 0, "SDG": 0, "CNOT": 0, "PREP": 0, "MEASURE": 0}


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Op:
    """One circuit instruction. ``tag`` labels structure (e.g. a braid fragment)."""

    name: str
    qubits: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    tag: str = ""

    def __post_init__(self):
        if self.name not in ARITY:
            raise CircuitError(f"unknown gate {self.name}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != ARITY[self.name] or len(self.params) != NPARAMS[self.name]:
            raise CircuitError(f"bad arity for {self.name}: {self.qubits} {self.params}")


# constructors kept short since circuits are assembled in several modules
def RZ(q: int, theta: float, tag: str = "") -> Op:
    return Op("RZ", (q,), (theta,), tag)


def U1Q(q: int, alpha: float, beta: float, tag: str = "") -> Op:
    return Op("U1Q", (q,), (alpha, beta), tag)


def RZZ(q1: int, q2: int, chi: float, tag: str = "") -> Op:
    return Op("RZZ", (q1, q2), (chi,), tag)


def H(q: int, tag: str = "") -> Op:
    return Op("H", (q,), (), tag)


def SDG(q: int, tag: str = "") -> Op:
    return Op("SDG", (q,), (), tag)


def CNOT(c: int, t: int, tag: str = "") -> Op:
    return Op("CNOT", (c, t), (), tag)


PREP = Op("PREP")
MEASURE = Op("MEASURE")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[Op, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for i, op in enumerate(self.ops):
            if any(q < 0 or q >= self.n_qubits for q in op.qubits):
                raise CircuitError(f"qubit index out of range in {op}")
            if len(set(op.qubits)) != len(op.qubits):
                raise CircuitError(f"repeated qubit in {op}")
            if op.name == "PREP" and i != 0:
                raise CircuitError("PREP must be the first op")
            if op.name == "MEASURE" and i != len(self.ops) - 1:
                raise CircuitError("MEASURE must be the last op")

    @property
    def has_measure(self) -> bool:
        return bool(self.ops) and self.ops[-1].name == "MEASURE"

    def count(self, name: str) -> int:
        return sum(op.name == name for op in self.ops)

    def gates(self) -> list[Op]:
        return [op for op in self.ops if op.name not in MARKERS]

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.n_qubits, other.n_qubits), self.ops + other.ops)


# -- matrices ---------------------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I = np.eye(2, dtype=complex)
PAULIS = (_I, _X, _Y, _Z)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def u1q_matrix(alpha: float, beta: float) -> np.ndarray:
    c, s = np.cos(alpha / 2), np.sin(alpha / 2)
    return np.array([[c, -1j * s * np.exp(-1j * beta)], [-1j * s * np.exp(1j * beta), c]])


def rzz_matrix(chi: float) -> np.ndarray:
    a, b = np.exp(-0.5j * chi), np.exp(0.5j * chi)
    return np.diag([a, b, b, a])


H_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SDG_MATRIX = np.diag([1, -1j])
CNOT_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def op_matrix(op: Op) -> np.ndarray:
    if op.name == "RZ":
        return rz_matrix(*op.params)
    if op.name == "U1Q":
        return u1q_matrix(*op.params)
    if op.name == "RZZ":
        return rzz_matrix(*op.params)
    if op.name == "H":
        return H_MATRIX
    if op.name == "SDG":
        return SDG_MATRIX
    if op.name == "CNOT":
        return CNOT_MATRIX
    raise CircuitError(f"{op.name} has no matrix")


def apply_matrix(psi: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a k-qubit matrix to a state (or a batch of columns) of n qubits.

    ``psi`` has shape (2**n,) or (2**n, m); qubit 0 is the most significant bit.
    """
    k = len(qubits)
    extra = psi.shape[1:]
    t = psi.reshape((2,) * n + extra)
    g = mat.reshape((2,) * (2 * k))
    axes_in = list(range(k, 2 * k))
    t = np.tensordot(g, t, axes=(axes_in, list(qubits)))
    # tensordot puts the gate outputs first; move them back into place
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape((2 ** n,) + extra)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of a small circuit (markers ignored)."""
    d = 2 ** c.n_qubits
    u = np.eye(d, dtype=complex)
    for op in c.gates():
        u = apply_matrix(u, op_matrix(op), op.qubits, c.n_qubits)
    return u


# -- lowering ----------------------------------------------------------------

def lower(op: Op) -> list[Op]:
    """Rewrite an abstract gate into natives, equal up to a global phase."""
    if op.name == "H":
        (q,) = op.qubits
        return [RZ(q, np.pi, op.tag), U1Q(q, np.pi / 2, np.pi / 2, op.tag)]
    if op.name == "SDG":
        return [RZ(op.qubits[0], -np.pi / 2, op.tag)]
    if op.name == "CNOT":
        c, t = op.qubits
        return (lower(H(t, op.tag))
                + [RZ(c, np.pi / 2, op.tag), RZ(t, np.pi / 2, op.tag), RZZ(c, t, -np.pi / 2, op.tag)]
                + lower(H(t, op.tag)))
    return [op]


def lower_circuit(c: Circuit) -> Circuit:
    ops: list[Op] = []
    for op in c.ops:
        ops.extend(lower(op))
    return Circuit(c.n_qubits, tuple(ops))


# -- text format -------------------------------------------------------------

def dump_circuit(c: Circuit) -> str:
    lines = [f"QUBITS {c.n_qubits}"]
    for op in c.ops:
        parts = [op.name]
        if op.qubits:
            parts.append(",".join(str(q) for q in op.qubits))
        if op.params:
            parts.append(",".join(repr(p) for p in op.params))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_circuit(text: str) -> Circuit:
    n = None
    ops = []
    for ln in text.splitlines():
        tok = ln.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "QUBITS":
            n = int(tok[1])
            continue
        name = tok[0]
        qubits: tuple[int, ...] = ()
        params: tuple[float, ...] = ()
        if ARITY.get(name, 0) and len(tok) > 1:
            qubits = tuple(int(x) for x in tok[1].split(","))
            if len(tok) > 2:
                params = tuple(float(x) for x in tok[2].split(","))
        ops.append(Op(name, qubits, params))
    if n is None:
        raise CircuitError("missing QUBITS header")
    return Circuit(n, tuple(ops))
