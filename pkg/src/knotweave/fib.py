"""Fibonacci strings, the basis F_n, the weights p(s) and the Zeckendorf sampler.

Bit strings are indexed from qubit 0 (most significant, leftmost). ``F'_m``
holds all length-m strings without two consecutive zeros; ``F_n`` is the
subset of length-n strings that also start with 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PHI = (1.0 + 5.0 ** 0.5) / 2.0


@lru_cache(maxsize=None)
def fib_table(upto: int) -> tuple[int, ...]:
    """Exact Fibonacci numbers f_0..f_upto with f_0 = 0, f_1 = 1."""
    f = [0, 1]
    while len(f) <= upto:
        f.append(f[-1] + f[-2])
    return tuple(f[: upto + 1])


def fibonacci(k: int) -> int:
    return fib_table(max(k, 1))[k]


@dataclass(frozen=True)
class FibWeights:
    n: int
    phi: float = PHI

    @property
    def fib(self) -> tuple[int, ...]:
        return fib_table(self.n + 2)

    @property
    def dim(self) -> int:
        return self.fib[self.n]


@dataclass(frozen=True)
class FibString:
    """Bit string over qubits 0..n-1; ``str()`` gives the 0/1 text, qubit 0 first."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @property
    def n(self) -> int:
        return len(self.bits)

    @classmethod
    def from_str(cls, text: str) -> "FibString":
        return cls(tuple(int(c) for c in text.strip()))

    def __str__(self):
        return "".join(str(b) for b in self.bits)

    def is_fibonacci(self) -> bool:
        return is_fibonacci(self.bits)

    def in_basis(self) -> bool:
        return in_basis(self.bits)


def is_fibonacci(bits) -> bool:
    """True when no two consecutive bits are both 0 (membership in F'_m)."""
    b = list(bits)
    return all(b[i] or b[i + 1] for i in range(len(b) - 1))


def in_basis(bits) -> bool:
    b = list(bits)
    return len(b) >= 2 and b[0] == 0 and is_fibonacci(b)


def unrank(k: int, m: int) -> tuple[int, ...]:
    """String of F'_m with Zeckendorf index k; index 0 is the all-ones string."""
    f = fib_table(m + 2)
    if not 0 <= k < f[m + 2]:
        raise ValueError(f"index {k} out of range for m={m}")
    s = [0] * m
    for i in range(m - 1, -1, -1):
        if k < f[i + 2]:
            s[i] = 1
        else:
            s[i] = 0
            k -= f[i + 2]
    return tuple(s)


def zeckendorf_index(bits) -> int:
    b = list(bits)
    if not is_fibonacci(b):
        raise ValueError(f"{''.join(map(str, b))} is not a Fibonacci string")
    f = fib_table(len(b) + 2)
    return sum(f[i + 2] for i, x in enumerate(b) if x == 0)


@lru_cache(maxsize=64)
def basis_array(n: int) -> np.ndarray:
    """All of F_n as a (f_n, n) uint8 array in Zeckendorf order of the tail."""
    if n < 2:
        raise ValueError("n must be at least 2")
    m = n - 2
    d = fibonacci(n)
    out = np.zeros((d, n), dtype=np.uint8)
    out[:, 1] = 1
    for k in range(d):
        out[k, 2:] = unrank(k, m)
    out.setflags(write=False)
    return out


def enumerate_basis(n: int) -> list[FibString]:
    return [FibString(tuple(row)) for row in basis_array(n)]


def basis_index(bits) -> int:
    """Position of an F_n string in :func:`enumerate_basis` order."""
    b = list(bits)
    if not in_basis(b):
        raise ValueError("not a member of F_n")
    return zeckendorf_index(b[2:])


@lru_cache(maxsize=64)
def basis_codes(n: int) -> np.ndarray:
    """Integer codes of F_n members, qubit 0 as the most significant bit."""
    arr = basis_array(n).astype(np.int64)
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    codes = arr @ weights
    codes.setflags(write=False)
    return codes


@lru_cache(maxsize=64)
def weights_array(n: int) -> np.ndarray:
    """p(s) over F_n in basis order."""
    last = basis_array(n)[:, n - 1]
    w = np.where(last == 1, PHI, 1.0) / PHI ** (n - 1)
    w.setflags(write=False)
    return w


def pmf(s, n: int | None = None) -> float:
    bits = s.bits if isinstance(s, FibString) else tuple(s)
    if n is not None and len(bits) != n:
        raise ValueError(f"length {len(bits)} does not match n={n}")
    n = len(bits)
    if not in_basis(bits):
        return 0.0
    return PHI ** bits[n - 1] / PHI ** (n - 1)


def branch_threshold(n: int) -> float:
    """Probability that s_{n-1} = 1, i.e. f_{n-1} / phi^{n-2}."""
    return fibonacci(n - 1) / PHI ** (n - 2)


def sample_weighted(n: int, rng: np.random.Generator) -> FibString:
    """Draw one s ~ p(s) from F_n in O(n)."""
    if n < 3:
        raise ValueError("n must be at least 3")
    f = fib_table(n)
    s = [0] * n
    s[1] = 1
    if rng.random() <= branch_threshold(n):
        s[n - 1] = 1
        j = n - 2
        k = int(rng.integers(f[n - 1]))
    else:
        s[n - 1] = 0
        s[n - 2] = 1
        j = n - 3
        k = int(rng.integers(f[n - 2]))
    while j >= 2:
        if k >= f[j]:
            s[j] = 0
            k -= f[j]
        else:
            s[j] = 1
        j -= 1
    return FibString(tuple(s))


def sample_weighted_batch(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised sampler returning a (size, n) uint8 array of F_n strings."""
    if n < 3:
        raise ValueError("n must be at least 3")
    f = np.array(fib_table(n), dtype=np.int64)
    top = rng.random(size) <= branch_threshold(n)
    k = rng.integers(0, np.where(top, f[n - 1], f[n - 2]))
    s = np.empty((size, n), dtype=np.uint8)
    s[:, 0] = 0
    s[:, 1] = 1
    s[:, n - 1] = top
    # rows with s_{n-1} = 0 have k < f_{n-2}, so their bit n-2 comes out as 1
    for j in range(n - 2, 1, -1):
        big = k >= f[j]
        np.logical_not(big, out=s[:, j], casting="unsafe")
        k -= f[j] * big
    return s


def sample_indices(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw basis indices (positions in :func:`enumerate_basis`) with weights p(s)."""
    s = sample_weighted_batch(n, size, rng)
    f = np.array(fib_table(n + 2), dtype=np.int64)
    tail = s[:, 2:]
    zero = tail == 0
    return (zero * f[2:n]).sum(axis=1)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator determined by (seed, stream ids)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in stream))
    return np.random.Generator(np.random.PCG64(ss))
