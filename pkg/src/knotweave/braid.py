"""Braid words: parsing, moves, closure conversion and heuristic simplification.

Generators are 1-based and signed, so ``-2`` is the inverse of the second
generator. A braid on ``strands`` strands uses indices ``1..strands-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class BraidError(ValueError):
    """Raised for malformed braid text or invalid generator indices."""


class MoveError(ValueError):
    """Raised when a move cannot be applied at the requested position."""


@dataclass(frozen=True)
class BraidWord:
    strands: int
    word: tuple[int, ...] = ()

    def __post_init__(self):
        if int(self.strands) < 2:
            raise BraidError(f"strand count must be at least 2, got {self.strands}")
        w = tuple(int(g) for g in self.word)
        for g in w:
            if g == 0 or abs(g) > self.strands - 1:
                raise BraidError(f"generator {g} out of range for {self.strands} strands")
        object.__setattr__(self, "strands", int(self.strands))
        object.__setattr__(self, "word", w)

    @property
    def crossings(self) -> int:
        return len(self.word)

    def writhe(self) -> int:
        return writhe(self)

    def __len__(self):
        return len(self.word)

    def __str__(self):
        return serialize_braid(self)

    def to_json(self) -> dict:
        return {"strands": self.strands, "word": list(self.word)}

    @classmethod
    def from_json(cls, obj: dict) -> "BraidWord":
        return cls(obj["strands"], tuple(obj["word"]))


def parse_braid(text: str) -> BraidWord:
    """Parse ``"<strands> : g1 g2 ..."``; lines starting with '#' are ignored."""
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    body = " ".join(lines).strip()
    if ":" not in body:
        raise BraidError("missing ':' separator")
    head, _, tail = body.partition(":")
    try:
        strands = int(head.strip())
    except ValueError:
        raise BraidError(f"bad strand count {head.strip()!r}") from None
    word = []
    for tok in tail.split():
        try:
            word.append(int(tok))
        except ValueError:
            raise BraidError(f"bad generator token {tok!r}") from None
    return BraidWord(strands, tuple(word))


def parse_braid_file(text: str) -> list[BraidWord]:
    """Parse a file holding one braid per non-comment line."""
    out = []
    for ln in text.splitlines():
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        out.append(parse_braid(s))
    return out


def serialize_braid(b: BraidWord) -> str:
    if not b.word:
        return f"{b.strands} :"
    return f"{b.strands} : " + " ".join(str(g) for g in b.word)


def braid_to_json(b: BraidWord) -> str:
    return json.dumps(b.to_json())


def writhe(b: BraidWord) -> int:
    return sum(1 if g > 0 else -1 for g in b.word)


def inverse(b: BraidWord) -> BraidWord:
    return BraidWord(b.strands, tuple(-g for g in reversed(b.word)))


def conjugate_mirror(b: BraidWord) -> BraidWord:
    return BraidWord(b.strands, tuple(-g for g in b.word))


def concat(*braids: BraidWord) -> BraidWord:
    strands = braids[0].strands
    word: list[int] = []
    for b in braids:
        if b.strands != strands:
            raise BraidError("cannot concatenate braids with different strand counts")
        word.extend(b.word)
    return BraidWord(strands, tuple(word))


def shift(b: BraidWord, offset: int, strands: int) -> BraidWord:
    """Embed ``b`` into a wider braid, moving generator i to i + offset."""
    return BraidWord(strands, tuple(g + offset if g > 0 else g - offset for g in b.word))


def permutation(b: BraidWord) -> list[int]:
    """Induced permutation: ``perm[p]`` is the strand found at position p at the end."""
    perm = list(range(b.strands))
    for g in b.word:
        i = abs(g) - 1
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
    return perm


# -- moves -------------------------------------------------------------------

@dataclass(frozen=True)
class MarkovMove:
    """A closure-preserving rewrite.

    kind is one of ``poke``, ``slide``, ``stabilize``, ``destabilize``, ``cycle``.
    For ``poke`` with ``generator`` set, the pair (g, -g) is inserted at
    ``position``; with ``generator`` None the cancelling pair starting at
    ``position`` is removed. ``sign`` selects the handedness for ``stabilize``.
    """

    kind: str
    position: int = 0
    generator: int | None = None
    sign: int = 1
    offset: int = 0

    @staticmethod
    def poke(position: int, generator: int | None = None) -> "MarkovMove":
        return MarkovMove("poke", position=position, generator=generator)

    @staticmethod
    def slide(position: int) -> "MarkovMove":
        return MarkovMove("slide", position=position)

    @staticmethod
    def stabilize(sign: int = 1) -> "MarkovMove":
        return MarkovMove("stabilize", sign=sign)

    @staticmethod
    def destabilize() -> "MarkovMove":
        return MarkovMove("destabilize")

    @staticmethod
    def cycle(offset: int) -> "MarkovMove":
        return MarkovMove("cycle", offset=offset)


def _slide_ok(w: Sequence[int], p: int) -> bool:
    if p < 0 or p + 3 > len(w):
        return False
    a, b, c = w[p:p + 3]
    return a == c and abs(abs(a) - abs(b)) == 1 and (a > 0) == (b > 0)


def apply_move(b: BraidWord, m: MarkovMove) -> BraidWord:
    w = list(b.word)
    if m.kind == "poke":
        if m.generator is None:
            p = m.position
            if p < 0 or p + 1 >= len(w) or w[p] != -w[p + 1]:
                raise MoveError(f"no cancelling pair at position {p}")
            del w[p:p + 2]
            return BraidWord(b.strands, tuple(w))
        g = m.generator
        if not 0 <= m.position <= len(w):
            raise MoveError(f"insert position {m.position} out of range")
        w[m.position:m.position] = [g, -g]
        return BraidWord(b.strands, tuple(w))
    if m.kind == "slide":
        p = m.position
        if not _slide_ok(w, p):
            raise MoveError(f"no slide pattern at position {p}")
        a, bb, _ = w[p:p + 3]
        w[p:p + 3] = [bb, a, bb]
        return BraidWord(b.strands, tuple(w))
    if m.kind == "cycle":
        if not w:
            return b
        k = m.offset % len(w)
        return BraidWord(b.strands, tuple(w[k:] + w[:k]))
    if m.kind == "stabilize":
        s = 1 if m.sign >= 0 else -1
        return BraidWord(b.strands + 1, tuple(w + [s * b.strands]))
    if m.kind == "destabilize":
        top = b.strands - 1
        if b.strands < 3 or not w or abs(w[-1]) != top or sum(abs(g) == top for g in w) != 1:
            raise MoveError("last generator is not the unique top generator")
        return BraidWord(b.strands - 1, tuple(w[:-1]))
    raise MoveError(f"unknown move kind {m.kind!r}")


def random_move(b: BraidWord, rng: np.random.Generator, max_strands: int | None = None) -> MarkovMove:
    """Draw a random applicable move (used by invariance tests and simplify)."""
    while True:
        r = rng.integers(5)
        if r == 0:
            g = int(rng.integers(1, b.strands)) * (1 if rng.random() < 0.5 else -1)
            return MarkovMove.poke(int(rng.integers(len(b.word) + 1)), g)
        if r == 1:
            spots = [p for p in range(len(b.word) - 1) if b.word[p] == -b.word[p + 1]]
            if spots:
                return MarkovMove.poke(int(rng.choice(spots)))
        elif r == 2:
            spots = [p for p in range(len(b.word) - 2) if _slide_ok(b.word, p)]
            if spots:
                return MarkovMove.slide(int(rng.choice(spots)))
        elif r == 3:
            if b.word:
                return MarkovMove.cycle(int(rng.integers(len(b.word))))
        else:
            if max_strands is None or b.strands < max_strands:
                return MarkovMove.stabilize(1 if rng.random() < 0.5 else -1)


# -- closure conversion -------------------------------------------------------

def _cap_routing(k: int) -> list[int]:
    """Braid turning plat caps (2j-1, 2j) into the nested pairs (k+1-i, k+i).

    Cap j (1-based) is sent to nested pair i = j. Swaps come from odd-even
    transposition sort on target positions. A crossing puts the leg of the
    higher cap over; cap heights follow cap index.
    """
    n = 2 * k
    # target position of each current position, and owning cap
    target = []
    cap = []
    for j in range(1, k + 1):
        target += [k + 1 - j, k + j]
        cap += [j, j]
    word = []
    for rnd in range(n):
        for p in range(rnd % 2, n - 1, 2):
            if target[p] > target[p + 1]:
                assert cap[p] != cap[p + 1]
                sign = 1 if cap[p] > cap[p + 1] else -1
                word.append(sign * (p + 1))
                target[p], target[p + 1] = target[p + 1], target[p]
                cap[p], cap[p + 1] = cap[p + 1], cap[p]
    assert target == list(range(1, n + 1))
    return word


def markov_to_plat(b: BraidWord) -> BraidWord:
    """Braid on 2k strands whose plat closure is isotopic to the Markov closure of b.

    The original strands move to positions k+1..2k; positions 1..k act as
    return strands closed through nested caps, which a routing braid turns
    into plat caps.
    """
    k = b.strands
    c = BraidWord(2 * k, tuple(_cap_routing(k)))
    return concat(c, shift(b, k, 2 * k), inverse(c))


# -- simplification ----------------------------------------------------------

def free_reduce(word: Iterable[int]) -> list[int]:
    """Cancel g, -g pairs, looking past generators that commute with g."""
    out: list[int] = []
    for g in word:
        j = len(out) - 1
        hit = -1
        while j >= 0:
            h = out[j]
            if h == -g:
                hit = j
                break
            if abs(abs(h) - abs(g)) < 2:
                break
            j -= 1
        if hit >= 0:
            del out[hit]
        else:
            out.append(g)
    return out


def _cyclic_reduce(word: list[int]) -> list[int]:
    w = free_reduce(word)
    changed = True
    while changed and len(w) >= 2:
        changed = False
        # rotate the last generator to the front and reduce again
        rotated = free_reduce([w[-1]] + w[:-1])
        if len(rotated) < len(w):
            w = rotated
            changed = True
    return w


def _canonical_commute(word: list[int]) -> list[int]:
    """Bubble distant generators so smaller indices come first (stable form)."""
    w = list(word)
    changed = True
    while changed:
        changed = False
        for p in range(len(w) - 1):
            a, b = w[p], w[p + 1]
            if abs(abs(a) - abs(b)) >= 2 and abs(a) > abs(b):
                w[p], w[p + 1] = b, a
                changed = True
    return w


def simplify(b: BraidWord, budget: int = 1000, seed: int = 0) -> BraidWord:
    """Heuristic crossing reduction that preserves the Markov closure.

    Free cancellation and distant commutation alternate with random slides,
    rotations and commutations, hill-climbing on crossing count with plateau
    acceptance. The strand count is kept.
    """
    rng = np.random.default_rng(seed)
    best = _canonical_commute(_cyclic_reduce(list(b.word)))
    cur = list(best)
    for _ in range(max(0, int(budget))):
        if len(cur) < 3:
            break
        w = list(cur)
        r = rng.random()
        if r < 0.45:
            spots = [p for p in range(len(w) - 2) if _slide_ok(w, p)]
            if spots:
                p = int(rng.choice(spots))
                a, bb, _ = w[p:p + 3]
                w[p:p + 3] = [bb, a, bb]
        elif r < 0.8:
            p = int(rng.integers(len(w) - 1))
            if abs(abs(w[p]) - abs(w[p + 1])) >= 2:
                w[p], w[p + 1] = w[p + 1], w[p]
        else:
            k = int(rng.integers(len(w)))
            w = w[k:] + w[:k]
        w = _cyclic_reduce(w)
        if len(w) <= len(cur):
            cur = w
            if len(cur) < len(best):
                best = list(cur)
    return BraidWord(b.strands, tuple(best))
