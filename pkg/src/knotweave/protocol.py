"""The cfev estimation pipeline.

Each shot prepares the cat state (|0...0> + |s>)/sqrt 2 on qubit 1 and the
ladder, runs the braid, undoes the ladder and reads qubit 1 in the X (or Y)
basis. Postprocessing turns the bit record into r in {-1, 0, +1} and flags
records that noiseless execution can never produce.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .braid import BraidWord, conjugate_mirror, serialize_braid, writhe
from .circuit import CNOT, H, PREP, RZ, SDG
from .fib import PHI, in_basis, make_rng, sample_weighted_batch
from .qsim import (NoiseModel, Program, ShotEngine, blocks_from_ops, bits_to_codes,
                   build_program, concat_programs, codes_to_bits)
from .rep import braid_circuit, compensation_angle, plat_string


class EstimationError(RuntimeError):
    """Raised when every shot of a run was discarded."""


@dataclass(frozen=True)
class Mitigation:
    error_detection: bool = False
    conjugate_trick: bool = False
    shot_level_trick: bool = False

    @classmethod
    def parse(cls, text: str) -> "Mitigation":
        """Parse a comma list such as ``detect,conjugate``."""
        names = {"detect": "error_detection", "conjugate": "conjugate_trick",
                 "shot-level": "shot_level_trick", "none": None}
        kw = {}
        for tok in filter(None, (t.strip() for t in text.split(","))):
            if tok not in names:
                raise ValueError(f"unknown mitigation {tok!r}")
            if names[tok]:
                kw[names[tok]] = True
        return cls(**kw)

    def to_json(self) -> dict:
        return {"error_detection": self.error_detection, "conjugate_trick": self.conjugate_trick,
                "shot_level_trick": self.shot_level_trick}


@dataclass(frozen=True)
class ShotRecord:
    s: tuple[int, ...]
    imag_part: bool
    bits: tuple[int, ...]
    g1: int
    g2: int
    r: int


# -- postprocessing ----------------------------------------------------------

def postprocess(bits, s) -> tuple[int, int, int]:
    """(g1, g2, r) for one measurement record taken with string s."""
    bits = [int(x) for x in bits]
    s = [int(x) for x in getattr(s, "bits", s)]
    if len(bits) != len(s):
        raise ValueError(f"record has {len(bits)} bits but s has {len(s)}")
    g1 = int(all(b == 0 for i, b in enumerate(bits) if i != 1))
    tail = [b ^ t for b, t in zip(bits[2:], s[2:])]
    no00 = all(tail[i] or tail[i + 1] for i in range(len(tail) - 1))
    g2 = int(bits[0] == 0 and no00)
    r = (-1) ** bits[1] * g1
    return g1, g2, r


def postprocess_batch(bits: np.ndarray, s: np.ndarray):
    """Vectorised :func:`postprocess` over rows; ``s`` may be one row or one per shot."""
    bits = np.asarray(bits, dtype=np.uint8)
    s = np.broadcast_to(np.asarray(s, dtype=np.uint8), bits.shape)
    rest = bits.copy()
    rest[:, 1] = 0
    g1 = ~rest.any(axis=1)
    tail = bits[:, 2:] ^ s[:, 2:]
    pair0 = (tail[:, :-1] == 0) & (tail[:, 1:] == 0)
    g2 = (bits[:, 0] == 0) & ~pair0.any(axis=1)
    r = np.where(g1, 1 - 2 * bits[:, 1].astype(np.int64), 0)
    return g1.astype(np.int8), g2.astype(np.int8), r.astype(np.int8)


# -- circuit assembly --------------------------------------------------------

class CfevCompiler:
    """Compiled programs for one braid, shared across strings s.

    The braid body is fused and packed once; the ladder prefix and the
    compensation/unladder suffix are rebuilt per string and concatenated.
    """

    def __init__(self, b: BraidWord, noise: NoiseModel, run_powers: bool = True):
        self.braid = b
        self.noise = noise
        self.n = b.strands + 1
        self.comp = compensation_angle(b, run_powers)
        body = braid_circuit(b, run_powers)
        self.body = build_program(self.n, blocks_from_ops(body.ops))
        self._pre: dict = {}
        self._post: dict = {}

    def _prefix(self, s: tuple[int, ...]) -> Program:
        if s not in self._pre:
            ops = [PREP, H(1, "cat")] + [CNOT(1, q, "ladder") for q in range(2, self.n) if s[q]]
            self._pre[s] = build_program(self.n, blocks_from_ops(ops))
        return self._pre[s]

    def _suffix(self, s: tuple[int, ...], imag: bool) -> Program:
        key = (s, imag)
        if key not in self._post:
            ops = [RZ(1, self.comp, "compensation")]
            if self.noise.coherent_phase:
                ops.append(RZ(1, self.noise.coherent_phase, "coherent"))
            ops += [CNOT(1, q, "unladder") for q in reversed(range(2, self.n)) if s[q]]
            if imag:
                ops.append(SDG(1, "imag"))
            ops.append(H(1, "cat"))
            self._post[key] = build_program(self.n, blocks_from_ops(ops))
        return self._post[key]

    def engine(self, s, imag: bool) -> ShotEngine:
        s = tuple(int(x) for x in s)
        if len(s) != self.n or not in_basis(s):
            raise ValueError("s is not a member of F_n")
        prog = concat_programs(self._prefix(s), self.body, self._suffix(s, imag))
        return ShotEngine.from_program(prog, self.noise)


# -- accumulation ------------------------------------------------------------

@dataclass
class PartSums:
    """Mergeable sums for one quadrature (real or imaginary part)."""

    sum_r: float = 0.0
    sum_r2: float = 0.0
    kept: int = 0
    discarded: int = 0
    raw_sum_r: float = 0.0
    raw_sum_r2: float = 0.0
    raw_count: int = 0

    def add(self, r: np.ndarray, g2: np.ndarray, detect: bool):
        r = r.astype(float)
        self.raw_sum_r += r.sum()
        self.raw_sum_r2 += (r * r).sum()
        self.raw_count += len(r)
        keep = g2.astype(bool) if detect else np.ones(len(r), bool)
        self.sum_r += r[keep].sum()
        self.sum_r2 += (r[keep] ** 2).sum()
        self.kept += int(keep.sum())
        self.discarded += int((~keep).sum())

    def merge(self, other: "PartSums") -> "PartSums":
        return PartSums(*(getattr(self, f) + getattr(other, f) for f in
                          ("sum_r", "sum_r2", "kept", "discarded", "raw_sum_r", "raw_sum_r2",
                           "raw_count")))

    def mean(self) -> float:
        if self.kept == 0:
            raise EstimationError("all shots discarded")
        return self.sum_r / self.kept

    def stderr(self) -> float:
        if self.kept < 2:
            return math.inf
        m = self.mean()
        var = (self.sum_r2 - self.kept * m * m) / (self.kept - 1)
        return math.sqrt(max(var, 0.0) / self.kept)


@dataclass
class JonesEstimate:
    R: complex
    stderr: complex
    jones: complex
    shots_used: int
    shots_discarded: int
    flags: Mitigation = field(default_factory=Mitigation)
    closure: str = "markov"
    low_confidence: bool = False
    parts: tuple = ()

    @property
    def discard_rate(self) -> float:
        total = self.shots_used + self.shots_discarded
        return self.shots_discarded / total if total else 0.0

    @property
    def unfiltered_R(self) -> complex:
        """Mean of r over every shot, ignoring detection."""
        re, im = self.parts
        return complex(re.raw_sum_r / re.raw_count, im.raw_sum_r / im.raw_count)

    def relative_error(self, oracle: complex) -> float:
        return abs(self.jones - oracle) / abs(oracle)


def markov_factor(b: BraidWord) -> complex:
    return complex((-np.exp(-0.6j * np.pi)) ** (3 * writhe(b)) * PHI ** (b.strands - 1))


def plat_factor(b: BraidWord) -> complex:
    n = b.strands + 1
    return complex((-np.exp(-0.6j * np.pi)) ** (3 * writhe(b)) * PHI ** ((n - 3) / 2))


def _run_part(comp: CfevCompiler, strings: np.ndarray, imag: bool, rng: np.random.Generator,
              detect: bool) -> PartSums:
    """Run one shot per row of ``strings`` grouped by distinct string."""
    sums = PartSums()
    codes = bits_to_codes(strings)
    uniq, inv, counts = np.unique(codes, return_inverse=True, return_counts=True)
    for u, cnt in zip(uniq, counts):
        s = codes_to_bits(np.array([u]), comp.n)[0]
        eng = comp.engine(s, imag)
        bits = eng.run(int(cnt), rng)
        _, g2, r = postprocess_batch(bits, s)
        sums.add(r, g2, detect)
    return sums


def _assemble(re: PartSums, im: PartSums, factor: complex, flags: Mitigation,
              closure: str) -> JonesEstimate:
    R = complex(re.mean(), im.mean())
    err = complex(re.stderr(), im.stderr())
    return JonesEstimate(R, err, factor * R, re.kept + im.kept, re.discarded + im.discarded,
                         flags, closure, parts=(re, im))


def _markov_R(b: BraidWord, shots: int, noise: NoiseModel, detect: bool, seed: int,
              stream: tuple[int, ...]) -> tuple[PartSums, PartSums]:
    if shots < 1:
        raise ValueError("need at least one shot")
    comp = CfevCompiler(b, noise)
    parts = []
    for imag in (False, True):
        rng_s = make_rng(seed, *stream, int(imag), 0)
        rng_q = make_rng(seed, *stream, int(imag), 1)
        strings = sample_weighted_batch(comp.n, shots, rng_s)
        parts.append(_run_part(comp, strings, imag, rng_q, detect))
    return parts[0], parts[1]


def _plat_R(b: BraidWord, shots: int, noise: NoiseModel, detect: bool, seed: int,
            stream: tuple[int, ...]) -> tuple[PartSums, PartSums]:
    if shots < 1:
        raise ValueError("need at least one shot")
    if b.strands % 2:
        raise ValueError("plat closure needs an even strand count")
    comp = CfevCompiler(b, noise)
    alpha = np.array(plat_string(comp.n), dtype=np.uint8)
    parts = []
    for imag in (False, True):
        rng_q = make_rng(seed, *stream, int(imag), 1)
        parts.append(_run_part(comp, np.tile(alpha, (shots, 1)), imag, rng_q, detect))
    return parts[0], parts[1]


def _estimate(kind: str, b: BraidWord, shots: int, noise: NoiseModel, flags: Mitigation,
              seed: int, stream: tuple[int, ...]) -> JonesEstimate:
    run = _markov_R if kind == "markov" else _plat_R
    factor = markov_factor(b) if kind == "markov" else plat_factor(b)
    detect = flags.error_detection
    est = _assemble(*run(b, shots, noise, detect, seed, stream), factor, flags, kind)
    if flags.conjugate_trick:
        star = _assemble(*run(conjugate_mirror(b), shots, noise, detect, seed, stream + (1,)),
                         factor.conjugate(), flags, kind)
        value, low = conjugate_trick(est, star, return_flag=True)
        est = JonesEstimate(value, est.stderr, factor * value, est.shots_used + star.shots_used,
                            est.shots_discarded + star.shots_discarded, flags, kind, low,
                            parts=est.parts)
    return est


def estimate_markov(b: BraidWord, shots: int, noise: NoiseModel | None = None,
                    flags: Mitigation | None = None, seed: int = 0,
                    stream: tuple[int, ...] = ()) -> JonesEstimate:
    """Monte Carlo Jones value of the Markov closure from 2*shots cfev runs."""
    return _estimate("markov", b, shots, noise or NoiseModel(), flags or Mitigation(), seed, stream)


def estimate_plat(b: BraidWord, shots: int, noise: NoiseModel | None = None,
                  flags: Mitigation | None = None, seed: int = 0,
                  stream: tuple[int, ...] = ()) -> JonesEstimate:
    """Monte Carlo Jones value of the plat closure (s fixed to 0101...10)."""
    return _estimate("plat", b, shots, noise or NoiseModel(), flags or Mitigation(), seed, stream)


# -- conjugate tricks --------------------------------------------------------

def conjugate_trick(est_b, est_bstar, return_flag: bool = False):
    """Recover R from e^{i theta} R and e^{i theta} R* measured under the same phase.

    Accepts JonesEstimate objects or plain complex numbers. The sign choice is
    flagged as low confidence when |R| is within three standard errors of zero.
    """
    a = complex(getattr(est_b, "R", est_b))
    c = complex(getattr(est_bstar, "R", est_bstar))
    re_mag = abs(a + c) / 2
    im_mag = abs(a - c) / 2
    cands = [complex(sr * re_mag, si * im_mag) for sr in (1, -1) for si in (1, -1)]
    low = False
    if hasattr(est_b, "stderr"):
        low = abs(a) < 3 * abs(est_b.stderr)
    if c == 0 or a == 0:
        low = True
        rp = a
    else:
        rp = abs(a) * np.sqrt(a / c)
    # drop the antipodal pair furthest from R' (pairs are (0,3) and (1,2))
    pairs = [(cands[0], cands[3]), (cands[1], cands[2])]
    dist = [min(abs(p - rp), abs(p + rp)) for p, _ in pairs]
    keep = pairs[int(np.argmin(dist))]
    value = min(keep, key=lambda z: abs(z - a))
    return (value, low) if return_flag else value


def shot_level_conjugate(x: np.ndarray, y: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """(|x|, |y|) from per-shot outcomes of the four batched measurements."""
    x, y, xs, ys = (np.asarray(v, dtype=float) for v in (x, y, xs, ys))
    x_ec = ((x + xs) ** 2 + (y + ys) ** 2 - 2) / 4
    y_ec = ((x - xs) ** 2 + (y - ys) ** 2 - 2) / 4
    mx, my = float(x_ec.mean()), float(y_ec.mean())
    return math.sqrt(max(mx, 0.0)), math.sqrt(max(my, 0.0))


def shot_level_stats(x, y, xs, ys) -> dict:
    """Means and standard errors of the per-shot X_EC, Y_EC variables."""
    x, y, xs, ys = (np.asarray(v, dtype=float) for v in (x, y, xs, ys))
    x_ec = ((x + xs) ** 2 + (y + ys) ** 2 - 2) / 4
    y_ec = ((x - xs) ** 2 + (y - ys) ** 2 - 2) / 4
    n = len(x)
    return {"mean_x2": float(x_ec.mean()), "mean_y2": float(y_ec.mean()),
            "se_x2": float(x_ec.std(ddof=1) / math.sqrt(n)),
            "se_y2": float(y_ec.std(ddof=1) / math.sqrt(n))}


def sample_ev(x: float, y: float, theta, size: int, rng: np.random.Generator) -> np.ndarray:
    """Synthetic cfev outcomes in {-1, 0, +1} for amplitude x+iy under phase theta."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (size,))
    m2 = x * x + y * y
    p0 = (1 - m2) / 2
    pp = (1 + m2) / 4 + (x * np.cos(theta) - y * np.sin(theta)) / 2
    u = rng.random(size)
    return np.where(u < p0, 0, np.where(u < p0 + pp, 1, -1)).astype(np.int8)


def sample_ev_quadruple(x: float, y: float, theta, size: int, rng: np.random.Generator):
    """The four batched outcomes (X, Y, X*, Y*) sharing a per-shot phase."""
    return (sample_ev(x, y, theta, size, rng), sample_ev(-y, x, theta, size, rng),
            sample_ev(x, -y, theta, size, rng), sample_ev(y, x, theta, size, rng))


def shot_level_estimate(b: BraidWord, s, shots: int, noise: NoiseModel | None = None,
                        detect: bool = False, seed: int = 0) -> tuple[float, float]:
    """(|x|, |y|) for <s|U_B|s> from paired runs of B and its mirror.

    Shot i of each of the four circuits is paired; discarded shots count as 0.
    """
    noise = noise or NoiseModel()
    s = np.array(getattr(s, "bits", s), dtype=np.uint8)
    outs = []
    for j, (braid, imag) in enumerate(((b, False), (b, True),
                                       (conjugate_mirror(b), False), (conjugate_mirror(b), True))):
        eng = CfevCompiler(braid, noise).engine(s, imag)
        bits = eng.run(shots, make_rng(seed, 7, j))
        _, g2, r = postprocess_batch(bits, s)
        outs.append(np.where(g2.astype(bool) | (not detect), r, 0))
    return shot_level_conjugate(*outs)


# -- records -----------------------------------------------------------------

def estimate_record(b: BraidWord, est: JonesEstimate, shots: int, seed: int,
                    noise_preset: str, oracle: complex | None = None) -> dict:
    rec = {
        "braid": serialize_braid(b), "closure": est.closure, "shots": shots,
        "flags": est.flags.to_json(), "R_re": est.R.real, "R_im": est.R.imag,
        "stderr_re": est.stderr.real, "stderr_im": est.stderr.imag,
        "jones_re": est.jones.real, "jones_im": est.jones.imag,
        "discard_rate": est.discard_rate, "seed": seed, "noise_preset": noise_preset,
    }
    if est.low_confidence:
        rec["low_confidence"] = True
    if oracle is not None:
        rec["relative_error"] = est.relative_error(oracle)
    return rec


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True)
