"""Cost models: shot budgets, quantum and classical time, energy, and
power-law fits of the noise error against crossing number."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .circuit import MARKERS, Circuit


@dataclass(frozen=True)
class CostModel:
    layer_time_s: float = 0.030
    classical_flops_per_s: float = 1e12
    classical_mem_bytes: float = 64 * 2 ** 30
    qpu_power_w: float = 75_000.0
    cluster_efficiency_flops_per_kwh: float = 2.6e17

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{k} must be positive")


# documented examples only; nothing in the acceptance suite depends on them
EXAMPLE_MODELS = {
    "desk": CostModel(),
    "a100-node": CostModel(classical_flops_per_s=8 * 19.5e12, classical_mem_bytes=8 * 80e9),
}


def shots_for_error(eps_shot: float) -> int:
    """N = ceil(eps^-2), guarding against float noise in eps^-2."""
    if not eps_shot > 0:
        raise ValueError("eps_shot must be positive")
    x = eps_shot ** -2
    return max(1, math.ceil(x * (1 - 1e-12)))


def circuit_depth(c: Circuit) -> int:
    """Greedy layering: each gate goes one layer after the latest gate on its qubits."""
    last = [0] * c.n_qubits
    depth = 0
    for op in c.ops:
        if op.name in MARKERS:
            continue
        layer = 1 + max(last[q] for q in op.qubits)
        for q in op.qubits:
            last[q] = layer
        depth = max(depth, layer)
    return depth


def quantum_time(circuit_or_depth, shots: int, model: CostModel = CostModel()) -> float:
    """Seconds for ``shots`` real and ``shots`` imaginary runs."""
    if shots < 0:
        raise ValueError("shots must be non-negative")
    depth = circuit_or_depth if isinstance(circuit_or_depth, (int, np.integer)) \
        else circuit_depth(circuit_or_depth)
    return depth * model.layer_time_s * 2 * shots


def quantum_energy_kwh(seconds: float, model: CostModel = CostModel()) -> float:
    return seconds * model.qpu_power_w / 3.6e6


def classical_time(flops: float, model: CostModel = CostModel()) -> float:
    return flops / model.classical_flops_per_s


def classical_energy_kwh(flops: float, model: CostModel = CostModel()) -> float:
    return flops / model.cluster_efficiency_flops_per_kwh


def cfev_space(strands: int) -> int:
    """Qubits used by cfev for a braid on ``strands`` strands."""
    return strands + 1


# -- error scaling -----------------------------------------------------------

@dataclass(frozen=True)
class ErrorFit:
    a: float
    b: float
    c_min: float
    c_max: float
    rms_log_residual: float
    r2: float
    poor_fit: bool

    def predict(self, c):
        return self.a * np.asarray(c, dtype=float) ** self.b

    def to_json(self) -> dict:
        return asdict(self)


def fit_error_scaling(points: Iterable[tuple[float, float]]) -> ErrorFit:
    """Least squares fit of log(err) = log(a) + b log(c)."""
    pts = np.array([(c, e) for c, e in points if e > 0 and c > 0], dtype=float)
    if len(pts) < 10:
        raise ValueError("need at least 10 points with positive error")
    c, e = pts[:, 0], pts[:, 1]
    if c.max() < 2 * c.min():
        raise ValueError("crossing numbers must span at least a factor of 2")
    x, y = np.log(c), np.log(e)
    b, loga = np.polyfit(x, y, 1)
    res = y - (loga + b * x)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(res @ res) / ss if ss > 0 else 0.0
    return ErrorFit(float(np.exp(loga)), float(b), float(c.min()), float(c.max()),
                    float(np.sqrt(np.mean(res ** 2))), r2, r2 < 0.5)


# -- advantage report --------------------------------------------------------

REPORT_COLUMNS = ("braid", "crossings", "qubits", "depth", "relative_error", "shots",
                  "quantum_time_s", "quantum_energy_kwh", "classical_flops",
                  "classical_time_s", "classical_energy_kwh", "classical_peak_bytes",
                  "classical_feasible", "faster", "cheaper")


def advantage_row(stats: dict, model: CostModel = CostModel()) -> dict:
    """One report row.

    ``stats`` needs braid, crossings, qubits, depth, relative_error (from the
    noisy simulation), flops and peak_bytes (from a classical run).
    """
    missing = [k for k in ("braid", "depth", "relative_error", "flops", "peak_bytes")
               if stats.get(k) is None]
    if missing:
        raise ValueError(f"missing inputs: {', '.join(missing)}")
    shots = shots_for_error(stats["relative_error"])
    qt = quantum_time(int(stats["depth"]), shots, model)
    qe = quantum_energy_kwh(qt, model)
    ct = classical_time(stats["flops"], model)
    ce = classical_energy_kwh(stats["flops"], model)
    feasible = stats["peak_bytes"] <= model.classical_mem_bytes
    return {
        "braid": stats["braid"], "crossings": stats.get("crossings"), "qubits": stats.get("qubits"),
        "depth": int(stats["depth"]), "relative_error": stats["relative_error"], "shots": shots,
        "quantum_time_s": qt, "quantum_energy_kwh": qe, "classical_flops": stats["flops"],
        "classical_time_s": ct, "classical_energy_kwh": ce,
        "classical_peak_bytes": stats["peak_bytes"], "classical_feasible": feasible,
        "faster": "quantum" if (qt < ct or not feasible) else "classical",
        "cheaper": "quantum" if (qe < ce or not feasible) else "classical",
    }


def advantage_report(braid_stats: Sequence[dict], model: CostModel = CostModel()) -> list[dict]:
    if not braid_stats:
        raise ValueError("no braid statistics given")
    return [advantage_row(s, model) for s in braid_stats]


def report_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k) for k in REPORT_COLUMNS})
    return buf.getvalue()


def report_json(rows: Sequence[dict], model: CostModel = CostModel()) -> str:
    return json.dumps({"model": asdict(model), "rows": list(rows)}, indent=2, sort_keys=True)
