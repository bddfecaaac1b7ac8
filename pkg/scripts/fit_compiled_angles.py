"""Regenerate the fitted angle table for compiled generator powers.

Each power k of the braid generator is fitted in the fixed ten-gate layout
used by ``knotweave.rep.fragment_ops``. The residual asks for U^k on the
Fibonacci-compatible span up to a global phase, no leakage between that span
and its complement, and |000> as an eigenstate with phase e^{i k 2pi/5}
relative to the span.

    python3 scripts/fit_compiled_angles.py > src/knotweave/data/compiled_angles.json
"""

import json
import sys

import numpy as np
from scipy.optimize import least_squares

from knotweave.rep import FIB3, NONFIB3, FragmentAngles, fragment_unitary, generator_matrix

LAYOUT = "u1q(q1) rzz(q1,q2) u1q(q1) rzz(q0,q1) u1q(q1) rzz(q1,q2) u1q(q1) rz(q0) rz(q1) rz(q2)"


def unpack(x):
    return FragmentAngles(tuple(x[:4]), tuple(x[4:8]), tuple(x[8:11]), tuple(x[11:14]))


def residual(x, target, k):
    u = fragment_unitary(unpack(x))
    idx = np.ix_(FIB3, FIB3)
    s, t = u[idx], target[idx]
    ph = np.vdot(t.ravel(), s.ravel())
    ph /= abs(ph)
    leak = np.concatenate([u[np.ix_(FIB3, NONFIB3)].ravel(), u[np.ix_(NONFIB3, FIB3)].ravel(),
                           u[1:, 0], u[0, 1:]])
    eig = [u[0, 0] - ph * np.exp(1j * k * 2 * np.pi / 5)]
    r = np.concatenate([(s - ph * t).ravel(), leak, eig])
    return np.concatenate([r.real, r.imag])


def fit(k, rng, tries=40):
    target = np.linalg.matrix_power(generator_matrix(1).entries, k)
    best = None
    for _ in range(tries):
        r = least_squares(residual, rng.uniform(-np.pi, np.pi, 14), args=(target, k),
                          xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
        if best is None or r.cost < best.cost:
            best = r
        if np.abs(r.fun).max() < 1e-13:
            break
    x = np.mod(best.x + np.pi, 2 * np.pi) - np.pi
    return x, float(np.abs(residual(x, target, k)).max())


def main():
    rng = np.random.default_rng(20240611)
    table = {"version": 2, "layout": LAYOUT, "angles": {}, "max_residual": {}}
    for k in range(1, 10):
        x, err = fit(k, rng)
        print(f"k={k} residual={err:.2e}", file=sys.stderr)
        table["angles"][str(k)] = {"alpha": x[:4].tolist(), "beta": x[4:8].tolist(),
                                   "chi": x[8:11].tolist(), "theta": x[11:14].tolist()}
        table["max_residual"][str(k)] = err
    json.dump(table, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
