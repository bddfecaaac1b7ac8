"""Command-line front end.

Exit codes: 0 success, 1 braid parse error, 2 size cap exceeded or missing
inputs, 3 invalid configuration, 4 benchmark verification failed.
``KNOTWEAVE_SEED`` is the seed fallback.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .benchgen import dump_suite, generate_suite, load_suite
from .braid import BraidError, BraidWord, markov_to_plat, parse_braid_file, serialize_braid, simplify
from .circuit import dump_circuit
from .mpo import mpo_record
from .oracle import (DEFAULT_CAP, DENSE_CAP, SizeCapError, jones_markov_exact, jones_plat_exact,
                     markov_prefactor, tn_proj_dense)
from .protocol import (EstimationError, Mitigation, estimate_markov, estimate_plat,
                       estimate_record)
from .qsim import PRESETS, NoiseModel
from .rep import cfev_circuit, plat_string
from .resources import (CostModel, advantage_report, circuit_depth, fit_error_scaling,
                        report_csv, report_json)

EXIT_PARSE, EXIT_CAP, EXIT_CONFIG = 1, 2, 3
METHODS = ("cfev-sim", "exact", "mpo", "tn-dense")
SIM_CAP = 24


class ConfigError(ValueError):
    pass


# -- config helpers ----------------------------------------------------------

def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("KNOTWEAVE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"KNOTWEAVE_SEED={env!r} is not an integer") from None


_NOISE_KEYS = {"eps2q": "eps_2q", "eps1q": "eps_1q", "init": "eps_init", "meas0": "eps_meas0",
               "meas1": "eps_meas1", "theta": "coherent_phase"}


def parse_noise(text: str) -> NoiseModel:
    """A preset name or ``key=value`` list (eps2q, eps1q, init, meas0, meas1, theta).

    With only eps2q given, the other rates follow the eps2q/10 and SPAM = eps2q rule.
    """
    if text in PRESETS:
        return PRESETS[text]
    kw = {}
    for tok in filter(None, (t.strip() for t in text.split(","))):
        key, sep, val = tok.partition("=")
        if not sep or key not in _NOISE_KEYS:
            raise ConfigError(f"bad noise spec {tok!r}")
        try:
            kw[_NOISE_KEYS[key]] = float(val)
        except ValueError:
            raise ConfigError(f"bad noise value {tok!r}") from None
    try:
        if "eps_2q" in kw:
            return NoiseModel.from_eps2q(kw.pop("eps_2q"), **kw)
        return NoiseModel(**kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def parse_range(text: str) -> int | tuple[int, int]:
    lo, sep, hi = text.partition(":")
    try:
        return (int(lo), int(hi)) if sep else int(lo)
    except ValueError:
        raise ConfigError(f"bad range {text!r}") from None


def read_braids(path: str) -> list[BraidWord]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return parse_braid_file(text)


def write_out(path: str | None, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True)


# -- eval --------------------------------------------------------------------

def _eval_one(args: tuple) -> list[dict]:
    idx, b, cfg = args
    out = []
    closure = cfg["closure"]
    if closure == "plat" and b.strands % 2:
        raise ConfigError(f"braid {idx}: plat closure needs an even strand count")
    n = b.strands + 1
    for method in cfg["methods"]:
        rec = {"index": idx, "braid": serialize_braid(b), "method": method, "closure": closure,
               "config": cfg, "version": __version__}
        t0 = time.perf_counter()
        if method == "exact":
            v = jones_markov_exact(b, cfg["cap"]) if closure == "markov" else jones_plat_exact(b, cfg["cap"])
            rec.update(jones_re=v.real, jones_im=v.imag)
        elif method == "tn-dense":
            if closure != "markov":
                raise ConfigError("tn-dense evaluates the Markov closure only")
            w = tn_proj_dense(b, cap=min(cfg["cap"], DENSE_CAP))
            v = complex(markov_prefactor(b) * w)
            rec.update(value_re=w.real, value_im=w.imag, jones_re=v.real, jones_im=v.imag)
        elif method == "mpo":
            if closure != "markov":
                raise ConfigError("mpo evaluates the Markov closure only")
            r = mpo_record(b, cfg["chi"] if cfg["chi"] else float("inf"))
            v = complex(markov_prefactor(b) * complex(r["value_re"], r["value_im"]))
            r.pop("wall_ms")
            rec.update(r, jones_re=v.real, jones_im=v.imag)
        else:
            if n > cfg["sim_cap"]:
                raise SizeCapError(f"{n} qubits exceeds the simulation cap of {cfg['sim_cap']}")
            noise = parse_noise(cfg["noise"])
            flags = Mitigation(**cfg["mitigate"])
            est_fn = estimate_markov if closure == "markov" else estimate_plat
            try:
                est = est_fn(b, cfg["shots"], noise, flags, cfg["seed"], (idx,))
            except EstimationError as e:
                rec.update(error=str(e))
                out.append(rec)
                continue
            oracle = None
            if cfg["with_oracle"]:
                oracle = jones_markov_exact(b, cfg["cap"]) if closure == "markov" \
                    else jones_plat_exact(b, cfg["cap"])
            r = estimate_record(b, est, cfg["shots"], cfg["seed"], cfg["noise"], oracle)
            s = plat_string(n) if closure == "plat" else (0,) + (1,) * (n - 1)
            r["depth"] = circuit_depth(cfev_circuit(b, s))
            rec.update(r)
        if cfg["timing"]:
            rec["wall_ms"] = 1e3 * (time.perf_counter() - t0)
        out.append(rec)
    return out


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def cmd_eval(ns) -> int:
    methods = [m.strip() for m in ns.method.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    if ns.closure not in ("markov", "plat"):
        raise ConfigError("closure must be markov or plat")
    if ns.shots < 1:
        raise ConfigError("shots must be at least 1")
    parse_noise(ns.noise)
    mit = Mitigation.parse(ns.mitigate)
    cfg = {"methods": methods, "closure": ns.closure, "shots": ns.shots, "noise": ns.noise,
           "mitigate": mit.to_json(), "seed": resolve_seed(ns.seed), "chi": ns.chi,
           "cap": ns.cap, "sim_cap": ns.sim_cap, "with_oracle": ns.with_oracle,
           "timing": ns.timing}
    braids = read_braids(ns.braids)
    if ns.dump_circuit:
        b = braids[0]
        n = b.strands + 1
        s = plat_string(n) if ns.closure == "plat" else (0,) + (1,) * (n - 1)
        Path(ns.dump_circuit).write_text(dump_circuit(cfev_circuit(b, s)))
    for b in braids:
        if b.strands + 1 > ns.cap and ("exact" in methods):
            raise SizeCapError(f"{b.strands + 1} qubits exceeds the cap of {ns.cap}")
    results = _pool_map(_eval_one, [(i, b, cfg) for i, b in enumerate(braids)], ns.jobs)
    write_out(ns.output, "".join(dumps(r) + "\n" for recs in results for r in recs))
    return 0


# -- bench -------------------------------------------------------------------

def cmd_bench_gen(ns) -> int:
    if ns.blocks < 1 or ns.count < 1:
        raise ConfigError("blocks and count must be positive")
    seed = resolve_seed(ns.seed)
    layers = parse_range(ns.layers)
    pad = parse_range(ns.pad)
    crossings = parse_range(ns.crossings) if ns.crossings else None
    if isinstance(crossings, int):
        raise ConfigError("--crossings needs lo:hi")
    suite = generate_suite(ns.count, ns.blocks, layers, seed, pad, crossings)
    if ns.verify:
        for bb in suite:
            if abs(jones_markov_exact(bb.B_prime, ns.cap) - bb.known_jones) > 1e-10:
                print(f"verification failed for braid {bb.provenance.get('index')}", file=sys.stderr)
                return 4
    write_out(ns.output, dump_suite(suite))
    return 0


def _bench_one(args: tuple) -> dict:
    idx, bb, cfg = args
    b = bb.B_prime
    noise = parse_noise(cfg["noise"])
    flags = Mitigation(**cfg["mitigate"])
    rec = {"index": idx, "braid": serialize_braid(b), "crossings": b.crossings,
           "strands": b.strands, "known_jones_re": bb.known_jones.real,
           "known_jones_im": bb.known_jones.imag, "config": cfg, "version": __version__}
    try:
        est = estimate_markov(b, cfg["shots"], noise, flags, cfg["seed"], (idx,))
    except EstimationError as e:
        rec["error"] = str(e)
        return rec
    rec.update(estimate_record(b, est, cfg["shots"], cfg["seed"], cfg["noise"], bb.known_jones))
    if flags.error_detection and not flags.conjugate_trick:
        raw = markov_prefactor(b) * est.unfiltered_R
        rec["relative_error_unfiltered"] = abs(raw - bb.known_jones) / abs(bb.known_jones)
    rec["depth"] = circuit_depth(cfev_circuit(b, (0,) + (1,) * b.strands))
    return rec


def cmd_bench_run(ns) -> int:
    if ns.shots < 1:
        raise ConfigError("shots must be at least 1")
    parse_noise(ns.noise)
    cfg = {"shots": ns.shots, "noise": ns.noise, "mitigate": Mitigation.parse(ns.mitigate).to_json(),
           "seed": resolve_seed(ns.seed)}
    path = Path(ns.input)
    if not path.exists():
        print(f"missing input {path}", file=sys.stderr)
        return EXIT_CAP
    suite = load_suite(path.read_text())
    for bb in suite:
        if bb.B_prime.strands + 1 > ns.sim_cap:
            raise SizeCapError(f"{bb.B_prime.strands + 1} qubits exceeds the simulation cap")
    recs = _pool_map(_bench_one, [(i, bb, cfg) for i, bb in enumerate(suite)], ns.jobs)
    write_out(ns.output, "".join(dumps(r) + "\n" for r in recs))
    pts = [(r["crossings"], r["relative_error"]) for r in recs if "relative_error" in r]
    try:
        fit = fit_error_scaling(pts).to_json()
    except ValueError as e:
        fit = {"error": str(e)}
    summary = {"fit": fit, "config": cfg, "version": __version__, "braids": len(recs)}
    target = ns.summary or (None if ns.output in (None, "-") else ns.output + ".fit.json")
    if target:
        Path(target).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


# -- simplify / convert ------------------------------------------------------

def cmd_simplify(ns) -> int:
    out = [simplify(b, budget=ns.budget, seed=resolve_seed(ns.seed)) for b in read_braids(ns.braids)]
    write_out(ns.output, "".join(serialize_braid(b) + "\n" for b in out))
    return 0


def cmd_convert(ns) -> int:
    braids = read_braids(ns.braids)
    if ns.to == "json":
        text = "".join(json.dumps(b.to_json(), sort_keys=True) + "\n" for b in braids)
    elif ns.to == "plat":
        text = "".join(serialize_braid(markov_to_plat(b)) + "\n" for b in braids)
    elif ns.to == "text":
        text = "".join(serialize_braid(b) + "\n" for b in braids)
    else:
        raise ConfigError(f"unknown target format {ns.to!r}")
    write_out(ns.output, text)
    return 0


# -- resources ---------------------------------------------------------------

def collect_stats(records: list[dict]) -> list[dict]:
    """Merge cfev and classical records per braid text."""
    by: dict[str, dict] = {}
    for r in records:
        key = r.get("braid")
        if key is None:
            continue
        st = by.setdefault(key, {"braid": key})
        if "relative_error" in r:
            st["relative_error"] = r["relative_error"]
            st["depth"] = r.get("depth", st.get("depth"))
        if "flops" in r:
            st["flops"] = r["flops"]
            st["peak_bytes"] = r["peak_bytes"]
        if "crossings" in r:
            st["crossings"] = r["crossings"]
    out = []
    for key, st in by.items():
        b = parse_braid_file(key)[0]
        st.setdefault("crossings", b.crossings)
        st["qubits"] = b.strands + 1
        if st.get("depth") is None:
            st["depth"] = circuit_depth(cfev_circuit(b, (0,) + (1,) * b.strands))
        out.append(st)
    return out


def cmd_resources(ns) -> int:
    model = CostModel(layer_time_s=ns.layer_time, qpu_power_w=ns.qpu_power,
                      classical_flops_per_s=ns.flops_per_s, classical_mem_bytes=ns.mem_bytes,
                      cluster_efficiency_flops_per_kwh=ns.efficiency)
    src = Path(ns.input)
    files = sorted(src.glob("*.jsonl")) if src.is_dir() else ([src] if src.exists() else [])
    records = [json.loads(ln) for f in files for ln in f.read_text().splitlines() if ln.strip()]
    if not records:
        print(f"no result records found in {src}", file=sys.stderr)
        return EXIT_CAP
    stats = [s for s in collect_stats(records) if "relative_error" in s and "flops" in s]
    if not stats:
        print("results lack paired cfev and classical records", file=sys.stderr)
        return EXIT_CAP
    rows = advantage_report(stats, model)
    Path(ns.output + ".csv").write_text(report_csv(rows))
    Path(ns.output + ".json").write_text(report_json(rows, model) + "\n")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="knotweave", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="evaluate Jones values of braids")
    e.add_argument("braids", help="braid file, one '<strands> : g1 g2 ...' per line ('-' = stdin)")
    e.add_argument("--method", default="exact", help="comma list of " + ", ".join(METHODS))
    e.add_argument("--closure", default="markov")
    e.add_argument("--shots", type=int, default=4000, help="shots per part (real and imaginary)")
    e.add_argument("--noise", default="ideal", help="preset (" + ", ".join(PRESETS)
                   + ") or key=value list: eps2q, eps1q, init, meas0, meas1, theta")
    e.add_argument("--mitigate", default="", help="comma list: detect, conjugate, shot-level")
    e.add_argument("--chi", type=int, default=0, help="MPO bond limit (0 = unbounded)")
    e.add_argument("--cap", type=int, default=DEFAULT_CAP, help="qubit cap for exact methods")
    e.add_argument("--sim-cap", type=int, default=SIM_CAP, help="qubit cap for cfev-sim")
    e.add_argument("--with-oracle", action="store_true", help="add relative error vs exact value")
    e.add_argument("--dump-circuit", metavar="PATH", help="write the cfev circuit of the first braid")
    e.add_argument("--timing", action="store_true", help="add wall_ms fields")
    e.add_argument("--seed", type=int)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="benchmark generation and runs")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    g = bsub.add_parser("gen", help="write a benchmark JSONL")
    g.add_argument("--blocks", type=int, default=3, help="3-strand blocks k")
    g.add_argument("--layers", default="10", help="brick-wall layers, N or lo:hi")
    g.add_argument("--pad", default="0", help="idle strands appended, N or lo:hi")
    g.add_argument("--crossings", help="accepted crossing range lo:hi")
    g.add_argument("--count", type=int, default=50)
    g.add_argument("--verify", action="store_true", help="check every braid against the oracle")
    g.add_argument("--cap", type=int, default=DEFAULT_CAP)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_bench_gen)
    r = bsub.add_parser("run", help="run cfev-sim over a benchmark JSONL")
    r.add_argument("input")
    r.add_argument("--shots", type=int, default=4000)
    r.add_argument("--noise", default="eps5e-4")
    r.add_argument("--mitigate", default="detect")
    r.add_argument("--sim-cap", type=int, default=SIM_CAP)
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--summary", help="fit summary path (default OUTPUT.fit.json)")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_bench_run)

    s = sub.add_parser("simplify", help="shorten braid words (closure preserved)")
    s.add_argument("braids")
    s.add_argument("--budget", type=int, default=1000)
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simplify)

    c = sub.add_parser("convert", help="rewrite braid files")
    c.add_argument("braids")
    c.add_argument("--to", default="json", help="json, text, or plat (Markov-to-plat conversion)")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_convert)

    rs = sub.add_parser("resources", help="quantum vs classical cost report",
                        description="Columns: " + ", ".join(
                            ["braid", "crossings", "qubits", "depth", "relative_error", "shots",
                             "quantum_time_s", "quantum_energy_kwh", "classical_flops",
                             "classical_time_s", "classical_energy_kwh", "classical_peak_bytes",
                             "classical_feasible", "faster", "cheaper"]))
    rs.add_argument("input", help="directory of *.jsonl results (or one file)")
    rs.add_argument("--layer-time", type=float, default=0.030)
    rs.add_argument("--qpu-power", type=float, default=75_000.0)
    rs.add_argument("--flops-per-s", type=float, default=1e12)
    rs.add_argument("--mem-bytes", type=float, default=64 * 2 ** 30)
    rs.add_argument("--efficiency", type=float, default=2.6e17, help="classical FLOPs per kWh")
    rs.add_argument("-o", "--output", default="report", help="output prefix (.csv and .json)")
    rs.set_defaults(func=cmd_resources)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else 0
    try:
        return ns.func(ns)
    except BraidError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except SizeCapError as e:
        print(f"size cap: {e}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ValueError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"missing input: {e}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
