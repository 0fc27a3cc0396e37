"""Command-line front end: ``specwalk <subcommand> ...``.

Every subcommand writes one JSON report (``"schema": 1``) to ``--output``
or stdout.  Exit status is 0 when a decision or verification was reached,
2 on a promise violation and 1 on any error.  Reports hold no timings
unless ``--timings`` is given, so identical arguments give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .circuits import (
    CLOCK_SCALE,
    acceptance_probability,
    build_clock_hermitian,
    build_u_circuit,
    load_circuit,
    row_structure_report,
)
from .errors import SpecwalkError
from .graph_gadget import (
    Decision,
    Graph,
    PathDifferenceInstance,
    decide_path_difference,
    direct_sum_check,
    dumps_graph,
    dumps_perm,
    load_graph,
    load_perm,
    signed_to_adjacency,
    verify_reduction_identity,
)
from .linalg_core import (
    basis_state,
    eig,
    load_matrix,
    materialize,
    matrix_power,
    project_state,
)
from .phase_estimation import (
    PEConfig,
    estimate_expectation,
    exact_outcome_distribution,
    outcome_bias_bound,
    power_function,
)
from .random_walks import (
    DecayDecision,
    WalkInstance,
    c_from_spectrum,
    decay_sweep,
    decide_decay,
    hardness_parameters,
    verify_decay_reduction,
    walk_spectrum,
)
from .witness_search import Verdict, build_witness_instance, decide_witness, witness_acceptance

SCHEMA = 1
EXIT_OK, EXIT_ERROR, EXIT_PROMISE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1; status 2 means promise violation."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _measure_dict(measure) -> dict:
    return {"values": measure.values.tolist(), "weights": measure.weights.tolist()}


# -- subcommands --------------------------------------------------------------
# each returns (result dict, status) where status is "decided" or "promise-violated"

def cmd_spectral(args):
    if args.circuit:
        y = load_circuit(args.circuit)
        u = build_u_circuit(y, lowered=args.lowered, negate=args.negate)
        clock = build_clock_hermitian(u)
        a = materialize(clock.a_matrix)
        j = clock.start_index if args.index is None else args.index
        es = eig(np.asarray(a, dtype=float) / clock.scale)
        got = project_state(es, basis_state(clock.dimension, j))
        alpha1_sq = acceptance_probability(y)
        expected = clock.expected_measure(alpha1_sq).measure()
        dv, dw = got.max_deviation(expected, atol=1e-10)
        result = {"M": clock.clock_size, "dimension": clock.dimension, "index": j,
                  "alpha1_sq": alpha1_sq, "normalization": "unit",
                  "measure": _measure_dict(got), "analytic": _measure_dict(expected),
                  "value_deviation": dv, "weight_deviation": dw,
                  "matches": dv <= 1e-8 and dw <= 1e-8,
                  "row_structure": row_structure_report(clock)}
        return result, "decided"
    a = load_matrix(args.matrix)
    j = 0 if args.index is None else args.index
    es = eig(materialize(a).astype(float))
    got = project_state(es, basis_state(a.dimension, j))
    return {"dimension": a.dimension, "index": j, "measure": _measure_dict(got)}, "decided"


def cmd_diag_entry(args):
    a = load_matrix(args.matrix)
    dense = materialize(a)
    j, m = args.index, args.m
    exact = matrix_power(dense, m)[j, j]
    result = {"index": j, "m": m, "exact": exact.item() if hasattr(exact, "item") else exact}
    if args.method == "exact":
        return result, "decided"
    nb = args.norm_bound or a.norm_bound
    if nb <= 0:
        raise SpecwalkError("norm bound must be positive")
    b = np.asarray(dense, dtype=float) / nb
    f = power_function(m)
    psi = basis_state(a.dimension, j)
    if args.distribution_csv:
        cfg = PEConfig(args.theta, args.eta, args.delta)
        dist = exact_outcome_distribution(b, psi, cfg)
        Path(args.distribution_csv).write_text(dist.to_csv())
        result["distribution"] = {**cfg.as_dict(), "exact_expectation": dist.expectation(f),
                                  "outcome_bias_bound": outcome_bias_bound(cfg, f)}
    est = estimate_expectation(b, psi, f, args.epsilon, args.alpha, delta=args.delta,
                               rng_seed=args.seed, repetitions=args.repetitions)
    result.update({"norm_bound": nb, "estimate": est.estimate * nb ** m,
                   "estimator": est.as_dict(), "error_bound": est.error_bound * nb ** m})
    return result, "decided"


def _graph_and_perm(args) -> tuple[Graph, tuple[int, ...]]:
    graph = load_graph(args.graph)
    perm = load_perm(args.perm) if args.perm else ()
    return graph, perm


def _default_perm(graph: Graph, q: int, r: int, perm):
    if perm:
        return perm
    if q // 2 == r // 2 and graph.is_automorphism([v ^ 1 for v in range(graph.n_vertices)]):
        return tuple(v ^ 1 for v in range(graph.n_vertices))
    raise SpecwalkError("no automorphism supplied (--perm) and the pair swap is not one")


def cmd_paths(args):
    graph, perm = _graph_and_perm(args)
    perm = _default_perm(graph, args.q, args.r, perm)
    b = args.b if args.b is not None else float(graph.degree)
    inst = PathDifferenceInstance(graph, args.q, args.r, args.m, args.g, args.epsilon, b, perm)
    res = decide_path_difference(inst, args.method, alpha=args.alpha, seed=args.seed)
    status = "promise-violated" if res.decision is Decision.PROMISE_VIOLATED else "decided"
    return {"q": args.q, "r": args.r, "m": args.m, "g": args.g, "epsilon": args.epsilon,
            "b": b, "gap": inst.gap, **res.as_dict()}, status


def _parse_sweep(text: str) -> np.ndarray:
    try:
        t0, t1, steps = text.split(":")
        return np.linspace(float(t0), float(t1), int(steps))
    except ValueError as exc:
        raise SpecwalkError(f"--sweep expects t0:t1:steps, got {text!r}") from exc


def cmd_walk(args):
    graph, perm = _graph_and_perm(args)
    perm = _default_perm(graph, args.q, args.r, perm)
    es = walk_spectrum(graph)
    result = {"q": args.q, "r": args.r, "degree": graph.degree}
    status = "decided"
    if args.t is not None:
        result["t"] = args.t
        result["c"] = float(c_from_spectrum(es, args.q, args.r, args.t))
    if args.T is not None:
        if None in (args.mu, args.a, args.b):
            raise SpecwalkError("deciding decay needs --mu, --a and --b")
        inst = WalkInstance(graph, args.q, args.r, args.mu, args.a, args.b, args.T, perm)
        res = decide_decay(inst, args.method, alpha=args.alpha, seed=args.seed,
                           norm_bound=args.norm_bound, spectrum=es)
        result.update({"T": args.T, "mu": args.mu, "a": args.a, "b": args.b, **res.as_dict()})
        if res.decision is DecayDecision.PROMISE_VIOLATED:
            status = "promise-violated"
    if args.sweep:
        inst = WalkInstance(graph, args.q, args.r, 1.0, 1.0, 0.5, 1.0, perm)
        rows = decay_sweep(inst, _parse_sweep(args.sweep), spectrum=es)
        text = "t,c_exact,lower_envelope,upper_envelope\n" + "".join(
            f"{t!r},{c!r},{lo!r},{hi!r}\n" for t, c, lo, hi in rows)
        if args.csv:
            Path(args.csv).write_text(text)
            result["sweep_csv"] = args.csv
        else:
            # the CSV owns stdout; the JSON report needs --output
            sys.stdout.write(text)
            args.quiet_report = True
        result["sweep_points"] = len(rows)
    if args.t is None and args.T is None and not args.sweep:
        raise SpecwalkError("walk needs --t, --T or --sweep")
    return result, status


def _wires(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(w) for w in text.split(","))
    except ValueError as exc:
        raise SpecwalkError(f"bad wire list {text!r}") from exc


def cmd_witness(args):
    y = load_circuit(args.circuit)
    wires = _wires(args.witness_wires)
    inst = build_witness_instance(y, wires, n_tilde=args.n_tilde)
    res = decide_witness(inst, args.method, alpha=args.alpha, seed=args.seed)
    hp = hardness_parameters(inst.clock.clock_size, CLOCK_SCALE)
    out = {"witness_wires": list(wires), "n_tilde": inst.n_tilde,
           "vertices": inst.graph.n_vertices, "parameters": hp.as_dict(), **res.as_dict()}
    if args.acceptance:
        out["acceptance"] = witness_acceptance(y, wires)
    return out, "promise-violated" if res.verdict is Verdict.PROMISE_VIOLATED else "decided"


def _write_clock_fixture(y, out_dir: Path, negate: bool) -> dict:
    clock = build_clock_hermitian(build_u_circuit(y, lowered=True, negate=negate))
    graph = signed_to_adjacency(clock.a_matrix)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "graph.txt").write_text(dumps_graph(graph))
    (out_dir / "perm.txt").write_text(dumps_perm(graph.swap_permutation()))
    j = clock.start_index
    (out_dir / "pairs.txt").write_text(f"pairs 1\n{j} {2 * j} {2 * j + 1}\n")
    hp = hardness_parameters(clock.clock_size, CLOCK_SCALE)
    return {"files": [str(out_dir / n) for n in ("graph.txt", "perm.txt", "pairs.txt")],
            "M": clock.clock_size, "j": j, "q": 2 * j, "r": 2 * j + 1,
            "degree": graph.degree, "vertices": graph.n_vertices, "parameters": hp.as_dict()}


def cmd_reduce(args):
    y = load_circuit(args.circuit)
    out = _write_clock_fixture(y, Path(args.out_dir), args.negate)
    out["alpha1_sq"] = acceptance_probability(y)
    return out, "decided"


def cmd_verify(args):
    y = load_circuit(args.circuit)
    clock = build_clock_hermitian(build_u_circuit(y, lowered=True, negate=args.negate))
    ident = verify_reduction_identity(clock.a_matrix, clock.start_index, args.m)
    dsum = direct_sum_check(clock.a_matrix)
    decay = verify_decay_reduction(y, negate=args.negate)
    ok = dsum["max_deviation"] == 0 and ident["growth_ok"]
    return {"M": clock.clock_size, "reduction_identity": ident, "direct_sum": dsum,
            "decay_reduction": decay, "all_ok": ok}, "decided"


def random_regular(n: int, d: int, seed: int, max_tries: int = 10000) -> Graph:
    """Seeded pairing model, rejecting until the multigraph is simple."""
    if d >= n or d < 0 or (n * d) % 2:
        raise SpecwalkError(f"no simple {d}-regular graph on {n} vertices")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        pairs = rng.permutation(points).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {tuple(sorted(p)) for p in pairs.tolist()}
        if len(edges) != len(pairs):
            continue
        lists = [[] for _ in range(n)]
        for u, v in edges:
            lists[u].append(v)
            lists[v].append(u)
        return Graph.from_lists(lists)
    raise SpecwalkError(f"pairing model found no simple graph in {max_tries} tries")


def cmd_fixture(args):
    out_dir = Path(args.out_dir)
    if args.kind == "clock":
        if not args.circuit:
            raise SpecwalkError("clock fixtures need --circuit")
        return _write_clock_fixture(load_circuit(args.circuit), out_dir, args.negate), "decided"
    n = args.n
    if n is None or n < 2:
        raise SpecwalkError("--n >= 2 is required")
    perm = None
    if args.kind == "k-complete":
        graph = Graph.from_lists([[u for u in range(n) if u != v] for v in range(n)])
        perm = [1, 0] + list(range(2, n))
    elif args.kind == "cycle":
        if n < 3:
            raise SpecwalkError("cycles need n >= 3")
        graph = Graph.from_lists([[(v - 1) % n, (v + 1) % n] for v in range(n)])
        perm = [(1 - v) % n for v in range(n)]
    else:
        graph = random_regular(n, args.degree, args.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [out_dir / "graph.txt"]
    files[0].write_text(dumps_graph(graph))
    if perm is not None:
        files.append(out_dir / "perm.txt")
        files[1].write_text(dumps_perm(perm))
    return {"kind": args.kind, "n": n, "degree": graph.degree,
            "files": [str(f) for f in files]}, "decided"


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specwalk", description="Spectral measures, path differences and walk decay.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, method=True):
        sp.add_argument("--output", "-o", help="JSON report path (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--timings", action="store_true", help="include wall-clock timings")
        if method:
            sp.add_argument("--method", choices=("exact", "quantum-sim"), default="exact")

    sp = sub.add_parser("spectral", help="spectral measure of a basis state")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix")
    src.add_argument("--circuit")
    sp.add_argument("--index", type=int)
    sp.add_argument("--lowered", action="store_true", help="write the reflection in the Hadamard gate set")
    sp.add_argument("--negate", action="store_true", help="use the reflection -Z (implies --lowered)")
    common(sp, method=False)
    sp.set_defaults(run=cmd_spectral)

    sp = sub.add_parser("diag-entry", help="estimate (A^m)_jj")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--norm-bound", type=float)
    sp.add_argument("--theta", type=float, default=0.05)
    sp.add_argument("--eta", type=float, default=0.01)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--repetitions", type=int, help="override the Hoeffding sample count")
    sp.add_argument("--distribution-csv", help="write the exact outcome distribution as x,probability")
    common(sp)
    sp.set_defaults(run=cmd_diag_entry)

    sp = sub.add_parser("paths", help="decide a path-difference instance")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--perm")
    sp.add_argument("--q", type=int, default=0)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--g", type=float, required=True)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--b", type=float, help="growth bound (default: degree)")
    common(sp)
    sp.set_defaults(run=cmd_paths)

    sp = sub.add_parser("walk", help="decay of probability differences")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--perm")
    sp.add_argument("--q", type=int, default=0)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--t", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--norm-bound", default="2d", help="'2d', 'gershgorin' or a number")
    sp.add_argument("--sweep", help="t0:t1:steps, CSV of c and its envelopes")
    sp.add_argument("--csv", help="sweep CSV path (default: stdout)")
    common(sp)
    sp.set_defaults(run=cmd_walk)

    sp = sub.add_parser("witness", help="search for a slow-decay pair")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--witness-wires", required=True, help="comma-separated wires, top bit first")
    sp.add_argument("--n-tilde", type=int)
    sp.add_argument("--acceptance", action="store_true", help="also report per-witness acceptance")
    common(sp)
    sp.set_defaults(run=cmd_witness)

    sp = sub.add_parser("reduce", help="circuit to walk instance files")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--negate", action="store_true")
    common(sp, method=False)
    sp.set_defaults(run=cmd_reduce)

    sp = sub.add_parser("verify", help="check the reduction identities for a circuit")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--m", type=int, default=10)
    sp.add_argument("--negate", action="store_true")
    common(sp, method=False)
    sp.set_defaults(run=cmd_verify)

    sp = sub.add_parser("fixture", help="generate instance files")
    sp.add_argument("kind", choices=("clock", "k-complete", "cycle", "random-regular"))
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--degree", type=int, default=4)
    sp.add_argument("--circuit")
    sp.add_argument("--negate", action="store_true")
    common(sp, method=False)
    sp.set_defaults(run=cmd_fixture)
    return p


def _resolved_params(obj) -> list[dict]:
    """Every estimator parameter set (θ, η, p, δ, n) found in a result."""
    found = []
    if isinstance(obj, dict):
        if "estimator" in obj:
            e = obj["estimator"]
            found.append({k: e[k] for k in ("theta", "eta", "p", "delta", "repetitions")})
        for k, v in obj.items():
            if k != "estimator":
                found += _resolved_params(v)
    elif isinstance(obj, list):
        for v in obj:
            found += _resolved_params(v)
    return found


def _config(args) -> dict:
    skip = {"run", "output", "timings", "quiet_report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "negate", False) and args.subcommand == "spectral":
        args.lowered = True
    start = time.perf_counter()
    try:
        result, status = args.run(args)
    except (SpecwalkError, OSError, ValueError, IndexError) as exc:
        print(f"specwalk {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = {"schema": SCHEMA, "subcommand": args.subcommand, "config": _config(args),
              "status": status, "params": _resolved_params(result), "result": result}
    if args.timings:
        report["timings"] = {"wall_seconds": time.perf_counter() - start}
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    try:
        if args.output:
            Path(args.output).write_text(text)
        elif not getattr(args, "quiet_report", False):
            sys.stdout.write(text)
    except OSError as exc:
        print(f"specwalk {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_PROMISE if status == "promise-violated" else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
