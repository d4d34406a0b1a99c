"""Command line: generate, build, query, verify and bench.

Exit codes: 0 on success, 2 when inputs fail validation, 3 when an audit
finds a violated bound.  ``PADO_THREADS`` caps how many worker processes
``bench`` may use (default 1).
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import pickle
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import generators
from .additive import MAGIC, FORMAT_VERSION, AdditiveOracle, OracleError, build_additive, space_report
from .multiplicative import MultOracle, build_multiplicative, space_report as mult_space
from .plane_graph import GraphFormatError, PlaneGraph, bidirectional_distance, load, save
from .verify import CSV_COLUMNS, ExactOracle, audit_stretch

EXIT_OK, EXIT_INVALID, EXIT_AUDIT = 0, 2, 3
BENCH_SCHEMA = 1
BENCH_COLUMNS = ["schema", "instance", "n", "m", "eps", "c", "levels", "filling", "mode",
                 "build_ms", "space_total", "space_t21", "space_t22", "space_patterns",
                 "space_t3", "space_t41", "space_leaf", "query_ns_p50", "query_ns_p99",
                 "max_err", "bound_B", "max_patterns", "cover_overlap"]
FILLINGS = {"exact": "exact", "portal": "dense_portal", "dense_portal": "dense_portal"}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def threads() -> int:
    raw = os.environ.get("PADO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(f"PADO_THREADS must be an integer, got {raw!r}")


def load_oracle(path: str):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CliError(f"{path}: not an oracle blob")
    if int.from_bytes(blob[4:6], "little") != FORMAT_VERSION:
        raise CliError(f"{path}: unsupported format version")
    state = pickle.loads(blob[6:])
    kind = state.get("kind") if isinstance(state, dict) else None
    if kind == "additive":
        return AdditiveOracle(state)
    if kind == "multiplicative":
        return MultOracle(state)
    raise CliError(f"{path}: unknown oracle kind {kind!r}")


def write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _graph_for(args_graph: Optional[str], oracle) -> Optional[PlaneGraph]:
    if args_graph:
        return load(args_graph)
    if isinstance(oracle, MultOracle):
        return oracle._graph
    return None


def _build(g: PlaneGraph, mode: str, eps: float, c: float, levels: int, filling: str):
    if mode == "additive":
        return build_additive(g, eps=eps, c=c, levels=levels, filling=filling)
    return build_multiplicative(g, eps=eps, c=c, levels=levels, filling=filling)


def _filling(name: str) -> str:
    if name not in FILLINGS:
        raise CliError(f"unknown filling {name!r}")
    return FILLINGS[name]


# -- subcommands -------------------------------------------------------------------

def cmd_generate(args) -> int:
    spec = generators.GenSpec(family=args.family, rows=args.rows, cols=args.cols, n=args.n,
                              weights=args.weights, lo=args.lo, hi=args.hi, seed=args.seed)
    g = generators.generate(spec)
    save(g, args.output)
    if args.pairs_out:
        generators.write_pairs(generators.sample_pairs(g, args.pairs, args.seed, args.pair_law),
                               args.pairs_out)
    return EXIT_OK


def cmd_build(args) -> int:
    g = load(args.input)
    mode = "additive" if args.mode == "additive" else "mult"
    oracle = _build(g, mode, args.eps, args.c, args.levels, _filling(args.filling))
    with open(args.output, "wb") as fh:
        fh.write(oracle.dumps())
    if args.stats:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        stats = oracle.state["stats"]
        flat = dict(stats.get("tree", {})) if mode == "additive" else {}
        flat.update({k: v for k, v in stats.items() if k != "tree"})
        space = space_report(oracle) if mode == "additive" else mult_space(oracle)
        flat.update({f"space_{k}": v for k, v in space.items()})
        if mode == "additive":
            flat["bound"] = oracle.bound
        for k in sorted(flat):
            if isinstance(flat[k], dict):
                for sk in sorted(flat[k]):
                    w.writerow([f"{k}_{sk}", flat[k][sk]])
            elif isinstance(flat[k], list):
                w.writerow([k, " ".join(str(x) for x in flat[k])])
            else:
                w.writerow([k, flat[k]])
        write_text(args.stats, buf.getvalue())
    return EXIT_OK


def _rows(oracle, pairs, g: Optional[PlaneGraph]) -> Tuple[str, bool]:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    all_ok = True
    mult = isinstance(oracle, MultOracle)
    for i, (u, v) in enumerate(pairs):
        ans = float(oracle.query(u, v))
        if u == v:
            d = 0.0
        elif g is not None:
            d = bidirectional_distance(g, u, v)
        else:
            d = None
        if mult:
            bound = 1.0 + oracle.eps
        else:
            bound = oracle.bound
        if d is None:
            w.writerow([i, u, v, "", repr(ans), "", repr(bound), ""])
            continue
        if mult:
            err = ans / d if d > 0 else (1.0 if ans == 0 else float("inf"))
            ok = d - 1e-9 * max(1, d) <= ans <= bound * d + 1e-9 * max(1, d)
        else:
            err = ans - d
            ok = d - 1e-9 * max(1, d) <= ans <= d + bound + 1e-9 * max(1, d + bound)
        all_ok &= ok
        w.writerow([i, u, v, repr(d), repr(ans), repr(err), repr(bound), int(ok)])
    return buf.getvalue(), all_ok


def cmd_query(args) -> int:
    oracle = load_oracle(args.input)
    pairs = generators.read_pairs(args.pairs)
    for u, v in pairs:
        if not (0 <= u < oracle.state["n"] and 0 <= v < oracle.state["n"]):
            raise CliError(f"pair ({u}, {v}) out of range")
    g = _graph_for(args.graph, oracle)
    text, ok = _rows(oracle, pairs, g)
    write_text(args.output, text)
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_verify(args) -> int:
    oracle = load_oracle(args.input)
    g = load(args.graph)
    if g.n != oracle.state["n"]:
        raise CliError("oracle and graph disagree on the vertex count")
    mult = isinstance(oracle, MultOracle)
    if mult:
        oracle.attach_graph(g)
    law = "per-scale" if mult else "uniform"
    pairs = generators.sample_pairs(g, args.samples, args.seed, law)
    exact = ExactOracle(g, "matrix" if g.n <= 2000 else "sssp")
    if mult:
        rep = audit_stretch(oracle.query, g, pairs, "multiplicative", eps=oracle.eps, exact=exact)
    else:
        rep = audit_stretch(oracle.query, g, pairs, "additive", bound=oracle.bound, exact=exact)
    write_text(args.output, rep.to_csv())
    s = rep.summary()
    print(f"pairs={s['pairs']} violations={s['violations']} lower={s['lower_violations']} "
          f"max_err={s['max_err']!r} bound={s['bound']!r}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_AUDIT


def _bench_one(job) -> List:
    family, size, weights, seed, eps, mode, c, levels, filling, npairs = job
    if family == "grid":
        spec = generators.GenSpec(family, rows=size[0], cols=size[1], weights=weights, seed=seed)
        name = f"grid{size[0]}x{size[1]}"
    else:
        spec = generators.GenSpec(family, n=size[0], weights=weights, seed=seed)
        name = f"{family}{size[0]}"
    g = generators.generate(spec)
    t0 = time.perf_counter()
    oracle = _build(g, mode, eps, c, levels, filling)
    build_ms = (time.perf_counter() - t0) * 1e3
    pairs = generators.sample_pairs(g, npairs, seed, "per-scale" if mode == "mult" else "uniform")
    times = []
    answers = []
    for u, v in pairs:
        t = time.perf_counter_ns()
        answers.append(oracle.query(u, v))
        times.append(time.perf_counter_ns() - t)
    exact = ExactOracle(g, "matrix" if g.n <= 2000 else "sssp")
    if mode == "additive":
        errs = [a - exact.distance(u, v) for a, (u, v) in zip(answers, pairs)]
        sp = space_report(oracle)
        bound = oracle.bound
        max_pat = max((len(p) for p in oracle.state["patterns"]), default=0)
        overlap = ""
        parts = [sp["t21"], sp["t22"], sp["patterns"], sp["t3"], sp["t41a"] + sp["t41b"], sp["leaf"]]
    else:
        errs = [a / exact.distance(u, v) for a, (u, v) in zip(answers, pairs)]
        sp = mult_space(oracle)
        bound = 1.0 + eps
        max_pat = max((max((len(p) for p in o["patterns"]), default=0)
                       for o in oracle.state["oracles"]), default=0)
        overlap = max(oracle.state["stats"]["overlap"])
        parts = ["", "", "", "", "", ""]
    return [BENCH_SCHEMA, name, g.n, g.m, eps, c, levels, filling, mode, f"{build_ms:.1f}",
            sp["total"], *parts, int(np.percentile(times, 50)), int(np.percentile(times, 99)),
            repr(max(errs)), repr(bound), max_pat, overlap]


def cmd_bench(args) -> int:
    eps_list = [float(x) for x in args.eps_list.split(",") if x.strip()]
    if not eps_list:
        raise CliError("empty --eps-list")
    if args.family == "grid":
        size = (args.rows, args.cols)
    else:
        size = (args.n,)
    mode = "additive" if args.mode == "additive" else "mult"
    jobs = [(args.family, size, args.weights, args.seed, e, mode, args.c, args.levels,
             _filling(args.filling), args.pairs) for e in eps_list]
    workers = min(threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    w.writerows(rows)
    write_text(args.output, buf.getvalue())
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------

def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=generators.FAMILIES, default="grid")
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--weights", choices=generators.WEIGHT_LAWS, default="unit")
    p.add_argument("--seed", type=int, default=0)


def _add_build_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["additive", "mult"], default="additive")
    p.add_argument("--c", type=float, default=3.0)
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--filling", choices=sorted(FILLINGS), default="exact")


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pado", description="Approximate distance oracles for plane graphs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a generated instance as PGRF")
    _add_instance_args(p)
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=10.0)
    p.add_argument("--pairs-out", help="also write sampled query pairs here")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--pair-law", choices=["uniform", "per-scale"], default="uniform")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build", help="build an oracle blob from a PGRF graph")
    _add_build_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--stats", help="write build statistics as key,value CSV")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer the pairs in a pairs file")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("-g", "--graph", help="PGRF graph for exact distances")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="audit stretch on sampled pairs")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="CSV report (default: discard)", default=os.devnull)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="build and measure over a list of eps values")
    _add_instance_args(p)
    _add_build_args(p)
    p.add_argument("--eps-list", required=True, help="comma separated, e.g. 0.4,0.2,0.1")
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pado: {exc}", file=sys.stderr)
        return exc.code
    except (GraphFormatError, OracleError, ValueError, OSError) as exc:
        print(f"pado: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
