"""Acceptance checks, one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line (shown in the pytest terminal summary)
before asserting.
"""
import math
import time

import numpy as np
import pytest

from pado import generators
from pado.additive import build_additive, per_node_words
from pado.cli import main
from pado.multiplicative import build_multiplicative
from pado.plane_graph import sssp, subdivide_long_edges, triangulate
from pado.verify import ExactOracle, audit_patterns, audit_stretch
from conftest import from_coords, path_of, record

EPS_LIST = (0.5, 0.25, 0.1)
SIDES = (16, 32)


@pytest.fixture(scope="module")
def grid_builds():
    """Every build of criterion 1 with its audit and wall time (build + queries)."""
    out = {}
    for side in SIDES:
        g = generators.grid(side, side)
        exact = ExactOracle(g, "matrix")
        pairs = generators.sample_pairs(g, 1000, side)
        for c in (3, 1):
            for eps in EPS_LIST:
                t0 = time.perf_counter()
                o = build_additive(g, eps=eps, c=c)
                rep = audit_stretch(o.query, g, pairs, "additive", bound=o.bound, exact=exact)
                out[(side, c, eps)] = (o, rep, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def delaunay_mult():
    g = generators.delaunay_like(2000, "uniform", 0, 1, 10)
    t0 = time.perf_counter()
    mo = build_multiplicative(g, eps=0.2, check_covers=True)
    return g, mo, time.perf_counter() - t0


def test_criterion_1_additive_stretch(grid_builds):
    bad = []
    worst = 0.0
    for key, (o, rep, secs) in sorted(grid_builds.items()):
        worst = max(worst, secs)
        if not rep.ok or secs >= 120:
            bad.append((key, len(rep.violations), round(secs, 1)))
    detail = (f"{len(grid_builds)} builds (grids {SIDES}, eps {EPS_LIST}, c in 3,1), "
              f"1000 pairs each, violations in {bad or 'none'}, slowest {worst:.1f}s")
    record(1, not bad, detail)
    assert not bad


def test_criterion_2_decode_band(grid_builds):
    checked = bad = 0
    for side in SIDES:
        o = grid_builds[(side, 1, 0.25)][0]
        rep = audit_patterns(o, check_band=True, check_composition=False)
        checked += sum(r.encodings * r.k for r in rep.regions)
        bad += sum(r.band_violations for r in rep.regions)
    record(2, bad == 0 and checked > 0,
           f"{checked} decoded entries over eps = 0.25 grid builds, {bad} outside [d, d + i*delta]")
    assert checked > 0 and bad == 0


def test_criterion_3_registry_caps(grid_builds):
    over = []
    curve = {}
    for key, (o, _, _) in sorted(grid_builds.items()):
        rep = audit_patterns(o, check_band=False, check_composition=False)
        curve[key] = rep.max_registry
        over += [(key, r.node, r.registry, r.cap) for r in rep.regions if not r.cap_ok]
    scaling = {eps: max(v for (s, c, e), v in curve.items() if e == eps) for eps in EPS_LIST}
    record(3, not over, f"max registry by eps {scaling}, regions over cap: {len(over)}")
    assert not over


def test_criterion_4_composition_bound(grid_builds):
    o = grid_builds[(16, 1, 0.25)][0]
    rep = audit_patterns(o, check_band=False, check_composition=True)
    detail = (f"{rep.composition_checked} nested leaf/ancestor encodings, "
              f"{rep.composition_violations} beyond k*delta, max deviation "
              f"{rep.composition_max_dev} delta units, {rep.composition_tau_violations} beyond "
              f"k + 2*tau/delta")
    ok = rep.composition_checked > 0 and rep.composition_ok
    record(4, ok, detail)
    assert ok


def test_criterion_5_global_tables():
    words = {}
    for side in SIDES:
        words[side * side] = per_node_words(build_additive(generators.grid(side, side), eps=0.25, c=1))
    a, b = words[256], words[1024]
    ratio = max(a, b) / min(a, b)
    record(5, ratio < 2, f"T22+T3 words per internal node {words}, ratio {ratio:.3f}")
    assert ratio < 2


def test_criterion_6_multiplicative_stretch(delaunay_mult):
    g, mo, build_s = delaunay_mult
    pairs = generators.sample_pairs(g, 500, 0, "per-scale")
    exact = ExactOracle(g, "matrix")
    t0 = time.perf_counter()
    reps = {mode: audit_stretch(lambda u, v, m=mode: mo.query(u, v, m), g, pairs, "multiplicative",
                                eps=0.2, exact=exact) for mode in ("estimator", "scan")}
    total = build_s + time.perf_counter() - t0
    ok = all(r.ok for r in reps.values()) and total < 300
    ratios = {m: round(r.max_ratio, 4) for m, r in reps.items()}
    record(6, ok, f"500 per-scale pairs, max ratio {ratios}, "
                  f"violations {[len(r.violations) for r in reps.values()]}, runtime {total:.1f}s")
    assert ok


def test_criterion_7_sparse_covers(delaunay_mult):
    g, mo, _ = delaunay_mult
    st = mo.state["stats"]
    reps = mo.cover_reports
    exact_ok = all(r.ok for r in reps)
    volume_ok = all(v <= 10 * g.n for v in st["volume"])
    record(7, exact_ok and volume_ok,
           f"{len(reps)} covers, diameter and padding ok: {exact_ok}, overlap {st['overlap']}, "
           f"volume/n {[round(v / g.n, 2) for v in st['volume']]}")
    assert exact_ok and volume_ok


def test_criterion_8_scale_edge_accounting(delaunay_mult):
    g, mo, _ = delaunay_mult
    st = mo.state["stats"]
    bound = g.m * (math.log2(g.n * max(g.ew) / min(g.ew) / 0.2) + 1)
    ok = st["edge_total"] <= bound
    record(8, ok, f"sum of scale-graph edges {st['edge_total']} <= {bound:.0f}")
    assert ok


def small_graphs():
    """The graphs with n <= 200 that the test suite builds."""
    gs = [generators.grid(r, c) for r, c in [(2, 2), (3, 3), (4, 4), (5, 5), (6, 6), (8, 8),
                                              (10, 10), (12, 12)]]
    gs += [generators.grid(5, 7, "uniform", 3), generators.grid(6, 6, "uniform", 1)]
    gs += [generators.delaunay_like(n, "uniform", s)
           for n, s in [(30, 1), (60, 3), (80, 2), (120, 5), (150, 3), (150, 4), (200, 2), (200, 8)]]
    gs += [generators.cycle(4), generators.cycle(12), generators.path(6, "uniform", 1),
           generators.path(20, "expint", 1)]
    gs += [path_of([1, 2]), path_of([1.0] * 10), path_of([2.0 ** i for i in range(12)]),
           path_of([1.0] * 6 + [1e7] + [2.0] * 3),
           from_coords([(0, 0), (1, 0), (0, 1)], [(0, 1), (1, 2), (2, 0)])]
    return gs


def all_pairs_sssp(g, n):
    return np.array([sssp(g, s).dist[:n] for s in range(n)])


def test_criterion_9_oracle_equivalence():
    mode_mismatch = tri_mismatch = sub_exact_mismatch = sub_guard_mismatch = 0
    graphs = small_graphs()
    for g in graphs:
        n = g.n
        a, b = ExactOracle(g, "sssp"), ExactOracle(g, "matrix")
        ref = np.array([[a.distance(u, v) for v in range(n)] for u in range(n)])
        mode_mismatch += int((ref != np.array([[b.distance(u, v) for v in range(n)]
                                               for u in range(n)])).sum())
        tri_mismatch += int((all_pairs_sssp(triangulate(g), n) != ref).sum())
        dyadic = all(float(w).is_integer() for w in g.ew)
        for frac in (0.5, 0.3, 0.13):
            h, _ = subdivide_long_edges(g, frac * max(g.ew))
            d = all_pairs_sssp(h, n)
            if dyadic and frac == 0.5:
                sub_exact_mismatch += int((d != ref).sum())
            sub_guard_mismatch += int((np.abs(d - ref) > 1e-9 * np.maximum(ref, 1)).sum())
    ok = not (mode_mismatch or tri_mismatch or sub_exact_mismatch or sub_guard_mismatch)
    record(9, ok, f"{len(graphs)} graphs: matrix/sssp mismatches {mode_mismatch}, triangulation "
                  f"{tri_mismatch}, subdivision bit-exact (integer weights) {sub_exact_mismatch}, "
                  f"subdivision beyond 1e-9 guard {sub_guard_mismatch}")
    assert ok


def test_criterion_10_determinism(tmp_path):
    same = []
    for family, size in (("grid", ["--rows", "16", "--cols", "16", "--weights", "unit"]),
                         ("delaunay_like", ["--n", "300", "--weights", "uniform"])):
        g = tmp_path / f"{family}.pgrf"
        main(["generate", "--family", family, *size, "--seed", "5", "-o", str(g)])
        for mode, eps in (("additive", "0.25"), ("mult", "0.2")):
            blobs, reports = [], []
            for run in range(2):
                o = tmp_path / f"{family}-{mode}-{run}.oracle"
                r = tmp_path / f"{family}-{mode}-{run}.csv"
                assert main(["build", "--mode", mode, "--eps", eps, "--c", "1", "-i", str(g),
                             "-o", str(o)]) == 0
                main(["verify", "-i", str(o), "-g", str(g), "--samples", "200", "--seed", "7",
                      "-o", str(r)])
                blobs.append(o.read_bytes())
                reports.append(r.read_bytes())
            same.append(blobs[0] == blobs[1] and reports[0] == reports[1])
    ok = all(same)
    record(10, ok, f"{len(same)} build/verify pairs byte-identical: {sum(same)}")
    assert ok
