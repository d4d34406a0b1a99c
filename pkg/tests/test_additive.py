import math

import pytest

from pado import generators
from pado.additive import (AdditiveOracle, OracleError, build_additive, dumps, loads, per_node_words,
                           query_encoding_id, space_report)
from pado.plane_graph import sssp
from pado.verify import ExactOracle, audit_stretch


@pytest.fixture(scope="module")
def grid16():
    return build_additive(generators.grid(16, 16), eps=0.25, c=1)


def direct_encoding(oracle, u, child):
    """(first, pattern) of ``u`` at ``child`` recomputed by Dijkstra over the filled side."""
    dt, h, delta = oracle.artifacts.tree, oracle.artifacts.h, oracle.delta
    sigma = dt.portal_seq(child).portals
    d = sssp(h, u, edge_mask=dt.edge_mask(dt.plus_faces(child))).dist
    first = math.ceil(d[sigma[0]] / delta)
    pat = [math.ceil((d[sigma[i + 1]] - d[sigma[i]]) / delta) for i in range(len(sigma) - 1)]
    return first, pat, [d[p] for p in sigma]


def test_triangle_single_leaf(k3):
    o = build_additive(k3, eps=0.25)
    assert len(o.state["nodes"]) == 1
    assert o.dhat == 2.0 and o.bound == 12 * 0.25 * 2.0
    for u in range(3):
        for v in range(3):
            d = 0.0 if u == v else 1.0
            assert o.query(u, v) == d + 2 * 0.25 * o.dhat


def test_triangle_space_tally(k3):
    o = build_additive(k3, eps=0.25)
    rep = space_report(o)
    # 3x3 leaf table + 3 index entries; 5 words for the single node + 3 leaf ids
    assert rep == {"t21": 0, "t22": 0, "patterns": 0, "t3": 0, "t41a": 0, "t41b": 0,
                   "leaf": 12, "portals": 0, "tree": 8, "total": 20}
    assert per_node_words(o) == 0.0


def test_grid_stretch(grid16):
    o = grid16
    assert not o.state["stats"]["single_leaf"]
    pairs = generators.sample_pairs(generators.grid(16, 16), 1000, 1)
    rep = audit_stretch(o.query, generators.grid(16, 16), pairs, "additive", bound=o.bound)
    assert rep.ok and not rep.lower_violations


def test_same_leaf_queries(grid16):
    o = grid16
    shift = 2 * o.eps * o.dhat
    assert o.query(5, 5) == shift
    g = generators.grid(16, 16)
    hits = 0
    for e in range(g.m):
        u, v = g.eu[e], g.ev[e]
        leaf = o.state["leaf_of"][u]
        if leaf != o.state["leaf_of"][v]:
            continue
        table = o.state["leaf"][leaf]
        idx = table["index"]
        if table["apsp"][idx[u], idx[v]] == g.ew[e]:
            assert o.query(u, v) == g.ew[e] + shift
            hits += 1
    assert hits > 0


def test_two_level_hierarchy():
    g = generators.grid(32, 32)
    o = build_additive(g, eps=0.25, c=1, levels=2)
    assert o.state["stats"]["tree"]["levels"] == 2
    assert {nd["level"] for nd in o.state["nodes"]} == {1, 2}
    pairs = generators.sample_pairs(g, 300, 2)
    rep = audit_stretch(o.query, g, pairs, "additive", bound=o.bound, exact=ExactOracle(g, "matrix"))
    assert rep.ok


def test_root_child_uses_own_record(grid16):
    o = grid16
    st = o.state
    child = st["nodes"][0]["children"][0]
    u = next(v for v in range(256) if st["paths"][st["leaf_of"][v]][1] == child)
    first, pid = st["t21"][child][u]
    expect = o._first_index[child][first] * st["npat"][child] + pid
    assert query_encoding_id(o, u, 0) == expect


def test_own_records_match_direct_recomputation(grid16):
    o = grid16
    st = o.state
    for child in range(1, len(st["nodes"])):
        for u, (first, pid) in list(st["t21"][child].items())[:10]:
            f, pat, _ = direct_encoding(o, u, child)
            assert first == f
            assert list(st["patterns"][child][pid]) == pat


def test_composed_encodings_match_direct_recomputation(grid16):
    """Composed first units equal the direct ones and patterns sit within 2k delta."""
    o = grid16
    st = o.state
    bad_first = bad_pattern = 0
    for u in range(256):
        for child in st["paths"][st["leaf_of"][u]][1:]:
            first, pid = o.encoding_key(u, child)
            f, pat, _ = direct_encoding(o, u, child)
            k = len(pat) + 1
            got = st["patterns"][child][pid]
            bad_first += first != f
            bad_pattern += max((abs(a - b) for a, b in zip(got, pat)), default=0) > 2 * k
    assert (bad_first, bad_pattern) == (0, 0)


def test_round_trip_and_determinism(grid16):
    blob = dumps(grid16)
    again = loads(blob)
    assert isinstance(again, AdditiveOracle)
    for u, v in generators.sample_pairs(generators.grid(16, 16), 200, 5):
        assert again.query(u, v) == grid16.query(u, v)
    assert dumps(build_additive(generators.grid(16, 16), eps=0.25, c=1)) == blob


def test_blob_validation(grid16):
    with pytest.raises(OracleError):
        loads(b"nope" + dumps(grid16)[4:])
    blob = bytearray(dumps(grid16))
    blob[4] = 99
    with pytest.raises(OracleError):
        loads(bytes(blob))


def test_bad_inputs(k3):
    with pytest.raises(OracleError):
        build_additive(k3, eps=1.5)
    with pytest.raises(OracleError):
        build_additive(k3, eps=0.25, levels=0)
    o = build_additive(k3, eps=0.25)
    with pytest.raises(OracleError):
        o.query(0, 7)


def test_dense_portal_stretch():
    g = generators.grid(16, 16)
    o = build_additive(g, eps=0.25, c=1, filling="dense_portal")
    rep = audit_stretch(o.query, g, generators.sample_pairs(g, 500, 3), "additive", bound=o.bound)
    assert rep.ok and not rep.lower_violations


def test_weighted_delaunay_stretch():
    g = generators.delaunay_like(400, "uniform", 11)
    o = build_additive(g, eps=0.2, c=1)
    assert not o.state["stats"]["single_leaf"]
    rep = audit_stretch(o.query, g, generators.sample_pairs(g, 500, 4), "additive", bound=o.bound,
                        exact=ExactOracle(g, "matrix"))
    assert rep.ok and not rep.lower_violations
