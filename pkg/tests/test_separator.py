import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pado import generators
from pado.plane_graph import sssp, triangulate
from pado.separator import (SeparatorContext, SeparatorCycle, SeparatorError,
                            fundamental_cycle_separator, place_portals, portal_bound, separate,
                            tau_cover_violations)


def flood_sides(g, tree, e):
    """Strict sides of the fundamental cycle of non-tree edge ``e`` by a dual
    flood fill that never crosses a cycle edge."""
    u, v = g.eu[e], g.ev[e]
    pu, pv = tree.path_to(u), tree.path_to(v)
    k = 0
    while k < min(len(pu), len(pv)) and pu[k] == pv[k]:
        k += 1
    on = set(pu[k - 1:]) | set(pv[k - 1:])
    cyc_edges = {tree.parent[x] for x in pu[k:]} | {tree.parent[x] for x in pv[k:]} | {e}
    df = g.dart_face
    start = df[2 * e]
    seen = {start}
    stack = [start]
    face_darts = g.faces
    while stack:
        f = stack.pop()
        for d in face_darts[f]:
            if d // 2 in cyc_edges:
                continue
            h = df[d ^ 1]
            if h not in seen:
                seen.add(h)
                stack.append(h)
    inside = set()
    for f in seen:
        inside.update(g.tail(d) for d in face_darts[f])
    inside -= on
    outside = set(range(g.n)) - inside - on
    return on, inside, outside


def brute_best(g, tree, w):
    total = sum(w)
    best = None
    for e in range(g.m):
        if e in tree.parent:
            continue
        on, a, b = flood_sides(g, tree, e)
        if max(sum(w[x] for x in a), sum(w[x] for x in b)) <= 2 * total / 3 + 1e-9:
            key = (len(on), e)
            best = key if best is None else min(best, key)
    return best


def check_sides(g, tree, cyc):
    on, a, b = flood_sides(g, tree, cyc.closing_edge)
    got_on = set(np.flatnonzero(cyc.side == 0).tolist())
    assert got_on == on
    assert {frozenset(cyc.inside), frozenset(cyc.outside)} == {frozenset(a), frozenset(b)}


def test_triangle_cycle_has_empty_sides(k3):
    tree = sssp(k3, 0)
    cyc = fundamental_cycle_separator(k3, tree, [1, 1, 1])
    assert sorted(cyc.cycle_order) == [0, 1, 2]
    assert cyc.inside == [] and cyc.outside == []


def test_grid_separator_balance():
    g = triangulate(generators.grid(5, 5))
    tree = sssp(g, 0)
    cyc = fundamental_cycle_separator(g, tree, [1.0] * g.n)
    assert len(cyc.inside) <= 16 and len(cyc.outside) <= 16
    check_sides(g, tree, cyc)
    assert (len(cyc.cycle_order), cyc.closing_edge) == brute_best(g, tree, [1.0] * g.n)


def test_octahedron_antipodal_weights(octahedron):
    g = octahedron
    tree = sssp(g, 0)
    w = [1.0 if v in (0, 3) else 0.0 for v in range(g.n)]
    cyc = fundamental_cycle_separator(g, tree, w)
    check_sides(g, tree, cyc)
    side = cyc.side
    assert side[0] == 0 or side[3] == 0 or side[0] != side[3]
    assert (len(cyc.cycle_order), cyc.closing_edge) == brute_best(g, tree, w)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(30, 120))
def test_random_separator_matches_brute_force(seed, n):
    g = generators.delaunay_like(n, "uniform", seed)
    tree = sssp(g, seed % n)
    rng = np.random.default_rng(seed)
    w = rng.integers(0, 3, size=g.n).astype(float)
    w[0] += 1
    cyc = fundamental_cycle_separator(g, tree, w)
    check_sides(g, tree, cyc)
    total = w.sum()
    assert w[cyc.inside].sum() <= 2 * total / 3 + 1e-9
    assert w[cyc.outside].sum() <= 2 * total / 3 + 1e-9
    assert (len(cyc.cycle_order), cyc.closing_edge) == brute_best(g, tree, list(w))


def test_zero_weight_rejected(k3):
    with pytest.raises(SeparatorError):
        fundamental_cycle_separator(k3, sssp(k3, 0), [0, 0, 0])


def test_face_restriction_without_candidates():
    g = triangulate(generators.grid(4, 4))
    ctx = SeparatorContext(g, sssp(g, 0))
    faces = np.zeros(len(g.faces), dtype=bool)
    faces[0] = True
    with pytest.raises(SeparatorError):
        separate(ctx, [1.0] * g.n, faces=faces)


def test_portals_mandatory_only_on_short_cycle(k3):
    tree = sssp(k3, 0)
    cyc = fundamental_cycle_separator(k3, tree, [1, 1, 1])
    seq = place_portals(cyc, 10.0)
    assert sorted(seq.portals) == [0, 1, 2]


def test_portals_on_long_path():
    path = list(range(11))
    cyc = SeparatorCycle(closing_edge=0, x=10, y=0, apex=0, path1=path, path2=[0],
                         cycle_order=path, inside_faces=np.zeros(0, bool),
                         side=np.zeros(11, int), root_dist={v: float(v) for v in path},
                         closing_weight=10.0)
    seq = place_portals(cyc, 2.5)
    assert seq.portals == [0, 3, 6, 9, 10]


def test_grid_portals_bound_and_cover():
    g = triangulate(generators.grid(8, 8))
    tree = sssp(g, 0)
    dhat = 2 * max(tree.dist)
    tau = 0.25 * dhat
    cyc = fundamental_cycle_separator(g, tree, [1.0] * g.n)
    seq = place_portals(cyc, tau)
    assert len(seq.portals) <= 2 / 0.25 + 4
    assert len(seq.portals) <= portal_bound(dhat, tau)
    assert tau_cover_violations(cyc, seq) == []


def test_cover_check_detects_gap():
    g = triangulate(generators.grid(8, 8))
    tree = sssp(g, 0)
    cyc = fundamental_cycle_separator(g, tree, [1.0] * g.n)
    seq = place_portals(cyc, 1.0)
    if len(cyc.cycle_order) > 4:
        seq.portals = [cyc.apex]
        assert tau_cover_violations(cyc, seq)
