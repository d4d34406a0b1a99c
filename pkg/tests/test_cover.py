import numpy as np
import pytest

from pado import generators
from pado.cover import SparseCover, build_cover, check_cover
from pado.plane_graph import induced_subgraph, parse_pgrf, sssp
from conftest import path_of


def brute_cover_ok(g, cover):
    """Diameter and padding re-checked with the hand-written Dijkstra."""
    for cl in cover.clusters:
        sub, _ = induced_subgraph(g, cl) if len(cl) > 1 else (None, None)
        if sub is None:
            continue
        for s in range(sub.n):
            if max(sssp(sub, s).dist) > cover.delta + 1e-9:
                return False
    r = cover.delta / cover.beta
    for v in range(g.n):
        ball = {x for x, d in enumerate(sssp(g, v).dist) if d <= r}
        if not ball <= set(cover.clusters[cover.home[v]].tolist()):
            return False
    return True


def test_single_vertex():
    g = parse_pgrf("pgrf 1 0\nrot 0")
    c = build_cover(g, 1.0)
    assert [cl.tolist() for cl in c.clusters] == [[0]] and c.overlap == 1


def test_path_cover():
    g = path_of([1.0] * 10)
    c = build_cover(g, 4.0)
    rep = check_cover(g, c)
    assert rep.ok and rep.max_diameter <= 4
    assert brute_cover_ok(g, c)


def test_grid_cover():
    g = generators.grid(16, 16)
    c = build_cover(g, 8.0)
    rep = check_cover(g, c)
    assert rep.ok and rep.overlap < 10
    assert rep.volume_ratio <= 10
    assert brute_cover_ok(g, c)


def test_weighted_cover_matches_brute_check():
    g = generators.delaunay_like(150, "uniform", 4)
    for delta in (5.0, 20.0, 60.0):
        c = build_cover(g, delta)
        assert check_cover(g, c).ok and brute_cover_ok(g, c)


def test_truncated_cluster_detected():
    g = generators.grid(16, 16)
    c = build_cover(g, 8.0)
    victim = int(c.home[100])
    c.clusters[victim] = c.clusters[victim][c.clusters[victim] != 101]
    rep = check_cover(g, c)
    assert not rep.padding_ok and not rep.ok


def test_whole_graph_cover():
    g = generators.grid(5, 5)
    c = SparseCover([np.arange(25)], [0], 16.0, 4.0, np.zeros(25, dtype=np.int64), 25)
    rep = check_cover(g, c)
    assert rep.ok and rep.overlap == 1


def test_bad_delta():
    with pytest.raises(ValueError):
        build_cover(generators.grid(3, 3), 0.0)
