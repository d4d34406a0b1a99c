import math

import pytest

from pado import generators
from pado.additive import OracleError
from pado.multiplicative import (MultOracle, additive_constant, build_multiplicative,
                                 contraction_mask, internal_eps, scale_indices)
from pado.verify import ExactOracle, audit_stretch
from conftest import path_of


@pytest.fixture(scope="module")
def small():
    g = generators.delaunay_like(150, "uniform", 3)
    return g, build_multiplicative(g, eps=0.2, check_covers=True)


def test_internal_eps_is_a_fixed_point():
    e, cb, cres = internal_eps(0.2)
    assert cres == 16 * cb + 2
    assert cb == additive_constant(e)
    assert math.isclose(e, 0.2 / (16 * additive_constant(e) + 2), rel_tol=1e-12)


def test_contraction_threshold():
    g = path_of([1.0, 4.0])
    eps_int = internal_eps(0.2)[0]
    assert contraction_mask(g.ew, 1.0, eps_int, g.n) == [False, False]
    r = g.n / eps_int
    assert contraction_mask(g.ew, r, eps_int, g.n) == [True, False]
    assert contraction_mask(g.ew, 4 * r, eps_int, g.n) == [True, True]


@pytest.mark.parametrize("d,expect", [(1.0, [0]), (5.0, [0, 1, 2]), (4.0, [0, 1, 2]),
                                      (3.99, [0, 1]), (1000.0, [7]), (100.0, [4, 5, 6])])
def test_scale_indices(d, expect):
    assert scale_indices(d, 1.0, 7) == expect


def test_scan_covers_estimator(small):
    _, mo = small
    for u, v in [(0, 5), (3, 77), (10, 149)]:
        est = mo.estimate_scale(u, v, "estimator")
        scan = mo.estimate_scale(u, v, "scan")
        assert set(est) <= set(scan)
        assert mo.query(u, v, "scan") <= mo.query(u, v, "estimator")


def test_identity_query(small):
    _, mo = small
    assert mo.query(4, 4) == 0.0


def test_adjacent_vertices(small):
    g, mo = small
    ex = ExactOracle(g)
    for e in range(0, g.m, 7):
        u, v = g.eu[e], g.ev[e]
        w = ex.distance(u, v)
        assert w - 1e-9 <= mo.query(u, v) <= 1.2 * w + 1e-9


def test_stretch_both_modes(small):
    g, mo = small
    pairs = generators.sample_pairs(g, 300, 1, "per-scale")
    ex = ExactOracle(g, "matrix")
    for mode in ("estimator", "scan"):
        rep = audit_stretch(lambda u, v: mo.query(u, v, mode), g, pairs, "multiplicative",
                            eps=0.2, exact=ex)
        assert rep.ok and not rep.lower_violations


def test_covers_and_accounting(small):
    g, mo = small
    st = mo.state["stats"]
    assert all(st["cover_ok"])
    assert st["edge_total"] <= st["edge_bound"]
    assert all(v <= 10 * g.n for v in st["volume"])
    assert st["max_bound_over_eps_r"] <= mo.state["c_rescale"] - 2


def test_scale_graph_dedup(small):
    _, mo = small
    ids = [sc["graph_id"] for sc in mo.state["scales"]]
    assert ids == sorted(ids)
    assert mo.state["stats"]["distinct_graphs"] == len(set(ids))


def test_round_trip(small):
    g, mo = small
    again = MultOracle.loads(mo.dumps())
    for u, v in generators.sample_pairs(g, 100, 2):
        assert again.query(u, v) == mo.query(u, v)
    assert mo.dumps() == build_multiplicative(g, eps=0.2, check_covers=True).dumps()


def test_scan_mode_blob_has_no_graph():
    g = generators.grid(6, 6, "uniform", 1)
    mo = build_multiplicative(g, eps=0.3, mode="scan")
    again = MultOracle.loads(mo.dumps())
    assert mo.state["graph"] is None
    with pytest.raises(OracleError):
        again.query(0, 35, "estimator")
    assert again.query(0, 35) == mo.query(0, 35)


def test_contracted_scales_stay_sound():
    # one huge edge makes the top scales contract the unit edges
    g = path_of([1.0] * 6 + [1e7] + [2.0] * 3)
    mo = build_multiplicative(g, eps=0.2)
    assert any(sc["n"] < g.n for sc in mo.state["scales"])
    pairs = [(u, v) for u in range(g.n) for v in range(g.n) if u != v]
    for mode in ("estimator", "scan"):
        rep = audit_stretch(lambda u, v: mo.query(u, v, mode), g, pairs, "multiplicative", eps=0.2)
        assert rep.ok


def test_bad_eps(k3):
    with pytest.raises(OracleError):
        build_multiplicative(k3, eps=0.0)
    with pytest.raises(OracleError):
        build_multiplicative(k3, eps=0.2, mode="guess")
