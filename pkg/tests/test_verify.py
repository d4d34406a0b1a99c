import numpy as np
import pytest

from pado import generators
from pado.additive import build_additive
from pado.verify import CSV_COLUMNS, ExactOracle, audit_patterns, audit_stretch, exact_distance


def test_identity_and_path(path_abc):
    ex = ExactOracle(path_abc)
    assert ex.distance(1, 1) == 0.0
    assert ex.distance(0, 2) == 3.0
    assert exact_distance(path_abc, 2, 0) == 3.0


def test_modes_agree():
    g = generators.delaunay_like(200, "uniform", 8)
    a, b = ExactOracle(g, "sssp"), ExactOracle(g, "matrix")
    rng = np.random.default_rng(1)
    for u, v in rng.integers(0, g.n, size=(10_000, 2)):
        assert a.distance(int(u), int(v)) == b.distance(int(u), int(v))


def test_matrix_mode_size_limit():
    with pytest.raises(ValueError):
        ExactOracle(generators.grid(50, 50), "matrix")


def test_exact_against_itself():
    g = generators.grid(6, 6)
    ex = ExactOracle(g)
    pairs = generators.sample_pairs(g, 100, 0)
    add = audit_stretch(ex.distance, g, pairs, "additive", bound=0.0)
    mul = audit_stretch(ex.distance, g, pairs, "multiplicative", eps=0.0)
    assert add.ok and add.max_err == 0.0
    assert mul.ok and mul.max_ratio == 1.0


def test_audit_catches_bad_answers():
    g = generators.grid(6, 6)
    ex = ExactOracle(g)
    pairs = generators.sample_pairs(g, 50, 0)
    low = audit_stretch(lambda u, v: ex.distance(u, v) - 0.5, g, pairs, "additive", bound=1.0)
    assert len(low.lower_violations) == 50 and not low.ok
    high = audit_stretch(lambda u, v: ex.distance(u, v) * 1.3, g, pairs, "multiplicative", eps=0.2)
    assert len(high.violations) == 50


def test_audit_argument_checks():
    g = generators.grid(3, 3)
    with pytest.raises(ValueError):
        audit_stretch(lambda u, v: 0, g, [(0, 1)], "additive")
    with pytest.raises(ValueError):
        audit_stretch(lambda u, v: 0, g, [(0, 1)], "multiplicative")
    with pytest.raises(ValueError):
        audit_stretch(lambda u, v: 0, g, [(0, 1)], "other", bound=1)


def test_csv_schema():
    g = generators.grid(4, 4)
    rep = audit_stretch(ExactOracle(g).distance, g, [(0, 15), (3, 3)], "additive", bound=1.0)
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].split(",")[:4] == ["0", "0", "15", "6.0"]
    assert len(lines) == 3


def test_grid_additive_audit_passes():
    g = generators.grid(16, 16)
    o = build_additive(g, eps=0.25, c=1)
    rep = audit_stretch(o.query, g, generators.sample_pairs(g, 300, 9), "additive", bound=o.bound)
    assert rep.ok and rep.max_err <= o.bound
    hist, edges = rep.histogram()
    assert hist.sum() == 300 and edges[-1] == o.bound


def test_pattern_audit_single_leaf(k3):
    rep = audit_patterns(build_additive(k3, eps=0.25))
    assert rep.regions == [] and rep.cap_ok and rep.band_ok and rep.composition_ok


@pytest.mark.parametrize("eps", [0.5, 0.25, 0.1])
def test_pattern_caps_on_grids(eps):
    o = build_additive(generators.grid(16, 16), eps=eps, c=1)
    rep = audit_patterns(o, check_composition=False)
    assert rep.cap_ok and rep.band_ok
    assert rep.to_csv().startswith("node,k,g,registry,cap")


def test_pattern_audit_needs_artifacts():
    from pado.additive import loads
    o = build_additive(generators.grid(16, 16), eps=0.25, c=1)
    with pytest.raises(ValueError):
        audit_patterns(loads(o.dumps()))
