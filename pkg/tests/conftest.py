import math

import pytest

from pado.plane_graph import PlaneGraph, parse_pgrf


def from_coords(points, edges, weights=None):
    """Plane graph from a straight-line drawing; rotations sorted by angle."""
    n = len(points)
    weights = weights or [1.0] * len(edges)
    around = [[] for _ in range(n)]
    for e, (u, v) in enumerate(edges):
        for a, b in ((u, v), (v, u)):
            ang = math.atan2(points[b][1] - points[a][1], points[b][0] - points[a][0])
            around[a].append((ang, e))
    rotation = [[e for _, e in sorted(r)] for r in around]
    g = PlaneGraph(n, [u for u, _ in edges], [v for _, v in edges], list(weights),
                   [True] * len(edges), rotation)
    g.validate()
    return g


def path_of(weights):
    n = len(weights) + 1
    lines = [f"pgrf {n} {len(weights)}"]
    lines += [f"e {i} {i + 1} {w}" for i, w in enumerate(weights)]
    for v in range(n):
        rot = [e for e in (v - 1, v) if 0 <= e < len(weights)]
        lines.append("rot " + " ".join(str(x) for x in [v] + rot))
    return parse_pgrf("\n".join(lines))


@pytest.fixture
def k3():
    return from_coords([(0, 0), (1, 0), (0, 1)], [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def octahedron():
    # outer triangle 0,1,2 and inner triangle 3,4,5; vertex i and i+3 are antipodal
    pts = []
    for k, ang in enumerate((90, 210, 330)):
        pts.append((2 * math.cos(math.radians(ang)), 2 * math.sin(math.radians(ang))))
    for ang in (270, 30, 150):
        pts.append((0.5 * math.cos(math.radians(ang)), 0.5 * math.sin(math.radians(ang))))
    edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3),
             (3, 1), (3, 2), (4, 2), (4, 0), (5, 0), (5, 1)]
    return from_coords(pts, edges)


@pytest.fixture
def path_abc():
    return path_of([1, 2])


CRITERIA = {}


def record(number, ok, detail):
    """Remember one acceptance line; printed in the terminal summary."""
    CRITERIA[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
