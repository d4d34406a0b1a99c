"""Deterministic planar instance generators and query-pair sampling."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .plane_graph import INF, PlaneGraph, sssp

FAMILIES = ("grid", "delaunay_like", "path", "cycle")
WEIGHT_LAWS = ("unit", "uniform", "expint")


@dataclass
class GenSpec:
    family: str
    rows: int = 0
    cols: int = 0
    n: int = 0
    weights: str = "unit"
    lo: float = 1.0
    hi: float = 10.0
    seed: int = 0


class _Weights:
    def __init__(self, law: str, lo: float, hi: float, rng: random.Random):
        if law not in WEIGHT_LAWS:
            raise ValueError(f"unknown weight law {law!r}")
        if law == "uniform" and not 0 < lo <= hi:
            raise ValueError("uniform weights need 0 < lo <= hi")
        self.law, self.lo, self.hi, self.rng = law, lo, hi, rng

    def draw(self) -> float:
        if self.law == "unit":
            return 1.0
        if self.law == "uniform":
            return round(self.rng.uniform(self.lo, self.hi), 2)
        # exponential-ish integers: powers of two up to 2**hi
        return float(2 ** self.rng.randint(0, max(0, int(self.hi))))


def _from_rotation_lists(n: int, edges: List[Tuple[int, int, float]],
                         nbr_order: List[List[int]]) -> PlaneGraph:
    index: Dict[Tuple[int, int], int] = {}
    for e, (u, v, _) in enumerate(edges):
        index[(u, v)] = e
        index[(v, u)] = e
    rotation = [[index[(v, x)] for x in nbr_order[v]] for v in range(n)]
    g = PlaneGraph(n, [e[0] for e in edges], [e[1] for e in edges],
                   [e[2] for e in edges], [True] * len(edges), rotation)
    g.validate()
    return g


def grid(rows: int, cols: int, law: str = "unit", seed: int = 0,
         lo: float = 1.0, hi: float = 10.0) -> PlaneGraph:
    """``rows x cols`` grid; vertex ``r*cols + c``; rotation order N, E, S, W."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("grid needs at least two vertices")
    rng = random.Random(seed)
    wts = _Weights(law, lo, hi, rng)
    vid = lambda r, c: r * cols + c
    edges: List[Tuple[int, int, float]] = []
    for r in range(rows):
        for c in range(cols - 1):
            edges.append((vid(r, c), vid(r, c + 1), wts.draw()))
    for r in range(rows - 1):
        for c in range(cols):
            edges.append((vid(r, c), vid(r + 1, c), wts.draw()))
    order = []
    for r in range(rows):
        for c in range(cols):
            nb = []
            if r > 0:
                nb.append(vid(r - 1, c))
            if c < cols - 1:
                nb.append(vid(r, c + 1))
            if r < rows - 1:
                nb.append(vid(r + 1, c))
            if c > 0:
                nb.append(vid(r, c - 1))
            order.append(nb)
    return _from_rotation_lists(rows * cols, edges, order)


def path(n: int, law: str = "unit", seed: int = 0, lo: float = 1.0, hi: float = 10.0) -> PlaneGraph:
    if n < 2:
        raise ValueError("path needs at least two vertices")
    wts = _Weights(law, lo, hi, random.Random(seed))
    edges = [(i, i + 1, wts.draw()) for i in range(n - 1)]
    order = [[x for x in (i - 1, i + 1) if 0 <= x < n] for i in range(n)]
    return _from_rotation_lists(n, edges, order)


def cycle(n: int, law: str = "unit", seed: int = 0, lo: float = 1.0, hi: float = 10.0) -> PlaneGraph:
    if n < 3:
        raise ValueError("cycle needs at least three vertices")
    wts = _Weights(law, lo, hi, random.Random(seed))
    edges = [(i, (i + 1) % n, wts.draw()) for i in range(n)]
    order = [[(i + 1) % n, (i - 1) % n] for i in range(n)]
    return _from_rotation_lists(n, edges, order)


# -- Delaunay-like triangulation with exact integer predicates -----------------

def _orient(p, q, r) -> int:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _incircle(a, b, c, d) -> int:
    """Positive when ``d`` is strictly inside the circle through CCW ``a, b, c``."""
    rows = []
    for p in (a, b, c):
        dx, dy = p[0] - d[0], p[1] - d[1]
        rows.append((dx, dy, dx * dx + dy * dy))
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    return (a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0))


def _triangulate_points(pts: List[Tuple[int, int]]) -> Optional[Dict[Tuple[int, int], int]]:
    """Sweep-insert sorted points, then Lawson-flip to Delaunay.

    Returns a map from directed edge ``(a, b)`` to the third vertex of the CCW
    triangle on its left, or None on a degenerate configuration.
    """
    n = len(pts)
    if _orient(pts[0], pts[1], pts[2]) == 0:
        return None
    a, b, c = 0, 1, 2
    if _orient(pts[a], pts[b], pts[c]) < 0:
        b, c = c, b
    tri: Dict[Tuple[int, int], int] = {}

    def add(x, y, z):
        tri[(x, y)] = z
        tri[(y, z)] = x
        tri[(z, x)] = y

    def remove(x, y, z):
        for key in ((x, y), (y, z), (z, x)):
            tri.pop(key, None)

    add(a, b, c)
    hull = [a, b, c]  # CCW
    stack: List[Tuple[int, int]] = []
    for p in range(3, n):
        P = pts[p]
        h = len(hull)
        vis = [_orient(pts[hull[i]], pts[hull[(i + 1) % h]], P) < 0 for i in range(h)]
        if any(_orient(pts[hull[i]], pts[hull[(i + 1) % h]], P) == 0 for i in range(h)):
            return None
        if not any(vis):
            return None
        # visible edges form one contiguous run; rotate so it starts at index 0
        start = next(i for i in range(h) if vis[i] and not vis[i - 1])
        hull = hull[start:] + hull[:start]
        vis = vis[start:] + vis[:start]
        run = 0
        while run < h and vis[run]:
            run += 1
        for i in range(run):
            x, y = hull[i], hull[i + 1]
            add(x, p, y)
            stack.append((x, y))
        hull = [hull[0], p] + hull[run:]
        while stack:
            x, y = stack.pop()
            if (x, y) not in tri or (y, x) not in tri:
                continue
            z = tri[(x, y)]
            w = tri[(y, x)]
            if _incircle(pts[x], pts[y], pts[z], pts[w]) > 0:
                remove(x, y, z)
                remove(y, x, w)
                add(x, w, z)
                add(w, y, z)
                stack.extend([(x, w), (w, y), (y, z), (z, x)])
    return tri


def delaunay_like(n: int, law: str = "uniform", seed: int = 0,
                  lo: float = 1.0, hi: float = 10.0) -> PlaneGraph:
    """Delaunay triangulation of ``n`` seeded integer points.

    All predicates use exact integer arithmetic, so the output does not
    depend on the platform's floating point.
    """
    if n < 3:
        raise ValueError("delaunay_like needs at least three points")
    attempt = 0
    while True:
        rng = random.Random(f"{seed}:{attempt}")
        span = 1 << 20
        pts = set()
        while len(pts) < n:
            pts.add((rng.randrange(span), rng.randrange(span)))
        pts_sorted = sorted(pts)
        tri = _triangulate_points(pts_sorted)
        if tri is not None:
            break
        attempt += 1
    wrng = random.Random(seed)
    wts = _Weights(law, lo, hi, wrng)
    succ: List[Dict[int, int]] = [dict() for _ in range(n)]
    pairs = set()
    for (a, b), c in tri.items():
        succ[a][b] = c   # around a, c follows b counter-clockwise
        pairs.add((min(a, b), max(a, b)))
    edges = [(u, v, wts.draw()) for (u, v) in sorted(pairs)]
    order = []
    for v in range(n):
        nxt = succ[v]
        nbrs = set(nxt) | set(nxt.values())
        preds = set(nxt.values())
        starts = sorted(x for x in nbrs if x not in preds)
        cur = starts[0] if starts else min(nbrs)
        seq = [cur]
        while cur in nxt and nxt[cur] != seq[0]:
            cur = nxt[cur]
            seq.append(cur)
        order.append(seq)
    return _from_rotation_lists(n, edges, order)


def generate(spec: GenSpec) -> PlaneGraph:
    if spec.family == "grid":
        return grid(spec.rows, spec.cols, spec.weights, spec.seed, spec.lo, spec.hi)
    if spec.family == "delaunay_like":
        return delaunay_like(spec.n, spec.weights, spec.seed, spec.lo, spec.hi)
    if spec.family == "path":
        return path(spec.n, spec.weights, spec.seed, spec.lo, spec.hi)
    if spec.family == "cycle":
        return cycle(spec.n, spec.weights, spec.seed, spec.lo, spec.hi)
    raise ValueError(f"unknown family {spec.family!r}")


# -- query pairs ----------------------------------------------------------------

def sample_pairs(g: PlaneGraph, count: int, seed: int, law: str = "uniform") -> List[Tuple[int, int]]:
    """Deterministic distinct-endpoint pairs of queryable vertices.

    ``per-scale`` buckets candidate pairs by ``floor(log2 d)`` and draws from
    the buckets round robin so every distance scale is represented.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    verts = [v for v in range(g.n) if g.queryable[v]]
    if len(verts) < 2:
        raise ValueError("need two queryable vertices")
    rng = random.Random(seed)
    if law == "uniform":
        out = []
        for _ in range(count):
            u, v = rng.sample(verts, 2)
            out.append((u, v))
        return out
    if law != "per-scale":
        raise ValueError(f"unknown pair law {law!r}")
    n_src = min(len(verts), max(8, count // 8))
    sources = rng.sample(verts, n_src)
    buckets: Dict[int, List[Tuple[int, int]]] = {}
    for s in sources:
        dist = sssp(g, s).dist
        for v in verts:
            if v != s and dist[v] != INF and dist[v] > 0:
                b = math.floor(math.log2(dist[v]))
                buckets.setdefault(b, []).append((s, v))
    keys = sorted(buckets)
    for k in keys:
        rng.shuffle(buckets[k])
    out: List[Tuple[int, int]] = []
    cursor = {k: 0 for k in keys}
    while len(out) < count:
        progressed = False
        for k in keys:
            if len(out) >= count:
                break
            if cursor[k] < len(buckets[k]):
                out.append(buckets[k][cursor[k]])
                cursor[k] += 1
                progressed = True
        if not progressed:
            break
    while len(out) < count:
        out.append(tuple(rng.sample(verts, 2)))
    return out


def write_pairs(pairs, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in pairs:
            fh.write(f"q {u} {v}\n")


def read_pairs(path: str) -> List[Tuple[int, int]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            if line[0] != "q" or len(line) != 3:
                raise ValueError(f"bad pair line: {raw.strip()}")
            out.append((int(line[1]), int(line[2])))
    return out
