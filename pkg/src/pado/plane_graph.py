"""Plane graphs: weighted undirected graphs with a rotation system.

Vertices are ``0..n-1``.  Edge ``e`` joins ``eu[e]`` and ``ev[e]``.  A dart is
``2*e`` (``eu -> ev``) or ``2*e + 1`` (``ev -> eu``).  ``rotation[v]`` lists the
edges around ``v`` in counter-clockwise order.  Faces are traced by leaving a
vertex along the rotation successor of the edge we arrived on.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

INF = math.inf


class GraphFormatError(ValueError):
    """Raised for malformed or inconsistent PGRF input."""


@dataclass
class PlaneGraph:
    n: int
    eu: List[int]
    ev: List[int]
    ew: List[float]
    metric: List[bool]
    rotation: List[List[int]]
    queryable: List[bool] = field(default_factory=list)
    faces: List[List[int]] = field(default_factory=list)
    dart_face: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.queryable:
            self.queryable = [True] * self.n
        self._adj: Optional[List[List[Tuple[int, float, int]]]] = None
        self._pos: Optional[List[Dict[int, int]]] = None

    @property
    def m(self) -> int:
        return len(self.eu)

    def copy(self) -> "PlaneGraph":
        g = PlaneGraph(self.n, list(self.eu), list(self.ev), list(self.ew), list(self.metric),
                       [list(r) for r in self.rotation], list(self.queryable))
        g.faces = [list(f) for f in self.faces]
        g.dart_face = list(self.dart_face)
        return g

    # -- darts ---------------------------------------------------------------
    def tail(self, d: int) -> int:
        e = d >> 1
        return self.ev[e] if d & 1 else self.eu[e]

    def head(self, d: int) -> int:
        e = d >> 1
        return self.eu[e] if d & 1 else self.ev[e]

    def other(self, e: int, x: int) -> int:
        return self.ev[e] if self.eu[e] == x else self.eu[e]

    def positions(self) -> List[Dict[int, int]]:
        if self._pos is None:
            self._pos = [{e: i for i, e in enumerate(r)} for r in self.rotation]
        return self._pos

    def next_dart(self, d: int) -> int:
        """Dart following ``d`` around its face."""
        h = self.head(d)
        rot = self.rotation[h]
        e = rot[(self.positions()[h][d >> 1] + 1) % len(rot)]
        return 2 * e if self.eu[e] == h and self.ev[e] != h else 2 * e + 1

    def adjacency(self) -> List[List[Tuple[int, float, int]]]:
        if self._adj is None:
            adj: List[List[Tuple[int, float, int]]] = [[] for _ in range(self.n)]
            for e in range(self.m):
                u, v, w = self.eu[e], self.ev[e], self.ew[e]
                adj[u].append((v, w, e))
                if v != u:
                    adj[v].append((u, w, e))
            self._adj = adj
        return self._adj

    def invalidate(self) -> None:
        self._adj = None
        self._pos = None

    # -- faces ---------------------------------------------------------------
    def trace_faces(self) -> None:
        """Derive ``faces`` (lists of darts) and ``dart_face``."""
        self.invalidate()
        dart_face = [-1] * (2 * self.m)
        faces: List[List[int]] = []
        for start in range(2 * self.m):
            if dart_face[start] != -1:
                continue
            fid = len(faces)
            walk = []
            d = start
            while dart_face[d] == -1:
                dart_face[d] = fid
                walk.append(d)
                d = self.next_dart(d)
                if len(walk) > 2 * self.m:
                    raise GraphFormatError("face trace does not close")
            if d != start:
                raise GraphFormatError("face trace does not close")
            faces.append(walk)
        if self.m == 0:
            faces = [[]]
        self.faces = faces
        self.dart_face = dart_face

    def face_vertices(self, f: int) -> List[int]:
        return [self.tail(d) for d in self.faces[f]]

    def validate(self) -> None:
        """Check rotation consistency, connectivity and Euler's formula."""
        for e in range(self.m):
            if not (0 <= self.eu[e] < self.n and 0 <= self.ev[e] < self.n):
                raise GraphFormatError(f"edge {e} has an endpoint out of range")
            w = self.ew[e]
            if not (w >= 0 and math.isfinite(w)):
                raise GraphFormatError(f"edge {e} has invalid weight {w}")
        seen: Dict[Tuple[int, int], int] = {}
        for v, rot in enumerate(self.rotation):
            for e in rot:
                if not 0 <= e < self.m:
                    raise GraphFormatError(f"rotation of {v} names unknown edge {e}")
                seen[(v, e)] = seen.get((v, e), 0) + 1
        for e in range(self.m):
            u, v = self.eu[e], self.ev[e]
            if u == v:
                raise GraphFormatError(f"self-loop on edge {e}")
            if seen.get((u, e)) != 1 or seen.get((v, e)) != 1:
                raise GraphFormatError(f"edge {e} must appear once in each endpoint rotation")
        if sum(len(r) for r in self.rotation) != 2 * self.m:
            raise GraphFormatError("rotation lists contain foreign edges")
        if not is_connected(self):
            raise GraphFormatError("graph is disconnected")
        self.trace_faces()
        if self.n - self.m + len(self.faces) != 2:
            raise GraphFormatError(
                f"Euler check failed: V-E+F = {self.n}-{self.m}+{len(self.faces)}")

    def total_metric_weight(self) -> float:
        return sum(w for w, mt in zip(self.ew, self.metric) if mt)

    def add_vertex(self, queryable: bool = True) -> int:
        self.n += 1
        self.rotation.append([])
        self.queryable.append(queryable)
        self.invalidate()
        return self.n - 1

    def add_edge(self, u: int, v: int, w: float, metric: bool = True) -> int:
        """Append an edge without touching rotations."""
        self.eu.append(u)
        self.ev.append(v)
        self.ew.append(float(w))
        self.metric.append(metric)
        self.invalidate()
        return self.m - 1


def is_connected(g: PlaneGraph) -> bool:
    if g.n == 0:
        return True
    adj = g.adjacency()
    seen = [False] * g.n
    seen[0] = True
    stack = [0]
    while stack:
        x = stack.pop()
        for y, _, _ in adj[x]:
            if not seen[y]:
                seen[y] = True
                stack.append(y)
    return all(seen)


# -- PGRF I/O -----------------------------------------------------------------

def parse_pgrf(text: str) -> PlaneGraph:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line.split())
    if not lines or lines[0][0] != "pgrf" or len(lines[0]) != 3:
        raise GraphFormatError("missing 'pgrf <n> <m>' header")
    try:
        n, m = int(lines[0][1]), int(lines[0][2])
    except ValueError as exc:
        raise GraphFormatError("bad header counts") from exc
    body = lines[1:]
    if len(body) != n + m:
        raise GraphFormatError(f"expected {m} edge lines and {n} rotation lines")
    eu, ev, ew = [], [], []
    for tok in body[:m]:
        if tok[0] != "e" or len(tok) != 4:
            raise GraphFormatError(f"bad edge line: {' '.join(tok)}")
        try:
            eu.append(int(tok[1]))
            ev.append(int(tok[2]))
            ew.append(float(tok[3]))
        except ValueError as exc:
            raise GraphFormatError(f"bad edge line: {' '.join(tok)}") from exc
    rotation: List[Optional[List[int]]] = [None] * n
    for tok in body[m:]:
        if tok[0] != "rot" or len(tok) < 2:
            raise GraphFormatError(f"bad rotation line: {' '.join(tok)}")
        try:
            v = int(tok[1])
            edges = [int(t) for t in tok[2:]]
        except ValueError as exc:
            raise GraphFormatError(f"bad rotation line: {' '.join(tok)}") from exc
        if not 0 <= v < n or rotation[v] is not None:
            raise GraphFormatError(f"rotation for vertex {v} missing or repeated")
        rotation[v] = edges
    g = PlaneGraph(n, eu, ev, ew, [True] * m, [r or [] for r in rotation])
    g.validate()
    return g


def load(path: str) -> PlaneGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pgrf(fh.read())


def format_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def to_pgrf(g: PlaneGraph) -> str:
    out = [f"pgrf {g.n} {g.m}"]
    for e in range(g.m):
        out.append(f"e {g.eu[e]} {g.ev[e]} {format_weight(g.ew[e])}")
    for v in range(g.n):
        out.append(" ".join(["rot", str(v)] + [str(e) for e in g.rotation[v]]))
    return "\n".join(out) + "\n"


def save(g: PlaneGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_pgrf(g))


# -- embedding edits ----------------------------------------------------------

def _insert_after(g: PlaneGraph, v: int, after_edge: int, new_edges: Sequence[int]) -> None:
    rot = g.rotation[v]
    i = rot.index(after_edge)
    rot[i + 1:i + 1] = list(new_edges)


def triangulate(g: PlaneGraph) -> PlaneGraph:
    """Fan-triangulate every face from its lowest-id vertex.

    Fill edges are non-metric and weigh more than all metric edges together,
    so they never lie on a shortest path.  Faces that revisit a vertex are
    clipped ear by ear instead of fanned.
    """
    h = g.copy()
    if h.n < 3:
        h.trace_faces()
        return h
    if not h.faces:
        h.trace_faces()
    w_big = h.total_metric_weight() + 1.0
    for face in [list(f) for f in h.faces]:
        walk = list(face)
        verts = [h.tail(d) for d in walk]
        if len(walk) <= 3:
            continue
        start = verts.index(min(verts))
        walk = walk[start:] + walk[:start]
        if len(set(verts)) == len(verts):
            _fan(h, walk, w_big)
        else:
            _clip_ears(h, walk, w_big)
    h.invalidate()
    h.trace_faces()
    return h


def _fan(h: PlaneGraph, walk: List[int], w_big: float) -> None:
    verts = [h.tail(d) for d in walk]
    L = len(walk)
    v0 = verts[0]
    chords = []
    for i in range(2, L - 1):
        f = h.add_edge(v0, verts[i], w_big, metric=False)
        chords.append(f)
        _insert_after(h, verts[i], walk[i - 1] >> 1, [f])
    _insert_after(h, v0, walk[L - 1] >> 1, list(reversed(chords)))


def _clip_ears(h: PlaneGraph, walk: List[int], w_big: float) -> None:
    while len(walk) > 3:
        L = len(walk)
        verts = [h.tail(d) for d in walk]
        for i in range(L):
            a, c = verts[i], verts[(i + 2) % L]
            if a != c:
                break
        else:
            raise GraphFormatError("face cannot be triangulated without new vertices")
        d_prev = walk[(i - 1) % L]
        d_mid = walk[(i + 1) % L]
        f = h.add_edge(a, c, w_big, metric=False)
        _insert_after(h, c, d_mid >> 1, [f])
        _insert_after(h, a, d_prev >> 1, [f])
        new_dart = 2 * f
        # replace darts i and i+1 by the chord
        idx = [(i + j) % L for j in range(L)]
        rest = [walk[j] for j in idx[2:]]
        walk = [new_dart] + rest


def subdivide_long_edges(g: PlaneGraph, threshold: float,
                         max_weight: Optional[float] = None) -> Tuple[PlaneGraph, Dict[int, int]]:
    """Split metric edges heavier than ``threshold`` into equal pieces.

    Returns the new graph and a map from each new vertex to its host edge id
    in ``g``.  New vertices are not queryable.  Edges heavier than
    ``max_weight`` (if given) are left alone.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    h = g.copy()
    origin: Dict[int, int] = {}
    for e in range(g.m):
        w = g.ew[e]
        if not g.metric[e] or w <= threshold:
            continue
        if max_weight is not None and w > max_weight:
            continue
        pieces = math.ceil(w / threshold)
        if pieces <= 1:
            continue
        piece_w = w / pieces
        u, v = g.eu[e], g.ev[e]
        chain = [u]
        for _ in range(pieces - 1):
            x = h.add_vertex(queryable=False)
            origin[x] = e
            chain.append(x)
        chain.append(v)
        # edge e keeps its id and becomes the first piece u - chain[1]
        h.ev[e] = chain[1]
        h.ew[e] = piece_w
        prev_edge = e
        for j in range(1, pieces):
            a, b = chain[j], chain[j + 1]
            f = h.add_edge(a, b, piece_w, metric=True)
            h.rotation[a] = [prev_edge, f]
            prev_edge = f
        # v's rotation referenced e; now it must reference the last piece
        rot_v = h.rotation[v]
        rot_v[rot_v.index(e)] = prev_edge
    h.invalidate()
    h.trace_faces()
    return h, origin


# -- shortest paths -------------------------------------------------------------

@dataclass
class SsspResult:
    source: int
    dist: List[float]
    parent: List[int]   # parent edge id, -1 for the source / unreachable
    parent_vertex: List[int]

    def path_to(self, v: int) -> List[int]:
        """Vertices on the tree path from the source to ``v``."""
        if self.dist[v] == INF:
            return []
        out = [v]
        while self.parent_vertex[out[-1]] != -1:
            out.append(self.parent_vertex[out[-1]])
        out.reverse()
        return out


def sssp(g: PlaneGraph, source: int, edge_mask: Optional[Sequence[bool]] = None,
         vertex_mask: Optional[Sequence[bool]] = None) -> SsspResult:
    """Dijkstra from ``source``; among equal-distance predecessors the one with
    the smallest vertex id becomes the parent."""
    if not 0 <= source < g.n:
        raise IndexError(f"source {source} out of range")
    adj = g.adjacency()
    dist = [INF] * g.n
    par_e = [-1] * g.n
    par_v = [-1] * g.n
    done = [False] * g.n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, x = heapq.heappop(heap)
        if done[x]:
            continue
        done[x] = True
        for y, w, e in adj[x]:
            if done[y]:
                continue
            if edge_mask is not None and not edge_mask[e]:
                continue
            if vertex_mask is not None and not vertex_mask[y]:
                continue
            nd = d + w
            if nd < dist[y] or (nd == dist[y] and x < par_v[y]):
                if nd < dist[y]:
                    heapq.heappush(heap, (nd, y))
                dist[y] = nd
                par_e[y] = e
                par_v[y] = x
    return SsspResult(source, dist, par_e, par_v)


def perturbed(g: PlaneGraph) -> PlaneGraph:
    """Copy of ``g`` with edge ``i`` lengthened by ``i * eta`` so shortest paths
    become unique; ``eta`` is half the smallest positive weight gap over ``2m``."""
    ws = sorted(set(g.ew))
    gaps = [b - a for a, b in zip(ws, ws[1:]) if b > a]
    base = min(gaps) if gaps else (ws[0] if ws and ws[0] > 0 else 1.0)
    eta = base / 2.0 / max(1, 2 * g.m)
    h = g.copy()
    h.ew = [w + i * eta for i, w in enumerate(g.ew)]
    return h


def csr_matrix_of(g: PlaneGraph, edge_mask: Optional[np.ndarray] = None):
    """Symmetric scipy CSR matrix keeping the lightest of parallel edges."""
    from scipy.sparse import csr_matrix

    eu = np.asarray(g.eu, dtype=np.int64)
    ev = np.asarray(g.ev, dtype=np.int64)
    ew = np.asarray(g.ew, dtype=np.float64)
    if edge_mask is not None:
        sel = np.asarray(edge_mask, dtype=bool)
        eu, ev, ew = eu[sel], ev[sel], ew[sel]
    rows = np.concatenate([eu, ev])
    cols = np.concatenate([ev, eu])
    vals = np.concatenate([ew, ew])
    if len(rows):
        order = np.lexsort((vals, cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        keep = np.ones(len(rows), dtype=bool)
        keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    return csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))


def multi_source_distances(g: PlaneGraph, sources: Iterable[int],
                           edge_mask: Optional[np.ndarray] = None,
                           matrix=None) -> np.ndarray:
    """Distance rows (one per source) using scipy's Dijkstra."""
    from scipy.sparse.csgraph import dijkstra

    src = list(sources)
    if not src:
        return np.zeros((0, g.n))
    mat = matrix if matrix is not None else csr_matrix_of(g, edge_mask)
    return np.atleast_2d(dijkstra(mat, directed=False, indices=src))


# -- derived graphs -------------------------------------------------------------

def _rebuild(n: int, edges: List[Tuple[int, int, float, bool]], rotation: List[List[int]],
             queryable: List[bool]) -> PlaneGraph:
    """Drop self-loops and keep the lightest of parallel edges (smallest id on ties);
    removing edges keeps the embedding plane."""
    keep: Dict[Tuple[int, int], int] = {}
    for i, (u, v, w, _) in enumerate(edges):
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        j = keep.get(key)
        if j is None or w < edges[j][2]:
            keep[key] = i
    alive = sorted(keep.values())
    new_id = {old: k for k, old in enumerate(alive)}
    h = PlaneGraph(n, [edges[i][0] for i in alive], [edges[i][1] for i in alive],
                   [edges[i][2] for i in alive], [edges[i][3] for i in alive],
                   [[new_id[e] for e in rot if e in new_id] for rot in rotation], list(queryable))
    return h


def contract_edges(g: PlaneGraph, mask: Sequence[bool]) -> Tuple[PlaneGraph, np.ndarray]:
    """Contract every edge with ``mask[e]`` true, preserving the embedding.

    Returns the contracted graph and ``rep``: original vertex -> new vertex.
    New vertices are numbered by their smallest original member.
    """
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = [False] * g.m
    for e in range(g.m):
        if mask[e]:
            a, b = find(g.eu[e]), find(g.ev[e])
            if a != b:
                parent[max(a, b)] = min(a, b)
                tree[e] = True
    roots = [find(v) for v in range(g.n)]
    order = sorted(set(roots))
    comp_id = {r: i for i, r in enumerate(order)}
    rep = np.asarray([comp_id[r] for r in roots], dtype=np.int64)
    pos = g.positions()
    rotation: List[List[int]] = []
    queryable = [False] * len(order)
    for v in range(g.n):
        if g.queryable[v]:
            queryable[rep[v]] = True
    for r in order:
        # walk around the contracted tree, emitting the surviving edges in order
        out: List[int] = []
        rot = g.rotation[r]
        if rot:
            x, i = r, 0
            while True:
                e = g.rotation[x][i]
                if tree[e]:
                    y = g.other(e, x)
                    i = (pos[y][e] + 1) % len(g.rotation[y])
                    x = y
                else:
                    out.append(e)
                    i = (i + 1) % len(g.rotation[x])
                if x == r and i == 0:
                    break
        rotation.append(out)
    edges = [(int(rep[g.eu[e]]), int(rep[g.ev[e]]), g.ew[e], g.metric[e]) for e in range(g.m)]
    for e in range(g.m):
        if tree[e]:
            edges[e] = (0, 0, 0.0, True)     # marked as self-loop, dropped below
    h = _rebuild(len(order), edges, rotation, queryable)
    h.trace_faces()
    return h, rep


def induced_subgraph(g: PlaneGraph, vertices: Sequence[int]) -> Tuple[PlaneGraph, List[int]]:
    """Subgraph on ``vertices`` (local ids follow the given order) plus the local -> global map."""
    glob = [int(v) for v in vertices]
    local = {v: i for i, v in enumerate(glob)}
    keep = [e for e in range(g.m) if g.eu[e] in local and g.ev[e] in local]
    new_id = {e: i for i, e in enumerate(keep)}
    h = PlaneGraph(len(glob), [local[g.eu[e]] for e in keep], [local[g.ev[e]] for e in keep],
                   [g.ew[e] for e in keep], [g.metric[e] for e in keep],
                   [[new_id[e] for e in g.rotation[v] if e in new_id] for v in glob],
                   [g.queryable[v] for v in glob])
    h.trace_faces()
    return h, glob


def bidirectional_distance(g: PlaneGraph, s: int, t: int, limit: float = INF) -> float:
    """Exact s-t distance, searching from both ends; INF beyond ``limit``."""
    if s == t:
        return 0.0
    adj = g.adjacency()
    dist = ({s: 0.0}, {t: 0.0})
    done = (set(), set())
    heaps = ([(0.0, s)], [(0.0, t)])
    best = INF
    while heaps[0] and heaps[1]:
        if heaps[0][0][0] + heaps[1][0][0] >= min(best, limit):
            break
        side = 0 if heaps[0][0][0] <= heaps[1][0][0] else 1
        d, x = heapq.heappop(heaps[side])
        if x in done[side]:
            continue
        done[side].add(x)
        for y, w, _ in adj[x]:
            nd = d + w
            if nd < dist[side].get(y, INF):
                dist[side][y] = nd
                heapq.heappush(heaps[side], (nd, y))
            other = dist[1 - side].get(y)
            if other is not None and nd + other < best:
                best = nd + other
    return best if best <= limit else INF
