"""Recursive separator decomposition into regions with few holes.

A region is a set of faces of the prepared (triangulated) graph ``H``.  Its
vertices are those incident to its faces; a hole is a connected group of
faces outside it.  Each split uses one fundamental cycle of a single global
shortest-path tree, so every region is an intersection of cycle sides.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .lca import LcaIndex
from .plane_graph import PlaneGraph, SsspResult, csr_matrix_of, sssp
from .separator import (PortalSequence, SeparatorContext, SeparatorCycle, place_portals,
                        portal_bound, separate, tau_cover_violations,
                        SeparatorError)

FILL_MODES = ("exact", "dense_portal")


@dataclass
class Region:
    id: int
    parent: int
    level: int
    depth: int
    faces: np.ndarray                 # bool per face of H
    marked: np.ndarray                # sorted vertex ids
    side: int = 0                     # +1 inside / -1 outside the parent's cycle, 0 at the root
    children: List[int] = field(default_factory=list)
    split_level: int = 0              # level at which this node was split, 0 for final leaves
    separator: Optional[SeparatorCycle] = None
    separator_portals: Optional[PortalSequence] = None
    holes: List[List[int]] = field(default_factory=list)   # boundary vertices per hole
    parental_hole: Optional[int] = None
    balance_mode: str = "marked"
    cover_violations: int = 0         # tau-cover failures of separator_portals

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def n_holes(self) -> int:
        return len(self.holes)


@dataclass
class DistMinor:
    terminals: List[int]
    vertices: List[int]
    edges: List[Tuple[int, int, float]]   # endpoints are host vertex ids

    def matrix(self, n: int) -> csr_matrix:
        return _edge_matrix(self.edges, n)


@dataclass
class FilledGraph:
    matrix: csr_matrix
    mode: str
    minor_vertices: int = 0


class DecompositionTree:
    def __init__(self, h: PlaneGraph, ctx: SeparatorContext, tau: float, dhat: float,
                 lambdas: Sequence[int]):
        self.h = h
        self.ctx = ctx
        self.tau = tau
        self.dhat = dhat
        self.lambdas = list(lambdas)
        self.nodes: List[Region] = []
        self.root = 0
        self.leaf_of = np.full(h.n, -1, dtype=np.int64)
        self.lca_index: Optional[LcaIndex] = None
        df = np.asarray(h.dart_face, dtype=np.int64)
        self.df0 = df[0::2]
        self.df1 = df[1::2]
        eu = np.asarray(h.eu, dtype=np.int64)
        ev = np.asarray(h.ev, dtype=np.int64)
        self.dart_tail = np.empty(2 * h.m, dtype=np.int64)
        self.dart_tail[0::2] = eu
        self.dart_tail[1::2] = ev
        self.dart_faces = df
        self.queryable = np.asarray(h.queryable, dtype=bool)

    # -- structure --------------------------------------------------------
    @property
    def levels(self) -> int:
        return len(self.lambdas)

    def node(self, i: int) -> Region:
        return self.nodes[i]

    def leaves(self) -> List[int]:
        return [r.id for r in self.nodes if r.is_leaf]

    def ancestors(self, i: int) -> List[int]:
        """Node ids from the root down to ``i`` inclusive."""
        out = []
        while i != -1:
            out.append(i)
            i = self.nodes[i].parent
        out.reverse()
        return out

    def lca(self, a: int, b: int) -> int:
        if self.lca_index is None:
            raise RuntimeError("tree not finalised")
        return self.lca_index.query(a, b)

    def child_toward(self, anc: int, node: int) -> int:
        path = self.ancestors(node)
        i = path.index(anc)
        return path[i + 1]

    def level_leaf(self, node: int, level: int) -> int:
        """Topmost node of ``level`` on the root path of ``node`` that is not split at that level."""
        for i in self.ancestors(node):
            r = self.nodes[i]
            if r.level == level and r.split_level != level:
                return i
        raise ValueError(f"no level-{level} leaf above node {node}")

    # -- geometry of face sets ------------------------------------------
    def vertex_mask(self, faces: np.ndarray) -> np.ndarray:
        m = np.zeros(self.h.n, dtype=bool)
        m[self.dart_tail[faces[self.dart_faces]]] = True
        return m

    def edge_mask(self, faces: np.ndarray) -> np.ndarray:
        return faces[self.df0] | faces[self.df1]

    def plus_faces(self, i: int) -> np.ndarray:
        """Faces of the closed side of the parent's cycle that contains node ``i``."""
        r = self.nodes[i]
        if r.parent == -1:
            return np.ones(len(self.h.faces), dtype=bool)
        cyc = self.nodes[r.parent].separator
        return cyc.inside_faces.copy() if r.side == 1 else ~cyc.inside_faces

    def portal_seq(self, i: int) -> Optional[PortalSequence]:
        """Portal sequence on the parental boundary of node ``i``."""
        p = self.nodes[i].parent
        return None if p == -1 else self.nodes[p].separator_portals

    def hole_components(self, faces: np.ndarray, within: Optional[np.ndarray] = None):
        """Edge-connected groups of faces outside ``faces`` (restricted to ``within``)."""
        comp_faces = ~faces if within is None else (within & ~faces)
        both = comp_faces[self.df0] & comp_faces[self.df1]
        nf = len(faces)
        a, b = self.df0[both], self.df1[both]
        adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(nf, nf))
        _, labels = connected_components(adj, directed=False)
        labels = np.where(comp_faces, labels, -1)
        ids = np.unique(labels[labels >= 0])
        return comp_faces, labels, ids

    def holes_of(self, faces: np.ndarray) -> Tuple[List[List[int]], np.ndarray, np.ndarray]:
        comp, labels, ids = self.hole_components(faces)
        vin = self.vertex_mask(faces)
        dart_lab = labels[self.dart_faces]
        sel = (dart_lab >= 0) & vin[self.dart_tail]
        holes = []
        for lab in ids:
            verts = np.unique(self.dart_tail[sel & (dart_lab == lab)])
            holes.append([int(v) for v in verts])
        return holes, labels, ids

    def portal_sets_above(self, i: int) -> List[int]:
        """Union of the portals of every proper ancestor's separator."""
        out = set()
        for a in self.ancestors(i)[:-1]:
            out.update(self.nodes[a].separator_portals.portals)
        return sorted(out)

    # -- statistics -------------------------------------------------------
    def stats(self) -> Dict[str, float]:
        leaves = [r for r in self.nodes if r.is_leaf]
        n_q = int(self.queryable.sum())
        bound_ok = all(len(r.separator_portals.portals) <= portal_bound(self.dhat, self.tau)
                       for r in self.nodes if r.separator_portals is not None)
        return {
            "nodes": len(self.nodes),
            "leaves": len(leaves),
            "depth": max(r.depth for r in self.nodes),
            "max_holes": max(r.n_holes for r in self.nodes),
            "max_leaf_marked": max(len(r.marked) for r in leaves),
            "min_leaf_marked": min(len(r.marked) for r in leaves),
            "marked_total": int(sum(len(r.marked) for r in leaves)),
            "queryable": n_q,
            "max_portals": max([len(r.separator_portals.portals) for r in self.nodes
                                if r.separator_portals is not None], default=0),
            "portal_bound_ok": bound_ok,
            "tau_cover_violations": int(sum(r.cover_violations for r in self.nodes)),
            "hole_balancing_splits": sum(1 for r in self.nodes if r.balance_mode == "holes"
                                         and not r.is_leaf),
            "levels": self.levels,
        }


def default_lambda(n: int, eps: float, c: float = 3, level: int = 1) -> int:
    """max(ceil(log^(level) n / eps^c), 16), with log^(j) the j-times iterated log2."""
    x = float(max(n, 2))
    for _ in range(level):
        x = math.log2(x) if x > 1 else 0.0
    return max(int(math.ceil(x / eps ** c)), 16)


def build_decomposition(h: PlaneGraph, lam, eps: float = 0.25, filling: str = "exact",
                        tau: Optional[float] = None, dhat: Optional[float] = None,
                        tree: Optional[SsspResult] = None, root: int = 0,
                        split: bool = True) -> DecompositionTree:
    """Split regions until every final leaf holds at most ``lam[-1]`` marked vertices.

    ``lam`` is an int (one level) or a decreasing list of per-level
    thresholds.  Regions reaching five holes switch to hole-balancing
    separators.  Non-root regions record their parent's portal sequence.
    """
    if filling not in FILL_MODES:
        raise ValueError(f"unknown filling mode {filling!r}")
    lambdas = [int(lam)] if np.isscalar(lam) else [int(x) for x in lam]
    if not lambdas or min(lambdas) < 1:
        raise ValueError("lambda must be positive")
    if not h.faces:
        h.trace_faces()
    n_marked = int(np.asarray(h.queryable, dtype=bool).sum())
    split = split and n_marked > min(lambdas)
    if tree is None and (split or dhat is None):
        tree = sssp(h, root)
    if dhat is None:
        dhat = 2.0 * max(tree.dist)
    if tau is None:
        tau = eps * dhat
    queryable = np.asarray(h.queryable, dtype=bool)
    nf = len(h.faces)
    ctx = _context_or_none(h, tree) if split else None
    dt = DecompositionTree(h, ctx, tau, dhat, lambdas)
    root_region = Region(0, -1, 1, 0, np.ones(nf, dtype=bool),
                         np.flatnonzero(queryable).astype(np.int64))
    dt.nodes.append(root_region)
    queue = deque([0])
    while queue:
        i = queue.popleft()
        r = dt.nodes[i]
        r.holes, labels, ids = dt.holes_of(r.faces)
        if r.parent != -1:
            other = ~dt.plus_faces(i)
            hit = np.unique(labels[other & (labels >= 0)])
            if len(hit):
                r.parental_hole = int(np.searchsorted(ids, hit[0]))
        if ctx is None:
            continue
        for lv in range(r.level, len(lambdas) + 1):
            if len(r.marked) > lambdas[lv - 1]:
                kids = _split(dt, r, lv)
                if kids:
                    queue.extend(kids)
                break
    for r in dt.nodes:
        if r.is_leaf:
            dt.leaf_of[r.marked] = r.id
    dt.lca_index = LcaIndex([r.parent for r in dt.nodes])
    return dt


def _context_or_none(h: PlaneGraph, tree: SsspResult) -> Optional[SeparatorContext]:
    if h.n <= 3:
        return None
    return SeparatorContext(h, tree)


def _split(dt: DecompositionTree, r: Region, level: int) -> List[int]:
    ctx = dt.ctx
    n = dt.h.n
    vmask = dt.vertex_mask(r.faces)
    if vmask.sum() <= 3:
        return []
    w = np.zeros(n, dtype=np.float64)
    if r.n_holes >= 5:
        r.balance_mode = "holes"
        for hole in r.holes:
            w[hole[0]] += 1.0
    else:
        w[r.marked] = 1.0
    try:
        cyc = separate(ctx, w, faces=r.faces)
    except SeparatorError:
        return []
    f1 = r.faces & cyc.inside_faces
    f2 = r.faces & ~cyc.inside_faces
    if not f1.any() or not f2.any():
        return []
    v1, v2 = dt.vertex_mask(f1), dt.vertex_mask(f2)
    side = cyc.side[r.marked]
    m1 = list(r.marked[side == 1])
    m2 = list(r.marked[side == -1])
    pos = {v: i for i, v in enumerate(cyc.cycle_order)}
    on = sorted((int(v) for v in r.marked[side == 0]), key=lambda v: pos[v])
    for j, v in enumerate(on):
        first, second = (m1, v1), (m2, v2)
        if j % 2 == 1:
            first, second = second, first
        (first if first[1][v] else second)[0].append(v)
    ps = place_portals(cyc, dt.tau)
    r.separator = cyc
    r.separator_portals = ps
    r.cover_violations = len(tau_cover_violations(cyc, ps))
    r.split_level = level
    kids = []
    for faces, marked, s in ((f1, m1, 1), (f2, m2, -1)):
        cid = len(dt.nodes)
        child = Region(cid, r.id, level, r.depth + 1, faces,
                       np.asarray(sorted(marked), dtype=np.int64), s)
        dt.nodes.append(child)
        r.children.append(cid)
        kids.append(cid)
    return kids


# -- filling ---------------------------------------------------------------------

def _edge_matrix(edges, n: int) -> csr_matrix:
    if not edges:
        return csr_matrix((n, n))
    a = np.asarray([e[0] for e in edges], dtype=np.int64)
    b = np.asarray([e[1] for e in edges], dtype=np.int64)
    w = np.asarray([e[2] for e in edges], dtype=np.float64)
    return _min_matrix(np.concatenate([a, b]), np.concatenate([b, a]), np.concatenate([w, w]), n)


def _min_matrix(rows, cols, vals, n: int) -> csr_matrix:
    """Symmetric CSR keeping the lightest entry per position (zeros stay edges)."""
    keep = rows != cols
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    if len(rows):
        order = np.lexsort((vals, cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        first = np.ones(len(rows), dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        rows, cols, vals = rows[first], cols[first], vals[first]
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


def combine(n: int, *mats: csr_matrix) -> csr_matrix:
    parts = [m.tocoo() for m in mats]
    rows = np.concatenate([p.row for p in parts]).astype(np.int64)
    cols = np.concatenate([p.col for p in parts]).astype(np.int64)
    vals = np.concatenate([p.data for p in parts]).astype(np.float64)
    return _min_matrix(rows, cols, vals, n)


def distance_preserving_minor(host: PlaneGraph, terminals: Sequence[int], edge_mask=None,
                              matrix: Optional[csr_matrix] = None,
                              require_common_face: bool = False) -> DistMinor:
    """Union of pairwise shortest paths between terminals with degree-2
    non-terminals spliced out.  Terminal distances are preserved exactly.

    Paths come from scipy's Dijkstra predecessors, which are deterministic
    for a given input.
    """
    terms = sorted(set(int(t) for t in terminals))
    if require_common_face:
        if not host.faces:
            host.trace_faces()
        ts = set(terms)
        if not any(ts <= set(f) for f in (host.face_vertices(i) for i in range(len(host.faces)))):
            raise ValueError("terminals do not lie on one face")
    if len(terms) <= 1:
        return DistMinor(terms, terms, [])
    mat = matrix if matrix is not None else csr_matrix_of(host, edge_mask)
    dist, pred = dijkstra(mat, directed=False, indices=terms, return_predecessors=True)
    used: Dict[Tuple[int, int], float] = {}
    tset = set(terms)
    for i, s in enumerate(terms):
        row = pred[i]
        for t in terms:
            if t <= s or not np.isfinite(dist[i, t]):
                continue
            x = t
            while x != s:
                p = int(row[x])
                key = (p, x) if p < x else (x, p)
                if key in used:
                    # shared suffix toward s is already present
                    x = p
                    continue
                used[key] = float(dist[i, x] - dist[i, p])
                x = p
    adj: Dict[int, Dict[int, float]] = {}
    for (a, b), w in used.items():
        adj.setdefault(a, {})[b] = w
        adj.setdefault(b, {})[a] = w
    keep = sorted(v for v in adj if v in tset or len(adj[v]) != 2)
    keep_set = set(keep)
    edges: Dict[Tuple[int, int], float] = {}
    for a in keep:
        for b0, w0 in adj[a].items():
            prev, cur, tot = a, b0, w0
            while cur not in keep_set:
                nxt = [y for y in adj[cur] if y != prev][0]
                tot += adj[cur][nxt]
                prev, cur = cur, nxt
            key = (a, cur) if a < cur else (cur, a)
            if a != cur and (key not in edges or tot < edges[key]):
                edges[key] = tot
    return DistMinor(terms, keep, [(a, b, w) for (a, b), w in sorted(edges.items())])


def boundary_net(dt: DecompositionTree, boundary: Sequence[int], host_matrix: csr_matrix,
                 spacing: float) -> List[int]:
    """Greedy net of boundary vertices (ascending id) with pairwise host distance > spacing."""
    remaining = sorted(boundary)
    alive = np.zeros(dt.h.n, dtype=bool)
    alive[remaining] = True
    net = []
    for v in remaining:
        if not alive[v]:
            continue
        net.append(v)
        d = dijkstra(host_matrix, directed=False, indices=v, limit=spacing * (1 + 1e-12))
        alive[np.isfinite(d)] = False
    return net


def dense_spacing(dt: DecompositionTree, eps: float) -> float:
    return eps * dt.dhat / max(math.log2(max(dt.h.n, 2)), 10.0)


def fill_region(dt: DecompositionTree, i: int, mode: str = "exact", eps: float = 0.25) -> FilledGraph:
    """The filled graph R+ of node ``i`` over H's vertex ids.

    exact: the closed side of the parent cycle containing the region.
    dense_portal: the region's own edges plus, for each group of side faces
    outside the region, a distance-preserving minor on a boundary net.
    """
    h = dt.h
    plus = dt.plus_faces(i)
    if mode == "exact":
        return FilledGraph(csr_matrix_of(h, dt.edge_mask(plus)), mode)
    if mode != "dense_portal":
        raise ValueError(f"unknown filling mode {mode!r}")
    r = dt.nodes[i]
    own = csr_matrix_of(h, dt.edge_mask(r.faces))
    comp, labels, ids = dt.hole_components(r.faces, within=plus)
    vin = dt.vertex_mask(r.faces)
    spacing = dense_spacing(dt, eps)
    mats = [own]
    minor_vertices = 0
    for lab in ids:
        hole_faces = labels == lab
        host = csr_matrix_of(h, dt.edge_mask(hole_faces))
        hv = dt.vertex_mask(hole_faces)
        boundary = np.flatnonzero(hv & vin)
        net = boundary_net(dt, boundary, host, spacing)
        # parental portals may lie on stretches of the cycle that bound only the hole
        sigma = dt.portal_seq(i).portals if r.parent != -1 else []
        net = sorted(set(net) | {p for p in sigma if hv[p]})
        minor = distance_preserving_minor(h, net, matrix=host)
        minor_vertices += len(minor.vertices)
        mats.append(minor.matrix(h.n))
    return FilledGraph(combine(h.n, *mats), mode, minor_vertices)
