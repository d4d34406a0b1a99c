"""Balanced fundamental-cycle separators and portal placement.

All separators are fundamental cycles of one shortest-path tree ``T`` of a
triangulated plane graph.  The non-tree edges form a spanning tree of the
dual; rooting it at face 0 makes the "inside" of a closing edge ``e`` the
dual subtree below ``e``, so side tests reduce to Euler-tour intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .lca import LcaIndex
from .plane_graph import INF, PlaneGraph, SsspResult

GUARD = 1e-9


class SeparatorError(ValueError):
    pass


@dataclass
class SeparatorCycle:
    closing_edge: int
    x: int               # tail of the closing dart whose face is inside
    y: int
    apex: int            # where the two tree paths meet
    path1: List[int]     # apex ... x
    path2: List[int]     # apex ... y
    cycle_order: List[int]
    inside_faces: np.ndarray   # bool per face
    side: np.ndarray           # per vertex: +1 strictly inside, -1 strictly outside, 0 on cycle
    root_dist: dict = field(default_factory=dict)   # tree distance from the root, cycle vertices only
    closing_weight: float = 0.0

    @property
    def inside(self) -> List[int]:
        return [int(v) for v in np.flatnonzero(self.side == 1)]

    @property
    def outside(self) -> List[int]:
        return [int(v) for v in np.flatnonzero(self.side == -1)]

    def edges(self, g: PlaneGraph, tree: SsspResult) -> List[int]:
        out = [tree.parent[v] for v in self.path1[1:]]
        out += [tree.parent[v] for v in self.path2[1:]]
        out.append(self.closing_edge)
        return out


@dataclass
class PortalSequence:
    portals: List[int]
    tau: float
    cycle_ref: int       # closing edge id of the owning cycle
    positions: List[float] = field(default_factory=list)   # arc position along cycle_order
    length: float = 0.0  # total cycle length


class SeparatorContext:
    """Precomputed data shared by every separator of one decomposition."""

    def __init__(self, g: PlaneGraph, tree: SsspResult):
        if g.n < 3:
            raise SeparatorError("graph too small to separate")
        if not g.faces:
            g.trace_faces()
        self.g = g
        self.tree = tree
        n, m = g.n, g.m
        if any(tree.dist[v] == INF for v in range(n)):
            raise SeparatorError("tree does not span the graph")
        self.dist = np.asarray(tree.dist, dtype=np.float64)
        is_tree = np.zeros(m, dtype=bool)
        for v in range(n):
            if tree.parent[v] >= 0:
                is_tree[tree.parent[v]] = True
        self.is_tree = is_tree
        parent_vertex = list(tree.parent_vertex)
        self.lca = LcaIndex(parent_vertex)
        self.depth = np.asarray(self.lca.depth, dtype=np.int64)
        self.parent_vertex = parent_vertex

        nf = len(g.faces)
        self.n_faces = nf
        df = g.dart_face
        adj: List[List[tuple]] = [[] for _ in range(nf)]
        for e in range(m):
            if not is_tree[e]:
                f0, f1 = df[2 * e], df[2 * e + 1]
                adj[f0].append((f1, e))
                adj[f1].append((f0, e))
        # dual spanning tree by DFS from face 0
        fparent = [-1] * nf
        fpar_edge = [-1] * nf
        tin = [0] * nf
        tout = [0] * nf
        seen = [False] * nf
        seen[0] = True
        clock = 0
        stack = [(0, 0)]
        tin[0] = 0
        clock = 1
        while stack:
            f, i = stack.pop()
            if i < len(adj[f]):
                stack.append((f, i + 1))
                h, e = adj[f][i]
                if not seen[h]:
                    seen[h] = True
                    fparent[h] = f
                    fpar_edge[h] = e
                    tin[h] = clock
                    clock += 1
                    stack.append((h, 0))
            else:
                tout[f] = clock
        if not all(seen):
            raise SeparatorError("non-tree edges do not span the dual")
        self.tin = np.asarray(tin, dtype=np.int64)
        self.tout = np.asarray(tout, dtype=np.int64)
        self.face_parent = fparent
        # order faces by tin for subtree sums
        self.face_by_tin = np.argsort(self.tin)

        nt = [e for e in range(m) if not is_tree[e]]
        child = []
        xs, ys = [], []
        for e in nt:
            f0, f1 = df[2 * e], df[2 * e + 1]
            if fparent[f0] != -1 and fpar_edge[f0] == e:
                c, d = f0, 2 * e
            else:
                c, d = f1, 2 * e + 1
            child.append(c)
            xs.append(g.tail(d))
            ys.append(g.head(d))
        self.nt_edges = np.asarray(nt, dtype=np.int64)
        self.nt_child = np.asarray(child, dtype=np.int64)
        self.nt_x = np.asarray(xs, dtype=np.int64)
        self.nt_y = np.asarray(ys, dtype=np.int64)
        self.nt_apex = np.asarray([self.lca.query(int(a), int(b)) for a, b in zip(xs, ys)],
                                  dtype=np.int64)
        self.nt_count = (self.depth[self.nt_x] + self.depth[self.nt_y]
                         - 2 * self.depth[self.nt_apex] + 1)
        self.nt_order = np.lexsort((self.nt_edges, self.nt_count))
        # canonical face of each vertex: face of the first dart leaving it
        phi = np.zeros(n, dtype=np.int64)
        for v in range(n):
            e = g.rotation[v][0]
            d = 2 * e if g.eu[e] == v else 2 * e + 1
            phi[v] = df[d]
        self.phi = phi

    def subtree_sums(self, face_values: np.ndarray) -> np.ndarray:
        """Sum of ``face_values`` over each face's dual subtree."""
        sub = np.asarray(face_values, dtype=np.float64).copy()
        fp = self.face_parent
        for f in self.face_by_tin[::-1]:
            p = fp[f]
            if p != -1:
                sub[p] += sub[f]
        return sub

    # -- side tests ---------------------------------------------------------
    def inside_mask(self, child_face: int) -> np.ndarray:
        lo, hi = self.tin[child_face], self.tout[child_face]
        return (self.tin >= lo) & (self.tin < hi)

    def tree_path(self, a: int, apex: int) -> List[int]:
        """Vertices from ``apex`` down to ``a``."""
        out = [a]
        while out[-1] != apex:
            out.append(self.parent_vertex[out[-1]])
        out.reverse()
        return out

    def cycle(self, idx: int) -> SeparatorCycle:
        """Materialise the fundamental cycle of non-tree edge number ``idx``."""
        x, y, apex = int(self.nt_x[idx]), int(self.nt_y[idx]), int(self.nt_apex[idx])
        p1 = self.tree_path(x, apex)
        p2 = self.tree_path(y, apex)
        order = p1 + list(reversed(p2[1:]))
        inside = self.inside_mask(int(self.nt_child[idx]))
        side = np.where(inside[self.phi], 1, -1).astype(np.int8)
        side[np.asarray(order, dtype=np.int64)] = 0
        e = int(self.nt_edges[idx])
        rd = {v: float(self.dist[v]) for v in order}
        return SeparatorCycle(e, x, y, apex, p1, p2, order, inside, side, rd, float(self.g.ew[e]))

    def index_of_edge(self, e: int) -> int:
        hits = np.flatnonzero(self.nt_edges == e)
        if len(hits) == 0:
            raise SeparatorError(f"edge {e} is a tree edge")
        return int(hits[0])


def fundamental_cycle_separator(g: PlaneGraph, tree: SsspResult,
                                weights: Sequence[float]) -> SeparatorCycle:
    """One-off separator; decompositions reuse a context through ``separate``."""
    return separate(SeparatorContext(g, tree), weights)


def separate(ctx: SeparatorContext, weights: Sequence[float],
             faces: Optional[np.ndarray] = None) -> SeparatorCycle:
    """Balanced fundamental cycle: strictly inside and strictly outside each
    carry at most two thirds of the total weight.

    Among balanced cycles the one with fewest vertices wins, then the
    smallest closing-edge id.  With ``faces`` given, only cycles leaving
    some of those faces on each side are considered.
    """
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != ctx.g.n:
        raise ValueError("one weight per vertex required")
    total = float(w.sum())
    if total <= 0:
        raise SeparatorError("total weight must be positive")
    if len(ctx.nt_edges) == 0:
        raise SeparatorError("graph has no non-tree edge")
    cap = 2.0 * total / 3.0
    # face weights and dual-subtree sums (children have larger tin)
    fw = np.zeros(ctx.n_faces, dtype=np.float64)
    np.add.at(fw, ctx.phi, w)
    sub = ctx.subtree_sums(fw)
    # root-path prefix sums in T
    pref = np.zeros(ctx.g.n, dtype=np.float64)
    for v in np.argsort(ctx.depth, kind="stable"):
        p = ctx.parent_vertex[v]
        pref[v] = w[v] + (pref[p] if p != -1 else 0.0)
    approx = sub[ctx.nt_child]
    on = pref[ctx.nt_x] + pref[ctx.nt_y] - 2 * pref[ctx.nt_apex] + w[ctx.nt_apex]
    maybe = (approx - on <= cap + GUARD) & (total - on - approx <= cap + GUARD)
    allowed = np.ones(len(ctx.nt_edges), dtype=bool)
    if faces is not None:
        fsub = ctx.subtree_sums(faces.astype(np.float64))[ctx.nt_child]
        allowed = (fsub > 0) & (fsub < faces.sum())
        if not allowed.any():
            raise SeparatorError("no fundamental cycle splits the face set")
    maybe &= allowed
    best_idx, best_val = -1, math.inf
    for idx in ctx.nt_order:
        if not maybe[idx]:
            continue
        w_in, w_on = _exact_sides(ctx, int(idx), w)
        w_out = total - w_on - w_in
        worst = max(w_in, w_out)
        if worst <= cap + GUARD:
            return ctx.cycle(int(idx))
        if worst < best_val:
            best_idx, best_val = int(idx), worst
    if best_idx < 0:
        # no candidate survived screening; fall back to exact minimax
        for idx in ctx.nt_order:
            if not allowed[idx]:
                continue
            w_in, w_on = _exact_sides(ctx, int(idx), w)
            worst = max(w_in, total - w_on - w_in)
            if worst < best_val:
                best_idx, best_val = int(idx), worst
    return ctx.cycle(best_idx)


def _exact_sides(ctx: SeparatorContext, idx: int, w: np.ndarray):
    x, y, apex = int(ctx.nt_x[idx]), int(ctx.nt_y[idx]), int(ctx.nt_apex[idx])
    c = int(ctx.nt_child[idx])
    lo, hi = ctx.tin[c], ctx.tout[c]
    verts = ctx.tree_path(x, apex) + ctx.tree_path(y, apex)[1:]
    vv = np.asarray(verts, dtype=np.int64)
    tins = ctx.tin[ctx.phi[vv]]
    inside_on = (tins >= lo) & (tins < hi)
    fw_in = _subtree_weight(ctx, c, w)
    w_in = fw_in - float(w[vv][inside_on].sum())
    return w_in, float(w[vv].sum())


def _subtree_weight(ctx: SeparatorContext, c: int, w: np.ndarray) -> float:
    lo, hi = ctx.tin[c], ctx.tout[c]
    tins = ctx.tin[ctx.phi]
    return float(w[(tins >= lo) & (tins < hi)].sum())


# -- portals ------------------------------------------------------------------

def place_portals(cycle: SeparatorCycle, tau: float, dist=None,
                  closing_weight: Optional[float] = None) -> PortalSequence:
    """Greedy portals along both tree paths, walking away from the apex.

    A vertex becomes a portal once its distance from the previous portal
    exceeds ``tau``.  The apex and both closing-edge endpoints are always
    portals.  ``dist`` holds tree distances from the global root, so path
    distances are differences of ``dist``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if dist is None:
        dist = cycle.root_dist
    if closing_weight is None:
        closing_weight = cycle.closing_weight

    def greedy(path: List[int]) -> List[int]:
        chosen = [path[0]]
        last = dist[path[0]]
        for v in path[1:]:
            if dist[v] - last > tau:
                chosen.append(v)
                last = dist[v]
        if chosen[-1] != path[-1]:
            chosen.append(path[-1])
        return chosen

    a = greedy(cycle.path1)
    b = greedy(cycle.path2)
    seq = a + list(reversed(b[1:]))
    base = dist[cycle.apex]
    len1 = dist[cycle.x] - base
    len2 = dist[cycle.y] - base
    total = len1 + closing_weight + len2
    pos = {}
    for v in cycle.path1:
        pos[v] = dist[v] - base
    for v in cycle.path2[1:]:
        pos[v] = total - (dist[v] - base)
    return PortalSequence(seq, tau, cycle.closing_edge, [pos[v] for v in seq], total)


def cycle_positions(cycle: SeparatorCycle, dist=None, closing_weight: Optional[float] = None):
    if dist is None:
        dist = cycle.root_dist
    if closing_weight is None:
        closing_weight = cycle.closing_weight
    base = dist[cycle.apex]
    total = dist[cycle.x] - base + closing_weight + dist[cycle.y] - base
    pos = [dist[v] - base for v in cycle.path1]
    pos += [total - (dist[v] - base) for v in reversed(cycle.path2[1:])]
    return pos, total


def tau_cover_violations(cycle: SeparatorCycle, seq: PortalSequence, dist=None,
                         closing_weight: Optional[float] = None) -> List[int]:
    """Cycle vertices farther than ``tau`` (along the cycle) from both portals
    bounding their arc.  Empty means ``seq`` is a tau-cover."""
    pos, total = cycle_positions(cycle, dist, closing_weight)
    portal_set = set(seq.portals)
    bad = []
    order = cycle.cycle_order
    idx = [i for i, v in enumerate(order) if v in portal_set]
    L = len(order)
    for a_i, start in enumerate(idx):
        end = idx[(a_i + 1) % len(idx)]
        j = (start + 1) % L
        while j != end:
            before = (pos[j] - pos[start]) % total if total > 0 else 0.0
            after = (pos[end] - pos[j]) % total if total > 0 else 0.0
            if min(before, after) > seq.tau * (1 + GUARD):
                bad.append(order[j])
            j = (j + 1) % L
    return bad


def portal_bound(dhat: float, tau: float) -> float:
    return 2.0 * dhat / tau + 4
