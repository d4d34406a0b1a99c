"""Additive-stretch distance oracle over a separator decomposition.

Build outline:

1. prepare ``H`` (subdivide long edges, triangulate) and decompose it;
2. encode every marked vertex of every non-root region against the
   portals on its parental boundary, in the region's filled graph;
3. per internal node, tabulate encoding distances between its children;
4. per (leaf, ancestor) pair, compose leaf patterns into ancestor patterns,
   and give every final leaf an exact table over its contracted graph.

Queries only touch the plain containers in ``AdditiveOracle.state`` so the
oracle pickles without the build-time graph objects.
"""
from __future__ import annotations

import io
import math
import pickle
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .decomposition import (DecompositionTree, build_decomposition, combine, default_lambda,
                            distance_preserving_minor, fill_region, _min_matrix)
from .lca import LcaIndex
from .patterns import (PatternRegistry, closest_pattern, decode_units, encode_matrix,
                       gap_bound, pattern_prefix)
from .plane_graph import (PlaneGraph, csr_matrix_of, is_connected, sssp, subdivide_long_edges,
                          triangulate)

MAGIC = b"PADO"
FORMAT_VERSION = 1


class OracleError(ValueError):
    pass


@dataclass
class AdditiveParams:
    eps: float
    c: float = 3
    levels: int = 1
    filling: str = "exact"
    t3_cap: int = 1_000_000
    root: int = 0
    lambdas: Optional[List[int]] = None


@dataclass
class BuildArtifacts:
    """Objects kept after a build for audits; never serialised."""
    g: PlaneGraph
    h: PlaneGraph
    tree: DecompositionTree
    registries: Dict[int, PatternRegistry] = field(default_factory=dict)
    induced: Dict[Tuple[int, int], List[List[int]]] = field(default_factory=dict)


def node_slack(k: int, delta: float, tau: float) -> float:
    return (4 * k * k - 2 * k) * delta + 2 * tau


def grid_delta(eps: float, dhat: float) -> float:
    """Largest power of two not above eps^3 * dhat."""
    x = eps ** 3 * dhat
    return 2.0 ** math.floor(math.log2(x))


class AdditiveOracle:
    def __init__(self, state: dict, artifacts: Optional[BuildArtifacts] = None):
        self.state = state
        self.artifacts = artifacts
        self._lca = LcaIndex([nd["parent"] for nd in state["nodes"]])
        self._first_index = [{f: i for i, f in enumerate(fs)} for fs in state["firsts"]]

    # -- parameters ---------------------------------------------------------
    @property
    def n(self) -> int:
        return self.state["n"]

    @property
    def bound(self) -> float:
        return self.state["bound"]

    @property
    def dhat(self) -> float:
        return self.state["dhat"]

    @property
    def delta(self) -> float:
        return self.state["delta"]

    @property
    def tau(self) -> float:
        return self.state["tau"]

    @property
    def eps(self) -> float:
        return self.state["params"]["eps"]

    # -- lookups ------------------------------------------------------------
    def _check_vertex(self, u: int) -> int:
        if not 0 <= u < self.n or self.state["leaf_of"][u] < 0:
            raise OracleError(f"vertex {u} is not queryable")
        return self.state["leaf_of"][u]

    def encoding_key(self, u: int, child: int) -> Tuple[int, int]:
        """(first units, pattern id) used for ``u`` at node ``child``."""
        st = self.state
        leaf = self._check_vertex(u)
        level = st["nodes"][child]["level"]
        lvl_leaf = st["level_leaf"][leaf][level - 1]
        if lvl_leaf != child:
            pair = st["t41"].get((lvl_leaf, child))
            if pair is not None:
                f0, p0 = st["t21"][lvl_leaf][u]
                dist, ind = pair["a"][p0]
                return f0 + dist, pair["b"][ind]
        if u not in st["t21"][child]:
            raise OracleError(f"vertex {u} is not below node {child}")
        return st["t21"][child][u]

    def encoding_id(self, u: int, child: int) -> int:
        first, pid = self.encoding_key(u, child)
        return self._first_index[child][first] * self.state["npat"][child] + pid

    def query(self, u: int, v: int) -> float:
        st = self.state
        lu, lv = self._check_vertex(u), self._check_vertex(v)
        if lu == lv:
            leaf = st["leaf"][lu]
            idx = leaf["index"]
            return float(leaf["apsp"][idx[u], idx[v]]) + 2 * self.eps * self.dhat
        a = self._lca.query(lu, lv)
        depth = st["nodes"][a]["depth"]
        r1 = st["paths"][lu][depth + 1]
        r2 = st["paths"][lv][depth + 1]
        e1, e2 = self.encoding_id(u, r1), self.encoding_id(v, r2)
        t3 = st["t3"][a]
        if r1 != st["nodes"][a]["children"][0]:
            e1, e2 = e2, e1
        i = _locate(t3["rows"], e1)
        j = _locate(t3["cols"], e2)
        return int(t3["vals"][i, j]) * self.delta + st["nodes"][a]["slack"]

    def direct_distance(self, u: int, v: int) -> Optional[float]:
        """Encoding distance from the children's own records, bypassing composition."""
        st = self.state
        lu, lv = self._check_vertex(u), self._check_vertex(v)
        if lu == lv:
            return None
        a = self._lca.query(lu, lv)
        depth = st["nodes"][a]["depth"]
        r1, r2 = st["paths"][lu][depth + 1], st["paths"][lv][depth + 1]
        d1 = self.decoded(r1, *st["t21"][r1][u])
        d2 = self.decoded(r2, *st["t21"][r2][v])
        return int((d1 + d2).min()) * self.delta

    def decoded(self, node: int, first: int, pid: int) -> np.ndarray:
        return decode_units(first, self.state["patterns"][node][pid])

    def lca_node(self, u: int, v: int) -> int:
        return self._lca.query(self._check_vertex(u), self._check_vertex(v))

    # -- serialisation ------------------------------------------------------
    def dumps(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(FORMAT_VERSION.to_bytes(2, "little"))
        pickle.dump(self.state, buf, protocol=4)
        return buf.getvalue()

    @classmethod
    def loads(cls, blob: bytes) -> "AdditiveOracle":
        if blob[:4] != MAGIC:
            raise OracleError("not an oracle blob")
        version = int.from_bytes(blob[4:6], "little")
        if version != FORMAT_VERSION:
            raise OracleError(f"unsupported format version {version}")
        state = pickle.loads(blob[6:])
        if state.get("kind") != "additive":
            raise OracleError("blob does not hold an additive oracle")
        return cls(state)


def _locate(keys: np.ndarray, key: int) -> int:
    i = int(np.searchsorted(keys, key))
    if i >= len(keys) or keys[i] != key:
        raise OracleError("encoding missing from the distance table")
    return i


# -- build -------------------------------------------------------------------------

def prepare(g: PlaneGraph, params: AdditiveParams):
    """Scale quantities plus the graph the decomposition runs on."""
    if not 0 < params.eps < 1:
        raise OracleError("eps must lie in (0, 1)")
    if params.levels < 1:
        raise OracleError("levels must be >= 1")
    if not g.faces:
        g.trace_faces()
    if not is_connected(g):
        raise OracleError("graph must be connected")
    root = params.root
    base = sssp(g, root)
    dhat = 2.0 * max(base.dist)
    if dhat <= 0:
        dhat = 1.0   # every distance is zero; any positive scale works
    eps = params.eps
    tau = eps * dhat
    delta = grid_delta(eps, dhat)
    nq = sum(1 for q in g.queryable if q)
    if params.lambdas:
        lambdas = [int(x) for x in params.lambdas]
    else:
        lambdas = [default_lambda(nq, eps, params.c, j) for j in range(1, params.levels + 1)]
    for j in range(1, len(lambdas)):
        lambdas[j] = min(lambdas[j], lambdas[j - 1])
    single = nq <= lambdas[-1]
    if single:
        h = g.copy()
    else:
        h, _ = subdivide_long_edges(g, tau, max_weight=dhat)
        h = triangulate(h)
    return h, dhat, tau, delta, lambdas, single


def build_additive(g: PlaneGraph, eps: float = 0.25, c: float = 3, levels: int = 1,
                   filling: str = "exact", **kw) -> AdditiveOracle:
    params = AdditiveParams(eps=eps, c=c, levels=levels, filling=filling, **kw)
    h, dhat, tau, delta, lambdas, single = prepare(g, params)
    tree = sssp(h, params.root) if not single else None
    dt = build_decomposition(h, lambdas, eps=eps, filling=filling, tau=tau, dhat=dhat,
                             tree=tree, root=params.root, split=not single)
    nodes = dt.nodes
    n_nodes = len(nodes)
    stats: Dict[str, object] = {"tree": dt.stats(), "single_leaf": single,
                                "h_vertices": h.n, "h_edges": h.m}

    # Step 2: encodings against the parental portals inside each filled graph
    registries: Dict[int, PatternRegistry] = {}
    t21: List[Dict[int, Tuple[int, int]]] = [dict() for _ in range(n_nodes)]
    threshold = tau
    g_cap = gap_bound(tau, threshold, delta)
    for r in nodes[1:]:
        sigma = dt.portal_seq(r.id).portals
        reg = PatternRegistry(len(sigma) - 1, delta, r.parent)
        registries[r.id] = reg
        if len(r.marked) == 0:
            continue
        filled = fill_region(dt, r.id, filling, eps)
        dist = dijkstra(filled.matrix, directed=False, indices=sigma)
        sub = dist[:, r.marked].T
        first, units = encode_matrix(sub, delta)
        rec = t21[r.id]
        for v, f, row in zip(r.marked.tolist(), first.tolist(), units.tolist()):
            rec[v] = (f, reg.add(row))
            reg.add_first(f)

    # Step 4(1): compose leaf patterns into ancestor patterns
    t41: Dict[Tuple[int, int], dict] = {}
    induced: Dict[Tuple[int, int], List[List[int]]] = {}
    comp = {"pairs": 0, "nested": 0, "direct": 0, "unreachable": 0,
            "max_induced_dev": 0, "max_dev_over_k": 0.0, "violations": 0,
            "max_closest_dev": 0, "checked": 0}
    for lvl in range(1, dt.levels + 1):
        for leaf in nodes[1:]:
            if leaf.level != lvl or leaf.split_level == lvl:
                continue
            for anc in dt.ancestors(leaf.id)[1:-1]:
                if nodes[anc].level != lvl:
                    continue
                comp["pairs"] += 1
                entry = _compose(dt, leaf.id, anc, registries, t21, delta, comp)
                if entry is not None:
                    induced[(leaf.id, anc)] = entry.pop("induced")
                    t41[(leaf.id, anc)] = entry
    stats["composition"] = comp

    firsts = [sorted(registries[i].first_values) if i in registries else [] for i in range(n_nodes)]
    npat = [len(registries[i]) if i in registries else 0 for i in range(n_nodes)]
    patterns = [list(registries[i].patterns) if i in registries else [] for i in range(n_nodes)]

    paths: Dict[int, List[int]] = {}
    level_leaf: Dict[int, List[int]] = {}
    for r in nodes:
        if r.is_leaf:
            paths[r.id] = dt.ancestors(r.id)
            ll = []
            for lvl in range(1, dt.levels + 1):
                try:
                    ll.append(dt.level_leaf(r.id, lvl))
                except ValueError:
                    ll.append(-1)
            level_leaf[r.id] = ll

    node_recs = []
    for r in nodes:
        k = len(r.separator_portals.portals) if r.separator_portals is not None else 0
        node_recs.append({"parent": r.parent, "depth": r.depth, "level": r.level,
                          "split_level": r.split_level, "children": list(r.children), "k": k,
                          "slack": node_slack(k, delta, tau) if k else 0.0})

    state = {
        "kind": "additive", "n": g.n, "params": asdict(params), "dhat": dhat, "tau": tau,
        "delta": delta, "lambdas": lambdas, "g_cap": g_cap,
        "leaf_of": [int(x) for x in dt.leaf_of[: g.n]],
        "nodes": node_recs, "paths": paths, "level_leaf": level_leaf,
        "t21": t21, "firsts": firsts, "npat": npat, "patterns": patterns, "t41": t41,
        "t3": {}, "leaf": {}, "stats": stats,
    }
    oracle = AdditiveOracle(state, BuildArtifacts(g, h, dt, registries, induced))

    # Step 3: encoding-distance tables at internal nodes
    t3_stats = {"full": 0, "reachable": 0, "entries": 0}
    for r in nodes:
        if r.is_leaf:
            continue
        c1, c2 = r.children
        state["t3"][r.id] = _t3_table(oracle, c1, c2, params.t3_cap, t3_stats)
    stats["t3"] = t3_stats

    # Step 4(2): exact tables over each final leaf's contracted graph
    leaf_sizes = []
    for r in nodes:
        if not r.is_leaf:
            continue
        mat, nverts = leaf_graph(dt, r.id)
        marked = r.marked
        if len(marked):
            apsp = dijkstra(mat, directed=False, indices=marked)[:, marked]
        else:
            apsp = np.zeros((0, 0))
        state["leaf"][r.id] = {"index": {int(v): i for i, v in enumerate(marked.tolist())},
                               "apsp": apsp}
        leaf_sizes.append(nverts)
    stats["leaf_graph_max_vertices"] = max(leaf_sizes) if leaf_sizes else 0

    max_slack = max((nd["slack"] for nd in node_recs), default=0.0)
    fill_slack = eps * dhat if (filling == "dense_portal" and not single) else 0.0
    state["leaf_slack"] = 12 * eps * dhat
    state["max_node_slack"] = max_slack
    state["fill_slack"] = fill_slack
    state["bound"] = max(12 * eps * dhat, 2 * max_slack) + fill_slack
    return oracle


def _compose(dt: DecompositionTree, leaf: int, anc: int, registries, t21, delta, comp) -> Optional[dict]:
    """T41 tables for the pair, or None when the pair answers from T21 directly."""
    h = dt.h
    plus_leaf = dt.plus_faces(leaf)
    plus_anc = dt.plus_faces(anc)
    if (plus_leaf & ~plus_anc).any():
        comp["direct"] += 1
        return None
    comp["nested"] += 1
    parent = dt.nodes[leaf].parent
    ring = dt.edge_mask(plus_anc & ~plus_leaf)
    ring[dt.nodes[parent].separator.edges(h, dt.ctx.tree)] = True
    mat = csr_matrix_of(h, ring)
    sig_leaf = dt.portal_seq(leaf).portals
    sig_anc = dt.portal_seq(anc).portals
    dist = dijkstra(mat, directed=False, indices=sig_leaf)
    pd_real = dist[:, sig_anc].T
    if not np.all(np.isfinite(pd_real)):
        comp["unreachable"] += 1
        return None
    first, units = encode_matrix(pd_real, delta)
    pd = np.cumsum(np.concatenate([first[:, None], units], axis=1), axis=1)
    reg_leaf, reg_anc = registries[leaf], registries[anc]
    if len(reg_leaf) == 0:
        return {"a": [], "b": [], "induced": []}
    pref = np.stack([pattern_prefix(p) for p in reg_leaf.patterns])
    vals = (pd[None, :, :] + pref[:, None, :]).min(axis=2)
    induced = np.diff(vals, axis=1)
    ind_index: Dict[Tuple[int, ...], int] = {}
    a_tab = []
    for pid in range(len(reg_leaf)):
        key = tuple(int(x) for x in induced[pid])
        if key not in ind_index:
            ind_index[key] = len(ind_index)
        a_tab.append((int(vals[pid, 0]), ind_index[key]))
    b_tab = [closest_pattern(reg_anc, list(key)) for key in ind_index]
    k = len(sig_anc)
    inv = list(ind_index)
    for u, (f0, p0) in t21[leaf].items():
        reg_anc.add_first(f0 + a_tab[p0][0])
        direct = np.asarray(reg_anc.patterns[t21[anc][u][1]], dtype=np.int64)
        ind = np.asarray(inv[a_tab[p0][1]], dtype=np.int64)
        chosen = np.asarray(reg_anc.patterns[b_tab[a_tab[p0][1]]], dtype=np.int64)
        dev = int(np.abs(ind - direct).max()) if len(direct) else 0
        comp["checked"] += 1
        comp["max_induced_dev"] = max(comp["max_induced_dev"], dev)
        comp["max_dev_over_k"] = max(comp["max_dev_over_k"], dev / k)
        if dev > k:
            comp["violations"] += 1
        cdev = int(np.abs(chosen - direct).max()) if len(direct) else 0
        comp["max_closest_dev"] = max(comp["max_closest_dev"], cdev)
    return {"a": a_tab, "b": b_tab, "induced": [list(x) for x in inv]}


def _t3_table(oracle: AdditiveOracle, c1: int, c2: int, cap: int, t3_stats) -> dict:
    st = oracle.state
    sizes = [len(st["firsts"][c]) * st["npat"][c] for c in (c1, c2)]
    nodes = oracle.artifacts.tree.nodes
    if sizes[0] * sizes[1] <= cap:
        rows = np.arange(sizes[0], dtype=np.int64)
        cols = np.arange(sizes[1], dtype=np.int64)
        t3_stats["full"] += 1
        full = True
    else:
        rows = np.unique([oracle.encoding_id(u, c1) for u in nodes[c1].marked.tolist()]).astype(np.int64)
        cols = np.unique([oracle.encoding_id(u, c2) for u in nodes[c2].marked.tolist()]).astype(np.int64)
        t3_stats["reachable"] += 1
        full = False
    d1 = _decode_ids(st, c1, rows)
    d2 = _decode_ids(st, c2, cols)
    vals = np.full((len(rows), len(cols)), np.iinfo(np.int64).max, dtype=np.int64)
    for i in range(d1.shape[1] if len(rows) else 0):
        np.minimum(vals, d1[:, i][:, None] + d2[:, i][None, :], out=vals)
    if vals.size and vals.max() < 2 ** 31 and vals.min() >= -2 ** 31:
        vals = vals.astype(np.int32)
    t3_stats["entries"] += int(vals.size)
    return {"rows": rows, "cols": cols, "vals": vals, "full": full}


def _decode_ids(st: dict, node: int, ids: np.ndarray) -> np.ndarray:
    npat = st["npat"][node]
    pats = st["patterns"][node]
    if len(ids) == 0 or npat == 0:
        return np.zeros((0, 1), dtype=np.int64)
    pref = np.stack([pattern_prefix(p) for p in pats])
    firsts = np.asarray(st["firsts"][node], dtype=np.int64)
    return firsts[ids // npat][:, None] + pref[ids % npat]


def leaf_graph(dt: DecompositionTree, leaf: int):
    """Contracted filled graph of a final leaf as a CSR matrix over H's ids.

    Unmarked boundary vertices move to their nearest ancestor portal
    (distance measured outside the leaf) and edges touching them are
    lengthened by the move, so no distance can shrink.  Everything outside
    the leaf is replaced by one distance-preserving minor on the portals.
    """
    h = dt.h
    n = h.n
    r = dt.nodes[leaf]
    inner = dt.edge_mask(r.faces)
    portals = dt.portal_sets_above(leaf)
    eu = np.asarray(h.eu, dtype=np.int64)
    ev = np.asarray(h.ev, dtype=np.int64)
    ew = np.asarray(h.ew, dtype=np.float64)
    if not portals:
        mat = csr_matrix_of(h, inner)
        return mat, int(dt.vertex_mask(r.faces).sum())
    outside = ~r.faces
    host = csr_matrix_of(h, dt.edge_mask(outside))
    vin = dt.vertex_mask(r.faces)
    boundary = vin & dt.vertex_mask(outside)
    marked = np.zeros(n, dtype=bool)
    marked[r.marked] = True
    contract = boundary & ~marked
    dist, _, src = dijkstra(host, directed=False, indices=portals, min_only=True,
                            return_predecessors=True)
    target = np.arange(n, dtype=np.int64)
    off = np.zeros(n, dtype=np.float64)
    idx = np.flatnonzero(contract & np.isfinite(dist))
    target[idx] = src[idx]
    off[idx] = dist[idx]
    a, b = target[eu[inner]], target[ev[inner]]
    w = ew[inner] + off[eu[inner]] + off[ev[inner]]
    own = _min_matrix(np.concatenate([a, b]), np.concatenate([b, a]), np.concatenate([w, w]), n)
    minor = distance_preserving_minor(h, portals, matrix=host)
    mat = combine(n, own, minor.matrix(n))
    verts = set(np.flatnonzero(vin & ~np.isin(np.arange(n), idx)).tolist())
    verts.update(minor.vertices)
    verts.update(int(x) for x in src[idx])
    return mat, len(verts)


def query_additive(oracle: AdditiveOracle, u: int, v: int) -> float:
    return oracle.query(u, v)


def query_encoding_id(oracle: AdditiveOracle, u: int, ancestor: int) -> int:
    """Encoding id of ``u`` at the child of ``ancestor`` on u's leaf path."""
    st = oracle.state
    leaf = oracle._check_vertex(u)
    path = st["paths"][leaf]
    if ancestor not in path or ancestor == leaf:
        raise OracleError(f"node {ancestor} is not a proper ancestor of u's leaf")
    child = path[path.index(ancestor) + 1]
    return oracle.encoding_id(u, child)


def space_report(oracle: AdditiveOracle) -> Dict[str, int]:
    """Machine words per table family, counted from stored elements."""
    st = oracle.state
    rep = {"t21": 0, "t22": 0, "patterns": 0, "t3": 0, "t41a": 0, "t41b": 0,
           "leaf": 0, "portals": 0, "tree": 0}
    for rec in st["t21"]:
        rep["t21"] += 3 * len(rec)
    for i, fs in enumerate(st["firsts"]):
        if st["npat"][i]:
            rep["t22"] += len(fs) + 1
        rep["patterns"] += sum(len(p) for p in st["patterns"][i])
    for t in st["t3"].values():
        rep["t3"] += int(t["vals"].size) + (0 if t["full"] else len(t["rows"]) + len(t["cols"]))
    for pair in st["t41"].values():
        rep["t41a"] += 2 * len(pair["a"])
        rep["t41b"] += len(pair["b"])
    for leaf in st["leaf"].values():
        rep["leaf"] += int(leaf["apsp"].size) + len(leaf["index"])
    for nd in st["nodes"]:
        rep["portals"] += nd["k"]
        rep["tree"] += 5
    rep["tree"] += len(st["leaf_of"])
    rep["total"] = sum(rep.values())
    return rep


def per_node_words(oracle: AdditiveOracle) -> float:
    """Mean T22 + T3 words per internal node."""
    st = oracle.state
    internal = [i for i, nd in enumerate(st["nodes"]) if nd["children"]]
    if not internal:
        return 0.0
    total = 0
    for i in internal:
        t = st["t3"][i]
        total += int(t["vals"].size) + (0 if t["full"] else len(t["rows"]) + len(t["cols"]))
        for c in st["nodes"][i]["children"]:
            total += len(st["firsts"][c]) + 1
    return total / len(internal)


def dumps(oracle: AdditiveOracle) -> bytes:
    return oracle.dumps()


def loads(blob: bytes) -> AdditiveOracle:
    return AdditiveOracle.loads(blob)
