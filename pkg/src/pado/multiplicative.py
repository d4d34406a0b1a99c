"""(1+eps) oracle from additive cluster oracles over distance scales.

Scale ``i`` serves distances near ``r_i = w_min * 2**i``.  Edges no heavier
than ``r_i * eps' / n`` are contracted, the contracted graph gets a sparse
cover with cluster diameter ``8 r_i``, and every cluster gets an additive
oracle built with the internal ``eps'``.  A query takes the best cluster
answer over a few scales, shifted up by ``eps' * r_i`` to undo contraction.
"""
from __future__ import annotations

import io
import math
import pickle
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .additive import (MAGIC, FORMAT_VERSION, AdditiveOracle, OracleError, build_additive,
                       space_report as additive_space)
from .cover import SparseCover, build_cover, check_cover
from .plane_graph import (INF, PlaneGraph, bidirectional_distance, contract_edges, csr_matrix_of,
                          induced_subgraph, is_connected, parse_pgrf, sssp, to_pgrf)

MODES = ("estimator", "scan")


def additive_constant(eps_int: float) -> float:
    """Upper bound on B / (eps_int * D_hat) for a cluster oracle built at ``eps_int``.

    Node slack is (4k^2 - 2k) delta + 2 tau with delta <= eps^3 D_hat,
    tau = eps D_hat and k <= 2/eps + 4; B doubles the worst node slack.
    """
    k = 2.0 / eps_int + 4.0
    return max(12.0, 2.0 * ((4 * k * k - 2 * k) * eps_int ** 2 + 2.0))


def internal_eps(eps: float, iterations: int = 50) -> Tuple[float, float, float]:
    """(eps', C_B, C_rescale) with eps' = eps / (16 C_B + 2), by fixed-point iteration.

    A cluster's D_hat is at most twice its diameter bound 8r, which gives the 16.
    """
    e = eps / 200.0
    for _ in range(iterations):
        cb = additive_constant(e)
        cres = 16.0 * cb + 2.0
        nxt = eps / cres
        if abs(nxt - e) <= 1e-15 * eps:
            e = nxt
            break
        e = nxt
    cb = additive_constant(e)
    cres = 16.0 * cb + 2.0
    return eps / cres, cb, cres


def contraction_mask(weights, r: float, eps_int: float, n: int) -> List[bool]:
    """Edges short enough to contract at scale ``r``: weight <= r * eps' / n."""
    thr = r * eps_int / n
    return [w <= thr for w in weights]


@dataclass
class ScaleGraph:
    i: int
    r: float
    graph: PlaneGraph
    rep: np.ndarray
    cover: SparseCover
    cluster_oracles: List[int]      # per cover cluster, index into the shared oracle list
    graph_id: int


class MultOracle:
    def __init__(self, state: dict, scales: Optional[List[ScaleGraph]] = None):
        self.state = state
        self.scales = scales
        self.oracles = [AdditiveOracle(s) for s in state["oracles"]]
        self._graph: Optional[PlaneGraph] = None
        if state.get("graph") is not None:
            self._graph = parse_pgrf(state["graph"])

    @property
    def eps(self) -> float:
        return self.state["eps"]

    @property
    def n_scales(self) -> int:
        return len(self.state["scales"])

    def attach_graph(self, g: PlaneGraph) -> None:
        """Swap in the graph the estimator runs on (a blob carries its own copy)."""
        self._graph = g

    def estimate_scale(self, u: int, v: int, mode: Optional[str] = None) -> List[int]:
        mode = mode or self.state["mode"]
        top = self.n_scales - 1
        if mode == "scan":
            return list(range(top + 1))
        if mode != "estimator":
            raise ValueError(f"unknown mode {mode!r}")
        if self._graph is None:
            raise OracleError("estimator mode needs attach_graph()")
        d = bidirectional_distance(self._graph, u, v)
        if d == INF:
            return []
        return scale_indices(d, self.state["w_min"], top)

    def scale_answer(self, j: int, u: int, v: int) -> float:
        """Best cluster answer at scale ``j`` (no shift), INF when no cluster holds both."""
        sc = self.state["scales"][j]
        a, b = sc["rep"][u], sc["rep"][v]
        best = INF
        for ci in dict.fromkeys((sc["home"][a], sc["home"][b])):
            oid = sc["clusters"][ci]
            local = self.state["members"][oid]
            la, lb = local.get(a), local.get(b)
            if la is None or lb is None:
                continue
            best = min(best, self.oracles[oid].query(la, lb))
        return best

    def query(self, u: int, v: int, mode: Optional[str] = None) -> float:
        if not (0 <= u < self.state["n"] and 0 <= v < self.state["n"]):
            raise OracleError("vertex out of range")
        if u == v:
            return 0.0
        best = INF
        for j in self.estimate_scale(u, v, mode):
            ans = self.scale_answer(j, u, v)
            if ans < INF:
                best = min(best, ans + self.state["eps_int"] * self.state["scales"][j]["r"])
        return best

    def dumps(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(FORMAT_VERSION.to_bytes(2, "little"))
        pickle.dump(self.state, buf, protocol=4)
        return buf.getvalue()

    @classmethod
    def loads(cls, blob: bytes) -> "MultOracle":
        if blob[:4] != MAGIC:
            raise OracleError("not an oracle blob")
        if int.from_bytes(blob[4:6], "little") != FORMAT_VERSION:
            raise OracleError("unsupported format version")
        state = pickle.loads(blob[6:])
        if state.get("kind") != "multiplicative":
            raise OracleError("blob does not hold a multiplicative oracle")
        return cls(state)


def scale_indices(d: float, w_min: float, top: int) -> List[int]:
    """{i0-2, i0-1, i0} clipped to [0, top], with r_{i0} <= d < 2 r_{i0}."""
    if d <= 0:
        return [0]
    i0 = int(math.floor(math.log2(d / w_min)))
    # guard against log rounding at exact powers of two
    while i0 + 1 <= top and w_min * 2.0 ** (i0 + 1) <= d:
        i0 += 1
    while i0 > 0 and w_min * 2.0 ** i0 > d:
        i0 -= 1
    return [j for j in (i0 - 2, i0 - 1, i0) if 0 <= j <= top] or [min(max(i0, 0), top)]


def build_multiplicative(g: PlaneGraph, eps: float = 0.2, mode: str = "estimator",
                         c: float = 3, levels: int = 1, filling: str = "exact",
                         check_covers: bool = False) -> MultOracle:
    if not 0 < eps < 1:
        raise OracleError("eps must lie in (0, 1)")
    if mode not in MODES:
        raise OracleError(f"unknown mode {mode!r}")
    if not g.faces:
        g.trace_faces()
    if not is_connected(g):
        raise OracleError("graph must be connected")
    eps_int, c_b, c_res = internal_eps(eps)
    positive = [w for w in g.ew if w > 0]
    w_min = min(positive) if positive else 1.0
    ecc = max(sssp(g, 0).dist)
    max_dist = max(2.0 * ecc, w_min)
    top = int(math.ceil(math.log2(max_dist / w_min)))
    n = g.n

    scales: List[ScaleGraph] = []
    state_scales: List[dict] = []
    oracle_states: List[dict] = []
    members: List[Dict[int, int]] = []
    dedup: Dict[Tuple[int, Tuple[int, ...]], int] = {}
    edge_counts: List[int] = []
    cover_reports = []
    max_bound_ratio = 0.0
    prev_key = None
    graph_id = -1
    h = rep = None
    for i in range(top + 1):
        r = w_min * 2.0 ** i
        mask = contraction_mask(g.ew, r, eps_int, n)
        key = tuple(e for e, m in enumerate(mask) if m)
        if key != prev_key:
            h, rep = contract_edges(g, mask)
            graph_id += 1
            prev_key = key
        edge_counts.append(h.m)
        mat = csr_matrix_of(h)
        cover = build_cover(h, 8 * r, matrix=mat)
        if check_covers:
            cover_reports.append(check_cover(h, cover, matrix=mat))
        ids = []
        for cl in cover.clusters:
            ck = (graph_id, tuple(int(x) for x in cl))
            oid = dedup.get(ck)
            if oid is None:
                sub, glob = induced_subgraph(h, cl)
                orc = build_additive(sub, eps=eps_int, c=c, levels=levels, filling=filling)
                oid = len(oracle_states)
                dedup[ck] = oid
                oracle_states.append(orc.state)
                members.append({v: li for li, v in enumerate(glob)})
                max_bound_ratio = max(max_bound_ratio, orc.bound / (eps_int * r))
                # D_hat of a cluster is at most 2 * 8r, so B <= C_B * eps' * 16r
                if orc.bound > (c_res - 2) * eps_int * r * (1 + 1e-9):
                    raise OracleError(f"cluster bound {orc.bound} exceeds its budget at scale {i}")
            ids.append(oid)
        scales.append(ScaleGraph(i, r, h, rep, cover, ids, graph_id))
        state_scales.append({"i": i, "r": r, "graph_id": graph_id, "rep": [int(x) for x in rep],
                             "home": [int(x) for x in cover.home], "clusters": ids,
                             "n": h.n, "m": h.m})

    stats = {
        "scales": top + 1, "distinct_graphs": graph_id + 1, "oracles": len(oracle_states),
        "edge_counts": edge_counts, "edge_total": int(sum(edge_counts)),
        "edge_bound": g.m * (math.log2(n * max(g.ew) / w_min / eps) + 1) if g.m else 0.0,
        "max_bound_over_eps_r": max_bound_ratio,
        "overlap": [sc.cover.overlap for sc in scales],
        "volume": [sc.cover.volume for sc in scales],
        "cover_ok": [rep_.ok for rep_ in cover_reports] if check_covers else None,
    }
    state = {"kind": "multiplicative", "n": n, "eps": eps, "eps_int": eps_int, "c_b": c_b,
             "c_rescale": c_res, "w_min": w_min, "mode": mode, "scales": state_scales,
             "oracles": oracle_states, "members": members, "stats": stats,
             "graph": to_pgrf(g) if mode == "estimator" else None}
    mo = MultOracle(state, scales)
    mo.cover_reports = cover_reports
    return mo


def query_multiplicative(oracle: MultOracle, u: int, v: int, mode: Optional[str] = None) -> float:
    return oracle.query(u, v, mode)


def space_report(oracle: MultOracle) -> Dict[str, int]:
    """Words in cluster oracles plus the per-scale representative and home maps."""
    rep = {"clusters": 0, "scale_maps": 0, "membership": 0}
    for o in oracle.oracles:
        rep["clusters"] += additive_space(o)["total"]
    for sc in oracle.state["scales"]:
        rep["scale_maps"] += len(sc["rep"]) + len(sc["home"]) + len(sc["clusters"])
    rep["membership"] = sum(2 * len(m) for m in oracle.state["members"])
    rep["total"] = sum(rep.values())
    return rep
