"""Ground-truth distances and audits of built oracles.

Audits recompute everything they compare against with the hand-written
Dijkstra in ``plane_graph`` rather than reusing construction results.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .plane_graph import INF, PlaneGraph, csr_matrix_of, sssp

GUARD = 1e-9
CSV_COLUMNS = ["pair", "u", "v", "d", "answer", "err", "bound", "pass"]


def _guard(x: float) -> float:
    return GUARD * max(1.0, abs(x))


class ExactOracle:
    """Exact distances, either per-source Dijkstra (cached) or one full matrix."""

    def __init__(self, g: PlaneGraph, mode: str = "sssp"):
        if mode not in ("sssp", "matrix"):
            raise ValueError(f"unknown mode {mode!r}")
        self.g = g
        self.mode = mode
        self._rows: Dict[int, List[float]] = {}
        self._matrix: Optional[np.ndarray] = None
        if mode == "matrix":
            if g.n > 2000:
                raise ValueError("matrix mode is limited to n <= 2000")
            self._matrix = dijkstra(csr_matrix_of(g), directed=False)

    def row(self, u: int) -> Sequence[float]:
        if self._matrix is not None:
            return self._matrix[u]
        r = self._rows.get(u)
        if r is None:
            r = sssp(self.g, u).dist
            self._rows[u] = r
        return r

    def distance(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        return float(self.row(u)[v])

    __call__ = distance


def exact_distance(g: PlaneGraph, u: int, v: int) -> float:
    if u == v:
        return 0.0
    return float(sssp(g, u).dist[v])


@dataclass
class AuditRow:
    pair: int
    u: int
    v: int
    d: float
    answer: float
    err: float
    bound: float
    passed: bool


@dataclass
class AuditReport:
    kind: str
    rows: List[AuditRow]
    bound: float

    @property
    def violations(self) -> List[AuditRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def lower_violations(self) -> List[AuditRow]:
        return [r for r in self.rows if r.answer < r.d - _guard(r.d)]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_err(self) -> float:
        return max((r.err for r in self.rows), default=0.0)

    @property
    def mean_err(self) -> float:
        return float(np.mean([r.err for r in self.rows])) if self.rows else 0.0

    @property
    def max_ratio(self) -> float:
        ratios = [r.answer / r.d for r in self.rows if r.d > 0]
        return max(ratios, default=1.0)

    def histogram(self, bins: int = 10) -> Tuple[np.ndarray, np.ndarray]:
        errs = np.asarray([r.err for r in self.rows], dtype=np.float64)
        top = self.bound if self.bound > 0 else max(self.max_err, 1.0)
        return np.histogram(errs, bins=bins, range=(0.0, top))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.pair, r.u, r.v, repr(r.d), repr(r.answer), repr(r.err), repr(r.bound),
                        int(r.passed)])
        return buf.getvalue()

    def summary(self) -> Dict[str, float]:
        return {"pairs": len(self.rows), "violations": len(self.violations),
                "lower_violations": len(self.lower_violations), "max_err": self.max_err,
                "mean_err": self.mean_err, "max_ratio": self.max_ratio, "bound": self.bound}


def audit_stretch(query: Callable[[int, int], float], g: PlaneGraph,
                  pairs: Iterable[Tuple[int, int]], kind: str = "additive",
                  bound: Optional[float] = None, eps: Optional[float] = None,
                  exact: Optional[ExactOracle] = None) -> AuditReport:
    """Check ``d <= answer <= d + bound`` (additive) or ``d <= answer <= (1+eps) d``.

    ``err`` is ``answer - d`` for additive audits and ``answer / d`` for
    multiplicative ones; ``bound`` in the rows follows the same convention.
    """
    if kind not in ("additive", "multiplicative"):
        raise ValueError(f"unknown audit kind {kind!r}")
    if kind == "additive" and bound is None:
        raise ValueError("additive audits need a bound")
    if kind == "multiplicative" and eps is None:
        raise ValueError("multiplicative audits need eps")
    exact = exact or ExactOracle(g)
    rows = []
    for i, (u, v) in enumerate(pairs):
        d = exact.distance(u, v)
        a = float(query(u, v))
        low_ok = a >= d - _guard(d)
        if kind == "additive":
            err = a - d
            b = float(bound)
            ok = low_ok and a <= d + b + _guard(d + b)
        else:
            err = a / d if d > 0 else (1.0 if a == 0 else INF)
            b = 1.0 + eps
            ok = low_ok and a <= b * d + _guard(b * d)
        rows.append(AuditRow(i, int(u), int(v), d, a, err, b, bool(ok)))
    rep_bound = float(bound) if kind == "additive" else 1.0 + eps
    return AuditReport(kind, rows, rep_bound)


# -- pattern audits ------------------------------------------------------------

@dataclass
class RegionAudit:
    node: int
    k: int
    g: int
    registry: int
    cap: int
    cap_ok: bool
    encodings: int
    band_violations: int

    @property
    def ok(self) -> bool:
        return self.cap_ok and self.band_violations == 0


@dataclass
class PatternAudit:
    regions: List[RegionAudit] = field(default_factory=list)
    composition_checked: int = 0
    composition_violations: int = 0
    composition_max_dev: int = 0          # in delta units
    composition_max_dev_over_k: float = 0.0
    composition_tau_violations: int = 0   # deviations beyond k + 2*tau/delta units

    @property
    def cap_ok(self) -> bool:
        return all(r.cap_ok for r in self.regions)

    @property
    def band_ok(self) -> bool:
        return all(r.band_violations == 0 for r in self.regions)

    @property
    def composition_ok(self) -> bool:
        return self.composition_violations == 0

    @property
    def max_registry(self) -> int:
        return max((r.registry for r in self.regions), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "k", "g", "registry", "cap", "cap_ok", "encodings", "band_violations"])
        for r in self.regions:
            w.writerow([r.node, r.k, r.g, r.registry, r.cap, int(r.cap_ok), r.encodings,
                        r.band_violations])
        return buf.getvalue()


def audit_patterns(oracle, check_band: bool = True, check_composition: bool = True) -> PatternAudit:
    """Registry caps, decode bands and composition deviations of an additive oracle.

    Distances inside each filled graph are recomputed here by per-portal
    Dijkstra on the filled graph's edges.
    """
    from .decomposition import fill_region
    from .patterns import sauer_shelah_cap

    art = oracle.artifacts
    if art is None:
        raise ValueError("pattern audits need a freshly built oracle")
    st = oracle.state
    dt = art.tree
    h = art.h
    delta = st["delta"]
    g_cap = st["g_cap"]
    filling = st["params"]["filling"]
    out = PatternAudit()
    portal_rows: Dict[int, Dict[int, List[float]]] = {}

    def rows_for(node: int) -> Dict[int, List[float]]:
        if node not in portal_rows:
            sigma = dt.portal_seq(node).portals
            if filling == "exact":
                mask = dt.edge_mask(dt.plus_faces(node))
                portal_rows[node] = {p: sssp(h, p, edge_mask=mask).dist for p in sigma}
            else:
                mat = fill_region(dt, node, filling, st["params"]["eps"]).matrix
                d = dijkstra(mat, directed=False, indices=sigma)
                portal_rows[node] = {p: list(d[i]) for i, p in enumerate(sigma)}
        return portal_rows[node]

    for nd_id, nd in enumerate(st["nodes"]):
        if nd["parent"] == -1:
            continue
        sigma = dt.portal_seq(nd_id).portals
        k = len(sigma)
        reg_size = st["npat"][nd_id]
        cap = sauer_shelah_cap(k, g_cap)
        bad = 0
        recs = st["t21"][nd_id]
        if check_band and recs:
            rows = rows_for(nd_id)
            for u, (first, pid) in recs.items():
                dec = oracle.decoded(nd_id, first, pid).astype(np.float64) * delta
                for i, p in enumerate(sigma):
                    d = rows[p][u]
                    # portal i (0-based) may be over-estimated by (i+1) delta
                    if dec[i] < d - _guard(d) or dec[i] > d + (i + 1) * delta + _guard(d):
                        bad += 1
        out.regions.append(RegionAudit(nd_id, k, g_cap, reg_size, cap, reg_size <= cap,
                                       len(recs), bad))

    if check_composition:
        tau = st["tau"]
        for (leaf, anc), pair in st["t41"].items():
            induced = art.induced[(leaf, anc)]
            sigma = dt.portal_seq(anc).portals
            k = len(sigma)
            rows = rows_for(anc)
            for u, (_, p0) in st["t21"][leaf].items():
                ind = np.asarray(induced[pair["a"][p0][1]], dtype=np.int64)
                direct = np.asarray([math.ceil((rows[sigma[i + 1]][u] - rows[sigma[i]][u]) / delta)
                                     for i in range(k - 1)], dtype=np.int64)
                dev = int(np.abs(ind - direct).max()) if k > 1 else 0
                out.composition_checked += 1
                out.composition_max_dev = max(out.composition_max_dev, dev)
                out.composition_max_dev_over_k = max(out.composition_max_dev_over_k, dev / k)
                if dev > k:
                    out.composition_violations += 1
                if dev > k + math.ceil(2 * tau / delta):
                    out.composition_tau_violations += 1
    return out
