"""Sparse covers built from a greedy net and balls around its centres."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .plane_graph import PlaneGraph, csr_matrix_of

GUARD = 1e-9


@dataclass
class SparseCover:
    clusters: List[np.ndarray]   # sorted vertex ids
    centers: List[int]
    delta: float
    beta: float
    home: np.ndarray             # vertex -> cluster index
    n: int

    @property
    def overlap(self) -> int:
        counts = np.zeros(self.n, dtype=np.int64)
        for c in self.clusters:
            counts[c] += 1
        return int(counts.max()) if self.n else 0

    @property
    def volume(self) -> int:
        return int(sum(len(c) for c in self.clusters))

    def member_sets(self) -> List[set]:
        return [set(c.tolist()) for c in self.clusters]


@dataclass
class CoverReport:
    diameter_ok: bool
    padding_ok: bool
    overlap: int
    volume_ratio: float
    max_diameter: float
    bad_clusters: List[int] = field(default_factory=list)
    bad_vertices: List[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.diameter_ok and self.padding_ok


def build_cover(g: PlaneGraph, delta: float, matrix=None) -> SparseCover:
    """Centres form a greedy delta/4 net in increasing id order and every
    vertex's home is the first centre within delta/4 of it.  A cluster is the
    union of the radius-delta/4 balls around the vertices it is home to, so
    padding holds with beta = 4.  Each member is within delta/4 of a homed
    vertex whose path to the centre stays inside its own ball, which keeps
    the induced diameter at most delta.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    mat = matrix if matrix is not None else csr_matrix_of(g)
    n = g.n
    home = np.full(n, -1, dtype=np.int64)
    centers: List[int] = []
    rad = delta / 4.0
    lim = rad * (1 + GUARD)
    for v in range(n):
        if home[v] != -1:
            continue
        d = dijkstra(mat, directed=False, indices=v, limit=lim)
        near = (d <= rad) & (home == -1)
        home[near] = len(centers)
        centers.append(v)
    clusters: List[np.ndarray] = []
    order = np.argsort(home, kind="stable")
    bounds = np.searchsorted(home[order], np.arange(len(centers) + 1))
    for idx in range(len(centers)):
        owned = order[bounds[idx]:bounds[idx + 1]]
        d = dijkstra(mat, directed=False, indices=owned, limit=lim, min_only=True)
        clusters.append(np.flatnonzero(d <= rad))
    return SparseCover(clusters, centers, float(delta), 4.0, home, n)


def induced_matrix(mat, vertices: np.ndarray):
    sub = mat[vertices][:, vertices]
    return sub.tocsr()


def check_cover(g: PlaneGraph, cover: SparseCover, matrix=None, sample: Optional[int] = None,
                seed: int = 0) -> CoverReport:
    """Exact check of cluster diameters and padding; above 2000 vertices
    (or with ``sample``) only a random subset of vertices is checked for padding."""
    mat = matrix if matrix is not None else csr_matrix_of(g)
    n = g.n
    bad_c = []
    max_diam = 0.0
    for i, c in enumerate(cover.clusters):
        if len(c) <= 1:
            continue
        d = dijkstra(induced_matrix(mat, c), directed=False)
        diam = float(d.max())
        max_diam = max(max_diam, diam)
        if diam > cover.delta * (1 + GUARD):
            bad_c.append(i)
    if sample is None and n > 2000:
        sample = 2000
    verts = np.arange(n)
    if sample is not None and sample < n:
        verts = np.sort(np.random.default_rng(seed).choice(n, sample, replace=False))
    bad_v = []
    radius = cover.delta / cover.beta
    for start in range(0, len(verts), 256):
        chunk = verts[start:start + 256]
        d = dijkstra(mat, directed=False, indices=chunk, limit=radius * (1 + GUARD))
        for row, v in zip(d, chunk):
            ball = np.flatnonzero(row <= radius)
            c = cover.clusters[cover.home[v]]
            if not np.isin(ball, c, assume_unique=True).all():
                bad_v.append(int(v))
    return CoverReport(not bad_c, not bad_v, cover.overlap, cover.volume / max(n, 1), max_diam,
                       bad_c, bad_v)
