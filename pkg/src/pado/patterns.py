"""Integer patterns and distance encodings on a delta grid.

Every quantity is stored as an integer count of ``delta``; only decoding
multiplies back into real distances.  Keeping keys integral makes table
lookups exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .plane_graph import PlaneGraph, sssp


class PatternError(ValueError):
    pass


def round_up(a: float, delta: float) -> int:
    """Smallest integer ``q`` with ``q * delta >= a``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return int(math.ceil(a / delta))


@dataclass(frozen=True)
class Pattern:
    units: Tuple[int, ...]
    delta: float
    seq_ref: int = -1

    def values(self) -> np.ndarray:
        return np.asarray(self.units, dtype=np.float64) * self.delta


@dataclass(frozen=True)
class Encoding:
    first: int
    pattern_id: int


def encode_distances(dists: Sequence[float], delta: float) -> Tuple[int, Tuple[int, ...]]:
    """(first, pattern units) for the distance vector to a portal sequence."""
    if len(dists) == 0:
        raise PatternError("empty portal sequence")
    for d in dists:
        if not math.isfinite(d):
            raise PatternError("unreachable portal")
    first = round_up(dists[0], delta)
    units = tuple(round_up(dists[i + 1] - dists[i], delta) for i in range(len(dists) - 1))
    return first, units


def encode_matrix(dist: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised ``encode_distances`` over rows; ``dist`` is (vertices, k)."""
    if not np.all(np.isfinite(dist)):
        raise PatternError("unreachable portal")
    first = np.ceil(dist[:, 0] / delta).astype(np.int64)
    units = np.ceil(np.diff(dist, axis=1) / delta).astype(np.int64)
    return first, units


@dataclass
class PatternRegistry:
    """Deduplicated patterns with dense ids plus the set of first values."""

    length: int
    delta: float
    seq_ref: int = -1
    patterns: List[Tuple[int, ...]] = field(default_factory=list)
    index: Dict[Tuple[int, ...], int] = field(default_factory=dict)
    first_values: set = field(default_factory=set)
    _matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def add(self, units: Sequence[int]) -> int:
        key = tuple(int(x) for x in units)
        if len(key) != self.length:
            raise PatternError(f"pattern length {len(key)} != {self.length}")
        pid = self.index.get(key)
        if pid is None:
            pid = len(self.patterns)
            self.patterns.append(key)
            self.index[key] = pid
            self._matrix = None
        return pid

    def add_first(self, first: int) -> None:
        self.first_values.add(int(first))

    def register(self, first: int, units: Sequence[int]) -> Encoding:
        self.add_first(first)
        return Encoding(int(first), self.add(units))

    @property
    def firsts(self) -> List[int]:
        return sorted(self.first_values)

    def pattern(self, pid: int) -> Pattern:
        return Pattern(self.patterns[pid], self.delta, self.seq_ref)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            m = np.asarray(self.patterns, dtype=np.int64)
            self._matrix = m.reshape(len(self.patterns), self.length)
        return self._matrix

    def __len__(self) -> int:
        return len(self.patterns)


def compute_encoding(h: PlaneGraph, u: int, portals: Sequence[int], delta: float,
                     registry: Optional[PatternRegistry] = None, edge_mask=None) -> Encoding:
    """Encoding of ``u`` from one SSSP; the bulk build uses ``encode_matrix``."""
    res = sssp(h, u, edge_mask=edge_mask)
    d = [res.dist[p] for p in portals]
    first, units = encode_distances(d, delta)
    if registry is None:
        registry = PatternRegistry(len(portals) - 1, delta)
    return registry.register(first, units)


def decode_units(first: int, units: Sequence[int]) -> np.ndarray:
    out = np.empty(len(units) + 1, dtype=np.int64)
    out[0] = first
    if len(units):
        out[1:] = first + np.cumsum(np.asarray(units, dtype=np.int64))
    return out


def decode(first: int, units: Sequence[int], delta: float) -> np.ndarray:
    """Decoded distances to each portal; over-estimates by at most ``i*delta`` at portal i."""
    return decode_units(first, units).astype(np.float64) * delta


def encoding_distance(x: Sequence[float], y: Sequence[float]) -> float:
    """min_i x[i] + y[i] over two decoded vectors."""
    a = np.asarray(x)
    b = np.asarray(y)
    if a.shape != b.shape:
        raise PatternError("encoding lengths differ")
    return (a + b).min().item()


def pattern_prefix(units: Sequence[int]) -> np.ndarray:
    out = np.zeros(len(units) + 1, dtype=np.int64)
    if len(units):
        out[1:] = np.cumsum(np.asarray(units, dtype=np.int64))
    return out


def pattern_vertex_distance(units: Sequence[int], v_decoded: Sequence[float], delta: float = 1.0) -> float:
    """min_i v_decoded[i] + delta * (units[0] + ... + units[i-1])."""
    v = np.asarray(v_decoded, dtype=np.float64)
    if len(v) != len(units) + 1:
        raise PatternError("pattern and decoded vector lengths differ")
    return float((v + delta * pattern_prefix(units)).min())


def induced_units(units: Sequence[int], portal_decoded: np.ndarray) -> np.ndarray:
    """Induced pattern in delta units.

    ``portal_decoded`` is an integer array (k_target, k_source): row i is the
    decoded encoding of target portal i with respect to the source sequence.
    """
    pd = np.asarray(portal_decoded, dtype=np.int64)
    if pd.ndim != 2 or pd.shape[1] != len(units) + 1:
        raise PatternError("portal encodings do not match the pattern length")
    vals = (pd + pattern_prefix(units)[None, :]).min(axis=1)
    return np.diff(vals)


def induced_first(units: Sequence[int], portal_decoded: np.ndarray) -> int:
    pd = np.asarray(portal_decoded, dtype=np.int64)
    return int((pd[0] + pattern_prefix(units)).min())


def induced_pattern(units: Sequence[int], portal_decoded: Sequence[Sequence[float]],
                    delta: float = 1.0) -> np.ndarray:
    """Real-valued induced pattern from real decoded portal vectors."""
    pd = np.asarray(portal_decoded, dtype=np.float64)
    if pd.ndim != 2 or pd.shape[1] != len(units) + 1:
        raise PatternError("portal encodings do not match the pattern length")
    vals = (pd + delta * pattern_prefix(units)[None, :]).min(axis=1)
    return np.diff(vals)


def closest_pattern(registry: PatternRegistry, q: Sequence[float], in_units: bool = True) -> int:
    """Id of the registered pattern nearest to ``q`` in l-infinity; smallest id wins ties.

    ``q`` is in delta units unless ``in_units`` is False.
    """
    if len(registry) == 0:
        raise PatternError("empty registry")
    qq = np.asarray(q, dtype=np.float64)
    if not in_units:
        qq = qq / registry.delta
    if len(qq) != registry.length:
        raise PatternError("query length differs from registry pattern length")
    if registry.length == 0:
        return 0
    dist = np.abs(registry.matrix() - qq[None, :]).max(axis=1)
    return int(np.argmin(dist))


def sauer_shelah_cap(k: int, g: int) -> int:
    m = max(k - 1, 0) * (2 * g + 1)
    return max(m ** 3, 8)


def gap_bound(tau: float, threshold: float, delta: float) -> int:
    return int(math.ceil((tau + threshold) / delta))
