"""Constant-time lowest common ancestor in a rooted tree."""
from __future__ import annotations

from typing import List, Sequence

import numpy as np


class LcaIndex:
    """Euler tour plus a sparse table of minimum-depth positions.

    ``parent[root] == -1``; exactly one root is allowed.
    """

    def __init__(self, parent: Sequence[int]):
        n = len(parent)
        if n == 0:
            raise ValueError("empty tree")
        children: List[List[int]] = [[] for _ in range(n)]
        roots = []
        for v, p in enumerate(parent):
            if p == -1:
                roots.append(v)
            elif not 0 <= p < n:
                raise ValueError(f"parent of {v} out of range")
            else:
                children[p].append(v)
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        self.n = n
        self.root = roots[0]
        depth = [0] * n
        first = [-1] * n
        euler: List[int] = []
        stack = [(self.root, 0)]
        while stack:
            v, i = stack.pop()
            if i == 0:
                first[v] = len(euler)
            euler.append(v)
            if i < len(children[v]):
                stack.append((v, i + 1))
                c = children[v][i]
                depth[c] = depth[v] + 1
                stack.append((c, 0))
        if min(first) < 0:
            raise ValueError("parent array contains a cycle")
        self.depth = depth
        self.first = first
        self.euler = np.asarray(euler, dtype=np.int64)
        d = np.asarray(depth, dtype=np.int64)[self.euler]
        m = len(euler)
        levels = [np.arange(m, dtype=np.int64)]
        j = 1
        while (1 << j) <= m:
            prev = levels[-1]
            half = 1 << (j - 1)
            a = prev[: m - (1 << j) + 1]
            b = prev[half: half + m - (1 << j) + 1]
            levels.append(np.where(d[a] <= d[b], a, b))
            j += 1
        self._table = levels
        self._edepth = d
        self._log = [0] * (m + 1)
        for i in range(2, m + 1):
            self._log[i] = self._log[i // 2] + 1

    def query(self, a: int, b: int) -> int:
        if not (0 <= a < self.n and 0 <= b < self.n):
            raise IndexError("node id out of range")
        i, j = self.first[a], self.first[b]
        if i > j:
            i, j = j, i
        k = self._log[j - i + 1]
        row = self._table[k]
        x, y = row[i], row[j - (1 << k) + 1]
        pos = x if self._edepth[x] <= self._edepth[y] else y
        return int(self.euler[pos])


def naive_lca(parent: Sequence[int], a: int, b: int) -> int:
    """Reference answer by walking upward; used by tests."""
    seen = set()
    x = a
    while x != -1:
        seen.add(x)
        x = parent[x]
    y = b
    while y not in seen:
        y = parent[y]
    return y
