"""Signed weighted graphs, their Laplacians, and structural balance."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, DisconnectedGraph, EigensolverError


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Undirected graph with real edge weights of either sign.

    ``weights[i, j] == 0`` means there is no edge between ``i`` and ``j``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ConfigError("weights must be a non-empty square matrix")
        if not np.all(np.isfinite(w)):
            raise ConfigError("weights must be finite")
        if not np.array_equal(w, w.T):
            raise ConfigError("weights must be symmetric")
        if np.any(np.diag(w) != 0):
            raise ConfigError("weights must have zero diagonal")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, n, edges):
        """Build from ``(i, j, w)`` triples with 0-based vertices."""
        if int(n) != n or n < 1:
            raise ConfigError(f"vertex count must be a positive integer, got {n!r}")
        n = int(n)
        w = np.zeros((n, n))
        seen = set()
        for e in edges:
            if len(e) != 3:
                raise ConfigError(f"edge {e!r} must be [i, j, w]")
            i, j, val = e
            if int(i) != i or int(j) != j:
                raise ConfigError(f"edge {e!r} has non-integer endpoints")
            i, j = int(i), int(j)
            if not (0 <= i < j < n):
                raise ConfigError(f"edge {e!r} must satisfy 0 <= i < j < n")
            if (i, j) in seen:
                raise ConfigError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            w[i, j] = w[j, i] = float(val)
        return cls(w)

    @property
    def n(self):
        return self.weights.shape[0]

    def edges(self):
        """Nonzero edges as ``(i, j, w)`` with ``i < j``."""
        i, j = np.nonzero(np.triu(self.weights, 1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def neighbors(self, i):
        return [int(j) for j in np.flatnonzero(self.weights[i])]

    @cached_property
    def is_connected(self):
        if self.n == 1:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    @cached_property
    def laplacian(self):
        return laplacian(self)

    def to_json(self):
        return {"n": self.n, "edges": [[i, j, w] for i, j, w in self.edges()]}


def laplacian(g):
    """Off-diagonal entries are the weights; each diagonal makes its row sum zero."""
    L = np.array(g.weights, dtype=float)
    np.fill_diagonal(L, -L.sum(axis=1))
    L.setflags(write=False)
    return L


def l_norm(m):
    """Largest absolute off-diagonal row sum of a square matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("l_norm expects a square matrix")
    off = np.abs(m).sum(axis=1) - np.abs(np.diag(m))
    return float(off.max()) if off.size else 0.0


def spectral_bound(m):
    """Return ``(2 * l_norm(m), sorted eigenvalues)`` of a symmetric matrix.

    For a zero-row-sum matrix every eigenvalue has modulus at most the bound.
    """
    m = np.asarray(m, dtype=float)
    try:
        eigs = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc
    return 2.0 * l_norm(m), np.sort(eigs)


@dataclass(frozen=True)
class Balanced:
    """Harary bipartition: nonnegative weights inside parts, nonpositive across."""

    part1: tuple
    part2: tuple
    balanced: bool = field(default=True, init=False)

    def sides(self, n):
        """+1 for vertices in ``part1`` and -1 for those in ``part2``."""
        s = np.ones(n, dtype=int)
        s[list(self.part2)] = -1
        return s


@dataclass(frozen=True)
class Unbalanced:
    """``cycle`` lists vertices in order; it closes back to ``cycle[0]``."""

    cycle: tuple
    negative_edges: int
    balanced: bool = field(default=False, init=False)


def cycle_negative_count(g, cycle):
    k = len(cycle)
    count = 0
    for a in range(k):
        u, v = cycle[a], cycle[(a + 1) % k]
        if g.weights[u, v] == 0:
            raise ValueError(f"cycle uses missing edge ({u}, {v})")
        count += g.weights[u, v] < 0
    return int(count)


def harary_partition(g):
    """Two-colour the graph along nonzero edges or return an odd cycle.

    Positive edges keep the colour, negative edges flip it. The first
    inconsistent edge found by the breadth-first search closes a cycle with
    the tree paths to its endpoints; that cycle has an odd number of negative
    edges.
    """
    if not g.is_connected:
        raise DisconnectedGraph("balance check requires a connected graph")
    n = g.n
    colour = [-1] * n
    parent = [-1] * n
    depth = [0] * n
    colour[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            want = colour[u] ^ int(g.weights[u, v] < 0)
            if colour[v] == -1:
                colour[v] = want
                parent[v] = u
                depth[v] = depth[u] + 1
                queue.append(v)
            elif colour[v] != want:
                cycle = _tree_cycle(parent, depth, u, v)
                return Unbalanced(tuple(cycle), cycle_negative_count(g, cycle))
    part1 = tuple(i for i in range(n) if colour[i] == 0)
    part2 = tuple(i for i in range(n) if colour[i] == 1)
    return Balanced(part1, part2)


def _tree_cycle(parent, depth, u, v):
    left, right = [u], [v]
    a, b = u, v
    while depth[a] > depth[b]:
        a = parent[a]
        left.append(a)
    while depth[b] > depth[a]:
        b = parent[b]
        right.append(b)
    while a != b:
        a, b = parent[a], parent[b]
        left.append(a)
        right.append(b)
    # left ends at the common ancestor; right repeats it
    return _canonical_cycle(left + right[-2::-1])


def _canonical_cycle(cycle):
    """Rotate to start at the smallest vertex, walking towards its smaller neighbour."""
    k = cycle.index(min(cycle))
    c = cycle[k:] + cycle[:k]
    if len(c) > 2 and c[-1] < c[1]:
        c = [c[0]] + c[:0:-1]
    return c


def random_signed_graph(rng, n, low=-5, high=5, density=0.7, integer=True):
    """Random symmetric weight matrix; used by tests and acceptance runs."""
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                val = rng.integers(low, high + 1) if integer else rng.uniform(low, high)
                w[i, j] = w[j, i] = val
    return SignedGraph(w)


def planted_balanced_graph(rng, n, sides=None, low=0.5, high=2.0, density=1.0):
    """Connected balanced graph whose Harary bipartition is ``sides`` (+1/-1)."""
    if sides is None:
        sides = rng.choice([-1, 1], size=n)
    sides = np.asarray(sides)
    while True:
        w = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < density:
                    w[i, j] = w[j, i] = sides[i] * sides[j] * rng.uniform(low, high)
        g = SignedGraph(w)
        if g.is_connected:
            return g, sides
