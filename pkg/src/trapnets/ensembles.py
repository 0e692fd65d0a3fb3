"""Generators for the graph families driving the experiments.

Gasket graphs with exact triangular-lattice coordinates, random-conductance
paths on a symmetric integer window, uniform labeled trees via Prufer
decoding with a deterministic plane structure (root at label 1, children in
label order), depth-first coding functions, tilted trees, pointset-driven
surplus-edge attachment, and largest components of the near-critical
Erdos-Renyi graph.
"""

from __future__ import annotations

import heapq
import itertools
import math
from bisect import bisect_left
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidBounds,
    InvalidWindow,
    LevelTooLarge,
    TooLargeForEnumeration,
    TrapnetsError,
)
from .networks import ElectricalNetwork, build_network
from .rng import RngStream

_SQRT3_2 = math.sqrt(3.0) / 2.0


def _resolve_rng(rng_or_stream):
    if isinstance(rng_or_stream, RngStream):
        return rng_or_stream.generator()
    return rng_or_stream


# ---------------------------------------------------------------------------
# Sierpinski gasket graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GasketGraph:
    network: ElectricalNetwork
    coords: dict            # vertex id -> planar coordinates in the unit triangle
    lattice: dict           # vertex id -> integer (a, b) pair at scale 2^level
    corners: tuple          # ids of the three outer corners; corners[0] is the root
    level: int


def sierpinski(n: int) -> GasketGraph:
    """Level-n gasket graph with unit conductances, rooted at the origin corner.

    Vertices live on the triangular lattice spanned by (1, 0) and
    (1/2, sqrt(3)/2); edges join vertices a Euclidean distance 2^-n apart.
    """
    if not 0 <= n <= 9:
        raise LevelTooLarge("gasket levels above 9 are not supported")
    size = 2 ** n
    cells = [(0, 0)]
    s = size
    while s > 1:
        s //= 2
        cells = [c for (a, b) in cells for c in ((a, b), (a + s, b), (a, b + s))]
    verts = set()
    edge_pairs = set()
    for a, b in cells:
        c0, c1, c2 = (a, b), (a + 1, b), (a, b + 1)
        verts.update((c0, c1, c2))
        edge_pairs.update((tuple(sorted((c0, c1))), tuple(sorted((c0, c2))),
                           tuple(sorted((c1, c2)))))
    order = sorted(verts)
    ids = {p: i for i, p in enumerate(order)}
    edges = [(ids[p], ids[q], 1.0) for p, q in sorted(edge_pairs)]
    net = build_network(range(len(order)), edges, root=ids[(0, 0)])
    coords = {ids[(a, b)]: ((a + 0.5 * b) / size, _SQRT3_2 * b / size) for a, b in order}
    lattice = {ids[p]: p for p in order}
    corners = (ids[(0, 0)], ids[(size, 0)], ids[(0, size)])
    return GasketGraph(net, coords, lattice, corners, n)


# ---------------------------------------------------------------------------
# Random conductance path
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformConductanceLaw:
    """Conductances uniform on [c_min, c_max], rescaled so E[1/zeta] = 1."""

    c_min: float
    c_max: float

    def __post_init__(self):
        if not 0 < self.c_min <= self.c_max:
            raise InvalidBounds("need 0 < c_min <= c_max")

    @property
    def inverse_mean(self) -> float:
        if self.c_min == self.c_max:
            return 1.0 / self.c_min
        return math.log(self.c_max / self.c_min) / (self.c_max - self.c_min)

    def sample(self, rng, size=None):
        raw = rng.uniform(self.c_min, self.c_max, size)
        return raw * self.inverse_mean


@dataclass(frozen=True)
class ConductancePath:
    network: ElectricalNetwork
    coords: dict            # vertex id -> (float position,)
    window: int


def conductance_path(window: int, law: UniformConductanceLaw, rng_or_stream,
                     values: np.ndarray | None = None) -> ConductancePath:
    """Path on {-window, ..., window} with i.i.d. conductances, rooted at 0.

    ``values`` overrides sampling with a precomputed conductance array of
    length 2 * window (used to couple windows across scale levels).
    """
    if window < 1:
        raise TrapnetsError("window must be at least 1")
    rng = _resolve_rng(rng_or_stream)
    if values is None:
        values = law.sample(rng, size=2 * window)
    if len(values) != 2 * window:
        raise TrapnetsError("need one conductance per edge")
    ids = list(range(-window, window + 1))
    edges = [(i, i + 1, float(values[k])) for k, i in enumerate(range(-window, window))]
    net = build_network(ids, edges, root=0)
    coords = {i: (float(i),) for i in ids}
    return ConductancePath(net, coords, window)


# ---------------------------------------------------------------------------
# Labeled and plane trees
# ---------------------------------------------------------------------------

def prufer_decode(seq, m: int) -> list:
    """Edges of the labeled tree on [m] encoded by a Prufer sequence."""
    if m == 1:
        return []
    if m == 2:
        return [(1, 2)]
    deg = [1] * (m + 1)
    for v in seq:
        deg[v] += 1
    leaves = [v for v in range(1, m + 1) if deg[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        deg[v] -= 1
        if deg[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def uniform_cayley_tree(m: int, rng_or_stream) -> list:
    """Uniform labeled tree on [m] (edge list) via Prufer decoding."""
    if m < 1:
        raise TrapnetsError("tree size must be at least 1")
    rng = _resolve_rng(rng_or_stream)
    if m <= 2:
        return prufer_decode([], m)
    seq = [int(v) for v in rng.integers(1, m + 1, size=m - 2)]
    return prufer_decode(seq, m)


@dataclass(frozen=True)
class PlaneTree:
    """Rooted plane tree in depth-first order.

    ``parent[i]`` is the depth-first index of the parent of the i-th visited
    vertex (-1 for the root); ``labels[i]`` is its original label.
    """

    parent: tuple
    labels: tuple

    @property
    def size(self) -> int:
        return len(self.parent)

    def outdegrees(self) -> np.ndarray:
        k = np.zeros(self.size, dtype=int)
        for p in self.parent[1:]:
            k[p] += 1
        return k


def as_plane_tree(edges, m: int, root_label: int = 1) -> PlaneTree:
    """Plane structure of a labeled tree: root at ``root_label``, children by label."""
    adj: dict = {v: [] for v in range(1, m + 1)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for v in adj:
        adj[v].sort()
    parent = []
    labels = []
    index_of: dict = {}
    stack = [(root_label, -1)]
    while stack:
        label, par = stack.pop()
        index_of[label] = len(labels)
        labels.append(label)
        parent.append(par)
        children = [w for w in adj[label] if par == -1 or w != labels[par]]
        for w in reversed(children):
            stack.append((w, index_of[label]))
    if len(labels) != m:
        raise TrapnetsError("edge list is not a tree on [m]")
    return PlaneTree(tuple(parent), tuple(labels))


@dataclass(frozen=True)
class CodingData:
    """Depth-first coding functions of a plane tree at integer arguments."""

    height: np.ndarray        # H(i), distance of v_i to the root
    walk: np.ndarray          # X(i) for i = 0..m, the Lukasiewicz path
    outdegree_counts: dict    # k -> N^(k)(i) array over i = 0..m-1
    degree_counts: dict       # k -> D^(k)(i) array over i = 0..m-1
    area: int                 # a(T) = sum_{i=1}^{m-1} X(i)


def coding_functions(tree: PlaneTree) -> CodingData:
    m = tree.size
    k = tree.outdegrees()
    walk = np.zeros(m + 1, dtype=int)
    np.cumsum(k - 1, out=walk[1:])
    height = np.zeros(m, dtype=int)
    for i in range(1, m):
        height[i] = height[tree.parent[i]] + 1
    degree = k.copy()
    degree[1:] += 1
    outdeg_counts = {}
    for kk in np.unique(k):
        outdeg_counts[int(kk)] = np.cumsum(k == kk)
    deg_counts = {}
    for kk in np.unique(degree):
        deg_counts[int(kk)] = np.cumsum(degree == kk)
    return CodingData(height, walk, outdeg_counts, deg_counts, int(walk[1:m].sum()))


@lru_cache(maxsize=8)
def _enumerate_plane_trees(m: int):
    """All labeled trees on [m] as plane trees, with their a(T) values."""
    trees = []
    areas = []
    if m <= 2:
        seqs = [()]
    else:
        seqs = itertools.product(range(1, m + 1), repeat=m - 2)
    for seq in seqs:
        tree = as_plane_tree(prufer_decode(list(seq), m), m)
        trees.append(tree)
        areas.append(coding_functions(tree).area)
    return tuple(trees), np.array(areas)


def tilted_tree(m: int, p: float, rng_or_stream, method: str = "enumeration") -> PlaneTree:
    """Labeled tree reweighted by (1 - p)^(-a(T)).

    Enumeration is exact and limited to m <= 8; rejection proposes uniform
    trees and accepts with probability (1 - p)^(a_max - a(T)).
    """
    if not 0 < p < 1:
        raise TrapnetsError("p must lie in (0, 1)")
    if m < 1:
        raise TrapnetsError("tree size must be at least 1")
    rng = _resolve_rng(rng_or_stream)
    if method == "enumeration":
        if m > 8:
            raise TooLargeForEnumeration("enumeration supports m <= 8")
        trees, areas = _enumerate_plane_trees(m)
        weights = (1.0 - p) ** (-areas.astype(float))
        weights /= weights.sum()
        return trees[int(rng.choice(len(trees), p=weights))]
    if method == "rejection":
        if m <= 8:
            a_max = int(_enumerate_plane_trees(m)[1].max())
        else:
            a_max = (m - 1) * (m - 2) // 2
        while True:
            tree = as_plane_tree(uniform_cayley_tree(m, rng), m)
            a = coding_functions(tree).area
            if rng.random() < (1.0 - p) ** (a_max - a):
                return tree
    raise TrapnetsError(f"unknown method {method!r}")


def binomial_pointset_under_walk(walk: np.ndarray, p: float, rng_or_stream) -> tuple:
    """Lattice points strictly under the walk, each kept with probability p.

    Candidates are the (x, y) with integer x and 0 <= y < walk(x); there are
    a(T) of them for a Lukasiewicz path, and the result has no duplicates by
    construction.
    """
    if not 0 < p < 1:
        raise TrapnetsError("p must lie in (0, 1)")
    rng = _resolve_rng(rng_or_stream)
    points = []
    for x in range(len(walk) - 1):
        h = int(walk[x])
        if h <= 0:
            continue
        for y in np.flatnonzero(rng.random(h) < p):
            points.append((x, int(y)))
    return tuple(points)


def attachment_markers(walk: np.ndarray, points) -> list:
    """Map each kept point (x, y) to the marker pair (x, z) with z the first
    index at or after x where the walk comes back down to height y."""
    hits: dict = {}
    for z, h in enumerate(walk):
        hits.setdefault(int(h), []).append(z)
    markers = []
    for x, y in points:
        if not 0 <= y < walk[x]:
            raise TrapnetsError(f"point ({x}, {y}) is not strictly under the walk")
        row = hits[int(y)]
        markers.append((x, row[bisect_left(row, x)]))
    return markers


def surplus_attachment(tree: PlaneTree, p: float, rng_or_stream) -> ElectricalNetwork:
    """Attach surplus edges sampled from the pointset under the depth-first walk.

    Each marker joins the x-th vertex in depth-first order to the vertex at
    the walk's first return below it; a marked pair that already carries an
    edge ends up with conductance 2.
    """
    rng = _resolve_rng(rng_or_stream)
    walk = coding_functions(tree).walk
    points = binomial_pointset_under_walk(walk, p, rng)
    cond: dict = {}

    def bump(u, v):
        key = (u, v) if (v, u) not in cond else (v, u)
        cond[key] = cond.get(key, 0.0) + 1.0

    for i in range(1, tree.size):
        bump(tree.labels[tree.parent[i]], tree.labels[i])
    for x, z in attachment_markers(walk, points):
        bump(tree.labels[x], tree.labels[z])
    edge_list = [(u, v, w) for (u, v), w in cond.items()]
    return build_network(sorted(tree.labels), edge_list, root=tree.labels[0])


# ---------------------------------------------------------------------------
# Critical Erdos-Renyi largest component
# ---------------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]


def er_largest_component(n: int, lam: float, rng_or_stream) -> ElectricalNetwork:
    """Largest component of G(n, 1/n + lam * n^(-4/3)) with unit conductances.

    Vertices are labeled 1..n; ties between equal-sized components go to the
    one containing the smallest label, which also becomes the root.
    """
    if n < 2:
        raise TrapnetsError("need at least two vertices")
    p = 1.0 / n + lam * n ** (-4.0 / 3.0)
    if not 0.0 < p < 1.0:
        raise InvalidWindow(f"edge probability {p} outside (0, 1)")
    rng = _resolve_rng(rng_or_stream)
    total_pairs = n * (n - 1) // 2
    row_starts = np.concatenate(([0], np.cumsum(np.arange(n - 1, 0, -1))))
    log_q = math.log1p(-p)
    uf = _UnionFind(n)
    edges = []
    idx = -1
    while True:
        idx += 1 + int(math.log(1.0 - rng.random()) / log_q)
        if idx >= total_pairs:
            break
        i = int(np.searchsorted(row_starts, idx, side="right")) - 1
        j = i + 1 + (idx - int(row_starts[i]))
        edges.append((i, j))
        uf.union(i, j)
    sizes: dict = {}
    for v in range(n):
        r = uf.find(v)
        sizes[r] = sizes.get(r, 0) + 1
    best = max(sizes.values())
    champion = min(r for r, s in sizes.items() if s == best)
    members = sorted(v for v in range(n) if uf.find(v) == champion)
    keep = set(members)
    comp_edges = [(u + 1, v + 1, 1.0) for u, v in edges if u in keep]
    return build_network([v + 1 for v in members], comp_edges, root=members[0] + 1)
