"""Finite electrical networks and their resistance geometry.

An electrical network is a finite connected graph with symmetric positive
edge conductances and a distinguished root.  The module computes effective
resistances (pointwise, between sets, and to ball complements), quotients
networks by fusing vertex classes, adds unit edges, and exposes the
resistance metric as a :class:`FiniteMetricSpace` together with metric
entropy (covering numbers).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    EmptyClass,
    EmptySet,
    NonpositiveConductance,
    NumericalFailure,
    OverlappingClasses,
    PairNotDistinct,
    SelfLoop,
    TrapnetsError,
    UnknownVertex,
)

_EIG_ZERO_TOL = 1e-9
_BALL_SNAP = 1e-12


def ball_tolerance(r: float) -> float:
    """Relative snap width for ball-membership tests.

    Distances within this width of the radius are treated as exactly equal to
    it, so radii chosen at realized distances behave like the exact metric
    despite eigendecomposition rounding.
    """
    return _BALL_SNAP * max(1.0, abs(r))


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A rooted finite metric space given by an explicit distance matrix."""

    point_ids: tuple
    dist: np.ndarray
    root: object

    def __post_init__(self):
        n = len(self.point_ids)
        if self.dist.shape != (n, n):
            raise TrapnetsError("distance matrix shape does not match points")
        if self.root not in self._index:
            raise UnknownVertex(f"root {self.root!r} is not a point")

    @cached_property
    def _index(self) -> dict:
        return {p: i for i, p in enumerate(self.point_ids)}

    def index(self, point) -> int:
        try:
            return self._index[point]
        except KeyError:
            raise UnknownVertex(f"unknown point {point!r}") from None

    def has_point(self, point) -> bool:
        return point in self._index

    def distance(self, p, q) -> float:
        return float(self.dist[self.index(p), self.index(q)])

    def root_distance(self, p) -> float:
        return self.distance(self.root, p)

    def ball(self, center, radius: float, closed: bool = False) -> list:
        """Points within ``radius`` of ``center`` (open ball by default)."""
        row = self.dist[self.index(center)]
        tol = ball_tolerance(radius)
        keep = row <= radius + tol if closed else row < radius - tol
        return [p for p, k in zip(self.point_ids, keep) if k]

    def validate(self, tol: float = 1e-9) -> None:
        """Check the metric axioms; raises on violation."""
        d = self.dist
        if np.any(np.abs(np.diag(d)) > 0):
            raise TrapnetsError("nonzero diagonal")
        if not np.array_equal(d, d.T):
            raise TrapnetsError("distance matrix is not symmetric")
        off = d[~np.eye(len(self.point_ids), dtype=bool)]
        if off.size and off.min() <= 0:
            raise TrapnetsError("zero or negative off-diagonal distance")
        # d(x,y) <= d(x,z) + d(z,y) for all triples, vectorized over z.
        detour = d[:, None, :] + d.T[None, :, :]          # [x, y, z] -> d(x,z) + d(z,y)
        if np.any(d[:, :, None] > detour + tol):
            raise TrapnetsError("triangle inequality violated")


class ElectricalNetwork:
    """Finite vertex set with symmetric positive conductances and a root.

    Instances are immutable after construction; all query methods are
    read-only and safe to share across workers.  A single-vertex network
    (no edges) is allowed as a degenerate case.
    """

    def __init__(self, vertex_ids: Sequence[int], conductances: Mapping, root: int):
        self.vertex_ids = tuple(vertex_ids)
        self._index = {v: i for i, v in enumerate(self.vertex_ids)}
        self.root = root
        self._cond = dict(conductances)
        self._adj: dict = {v: {} for v in self.vertex_ids}
        for (u, v), w in self._cond.items():
            self._adj[u][v] = w
            self._adj[v][u] = w

    # -- construction-time state is private; everything below is read-only --

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    def index(self, v) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise UnknownVertex(f"unknown vertex {v!r}") from None

    def has_vertex(self, v) -> bool:
        return v in self._index

    def conductance(self, u, v) -> float:
        self.index(u), self.index(v)
        key = (u, v) if (u, v) in self._cond else (v, u)
        return self._cond.get(key, 0.0)

    def neighbors(self, v) -> dict:
        self.index(v)
        return dict(self._adj[v])

    def total_conductance(self, v) -> float:
        """mu(x) = sum_y mu(x,y), the total conductance at a vertex."""
        self.index(v)
        return float(sum(self._adj[v].values()))

    def edges(self) -> list:
        """Edges as (u, v, weight) with u, v in stored (canonical) order."""
        return [(u, v, w) for (u, v), w in self._cond.items()]

    @cached_property
    def edge_arrays(self):
        """(i_idx, j_idx, weights) arrays over stored edges, for vectorized builds."""
        if not self._cond:
            return (np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))
        iu = np.array([self._index[u] for (u, _) in self._cond], dtype=int)
        iv = np.array([self._index[v] for (_, v) in self._cond], dtype=int)
        w = np.array(list(self._cond.values()))
        return iu, iv, w

    @cached_property
    def total_conductance_vector(self) -> np.ndarray:
        """mu(x) for every vertex, in vertex order."""
        out = np.zeros(self.n_vertices)
        iu, iv, w = self.edge_arrays
        np.add.at(out, iu, w)
        np.add.at(out, iv, w)
        return out

    @cached_property
    def laplacian(self) -> np.ndarray:
        n = self.n_vertices
        lap = np.zeros((n, n))
        for (u, v), w in self._cond.items():
            iu, iv = self._index[u], self._index[v]
            lap[iu, iv] -= w
            lap[iv, iu] -= w
            lap[iu, iu] += w
            lap[iv, iv] += w
        return lap

    @cached_property
    def _pinv_eig(self):
        # Eigendecomposition of the Laplacian; the single zero mode is the
        # constant vector on a connected network.
        try:
            w, u = np.linalg.eigh(self.laplacian)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalFailure(str(exc)) from exc
        inv = np.zeros_like(w)
        scale = max(abs(w[-1]), 1.0)
        nonzero = np.abs(w) > _EIG_ZERO_TOL * scale
        inv[nonzero] = 1.0 / w[nonzero]
        return w, u, inv

    @cached_property
    def resistance_matrix(self) -> np.ndarray:
        """All-pairs effective resistance via the Laplacian pseudo-inverse."""
        _, u, inv = self._pinv_eig
        lplus = (u * inv) @ u.T
        d = np.diag(lplus)
        r = d[:, None] + d[None, :] - 2.0 * lplus
        r = np.maximum(r, 0.0)
        r = 0.5 * (r + r.T)
        np.fill_diagonal(r, 0.0)
        return r

    @cached_property
    def resistance_space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(self.vertex_ids, self.resistance_matrix, self.root)


def build_network(vertices: Iterable[int], weighted_edges: Iterable, root: int) -> ElectricalNetwork:
    """Validate and build an electrical network.

    ``weighted_edges`` holds (u, v, weight) triples; the symmetric closure is
    taken, so each unordered pair may be listed once in either orientation.
    """
    vertex_ids = tuple(vertices)
    if not vertex_ids:
        raise EmptySet("a network needs at least one vertex")
    if len(set(vertex_ids)) != len(vertex_ids):
        raise TrapnetsError("duplicate vertex ids")
    known = set(vertex_ids)
    if root not in known:
        raise UnknownVertex(f"root {root!r} is not a vertex")
    cond: dict = {}
    for u, v, w in weighted_edges:
        if u not in known or v not in known:
            raise UnknownVertex(f"edge ({u!r}, {v!r}) references unknown vertex")
        if u == v:
            raise SelfLoop(f"self-loop at {u!r}")
        if not w > 0:
            raise NonpositiveConductance(f"edge ({u!r}, {v!r}) has weight {w}")
        key = (u, v) if (v, u) not in cond else (v, u)
        if key in cond and cond[key] != w:
            raise TrapnetsError(f"conflicting weights for edge ({u!r}, {v!r})")
        cond[key] = float(w)
    net = ElectricalNetwork(vertex_ids, cond, root)
    # Connectivity check by breadth-first search from the root.
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for x in frontier:
            for y in net._adj[x]:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    if len(seen) != len(vertex_ids):
        raise DisconnectedGraph(
            f"graph has {len(vertex_ids) - len(seen)} vertices unreachable from the root")
    return net


def effective_resistance(net: ElectricalNetwork, x, y) -> float:
    """R(x, y), computed from a single grounded Laplacian solve."""
    ix, iy = net.index(x), net.index(y)
    if ix == iy:
        return 0.0
    n = net.n_vertices
    keep = [i for i in range(n) if i != iy]
    rhs = np.zeros(n - 1)
    rhs[keep.index(ix)] = 1.0
    sub = net.laplacian[np.ix_(keep, keep)]
    try:
        v = np.linalg.solve(sub, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return float(v[keep.index(ix)])


def resistance_between_sets(net: ElectricalNetwork, a_set: Iterable, b_set: Iterable) -> float:
    """R(A, B): inverse of the minimum energy of f with f=1 on A, f=0 on B.

    Returns 0 when the sets intersect (the feasible set is empty and the
    supremum convention makes the resistance vanish).
    """
    a = list(dict.fromkeys(a_set))
    b = list(dict.fromkeys(b_set))
    if not a or not b:
        raise EmptySet("both vertex sets must be nonempty")
    ia = [net.index(v) for v in a]
    ib = [net.index(v) for v in b]
    if set(ia) & set(ib):
        return 0.0
    n = net.n_vertices
    lap = net.laplacian
    boundary = set(ia) | set(ib)
    interior = [i for i in range(n) if i not in boundary]
    f = np.zeros(n)
    f[ia] = 1.0
    if interior:
        rhs = -lap[np.ix_(interior, ia)].sum(axis=1)
        try:
            f[interior] = np.linalg.solve(lap[np.ix_(interior, interior)], rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(str(exc)) from exc
    energy = float(f @ lap @ f)
    if energy <= 0:
        raise NumericalFailure("vanishing Dirichlet energy on a connected network")
    return 1.0 / energy


def boundary_resistance(net: ElectricalNetwork, x, r: float) -> float:
    """R({x}, complement of the open resistance ball B(x, r)).

    Returns ``math.inf`` when the ball already covers the whole vertex set;
    the non-explosion functional saturates there.
    """
    if not r > 0:
        raise TrapnetsError("radius must be positive")
    ix = net.index(x)
    row = net.resistance_matrix[ix]
    tol = ball_tolerance(r)
    complement = [v for v, d in zip(net.vertex_ids, row) if d >= r - tol]
    if not complement:
        return math.inf
    return resistance_between_sets(net, [x], complement)


@dataclass(frozen=True)
class EntropyCount:
    """Covering number result; ``exact`` is False for the greedy fallback."""

    count: int
    exact: bool


def metric_entropy(space: FiniteMetricSpace, delta: float, exact_limit: int = 20) -> EntropyCount:
    """Minimum number of closed delta-balls (centered at points) covering the space.

    Exhaustive set-cover search for at most ``exact_limit`` points, greedy
    upper bound (flagged) beyond; minimum set cover is NP-hard in general.
    """
    if not delta > 0:
        raise TrapnetsError("delta must be positive")
    n = len(space.point_ids)
    covers = space.dist <= delta
    masks = [int(sum(1 << j for j in range(n) if covers[i, j])) for i in range(n)]
    full = (1 << n) - 1

    covered = 0
    greedy = 0
    while covered != full:
        best = max(range(n), key=lambda i: bin(masks[i] & ~covered).count("1"))
        covered |= masks[best]
        greedy += 1

    if n > exact_limit:
        return EntropyCount(greedy, exact=False)
    for k in range(1, greedy):
        for combo in itertools.combinations(range(n), k):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return EntropyCount(k, exact=True)
    return EntropyCount(greedy, exact=True)


@dataclass(frozen=True)
class FusedNetwork:
    """Quotient network together with the canonical projection of vertex ids."""

    network: ElectricalNetwork
    canonical_map: dict = field(compare=False)


def fuse(net: ElectricalNetwork, classes: Sequence[Iterable]) -> FusedNetwork:
    """Quotient the network by identifying each class to a single vertex.

    Conductances aggregate additively across class boundaries and edges
    internal to a class are dropped.  Each fused class is represented by its
    smallest member id; untouched vertices keep their ids.
    """
    cleaned = []
    seen: set = set()
    for cls in classes:
        members = list(dict.fromkeys(cls))
        if not members:
            raise EmptyClass("fused classes must be nonempty")
        for v in members:
            net.index(v)
            if v in seen:
                raise OverlappingClasses(f"vertex {v!r} appears in two classes")
            seen.add(v)
        cleaned.append(members)

    canonical = {v: v for v in net.vertex_ids}
    for members in cleaned:
        rep = min(members)
        for v in members:
            canonical[v] = rep

    quotient_ids = list(dict.fromkeys(canonical[v] for v in net.vertex_ids))
    agg: dict = {}
    for (u, v), w in net._cond.items():
        pu, pv = canonical[u], canonical[v]
        if pu == pv:
            continue
        key = (pu, pv) if (pv, pu) not in agg else (pv, pu)
        agg[key] = agg.get(key, 0.0) + w
    quotient = ElectricalNetwork(quotient_ids, agg, canonical[net.root])
    return FusedNetwork(quotient, canonical)


def add_unit_edges(net: ElectricalNetwork, pairs: Sequence) -> ElectricalNetwork:
    """Increment by one the conductance of each listed pair (create at 1)."""
    seen = set()
    cond = dict(net._cond)
    for u, v in pairs:
        net.index(u), net.index(v)
        if u == v:
            raise PairNotDistinct(f"pair ({u!r}, {v!r}) is not a distinct pair")
        key = frozenset((u, v))
        if key in seen:
            raise PairNotDistinct(f"pair ({u!r}, {v!r}) listed twice")
        seen.add(key)
        store = (u, v) if (v, u) not in cond else (v, u)
        cond[store] = cond.get(store, 0.0) + 1.0
    return ElectricalNetwork(net.vertex_ids, cond, net.root)


def degree_marked_measure(net: ElectricalNetwork, with_carrier: bool = False):
    """One unit atom (x, mu(x)) per vertex: the mark map pushforward of counting.

    Pass ``with_carrier=True`` to attach the resistance metric space (needed
    by the ball-restriction functionals); it is skipped by default because it
    triggers the all-pairs resistance computation.
    """
    from .measures import PointMeasure

    atoms = tuple((v, net.total_conductance(v), 1.0) for v in net.vertex_ids)
    carrier = net.resistance_space if with_carrier else None
    return PointMeasure(carrier=carrier, atoms=atoms, marked=True)
