"""Metric structures for discrete measures on rooted finite carriers.

Implements the Prohorov metric (exact, via a feasibility scan driven by
bipartite max-flow), the root-localized vague metric, the point map that
records atoms with their weights, the combined measure-and-atoms distance,
restriction functionals of point measures, Hausdorff and local Hausdorff
set distances, correspondence distortion with metric gluing, and a
compact-convergence distance for partial maps with variable domains.

A carrier is any object exposing ``root``, ``distance(p, q)``,
``root_distance(p)`` and ``has_point(p)``; :class:`~trapnets.networks.FiniteMetricSpace`
is the concrete finite case, and :class:`ProductCarrier` adjoins the
log-metric weight axis used by point maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CarrierMismatch, NotACorrespondence, TrapnetsError
from .networks import FiniteMetricSpace, ball_tolerance

_FLOW_TOL = 1e-12


class ProductCarrier:
    """Base space times the positive half-line with |log v - log w| and max metric.

    Points are ``(p, w)`` pairs with ``p`` on the base carrier and ``w > 0``.
    The root is ``(base root, 1)``.
    """

    def __init__(self, base):
        self.base = base
        self.root = (base.root, 1.0)

    def has_point(self, point) -> bool:
        p, w = point
        return self.base.has_point(p) and w > 0

    def distance(self, a, b) -> float:
        (p, v), (q, w) = a, b
        return max(self.base.distance(p, q), abs(math.log(v) - math.log(w)))

    def root_distance(self, a) -> float:
        return self.distance(self.root, a)


class DiscreteMeasure:
    """Finite map atom -> positive weight over a carrier's points."""

    def __init__(self, carrier, atoms: dict):
        for p, w in atoms.items():
            if not w > 0:
                raise TrapnetsError(f"atom {p!r} has nonpositive weight {w}")
            if carrier is not None and not carrier.has_point(p):
                raise TrapnetsError(f"atom {p!r} is not a carrier point")
        self.carrier = carrier
        self.atoms = dict(atoms)

    def total(self) -> float:
        return float(sum(self.atoms.values()))

    def scaled(self, factor: float) -> "DiscreteMeasure":
        if not factor > 0:
            raise TrapnetsError("scaling factor must be positive")
        return DiscreteMeasure(self.carrier, {p: w * factor for p, w in self.atoms.items()})

    def restrict(self, r: float) -> "DiscreteMeasure":
        """Keep atoms in the closed root ball of radius r (open-ball rule).

        On a finite carrier the closure of B(root, r) adds no points, so the
        retained set is exactly {x : d(root, x) < r}.
        """
        if not r > 0:
            raise TrapnetsError("radius must be positive")
        tol = ball_tolerance(r)
        keep = {p: w for p, w in self.atoms.items()
                if self.carrier.root_distance(p) < r - tol}
        return DiscreteMeasure(self.carrier, keep)


@dataclass(frozen=True)
class PointMeasure:
    """Finite multiset of (point, weight) or (point, mark, weight) atoms.

    Multiplicity is encoded by repeating entries; every listed entry counts
    once.  ``carrier`` may be None for measures used only through their
    marks/weights (no ball restrictions).
    """

    carrier: object
    atoms: tuple
    marked: bool = False

    def __post_init__(self):
        width = 3 if self.marked else 2
        for atom in self.atoms:
            if len(atom) != width:
                raise TrapnetsError("atom arity does not match marked flag")
            if not atom[-1] > 0:
                raise TrapnetsError("weight coordinates must be positive")
            if self.marked and atom[1] < 0:
                raise TrapnetsError("marks must be nonnegative")

    def points(self) -> tuple:
        return tuple(a[0] for a in self.atoms)

    def weights(self) -> tuple:
        return tuple(a[-1] for a in self.atoms)

    def marks(self) -> tuple:
        if not self.marked:
            raise TrapnetsError("unmarked point measure has no marks")
        return tuple(a[1] for a in self.atoms)

    def restrict(self, r: float) -> "PointMeasure":
        if self.carrier is None:
            raise CarrierMismatch("point measure has no carrier to restrict over")
        tol = ball_tolerance(r)
        keep = tuple(a for a in self.atoms if self.carrier.root_distance(a[0]) < r - tol)
        return PointMeasure(self.carrier, keep, self.marked)


def point_map(nu: DiscreteMeasure) -> PointMeasure:
    """p(nu): one unit atom (x_i, w_i) per atom of the measure."""
    return PointMeasure(nu.carrier, tuple(nu.atoms.items()), marked=False)


def measure_map(pi: PointMeasure) -> DiscreteMeasure:
    """M(pi): collapse atoms back to a measure, summing weight per point."""
    acc: dict = {}
    for atom in pi.atoms:
        acc[atom[0]] = acc.get(atom[0], 0.0) + atom[-1]
    return DiscreteMeasure(pi.carrier, acc)


# ---------------------------------------------------------------------------
# Prohorov metric
# ---------------------------------------------------------------------------

def _max_bipartite_flow(left: np.ndarray, right: np.ndarray, allowed: np.ndarray) -> float:
    """Max flow source -> left atoms -> right atoms -> sink (Edmonds-Karp).

    Cross arcs have effectively infinite capacity, so the min cut picks a set
    A of left atoms and pays ``left(A^c) + right(neighborhood of A)``.
    """
    n_l, n_r = len(left), len(right)
    n = n_l + n_r + 2
    source, sink = 0, n - 1
    cap = np.zeros((n, n))
    cap[source, 1:1 + n_l] = left
    cap[1 + n_l:1 + n_l + n_r, sink] = right
    big = left.sum() + right.sum() + 1.0
    cap[1:1 + n_l, 1 + n_l:1 + n_l + n_r][allowed] = big

    total = 0.0
    while True:
        # BFS for a shortest augmenting path, vectorized over the frontier.
        parent = np.full(n, -1, dtype=int)
        parent[source] = source
        frontier = np.zeros(n, dtype=bool)
        frontier[source] = True
        found = False
        while frontier.any() and not found:
            reach = (cap[frontier] > _FLOW_TOL).any(axis=0)
            fresh = reach & (parent == -1)
            if not fresh.any():
                break
            rows = np.flatnonzero(frontier)
            for j in np.flatnonzero(fresh):
                src = rows[cap[rows, j] > _FLOW_TOL][0]
                parent[j] = src
            if parent[sink] != -1:
                found = True
            frontier = fresh
        if parent[sink] == -1:
            return float(total)
        path = [sink]
        while path[-1] != source:
            path.append(parent[path[-1]])
        path.reverse()
        bottleneck = min(cap[u, v] for u, v in zip(path, path[1:]))
        for u, v in zip(path, path[1:]):
            cap[u, v] -= bottleneck
            cap[v, u] += bottleneck
        total += bottleneck


def _check_same_carrier(a, b):
    if a.carrier is None or b.carrier is None or a.carrier is not b.carrier:
        raise CarrierMismatch("measures live on different carriers")


def _atom_arrays(mu: DiscreteMeasure):
    pts = list(mu.atoms.keys())
    w = np.array([mu.atoms[p] for p in pts], dtype=float)
    return pts, w


def prohorov(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact Prohorov distance between finite discrete measures.

    The infimum over eps of the two-sided enlargement conditions is attained
    inside the finite set of pairwise atom distances joined with the max-flow
    mass deficiencies, so a monotone scan over distance levels with one flow
    per probe is exact.  The deficiency at a level is decreasing while the
    level increases, which makes the feasibility predicate monotone and lets
    the scan binary-search.
    """
    _check_same_carrier(mu, nu)
    pa, wa = _atom_arrays(mu)
    pb, wb = _atom_arrays(nu)
    if not pa and not pb:
        return 0.0
    if not pa:
        return float(wb.sum())
    if not pb:
        return float(wa.sum())
    cross = np.array([[mu.carrier.distance(p, q) for q in pb] for p in pa])
    levels = np.unique(np.concatenate(([0.0], cross.ravel())))
    tot = max(wa.sum(), wb.sum())

    def deficiency(k: int) -> float:
        flow = _max_bipartite_flow(wa, wb, cross <= levels[k])
        return max(tot - flow, 0.0)

    # Find the first level where deficiency <= level (monotone predicate).
    lo, hi = 0, len(levels) - 1
    if deficiency(hi) > levels[hi]:
        return float(deficiency(hi))
    while lo < hi:
        mid = (lo + hi) // 2
        if deficiency(mid) <= levels[mid]:
            hi = mid
        else:
            lo = mid + 1
    k_star = lo
    best = float(levels[k_star])
    if k_star > 0:
        d_prev = deficiency(k_star - 1)
        if d_prev < levels[k_star]:
            best = min(best, float(d_prev))
    return best


def prohorov_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure, max_support: int = 12) -> float:
    """Subset-enumeration Prohorov distance; independent cross-check oracle."""
    _check_same_carrier(mu, nu)
    pa, wa = _atom_arrays(mu)
    pb, wb = _atom_arrays(nu)
    if len(pa) + len(pb) > max_support:
        raise TrapnetsError("combined support too large for brute force")
    if not pa and not pb:
        return 0.0
    if not pa:
        return float(wb.sum())
    if not pb:
        return float(wa.sum())
    cross = np.array([[mu.carrier.distance(p, q) for q in pb] for p in pa])
    levels = np.unique(np.concatenate(([0.0], cross.ravel())))

    def worst_deficiency(eps: float) -> float:
        worst = 0.0
        for masses, other, dmat in ((wa, wb, cross), (wb, wa, cross.T)):
            n = len(masses)
            for bits in range(1, 1 << n):
                sel = [(bits >> i) & 1 for i in range(n)]
                mass = sum(m for m, s in zip(masses, sel) if s)
                near = (dmat[np.array(sel, dtype=bool)] <= eps).any(axis=0)
                worst = max(worst, mass - float(other[near].sum()))
        return worst

    best = math.inf
    for k, lev in enumerate(levels):
        d = worst_deficiency(lev)
        cand = max(float(lev), d)
        nxt = levels[k + 1] if k + 1 < len(levels) else math.inf
        if cand < nxt or k + 1 == len(levels):
            best = min(best, cand)
    return best


# ---------------------------------------------------------------------------
# Vague metric and friends
# ---------------------------------------------------------------------------

def _breakpoint_segments(root_distances: Iterable[float]):
    """Yield (included_max, weight) pairs for the exponential radius integral.

    Segment k covers radii (b_k, b_{k+1}] where the restriction keeps atoms
    with root distance <= b_k; the final segment has weight exp(-b_last).
    """
    bps = sorted({d for d in root_distances if d > 0})
    prev = 0.0
    for b in bps:
        yield prev, math.exp(-prev) - math.exp(-b)
        prev = b
    yield prev, math.exp(-prev)


def vague_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Integral of exp(-r) * (1 and Prohorov of the r-restrictions) dr, exactly.

    The integrand is piecewise constant in r with breakpoints at realized
    root distances, so the integral reduces to a finite sum.
    """
    _check_same_carrier(mu, nu)
    carrier = mu.carrier
    rds = {p: carrier.root_distance(p) for p in itertools.chain(mu.atoms, nu.atoms)}
    total = 0.0
    for included, weight in _breakpoint_segments(rds.values()):
        if weight == 0.0:
            continue
        mu_r = DiscreteMeasure(carrier, {p: w for p, w in mu.atoms.items() if rds[p] <= included})
        nu_r = DiscreteMeasure(carrier, {p: w for p, w in nu.atoms.items() if rds[p] <= included})
        total += weight * min(1.0, prohorov(mu_r, nu_r))
    return total


def dis_measure_distance(nu1: DiscreteMeasure, nu2: DiscreteMeasure) -> float:
    """Vague distance joined with the vague distance of the point maps.

    The point maps live on the product of the carrier with the positive
    half-line carrying |log v - log w|, rooted at weight 1; colliding atoms
    keep this distance bounded away from zero even when the plain vague
    distance vanishes.
    """
    _check_same_carrier(nu1, nu2)
    base = vague_distance(nu1, nu2)
    product = ProductCarrier(nu1.carrier)
    lifted1 = DiscreteMeasure(product, {atom: 1.0 for atom in nu1.atoms.items()})
    lifted2 = DiscreteMeasure(product, {atom: 1.0 for atom in nu2.atoms.items()})
    return max(base, vague_distance(lifted1, lifted2))


@dataclass(frozen=True)
class PPFunctionals:
    """Restriction functionals of a point measure over the root r-ball."""

    weight_measure: dict     # weight value -> accumulated mass (m^(r))
    small_mass: float        # M_eps^(r)
    largest_weight: float    # W^(r)


def pp_functionals(pi: PointMeasure, r: float, eps: float) -> PPFunctionals:
    """m^(r) as a measure on weights, the small-atom mass, and the top weight."""
    if not (r > 0 and eps > 0):
        raise TrapnetsError("r and eps must be positive")
    restricted = pi.restrict(r)
    weight_measure: dict = {}
    for atom in restricted.atoms:
        v = atom[-1]
        weight_measure[v] = weight_measure.get(v, 0.0) + v
    small = sum(mass for v, mass in weight_measure.items() if v <= eps)
    top = max((v for v in weight_measure), default=0.0)
    return PPFunctionals(weight_measure, float(small), float(top))


# ---------------------------------------------------------------------------
# Hausdorff distances
# ---------------------------------------------------------------------------

def hausdorff(a_set: Sequence, b_set: Sequence, carrier) -> float:
    """Hausdorff distance; infinity when exactly one side is empty."""
    a = list(a_set)
    b = list(b_set)
    if not a and not b:
        return 0.0
    if not a or not b:
        return math.inf
    d_ab = max(min(carrier.distance(x, y) for y in b) for x in a)
    d_ba = max(min(carrier.distance(x, y) for x in a) for y in b)
    return max(d_ab, d_ba)


def local_hausdorff(a_set: Sequence, b_set: Sequence, carrier) -> float:
    """Exponentially weighted integral of clamped restricted Hausdorff distances."""
    a = list(a_set)
    b = list(b_set)
    rds = {p: carrier.root_distance(p) for p in itertools.chain(a, b)}
    total = 0.0
    for included, weight in _breakpoint_segments(rds.values()):
        if weight == 0.0:
            continue
        a_r = [p for p in a if rds[p] <= included]
        b_r = [p for p in b if rds[p] <= included]
        total += weight * min(1.0, hausdorff(a_r, b_r, carrier))
    return total


# ---------------------------------------------------------------------------
# Correspondences, distortion, gluing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Correspondence:
    """Relation between the point sets of two finite metric spaces."""

    relation: frozenset

    @staticmethod
    def of(pairs: Iterable) -> "Correspondence":
        return Correspondence(frozenset(pairs))


def _check_covers(corr: Correspondence, space_a: FiniteMetricSpace, space_b: FiniteMetricSpace):
    left = {p for p, _ in corr.relation}
    right = {q for _, q in corr.relation}
    if left != set(space_a.point_ids) or right != set(space_b.point_ids):
        raise NotACorrespondence("relation must cover both point sets")
    for p, q in corr.relation:
        space_a.index(p), space_b.index(q)


def distortion(corr: Correspondence, space_a: FiniteMetricSpace, space_b: FiniteMetricSpace) -> float:
    """sup over related pairs of |d_A(u, u') - d_B(x, x')|."""
    _check_covers(corr, space_a, space_b)
    pairs = sorted(corr.relation)
    worst = 0.0
    for (u, x), (v, y) in itertools.combinations_with_replacement(pairs, 2):
        worst = max(worst, abs(space_a.distance(u, v) - space_b.distance(x, y)))
    return worst


def glue(corr: Correspondence, space_a: FiniteMetricSpace, space_b: FiniteMetricSpace,
         slack: float) -> FiniteMetricSpace:
    """Disjoint-union metric space with cross distances through the relation.

    Cross distance: inf over related (u', x') of
    d_A(u, u') + dis(C)/2 + slack + d_B(x', x).  Any positive slack keeps the
    two copies at positive distance, and dis(C)/2 preserves the triangle
    inequality.  Points are tagged ("A", id) / ("B", id); root is the image
    of A's root.
    """
    if not slack > 0:
        raise TrapnetsError("slack must be positive")
    _check_covers(corr, space_a, space_b)
    half_dis = 0.5 * distortion(corr, space_a, space_b) + slack
    na, nb = len(space_a.point_ids), len(space_b.point_ids)
    cross = np.full((na, nb), math.inf)
    for u, x in corr.relation:
        iu, ix = space_a.index(u), space_b.index(x)
        cross = np.minimum(cross, space_a.dist[:, iu][:, None] + half_dis + space_b.dist[ix, :][None, :])
    dist = np.zeros((na + nb, na + nb))
    dist[:na, :na] = space_a.dist
    dist[na:, na:] = space_b.dist
    dist[:na, na:] = cross
    dist[na:, :na] = cross.T
    ids = tuple(("A", p) for p in space_a.point_ids) + tuple(("B", q) for q in space_b.point_ids)
    return FiniteMetricSpace(ids, dist, ("A", space_a.root))


# ---------------------------------------------------------------------------
# Partial maps with variable domains
# ---------------------------------------------------------------------------

def vardom_distance(f: dict, g: dict, domain_space, value_space) -> float:
    """Distance between partial maps, clamped at 1.

    The value is the least eps such that every graph point of one map has a
    graph point of the other within eps in both the domain and the value
    coordinate; empty-versus-nonempty clamps to 1, two empty maps are at 0.
    """
    if not f and not g:
        return 0.0
    if not f or not g:
        return 1.0
    for mapping in (f, g):
        for x, val in mapping.items():
            if not domain_space.has_point(x) or not value_space.has_point(val):
                raise CarrierMismatch("partial map leaves the given carriers")

    def one_side(src: dict, dst: dict) -> float:
        worst = 0.0
        for x, fx in src.items():
            best = min(max(domain_space.distance(x, y), value_space.distance(fx, gy))
                       for y, gy in dst.items())
            worst = max(worst, best)
        return worst

    return min(max(one_side(f, g), one_side(g, f)), 1.0)


def restrict(obj, r: float):
    """Restriction of a measure, point measure, or point set to the root r-ball."""
    if isinstance(obj, (DiscreteMeasure, PointMeasure)):
        return obj.restrict(r)
    raise TrapnetsError("restrict expects a DiscreteMeasure or PointMeasure; "
                        "for raw point sets use restrict_points")


def restrict_points(points: Sequence, carrier, r: float) -> list:
    if not r > 0:
        raise TrapnetsError("radius must be positive")
    tol = ball_tolerance(r)
    return [p for p in points if carrier.root_distance(p) < r - tol]
