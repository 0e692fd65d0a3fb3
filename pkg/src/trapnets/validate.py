"""Cross-module invariant suite backing the ``validate`` CLI command.

Each check runs a seeded randomized battery and returns (name, ok, detail).
The quick profile trims sizes so the whole suite stays interactive; the full
profile matches the documented invariant sizes.
"""

from __future__ import annotations

import math

import numpy as np

from . import dynamics, measures, networks, traps
from .ensembles import sierpinski
from .measures import DiscreteMeasure
from .networks import FiniteMetricSpace
from .rng import RngStream
from .traps import TrapLaw


def random_connected_network(n: int, rng: np.random.Generator,
                             dyadic: bool = False) -> networks.ElectricalNetwork:
    """Random tree plus extra edges; weights dyadic (k/16) when asked, so
    sums in cross-check oracles are exact in binary floating point."""
    def weight():
        if dyadic:
            return float(rng.integers(1, 33)) / 16.0
        return float(rng.uniform(0.2, 3.0))

    ids = list(range(n))
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(0, v)), v, weight()))
    existing = {frozenset((u, v)) for u, v, _ in edges}
    extra = int(rng.integers(0, max(n // 2, 1)))
    for _ in range(extra):
        u, v = int(rng.integers(0, n)), int(rng.integers(0, n))
        if u != v and frozenset((u, v)) not in existing:
            existing.add(frozenset((u, v)))
            edges.append((u, v, weight()))
    return networks.build_network(ids, edges, root=0)


def random_measure_pair(space: FiniteMetricSpace, rng: np.random.Generator,
                        max_atoms: int = 6):
    """Two dyadic-weight measures on a shared carrier (for exact flow checks)."""
    pts = list(space.point_ids)
    def one():
        k = int(rng.integers(1, max_atoms + 1))
        chosen = rng.choice(len(pts), size=min(k, len(pts)), replace=False)
        return DiscreteMeasure(space, {pts[i]: float(rng.integers(1, 33)) / 16.0
                                       for i in chosen})
    return one(), one()


def _check_network_suite(seed: int, count: int, max_n: int):
    rng = RngStream(seed).child(1).generator()
    worst_tri = 0.0
    for _ in range(count):
        n = int(rng.integers(3, max_n + 1))
        net = random_connected_network(n, rng)
        r = net.resistance_matrix
        if not np.array_equal(r, r.T):
            return False, "resistance matrix not exactly symmetric"
        viol = np.max(r[:, :, None] - (r[:, None, :] + r[None, :, :]).transpose(1, 0, 2))
        worst_tri = max(worst_tri, float(viol))
        if viol > 1e-9:
            return False, f"triangle violation {viol:.2e}"
    return True, f"worst triangle residual {worst_tri:.2e}"


def _check_rayleigh(seed: int, count: int):
    rng = RngStream(seed).child(2).generator()
    for _ in range(count):
        n = int(rng.integers(3, 15))
        net = random_connected_network(n, rng)
        pairs = []
        for _ in range(2):
            u, v = int(rng.integers(0, n)), int(rng.integers(0, n))
            if u != v and frozenset((u, v)) not in {frozenset(p) for p in pairs}:
                pairs.append((u, v))
        if not pairs:
            continue
        bigger = networks.add_unit_edges(net, pairs)
        if np.max(bigger.resistance_matrix - net.resistance_matrix) > 1e-9:
            return False, "resistance increased after adding edges"
    return True, "monotone on all instances"


def _check_fusing(seed: int, count: int):
    rng = RngStream(seed).child(3).generator()
    for _ in range(count):
        n = int(rng.integers(4, 15))
        net = random_connected_network(n, rng)
        edges = net.edges()
        u, v, w = edges[int(rng.integers(0, len(edges)))]
        fused = networks.fuse(net, [[u, v]])
        cmap = fused.canonical_map
        qr = fused.network.resistance_matrix
        qidx = {p: i for i, p in enumerate(fused.network.vertex_ids)}
        r = net.resistance_matrix
        for i, x in enumerate(net.vertex_ids):
            for j, y in enumerate(net.vertex_ids):
                rq = qr[qidx[cmap[x]], qidx[cmap[y]]]
                if rq > r[i, j] + 1e-9:
                    return False, "fusing increased a distance"
                if r[i, j] > rq + 1.0 / w + 1e-9:
                    return False, "sandwich inequality violated"
    return True, "contraction and sandwich hold"


def _check_entropy_bound(seed: int, count: int):
    rng = RngStream(seed).child(4).generator()
    checked = 0
    for _ in range(count):
        n = int(rng.integers(3, 13))
        net = random_connected_network(n, rng)
        space = net.resistance_space
        x = net.vertex_ids[int(rng.integers(0, n))]
        r = float(rng.uniform(0.1, 1.0)) * float(net.resistance_matrix.max())
        res = networks.boundary_resistance(net, x, r)
        ent = networks.metric_entropy(space, r / 2.0)
        if not ent.exact:
            continue
        checked += 1
        bound = r / (4.0 * ent.count)
        if res < bound - 1e-9:
            return False, f"entropy bound violated: {res} < {bound}"
    return True, f"bound held on {checked} instances"


def _check_between_sets(seed: int, count: int):
    rng = RngStream(seed).child(5).generator()
    for _ in range(count):
        n = int(rng.integers(4, 12))
        net = random_connected_network(n, rng)
        ids = list(net.vertex_ids)
        rng.shuffle(ids)
        ka = int(rng.integers(1, 3))
        kb = int(rng.integers(1, 3))
        a, b = ids[:ka], ids[ka:ka + kb]
        direct = networks.resistance_between_sets(net, a, b)
        fused = networks.fuse(net, [a, b]) if (len(a) > 1 or len(b) > 1) else None
        if fused is None:
            other = networks.effective_resistance(net, a[0], b[0])
        else:
            other = networks.effective_resistance(
                fused.network, fused.canonical_map[a[0]], fused.canonical_map[b[0]])
        if abs(direct - other) > 1e-9:
            return False, f"set resistance mismatch {direct} vs {other}"
    return True, "Dirichlet solve agrees with fused network"


def _check_prohorov(seed: int, count: int):
    rng = RngStream(seed).child(6).generator()
    base = random_connected_network(8, rng, dyadic=True)
    space = base.resistance_space
    for _ in range(count):
        mu, nu = random_measure_pair(space, rng, max_atoms=5)
        flow = measures.prohorov(mu, nu)
        brute = measures.prohorov_bruteforce(mu, nu)
        if flow != brute:
            return False, f"flow {flow} != brute {brute}"
    return True, "flow equals brute force exactly"


def _check_collision(count: int = 20):
    pts = tuple(range(count + 1))
    coords = np.array([0.0] + [1.0 / k for k in range(1, count + 1)])
    dist = np.abs(coords[:, None] - coords[None, :])
    space = FiniteMetricSpace(pts, dist, 0)
    target = DiscreteMeasure(space, {0: 2.0})
    floor = math.inf
    last_vague = None
    for k in range(1, count + 1):
        nu = DiscreteMeasure(space, {0: 1.0, k: 1.0})
        last_vague = measures.vague_distance(nu, target)
        floor = min(floor, measures.dis_measure_distance(nu, target))
    ok = last_vague < 0.05 and floor > 0.2
    return ok, f"vague tail {last_vague:.3f}, dis floor {floor:.3f}"


def _check_glue(seed: int, count: int):
    rng = RngStream(seed).child(12).generator()
    for _ in range(count):
        na, nb = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        sa = random_connected_network(na, rng).resistance_space
        sb = random_connected_network(nb, rng).resistance_space
        pairs = {(p, sb.point_ids[int(rng.integers(0, nb))]) for p in sa.point_ids}
        pairs |= {(sa.point_ids[int(rng.integers(0, na))], q) for q in sb.point_ids}
        corr = measures.Correspondence.of(pairs)
        glued = measures.glue(corr, sa, sb, slack=float(rng.uniform(0.01, 0.5)))
        glued.validate(tol=1e-12)
    return True, "glued spaces satisfy metric axioms"


def _check_scaling_identity(seed: int, count: int):
    rng = RngStream(seed).child(13).generator()
    worst = 0.0
    for _ in range(count):
        alpha = float(rng.uniform(0.1, 0.9))
        law = TrapLaw(alpha)
        b = float(rng.uniform(1.0, 1e6))
        u = float(rng.uniform(0.05, 50.0))
        c = traps.scaling_constant(law, b)
        if c * u < law.u_min:
            continue
        resid = traps.scaling_identity_residual(law, b, u)
        worst = max(worst, abs(resid) / u ** (-alpha))
    if worst > 1e-13:
        return False, f"relative residual {worst:.2e}"
    return True, f"max relative residual {worst:.2e}"


def _check_kernel_suite(seed: int, count: int):
    rng = RngStream(seed).child(14).generator()
    stream = RngStream(seed).child(15)
    for i in range(count):
        n = int(rng.integers(2, 9))
        net = random_connected_network(n, rng)
        law = TrapLaw(0.5)
        env = traps.make_environment(net, law, 1.0, 2.0, stream.child(i))
        gen = env.generator
        t = float(rng.uniform(0.05, 5.0))
        k1 = dynamics.transition_kernel(gen, t)
        k2 = dynamics.transition_kernel(gen, t / 2.0)
        ck = np.max(np.abs(k2.matrix @ k2.matrix - k1.matrix))
        if ck > 1e-9:
            return False, f"Chapman-Kolmogorov residual {ck:.2e}"
        diag = np.diag(k1.density_matrix())
        if np.min(diag) <= 1e-300:
            return False, "diagonal density not positive"
        # On-diagonal a priori bound over root balls containing x.
        space = net.resistance_space
        row = net.resistance_matrix[net.index(net.root)]
        for r in np.quantile(row[row > 0], [0.5, 1.0]):
            inside = np.flatnonzero(row <= r + networks.ball_tolerance(r))
            nu_ball = gen.nu_values[inside].sum()
            bound = 2.0 * r / t + math.sqrt(2.0) / nu_ball
            if np.max(diag[inside]) > bound + 1e-9:
                return False, "on-diagonal upper bound violated"
    return True, "kernel invariants hold"


def _check_gasket(max_level: int):
    prev = None
    for n in range(0, max_level + 1):
        g = sierpinski(n)
        expected = (3 ** (n + 1) + 3) // 2
        if g.network.n_vertices != expected:
            return False, f"level {n} has {g.network.n_vertices} vertices"
        degrees = [g.network.total_conductance(v) for v in g.network.vertex_ids]
        corners = set(g.corners)
        for v, d in zip(g.network.vertex_ids, degrees):
            if v not in corners and d != 4.0:
                return False, "interior degree differs from 4"
        if n <= 4:
            r = networks.effective_resistance(g.network, g.corners[0], g.corners[1])
            if prev is not None and abs(r / prev - 5.0 / 3.0) > 1e-9:
                return False, f"resistance ratio off at level {n}"
            prev = r
    return True, "counts, degrees, and decimation ratio verified"


def run_suite(seed: int = 0, quick: bool = True):
    """Run all invariant checks; returns list of (name, ok, detail)."""
    count = 25 if quick else 100
    checks = [
        ("network.metric_axioms", lambda: _check_network_suite(seed, count, 30 if not quick else 15)),
        ("network.rayleigh_monotonicity", lambda: _check_rayleigh(seed, count)),
        ("network.fusing_sandwich", lambda: _check_fusing(seed, count)),
        ("network.entropy_lower_bound", lambda: _check_entropy_bound(seed, count)),
        ("network.between_sets_cross_check", lambda: _check_between_sets(seed, count)),
        ("measures.prohorov_flow_vs_brute", lambda: _check_prohorov(seed, count if quick else 200)),
        ("measures.atom_collision_detection", lambda: _check_collision(100)),
        ("measures.glue_metric_axioms", lambda: _check_glue(seed, count)),
        ("traps.scaling_identity", lambda: _check_scaling_identity(seed, count if quick else 100)),
        ("dynamics.kernel_invariants", lambda: _check_kernel_suite(seed, 10 if quick else 40)),
        ("ensembles.gasket_closed_forms", lambda: _check_gasket(4 if quick else 8)),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # pragma: no cover
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
