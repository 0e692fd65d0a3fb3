"""Batch experiment driver: seeded, declarative, deterministic tables.

A single JSON config describes the ensemble, the trap law, the level
sequence with its scaling constants, the evaluation grids and replica
counts.  Runners emit flat result tables with one row per statistic; all
randomness flows through (seed, stream) pairs so reruns are bit-identical
regardless of worker scheduling.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from scipy import stats

from .dynamics import aging_phi, subaging_psi
from .ensembles import (
    UniformConductanceLaw,
    conductance_path,
    er_largest_component,
    sierpinski,
    uniform_cayley_tree,
    as_plane_tree,
)
from .errors import ConfigError, TrapnetsError
from .measures import DiscreteMeasure, dis_measure_distance, local_hausdorff
from .networks import FiniteMetricSpace, build_network
from .rng import RngStream
from .traps import ScaleTriple, TrapEnvironment, TrapLaw, scaling_constant, truncated_prm
from .serialize import format_value

KINDS = ("sierpinski", "conductance_path", "cayley_tree", "er_component")


def default_scales(kind: str, level: int, law: TrapLaw) -> ScaleTriple:
    """Per-ensemble space and mass normalizations with the derived trap scale."""
    if kind == "sierpinski":
        a, b = (5.0 / 3.0) ** level, 3.0 ** level
    elif kind == "conductance_path":
        a, b = 2.0 ** level, 2.0 ** level
    elif kind == "cayley_tree":
        a, b = float(level) ** 0.5, float(level)
    elif kind == "er_component":
        a, b = float(level) ** (1.0 / 3.0), float(level) ** (2.0 / 3.0)
    else:
        raise ConfigError(f"unknown ensemble kind {kind!r}")
    return ScaleTriple(a, b, scaling_constant(law, max(b, 1.0)))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    levels: tuple
    alpha: float
    seed: int
    replicas: int = 1
    s_grid: tuple = (1.0,)
    t_grid: tuple = (2.0,)
    u_min: float = 1.0
    lam: float = 0.0                      # ER window parameter
    path_bounds: tuple = (0.5, 2.0)       # conductance law support
    boxes: tuple = ()                     # (radius, u) pairs for trap stats
    prm_floor: float = 0.25
    workers: int = 1
    bootstrap: int = 400
    sampler: str = "mc"                   # "mc" or "sobol" (deterministic ensembles)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        try:
            kind = raw["ensemble"]
            levels = tuple(raw["levels"])
            alpha = float(raw["alpha"])
            seed = int(raw["seed"])
        except KeyError as exc:
            raise ConfigError(f"config missing field {exc}") from exc
        if kind not in KINDS:
            raise ConfigError(f"ensemble must be one of {KINDS}, got {kind!r}")
        if list(levels) != sorted(set(levels)) or not levels:
            raise ConfigError("levels must be nonempty and strictly increasing")
        if not 0.0 < alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        replicas = int(raw.get("replicas", 1))
        if replicas < 1:
            raise ConfigError("replica count must be >= 1")
        sampler = raw.get("sampler", "mc")
        if sampler not in ("mc", "sobol"):
            raise ConfigError("sampler must be 'mc' or 'sobol'")
        if sampler == "sobol" and kind not in ("sierpinski", "conductance_path"):
            raise ConfigError("the sobol sampler needs a deterministic ensemble")
        return ExperimentConfig(
            kind=kind, levels=levels, alpha=alpha, seed=seed, replicas=replicas,
            s_grid=tuple(raw.get("s_grid", (1.0,))),
            t_grid=tuple(raw.get("t_grid", (2.0,))),
            u_min=float(raw.get("u_min", 1.0)),
            lam=float(raw.get("lambda", 0.0)),
            path_bounds=tuple(raw.get("path_bounds", (0.5, 2.0))),
            boxes=tuple(tuple(b) for b in raw.get("boxes", ())),
            prm_floor=float(raw.get("prm_floor", 0.25)),
            workers=int(raw.get("workers", 1)),
            bootstrap=int(raw.get("bootstrap", 400)),
            sampler=sampler,
        )

    def law(self) -> TrapLaw:
        return TrapLaw(self.alpha, self.u_min)


@dataclass(frozen=True)
class Row:
    n: int
    replica: int
    s: float
    t: float
    statistic: str
    value: float
    ci_low: float
    ci_high: float


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    failures: int = 0

    def add(self, n, replica, s, t, statistic, value, ci_low=None, ci_high=None):
        v = float(value)
        lo = v if ci_low is None else float(ci_low)
        hi = v if ci_high is None else float(ci_high)
        if not (lo <= v <= hi):
            raise TrapnetsError("confidence bounds must bracket the value")
        self.rows.append(Row(int(n), int(replica), float(s), float(t), statistic, v, lo, hi))

    def select(self, statistic: str) -> list:
        return [r for r in self.rows if r.statistic == statistic]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "replica", "s", "t", "statistic", "value", "ci_low", "ci_high"])
        for r in self.rows:
            writer.writerow([r.n, r.replica, format_value(r.s), format_value(r.t),
                             r.statistic, format_value(r.value),
                             format_value(r.ci_low), format_value(r.ci_high)])
        return buf.getvalue()


def bootstrap_ci(values: np.ndarray, rng: np.random.Generator,
                 n_boot: int = 400, level: float = 0.95):
    """Percentile bootstrap interval for the mean, degenerate for one value."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if len(values) < 2 or n_boot < 1:
        return mean, mean, mean
    idx = rng.integers(0, len(values), size=(n_boot, len(values)))
    means = values[idx].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return mean, min(float(lo), mean), max(float(hi), mean)


# ---------------------------------------------------------------------------
# Ensemble construction with coupled trap uniforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _LevelGraph:
    level: int
    network: object
    root: object
    coords: dict | None
    coupling: np.ndarray | None   # index of each vertex in the top coupling table


def _build_deterministic_levels(config: ExperimentConfig):
    """Gasket and path graphs are deterministic apart from conductances and nest
    across levels, so per-replica trap uniforms can be shared by coordinate."""
    law = UniformConductanceLaw(*config.path_bounds)
    top = max(config.levels)
    if config.kind == "sierpinski":
        graphs = {n: sierpinski(n) for n in config.levels}
        top_keys = {}
        for n in config.levels:
            g = graphs[n]
            scale = 2 ** (top - n)
            for v in g.network.vertex_ids:
                a, b = g.lattice[v]
                top_keys.setdefault((a * scale, b * scale), len(top_keys))
        out = []
        for n in config.levels:
            g = graphs[n]
            scale = 2 ** (top - n)
            coupling = np.array([top_keys[(g.lattice[v][0] * scale, g.lattice[v][1] * scale)]
                                 for v in g.network.vertex_ids])
            out.append(_LevelGraph(n, g.network, g.network.root, g.coords, coupling))
        return out, len(top_keys), None
    if config.kind == "conductance_path":
        # One conductance per integer edge index, shared across levels.
        top_window = 2 ** top
        def build(n, zeta):
            window = 2 ** n
            offset = top_window - window
            vals = zeta[offset:offset + 2 * window]
            return conductance_path(window, law, None, values=vals)
        top_keys = {}
        out = []
        for n in config.levels:
            window = 2 ** n
            scale = 2 ** (top - n)
            keys = []
            for i in range(-window, window + 1):
                top_keys.setdefault(i * scale, len(top_keys))
                keys.append(top_keys[i * scale])
            out.append(_LevelGraph(n, None, 0, None, np.array(keys)))
        return out, len(top_keys), build
    raise ConfigError("coupled construction only for deterministic ensembles")


def _random_graph(config: ExperimentConfig, level: int, stream: RngStream):
    if config.kind == "cayley_tree":
        edges = uniform_cayley_tree(level, stream)
        tree = as_plane_tree(edges, level)
        cond = {}
        for i in range(1, tree.size):
            u, v = tree.labels[tree.parent[i]], tree.labels[i]
            cond[(u, v)] = 1.0
        net = build_network(sorted(tree.labels), [(u, v, w) for (u, v), w in cond.items()],
                            root=tree.labels[0])
        return net, net.root
    if config.kind == "er_component":
        net = er_largest_component(level, config.lam, stream)
        return net, net.root
    raise ConfigError(f"not a per-replica random ensemble: {config.kind}")


def _sobol_uniforms(config: ExperimentConfig, n_keys: int) -> np.ndarray:
    """Scrambled low-discrepancy uniforms, one row per replica.

    Rows are shared across levels exactly like the plain coupled streams, so
    the stabilization diagnostics keep their common-random-number structure
    while the annealed means converge much faster than plain Monte Carlo.
    """
    from scipy.stats import qmc

    stream = RngStream(config.seed).child(42)
    seed_seq = np.random.SeedSequence([stream.seed & (2**63 - 1), stream.stream])
    sampler = qmc.Sobol(d=n_keys, scramble=True,
                        seed=np.random.Generator(np.random.Philox(seed_seq)))
    return sampler.random(config.replicas)


def _two_point_runner(config: ExperimentConfig, evaluators: dict) -> ResultTable:
    """Shared machinery of the aging and sub-aging experiments.

    ``evaluators`` maps a statistic name to a function (env, root, s, t) ->
    value; all statistics share each replica's trap environment and spectral
    factorization.
    """
    law = config.law()
    table = ResultTable()
    scales = {n: default_scales(config.kind, n, law) for n in config.levels}
    deterministic = config.kind in ("sierpinski", "conductance_path")
    sobol_rows = None
    if deterministic:
        level_graphs, n_keys, path_builder = _build_deterministic_levels(config)
        if config.sampler == "sobol":
            sobol_rows = _sobol_uniforms(config, n_keys)

    def run_replica(rep: int):
        out = []
        base = RngStream(config.seed).child(rep)
        if deterministic:
            if sobol_rows is not None:
                uniforms = 1.0 - sobol_rows[rep]
            else:
                uniforms = 1.0 - base.child(0).generator().random(n_keys)
            zeta = None
            if config.kind == "conductance_path":
                zeta_rng = base.child(1).generator()
                top_window = 2 ** max(config.levels)
                zeta = UniformConductanceLaw(*config.path_bounds).sample(zeta_rng, 2 * top_window)
        for slot, n in enumerate(config.levels):
            try:
                if deterministic:
                    lg = level_graphs[slot]
                    net = lg.network if lg.network is not None else path_builder(n, zeta).network
                    root = lg.root
                    traps = law.quantile(uniforms[lg.coupling])
                    nu = DiscreteMeasure(None, dict(zip(net.vertex_ids, map(float, traps))))
                else:
                    net, root = _random_graph(config, n, base.child(2, slot))
                    traps = law.quantile(1.0 - base.child(3, slot).generator().random(net.n_vertices))
                    nu = DiscreteMeasure(None, dict(zip(net.vertex_ids, map(float, traps))))
                env = TrapEnvironment(net, nu, scales[n])
                for s in config.s_grid:
                    for t in config.t_grid:
                        for stat, evaluate in evaluators.items():
                            out.append((n, rep, s, t, stat, evaluate(env, root, s, t)))
                if config.kind == "conductance_path" and rep == 0:
                    # Spatial-truncation diagnostic: the exit-time bound for
                    # leaving the window within the longest probed horizon
                    # certifies (heuristically) that the finite path stands
                    # in for the infinite one when it is well below 1e-3.
                    out.append((n, rep, 0.0, 0.0, "window_exit_bound",
                                _window_exit_bound(env, config)))
            except TrapnetsError:
                out.append((n, rep, math.nan, math.nan, None, None))
        return out

    results = {}
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for rep, res in zip(range(config.replicas),
                                pool.map(run_replica, range(config.replicas))):
                results[rep] = res
    else:
        for rep in range(config.replicas):
            results[rep] = run_replica(rep)

    values: dict = {}
    for rep in sorted(results):
        for n, r, s, t, stat, v in results[rep]:
            if stat is None:
                table.failures += 1
                continue
            table.add(n, r, s, t, stat, v)
            values.setdefault((stat, n, s, t), []).append(v)

    boot_rng = RngStream(config.seed).child(10**6).generator()
    means: dict = {}
    for (stat, n, s, t) in sorted(values):
        if stat not in evaluators:
            continue
        mean, lo, hi = bootstrap_ci(np.array(values[(stat, n, s, t)]), boot_rng,
                                    n_boot=config.bootstrap)
        table.add(n, -1, s, t, stat + "_annealed_mean", mean, lo, hi)
        means[(stat, n, s, t)] = mean
    for stat in evaluators:
        for s in config.s_grid:
            for t in config.t_grid:
                seq = [means[(stat, n, s, t)] for n in config.levels
                       if (stat, n, s, t) in means]
                for i in range(len(seq) - 1):
                    table.add(config.levels[i + 1], -1, s, t,
                              stat + "_stabilization_diff", abs(seq[i + 1] - seq[i]))
    return table


def _window_exit_bound(env, config: ExperimentConfig) -> float:
    """Exit bound for leaving the truncated path window over the probed horizon."""
    from .dynamics import exit_time_bound
    from .networks import boundary_resistance

    net = env.network
    row = net.resistance_matrix[net.index(net.root)]
    r = float(min(row[0], row[-1]))  # vertex order is -window .. window
    res = boundary_resistance(net, net.root, r)
    horizon = (env.scale.a * env.scale.c * max(config.t_grid)
               + env.scale.c * max(config.s_grid))
    if math.isinf(res):
        return 0.0
    return min(exit_time_bound(env, net.root, r, 0.5 * res, horizon), 1.0)


def _phi_evaluator(env, root, s, t):
    return aging_phi(env.generator, root, s, t,
                     time_unit=env.scale.a * env.scale.c)


def _psi_evaluator(env, root, s, t):
    return subaging_psi(env.generator, root, s, t,
                        time_unit=env.scale.a * env.scale.c,
                        holding_unit=env.scale.c)


def run_aging_experiment(config: ExperimentConfig) -> ResultTable:
    """Annealed aging function on the (s, t) grid with stabilization diagnostics."""
    return _two_point_runner(config, {"phi": _phi_evaluator})


def run_subaging_experiment(config: ExperimentConfig) -> ResultTable:
    """Annealed sub-aging function; probes holding over windows of length c*s."""
    return _two_point_runner(config, {"psi": _psi_evaluator})


def run_two_point_experiment(config: ExperimentConfig) -> ResultTable:
    """Both two-point functions in one pass, sharing each replica's spectral data."""
    return _two_point_runner(config, {"phi": _phi_evaluator, "psi": _psi_evaluator})


# ---------------------------------------------------------------------------
# Trap statistics
# ---------------------------------------------------------------------------

def _default_boxes(space: FiniteMetricSpace, a: float) -> tuple:
    """(scaled radius, threshold u) pairs spanning the carrier."""
    scaled = np.sort(space.dist[space.index(space.root)]) / a
    radii = [float(r) for r in np.quantile(scaled[1:], [0.35, 0.75]) if r > 0] or [1.0]
    radii.append(float(scaled.max()) + 1.0)
    thresholds = (0.5, 1.0, 2.0)
    return tuple((r, u) for r in radii for u in thresholds)


def run_trap_convergence(config: ExperimentConfig) -> ResultTable:
    """Void probabilities of the trap point process and the truncated PRM.

    For each configured box A x (u, inf): the empirical void frequency over
    replicas against (1 - P(xi/c > u))^#A, a per-box chi-square p-value, the
    aggregate chi-square over boxes, and the exact scaling-identity residual.
    """
    law = config.law()
    table = ResultTable()
    for n in config.levels:
        scale = default_scales(config.kind, n, law)
        if config.kind == "sierpinski":
            net = sierpinski(n).network
        elif config.kind == "conductance_path":
            stream = RngStream(config.seed).child(7, n)
            net = conductance_path(2 ** n, UniformConductanceLaw(*config.path_bounds), stream).network
        else:
            net, _ = _random_graph(config, n, RngStream(config.seed).child(7, n))
        space = net.resistance_space
        boxes = config.boxes or _default_boxes(space, scale.a)
        root_row = space.dist[space.index(space.root)] / scale.a

        masks = []
        for r, u in boxes:
            masks.append((np.flatnonzero(root_row < r), float(u)))

        reps = config.replicas
        chi_tot = 0.0
        dof = 0
        for box_id, ((idx, u), (r, _)) in enumerate(zip(masks, boxes)):
            if len(idx) == 0:
                table.add(n, -1, r, u, "pi_void_empirical", 1.0)
                continue
            # Fresh replicas per box so the per-box chi-square cells are
            # independent and the aggregate statistic has its nominal law.
            rng = RngStream(config.seed).child(8, n, box_id).generator()
            draws = law.quantile(1.0 - rng.random((reps, len(idx))))
            void = np.all(draws <= scale.c * u, axis=1)
            observed = int(void.sum())
            p0 = (1.0 - law.tail(scale.c * u)) ** len(idx)
            expected = reps * p0
            table.add(n, -1, r, u, "pi_void_empirical", observed / reps)
            table.add(n, -1, r, u, "pi_void_expected", p0)
            if 0.0 < p0 < 1.0:
                chi = ((observed - expected) ** 2 / expected
                       + ((reps - observed) - (reps - expected)) ** 2 / (reps - expected))
                chi_tot += chi
                dof += 1
                table.add(n, -1, r, u, "pi_void_pvalue", float(stats.chi2.sf(chi, 1)))
            table.add(n, -1, r, u, "scaling_identity_residual",
                      law_residual(law, scale, u))
        if dof:
            table.add(n, -1, 0.0, 0.0, "pi_void_aggregate_pvalue",
                      float(stats.chi2.sf(chi_tot, dof)))

        # Truncated PRM against the limit void probabilities.
        prm_rng = RngStream(config.seed).child(9, n)
        chi_tot = 0.0
        dof = 0
        for box_id, ((idx, u), (r, _)) in enumerate(zip(masks, boxes)):
            if len(idx) == 0 or u < config.prm_floor:
                continue
            base_mass = len(idx) / scale.b
            base = DiscreteMeasure(space, {space.point_ids[i]: 1.0 / scale.b for i in idx})
            observed = 0
            for rep in range(reps):
                pi = truncated_prm(base, config.alpha, config.prm_floor,
                                   prm_rng.child(box_id, rep))
                if all(w <= u for _, w in pi.atoms):
                    observed += 1
            p0 = math.exp(-base_mass * u ** (-config.alpha))
            expected = reps * p0
            table.add(n, -1, r, u, "prm_void_empirical", observed / reps)
            table.add(n, -1, r, u, "prm_void_expected", p0)
            if 0.0 < p0 < 1.0:
                chi = ((observed - expected) ** 2 / expected
                       + ((reps - observed) - (reps - expected)) ** 2 / (reps - expected))
                chi_tot += chi
                dof += 1
                table.add(n, -1, r, u, "prm_void_pvalue", float(stats.chi2.sf(chi, 1)))
        if dof:
            table.add(n, -1, 0.0, 0.0, "prm_void_aggregate_pvalue",
                      float(stats.chi2.sf(chi_tot, dof)))
    return table


def law_residual(law: TrapLaw, scale: ScaleTriple, u: float) -> float:
    """b * P(xi / c > u) - u^(-alpha); identically zero for the Pareto tail."""
    return scale.b * law.tail(scale.c * u) - u ** (-law.alpha)


# ---------------------------------------------------------------------------
# Metric convergence
# ---------------------------------------------------------------------------

def run_metric_convergence(config: ExperimentConfig) -> ResultTable:
    """Distances between consecutive levels embedded in their common carrier.

    Requires an ensemble with a canonical embedding (gasket: plane; path:
    line); other ensembles are skipped with a report row.
    """
    table = ResultTable()
    if config.kind not in ("sierpinski", "conductance_path"):
        table.add(0, -1, 0.0, 0.0, "skipped_no_common_embedding", 1.0)
        return table
    law = config.law()
    level_graphs, n_keys, path_builder = _build_deterministic_levels(config)
    if config.kind == "conductance_path":
        zeta_rng = RngStream(config.seed).child(11).generator()
        top_window = 2 ** max(config.levels)
        zeta = UniformConductanceLaw(*config.path_bounds).sample(zeta_rng, 2 * top_window)

    # Common carrier: union of scaled coordinates over all levels.
    def scaled_coords(slot):
        lg = level_graphs[slot]
        n = lg.level
        if config.kind == "sierpinski":
            return {v: lg.coords[v] for v in lg.network.vertex_ids}
        net = path_builder(n, zeta).network
        return {v: (v / 2.0 ** n,) for v in net.vertex_ids}

    coords_by_slot = [scaled_coords(s) for s in range(len(config.levels))]
    all_pts = sorted({c for d in coords_by_slot for c in d.values()})
    pt_index = {c: i for i, c in enumerate(all_pts)}
    arr = np.array(all_pts, dtype=float)
    dist = np.sqrt(((arr[:, None, :] - arr[None, :, :]) ** 2).sum(axis=2))
    root_coord = coords_by_slot[0][level_graphs[0].root if config.kind == "sierpinski" else 0]
    carrier = FiniteMetricSpace(tuple(range(len(all_pts))), dist, pt_index[root_coord])

    for slot in range(len(config.levels) - 1):
        n, m = config.levels[slot], config.levels[slot + 1]
        set_a = [pt_index[c] for c in coords_by_slot[slot].values()]
        set_b = [pt_index[c] for c in coords_by_slot[slot + 1].values()]
        table.add(m, -1, 0.0, 0.0, "vertex_local_hausdorff",
                  local_hausdorff(set_a, set_b, carrier))
        for rep in range(config.replicas):
            uniforms = 1.0 - RngStream(config.seed).child(rep, 0).generator().random(n_keys)
            measures = []
            for s, lvl in ((slot, n), (slot + 1, m)):
                lg = level_graphs[s]
                scale = default_scales(config.kind, lvl, law)
                net = lg.network if lg.network is not None else path_builder(lvl, zeta).network
                traps = law.quantile(uniforms[lg.coupling]) / scale.c
                atoms = {pt_index[coords_by_slot[s][v]]: float(w)
                         for v, w in zip(net.vertex_ids, traps)}
                measures.append(DiscreteMeasure(carrier, atoms))
            table.add(m, rep, 0.0, 0.0, "trap_dmdis",
                      dis_measure_distance(measures[0], measures[1]))
    return table
