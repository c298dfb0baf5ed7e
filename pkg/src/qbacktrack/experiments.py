"""Corpus generation, invariant suites, and the unstructured-search study.

Every structural claim the library relies on is re-checked here over a
seeded corpus of random trees plus hand fixtures: the two resistance
oracles, the kappa identity suite, walk fixed points, the spectral-gap
witness, the estimation precision law, backend equivalence, and the descent
hitting-time bound.  :func:`verify_all` runs everything in one pass per tree
and aggregates per-suite results; the statistical suites (estimation
accuracy, search statistics, query scaling) are heavier and gated behind
``include_statistical``.

All randomness descends from one 64-bit master seed: corpus trees draw
their seeds from ``numpy.random.SeedSequence(master_seed)``, and trial
generators are spawned per (instance, trial) index, so runs reproduce
bit for bit and trials can execute in parallel in any order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algorithms import EstimateResConfig, WalkSimulator, estimate_res, find_all, find_marked, k_doubling_find
from .descent import descent_chain, exact_hitting_times, hitting_time_bound, simulate_descent
from .estimation import gate_level_pe, pe_distribution, pe_kernel, total_variation
from .resistance import kappa_assignment, kappa_eta, resistance_bruteforce, resistance_profile, verify_kappa
from .trees import (
    MarkedSet,
    MarkingOracle,
    Tree,
    build_complete_tree,
    build_dpll_tree,
    build_path,
    build_random_tree,
    build_star,
    shallowest_marked,
    solution_tree,
)
from .walk import (
    beta_angle,
    build_walk_operator,
    phi_m_state,
    phi_perp_state,
    phi_state,
    spectral_decomposition,
    xi_vector,
)

__all__ = [
    "CorpusInstance",
    "SuiteResult",
    "VerifyReport",
    "GroverRow",
    "GroverResult",
    "default_corpus",
    "fixture_instances",
    "verify_all",
    "grover_scaling",
    "backend_equivalence_instances",
    "suite_backend_equivalence",
]

DEFAULT_MASTER_SEED = 20240913


@dataclass
class CorpusInstance:
    name: str
    tree: Tree
    oracle: MarkingOracle
    marked: MarkedSet = None

    def __post_init__(self):
        if self.marked is None:
            self.marked = shallowest_marked(self.tree, self.oracle)

    @property
    def has_marks(self) -> bool:
        return bool(self.marked.members)


def fixture_instances() -> list[CorpusInstance]:
    """Hand fixtures exercising the closed-form cases."""
    out = []
    for name, built in [
        ("single_edge", build_star(1, 1)),
        ("star_64_4", build_star(64, 4)),
        ("star_8_3", build_star(8, 3)),
        ("star_8_unmarked", build_star(8, 0)),
        ("path_3_marked", build_path(3, True)),
        ("path_5_unmarked", build_path(5, False)),
        ("binary_depth3_marked", build_complete_tree(3, 2, mark_leaves=True)),
        ("dpll_single_clause", build_dpll_tree([(1,)], [1])),
        ("dpll_free_2vars", build_dpll_tree([], [1, 2])),
    ]:
        out.append(CorpusInstance(name, built[0], built[1]))
    return out


def default_corpus(count: int = 500, master_seed: int = DEFAULT_MASTER_SEED) -> list[CorpusInstance]:
    """Seeded random corpus plus fixtures.

    Sizes cycle through three bands (2..60, 61..200, 201..500) so that about
    two fifths of the corpus stays small enough for the search suites;
    degree bounds and marking densities cycle independently.
    """
    seeds = np.random.SeedSequence(master_seed).generate_state(count, dtype=np.uint64)
    degrees = (2, 3, 4, 6)
    probs = (0.02, 0.05, 0.1, 0.3)
    out = fixture_instances()
    for i in range(count):
        band = i % 5
        if band < 2:
            size = 2 + (i * 7 + band) % 59
        elif band < 4:
            size = 61 + (i * 11) % 140
        else:
            size = 201 + (i * 13) % 300
        tree, oracle = build_random_tree(
            size, degrees[i % 4], probs[(i // 4) % 4], int(seeds[i])
        )
        out.append(CorpusInstance(f"random_{i:03d}", tree, oracle))
    return out


@dataclass
class SuiteResult:
    name: str
    passed: bool = True
    checked: int = 0
    max_residual: float = 0.0
    failures: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def update(self, instance_name: str, residual: float, tol: float, what: str = "") -> None:
        self.checked += 1
        self.max_residual = max(self.max_residual, residual)
        if not (residual <= tol):
            self.passed = False
            self.failures.append({"instance": instance_name, "check": what, "residual": residual})

    def require(self, instance_name: str, ok: bool, what: str = "") -> None:
        self.checked += 1
        if not ok:
            self.passed = False
            self.failures.append({"instance": instance_name, "check": what})

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "max_residual": self.max_residual,
            "failures": self.failures[:20],
            "stats": self.stats,
            "elapsed_s": round(self.elapsed, 3),
        }


@dataclass
class VerifyReport:
    suites: dict[str, SuiteResult]
    corpus_size: int

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites.values())

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "corpus_size": self.corpus_size,
            "suites": {k: v.as_dict() for k, v in self.suites.items()},
        }


def _solution_bundle(inst: CorpusInstance, inject_fault: str | None):
    st = solution_tree(inst.tree, inst.marked)
    rp = resistance_profile(st)
    ka = kappa_assignment(st, rp)
    if inject_fault == "kappa_perturbation":
        bumped = ka.kappa.copy()
        first = next(iter(sorted(st.leaf_set.members)))
        bumped[first] += 1e-3
        ka = type(ka)(kappa=bumped)
    return st, rp, ka


def verify_all(
    corpus: list[CorpusInstance] | None = None,
    master_seed: int = DEFAULT_MASTER_SEED,
    include_statistical: bool = False,
    inject_fault: str | None = None,
    precision_size_cap: int = 200,
) -> VerifyReport:
    """Run every invariant suite over the corpus; one pass per tree.

    ``inject_fault="kappa_perturbation"`` bumps one kappa entry by 1e-3 on
    every marked tree, which must trip the child-sum identity; used to prove
    the harness can fail.
    """
    if corpus is None:
        corpus = default_corpus(master_seed=master_seed)
    if not corpus:
        raise ValueError("no trees: the corpus is empty")

    resistance = SuiteResult("resistance_oracle_equivalence")
    interval = SuiteResult("resistance_interval")
    kappa_suite = SuiteResult("kappa_identities")
    fixed_points = SuiteResult("walk_fixed_points")
    witness = SuiteResult("spectral_gap_witness")
    precision = SuiteResult("estimation_precision_law")
    descent_suite = SuiteResult("descent_hitting_bound")

    t0 = time.time()
    for inst in corpus:
        if not inst.has_marks:
            continue
        tree = inst.tree
        st, rp, ka = _solution_bundle(inst, inject_fault)

        # two independent resistance oracles
        brute = resistance_bruteforce(st)
        resistance.update(
            inst.name, abs(rp.eta_root - brute) / brute, 1e-9, "recursion_vs_laplacian"
        )

        # interval bound computed on the solution tree
        k = len(st.leaf_set.members)
        d_root = max(1, len(st.children_in(tree.root)))
        depth_st = max(int(tree.depth[m]) for m in st.leaf_set.members)
        interval.require(
            inst.name,
            max(1.0 / k, 1.0 / d_root) - 1e-12 <= rp.eta_root <= depth_st + 1e-12,
            "eta_in_interval",
        )

        # kappa identity suite plus the kappa-implied resistance map
        report = verify_kappa(st, ka, tol=1e-10)
        for check, residual in report.residuals.items():
            kappa_suite.update(inst.name, residual, 1e-10, check)
        implied = kappa_eta(st, ka)
        dev = max(
            abs(implied[v] - rp.eta_bar[v]) / max(1.0, rp.eta_bar[v]) for v in st.vertices
        )
        kappa_suite.update(inst.name, dev, 1e-9, "kappa_implied_resistance")

        # anchor: resistance equals the inverse squared root weight
        kappa_suite.update(
            inst.name,
            abs(1.0 / ka.kappa[tree.root] ** 2 - rp.eta_root) / max(1.0, rp.eta_root),
            1e-9,
            "root_weight_anchor",
        )

        eta_bar = rp.eta_root
        size_bound = tree.size_bound
        for eta in (eta_bar / 4, eta_bar, 4 * eta_bar):
            op = build_walk_operator(tree, st.leaf_set, eta)
            phi = phi_state(st, ka, eta)
            fixed_points.update(
                inst.name,
                float(np.linalg.norm(op.matrix @ phi.amplitudes - phi.amplitudes)),
                1e-10,
                f"phi_fixed@{eta:.3g}",
            )
            for m in st.leaf_set.members:
                pm = phi_m_state(tree, st.leaf_set, m, eta)
                fixed_points.update(
                    inst.name,
                    float(np.linalg.norm(op.matrix @ pm.amplitudes - pm.amplitudes)),
                    1e-10,
                    f"path_vector_fixed@{eta:.3g}",
                )
            expected_overlap = math.sin(math.atan(math.sqrt(eta) * ka.kappa[tree.root]))
            fixed_points.update(
                inst.name,
                abs(phi.amplitudes[tree.root] - expected_overlap),
                1e-12,
                f"root_overlap@{eta:.3g}",
            )

            # witness conditions hold for every eta
            xi = xi_vector(st, ka, eta)
            perp = phi_perp_state(st, ka, eta)
            witness.update(
                inst.name,
                float(np.linalg.norm(op.projector_a() @ xi.alpha)),
                1e-10,
                f"witness_killed_by_even_projector@{eta:.3g}",
            )
            witness.update(
                inst.name,
                float(np.linalg.norm(op.projector_b() @ xi.alpha - perp.amplitudes)),
                1e-10,
                f"witness_maps_to_perp@{eta:.3g}",
            )
            if eta >= 1.0 / (size_bound - 1):
                beta = beta_angle(ka.kappa[tree.root], eta)
                bound = 2 * (size_bound - 1) * eta * math.cos(beta) ** 2
                witness.require(
                    inst.name, xi.norm**2 <= bound + 1e-12, f"witness_norm_bound@{eta:.3g}"
                )

        # spectral checks at the optimal weight
        op = build_walk_operator(tree, st.leaf_set, eta_bar)
        sd = spectral_decomposition(op)
        perp = phi_perp_state(st, ka, eta_bar)
        xi = xi_vector(st, ka, eta_bar)
        for eps in (1e-3, 1e-2, 1e-1):
            norm = sd.small_phase_projector_norm(perp.amplitudes, eps)
            witness.require(
                inst.name, norm <= eps * xi.norm + 1e-12, f"small_phase_bound@{eps:g}"
            )

        if tree.n_vertices <= precision_size_cap:
            lam2 = np.abs(sd.amplitudes(perp.amplitudes)) ** 2
            for delta in (0.2, 0.1, 0.05):
                target = math.sqrt(size_bound * eta_bar) / delta**3
                s = max(1, math.ceil(math.log2(max(2.0, target))))
                leak = float(np.sum(lam2 * pe_kernel(sd.phases, s)))
                precision.require(
                    inst.name, leak <= 10.0 * delta**2, f"zero_outcome_leak@{delta:g}"
                )

        # descent chain bound (dynamic program is exact)
        dc = descent_chain(st, ka)
        ht = exact_hitting_times(dc)
        descent_suite.require(
            inst.name,
            ht.root_value <= hitting_time_bound(dc) + 1e-12,
            "hitting_time_log_bound",
        )

    backend = suite_backend_equivalence()

    suites = {
        s.name: s
        for s in (
            resistance,
            interval,
            kappa_suite,
            fixed_points,
            witness,
            precision,
            descent_suite,
            backend,
        )
    }
    if include_statistical:
        suites["estimate_res_statistics"] = suite_estimate_res_statistics(master_seed)
        suites["search_statistics"] = suite_search_statistics(corpus, master_seed)
        suites["descent_monte_carlo"] = suite_descent_monte_carlo(master_seed)
    elapsed = time.time() - t0
    for s in suites.values():
        if s.elapsed == 0.0:
            s.elapsed = elapsed
    return VerifyReport(suites=suites, corpus_size=len(corpus))


def backend_equivalence_instances() -> list[tuple[str, Tree, MarkingOracle, float, int]]:
    """(name, tree, oracle, eta, ancillas) pairs for the two-backend check."""
    rows = []
    tree, oracle = build_star(1, 1)
    rows.append(("single_edge_s3", tree, oracle, 0.8, 3))
    tree, oracle = build_star(8, 2)
    for s in (1, 4, 7):
        rows.append((f"star_8_2_s{s}", tree, oracle, 0.5, s))
    tree, oracle = build_star(4, 2)
    rows.append(("star_4_2_s6", tree, oracle, 0.5, 6))
    tree, oracle = build_path(4, True)
    rows.append(("path_4_s5", tree, oracle, 4.0, 5))
    tree, oracle = build_random_tree(24, 3, 0.2, 5)
    rows.append(("random_24_s5", tree, oracle, 0.6, 5))
    tree, oracle = build_random_tree(40, 3, 0.1, 9)
    rows.append(("random_40_s8", tree, oracle, 1.0, 8))
    tree, oracle = build_star(31, 4)
    rows.append(("star_31_4_s17", tree, oracle, 0.25, 17))
    return rows


def suite_backend_equivalence(tol: float = 1e-10) -> SuiteResult:
    """Spectral vs gate-level joint distributions, total variation."""
    result = SuiteResult("backend_equivalence")
    t0 = time.time()
    for name, tree, oracle, eta, s in backend_equivalence_instances():
        op = build_walk_operator(tree, oracle, eta)
        sd = spectral_decomposition(op)
        root = np.zeros(tree.n_vertices)
        root[tree.root] = 1.0
        a = pe_distribution(sd, root, s, with_joint=True)
        b = gate_level_pe(op, root, s)
        tv = total_variation(a.joint.ravel(), b.joint.ravel())
        result.update(name, tv, tol, "joint_total_variation")
    result.elapsed = time.time() - t0
    return result


def suite_estimate_res_statistics(
    master_seed: int = DEFAULT_MASTER_SEED,
    runs: int = 200,
    envelope_margin: float = 0.5,
) -> SuiteResult:
    """Accuracy and existence statistics of the resistance estimator.

    On the 64-leaf star with 4 marked, at least 95% of seeded runs must land
    within ``16 * delta_ae * eta * (1 + margin)`` of the true 1/4; on
    unmarked fixtures at least 95% must report infinity.
    """
    result = SuiteResult("estimate_res_statistics")
    t0 = time.time()
    cfg = EstimateResConfig()
    tree, oracle = build_star(64, 4)
    sim = WalkSimulator(tree, oracle)
    seeds = np.random.SeedSequence(master_seed).spawn(runs)
    envelope = 16.0 * cfg.delta_ae * 0.25 * (1.0 + envelope_margin)
    hits = 0
    for sq in seeds:
        est, _ = estimate_res(tree, oracle, tree.root, cfg, np.random.default_rng(sq), sim)
        if math.isfinite(est) and abs(est - 0.25) <= envelope:
            hits += 1
    result.stats["star_hit_rate"] = hits / runs
    result.require("star_64_4", hits >= 0.95 * runs, "estimate_within_envelope")

    for name, (tree_u, oracle_u) in [
        ("star_8_unmarked", build_star(8, 0)),
        ("path_5_unmarked", build_path(5, False)),
    ]:
        sim_u = WalkSimulator(tree_u, oracle_u)
        inf_count = 0
        for sq in np.random.SeedSequence(master_seed + 1).spawn(runs):
            est, _ = estimate_res(tree_u, oracle_u, tree_u.root, cfg, np.random.default_rng(sq), sim_u)
            inf_count += not math.isfinite(est)
        result.stats[f"{name}_inf_rate"] = inf_count / runs
        result.require(name, inf_count >= 0.95 * runs, "unmarked_reports_infinity")
    result.elapsed = time.time() - t0
    return result


def suite_search_statistics(
    corpus: list[CorpusInstance] | None = None,
    master_seed: int = DEFAULT_MASTER_SEED,
    chi2_runs: int = 2000,
    find_all_trees: int = 100,
) -> SuiteResult:
    """Find-marked correctness: marked-only returns, leaf uniformity, recovery.

    The chi-square threshold 11.34 is the 0.01 tail of three degrees of
    freedom (four equiprobable leaves).
    """
    result = SuiteResult("search_statistics")
    t0 = time.time()
    cfg = EstimateResConfig()
    tree, oracle = build_star(64, 4)
    sim = WalkSimulator(tree, oracle)
    counts = {1: 0, 2: 0, 3: 0, 4: 0}
    returned = 0
    attempts = 0
    seeds = iter(np.random.SeedSequence(master_seed + 2).spawn(3 * chi2_runs))
    while returned < chi2_runs:
        attempts += 1
        v, _ = find_marked(tree, oracle, cfg, np.random.default_rng(next(seeds)), sim)
        if v is None:
            continue
        result.require("star_64_4", bool(oracle.peek(v)), "returned_vertex_marked")
        counts[v] += 1
        returned += 1
    expected = chi2_runs / 4.0
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    result.stats["chi2"] = chi2
    result.stats["success_rate"] = returned / attempts
    result.require("star_64_4", chi2 < 11.34, "leaf_uniformity_chi2")

    # exact recovery of every marked vertex on the smallest corpus trees
    if corpus is None:
        corpus = default_corpus(master_seed=master_seed)
    small = [
        inst
        for inst in corpus
        if inst.has_marks and inst.tree.n_vertices <= 60 and len(inst.oracle.marked_vertices()) <= 8
    ][:find_all_trees]
    recovered = 0
    for i, inst in enumerate(small):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=master_seed + 3, spawn_key=(i,)))
        found, _ = find_all(inst.tree, inst.oracle, cfg, rng)
        want = sorted(inst.oracle.marked_vertices())
        ok = sorted(found) == want
        recovered += ok
        result.require(inst.name, ok, "find_all_exact_recovery")
    result.stats["find_all_trees"] = len(small)
    result.stats["find_all_recovered"] = recovered
    result.elapsed = time.time() - t0
    return result


def suite_descent_monte_carlo(
    master_seed: int = DEFAULT_MASTER_SEED, trials: int = 100_000
) -> SuiteResult:
    """Monte Carlo absorption times agree with the dynamic program (3 sigma)."""
    result = SuiteResult("descent_monte_carlo")
    t0 = time.time()
    for name, built in [
        ("single_edge", build_star(1, 1)),
        ("star_10_4", build_star(10, 4)),
        ("path_5", build_path(5, True)),
    ]:
        tree, oracle = built
        st = solution_tree(tree, shallowest_marked(tree, oracle))
        ka = kappa_assignment(st, resistance_profile(st))
        dc = descent_chain(st, ka)
        exact = exact_hitting_times(dc).root_value
        mean, err = simulate_descent(dc, trials, np.random.default_rng(master_seed + 7))
        result.stats[name] = {"exact": exact, "mc": mean, "stderr": err}
        tolerance = 3 * err if err > 0 else 1e-9
        result.require(name, abs(mean - exact) <= tolerance, "dp_vs_monte_carlo")
    result.elapsed = time.time() - t0
    return result


@dataclass
class GroverRow:
    size: int
    marked: int
    trials: int
    mean_walk_queries: float
    std_walk_queries: float


@dataclass
class GroverResult:
    rows: list[GroverRow]
    slope: float

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "rows": [vars(r) for r in self.rows],
        }


def grover_scaling(
    n_list: list[int],
    k: int | str,
    trials: int,
    seed: int,
    jobs: int = 1,
) -> GroverResult:
    """Query counts of the doubling search on stars, with a log-log fit.

    ``k`` is the marked-leaf count, or ``"all"`` to mark every leaf.  Each
    (size, trial) pair gets its own spawned generator, so results do not
    depend on scheduling; the fitted slope is of log mean queries against
    log size.
    """
    if isinstance(k, str):
        if k != "all":
            raise ValueError("k must be an integer or 'all'")
    cfg = EstimateResConfig()

    def run_row(idx_size):
        idx, size = idx_size
        k_here = size if k == "all" else int(k)
        if not (1 <= k_here <= size):
            raise ValueError(f"marked count {k_here} outside [1, {size}]")
        tree, oracle = build_star(size, k_here)
        sim = WalkSimulator(tree, oracle)
        queries = []
        for t in range(trials):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(idx, t))
            )
            v, rec = k_doubling_find(tree, oracle, cfg, rng, sim)
            if v is None:
                raise RuntimeError(f"search failed on star({size},{k_here})")
            queries.append(rec.walk_queries)
        q = np.asarray(queries, dtype=float)
        return GroverRow(
            size=size,
            marked=k_here,
            trials=trials,
            mean_walk_queries=float(q.mean()),
            std_walk_queries=float(q.std(ddof=1)) if trials > 1 else 0.0,
        )

    items = list(enumerate(n_list))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_row, items))
    else:
        rows = [run_row(it) for it in items]
    slope = float(
        np.polyfit(
            np.log([r.size for r in rows]), np.log([r.mean_walk_queries for r in rows]), 1
        )[0]
    )
    return GroverResult(rows=rows, slope=slope)
