"""Resistance estimation and marked-vertex search with full query accounting.

The two central procedures:

* :func:`estimate_res` sweeps the walk weight ``eta`` upward from ``1/d`` by
  the configured step factor.  At each stage it runs amplitude estimation on
  the zero-ancilla event of phase estimation, repeats it
  ``gamma1 * ln(1/delta0)`` times, and exits once more than half of the
  estimates fall within pi/16 of pi/4, returning ``eta * cot^2`` of the most
  frequent estimate.  If the sweep reaches ``eta = n`` without exiting it
  returns infinity, which doubles as the existence test.

* :func:`find_marked` walks down the tree: estimate the resistance at the
  current vertex, phase-estimate on the re-rooted subtree walk, retry while
  the ancilla misses the zero outcome, and descend to the measured vertex,
  returning as soon as the marking oracle fires.  ``find_all`` repeats it
  with an unmark overlay; ``k_doubling_find`` retries with doubling guesses
  of the marked count and falls back to :func:`classical_descent`.

Randomness is injected through an explicit numpy ``Generator``; identical
seeds reproduce runs bit for bit.  Measurement statistics are exact (no shot
noise); only algorithm-level sampling consumes randomness.

Query accounting (:class:`RunRecord`): ``walk_queries`` counts controlled
applications of the walk operator (a phase-estimation circuit with ``s``
ancillas costs ``2^s - 1``; one amplitude-estimation repetition applies that
circuit once to prepare and twice per controlled-rotation step).
``f_queries``/``h_queries`` count classical control-flow oracle calls plus
one evaluation per vertex per circuit instantiation, the cost of assembling
the diffusion blocks; the oracle calls made inside walk applications ride
along with ``walk_queries`` and are not double-counted.  ``steps`` counts
vertex measurements (descent moves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimation import ae_outcome_distribution, ae_outcome_grid, pe_distribution
from .trees import MarkedSet, MarkingOracle, Tree, shallowest_marked
from .walk import SpectralDecomposition, build_walk_operator, spectral_decomposition

__all__ = [
    "EstimateResConfig",
    "RunRecord",
    "WalkSimulator",
    "estimate_res",
    "detect_existence",
    "find_marked",
    "find_all",
    "k_doubling_find",
    "classical_descent",
]

INFINITE = float("inf")


@dataclass(frozen=True)
class EstimateResConfig:
    """Tunables of the estimation loop and the descent.

    Defaults satisfy every constraint of the failure-rate analysis with
    slack: ``gamma1 > 2``, ``gamma2 <= 1/(8 c sqrt(n))`` (resolved per tree
    when left as None), step factor in (1, 2], and the amplitude-estimation
    error ``delta_ae`` in [gamma2, 1/8).  ``repetitions`` uses the natural
    logarithm.  ``k_guess`` scales the descent precision
    ``delta = descent_delta_scale / log2(k_guess * (eta + 1))``, capped at
    ``descent_delta_cap``.
    """

    delta0: float = 0.05
    gamma1: float = 4.0
    gamma2: float | None = None
    step: float = 2.0
    delta_ae: float = 0.1
    ae_constant_c: float = 1.0
    ae_tail_factor: float = 16.0
    pe_constant: float = 1.0
    k_guess: int = 1
    descent_delta_scale: float = 1.0
    descent_delta_cap: float = 0.5
    s_cap: int = 24
    max_pe_rounds: int = 10_000
    find_all_retries: int = 4

    def validate(self, depth_bound: int) -> None:
        if not (0.0 < self.delta0 < 1.0):
            raise ValueError("delta0 must lie in (0, 1)")
        if not (self.gamma1 > 2.0):
            raise ValueError("gamma1 must exceed 2")
        if not (1.0 < self.step <= 2.0):
            raise ValueError("step factor must lie in (1, 2]")
        gamma2 = self.resolve_gamma2(depth_bound)
        limit = 1.0 / (8.0 * self.ae_constant_c * math.sqrt(max(1, depth_bound)))
        if gamma2 > limit * (1.0 + 1e-12):
            raise ValueError(f"gamma2 = {gamma2} exceeds 1/(8 c sqrt(n)) = {limit}")
        if not (gamma2 <= self.delta_ae < 0.125):
            raise ValueError("delta_ae must lie in [gamma2, 1/8)")

    def resolve_gamma2(self, depth_bound: int) -> float:
        if self.gamma2 is not None:
            return self.gamma2
        return min(
            1.0 / 16.0,
            1.0 / (8.0 * self.ae_constant_c * math.sqrt(max(1, depth_bound))),
        )

    def repetitions(self) -> int:
        return max(1, math.ceil(self.gamma1 * math.log(1.0 / self.delta0)))

    def ae_ancillas(self, gamma2: float) -> int:
        return min(self.s_cap, max(3, math.ceil(math.log2(self.ae_tail_factor / gamma2))))

    def pe_ancillas(self, size_bound: int, eta: float) -> int:
        target = self.pe_constant * math.sqrt(size_bound * eta / self.delta_ae**3)
        return min(self.s_cap, max(1, math.ceil(math.log2(max(2.0, target)))))

    def descent_delta(self, eta: float) -> float:
        load = math.log2(max(self.k_guess, 1) * (eta + 1.0))
        return min(self.descent_delta_cap, self.descent_delta_scale / max(1.0, load))

    def descent_pe_ancillas(self, size_bound: int, eta: float, delta: float) -> int:
        target = math.sqrt(size_bound * eta) / delta**3
        return min(self.s_cap, max(1, math.ceil(math.log2(max(2.0, target)))))


@dataclass
class RunRecord:
    """Monotone counters for one run; see the module docstring for semantics."""

    walk_queries: int = 0
    f_queries: int = 0
    h_queries: int = 0
    steps: int = 0
    outcome: object = None

    def merge(self, other: "RunRecord") -> None:
        self.walk_queries += other.walk_queries
        self.f_queries += other.f_queries
        self.h_queries += other.h_queries
        self.steps += other.steps

    def as_row(self) -> dict:
        out = self.outcome
        if isinstance(out, float) and math.isinf(out):
            out = "inf"
        return {
            "outcome": out,
            "walk_queries": self.walk_queries,
            "f_queries": self.f_queries,
            "h_queries": self.h_queries,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class _Subtree:
    tree: Tree  # re-rooted, locally indexed
    ids: np.ndarray  # local index -> global vertex id
    marked: MarkedSet  # local ids

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])


class WalkSimulator:
    """Caches re-rooted subtrees, spectra, and exact PE statistics.

    One instance serves one (tree, oracle) pair; caches are invalidated when
    the oracle's unmark version changes.  Cached values are deterministic
    functions of the tree, so sharing an instance across seeded runs only
    removes recomputation, never randomness.
    """

    def __init__(self, tree: Tree, oracle: MarkingOracle):
        self.tree = tree
        self.oracle = oracle
        self._version = oracle.version
        self._subtrees: dict[int, _Subtree] = {}
        self._spectra: dict[tuple[int, float], SpectralDecomposition] = {}
        self._pe: dict[tuple[int, float, int], tuple[float, np.ndarray]] = {}

    def _fresh(self) -> None:
        if self.oracle.version != self._version:
            self._subtrees.clear()
            self._spectra.clear()
            self._pe.clear()
            self._version = self.oracle.version

    def subtree(self, v: int) -> _Subtree:
        self._fresh()
        hit = self._subtrees.get(v)
        if hit is not None:
            return hit
        tree = self.tree
        ids = tree.subtree_vertices(v)
        local = {g: i for i, g in enumerate(ids)}
        children = tuple(tuple(local[c] for c in tree.children[g]) for g in ids)
        parent = np.full(len(ids), -1, dtype=np.int64)
        depth = np.zeros(len(ids), dtype=np.int64)
        for i, g in enumerate(ids):
            for c in children[i]:
                parent[c] = i
                depth[c] = depth[i] + 1
        sub_tree = Tree(
            root=0,
            parent=parent,
            children=children,
            depth=depth,
            size_bound=tree.size_bound,
            depth_bound=tree.depth_bound,
            degree_bound=tree.degree_bound,
        )
        marks = np.array([self.oracle.peek(g) for g in ids], dtype=bool)
        sub_oracle = MarkingOracle(marks, root=0)
        marked = shallowest_marked(sub_tree, sub_oracle)
        sub = _Subtree(tree=sub_tree, ids=np.asarray(ids, dtype=np.int64), marked=marked)
        self._subtrees[v] = sub
        return sub

    def spectral(self, v: int, eta: float) -> SpectralDecomposition:
        self._fresh()
        key = (v, float(eta))
        hit = self._spectra.get(key)
        if hit is not None:
            return hit
        sub = self.subtree(v)
        op = build_walk_operator(sub.tree, sub.marked, eta)
        sd = spectral_decomposition(op)
        self._spectra[key] = sd
        return sd

    def pe_stats(self, v: int, eta: float, s: int) -> tuple[float, np.ndarray]:
        """Zero-outcome probability and conditional vertex law (local ids)."""
        self._fresh()
        key = (v, float(eta), s)
        hit = self._pe.get(key)
        if hit is not None:
            return hit
        sd = self.spectral(v, eta)
        sub = self.subtree(v)
        root_state = np.zeros(sub.size)
        root_state[0] = 1.0
        out = pe_distribution(sd, root_state, s, with_joint=False)
        value = (float(np.clip(out.p_zero, 0.0, 1.0)), out.vertex_given_zero)
        self._pe[key] = value
        return value


def _most_frequent(draws: np.ndarray) -> float:
    """Mode of the estimate multiset; ties resolved toward pi/4."""
    values, counts = np.unique(draws, return_counts=True)
    best = values[counts == counts.max()]
    return float(best[np.argmin(np.abs(best - np.pi / 4.0))])


def estimate_res(
    tree: Tree,
    oracle: MarkingOracle,
    v: int,
    cfg: EstimateResConfig,
    rng: np.random.Generator,
    sim: WalkSimulator | None = None,
) -> tuple[float, RunRecord]:
    """Estimate the effective resistance of the subtree rooted at ``v``.

    Returns the estimate (``inf`` when no marked vertex is detected, which
    is a value, not an error) together with the run's query record.  The
    input vertex is treated as an unmarked root; callers check the oracle
    first.
    """
    cfg.validate(tree.depth_bound)
    sim = sim if sim is not None else WalkSimulator(tree, oracle)
    rec = RunRecord()
    sub = sim.subtree(v)
    d = max(1, tree.degree_bound)
    n = float(tree.depth_bound)
    size_bound = tree.size_bound
    gamma2 = cfg.resolve_gamma2(tree.depth_bound)
    s_ae = cfg.ae_ancillas(gamma2)
    reps = cfg.repetitions()
    grid = ae_outcome_grid(s_ae)

    i = 0
    while True:
        eta = min(cfg.step**i / d, n)
        if eta > 0.0:
            s_pe = cfg.pe_ancillas(size_bound, eta)
            p_zero, _ = sim.pe_stats(v, eta, s_pe)
            rec.f_queries += sub.size
            rec.h_queries += sub.size
            theta = float(np.arcsin(np.sqrt(p_zero)))
            probs = ae_outcome_distribution(theta, s_ae)
            draws = grid[rng.choice(grid.shape[0], size=reps, p=probs / probs.sum())]
            rec.walk_queries += reps * (2**s_pe - 1) * (2 ** (s_ae + 1) - 1)
            within = np.abs(draws - np.pi / 4.0) <= np.pi / 16.0
            if 2 * int(within.sum()) > reps:
                beta = _most_frequent(draws)
                tan_b = math.tan(beta)
                estimate = INFINITE if tan_b == 0.0 else eta / tan_b**2
                rec.outcome = estimate
                return estimate, rec
        if eta >= n:
            rec.outcome = INFINITE
            return INFINITE, rec
        i += 1


def detect_existence(
    tree: Tree,
    oracle: MarkingOracle,
    cfg: EstimateResConfig,
    rng: np.random.Generator,
    sim: WalkSimulator | None = None,
) -> tuple[bool, RunRecord]:
    """True iff the resistance estimate at the root is finite."""
    estimate, rec = estimate_res(tree, oracle, tree.root, cfg, rng, sim)
    rec.outcome = math.isfinite(estimate)
    return math.isfinite(estimate), rec


def find_marked(
    tree: Tree,
    oracle: MarkingOracle,
    cfg: EstimateResConfig,
    rng: np.random.Generator,
    sim: WalkSimulator | None = None,
) -> tuple[int | None, RunRecord]:
    """Walk down to a marked vertex; None means "no marked vertex".

    Each loop iteration phase-estimates on the walk of the subtree re-rooted
    at the current vertex (the measured vertex becomes the next input), with
    ancilla count set by the descent precision
    ``delta = O(1/log2(k_guess * (eta + 1)))``.
    """
    cfg.validate(tree.depth_bound)
    sim = sim if sim is not None else WalkSimulator(tree, oracle)
    rec = RunRecord()
    size_bound = tree.size_bound

    v = tree.root
    rec.f_queries += 1
    if oracle(v):
        rec.outcome = v
        return v, rec
    eta_t, sub_rec = estimate_res(tree, oracle, v, cfg, rng, sim)
    rec.merge(sub_rec)

    rounds = 0
    while math.isfinite(eta_t):
        if rounds >= cfg.max_pe_rounds:
            break
        rounds += 1
        delta = cfg.descent_delta(eta_t)
        s = cfg.descent_pe_ancillas(size_bound, eta_t, delta)
        p_zero, cond = sim.pe_stats(v, eta_t, s)
        sub = sim.subtree(v)
        rec.walk_queries += 2**s - 1
        rec.f_queries += sub.size
        rec.h_queries += sub.size
        if rng.random() >= p_zero:
            continue  # ancilla missed the zero outcome; rerun at the same vertex
        local = int(rng.choice(cond.shape[0], p=cond / cond.sum()))
        v = int(sub.ids[local])
        rec.steps += 1
        rec.f_queries += 1
        if oracle(v):
            rec.outcome = v
            return v, rec
        eta_t, sub_rec = estimate_res(tree, oracle, v, cfg, rng, sim)
        rec.merge(sub_rec)

    rec.outcome = None
    return None, rec


def find_all(
    tree: Tree,
    oracle: MarkingOracle,
    cfg: EstimateResConfig,
    rng: np.random.Generator,
) -> tuple[list[int], RunRecord]:
    """Repeat find_marked with an unmark overlay until no marked vertex remains.

    A single run can fail statistically, so the loop only concludes "empty"
    after ``find_all_retries`` consecutive misses; every found vertex is
    unmarked in a copy of the oracle, which re-exposes deeper marked
    vertices on later rounds.
    """
    overlay = oracle.copy()
    sim = WalkSimulator(tree, overlay)
    rec = RunRecord()
    found: list[int] = []
    misses = 0
    while misses < max(1, cfg.find_all_retries):
        v, sub_rec = find_marked(tree, overlay, cfg, rng, sim)
        rec.merge(sub_rec)
        if v is None:
            misses += 1
            continue
        misses = 0
        found.append(v)
        overlay.unmark(v)
    rec.outcome = tuple(found)
    return found, rec


def k_doubling_find(
    tree: Tree,
    oracle: MarkingOracle,
    cfg: EstimateResConfig,
    rng: np.random.Generator,
    sim: WalkSimulator | None = None,
) -> tuple[int | None, RunRecord]:
    """Double the marked-count guess until a vertex is found.

    The guess starts at 1 and doubles past every possible marked count
    (at most ``size_bound - 1``, the paper's "log k ~ n" threshold restated
    for trees of unbounded width); after that the classical descent takes
    over as the fallback.
    """
    sim = sim if sim is not None else WalkSimulator(tree, oracle)
    rec = RunRecord()
    k_hat = 1
    k_cap = max(1, tree.size_bound - 1)
    while k_hat <= k_cap:
        guess_cfg = replace(cfg, k_guess=k_hat)
        v, sub_rec = find_marked(tree, oracle, guess_cfg, rng, sim)
        rec.merge(sub_rec)
        if v is not None:
            rec.outcome = v
            return v, rec
        k_hat *= 2
    v, sub_rec = classical_descent(tree, oracle, cfg, rng, sim)
    rec.merge(sub_rec)
    rec.outcome = v
    return v, rec


def classical_descent(
    tree: Tree,
    oracle: MarkingOracle,
    cfg: EstimateResConfig,
    rng: np.random.Generator,
    sim: WalkSimulator | None = None,
) -> tuple[int | None, RunRecord]:
    """Montanaro-style fallback: existence-test children, walk into a live one.

    Uses a per-level failure budget ``delta0 = O(1/n)`` and the configured
    amplitude-estimation error (already below 1/8).  Returns None when no
    subtree tests positive, whether because nothing is marked or the
    per-level test failed.
    """
    sim = sim if sim is not None else WalkSimulator(tree, oracle)
    level_cfg = replace(
        cfg, delta0=min(cfg.delta0, 1.0 / max(2, tree.depth_bound)), k_guess=1
    )
    rec = RunRecord()
    v = tree.root
    eta_t, sub_rec = estimate_res(tree, oracle, v, level_cfg, rng, sim)
    rec.merge(sub_rec)
    if not math.isfinite(eta_t):
        rec.outcome = None
        return None, rec
    while True:
        rec.f_queries += 1
        if oracle(v):
            rec.outcome = v
            return v, rec
        moved = False
        for c in tree.children[v]:
            # the subtree test treats its root as unmarked, so the child's
            # own mark must be checked directly
            rec.f_queries += 1
            if oracle(c):
                rec.steps += 1
                rec.outcome = int(c)
                return int(c), rec
            eta_c, sub_rec = estimate_res(tree, oracle, c, level_cfg, rng, sim)
            rec.merge(sub_rec)
            if math.isfinite(eta_c):
                v = int(c)
                rec.steps += 1
                moved = True
                break
        if not moved:
            rec.outcome = None
            return None, rec
