"""The idealized classical descent chain and its hitting-time bounds.

One conditioned quantum measurement per step is modelled by a Markov chain
that jumps from ``v`` to any strict descendant ``u`` in the solution tree
with probability proportional to ``kappa_u^2`` and is absorbed on the marked
leaves.  The expected absorption time from the root is at most
``log2(|M| * (eta + 1))``; base 2 is the base under which the single-edge
case ``E_r = 1`` meets the bound with equality, and reports carry the
natural-log margin alongside for reference.

``quantum_vs_chain_check`` ties the chain back to the walk: conditioned on
the zero ancilla outcome at the optimal weight, the non-root vertex law of
phase estimation approaches the chain's first-step law as the preparation
precision grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import pe_distribution, total_variation
from .resistance import KappaAssignment, kappa_assignment, resistance_profile
from .trees import MarkingOracle, SolutionTree, Tree, shallowest_marked, solution_tree
from .walk import build_walk_operator, spectral_decomposition

__all__ = [
    "DescentChain",
    "HittingTimes",
    "ChainCheckReport",
    "descent_chain",
    "exact_hitting_times",
    "hitting_time_bound",
    "per_vertex_hitting_bound",
    "simulate_descent",
    "quantum_vs_chain_check",
]


@dataclass(frozen=True)
class DescentChain:
    """Transition law over the solution tree.

    ``targets[v]``/``probs[v]`` give the jump distribution out of ``v``
    (strict descendants in the solution tree, weights ``kappa^2``); marked
    leaves are absorbing and carry empty rows.
    """

    st: SolutionTree
    ka: KappaAssignment
    targets: dict[int, np.ndarray]
    probs: dict[int, np.ndarray]

    @property
    def root(self) -> int:
        return self.st.tree.root

    def eta_root(self) -> float:
        kappa = self.ka.kappa
        total = sum(kappa[v] ** 2 for v in self.st.vertices)
        return total / kappa[self.root] ** 2 - 1.0


def descent_chain(st: SolutionTree, ka: KappaAssignment) -> DescentChain:
    targets: dict[int, np.ndarray] = {}
    probs: dict[int, np.ndarray] = {}
    order = st.bfs_order()
    descendants: dict[int, list[int]] = {v: [] for v in order}
    for v in reversed(order):
        acc: list[int] = []
        for c in st.children_in(v):
            acc.append(c)
            acc.extend(descendants[c])
        descendants[v] = acc
    for v in order:
        if v in st.leaf_set.members:
            targets[v] = np.empty(0, dtype=np.int64)
            probs[v] = np.empty(0)
            continue
        tgt = np.asarray(descendants[v], dtype=np.int64)
        weight = ka.kappa[tgt] ** 2
        targets[v] = tgt
        probs[v] = weight / weight.sum()
    return DescentChain(st=st, ka=ka, targets=targets, probs=probs)


@dataclass(frozen=True)
class HittingTimes:
    """Expected steps to absorption, per vertex (nan off the solution tree)."""

    expected: np.ndarray
    root: int

    @property
    def root_value(self) -> float:
        return float(self.expected[self.root])


def exact_hitting_times(dc: DescentChain) -> HittingTimes:
    """Bottom-up dynamic program: ``E_v = 1 + sum P(u|v) E_u``."""
    tree = dc.st.tree
    expected = np.full(tree.n_vertices, np.nan)
    for v in reversed(dc.st.bfs_order()):
        if v in dc.st.leaf_set.members:
            expected[v] = 0.0
        else:
            expected[v] = 1.0 + float(np.dot(dc.probs[v], expected[dc.targets[v]]))
    expected.setflags(write=False)
    return HittingTimes(expected=expected, root=tree.root)


def hitting_time_bound(dc: DescentChain) -> float:
    """The absorption-time bound ``log2(|M| * (eta_root + 1))``."""
    return math.log2(len(dc.st.leaf_set.members) * (dc.eta_root() + 1.0))


def per_vertex_hitting_bound(dc: DescentChain) -> np.ndarray:
    """Refined per-vertex bound: a kappa-weighted log over the leaves below.

    ``E_v <= sum_m (kappa_m / kappa_v) log2(kappa_v (eta(v) + 1) / kappa_m)``
    over the marked leaves below ``v``.
    """
    tree = dc.st.tree
    kappa = dc.ka.kappa
    order = dc.st.bfs_order()
    energy = np.zeros(tree.n_vertices)
    for v in reversed(order):
        energy[v] = kappa[v] ** 2 + sum(energy[c] for c in dc.st.children_in(v))
    out = np.full(tree.n_vertices, np.nan)
    for v in order:
        eta_v = energy[v] / kappa[v] ** 2 - 1.0
        total = 0.0
        for m in dc.st.leaf_set.below(v):
            total += (kappa[m] / kappa[v]) * math.log2(kappa[v] * (eta_v + 1.0) / kappa[m])
        out[v] = total
    return out


def simulate_descent(
    dc: DescentChain, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo absorption time from the root: (mean, standard error)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    members = dc.st.leaf_set.members
    counts = np.empty(trials)
    for t in range(trials):
        v = dc.root
        steps = 0
        while v not in members:
            row_t = dc.targets[v]
            row_p = dc.probs[v]
            v = int(row_t[rng.choice(row_t.shape[0], p=row_p)])
            steps += 1
        counts[t] = steps
    mean = float(counts.mean())
    stderr = float(counts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return mean, stderr


@dataclass(frozen=True)
class ChainCheckReport:
    tv_distance: float
    bound: float
    delta: float
    quantum_law: dict[int, float]
    chain_law: dict[int, float]

    @property
    def passed(self) -> bool:
        return self.tv_distance <= self.bound


def quantum_vs_chain_check(
    tree: Tree,
    oracle: MarkingOracle,
    eta: float,
    delta: float,
    c_bound: float = 10.0,
) -> ChainCheckReport:
    """Compare the PE-conditioned non-root vertex law with the chain's first step.

    Phase estimation runs at the standard precision for ``delta`` on the walk
    at weight ``eta``; the conditional vertex distribution given the zero
    ancilla outcome, restricted to non-root vertices and renormalized, is
    compared in total variation to the chain law ``kappa_u^2`` (normalized).
    The asserted corpus bound is ``c_bound * delta``.
    """
    marked = shallowest_marked(tree, oracle)
    st = solution_tree(tree, marked)
    rp = resistance_profile(st)
    ka = kappa_assignment(st, rp)
    dc = descent_chain(st, ka)

    op = build_walk_operator(tree, marked, eta)
    sd = spectral_decomposition(op)
    root_state = np.zeros(tree.n_vertices)
    root_state[tree.root] = 1.0
    s = max(1, math.ceil(math.log2(max(2.0, math.sqrt(tree.size_bound * eta) / delta**3))))
    out = pe_distribution(sd, root_state, s, with_joint=False)

    cond = out.vertex_given_zero.copy()
    cond[tree.root] = 0.0
    cond /= cond.sum()
    chain = np.zeros(tree.n_vertices)
    chain[dc.targets[tree.root]] = dc.probs[tree.root]
    tv = total_variation(cond, chain)
    keep = lambda arr: {int(v): float(arr[v]) for v in range(tree.n_vertices) if arr[v] > 1e-15}
    return ChainCheckReport(
        tv_distance=tv,
        bound=c_bound * delta,
        delta=delta,
        quantum_law=keep(cond),
        chain_law=keep(chain),
    )
