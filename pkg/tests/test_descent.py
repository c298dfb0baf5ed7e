"""Descent chain: transition law, hitting times, and the quantum link."""

import math

import numpy as np
import pytest

from qbacktrack import (
    build_path,
    build_random_tree,
    build_star,
    kappa_assignment,
    resistance_profile,
    shallowest_marked,
    solution_tree,
)
from qbacktrack.descent import (
    descent_chain,
    exact_hitting_times,
    hitting_time_bound,
    per_vertex_hitting_bound,
    quantum_vs_chain_check,
    simulate_descent,
)


def chain_for(builder, *args, **kwargs):
    tree, oracle = builder(*args, **kwargs)
    st = solution_tree(tree, shallowest_marked(tree, oracle))
    ka = kappa_assignment(st, resistance_profile(st))
    return tree, oracle, descent_chain(st, ka)


def brute_force_hitting_time(dc, root):
    """Independent oracle: absorbing-chain linear system over the支 support."""
    order = [v for v in dc.st.bfs_order()]
    idx = {v: i for i, v in enumerate(order)}
    n = len(order)
    a = np.eye(n)
    b = np.zeros(n)
    for v in order:
        if v in dc.st.leaf_set.members:
            continue
        b[idx[v]] = 1.0
        for t, p in zip(dc.targets[v], dc.probs[v]):
            a[idx[v], idx[t]] -= p
    sol = np.linalg.solve(a, b)
    return float(sol[idx[root]])


class TestChainLaw:
    def test_rows_sum_to_one_and_absorb_at_leaves(self):
        tree, _, dc = chain_for(build_random_tree, 60, 3, 0.15, 4)
        for v in dc.st.bfs_order():
            if v in dc.st.leaf_set.members:
                assert dc.targets[v].size == 0
            else:
                assert dc.probs[v].sum() == pytest.approx(1.0, abs=1e-12)
                # strict descendants only
                assert v not in set(dc.targets[v].tolist())

    def test_star_first_step_hits_leaves_uniformly(self):
        _, _, dc = chain_for(build_star, 8, 4)
        probs = dict(zip(dc.targets[0].tolist(), dc.probs[0]))
        for leaf in (1, 2, 3, 4):
            assert probs[leaf] == pytest.approx(0.25)

    def test_path_first_step_uniform(self):
        _, _, dc = chain_for(build_path, 4, True)
        assert np.allclose(dc.probs[0], 0.25)


class TestHittingTimes:
    def test_single_edge_meets_bound_with_equality(self):
        _, _, dc = chain_for(build_star, 1, 1)
        ht = exact_hitting_times(dc)
        assert ht.root_value == pytest.approx(1.0)
        assert hitting_time_bound(dc) == pytest.approx(1.0)

    def test_star_one_step(self):
        _, _, dc = chain_for(build_star, 12, 5)
        assert exact_hitting_times(dc).root_value == pytest.approx(1.0)
        assert hitting_time_bound(dc) == pytest.approx(math.log2(6))

    def test_path_dp_value(self):
        _, _, dc = chain_for(build_path, 5, True)
        ht = exact_hitting_times(dc)
        # hand recursion: E5=0, E4=1, E3=3/2, E2=11/6, E1=25/12, Er=137/60
        assert ht.root_value == pytest.approx(137 / 60, rel=1e-12)
        assert ht.root_value <= hitting_time_bound(dc)

    def test_dp_matches_linear_system_on_random_trees(self):
        count = 0
        seed = 0
        while count < 12:
            seed += 1
            tree, oracle = build_random_tree(70, 3, 0.15, seed)
            marked = shallowest_marked(tree, oracle)
            if not marked.members:
                continue
            st = solution_tree(tree, marked)
            ka = kappa_assignment(st, resistance_profile(st))
            dc = descent_chain(st, ka)
            dp = exact_hitting_times(dc).root_value
            assert dp == pytest.approx(brute_force_hitting_time(dc, tree.root), rel=1e-10)
            assert dp <= hitting_time_bound(dc) + 1e-12
            count += 1

    def test_per_vertex_refinement_dominates_dp(self):
        for args in [(build_path, 6, True), (build_star, 9, 3)]:
            _, _, dc = chain_for(*args)
            ht = exact_hitting_times(dc)
            bound = per_vertex_hitting_bound(dc)
            for v in dc.st.bfs_order():
                if v not in dc.st.leaf_set.members:
                    assert ht.expected[v] <= bound[v] + 1e-9


class TestMonteCarlo:
    def test_single_edge_always_one_step(self):
        _, _, dc = chain_for(build_star, 1, 1)
        mean, _ = simulate_descent(dc, 200, np.random.default_rng(0))
        assert mean == 1.0

    def test_path_within_three_stderr(self):
        _, _, dc = chain_for(build_path, 5, True)
        exact = exact_hitting_times(dc).root_value
        mean, err = simulate_descent(dc, 20_000, np.random.default_rng(1))
        assert abs(mean - exact) <= 3 * err

    def test_rejects_zero_trials(self):
        _, _, dc = chain_for(build_star, 2, 1)
        with pytest.raises(ValueError):
            simulate_descent(dc, 0, np.random.default_rng(0))


class TestQuantumLink:
    def test_star_matches_loose_bound(self):
        tree, oracle = build_star(8, 2)
        st = solution_tree(tree, shallowest_marked(tree, oracle))
        eta = resistance_profile(st).eta_root
        report = quantum_vs_chain_check(tree, oracle, eta, 0.05)
        assert report.passed
        assert report.tv_distance <= 0.5

    def test_single_edge_point_mass(self):
        tree, oracle = build_star(1, 1)
        report = quantum_vs_chain_check(tree, oracle, 1.0, 0.05)
        assert report.tv_distance <= 0.05
        assert report.chain_law == {1: 1.0}

    def test_path_uniform_law_matches(self):
        tree, oracle = build_path(4, True)
        report = quantum_vs_chain_check(tree, oracle, 4.0, 0.05)
        assert report.chain_law == pytest.approx({1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25})
        assert report.tv_distance <= 0.05
