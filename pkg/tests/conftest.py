"""Shared fixtures: solution-tree bundles for the standard small instances."""

from dataclasses import dataclass

import pytest

from qbacktrack import (
    KappaAssignment,
    MarkingOracle,
    ResistanceProfile,
    SolutionTree,
    Tree,
    build_path,
    build_star,
    kappa_assignment,
    resistance_profile,
    shallowest_marked,
    solution_tree,
)


@dataclass
class Instance:
    """A tree with its derived ground-truth structures."""

    tree: Tree
    oracle: MarkingOracle
    st: SolutionTree
    rp: ResistanceProfile
    ka: KappaAssignment

    @property
    def eta_bar(self) -> float:
        return self.rp.eta_root


def make_instance(builder, *args, **kwargs) -> Instance:
    tree, oracle = builder(*args, **kwargs)
    marked = shallowest_marked(tree, oracle)
    st = solution_tree(tree, marked)
    rp = resistance_profile(st)
    ka = kappa_assignment(st, rp)
    return Instance(tree=tree, oracle=oracle, st=st, rp=rp, ka=ka)


@pytest.fixture(scope="session")
def single_edge() -> Instance:
    return make_instance(build_star, 1, 1)


@pytest.fixture(scope="session")
def star_64_4() -> Instance:
    return make_instance(build_star, 64, 4)


@pytest.fixture(scope="session")
def star_8_2() -> Instance:
    return make_instance(build_star, 8, 2)


@pytest.fixture(scope="session")
def path_4() -> Instance:
    return make_instance(build_path, 4, True)
