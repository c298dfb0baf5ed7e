"""Rooted trees with marking oracles.

The tree is the search space: a bounded-degree rooted tree whose vertices may
be "marked" (solutions).  Everything downstream (resistance, walk operators,
the search algorithms) consumes the structures defined here.

Vertex ids are dense integers ``0 .. n_vertices-1``.  Generators assign them
in breadth-first order so that matrix indexing stays stable; the JSON loader
accepts any dense labelling.  Trees and oracles are immutable after
construction except for the oracle's query counter and its unmark overlay.

By convention the root is never marked.  If a raw marking says otherwise, the
oracle records the fact (``root_was_marked``) and reports the root unmarked
from then on, so downstream code may always assume an unmarked root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tree",
    "MarkingOracle",
    "MarkedSet",
    "SolutionTree",
    "TreeStructureError",
    "NoSolutionTree",
    "build_star",
    "build_path",
    "build_random_tree",
    "build_complete_tree",
    "build_dpll_tree",
    "shallowest_marked",
    "solution_tree",
    "tree_to_json",
    "tree_from_json",
]


class TreeStructureError(ValueError):
    """Vertex data does not describe a single rooted tree.

    ``violation`` is a short machine-readable tag (``"cycle"``,
    ``"disconnected"``, ``"multiple_parents"``, ``"ids"``, ``"schema"``).
    """

    def __init__(self, violation: str, message: str):
        super().__init__(message)
        self.violation = violation


class NoSolutionTree(ValueError):
    """Raised when a solution tree is requested for an empty marked set."""


@dataclass(frozen=True)
class Tree:
    """A rooted tree on dense integer vertex ids.

    Parameters
    ----------
    root : int
        Id of the root vertex.
    parent : np.ndarray
        ``parent[v]`` is the parent id of ``v``; ``-1`` at the root.
    children : tuple of tuples
        ``children[v]`` lists the children of ``v`` in order.
    depth : np.ndarray
        ``depth[v]`` is the number of edges from the root to ``v``.
    size_bound : int
        Upper bound on the number of vertices (generators record the
        realized size).
    depth_bound : int
        Upper bound on the depth.
    degree_bound : int
        Upper bound on the degree of any vertex (parent plus children).
    """

    root: int
    parent: np.ndarray
    children: tuple[tuple[int, ...], ...]
    depth: np.ndarray
    size_bound: int
    depth_bound: int
    degree_bound: int

    @property
    def n_vertices(self) -> int:
        return int(self.parent.shape[0])

    def degree(self, v: int) -> int:
        base = 0 if v == self.root else 1
        return base + len(self.children[v])

    def subtree_vertices(self, v: int) -> list[int]:
        """Vertices of the subtree rooted at ``v``, in BFS order."""
        order = [v]
        head = 0
        while head < len(order):
            order.extend(self.children[order[head]])
            head += 1
        return order

    def path_from_root(self, v: int) -> list[int]:
        """Vertices on the root-to-``v`` path, root first."""
        back = [v]
        while back[-1] != self.root:
            back.append(int(self.parent[back[-1]]))
        back.reverse()
        return back

    def validate(self) -> None:
        """Check the structural invariants; raises TreeStructureError."""
        n = self.n_vertices
        if not (0 <= self.root < n):
            raise TreeStructureError("ids", f"root {self.root} out of range")
        seen_parent = np.full(n, -2, dtype=np.int64)
        for v, kids in enumerate(self.children):
            for c in kids:
                if not (0 <= c < n):
                    raise TreeStructureError("ids", f"child id {c} out of range")
                if seen_parent[c] != -2:
                    raise TreeStructureError(
                        "multiple_parents", f"vertex {c} has more than one parent"
                    )
                seen_parent[c] = v
        if seen_parent[self.root] != -2:
            raise TreeStructureError("cycle", "root listed as a child")
        reached = self.subtree_vertices(self.root)
        if len(reached) != n:
            raise TreeStructureError(
                "disconnected", f"only {len(reached)} of {n} vertices reachable from root"
            )
        for v in range(n):
            want = -1 if v == self.root else seen_parent[v]
            if int(self.parent[v]) != int(want):
                raise TreeStructureError(
                    "ids", f"parent map inconsistent with children lists at vertex {v}"
                )
        if int(self.depth[self.root]) != 0:
            raise TreeStructureError("ids", "root depth must be 0")
        for v in range(n):
            if v != self.root and int(self.depth[v]) != int(self.depth[self.parent[v]]) + 1:
                raise TreeStructureError("ids", f"depth law violated at vertex {v}")
        if n > self.size_bound:
            raise TreeStructureError("ids", "size bound smaller than realized size")
        if int(self.depth.max(initial=0)) > self.depth_bound:
            raise TreeStructureError("ids", "depth bound smaller than realized depth")
        if max((self.degree(v) for v in range(n)), default=0) > self.degree_bound:
            raise TreeStructureError("ids", "degree bound smaller than realized degree")


def _tree_from_children(children: Sequence[Sequence[int]], root: int = 0) -> Tree:
    """Assemble a Tree from children lists, computing depths and bounds."""
    n = len(children)
    parent = np.full(n, -1, dtype=np.int64)
    for v, kids in enumerate(children):
        for c in kids:
            parent[c] = v
    depth = np.zeros(n, dtype=np.int64)
    order = [root]
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for c in children[v]:
            depth[c] = depth[v] + 1
            order.append(c)
    if len(order) != n:
        raise TreeStructureError("disconnected", "children lists do not span all vertices")
    degrees = [(0 if v == root else 1) + len(children[v]) for v in range(n)]
    tree = Tree(
        root=root,
        parent=parent,
        children=tuple(tuple(k) for k in children),
        depth=depth,
        size_bound=n,
        depth_bound=int(depth.max(initial=0)),
        degree_bound=max(degrees, default=0),
    )
    parent.setflags(write=False)
    depth.setflags(write=False)
    return tree


class MarkingOracle:
    """The marking function f with query accounting.

    Wraps a boolean mark per vertex.  Calling the oracle increments
    ``query_counter``; use :meth:`peek` for bookkeeping reads that are not
    part of an algorithm's query budget.  ``unmark`` supports the find-all
    loop and bumps ``version`` so caches can invalidate.

    Counter updates are plain int increments (atomic under the GIL); for
    multi-process use, aggregate per worker.
    """

    def __init__(self, marks: Iterable[bool] | np.ndarray, root: int):
        marks = np.asarray(marks, dtype=bool).copy()
        self.root_was_marked = bool(marks[root])
        marks[root] = False
        self._marks = marks
        self.root = root
        self.query_counter = 0
        self.version = 0

    def __call__(self, v: int) -> bool:
        self.query_counter += 1
        return bool(self._marks[v])

    is_marked = __call__

    def peek(self, v: int) -> bool:
        """Read a mark without counting a query."""
        return bool(self._marks[v])

    def marked_vertices(self) -> list[int]:
        """All marked vertex ids (no queries counted)."""
        return [int(v) for v in np.flatnonzero(self._marks)]

    def unmark(self, v: int) -> None:
        if not self._marks[v]:
            raise ValueError(f"vertex {v} is not marked")
        self._marks[v] = False
        self.version += 1

    def copy(self) -> "MarkingOracle":
        dup = MarkingOracle(self._marks.copy(), self.root)
        dup.root_was_marked = self.root_was_marked
        return dup

    @property
    def n_vertices(self) -> int:
        return int(self._marks.shape[0])


@dataclass(frozen=True)
class MarkedSet:
    """The shallowest marked vertices M and the per-subtree map M(v).

    ``members`` holds marked vertices with no marked ancestor.
    ``per_subtree[v]`` is M intersected with the subtree of ``v``; vertices
    with an empty intersection are omitted from the dict.
    """

    members: frozenset[int]
    per_subtree: dict[int, frozenset[int]]

    def below(self, v: int) -> frozenset[int]:
        return self.per_subtree.get(v, frozenset())

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SolutionTree:
    """The subtree spanned by all root-to-M paths.

    Its leaves are exactly the shallowest marked vertices.  Edges are
    inherited from the parent tree; ``children_in`` restricts a vertex's
    children to the solution tree.
    """

    tree: Tree
    vertices: frozenset[int]
    leaf_set: MarkedSet

    def children_in(self, v: int) -> tuple[int, ...]:
        return tuple(c for c in self.tree.children[v] if c in self.vertices)

    def bfs_order(self) -> list[int]:
        order = [self.tree.root]
        head = 0
        while head < len(order):
            order.extend(self.children_in(order[head]))
            head += 1
        return order

    @property
    def root(self) -> int:
        return self.tree.root

    def __len__(self) -> int:
        return len(self.vertices)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def build_star(num_leaves: int, num_marked: int) -> tuple[Tree, MarkingOracle]:
    """Root of degree ``num_leaves`` with the first ``num_marked`` leaves marked."""
    if num_leaves < 1:
        raise ValueError("num_leaves must be >= 1")
    if not (0 <= num_marked <= num_leaves):
        raise ValueError("num_marked must lie in [0, num_leaves]")
    children = [tuple(range(1, num_leaves + 1))] + [()] * num_leaves
    tree = _tree_from_children(children)
    marks = np.zeros(num_leaves + 1, dtype=bool)
    marks[1 : num_marked + 1] = True
    return tree, MarkingOracle(marks, tree.root)


def build_path(num_edges: int, mark_leaf: bool) -> tuple[Tree, MarkingOracle]:
    """A path of ``num_edges`` unit edges; the far leaf marked on request."""
    if num_edges < 1:
        raise ValueError("num_edges must be >= 1")
    children = [(v + 1,) for v in range(num_edges)] + [()]
    tree = _tree_from_children(children)
    marks = np.zeros(num_edges + 1, dtype=bool)
    marks[num_edges] = mark_leaf
    return tree, MarkingOracle(marks, tree.root)


def build_complete_tree(
    depth: int, branching: int, mark_leaves: bool = True
) -> tuple[Tree, MarkingOracle]:
    """Complete ``branching``-ary tree of the given depth.

    With ``mark_leaves`` every deepest vertex is marked.  Handy fixture: the
    resistance of the fully marked binary tree follows the halving recursion
    eta -> (eta + 1) / 2 level by level.
    """
    if depth < 0 or branching < 1:
        raise ValueError("depth must be >= 0 and branching >= 1")
    children: list[tuple[int, ...]] = []
    level = [0]
    next_id = 1
    for _ in range(depth):
        new_level = []
        for _v in level:
            kids = tuple(range(next_id, next_id + branching))
            children.append(kids)
            next_id += branching
            new_level.extend(kids)
        level = new_level
    children.extend(() for _ in level)
    tree = _tree_from_children(children)
    marks = np.zeros(tree.n_vertices, dtype=bool)
    if mark_leaves and depth > 0:
        marks[level] = True
    return tree, MarkingOracle(marks, tree.root)


def build_random_tree(
    T_target: int, d: int, mark_prob: float, seed: int
) -> tuple[Tree, MarkingOracle]:
    """Grow a random tree of ``T_target`` vertices with degree bound ``d``.

    Pure function of its arguments: the same seed yields a bit-identical
    tree.  Vertices are relabelled breadth-first after growth; each non-root
    vertex is then marked independently with probability ``mark_prob``.
    """
    if T_target < 2:
        raise ValueError("T_target must be >= 2")
    if d < 2:
        raise ValueError("degree bound d must be >= 2")
    if not (0.0 <= mark_prob <= 1.0):
        raise ValueError("mark_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    kids: list[list[int]] = [[]]
    capacity = {0: d}  # root may carry d children, others d - 1
    for new in range(1, T_target):
        options = sorted(capacity)
        host = int(options[rng.integers(len(options))])
        kids[host].append(new)
        kids.append([])
        capacity[host] -= 1
        if capacity[host] == 0:
            del capacity[host]
        if d > 1:
            capacity[new] = d - 1
    # breadth-first relabel
    order = [0]
    head = 0
    while head < len(order):
        order.extend(kids[order[head]])
        head += 1
    new_id = {old: i for i, old in enumerate(order)}
    children = [tuple(new_id[c] for c in kids[old]) for old in order]
    tree = _tree_from_children(children)
    marks = np.zeros(T_target, dtype=bool)
    marks[1:] = rng.random(T_target - 1) < mark_prob
    return tree, MarkingOracle(marks, tree.root)


def _clause_violated(clause: Sequence[int], assignment: dict[int, bool]) -> bool:
    # violated iff every literal is assigned and false
    for lit in clause:
        var = abs(lit)
        if var not in assignment:
            return False
        if assignment[var] == (lit > 0):
            return False
    return True


def build_dpll_tree(
    cnf: Sequence[Sequence[int]], var_order: Sequence[int]
) -> tuple[Tree, MarkingOracle]:
    """Materialize the DPLL backtracking tree of a CNF formula.

    Vertices are partial assignments along ``var_order`` (DIMACS-style
    literals: ``+v`` true, ``-v`` false).  A vertex's children are the
    extensions by the next variable that violate no clause; marked vertices
    are the complete (hence satisfying) assignments.  An empty CNF yields the
    full binary tree with every leaf marked.

    The implicit tree is expanded fully before spectral simulation; each
    vertex expansion corresponds to one query of the children oracle.
    """
    variables = list(var_order)
    if len(set(variables)) != len(variables):
        raise ValueError("var_order must not repeat variables")
    var_set = set(variables)
    for clause in cnf:
        for lit in clause:
            if not isinstance(lit, int) or lit == 0:
                raise ValueError(f"bad literal {lit!r}: literals are nonzero ints")
            if abs(lit) not in var_set:
                raise ValueError(f"literal {lit} uses a variable outside var_order")

    # BFS expansion; each vertex carries its partial assignment
    children: list[list[int]] = [[]]
    payload: list[dict[int, bool]] = [{}]
    marks: list[bool] = [False]
    head = 0
    while head < len(children):
        v = head
        head += 1
        assignment = payload[v]
        level = len(assignment)
        if level == len(variables):
            # complete assignment; reached only through non-violating
            # extensions, so it satisfies the formula (the 0-variable root
            # still needs the empty-clause check)
            marks[v] = not any(_clause_violated(c, assignment) for c in cnf)
            continue
        var = variables[level]
        for value in (True, False):
            extended = dict(assignment)
            extended[var] = value
            if any(_clause_violated(c, extended) for c in cnf):
                continue
            new = len(children)
            children[v].append(new)
            children.append([])
            payload.append(extended)
            marks.append(False)
    tree = _tree_from_children(children)
    return tree, MarkingOracle(np.array(marks, dtype=bool), tree.root)


# ---------------------------------------------------------------------------
# Marked-set extraction
# ---------------------------------------------------------------------------


def shallowest_marked(tree: Tree, oracle: MarkingOracle) -> MarkedSet:
    """Extract M, the marked vertices without marked ancestors.

    Descends breadth-first and stops below every marked vertex, so each
    vertex at-or-above M costs exactly one f-query.  Also returns the map
    ``v -> M(v)`` for ancestors of members.
    """
    members: list[int] = []
    queue = [tree.root]
    head = 0
    while head < len(queue):
        v = queue[head]
        head += 1
        if v != tree.root and oracle(v):
            members.append(v)
            continue
        if v == tree.root:
            oracle(v)  # counted; normalized root always reports unmarked
        queue.extend(tree.children[v])
    per: dict[int, set[int]] = {}
    for m in members:
        for u in tree.path_from_root(m):
            per.setdefault(u, set()).add(m)
    return MarkedSet(
        members=frozenset(members),
        per_subtree={v: frozenset(s) for v, s in per.items()},
    )


def solution_tree(tree: Tree, marked: MarkedSet) -> SolutionTree:
    """Union of the root-to-m paths over m in M; leaves are exactly M."""
    if not marked.members:
        raise NoSolutionTree("marked set is empty; no solution tree exists")
    vertices: set[int] = set()
    for m in marked.members:
        vertices.update(tree.path_from_root(m))
    return SolutionTree(tree=tree, vertices=frozenset(vertices), leaf_set=marked)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def tree_to_json(tree: Tree, oracle: MarkingOracle) -> str:
    """Serialize to the interchange format (sorted keys, full precision)."""
    vertices = [
        {
            "id": v,
            "children": [int(c) for c in tree.children[v]],
            "marked": bool(oracle.peek(v)),
        }
        for v in range(tree.n_vertices)
    ]
    return json.dumps({"root": tree.root, "vertices": vertices}, sort_keys=True)


def tree_from_json(text: str | dict) -> tuple[Tree, MarkingOracle]:
    """Parse and validate the interchange format.

    Rejects cycles, forests, repeated parents and non-dense ids with a
    :class:`TreeStructureError` naming the violation.  Ids are kept as given
    (dense 0..n-1 required); generators always emit breadth-first ids but the
    loader does not insist on that ordering.
    """
    data = json.loads(text) if isinstance(text, str) else text
    if not isinstance(data, dict) or "root" not in data or "vertices" not in data:
        raise TreeStructureError("schema", "expected object with 'root' and 'vertices'")
    rows = data["vertices"]
    if not isinstance(rows, list) or not rows:
        raise TreeStructureError("schema", "'vertices' must be a non-empty list")
    n = len(rows)
    ids = []
    for row in rows:
        if not isinstance(row, dict) or "id" not in row or "children" not in row:
            raise TreeStructureError("schema", "vertex rows need 'id' and 'children'")
        ids.append(row["id"])
    if sorted(ids) != list(range(n)):
        raise TreeStructureError("ids", "vertex ids must be dense integers 0..n-1")
    children: list[tuple[int, ...]] = [()] * n
    marks = np.zeros(n, dtype=bool)
    for row in rows:
        v = row["id"]
        kids = row["children"]
        if not all(isinstance(c, int) and 0 <= c < n for c in kids):
            raise TreeStructureError("ids", f"vertex {v} has an out-of-range child")
        if v in kids:
            raise TreeStructureError("cycle", f"vertex {v} is its own child")
        children[v] = tuple(kids)
        marks[v] = bool(row.get("marked", False))
    root = data["root"]
    if not isinstance(root, int) or not (0 <= root < n):
        raise TreeStructureError("ids", "root id out of range")

    parent = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        for c in children[v]:
            if c == root:
                raise TreeStructureError("cycle", "root appears as a child")
            if parent[c] != -1:
                raise TreeStructureError(
                    "multiple_parents", f"vertex {c} has more than one parent"
                )
            parent[c] = v
    # reachability: catches both cycles among non-root vertices and forests
    depth = np.zeros(n, dtype=np.int64)
    order = [root]
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for c in children[v]:
            depth[c] = depth[v] + 1
            order.append(c)
    if len(order) != n:
        orphans = [v for v in range(n) if v != root and parent[v] == -1]
        tag = "disconnected" if orphans else "cycle"
        raise TreeStructureError(tag, f"{n - len(order)} vertices unreachable from root")
    degrees = [(0 if v == root else 1) + len(children[v]) for v in range(n)]
    tree = Tree(
        root=root,
        parent=parent,
        children=tuple(children),
        depth=depth,
        size_bound=n,
        depth_bound=int(depth.max(initial=0)),
        degree_bound=max(degrees, default=0),
    )
    parent.setflags(write=False)
    depth.setflags(write=False)
    tree.validate()
    return tree, MarkingOracle(marks, root)
