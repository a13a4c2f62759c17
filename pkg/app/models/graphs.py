"""
Graph value types and the graph operations the structure learners rely on.

Nodes are positional indices ``0..p-1``; column names live on the Dataset.
``Dag`` and ``Pdag`` are frozen and hashable, so they can be shared between
threads and worker processes and used as cache keys.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations, permutations, product
from math import comb
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from utils.error_handler import InvalidInputError, RefusalError, StructuralError

Edge = Tuple[int, int]
UndirectedEdge = FrozenSet[int]

# Largest p for which enumerate_dags materializes graphs (29,281 DAGs at p=5)
ENUMERATION_CAP = 5


def _check_edges(edges: Iterable[Sequence[int]], p: int) -> FrozenSet[Edge]:
    if p < 1:
        raise InvalidInputError(f"node count must be >= 1, got {p}")
    checked = set()
    for edge in edges:
        i, j = (int(v) for v in edge)
        if i == j:
            raise InvalidInputError(f"self-loop on node {i}")
        if not (0 <= i < p and 0 <= j < p):
            raise InvalidInputError(f"edge {i}->{j} out of range for p={p}")
        checked.add((i, j))
    return frozenset(checked)


def _digraph(p: int, edges: Iterable[Edge]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(p))
    graph.add_edges_from(edges)
    return graph


def is_acyclic(edges: Iterable[Sequence[int]], p: int) -> bool:
    """True iff the directed edge list over nodes 0..p-1 admits a topological order"""
    return nx.is_directed_acyclic_graph(_digraph(p, _check_edges(edges, p)))


@dataclass(frozen=True)
class TopologicalOrder:
    """A permutation of the nodes, causes first"""

    pi: Tuple[int, ...]

    def __post_init__(self):
        pi = tuple(int(v) for v in self.pi)
        if sorted(pi) != list(range(len(pi))):
            raise InvalidInputError(f"not a permutation of 0..{len(pi) - 1}: {pi}")
        object.__setattr__(self, "pi", pi)

    def __len__(self) -> int:
        return len(self.pi)

    def __iter__(self) -> Iterator[int]:
        return iter(self.pi)

    def position(self) -> Dict[int, int]:
        return {node: rank for rank, node in enumerate(self.pi)}

    def is_topological_for(self, g: "Dag") -> bool:
        if len(self.pi) != g.p:
            return False
        rank = self.position()
        return all(rank[i] < rank[j] for i, j in g.edges)


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on ``p`` nodes; ``(i, j)`` in ``edges`` means i -> j"""

    p: int
    edges: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", _check_edges(self.edges, self.p))
        if not nx.is_directed_acyclic_graph(self.nx_graph):
            cycle = nx.find_cycle(self.nx_graph)
            raise InvalidInputError(f"edges contain a directed cycle: {cycle}")

    @classmethod
    def empty(cls, p: int) -> "Dag":
        return cls(p, frozenset())

    @cached_property
    def nx_graph(self) -> nx.DiGraph:
        return _digraph(self.p, self.edges)

    @cached_property
    def _parent_sets(self) -> Tuple[FrozenSet[int], ...]:
        return tuple(frozenset(self.nx_graph.predecessors(j)) for j in range(self.p))

    @cached_property
    def _descendant_sets(self) -> Tuple[FrozenSet[int], ...]:
        return tuple(frozenset(nx.descendants(self.nx_graph, i)) for i in range(self.p))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def parents(self, j: int) -> FrozenSet[int]:
        return self._parent_sets[j]

    def children(self, i: int) -> FrozenSet[int]:
        return frozenset(self.nx_graph.successors(i))

    def descendants(self, i: int) -> FrozenSet[int]:
        """Strict descendants of ``i`` (``i`` itself excluded)"""
        return self._descendant_sets[i]

    def ancestors(self, j: int) -> FrozenSet[int]:
        return frozenset(nx.ancestors(self.nx_graph, j))

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edges

    def adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self.edges or (j, i) in self.edges

    def sorted_edges(self) -> Tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    def topological_order(self) -> TopologicalOrder:
        return TopologicalOrder(tuple(nx.lexicographical_topological_sort(self.nx_graph)))

    def skeleton(self) -> FrozenSet[UndirectedEdge]:
        return frozenset(frozenset(edge) for edge in self.edges)

    def immoralities(self) -> FrozenSet[Tuple[int, int, int]]:
        """Triples ``(a, c, b)`` with a -> c <- b, a < b, and a, b non-adjacent"""
        found = set()
        for c in range(self.p):
            for a, b in combinations(sorted(self.parents(c)), 2):
                if not self.adjacent(a, b):
                    found.add((a, c, b))
        return frozenset(found)

    def adjacency_matrix(self) -> np.ndarray:
        matrix = np.zeros((self.p, self.p), dtype=int)
        for i, j in self.edges:
            matrix[i, j] = 1
        return matrix

    def as_pdag(self) -> "Pdag":
        return Pdag(self.p, self.edges, frozenset())

    def relabel(self, mapping: Sequence[int]) -> "Dag":
        """Rename node ``i`` to ``mapping[i]``"""
        if sorted(mapping) != list(range(self.p)):
            raise InvalidInputError(f"relabelling must be a permutation of 0..{self.p - 1}")
        return Dag(self.p, frozenset((mapping[i], mapping[j]) for i, j in self.edges))


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph; a completed PDAG stands for a Markov equivalence class"""

    p: int
    directed: FrozenSet[Edge] = frozenset()
    undirected: FrozenSet[UndirectedEdge] = frozenset()

    def __post_init__(self):
        directed = _check_edges(self.directed, self.p)
        undirected: Set[UndirectedEdge] = set()
        for pair in self.undirected:
            nodes = sorted(int(v) for v in pair)
            if len(set(nodes)) != 2:
                raise InvalidInputError(f"undirected edge must join two distinct nodes: {nodes}")
            i, j = nodes
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise InvalidInputError(f"edge {i}--{j} out of range for p={self.p}")
            undirected.add(frozenset((i, j)))
        directed_skeleton = set()
        for i, j in directed:
            pair = frozenset((i, j))
            if pair in directed_skeleton:
                raise InvalidInputError(f"both {i}->{j} and {j}->{i} present")
            directed_skeleton.add(pair)
        overlap = directed_skeleton & undirected
        if overlap:
            raise InvalidInputError(f"pairs both directed and undirected: {sorted(map(sorted, overlap))}")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", frozenset(undirected))

    def edge_type(self, i: int, j: int) -> str:
        """One of ``none``, ``forward`` (i -> j), ``backward`` (j -> i), ``undirected``"""
        if (i, j) in self.directed:
            return "forward"
        if (j, i) in self.directed:
            return "backward"
        if frozenset((i, j)) in self.undirected:
            return "undirected"
        return "none"

    def adjacent(self, i: int, j: int) -> bool:
        return self.edge_type(i, j) != "none"

    def skeleton(self) -> FrozenSet[UndirectedEdge]:
        return frozenset(frozenset(e) for e in self.directed) | self.undirected

    def sorted_undirected(self) -> Tuple[Edge, ...]:
        return tuple(sorted(tuple(sorted(e)) for e in self.undirected))

    def to_dag(self) -> Dag:
        if self.undirected:
            raise StructuralError(f"graph has {len(self.undirected)} undirected edges")
        return Dag(self.p, self.directed)


def as_pdag(graph) -> Pdag:
    return graph.as_pdag() if isinstance(graph, Dag) else graph


# Enumeration


@lru_cache(maxsize=None)
def count_dags(p: int) -> int:
    """Number of labeled DAGs on ``p`` nodes by the inclusion-exclusion recurrence"""
    if p < 0:
        raise InvalidInputError(f"node count must be >= 0, got {p}")
    if p == 0:
        return 1
    return sum(
        (-1) ** (k + 1) * comb(p, k) * 2 ** (k * (p - k)) * count_dags(p - k)
        for k in range(1, p + 1)
    )


def _close_reachability(reach: Tuple[int, ...], source: int, target: int) -> Tuple[int, ...]:
    # reach[x] is a bitmask of nodes reachable from x
    gained = reach[target] | (1 << target)
    return tuple(
        mask | gained if (x == source or (mask >> source) & 1) else mask
        for x, mask in enumerate(reach)
    )


def enumerate_dags(p: int, max_nodes: int = ENUMERATION_CAP) -> List[Dag]:
    """
    Every labeled DAG on ``p`` nodes, each exactly once.

    Each unordered pair is in turn left empty or oriented one of two ways;
    orientations that close a cycle are pruned through a reachability bitmask.
    """
    if p < 1:
        raise InvalidInputError(f"node count must be >= 1, got {p}")
    if p > max_nodes:
        raise RefusalError(
            f"enumerating DAGs on p={p} nodes means {count_dags(p):,} graphs; "
            f"cap is p={max_nodes}"
        )
    pairs = list(combinations(range(p), 2))
    graphs: List[Dag] = []
    chosen: List[Edge] = []

    def extend(k: int, reach: Tuple[int, ...]):
        if k == len(pairs):
            graphs.append(Dag(p, frozenset(chosen)))
            return
        i, j = pairs[k]
        extend(k + 1, reach)
        for source, target in ((i, j), (j, i)):
            if (reach[target] >> source) & 1:
                continue
            chosen.append((source, target))
            extend(k + 1, _close_reachability(reach, source, target))
            chosen.pop()

    extend(0, (0,) * p)
    return graphs


# Neighbourhood


@dataclass(frozen=True)
class EdgeMove:
    """
    One edit of a DAG. ``(source, target)`` is the edge added, removed or
    produced by the reversal, so ``target`` is the node whose parent set
    gains or loses the edge.
    """

    kind: str
    source: int
    target: int
    graph: Dag


def _dag_if_acyclic(p: int, edges: FrozenSet[Edge]) -> Optional[Dag]:
    return Dag(p, edges) if is_acyclic(edges, p) else None


def neighbor_moves(g: Dag) -> List[EdgeMove]:
    moves: List[EdgeMove] = []
    for i, j in permutations(range(g.p), 2):
        if (i, j) in g.edges:
            without = g.edges - {(i, j)}
            moves.append(EdgeMove("remove", i, j, Dag(g.p, without)))
            reversed_graph = _dag_if_acyclic(g.p, without | {(j, i)})
            if reversed_graph is not None:
                moves.append(EdgeMove("reverse", j, i, reversed_graph))
        elif (j, i) not in g.edges and i not in g.descendants(j):
            moves.append(EdgeMove("add", i, j, Dag(g.p, g.edges | {(i, j)})))
    return moves


def neighbors(g: Dag) -> List[Dag]:
    """All acyclic graphs one edge addition, removal or reversal away from ``g``"""
    return [move.graph for move in neighbor_moves(g)]


# d-separation


def d_separated(g: Dag, a: Iterable[int], b: Iterable[int], s: Iterable[int] = ()) -> bool:
    """
    True iff ``s`` blocks every path between ``a`` and ``b`` in ``g``.

    Reachability over (node, direction) states: "up" means the trail arrived
    from a child, "down" that it arrived from a parent.
    """
    sets = []
    for name, nodes in (("A", a), ("B", b), ("S", s)):
        members = frozenset(int(v) for v in nodes)
        bad = [v for v in members if not 0 <= v < g.p]
        if bad:
            raise InvalidInputError(f"{name} contains nodes outside 0..{g.p - 1}: {bad}")
        sets.append(members)
    a_set, b_set, s_set = sets
    if a_set & b_set or a_set & s_set or b_set & s_set:
        raise InvalidInputError("node sets A, B and S must be pairwise disjoint")
    if not a_set or not b_set:
        return True

    opens_collider = set(s_set)
    for node in s_set:
        opens_collider |= g.ancestors(node)

    visited = set()
    stack = [(node, "up") for node in a_set]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node in b_set:
            return False
        if direction == "up" and node not in s_set:
            stack.extend((parent, "up") for parent in g.parents(node))
            stack.extend((child, "down") for child in g.children(node))
        elif direction == "down":
            if node not in s_set:
                stack.extend((child, "down") for child in g.children(node))
            if node in opens_collider:
                stack.extend((parent, "up") for parent in g.parents(node))
    return True


# Markov equivalence


def _meek_orients(a: int, b: int, p: int, directed: Set[Edge], undirected: Set[UndirectedEdge]) -> bool:
    """Whether one of Meek's rules R1-R3 forces the undirected edge a -- b to a -> b"""

    def adjacent(u: int, v: int) -> bool:
        return (u, v) in directed or (v, u) in directed or frozenset((u, v)) in undirected

    for c in range(p):
        if c in (a, b):
            continue
        # R1: c -> a -- b, c and b non-adjacent
        if (c, a) in directed and not adjacent(c, b):
            return True
        # R2: a -> c -> b
        if (a, c) in directed and (c, b) in directed:
            return True
    # R3: a -- c -> b and a -- d -> b with c, d non-adjacent
    kites = [
        c for c in range(p)
        if c not in (a, b) and frozenset((a, c)) in undirected and (c, b) in directed
    ]
    return any(not adjacent(c, d) for c, d in combinations(kites, 2))


def apply_meek_rules(p: int, directed: Set[Edge], undirected: Set[UndirectedEdge]) -> Tuple[Set[Edge], Set[UndirectedEdge]]:
    directed, undirected = set(directed), set(undirected)
    changed = True
    while changed:
        changed = False
        for edge in sorted(undirected, key=sorted):
            x, y = sorted(edge)
            for a, b in ((x, y), (y, x)):
                if _meek_orients(a, b, p, directed, undirected):
                    undirected.discard(edge)
                    directed.add((a, b))
                    changed = True
                    break
            if changed:
                break
    return directed, undirected


def cpdag(g: Dag) -> Pdag:
    """Completed PDAG of the Markov equivalence class of ``g``"""
    directed: Set[Edge] = set()
    for a, c, b in g.immoralities():
        directed.update({(a, c), (b, c)})
    undirected = {frozenset(edge) for edge in g.edges if edge not in directed}
    directed, undirected = apply_meek_rules(g.p, directed, undirected)
    return Pdag(g.p, frozenset(directed), frozenset(undirected))


def dag_extensions(c: Pdag, max_nodes: int = ENUMERATION_CAP) -> List[Dag]:
    """All DAGs whose completed PDAG is ``c``"""
    if c.p > max_nodes:
        raise RefusalError(
            f"extension enumeration is capped at p={max_nodes} "
            f"({count_dags(max_nodes):,} labeled DAGs); got p={c.p}"
        )
    undirected = c.sorted_undirected()
    members: List[Dag] = []
    for flips in product((False, True), repeat=len(undirected)):
        edges = set(c.directed)
        edges.update((j, i) if flip else (i, j) for (i, j), flip in zip(undirected, flips))
        candidate = _dag_if_acyclic(c.p, frozenset(edges))
        if candidate is not None and cpdag(candidate) == c:
            members.append(candidate)
    if not members:
        raise StructuralError("graph is not a completed PDAG: no consistent DAG extension")
    return members
