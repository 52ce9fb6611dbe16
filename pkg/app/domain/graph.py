"""Coding-dependency DAG of a scalable coder.

Node 0 is the base layer; node i also stands for resolution i. An arc (i -> j)
means layer j is predicted from layer i. The resolution subgraph of i is the
union of every directed path from 0 to i.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Sequence, Tuple

import networkx as nx

from app.domain.errors import CycleError, NodeIndexError, SourceError, UnreachableError
from app.infra import get_logger

logger = get_logger(__name__)

Arc = Tuple[int, int]


@dataclass(frozen=True)
class ResolutionSubgraph:
    resolution: int
    members: Tuple[int, ...]
    parent_set: FrozenSet[int]

    def __contains__(self, node: object) -> bool:
        return node in self.members


@dataclass(frozen=True)
class LayerDag:
    """Validated, immutable coding-dependency DAG with precomputed resolution subgraphs."""

    node_count: int
    arcs: Tuple[Arc, ...]
    topological_order: Tuple[int, ...]
    subgraphs: Tuple[ResolutionSubgraph, ...] = field(repr=False)
    _parents: Tuple[FrozenSet[int], ...] = field(repr=False)

    source: int = 0

    def check_node(self, i: int) -> int:
        try:
            index = operator.index(i)
        except TypeError:
            raise NodeIndexError(f"node {i!r} is not an integer index") from None
        if not 0 <= index < self.node_count:
            raise NodeIndexError(f"node {i} out of range [0, {self.node_count})")
        return index

    def members(self, i: int) -> Tuple[int, ...]:
        return self.subgraphs[self.check_node(i)].members

    def describe(self) -> Dict[str, object]:
        return {
            "node_count": self.node_count,
            "arcs": [list(arc) for arc in self.arcs],
            "topological_order": list(self.topological_order),
            "subgraphs": {
                str(sub.resolution): {
                    "members": list(sub.members),
                    "parents": sorted(sub.parent_set),
                }
                for sub in self.subgraphs
            },
        }


def build_dag(node_count: int, arcs: Iterable[Sequence[int]]) -> LayerDag:
    """Validate the arc list and return an immutable LayerDag.

    Raises NodeIndexError, CycleError, SourceError or UnreachableError, checked in that order.
    """
    if node_count < 1:
        raise NodeIndexError(f"node_count must be >= 1, got {node_count}")

    arc_set: set[Arc] = set()
    for arc in arcs:
        if len(arc) != 2:
            raise NodeIndexError(f"arc {tuple(arc)} must have exactly two endpoints")
        try:
            i, j = operator.index(arc[0]), operator.index(arc[1])
        except TypeError:
            raise NodeIndexError(f"arc {tuple(arc)} endpoints must be integer indices") from None
        for endpoint in (i, j):
            if not 0 <= endpoint < node_count:
                raise NodeIndexError(
                    f"arc ({i} -> {j}) endpoint {endpoint} out of range [0, {node_count})"
                )
        if i == j:
            raise NodeIndexError(f"self-arc on node {i} is not allowed")
        arc_set.add((i, j))

    graph = nx.DiGraph()
    graph.add_nodes_from(range(node_count))
    graph.add_edges_from(sorted(arc_set))

    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        raise CycleError([edge[0] for edge in cycle])

    into_source = sorted(graph.predecessors(0))
    if into_source:
        raise SourceError(into_source)

    reachable = nx.descendants(graph, 0) | {0}
    unreachable = sorted(set(range(node_count)) - reachable)
    if unreachable:
        raise UnreachableError(unreachable)

    order = tuple(nx.lexicographical_topological_sort(graph))
    parent_sets = tuple(frozenset(graph.predecessors(i)) for i in range(node_count))
    subgraphs = tuple(
        _subgraph(graph, i, reachable, parent_sets[i]) for i in range(node_count)
    )
    logger.debug("Built DAG with %d nodes and %d arcs", node_count, len(arc_set))
    return LayerDag(
        node_count=node_count,
        arcs=tuple(sorted(arc_set)),
        topological_order=order,
        subgraphs=subgraphs,
        _parents=parent_sets,
    )


def _subgraph(
    graph: nx.DiGraph, i: int, reachable: set[int], parent_set: FrozenSet[int]
) -> ResolutionSubgraph:
    # Every ancestor of i is reachable from 0, so the ancestor set already lies on a 0 -> i path.
    members = (nx.ancestors(graph, i) | {i}) & reachable
    return ResolutionSubgraph(
        resolution=i,
        members=tuple(sorted(members)),
        parent_set=parent_set,
    )


def resolution_subgraph(dag: LayerDag, i: int) -> ResolutionSubgraph:
    return dag.subgraphs[dag.check_node(i)]


def parents(dag: LayerDag, i: int) -> FrozenSet[int]:
    return dag._parents[dag.check_node(i)]


__all__ = [
    "Arc",
    "LayerDag",
    "ResolutionSubgraph",
    "build_dag",
    "parents",
    "resolution_subgraph",
]
