#!/usr/bin/env python3
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import (AbstractSet, FrozenSet, Iterable, Iterator, List,
                    Mapping, Optional, Sequence, Set, Tuple, Union)

import numpy as np
from numpy.typing import NDArray

from expertpc._core import ExpertPcError, SeedLike, as_rng

Pair = Tuple[int, int]
Graph = Union['Dag', 'Skeleton']

_VARS_HEADER = re.compile(r'^vars\s*:\s*(?P<names>.*)$')
_UNDIRECTED = re.compile(r'^(?P<a>\S+)\s+--\s+(?P<b>\S+)$')
_DIRECTED = re.compile(r'^(?P<a>\S+)\s+(?:->\s+)?(?P<b>\S+)$')


class GraphError(ExpertPcError):
    pass


class CycleDetected(GraphError):
    pass


class IndexOutOfRange(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class EdgeListError(GraphError):
    pass


class UnknownVertex(EdgeListError):
    pass


def pair(i: int, j: int) -> Pair:
    """Canonical (low, high) form of the unordered pair {i, j}."""
    return (i, j) if i < j else (j, i)


def default_labels(d: int) -> Tuple[str, ...]:
    return tuple(f'x{i}' for i in range(d))


@dataclass(frozen=True)
class Dag:
    d: int
    parents: Tuple[FrozenSet[int], ...]
    labels: Tuple[str, ...] = ()
    _children: Tuple[FrozenSet[int], ...] = field(
        init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if len(self.parents) != self.d:
            raise GraphError(f'Expected {self.d} parent sets, got '
                             f'{len(self.parents)}')
        if not self.labels:
            object.__setattr__(self, 'labels', default_labels(self.d))
        elif len(self.labels) != self.d:
            raise GraphError(f'Expected {self.d} labels, got '
                             f'{len(self.labels)}')
        for child, parents in enumerate(self.parents):
            for parent in parents:
                _check_index(parent, self.d)
                if parent == child:
                    raise SelfLoop(f'Self-loop on vertex {child}')
        object.__setattr__(self, '_children', tuple(
            frozenset(c for c, ps in enumerate(self.parents) if v in ps)
            for v in range(self.d)))
        self.topological_order()

    @property
    def edges(self) -> List[Pair]:
        """Directed edges as sorted (parent, child) pairs."""
        return sorted((parent, child)
                      for child, parents in enumerate(self.parents)
                      for parent in parents)

    def children(self, vertex: int) -> FrozenSet[int]:
        return self._children[vertex]

    def topological_order(self) -> List[int]:
        indegree = [len(parents) for parents in self.parents]
        ready = [v for v in range(self.d) if not indegree[v]]
        order = []
        while ready:
            vertex = ready.pop(0)
            order.append(vertex)
            for child in sorted(self._children[vertex]):
                indegree[child] -= 1
                if not indegree[child]:
                    ready.append(child)
        if len(order) != self.d:
            raise CycleDetected('Edges contain a directed cycle')
        return order

    def ancestors(self, vertices: Iterable[int]) -> Set[int]:
        """Vertices in `vertices` plus all of their ancestors."""
        found = set(vertices)
        stack = list(found)
        while stack:
            for parent in self.parents[stack.pop()]:
                if parent not in found:
                    found.add(parent)
                    stack.append(parent)
        return found

    def descendants(self, vertex: int) -> Set[int]:
        """`vertex` plus all of its descendants."""
        found = {vertex}
        stack = [vertex]
        while stack:
            for child in self.children(stack.pop()):
                if child not in found:
                    found.add(child)
                    stack.append(child)
        return found

    def relabel(self, permutation: Sequence[int]) -> 'Dag':
        """Move vertex v to position permutation[v], keeping its label."""
        parents: List[FrozenSet[int]] = [frozenset()] * self.d
        labels = [''] * self.d
        for old, new in enumerate(permutation):
            parents[new] = frozenset(permutation[p]
                                     for p in self.parents[old])
            labels[new] = self.labels[old]
        return Dag(self.d, tuple(parents), tuple(labels))


@dataclass(frozen=True)
class Skeleton:
    d: int
    edges: FrozenSet[Pair]
    _adjacency: Tuple[FrozenSet[int], ...] = field(
        init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        canonical = set()
        for i, j in self.edges:
            _check_index(i, self.d)
            _check_index(j, self.d)
            if i == j:
                raise SelfLoop(f'Self-pair on vertex {i}')
            canonical.add(pair(i, j))
        neighbors: List[Set[int]] = [set() for _ in range(self.d)]
        for i, j in canonical:
            neighbors[i].add(j)
            neighbors[j].add(i)
        object.__setattr__(self, 'edges', frozenset(canonical))
        object.__setattr__(self, '_adjacency',
                           tuple(frozenset(n) for n in neighbors))

    def __contains__(self, edge: object) -> bool:
        if not isinstance(edge, tuple) or len(edge) != 2:
            return False
        return pair(*edge) in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self) -> Iterator[Pair]:
        return iter(sorted(self.edges))

    def neighbors(self, vertex: int) -> FrozenSet[int]:
        return self._adjacency[vertex]

    def without(self, i: int, j: int) -> 'Skeleton':
        return Skeleton(self.d, self.edges - {pair(i, j)})

    def relabel(self, permutation: Sequence[int]) -> 'Skeleton':
        return Skeleton(self.d, frozenset(pair(permutation[i], permutation[j])
                                          for i, j in self.edges))


@dataclass(frozen=True)
class WeightedDag:
    dag: Dag
    weights: Mapping[Pair, float]

    def matrix(self) -> NDArray[np.float64]:
        """Coefficient matrix B with B[parent, child] = weight."""
        b = np.zeros((self.dag.d, self.dag.d))
        for (parent, child), weight in self.weights.items():
            b[parent, child] = weight
        return b


def _check_index(vertex: int, d: int) -> None:
    if not 0 <= vertex < d:
        raise IndexOutOfRange(f'Vertex {vertex} outside [0, {d})')


def new_dag(d: int, edges: Iterable[Pair],
            labels: Optional[Sequence[str]] = None) -> Dag:
    parents: List[Set[int]] = [set() for _ in range(d)]
    for parent, child in edges:
        _check_index(parent, d)
        _check_index(child, d)
        if parent in parents[child]:
            raise GraphError(f'Duplicate edge ({parent}, {child})')
        parents[child].add(parent)
    return Dag(d, tuple(frozenset(p) for p in parents),
               tuple(labels) if labels else ())


def chain_dag(d: int = 4) -> Dag:
    return new_dag(d, [(v, v + 1) for v in range(d - 1)])


def collider_dag() -> Dag:
    """x0 -> x2 <- x1, with x3 isolated."""
    return new_dag(4, [(0, 2), (1, 2)])


def common_cause_dag() -> Dag:
    """x0 -> {x1, x2, x3}."""
    return new_dag(4, [(0, 1), (0, 2), (0, 3)])


PRESETS = {
    'chain': chain_dag,
    'collider': collider_dag,
    'common-cause': common_cause_dag,
}


def skeleton_of(dag: Dag) -> Skeleton:
    return Skeleton(dag.d, frozenset(pair(*edge) for edge in dag.edges))


def complete_skeleton(d: int) -> Skeleton:
    return Skeleton(d, frozenset(combinations(range(d), 2)))


def adjacency_excluding(skel: Skeleton, i: int, j: int) -> FrozenSet[int]:
    return skel.neighbors(i) - {j}


def d_separated(dag: Dag, i: int, j: int, w: AbstractSet[int]) -> bool:
    """Reachability ("Bayes-ball") d-separation test."""
    unblocking = dag.ancestors(w)
    # (vertex, reached from a child)
    visited: Set[Tuple[int, bool]] = set()
    stack = [(i, True)]
    while stack:
        vertex, from_child = stack.pop()
        if (vertex, from_child) in visited:
            continue
        visited.add((vertex, from_child))
        if vertex == j:
            return False
        if from_child:
            if vertex not in w:
                stack.extend((p, True) for p in dag.parents[vertex])
                stack.extend((c, False) for c in dag.children(vertex))
        else:
            if vertex not in w:
                stack.extend((c, False) for c in dag.children(vertex))
            if vertex in unblocking:
                stack.extend((p, True) for p in dag.parents[vertex])
    return True


def d_separated_by_paths(dag: Dag, i: int, j: int,
                         w: AbstractSet[int]) -> bool:
    """Brute-force d-separation over every simple path; small graphs only."""
    skel = skeleton_of(dag)
    descendants = [dag.descendants(v) for v in range(dag.d)]

    def is_active(path: List[int]) -> bool:
        for before, middle, after in zip(path, path[1:], path[2:]):
            collider = before in dag.parents[middle] \
                and after in dag.parents[middle]
            if collider and not descendants[middle] & w:
                return False
            if not collider and middle in w:
                return False
        return True

    def paths(path: List[int]) -> Iterator[List[int]]:
        if path[-1] == j:
            yield path
            return
        for nxt in skel.neighbors(path[-1]):
            if nxt not in path:
                yield from paths(path + [nxt])

    return not any(is_active(p) for p in paths([i]))


def sample_er_dag(d: int, er_level: int, rng_seed: SeedLike) -> Dag:
    """Erdos-Renyi DAG with about `er_level * d` edges.

    The adjacency is lower triangular (edges run from lower to higher
    index); callers permute vertices afterwards.
    """
    if d < 2 or er_level < 1:
        raise GraphError('Need d >= 2 and er_level >= 1')
    rng = as_rng(rng_seed)
    p_edge = min(1.0, 2 * er_level / (d - 1))
    mask = np.tril(rng.random((d, d)) < p_edge, k=-1)
    children, parents = np.nonzero(mask)
    return new_dag(d, zip(parents.tolist(), children.tolist()))


def parse_edge_list(text: str, d: Optional[int] = None,
                    names: Optional[Sequence[str]] = None) \
        -> Tuple[List[str], List[Pair], List[Pair]]:
    """Parse edge-list text into (names, directed, undirected) edges.

    Vertices may be written as indices or as declared names.
    """
    lines = [line.split('#', 1)[0].strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    declared = list(names) if names else []
    if lines and (match := _VARS_HEADER.match(lines[0])):
        declared = [name.strip() for name in match['names'].split(',')
                    if name.strip()]
        lines = lines[1:]
    if not declared:
        if d is None:
            raise EdgeListError('Missing `vars:` header')
        declared = list(default_labels(d))
    index = {name: position for position, name in enumerate(declared)}

    def resolve(token: str) -> int:
        if token in index:
            return index[token]
        if token.isdigit() and int(token) < len(declared):
            return int(token)
        raise UnknownVertex(f'Unknown vertex {token!r}')

    directed: List[Pair] = []
    undirected: List[Pair] = []
    for line in lines:
        if match := _UNDIRECTED.match(line):
            undirected.append((resolve(match['a']), resolve(match['b'])))
        elif match := _DIRECTED.match(line):
            directed.append((resolve(match['a']), resolve(match['b'])))
        else:
            raise EdgeListError(f'Malformed edge line {line!r}')
    return declared, directed, undirected


def read_dag(path: Path) -> Dag:
    names, directed, undirected = parse_edge_list(path.read_text())
    if undirected:
        raise EdgeListError(f'{path} contains undirected edges')
    return new_dag(len(names), directed, names)


def read_skeleton(path: Path, d: Optional[int] = None,
                  names: Optional[Sequence[str]] = None) -> Skeleton:
    declared, directed, undirected = parse_edge_list(path.read_text(), d,
                                                     names)
    return Skeleton(len(declared), frozenset(directed + undirected))


def format_edge_list(graph: Graph,
                     labels: Optional[Sequence[str]] = None) -> str:
    names = labels or (graph.labels if isinstance(graph, Dag)
                       else default_labels(graph.d))
    lines = ['vars: ' + ','.join(names)]
    if isinstance(graph, Dag):
        lines += [f'{i} {j}' for i, j in graph.edges]
    else:
        lines += [f'{i} -- {j}' for i, j in graph]
    return '\n'.join(lines) + '\n'


def write_edge_list(graph: Graph, path: Path,
                    labels: Optional[Sequence[str]] = None) -> None:
    path.write_text(format_edge_list(graph, labels))


def edge_names(skel: Skeleton, labels: Sequence[str]) -> List[str]:
    return [f'{labels[i]} -- {labels[j]}' for i, j in skel]

