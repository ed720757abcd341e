#!/usr/bin/env python3
import re
from abc import abstractmethod
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import (AbstractSet, Dict, FrozenSet, Iterator, List, Optional,
                    Protocol, Sequence, Tuple, TypeVar)

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray

from expertpc._core import ExpertPcError, SeedLike, as_rng, keyed_uniform
from expertpc._graphs import (Dag, EdgeListError, Pair, Skeleton,
                              UnknownVertex, d_separated, pair,
                              parse_edge_list)

_EDGES_PREFIX = re.compile(r'EDGES\s*:(?P<body>.*)', re.DOTALL)
_EDGES_BODY = re.compile(r'^(\s*\(\s*[^,()]+?\s*,\s*[^,()]+?\s*\)\s*,?)*\s*$')
_EDGE = re.compile(r'\(\s*(?P<a>[^,()]+?)\s*,\s*(?P<b>[^,()]+?)\s*\)')

T = TypeVar('T')


class ExpertError(ExpertPcError):
    pass


class UnknownVariableName(ExpertError):
    pass


class ParseError(ExpertError):
    pass


class DsepPredictor:
    """Binary symmetric channel over d-separation queries.

    Each (pair, W) query gets one keyed coin, so answers are stable for
    the whole run and coupled across accuracies sharing a seed.
    """

    def __init__(self, truth: Dag, p_dsep: float, seed: int):
        if not 0 <= p_dsep <= 1:
            raise ExpertError(f'p_dsep must lie in [0, 1], got {p_dsep}')
        self._truth = truth
        self.p_dsep = p_dsep
        self.seed = seed
        self._memo: Dict[Tuple[Pair, FrozenSet[int]], bool] = {}

    def __call__(self, i: int, j: int, w: AbstractSet[int]) -> bool:
        key = (pair(i, j), frozenset(w))
        if key not in self._memo:
            truth = d_separated(self._truth, i, j, w)
            correct = keyed_uniform(self.seed, *key) < self.p_dsep
            self._memo[key] = truth if correct else not truth
        return self._memo[key]


def predict_dsep(pred: DsepPredictor, i: int, j: int,
                 w: AbstractSet[int]) -> bool:
    return pred(i, j, w)


@dataclass(frozen=True)
class ExpertPrediction:
    skeleton: Skeleton
    dsep_accuracy: Optional[float] = None
    seed: int = 0
    truth: Optional[Dag] = field(default=None, repr=False, compare=False)

    def dsep_predictor(self) -> Optional[DsepPredictor]:
        if self.dsep_accuracy is None or self.truth is None:
            return None
        return DsepPredictor(self.truth, self.dsep_accuracy, self.seed)


@dataclass(frozen=True)
class EdgeOrder:
    edges: Tuple[Pair, ...]
    boundary: int = 0

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def predicted_false(self) -> Tuple[Pair, ...]:
        return self.edges[:self.boundary]

    @property
    def predicted_true(self) -> Tuple[Pair, ...]:
        return self.edges[self.boundary:]


class SubsetPolicy(Protocol):
    @abstractmethod
    def order(self, i: int, j: int, subsets: List[FrozenSet[int]]) \
            -> List[FrozenSet[int]]:
        pass


class UniformSubsets:
    """Uniformly random subset order (plain EP)."""

    def __init__(self, rng: SeedLike):
        self._rng = as_rng(rng)

    def order(self, i: int, j: int, subsets: List[FrozenSet[int]]) \
            -> List[FrozenSet[int]]:
        return _shuffled(subsets, self._rng)


class GuidedSubsets:
    """Predicted d-separating subsets first, uniform within blocks."""

    def __init__(self, predictor: DsepPredictor, rng: SeedLike):
        self.predictor = predictor
        self._rng = as_rng(rng)

    def order(self, i: int, j: int, subsets: List[FrozenSet[int]]) \
            -> List[FrozenSet[int]]:
        shuffled = _shuffled(subsets, self._rng)
        separating = [w for w in shuffled if self.predictor(i, j, w)]
        rest = [w for w in shuffled if not self.predictor(i, j, w)]
        return separating + rest


def _shuffled(items: Sequence[T], rng: Generator) -> List[T]:
    return [items[k] for k in rng.permutation(len(items))]


def channel_coins(d: int, rng: SeedLike) -> NDArray[np.float64]:
    """One uniform coin per vertex pair, in `combinations` order."""
    return as_rng(rng).random(d * (d - 1) // 2)


def apply_channel(truth_skel: Skeleton, p_psi: float,
                  coins: NDArray[np.float64]) -> Skeleton:
    """Keep each pair's true membership where its coin falls below p_psi.

    Sharing `coins` between calls couples experts: a pair predicted
    correctly at one accuracy stays correct at every higher accuracy.
    """
    if not 0 <= p_psi <= 1:
        raise ExpertError(f'p_psi must lie in [0, 1], got {p_psi}')
    predicted = set()
    for coin, edge in zip(coins, combinations(range(truth_skel.d), 2)):
        present = edge in truth_skel.edges
        if present == bool(coin < p_psi):
            predicted.add(edge)
    return Skeleton(truth_skel.d, frozenset(predicted))


def simulate_edge_expert(truth_skel: Skeleton, p_psi: float,
                         rng: SeedLike) -> Skeleton:
    return apply_channel(truth_skel, p_psi,
                         channel_coins(truth_skel.d, rng))


def extract_orderings(pred: ExpertPrediction, c: Skeleton, rng: SeedLike) \
        -> Tuple[EdgeOrder, SubsetPolicy]:
    """Shuffle C, then move the predicted-false edges to the front."""
    if pred.skeleton.d != c.d:
        raise ExpertError(f'Expert covers {pred.skeleton.d} variables, '
                          f'skeleton {c.d}')
    generator = as_rng(rng)
    shuffled = _shuffled(list(c), generator)
    false = [edge for edge in shuffled if edge not in pred.skeleton.edges]
    true = [edge for edge in shuffled if edge in pred.skeleton.edges]
    order = EdgeOrder(tuple(false + true), len(false))

    predictor = pred.dsep_predictor()
    policy: SubsetPolicy = GuidedSubsets(predictor, generator) if predictor \
        else UniformSubsets(generator)
    return order, policy


def parse_expert_response(text: str, names: Sequence[str]) -> Skeleton:
    """Parse the one-line `EDGES: (a, b), (c, d)` response format."""
    match = _EDGES_PREFIX.search(text)
    if not match:
        raise ParseError('No `EDGES:` list found')
    body = match['body']
    if not _EDGES_BODY.match(body):
        raise ParseError(f'Malformed edge list {body.strip()!r}')
    index = {name: position for position, name in enumerate(names)}
    edges = set()
    for edge in _EDGE.finditer(body):
        try:
            a, b = index[edge['a']], index[edge['b']]
        except KeyError as e:
            raise UnknownVariableName(f'Unknown variable {e}') from e
        if a == b:
            raise ParseError(f'Self-pair {edge[0]}')
        edges.add(pair(a, b))
    return Skeleton(len(names), frozenset(edges))


def load_expert_skeleton(path: Path, d: int, names: Sequence[str]) \
        -> ExpertPrediction:
    text = path.read_text()
    if _EDGES_PREFIX.search(text):
        skeleton = parse_expert_response(text, names)
    else:
        try:
            declared, directed, undirected = parse_edge_list(text, d, names)
        except UnknownVertex as e:
            raise UnknownVariableName(str(e)) from e
        except EdgeListError as e:
            raise ParseError(str(e)) from e
        if list(declared) != list(names):
            raise ParseError(f'{path} declares {declared}, expected '
                             f'{list(names)}')
        skeleton = Skeleton(d, frozenset(pair(*e)
                                         for e in directed + undirected))
    if skeleton.d != d:
        raise ParseError(f'{path} covers {skeleton.d} variables, expected {d}')
    return ExpertPrediction(skeleton)
