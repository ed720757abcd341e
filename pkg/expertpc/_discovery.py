#!/usr/bin/env python3
import json
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from logging import getLogger
from time import perf_counter_ns
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

from expertpc._citest import CitEngine
from expertpc._core import ExpertPcError, SeedLike, as_rng
from expertpc._expert import (EdgeOrder, ExpertPrediction, SubsetPolicy,
                              UniformSubsets, extract_orderings,
                              simulate_edge_expert)
from expertpc._graphs import (Pair, Skeleton, adjacency_excluding,
                              complete_skeleton, pair)

logger = getLogger(__name__)

# (tested endpoint, other endpoint, candidate conditioning sets)
Candidate = Tuple[int, int, List[FrozenSet[int]]]


class DiscoveryError(ExpertPcError):
    pass


class RuleKind(str, Enum):
    PC_LEVEL = 'pc-level'
    GPC = 'gpc'
    RPC = 'rpc'


class SweepOrder(str, Enum):
    LEVEL_MAJOR = 'level-major'
    EDGE_MAJOR = 'edge-major'


class Algorithm(str, Enum):
    PC = 'pc'
    PC_STABLE = 'pc-stable'
    RPC_APPROX = 'rpc-approx'
    PC_GUESS = 'pc-guess'
    GPC_GUESS = 'gpc-guess'
    GPC = 'gpc'
    EXPERT = 'expert'

    @property
    def guided(self) -> bool:
        return self in {Algorithm.PC_GUESS, Algorithm.GPC_GUESS,
                        Algorithm.EXPERT}


@dataclass(frozen=True)
class ValidityRule:
    """Which edges EL hands to EP.

    PC_LEVEL needs the edge present and an adjacency set of size at least
    `level` on some endpoint (only the first endpoint when `symmetric` is
    off). GPC and RPC need presence only; RPC draws conditioning sets from
    the union of both neighborhoods.
    """

    kind: RuleKind
    level: int = 0
    symmetric: bool = True

    def accepts(self, c: Skeleton, i: int, j: int) -> bool:
        if (i, j) not in c:
            return False
        if self.kind is not RuleKind.PC_LEVEL:
            return True
        if len(adjacency_excluding(c, i, j)) >= self.level:
            return True
        return self.symmetric \
            and len(adjacency_excluding(c, j, i)) >= self.level


@dataclass
class DiscoveryResult:
    skeleton: Skeleton
    tests_run: int = 0
    tests_per_level: Dict[int, int] = field(default_factory=dict)
    separating_sets: Dict[Pair, FrozenSet[int]] = field(default_factory=dict)
    wall_ns: int = 0
    edges_checked: int = 0

    def count(self, k: int, tests: int) -> None:
        if tests:
            self.tests_run += tests
            self.tests_per_level[k] = self.tests_per_level.get(k, 0) + tests

    def remove(self, i: int, j: int, separating_set: FrozenSet[int]) -> None:
        self.skeleton = self.skeleton.without(i, j)
        self.separating_sets[pair(i, j)] = separating_set
        logger.debug('Removed %s -- %s given %s', i, j,
                     sorted(separating_set))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'edges': [list(edge) for edge in self.skeleton],
            'tests_run': self.tests_run,
            'tests_per_level': {str(k): t for k, t
                                in sorted(self.tests_per_level.items())},
            'separating_sets': {f'{i},{j}': sorted(w) for (i, j), w
                                in sorted(self.separating_sets.items())},
            'wall_ns': self.wall_ns,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def prune_candidates(c: Skeleton, i: int, j: int, k: int,
                     rule: ValidityRule) -> List[Candidate]:
    """Directed versions of n_ij that can be tested at set size k.

    When both endpoints qualify the one with the smaller adjacency set
    goes first (ties to the lower index); the other is tried only if the
    first keeps the edge, and skips subsets the first already tested.
    """
    if rule.kind is RuleKind.RPC:
        union = (c.neighbors(i) | c.neighbors(j)) - {i, j}
        sides = [(i, j, union)] if len(union) >= k else []
    else:
        endpoints = [(i, j), (j, i)] if rule.symmetric else [(i, j)]
        sides = [(x, y, adjacency_excluding(c, x, y)) for x, y in endpoints]
        sides = [side for side in sides if len(side[2]) >= k]
        sides.sort(key=lambda side: (len(side[2]), side[0]))
    candidates: List[Candidate] = []
    seen: Set[FrozenSet[int]] = set()
    for x, y, adj in sides:
        subsets = [w for w in map(frozenset, combinations(sorted(adj), k))
                   if w not in seen]
        seen.update(subsets)
        if subsets:
            candidates.append((x, y, subsets))
    return candidates


def _prune(candidates: List[Candidate], subset_order: SubsetPolicy,
           cit: CitEngine) -> Tuple[Optional[FrozenSet[int]], int]:
    tests = 0
    for x, y, subsets in candidates:
        for w in subset_order.order(x, y, subsets):
            tests += 1
            if cit(x, y, w).independent:
                return w, tests
    return None, tests


def edge_prune(c: Skeleton, edge: Pair, k: int, subset_order: SubsetPolicy,
               cit: CitEngine, rule: Optional[ValidityRule] = None) \
        -> Tuple[Skeleton, int]:
    """Test size-k subsets of n_ij's adjacency, dropping it on independence.

    Returns C unchanged with zero tests when no endpoint has k neighbors
    besides the other endpoint.
    """
    i, j = edge
    if (i, j) not in c:
        raise DiscoveryError(f'Edge {i} -- {j} is not in the skeleton')
    candidates = prune_candidates(c, i, j, k,
                                  rule or ValidityRule(RuleKind.GPC))
    separating_set, tests = _prune(candidates, subset_order, cit)
    if separating_set is None:
        return c, tests
    return c.without(i, j), tests


def edge_loop(c: Skeleton, order: EdgeOrder, k_min: int, k_max: int,
              subset_order: SubsetPolicy, rule: ValidityRule,
              cit: CitEngine, sweep: SweepOrder = SweepOrder.LEVEL_MAJOR,
              result: Optional[DiscoveryResult] = None) -> DiscoveryResult:
    """Run EP over the edges of `order` for every k in [k_min, k_max].

    LEVEL_MAJOR finishes each k over all edges before the next k;
    EDGE_MAJOR takes each edge through all k in one visit. Removals are
    applied immediately, so later edges see the updated adjacency.
    """
    result = result or DiscoveryResult(c)
    result.skeleton = c
    result.edges_checked = 0
    if sweep is SweepOrder.LEVEL_MAJOR:
        for k in range(k_min, k_max + 1):
            for i, j in order:
                _visit(result, i, j, k, subset_order, rule, cit)
    else:
        for i, j in order:
            for k in range(k_min, k_max + 1):
                if not _visit(result, i, j, k, subset_order, rule, cit):
                    break
    return result


def _visit(result: DiscoveryResult, i: int, j: int, k: int,
           subset_order: SubsetPolicy, rule: ValidityRule,
           cit: CitEngine) -> bool:
    """EP on one edge at one k; False once the edge needs no larger k."""
    if not rule.accepts(result.skeleton, i, j):
        return False
    result.edges_checked += 1
    candidates = prune_candidates(result.skeleton, i, j, k, rule)
    if not candidates:
        return False
    separating_set, tests = _prune(candidates, subset_order, cit)
    result.count(k, tests)
    if separating_set is None:
        return True
    result.remove(i, j, separating_set)
    return False


def _uniform_order(d: int, rng: SeedLike) -> EdgeOrder:
    generator = as_rng(rng)
    edges = list(complete_skeleton(d))
    return EdgeOrder(tuple(edges[k] for k in generator.permutation(
        len(edges))))


def pc_skeleton(cit: CitEngine, d: int, order: EdgeOrder,
                subset_order: SubsetPolicy, symmetric: bool = True) \
        -> DiscoveryResult:
    result = DiscoveryResult(complete_skeleton(d))
    for level in range(d):
        logger.debug('PC level %s', level)
        rule = ValidityRule(RuleKind.PC_LEVEL, level, symmetric)
        edge_loop(result.skeleton, order, level, level, subset_order, rule,
                  cit, result=result)
        if not result.edges_checked:
            break
    return result


def pc_guess(cit: CitEngine, d: int, pred: ExpertPrediction,
             rng: SeedLike) -> DiscoveryResult:
    order, subset_order = extract_orderings(pred, complete_skeleton(d), rng)
    return pc_skeleton(cit, d, order, subset_order)


def gpc_guess(cit: CitEngine, d: int, pred: ExpertPrediction,
              rng: SeedLike) -> DiscoveryResult:
    """Single edge-major pass over k = 0..d-1 under the presence-only rule."""
    c = complete_skeleton(d)
    order, subset_order = extract_orderings(pred, c, rng)
    return edge_loop(c, order, 0, d - 1, subset_order,
                     ValidityRule(RuleKind.GPC), cit, SweepOrder.EDGE_MAJOR)


def random_expert(d: int, rng: SeedLike) -> ExpertPrediction:
    """A p_psi = 0.5 expert: every pair is a fair coin whatever the truth."""
    empty = Skeleton(d, frozenset())
    return ExpertPrediction(simulate_edge_expert(empty, 0.5, rng))


def gpc_baseline(cit: CitEngine, d: int, rng: SeedLike) -> DiscoveryResult:
    generator = as_rng(rng)
    return gpc_guess(cit, d, random_expert(d, generator), generator)


def pc_stable(cit: CitEngine, d: int, subset_order: SubsetPolicy,
              order: Optional[EdgeOrder] = None) -> DiscoveryResult:
    """PC with adjacency frozen per level and removals applied after it."""
    order = order or EdgeOrder(tuple(complete_skeleton(d)))
    result = DiscoveryResult(complete_skeleton(d))
    for level in range(d):
        frozen = result.skeleton
        rule = ValidityRule(RuleKind.PC_LEVEL, level)
        removals = []
        for i, j in order:
            if not rule.accepts(frozen, i, j):
                continue
            result.edges_checked += 1
            candidates = prune_candidates(frozen, i, j, level, rule)
            separating_set, tests = _prune(candidates, subset_order, cit)
            result.count(level, tests)
            if separating_set is not None:
                removals.append((i, j, separating_set))
        for i, j, separating_set in removals:
            result.remove(i, j, separating_set)
        if not result.edges_checked:
            break
        result.edges_checked = 0
    return result


def rpc_approx(cit: CitEngine, d: int, eta: int, order: EdgeOrder,
               subset_order: SubsetPolicy) -> DiscoveryResult:
    if not 0 <= eta <= max(d - 2, 0):
        raise DiscoveryError(f'eta must lie in [0, {d - 2}], got {eta}')
    result = DiscoveryResult(complete_skeleton(d))
    rule = ValidityRule(RuleKind.RPC)
    for level in range(eta + 1):
        edge_loop(result.skeleton, order, level, level, subset_order, rule,
                  cit, result=result)
    return result


def expert_only(pred: ExpertPrediction) -> DiscoveryResult:
    """The expert's own skeleton, with no tests run."""
    return DiscoveryResult(pred.skeleton)


def run_algorithm(algorithm: Algorithm, cit: CitEngine, d: int,
                  pred: Optional[ExpertPrediction], rng: SeedLike,
                  eta: Optional[int] = None) -> DiscoveryResult:
    """Run one algorithm and stamp its wall time.

    Unguided algorithms ignore `pred` and draw their own p_psi = 0.5
    orderings from `rng`.
    """
    generator = as_rng(rng)
    start = perf_counter_ns()
    if algorithm.guided:
        if pred is None:
            raise DiscoveryError(f'{algorithm.value} needs an expert')
        if algorithm is Algorithm.PC_GUESS:
            result = pc_guess(cit, d, pred, generator)
        elif algorithm is Algorithm.GPC_GUESS:
            result = gpc_guess(cit, d, pred, generator)
        else:
            result = expert_only(pred)
    elif algorithm is Algorithm.GPC:
        result = gpc_baseline(cit, d, generator)
    elif algorithm is Algorithm.PC:
        result = pc_guess(cit, d, random_expert(d, generator), generator)
    elif algorithm is Algorithm.PC_STABLE:
        result = pc_stable(cit, d, UniformSubsets(generator),
                           _uniform_order(d, generator))
    else:
        result = rpc_approx(cit, d, max(d - 2, 0) if eta is None else eta,
                            _uniform_order(d, generator),
                            UniformSubsets(generator))
    result.wall_ns = perf_counter_ns() - start
    return result
