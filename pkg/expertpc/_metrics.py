#!/usr/bin/env python3
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from logging import getLogger
from math import prod, sqrt
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from expertpc._citest import CitKind, PredrawnChannelCit, make_engine
from expertpc._core import ExpertPcError, derive_seed
from expertpc._discovery import (Algorithm, DiscoveryResult, RuleKind,
                                 ValidityRule, edge_prune, prune_candidates,
                                 run_algorithm)
from expertpc._expert import (DsepPredictor, EdgeOrder, ExpertPrediction,
                              GuidedSubsets, simulate_edge_expert)
from expertpc._graphs import (Dag, Pair, Skeleton, WeightedDag,
                              complete_skeleton, d_separated, pair,
                              skeleton_of)
from expertpc._synthdata import (Stream, sample_dataset, standardize, stream,
                                 trial_seed)

Z_95 = 1.959963984540054
EXACT_MAX_D = 4
MASS_TOLERANCE = 1e-12

logger = getLogger(__name__)


class MetricError(ExpertPcError):
    pass


class DimensionMismatch(MetricError):
    pass


class TooLarge(MetricError):
    pass


class AuditPreconditionError(MetricError):
    pass


@dataclass(frozen=True)
class SkeletonScore:
    precision: float
    recall: float
    f1: float
    true_positives: int
    false_positives: int
    false_negatives: int
    true_negatives: int


@dataclass(frozen=True)
class PhiEstimate:
    estimate: float
    trials: int
    ci_low: float
    ci_high: float

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low


@dataclass(frozen=True)
class AuditRow:
    p: float
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    trials: int
    flag: bool = False


@dataclass(frozen=True)
class RuntimeRow:
    p_dsep: float
    mean_tests: float
    standard_error: float
    reps: int


@dataclass(frozen=True)
class PhiSetup:
    """Everything one Monte-Carlo trial of Φ estimation needs.

    With `weighted` and `n` set, trials draw linear-Gaussian data and test
    with Fisher-Z; otherwise the truth is queried through `cit`.
    """

    truth: Dag
    algorithm: Algorithm
    p_psi: float = 1.0
    p_dsep: Optional[float] = None
    cit: CitKind = CitKind.CHANNEL
    alpha: float = 0.05
    beta: float = 0.2
    weighted: Optional[WeightedDag] = None
    n: Optional[int] = None


def _check_dims(pred: Skeleton, truth: Skeleton) -> None:
    if pred.d != truth.d:
        raise DimensionMismatch(f'Skeletons over {pred.d} and {truth.d} '
                                f'variables')


def skeleton_f1(pred: Skeleton, truth: Skeleton) -> SkeletonScore:
    _check_dims(pred, truth)
    tp = len(pred.edges & truth.edges)
    fp = len(pred.edges - truth.edges)
    fn = len(truth.edges - pred.edges)
    tn = truth.d * (truth.d - 1) // 2 - tp - fp - fn
    if not pred.edges and not truth.edges:
        return SkeletonScore(1.0, 1.0, 1.0, tp, fp, fn, tn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn)
    return SkeletonScore(precision, recall, f1, tp, fp, fn, tn)


def perfect_recovery(pred: Skeleton, truth: Skeleton) -> bool:
    _check_dims(pred, truth)
    return pred.edges == truth.edges


def binomial_interval(successes: int, trials: int) -> PhiEstimate:
    estimate = successes / trials
    half = Z_95 * sqrt(estimate * (1 - estimate) / trials)
    return PhiEstimate(estimate, trials, max(0.0, estimate - half),
                       min(1.0, estimate + half))


def _run_trial(setup: PhiSetup, seed: int) -> DiscoveryResult:
    truth_skel = skeleton_of(setup.truth)
    expert = simulate_edge_expert(truth_skel, setup.p_psi,
                                  stream(seed, Stream.EXPERT))
    pred = ExpertPrediction(expert, setup.p_dsep,
                            derive_seed(seed, Stream.DSEP), setup.truth)
    data = None
    if setup.weighted is not None and setup.n is not None:
        data = standardize(sample_dataset(setup.weighted, setup.n,
                                          stream(seed, Stream.DATA)))
    cit = make_engine(setup.cit, setup.alpha, data, setup.truth, setup.beta,
                      stream(seed, Stream.CIT))
    return run_algorithm(setup.algorithm, cit, setup.truth.d, pred,
                         stream(seed, Stream.ORDERING))


def _phi_trial(setup: PhiSetup, seed: int) -> bool:
    return perfect_recovery(_run_trial(setup, seed).skeleton,
                            skeleton_of(setup.truth))


def _map_trials(function: Callable[[int], float], seeds: Sequence[int],
                jobs: int) -> List[float]:
    if jobs <= 1:
        return [function(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(function, seeds))


def estimate_phi(setup: PhiSetup, trials: int, master_seed: int,
                 jobs: int = 1) -> PhiEstimate:
    """Monte-Carlo perfect-recovery rate with a normal-approximation CI."""
    if trials < 1:
        raise MetricError('Need at least one trial')
    seeds = [trial_seed(master_seed, t) for t in range(trials)]
    outcomes = _map_trials(lambda seed: float(_phi_trial(setup, seed)),
                           seeds, jobs)
    return binomial_interval(int(sum(outcomes)), trials)


def _schedule(algorithm: Algorithm) -> RuleKind:
    if algorithm in {Algorithm.PC, Algorithm.PC_GUESS}:
        return RuleKind.PC_LEVEL
    if algorithm in {Algorithm.GPC, Algorithm.GPC_GUESS}:
        return RuleKind.GPC
    raise MetricError(f'No exact oracle for {algorithm.value}')


def exact_phi_small(truth: Dag, algorithm: Algorithm, order: EdgeOrder,
                    alpha: float, beta: float) -> float:
    """Exact Φ of a fixed edge order under the noisy-channel CIT.

    Enumerates every EP outcome branch from the complete skeleton; each
    EP call removes its edge with probability 1 - prod(1 - P(indep | W))
    over the subsets it would test.
    """
    mass, perfect = _exact_masses(truth, _schedule(algorithm), order.edges,
                                  alpha, beta)
    if abs(mass - 1) > MASS_TOLERANCE:
        raise MetricError(f'Branch probabilities sum to {mass}')
    return perfect


def _exact_masses(truth: Dag, kind: RuleKind, order: Tuple[Pair, ...],
                  alpha: float, beta: float) -> Tuple[float, float]:
    d = truth.d
    if d > EXACT_MAX_D:
        raise TooLarge(f'Exact enumeration supports d <= {EXACT_MAX_D}, '
                       f'got {d}')
    target = skeleton_of(truth).edges

    def removal_probability(c: Skeleton, i: int, j: int,
                            rule: ValidityRule, k: int) -> Optional[float]:
        candidates = prune_candidates(c, i, j, k, rule)
        if not candidates:
            return None
        kept = prod(alpha if d_separated(truth, x, y, w) else 1 - beta
                    for x, y, subsets in candidates for w in subsets)
        return 1 - kept

    def branch(p_remove: float, removed: Callable[[], Tuple[float, float]],
               kept: Callable[[], Tuple[float, float]]) \
            -> Tuple[float, float]:
        mass, perfect = 0.0, 0.0
        for probability, follow in ((p_remove, removed), (1 - p_remove,
                                                          kept)):
            if probability > 0:
                sub_mass, sub_perfect = follow()
                mass += probability * sub_mass
                perfect += probability * sub_perfect
        return mass, perfect

    def leaf(edges: FrozenSet[Pair]) -> Tuple[float, float]:
        return 1.0, float(edges == target)

    @lru_cache(maxsize=None)
    def gpc(index: int, k: int, edges: FrozenSet[Pair]) \
            -> Tuple[float, float]:
        if index == len(order):
            return leaf(edges)
        i, j = order[index]
        rule = ValidityRule(RuleKind.GPC)
        c = Skeleton(d, edges)
        p_remove = removal_probability(c, i, j, rule, k) \
            if rule.accepts(c, i, j) and k < d else None
        if p_remove is None:
            return gpc(index + 1, 0, edges)
        return branch(p_remove,
                      lambda: gpc(index + 1, 0, edges - {pair(i, j)}),
                      lambda: gpc(index, k + 1, edges))

    @lru_cache(maxsize=None)
    def pc(level: int, index: int, edges: FrozenSet[Pair],
           checked: bool) -> Tuple[float, float]:
        if index == len(order):
            if not checked or level + 1 >= d:
                return leaf(edges)
            return pc(level + 1, 0, edges, False)
        i, j = order[index]
        rule = ValidityRule(RuleKind.PC_LEVEL, level)
        c = Skeleton(d, edges)
        if not rule.accepts(c, i, j):
            return pc(level, index + 1, edges, checked)
        p_remove = removal_probability(c, i, j, rule, level)
        if p_remove is None:
            return pc(level, index + 1, edges, True)
        return branch(p_remove,
                      lambda: pc(level, index + 1, edges - {pair(i, j)},
                                 True),
                      lambda: pc(level, index + 1, edges, True))

    start = complete_skeleton(d).edges
    if kind is RuleKind.GPC:
        return gpc(0, 0, start)
    return pc(0, 0, start, False)


@lru_cache(maxsize=16)
def _phi_by_order(truth: Dag, kind: RuleKind, alpha: float, beta: float) \
        -> Dict[Tuple[Pair, ...], float]:
    return {order: _exact_masses(truth, kind, order, alpha, beta)[1]
            for order in permutations(complete_skeleton(truth.d))}


def expected_exact_phi(truth: Dag, algorithm: Algorithm, p_psi: float,
                       alpha: float, beta: float) -> float:
    """Exact Φ averaged over simulated experts of accuracy p_psi.

    Each of the 2^C(d,2) expert skeletons is weighted by its channel
    probability; its edge order is uniform within the predicted-false and
    predicted-true blocks.
    """
    if not algorithm.guided:
        p_psi = 0.5
    edges = tuple(complete_skeleton(truth.d))
    target = skeleton_of(truth).edges
    phi = _phi_by_order(truth, _schedule(algorithm), alpha, beta)

    block_means: Dict[FrozenSet[Pair], float] = {}
    for mask in range(1 << len(edges)):
        predicted = frozenset(edge for bit, edge in enumerate(edges)
                              if mask >> bit & 1)
        false_block = frozenset(edges) - predicted
        matching = [value for order, value in phi.items()
                    if frozenset(order[:len(false_block)]) == false_block]
        block_means[predicted] = sum(matching) / len(matching)

    total = 0.0
    for predicted, mean in block_means.items():
        correct = sum((edge in predicted) == (edge in target)
                      for edge in edges)
        weight = p_psi ** correct * (1 - p_psi) ** (len(edges) - correct)
        total += weight * mean
    return total


def _audit_row(p: float, metric: str, values: Sequence[float]) -> AuditRow:
    trials = len(values)
    mean = float(np.mean(values))
    if metric == 'phi':
        estimate = binomial_interval(int(round(sum(values))), trials)
        return AuditRow(p, metric, mean, estimate.ci_low, estimate.ci_high,
                        trials)
    se = float(np.std(values, ddof=1) / sqrt(trials)) if trials > 1 else 0.0
    return AuditRow(p, metric, mean, mean - Z_95 * se, mean + Z_95 * se,
                    trials)


def _standard_error(row: AuditRow) -> float:
    return (row.ci_high - row.ci_low) / (2 * Z_95)


def monotonicity_audit(setup: PhiSetup, p_grid: Sequence[float],
                       trials: int, master_seed: int, metric: str = 'phi',
                       exact: bool = False, jobs: int = 1) -> List[AuditRow]:
    """Per-p Φ (or mean F1), flagging drops beyond 2 pooled SE.

    Every grid point reuses the same trial seeds, so data, channel coins
    and expert coins are shared across p.
    """
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise AuditPreconditionError(f'p grid must ascend: {list(p_grid)}')
    if metric not in {'phi', 'f1'}:
        raise AuditPreconditionError(f'Unknown metric {metric!r}')

    rows = []
    for p in p_grid:
        if exact:
            value = expected_exact_phi(setup.truth, setup.algorithm, p,
                                       setup.alpha, setup.beta)
            rows.append(AuditRow(p, 'exact-phi', value, value, value, 0))
            continue
        point = PhiSetup(setup.truth, setup.algorithm, p, setup.p_dsep,
                         setup.cit, setup.alpha, setup.beta, setup.weighted,
                         setup.n)
        seeds = [trial_seed(master_seed, t) for t in range(trials)]
        values = _map_trials(lambda seed: _metric_trial(point, seed, metric),
                             seeds, jobs)
        rows.append(_audit_row(p, metric, values))
    return _flag_drops(rows)


def _metric_trial(setup: PhiSetup, seed: int, metric: str) -> float:
    if metric == 'phi':
        return float(_phi_trial(setup, seed))
    return skeleton_f1(_run_trial(setup, seed).skeleton,
                       skeleton_of(setup.truth)).f1


def _flag_drops(rows: List[AuditRow]) -> List[AuditRow]:
    flagged = rows[:1]
    for lower, higher in zip(rows, rows[1:]):
        pooled = sqrt(_standard_error(lower) ** 2
                      + _standard_error(higher) ** 2)
        drop = higher.mean < lower.mean - 2 * pooled \
            if pooled else higher.mean < lower.mean - MASS_TOLERANCE
        if drop:
            logger.warning('%s drops from %s at p=%s to %s at p=%s',
                           higher.metric, lower.mean, lower.p, higher.mean,
                           higher.p)
        flagged.append(AuditRow(higher.p, higher.metric, higher.mean,
                                higher.ci_low, higher.ci_high, higher.trials,
                                drop))
    return flagged


def runtime_audit(truth: Dag, edge: Pair, k: int,
                  p_dsep_grid: Sequence[float], alpha: float, beta: float,
                  reps: int, master_seed: int,
                  c: Optional[Skeleton] = None) -> List[RuntimeRow]:
    """Mean EP-G test count per p_dsep on one edge.

    A repetition shares its CIT outcomes, predictor coins and shuffle
    across the grid, so only the predictor's accuracy changes.
    """
    if c is None:
        c = complete_skeleton(truth.d)
    rows = []
    for p_dsep in p_dsep_grid:
        counts = []
        for rep in range(reps):
            seed = trial_seed(master_seed, rep)
            cit = PredrawnChannelCit(truth, alpha, beta,
                                     derive_seed(seed, Stream.CIT))
            predictor = DsepPredictor(truth, p_dsep,
                                      derive_seed(seed, Stream.DSEP))
            policy = GuidedSubsets(predictor, stream(seed, Stream.ORDERING))
            _, tests = edge_prune(c, edge, k, policy, cit)
            counts.append(tests)
        se = float(np.std(counts, ddof=1) / sqrt(reps)) if reps > 1 else 0.0
        rows.append(RuntimeRow(p_dsep, float(np.mean(counts)), se, reps))
    return rows
