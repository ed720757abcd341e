#!/usr/bin/env python3
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from threading import Lock
from typing import AbstractSet, Optional

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from scipy.stats import chi2, norm
from scipy.stats.contingency import crosstab, expected_freq

from expertpc._core import ExpertPcError, SeedLike, as_rng, keyed_uniform
from expertpc._graphs import Dag, d_separated, pair
from expertpc._synthdata import DataKind, Dataset

CONDITION_LIMIT = 1e12
RHO_LIMIT = 1 - 1e-12


class CitError(ExpertPcError):
    pass


class SampleTooSmall(CitError):
    pass


class SingularCorrelation(CitError):
    pass


class DegenerateColumn(CitError):
    pass


class NoData(CitError):
    pass


class SpecificityViolated(CitError):
    def __init__(self, alpha: float, beta: float):
        super().__init__(f'Need 1 - alpha > beta, got alpha={alpha}, '
                         f'beta={beta}')


@dataclass(frozen=True)
class CitOutcome:
    independent: bool
    p_value: Optional[float] = None
    statistic: Optional[float] = None


def _check_query(i: int, j: int, w: AbstractSet[int]) -> None:
    if i == j or i in w or j in w:
        raise CitError(f'Invalid query ({i}, {j} | {sorted(w)})')


def _check_channel(alpha: float, beta: float) -> None:
    if not 1 - alpha > beta:
        raise SpecificityViolated(alpha, beta)


def fisher_z(ds: Dataset, i: int, j: int, w: AbstractSet[int],
             alpha: float) -> CitOutcome:
    return _fisher_z_from_correlation(_correlation(ds), ds.n, i, j, w, alpha)


def _correlation(ds: Dataset) -> NDArray[np.float64]:
    if ds.kind is not DataKind.CONTINUOUS:
        raise CitError('Fisher-Z needs a continuous dataset')
    if ds.n < 2:
        raise SampleTooSmall(f'Fisher-Z needs at least 2 rows, got {ds.n}')
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.asarray(np.corrcoef(ds.values, rowvar=False),
                          dtype=np.float64).reshape(ds.d, ds.d)


def _fisher_z_from_correlation(correlation: NDArray[np.float64], n: int,
                               i: int, j: int, w: AbstractSet[int],
                               alpha: float) -> CitOutcome:
    _check_query(i, j, w)
    if n <= len(w) + 3:
        raise SampleTooSmall(f'n={n} too small for |W|={len(w)}')
    index = [i, j, *sorted(w)]
    sub = correlation[np.ix_(index, index)]
    if np.isnan(sub).any():
        raise DegenerateColumn(f'Constant column among {index}')
    if np.linalg.cond(sub) > CONDITION_LIMIT:
        raise SingularCorrelation(f'Correlation of {index} is singular')
    precision = np.linalg.inv(sub)
    rho = -precision[0, 1] / np.sqrt(precision[0, 0] * precision[1, 1])
    rho = float(np.clip(rho, -RHO_LIMIT, RHO_LIMIT))
    statistic = 0.5 * np.sqrt(n - len(w) - 3) \
        * np.log((1 + rho) / (1 - rho))
    p_value = float(2 * norm.sf(abs(statistic)))
    return CitOutcome(p_value > alpha, p_value, float(statistic))


def chi_square(ds: Dataset, i: int, j: int, w: AbstractSet[int],
               alpha: float) -> CitOutcome:
    """Chi-square test stratified over the observed values of W.

    Strata with a single observed category for i or j add nothing to
    the statistic or the degrees of freedom.
    """
    _check_query(i, j, w)
    if ds.kind is not DataKind.DISCRETE:
        raise CitError('Chi-square needs a discrete dataset')
    if not ds.n:
        raise NoData('Chi-square on an empty dataset')
    values = ds.values.astype(np.int64)
    if w:
        _, strata = np.unique(values[:, sorted(w)], axis=0,
                              return_inverse=True)
        strata = strata.reshape(-1)
    else:
        strata = np.zeros(ds.n, dtype=np.int64)

    statistic, dof = 0.0, 0
    for stratum in np.unique(strata):
        rows = strata == stratum
        table = crosstab(values[rows, i], values[rows, j]).count
        r, c = table.shape
        if r < 2 or c < 2:
            continue
        expected = expected_freq(table)
        statistic += float(((table - expected) ** 2 / expected).sum())
        dof += (r - 1) * (c - 1)
    if not dof:
        return CitOutcome(True, 1.0, 0.0)
    p_value = float(chi2.sf(statistic, dof))
    return CitOutcome(p_value > alpha, p_value, statistic)


def oracle_cit(truth: Dag, i: int, j: int, w: AbstractSet[int]) \
        -> CitOutcome:
    _check_query(i, j, w)
    return CitOutcome(d_separated(truth, i, j, w))


def noisy_channel_cit(truth: Dag, i: int, j: int, w: AbstractSet[int],
                      alpha: float, beta: float, rng: Generator) \
        -> CitOutcome:
    _check_channel(alpha, beta)
    return CitOutcome(bool(rng.random() < _independence_rate(
        truth, i, j, w, alpha, beta)))


def _independence_rate(truth: Dag, i: int, j: int, w: AbstractSet[int],
                       alpha: float, beta: float) -> float:
    _check_query(i, j, w)
    return 1 - alpha if d_separated(truth, i, j, w) else beta


class CitEngine(ABC):
    """A conditional-independence test with an invocation counter."""

    alpha: float = 0.0

    def __init__(self) -> None:
        self._lock = Lock()
        self._tests_run = 0

    @property
    def tests_run(self) -> int:
        return self._tests_run

    def __call__(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        with self._lock:
            self._tests_run += 1
        return self._test(i, j, w)

    @abstractmethod
    def _test(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        pass


class FisherZ(CitEngine):
    def __init__(self, ds: Dataset, alpha: float = 0.05):
        super().__init__()
        self.alpha = alpha
        self._n = ds.n
        self._correlation = _correlation(ds)

    def _test(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        return _fisher_z_from_correlation(self._correlation, self._n, i, j,
                                          w, self.alpha)


class ChiSquare(CitEngine):
    def __init__(self, ds: Dataset, alpha: float = 0.05):
        super().__init__()
        self.alpha = alpha
        self._ds = ds

    def _test(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        return chi_square(self._ds, i, j, w, self.alpha)


class OracleCit(CitEngine):
    def __init__(self, truth: Dag):
        super().__init__()
        self.truth = truth

    def _test(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        return oracle_cit(self.truth, i, j, w)


class NoisyChannelCit(CitEngine):
    """Fresh coin per invocation; repeated queries may disagree."""

    def __init__(self, truth: Dag, alpha: float, beta: float,
                 rng_seed: SeedLike):
        _check_channel(alpha, beta)
        super().__init__()
        self.truth = truth
        self.alpha = alpha
        self.beta = beta
        self._rng = as_rng(rng_seed)

    def _test(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        return noisy_channel_cit(self.truth, i, j, w, self.alpha, self.beta,
                                 self._rng)


class PredrawnChannelCit(CitEngine):
    """Noisy channel whose outcome is fixed per (pair, W) query key.

    The coin of a key depends only on the seed and the key, so two runs
    that query in different orders see the same outcomes.
    """

    def __init__(self, truth: Dag, alpha: float, beta: float, seed: int):
        _check_channel(alpha, beta)
        super().__init__()
        self.truth = truth
        self.alpha = alpha
        self.beta = beta
        self.seed = seed

    def coin(self, i: int, j: int, w: AbstractSet[int]) -> float:
        return keyed_uniform(self.seed, pair(i, j), w)

    def _test(self, i: int, j: int, w: AbstractSet[int]) -> CitOutcome:
        rate = _independence_rate(self.truth, i, j, w, self.alpha,
                                  self.beta)
        return CitOutcome(self.coin(i, j, w) < rate)


class CitKind(str, Enum):
    FISHER_Z = 'fisher-z'
    CHI_SQUARE = 'chi-square'
    ORACLE = 'oracle'
    CHANNEL = 'channel'


def make_engine(kind: CitKind, alpha: float, data: Optional[Dataset] = None,
                truth: Optional[Dag] = None, beta: float = 0.0,
                rng_seed: SeedLike = 0) -> CitEngine:
    if kind in {CitKind.FISHER_Z, CitKind.CHI_SQUARE}:
        if data is None:
            raise CitError(f'{kind.value} needs a dataset')
        return FisherZ(data, alpha) if kind is CitKind.FISHER_Z \
            else ChiSquare(data, alpha)
    if truth is None:
        raise CitError(f'{kind.value} needs the true graph')
    if kind is CitKind.ORACLE:
        return OracleCit(truth)
    return NoisyChannelCit(truth, alpha, beta, rng_seed)
