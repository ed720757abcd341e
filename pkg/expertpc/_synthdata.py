#!/usr/bin/env python3
from dataclasses import dataclass
from enum import Enum
from importlib.resources import files
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pandas.errors import EmptyDataError, ParserError

from expertpc._core import ExpertPcError, SeedLike, as_rng, derive_seed
from expertpc._graphs import (Dag, WeightedDag, default_labels,
                              parse_edge_list, new_dag)

WEIGHT_RANGE = (1.5, 2.5)
SACHS_RESOURCE = 'sachs_consensus.txt'


class DataKind(str, Enum):
    CONTINUOUS = 'continuous'
    DISCRETE = 'discrete'


class Stream(int, Enum):
    """Purposes that get their own RNG stream inside a trial."""
    GRAPH = 0
    WEIGHTS = 1
    DATA = 2
    PERMUTATION = 3
    EXPERT = 4
    BASELINE_EXPERT = 5
    ORDERING = 6
    DSEP = 7
    CIT = 8


class DataError(ExpertPcError):
    pass


class ZeroVariance(DataError):
    def __init__(self, column: str):
        super().__init__(f'Column {column!r} has zero variance')


class RaggedRows(DataError):
    pass


class NonNumericCell(DataError):
    pass


class EmptyFile(DataError):
    pass


class NTooLarge(DataError):
    pass


@dataclass(frozen=True)
class Dataset:
    values: NDArray[np.float64]
    kind: DataKind = DataKind.CONTINUOUS
    names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise DataError('Dataset values must be a 2-D matrix')
        if not self.names:
            object.__setattr__(self, 'names', default_labels(self.d))
        elif len(self.names) != self.d:
            raise DataError(f'Expected {self.d} names, got {len(self.names)}')

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])


def trial_seed(master_seed: int, trial_index: int) -> int:
    """64-bit seed of a trial: splitmix64(master + (index + 1) * gamma)."""
    return derive_seed(master_seed, trial_index)


def stream(seed: int, purpose: Stream, *extra: int) -> np.random.Generator:
    for value in (int(purpose), *extra):
        seed = derive_seed(seed, value)
    return as_rng(seed)


def sample_weights(dag: Dag, rng_seed: SeedLike) -> WeightedDag:
    rng = as_rng(rng_seed)
    weights = {}
    for edge in dag.edges:
        magnitude = rng.uniform(*WEIGHT_RANGE)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        weights[edge] = sign * magnitude
    return WeightedDag(dag, weights)


def sample_dataset(wdag: WeightedDag, n: int, rng_seed: SeedLike) -> Dataset:
    """Draw n rows of x_i = sum_j w_ji x_j + e_i with e_i ~ N(0, 1)."""
    if n < 1:
        raise DataError('Need at least one sample')
    dag = wdag.dag
    values = as_rng(rng_seed).standard_normal((n, dag.d))
    coefficients = wdag.matrix()
    for vertex in dag.topological_order():
        for parent in dag.parents[vertex]:
            values[:, vertex] += coefficients[parent, vertex] \
                * values[:, parent]
    return Dataset(values, DataKind.CONTINUOUS, dag.labels)


def standardize(ds: Dataset) -> Dataset:
    """Z-score every column using the n - 1 standard deviation."""
    if ds.kind is not DataKind.CONTINUOUS:
        raise DataError('Only continuous datasets can be standardized')
    mean = ds.values.mean(axis=0)
    std = ds.values.std(axis=0, ddof=1) if ds.n > 1 \
        else np.zeros(ds.d)
    for column, deviation in enumerate(std):
        if not deviation > 0:
            raise ZeroVariance(ds.names[column])
    return Dataset((ds.values - mean) / std, ds.kind, ds.names)


def permute_variables(ds: Dataset, truth: Dag, rng_seed: SeedLike) \
        -> Tuple[Dataset, Dag, NDArray[np.int64]]:
    """Relabel columns and graph together; vertex v moves to perm[v]."""
    if ds.d != truth.d:
        raise DataError(f'Dataset has {ds.d} columns, graph has {truth.d}')
    permutation = as_rng(rng_seed).permutation(ds.d)
    inverse = np.argsort(permutation)
    permuted = Dataset(ds.values[:, inverse], ds.kind,
                       tuple(ds.names[v] for v in inverse))
    return permuted, truth.relabel(permutation.tolist()), permutation


def load_csv(path: Path, kind: DataKind = DataKind.CONTINUOUS) -> Dataset:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except EmptyDataError as e:
        raise EmptyFile(f'{path} is empty') from e
    except ParserError as e:
        raise RaggedRows(f'{path}: {e}') from e
    if frame.empty:
        raise EmptyFile(f'{path} has no data rows')
    if frame.isna().to_numpy().any():
        raise RaggedRows(f'{path} has rows with missing fields')

    names = tuple(str(name).strip() for name in frame.columns)
    if kind is DataKind.DISCRETE:
        codes = [pd.factorize(frame[column].str.strip())[0]
                 for column in frame.columns]
        values = np.column_stack(codes).astype(np.float64)
    else:
        try:
            values = frame.apply(pd.to_numeric).to_numpy(dtype=np.float64)
        except ValueError as e:
            raise NonNumericCell(f'{path}: {e}') from e
    return Dataset(values, kind, names)


def discretize(ds: Dataset, bins: int = 3) -> Dataset:
    """Quantile-bin every column into `bins` category codes."""
    quantiles = np.linspace(0, 1, bins + 1)[1:-1]
    columns = []
    for column in ds.values.T:
        edges = np.quantile(column, quantiles)
        columns.append(np.searchsorted(edges, column, side='right'))
    return Dataset(np.column_stack(columns).astype(np.float64),
                   DataKind.DISCRETE, ds.names)


def subsample(ds: Dataset, n: int, rng_seed: SeedLike) -> Dataset:
    if n > ds.n:
        raise NTooLarge(f'Cannot draw {n} rows from {ds.n}')
    rows = as_rng(rng_seed).choice(ds.n, size=n, replace=False)
    return Dataset(ds.values[rows], ds.kind, ds.names)


def align_columns(ds: Dataset, names: Sequence[str]) -> Dataset:
    """Reorder columns to follow `names`."""
    try:
        order = [ds.names.index(name) for name in names]
    except ValueError as e:
        raise DataError(f'Dataset columns {ds.names} do not cover '
                        f'{list(names)}') from e
    return Dataset(ds.values[:, order], ds.kind, tuple(names))


def load_sachs_truth() -> Dag:
    """Consensus protein-signalling network bundled with the package."""
    resources = files('expertpc').joinpath('resources')
    text = resources.joinpath(SACHS_RESOURCE).read_text()
    names, directed, _ = parse_edge_list(text)
    return new_dag(len(names), directed, names)
