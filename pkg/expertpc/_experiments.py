#!/usr/bin/env python3
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from itertools import product
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from expertpc._citest import CitKind, OracleCit, make_engine
from expertpc._config import (SACHS, ConfigError, DataSource, ReportFormat,
                              SweepConfig)
from expertpc._core import ExpertPcError, derive_seed
from expertpc._discovery import Algorithm, DiscoveryResult, run_algorithm
from expertpc._expert import (ExpertPrediction, apply_channel, channel_coins,
                              load_expert_skeleton)
from expertpc._graphs import (Dag, Skeleton, read_dag, sample_er_dag,
                              skeleton_of)
from expertpc._metrics import perfect_recovery, skeleton_f1
from expertpc._synthdata import (DataKind, Dataset, Stream, align_columns,
                                 discretize, load_csv, load_sachs_truth,
                                 permute_variables, sample_dataset,
                                 sample_weights, standardize, stream,
                                 subsample, trial_seed)

COLUMNS = ['algorithm', 'p_psi', 'p_dsep', 'n', 'd', 'trial', 'f1',
           'precision', 'recall', 'perfect', 'tests_run', 'wall_ns']
DATA_CITS = {CitKind.FISHER_Z, CitKind.CHI_SQUARE}
ORACLE_CHECK_ALGORITHMS = [Algorithm.PC, Algorithm.PC_STABLE,
                           Algorithm.RPC_APPROX, Algorithm.PC_GUESS,
                           Algorithm.GPC_GUESS, Algorithm.GPC]
ORACLE_CHECK_P_PSI = [0.0, 0.5, 1.0]

logger = getLogger(__name__)


class ReportError(ExpertPcError):
    pass


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    p_psi: Optional[float]
    p_dsep: Optional[float]
    n: int
    d: int
    trial: int
    f1: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    perfect: Optional[bool] = None
    tests_run: Optional[int] = None
    wall_ns: Optional[int] = None
    error: str = ''


@dataclass(frozen=True)
class AggregateRow:
    algorithm: str
    p_psi: Optional[float]
    p_dsep: Optional[float]
    n: int
    d: int
    trials: int
    f1_mean: float
    f1_se: float
    perfect_rate: float
    tests_mean: float
    tests_se: float


@dataclass
class SweepReport:
    rows: List[SweepRow]
    aggregates: List[AggregateRow]


@dataclass(frozen=True)
class _Problem:
    """Inputs fixed before a sweep starts."""

    config: SweepConfig
    master_seed: int
    truth: Optional[Dag]
    data: Optional[Dataset]
    expert: Optional[Skeleton]


def run_sweep(config: SweepConfig, master_seed: int = 0,
              jobs: int = 1) -> SweepReport:
    """Run every trial of `config`, in parallel, merged in trial order."""
    problem = _prepare(config, master_seed)
    logger.info('Sweep: %s trials, %s algorithms, %s workers', config.trials,
                len(config.algorithms), jobs)
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        per_trial = list(executor.map(lambda t: _trial_rows(problem, t),
                                      range(config.trials)))
    rows = [row for trial in per_trial for row in trial]
    logger.info('Sweep finished with %s rows', len(rows))
    return SweepReport(rows, aggregate(rows))


def _prepare(config: SweepConfig, master_seed: int) -> _Problem:
    spec = config.data
    truth, data = None, None
    if spec.source is DataSource.CSV:
        assert spec.path is not None and spec.truth is not None
        truth = load_sachs_truth() if spec.truth == SACHS \
            else read_dag(Path(spec.truth))
        data = align_columns(load_csv(spec.path, spec.kind), truth.labels)
    expert = None
    if config.expert.file is not None:
        if truth is None:
            raise ConfigError('An expert file needs CSV data with a known '
                              'truth graph')
        expert = load_expert_skeleton(config.expert.file, truth.d,
                                      truth.labels).skeleton
    return _Problem(config, master_seed, truth, data, expert)


def _grid(config: SweepConfig, from_file: bool) \
        -> List[Tuple[Optional[float], Optional[float]]]:
    p_psi: Sequence[Optional[float]] = [None] if from_file \
        else config.expert.p_psi
    p_dsep: Sequence[Optional[float]] = config.expert.p_dsep or [None]
    return list(product(p_psi, p_dsep))


def _dimensions(problem: _Problem) -> List[int]:
    if problem.truth is not None:
        return [problem.truth.d]
    return list(problem.config.data.d)


def _trial_data(problem: _Problem, seed: int, d: int, n: int) \
        -> Tuple[Dag, Optional[Dataset]]:
    config = problem.config
    spec = config.data
    needs_data = config.cit.kind in DATA_CITS
    if problem.truth is not None:
        truth = problem.truth
        assert problem.data is not None
        data = subsample(problem.data, n, stream(seed, Stream.DATA, n)) \
            if needs_data else None
    else:
        truth = sample_er_dag(d, spec.er_level, stream(seed, Stream.GRAPH, d))
        data = None
        if needs_data:
            weighted = sample_weights(truth,
                                      stream(seed, Stream.WEIGHTS, d))
            data = sample_dataset(weighted, n,
                                  stream(seed, Stream.DATA, d, n))
            if config.cit.kind is CitKind.CHI_SQUARE:
                data = discretize(data)
    if data is not None and data.kind is DataKind.CONTINUOUS:
        data = standardize(data)
    return truth, data


def _trial_rows(problem: _Problem, trial: int) -> List[SweepRow]:
    seed = trial_seed(problem.master_seed, trial)
    rows = []
    for d, n in product(_dimensions(problem), problem.config.data.n):
        try:
            truth, data = _trial_data(problem, seed, d, n)
        except ExpertPcError as e:
            logger.warning('Trial %s at d=%s, n=%s has no data: %s', trial,
                           d, n, e)
            rows.extend(_error_rows(problem, d, n, trial, str(e)))
            continue
        rows.extend(_cell_rows(problem, seed, trial, n, truth, data))
    logger.info('Trial %s done', trial)
    return rows


def _cell_rows(problem: _Problem, seed: int, trial: int, n: int, truth: Dag,
               data: Optional[Dataset]) -> List[SweepRow]:
    """Rows of one (d, n) cell: every grid point times every algorithm."""
    config = problem.config
    permutation = stream(seed, Stream.PERMUTATION)
    if data is not None:
        data, truth, order = permute_variables(data, truth, permutation)
    else:
        order = permutation.permutation(truth.d)
        truth = truth.relabel(order.tolist())
    truth_skel = skeleton_of(truth)
    coins = channel_coins(truth.d, stream(seed, Stream.EXPERT))
    unguided: Dict[Algorithm, Tuple[DiscoveryResult, str]] = {}

    rows = []
    for p_psi, p_dsep in _grid(config, problem.expert is not None):
        expert = problem.expert.relabel(order.tolist()) \
            if problem.expert is not None \
            else apply_channel(truth_skel, p_psi or 0.0, coins)
        pred = ExpertPrediction(expert, p_dsep,
                                derive_seed(seed, Stream.DSEP), truth)
        for index, algorithm in enumerate(config.algorithms):
            if algorithm.guided or algorithm not in unguided:
                outcome = _run(problem, algorithm, index, seed, truth, data,
                               pred)
                if not algorithm.guided:
                    unguided[algorithm] = outcome
            else:
                outcome = unguided[algorithm]
            rows.append(_row(outcome, truth_skel, algorithm, p_psi, p_dsep,
                             n, trial, config.timing))
    return rows


def _error_rows(problem: _Problem, d: int, n: int, trial: int,
                error: str) -> List[SweepRow]:
    config = problem.config
    return [SweepRow(algorithm.value, p_psi, p_dsep, n, d, trial,
                     error=error)
            for p_psi, p_dsep in _grid(config, problem.expert is not None)
            for algorithm in config.algorithms]


def _run(problem: _Problem, algorithm: Algorithm, index: int, seed: int,
         truth: Dag, data: Optional[Dataset], pred: ExpertPrediction) \
        -> Tuple[DiscoveryResult, str]:
    config = problem.config
    rng = stream(seed, Stream.ORDERING) if algorithm.guided \
        else stream(seed, Stream.BASELINE_EXPERT, index)
    try:
        cit = make_engine(config.cit.kind, config.alpha, data, truth,
                          config.cit.beta, stream(seed, Stream.CIT, index))
        return run_algorithm(algorithm, cit, truth.d, pred, rng,
                             config.rpc_eta), ''
    except ExpertPcError as e:
        logger.warning('%s failed: %s', algorithm.value, e)
        return DiscoveryResult(Skeleton(truth.d, frozenset())), str(e)


def _row(outcome: Tuple[DiscoveryResult, str], truth_skel: Skeleton,
         algorithm: Algorithm, p_psi: Optional[float],
         p_dsep: Optional[float], n: int, trial: int,
         timing: bool) -> SweepRow:
    result, error = outcome
    if error:
        return SweepRow(algorithm.value, p_psi, p_dsep, n, truth_skel.d,
                        trial, error=error)
    score = skeleton_f1(result.skeleton, truth_skel)
    return SweepRow(algorithm.value, p_psi, p_dsep, n, truth_skel.d, trial,
                    score.f1, score.precision, score.recall,
                    perfect_recovery(result.skeleton, truth_skel),
                    result.tests_run, result.wall_ns if timing else 0)


def _mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return float('nan'), float('nan')
    se = float(np.std(values, ddof=1) / np.sqrt(len(values))) \
        if len(values) > 1 else 0.0
    return float(np.mean(values)), se


def aggregate(rows: Sequence[SweepRow]) -> List[AggregateRow]:
    """Mean and standard error per (algorithm, p_psi, p_dsep, n, d)."""
    groups: Dict[Tuple[Any, ...], List[SweepRow]] = {}
    for row in rows:
        key = (row.algorithm, row.p_psi, row.p_dsep, row.n, row.d)
        groups.setdefault(key, []).append(row)
    aggregates = []
    for (algorithm, p_psi, p_dsep, n, d), members in groups.items():
        ok = [row for row in members if not row.error]
        f1_mean, f1_se = _mean_and_se([row.f1 or 0.0 for row in ok])
        tests_mean, tests_se = _mean_and_se([float(row.tests_run or 0)
                                             for row in ok])
        perfect = float(np.mean([bool(row.perfect) for row in ok])) \
            if ok else float('nan')
        aggregates.append(AggregateRow(algorithm, p_psi, p_dsep, n, d,
                                       len(ok), f1_mean, f1_se, perfect,
                                       tests_mean, tests_se))
    return aggregates


def _format(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value)


def _round(value: Any) -> Any:
    if isinstance(value, float) and not isinstance(value, bool):
        return float(f'{value:.6g}')
    return value


def _write_frame(records: Sequence[Any], columns: Sequence[str],
                 path: Optional[Path]) -> Optional[str]:
    frame = pd.DataFrame([[_format(getattr(record, column))
                           for column in columns] for record in records],
                         columns=list(columns), dtype=str)
    try:
        return frame.to_csv(path, index=False, lineterminator='\n')
    except OSError as e:
        raise ReportError(f'Cannot write {path}: {e}') from e


def emit_report(report: SweepReport, fmt: ReportFormat, path: Path) -> int:
    """Write trial rows as CSV (fixed column order) or a JSON array.

    Failed rows only go to JSON, which keeps their `error` message; the
    CSV holds the completed rows. Returns the number of rows written.
    """
    if fmt is ReportFormat.CSV:
        completed = [row for row in report.rows if not row.error]
        if len(completed) < len(report.rows):
            logger.warning('Left %s failed rows out of %s',
                           len(report.rows) - len(completed), path)
        _write_frame(completed, COLUMNS, path)
        return len(completed)
    records = [{key: _round(value) for key, value in asdict(row).items()}
               for row in report.rows]
    try:
        path.write_text(json.dumps(records, indent=2) + '\n')
    except OSError as e:
        raise ReportError(f'Cannot write {path}: {e}') from e
    return len(records)


def emit_summary(report: SweepReport, path: Path) -> None:
    columns = [f.name for f in fields(AggregateRow)]
    _write_frame(report.aggregates, columns, path)


def load_report_json(path: Path) -> SweepReport:
    rows = [SweepRow(**record) for record in json.loads(path.read_text())]
    return SweepReport(rows, aggregate(rows))


def format_rows(records: Sequence[Any]) -> str:
    """CSV text for audit rows, columns in dataclass field order."""
    if not records:
        return ''
    columns = [f.name for f in fields(records[0])]
    return _write_frame(records, columns, None) or ''


@dataclass(frozen=True)
class OracleFailure:
    graph: int
    er_level: int
    algorithm: str
    p_psi: float


def oracle_check(d: int, graphs: int, er_levels: Sequence[int],
                 master_seed: int) -> Tuple[int, List[OracleFailure]]:
    """Run every algorithm with the oracle CIT; collect inexact runs."""
    runs, failures = 0, []
    for er_level, graph in product(er_levels, range(graphs)):
        seed = derive_seed(trial_seed(master_seed, graph), er_level)
        truth = sample_er_dag(d, er_level, stream(seed, Stream.GRAPH))
        truth_skel = skeleton_of(truth)
        coins = channel_coins(d, stream(seed, Stream.EXPERT))
        for p_psi, algorithm in product(ORACLE_CHECK_P_PSI,
                                        ORACLE_CHECK_ALGORITHMS):
            pred = ExpertPrediction(apply_channel(truth_skel, p_psi, coins))
            result = run_algorithm(algorithm, OracleCit(truth), d, pred,
                                   stream(seed, Stream.ORDERING))
            runs += 1
            if not perfect_recovery(result.skeleton, truth_skel):
                failures.append(OracleFailure(graph, er_level,
                                              algorithm.value, p_psi))
    return runs, failures
