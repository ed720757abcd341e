#!/usr/bin/env python3
import sys
from contextlib import contextmanager
from dataclasses import replace
from logging import DEBUG, INFO, FileHandler, getLogger
from os import cpu_count, getenv
from pathlib import Path
from typing import Iterator, List, Optional

from pydantic import ValidationError, parse_obj_as
from tomlkit import parse
from tomlkit.exceptions import TOMLKitError
from typer import BadParameter, Option, Typer
from xdg import xdg_cache_home, xdg_config_home

from expertpc._citest import CitKind, make_engine
from expertpc._config import (SACHS, ConfigError, ConfigNotFoundError,
                              ReportFormat, SweepConfig)
from expertpc._core import ExpertPcError, title, warning
from expertpc._discovery import Algorithm, run_algorithm
from expertpc._expert import load_expert_skeleton
from expertpc._experiments import (emit_report, emit_summary, format_rows,
                                   oracle_check, run_sweep)
from expertpc._graphs import (PRESETS, Dag, Pair, format_edge_list, pair,
                              read_dag, skeleton_of)
from expertpc._metrics import (PhiSetup, monotonicity_audit, runtime_audit,
                               skeleton_f1)
from expertpc._synthdata import (DataKind, Stream, align_columns, load_csv,
                                 load_sachs_truth, sample_weights,
                                 standardize, stream, trial_seed)

CONFIG_ROOT = xdg_config_home() / 'expertpc'
LOG_PATH = xdg_cache_home() / 'expertpc' / 'log'
SEED_VARIABLE = 'G2G_SEED'
MAX_DEFAULT_JOBS = 8
SEED_HELP = f'Master seed; falls back to the config, then ${SEED_VARIABLE}'
TRUTH_HELP = f'Edge-list file of the true DAG, or "{SACHS}"'

seed_option = Option(None, help=SEED_HELP)
jobs_option = Option(None, help='Worker threads')
alpha_option = Option(0.05, help='Significance level')
beta_option = Option(0.2, help='Channel CIT miss rate')
preset_option = Option('chain', help=f'One of {", ".join(PRESETS)}')
truth_option = Option(None, help=TRUTH_HELP)

app = Typer(help='Expert-guided constraint-based skeleton discovery.')
logger = getLogger(__name__)
package_logger = getLogger('expertpc')


def main() -> None:
    set_logger_handler()
    app()


def set_logger_handler() -> None:
    if filename := getenv('EXPERTPC_LOG', LOG_PATH):
        path = Path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        while package_logger.handlers:
            package_logger.removeHandler(package_logger.handlers[0])
        package_logger.addHandler(FileHandler(filename=path))
    package_logger.setLevel(INFO)


@contextmanager
def exit_on_error() -> Iterator[None]:
    try:
        yield
    except (ValidationError, ExpertPcError) as e:
        sys.exit(str(e))
    except Exception as e:
        logger.exception('')
        sys.exit(f'Unhandled error, please report it to the maintainer: "{e}"')


def read_config(path: Path) -> SweepConfig:
    try:
        with open(path) as f:
            contents = f.read()
    except FileNotFoundError as e:
        raise ConfigNotFoundError(path) from e

    try:
        user_config = parse(contents).unwrap()
    except TOMLKitError as e:
        raise ConfigError(f'Error while parsing config file {path}: {e}') \
            from e
    return parse_obj_as(SweepConfig, user_config)


def get_root_dir() -> Path:
    """Get envvar `EXPERTPC_ROOT` or default path."""
    return Path(getenv('EXPERTPC_ROOT', CONFIG_ROOT))


def get_root_path() -> Path:
    return get_root_dir() / 'sweep.toml'


def load_config_or_default(path: Optional[Path]) -> SweepConfig:
    """Read `path`, or the root config; a missing root config is not fatal."""
    if path is not None:
        return read_config(path)
    try:
        return read_config(get_root_path())
    except ConfigNotFoundError as e:
        warning(f'{e}, using defaults', end='\n\n')
        return SweepConfig()


def resolve_seed(flag: Optional[int], configured: Optional[int]) -> int:
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    if value := getenv(SEED_VARIABLE):
        try:
            return int(value)
        except ValueError as e:
            raise ConfigError(f'{SEED_VARIABLE} must be an integer, got '
                              f'{value!r}') from e
    return 0


def resolve_jobs(flag: Optional[int], configured: Optional[int]) -> int:
    return flag or configured or min(MAX_DEFAULT_JOBS, cpu_count() or 1)


def read_truth(truth: str) -> Dag:
    return load_sachs_truth() if truth == SACHS else read_dag(Path(truth))


def load_truth(preset: str, truth: Optional[str]) -> Dag:
    if truth is not None:
        return read_truth(truth)
    try:
        return PRESETS[preset]()
    except KeyError as e:
        raise ConfigError(f'Unknown preset {e}') from e


def _float_grid(text: str) -> List[float]:
    try:
        return [float(value) for value in text.split(',')]
    except ValueError as e:
        raise BadParameter(f'Expected comma-separated numbers: {text}') \
            from e


def _int_grid(text: str) -> List[int]:
    try:
        return [int(value) for value in text.split(',')]
    except ValueError as e:
        raise BadParameter(f'Expected comma-separated integers: {text}') \
            from e


def _edge(text: str) -> Pair:
    values = _int_grid(text)
    if len(values) != 2:
        raise BadParameter(f'Expected an edge "i,j": {text}')
    return pair(*values)


@app.callback()
def configure(verbose: bool = Option(False, help='Log every edge removal')) \
        -> None:
    """Expert-guided constraint-based skeleton discovery."""
    if verbose:
        package_logger.setLevel(DEBUG)


@app.command()
def sweep(config: Optional[Path] = Option(None, help='Sweep TOML file'),
          seed: Optional[int] = seed_option,
          jobs: Optional[int] = jobs_option,
          output: Optional[Path] = Option(None, help='Report path'),
          report_format: Optional[ReportFormat] = Option(
              None, '--format', help='Report format'),
          no_timing: bool = Option(False, '--no-timing',
                                   help='Write wall_ns as 0')) -> None:
    """Run a configured sweep and write per-trial rows plus a summary."""
    with exit_on_error():
        sweep_config = load_config_or_default(config)
        if no_timing:
            sweep_config = replace(sweep_config, timing=False)
        fmt = report_format or sweep_config.format
        path = output or sweep_config.output or Path(f'sweep.{fmt.value}')
        master_seed = resolve_seed(seed, sweep_config.seed)

        title(f'Running {sweep_config.trials} trials (seed {master_seed})')
        report = run_sweep(sweep_config, master_seed,
                           resolve_jobs(jobs, sweep_config.jobs))
        written = emit_report(report, fmt, path)
        emit_summary(report, path.with_name(f'{path.stem}.summary.csv'))
        failed = sum(bool(row.error) for row in report.rows)
        if failed:
            hint = 'rerun with `--format json` to see their errors' \
                if fmt is ReportFormat.CSV else 'see their `error` field'
            warning(f'{failed} rows failed, {hint}')
        print(f'Wrote {written} rows to {path}')


@app.command()
def discover(data: Path = Option(..., help='CSV file, one column per '
                                 'variable'),
             algo: Algorithm = Option(..., help='Algorithm to run'),
             expert: Optional[Path] = Option(None, help='Expert skeleton'),
             alpha: float = alpha_option,
             kind: DataKind = Option(DataKind.CONTINUOUS,
                                     help='Continuous data uses Fisher-Z, '
                                     'discrete data chi-square'),
             truth: Optional[str] = truth_option,
             eta: Optional[int] = Option(None, help='rPC-approx depth'),
             seed: Optional[int] = seed_option,
             output: Optional[Path] = Option(None, help='Write the '
                                             'skeleton as an edge list'),
             as_json: bool = Option(False, '--json',
                                    help='Print the full result as JSON')) \
        -> None:
    """Learn a skeleton from a CSV file."""
    with exit_on_error():
        dataset = load_csv(data, kind)
        true_dag = read_truth(truth) if truth is not None else None
        if true_dag is not None:
            dataset = align_columns(dataset, true_dag.labels)
        if kind is DataKind.CONTINUOUS:
            dataset = standardize(dataset)
        cit_kind = CitKind.FISHER_Z if kind is DataKind.CONTINUOUS \
            else CitKind.CHI_SQUARE
        cit = make_engine(cit_kind, alpha, dataset)
        pred = load_expert_skeleton(expert, dataset.d, dataset.names) \
            if expert is not None else None
        master_seed = resolve_seed(seed, None)
        result = run_algorithm(algo, cit, dataset.d, pred,
                               stream(trial_seed(master_seed, 0),
                                      Stream.ORDERING), eta)

        if as_json:
            print(result.to_json())
        else:
            title(f'{algo.value} skeleton')
            print(format_edge_list(result.skeleton, dataset.names), end='')
            print(f'tests_run: {result.tests_run}')
        if true_dag is not None:
            score = skeleton_f1(result.skeleton, skeleton_of(true_dag))
            print(f'f1: {score.f1:.6g} precision: {score.precision:.6g} '
                  f'recall: {score.recall:.6g}')
        if output is not None:
            output.write_text(format_edge_list(result.skeleton,
                                               dataset.names))


@app.command()
def audit_monotonicity(
        preset: str = preset_option,
        truth: Optional[str] = truth_option,
        algo: Algorithm = Option(Algorithm.GPC_GUESS, help='Algorithm'),
        p_grid: str = Option('0.5,0.75,1.0', help='Ascending p_psi values'),
        trials: int = Option(1000, help='Trials per grid point'),
        metric: str = Option('phi', help='phi or f1'),
        exact: bool = Option(False, help='Exact Φ instead of Monte-Carlo'),
        cit: CitKind = Option(CitKind.CHANNEL, help='CIT engine'),
        alpha: float = alpha_option,
        beta: float = beta_option,
        p_dsep: Optional[float] = Option(None, help='d-sep predictor '
                                         'accuracy'),
        n: int = Option(1000, help='Samples per trial with fisher-z'),
        seed: Optional[int] = seed_option,
        jobs: Optional[int] = jobs_option) -> None:
    """Check that Φ (or mean F1) does not drop as p_psi grows."""
    grid = _float_grid(p_grid)
    with exit_on_error():
        dag = load_truth(preset, truth)
        master_seed = resolve_seed(seed, None)
        weighted = sample_weights(dag, stream(master_seed, Stream.WEIGHTS)) \
            if cit is CitKind.FISHER_Z else None
        setup = PhiSetup(dag, algo, grid[0], p_dsep, cit, alpha, beta,
                         weighted, n if weighted is not None else None)
        rows = monotonicity_audit(setup, grid, trials, master_seed, metric,
                                  exact, resolve_jobs(jobs, None))
        print(format_rows(rows), end='')
        drops = [row for row in rows if row.flag]
        if drops:
            sys.exit('Metric dropped at p = '
                     + ', '.join(f'{row.p:g}' for row in drops))


@app.command()
def audit_runtime(
        preset: str = preset_option,
        truth: Optional[str] = truth_option,
        edge: str = Option('0,2', help='Edge "i,j" to prune'),
        k: int = Option(1, help='Conditioning set size'),
        p_dsep_grid: str = Option('0.5,0.75,1.0', help='p_dsep values'),
        alpha: float = alpha_option,
        beta: float = beta_option,
        reps: int = Option(1000, help='Repetitions per grid point'),
        seed: Optional[int] = seed_option) -> None:
    """Mean EP-G test count on one edge as the d-sep predictor improves."""
    tested = _edge(edge)
    grid = _float_grid(p_dsep_grid)
    with exit_on_error():
        dag = load_truth(preset, truth)
        rows = runtime_audit(dag, tested, k, grid, alpha, beta, reps,
                             resolve_seed(seed, None))
        print(format_rows(rows), end='')


@app.command('oracle-check')
def check_oracle(
        d: int = Option(6, '--d', help='Variables per graph'),
        graphs: int = Option(100, help='Graphs per ER level'),
        er_levels: str = Option('1,3', help='Expected parents per node'),
        seed: Optional[int] = seed_option) -> None:
    """Run every algorithm with the oracle CIT and demand exact recovery."""
    levels = _int_grid(er_levels)
    with exit_on_error():
        runs, failures = oracle_check(d, graphs, levels,
                                      resolve_seed(seed, None))
        for failure in failures[:10]:
            warning(f'{failure.algorithm} missed graph {failure.graph} '
                    f'(ER{failure.er_level}, p_psi={failure.p_psi:g})')
        if failures:
            sys.exit(f'{len(failures)} of {runs} oracle runs were inexact')
        print(f'All {runs} oracle runs exact')

