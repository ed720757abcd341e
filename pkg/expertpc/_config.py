#!/usr/bin/env python3
from dataclasses import field
from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic.dataclasses import dataclass

from expertpc._citest import CitKind
from expertpc._core import ExpertPcError
from expertpc._discovery import Algorithm
from expertpc._synthdata import DataKind

SACHS = 'sachs'
DEFAULT_P_PSI = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


class ConfigError(ExpertPcError):
    pass


class ConfigNotFoundError(ConfigError):
    def __init__(self, path: Path):
        super().__init__(f'Config file {path} not found')


class DataSource(str, Enum):
    SYNTHETIC = 'synthetic'
    CSV = 'csv'


class ReportFormat(str, Enum):
    CSV = 'csv'
    JSON = 'json'


def _check_probabilities(name: str, values: List[float]) -> None:
    if not values:
        raise ConfigError(f'`{name}` must not be empty')
    if any(not 0 <= value <= 1 for value in values):
        raise ConfigError(f'`{name}` values must lie in [0, 1]')


@dataclass
class DataSpec:
    source: DataSource = DataSource.SYNTHETIC
    d: List[int] = field(default_factory=lambda: [10])
    er_level: int = 1
    n: List[int] = field(default_factory=lambda: [100])
    path: Optional[Path] = None
    kind: DataKind = DataKind.CONTINUOUS
    truth: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.n or any(n < 1 for n in self.n):
            raise ConfigError('`data.n` must hold positive sample sizes')
        if self.source == DataSource.SYNTHETIC:
            if not self.d or any(d < 2 for d in self.d) \
                    or self.er_level < 1:
                raise ConfigError('Synthetic data needs every d >= 2 and '
                                  'er_level >= 1')
        elif self.path is None or self.truth is None:
            raise ConfigError('CSV data needs `path` and `truth` '
                              f'(an edge-list file or "{SACHS}")')


@dataclass
class ExpertSpec:
    p_psi: List[float] = field(default_factory=lambda: list(DEFAULT_P_PSI))
    p_dsep: Optional[List[float]] = None
    file: Optional[Path] = None

    def __post_init__(self) -> None:
        _check_probabilities('expert.p_psi', self.p_psi)
        if self.p_dsep is not None:
            _check_probabilities('expert.p_dsep', self.p_dsep)


@dataclass
class CitSpec:
    kind: CitKind = CitKind.FISHER_Z
    beta: float = 0.2


@dataclass
class SweepConfig:
    seed: Optional[int] = None
    trials: int = 30
    alpha: float = 0.05
    algorithms: List[Algorithm] = field(default_factory=lambda: [
        Algorithm.PC, Algorithm.PC_STABLE, Algorithm.PC_GUESS,
        Algorithm.GPC_GUESS, Algorithm.GPC])
    jobs: Optional[int] = None
    timing: bool = True
    rpc_eta: Optional[int] = None
    output: Optional[Path] = None
    format: ReportFormat = ReportFormat.CSV
    data: DataSpec = field(default_factory=DataSpec)
    expert: ExpertSpec = field(default_factory=ExpertSpec)
    cit: CitSpec = field(default_factory=CitSpec)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError('`trials` must be at least 1')
        if not 0 < self.alpha < 1:
            raise ConfigError('`alpha` must lie in (0, 1)')
        if not self.algorithms:
            raise ConfigError('`algorithms` must not be empty')
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError('`jobs` must be at least 1')
