#!/usr/bin/env python3
from pathlib import Path
from typing import Iterator, List

import pandas as pd
from numpy.random import Generator, default_rng
from pytest import MonkeyPatch, fixture

from expertpc._graphs import (Dag, chain_dag, collider_dag, common_cause_dag,
                              write_edge_list)
from expertpc._synthdata import sample_dataset, sample_weights


@fixture
def chain() -> Dag:
    return chain_dag()


@fixture
def collider() -> Dag:
    return collider_dag()


@fixture
def common_cause() -> Dag:
    return common_cause_dag()


@fixture
def rng() -> Generator:
    return default_rng(12345)


@fixture
def chain_files(tmp_path: Path, chain: Dag, rng: Generator) -> List[Path]:
    """A 500-row chain CSV and its edge-list truth."""
    data = sample_dataset(sample_weights(chain, rng), 500, rng)
    data_path = tmp_path / 'chain.csv'
    pd.DataFrame(data.values, columns=list(data.names)).to_csv(
        data_path, index=False)
    truth_path = tmp_path / 'chain.txt'
    write_edge_list(chain, truth_path)
    return [data_path, truth_path]


@fixture
def disable_log_file(monkeypatch: MonkeyPatch) -> Iterator[None]:
    with monkeypatch.context() as m:
        m.setenv('EXPERTPC_LOG', '')
        yield
