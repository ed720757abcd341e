#!/usr/bin/env python3
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.random import Generator
from pytest import approx, mark, raises

from expertpc._citest import (ChiSquare, CitError, CitKind, DegenerateColumn,
                              FisherZ, NoData, NoisyChannelCit, OracleCit,
                              PredrawnChannelCit, SampleTooSmall,
                              SingularCorrelation, SpecificityViolated,
                              chi_square, fisher_z, make_engine,
                              noisy_channel_cit, oracle_cit)
from expertpc._graphs import Dag
from expertpc._synthdata import (DataKind, Dataset, discretize,
                                 sample_dataset, sample_weights, standardize)


def chain_data(chain: Dag, rng: Generator, n: int = 1000) -> Dataset:
    return standardize(sample_dataset(sample_weights(chain, rng), n, rng))


class TestFisherZ:
    @staticmethod
    def test_chain_ends_are_dependent_marginally(
            chain: Dag, rng: Generator
    ) -> None:
        outcome = fisher_z(chain_data(chain, rng), 0, 2, set(), 0.05)

        assert not outcome.independent
        assert outcome.p_value is not None and outcome.p_value < 1e-6

    @staticmethod
    def test_chain_ends_are_independent_given_the_middle(
            chain: Dag, rng: Generator
    ) -> None:
        outcome = fisher_z(chain_data(chain, rng), 0, 2, {1}, 0.01)

        assert outcome.independent

    @staticmethod
    def test_affine_rescaling_leaves_the_statistic_unchanged(
            chain: Dag, rng: Generator
    ) -> None:
        data = sample_dataset(sample_weights(chain, rng), 500, rng)
        values = data.values.copy()
        values[:, 2] = 3.5 * values[:, 2] - 7.0

        for i, j, w in [(0, 2, {1}), (0, 3, set()), (1, 3, {2})]:
            assert fisher_z(Dataset(values), i, j, w, 0.05).statistic \
                == approx(fisher_z(data, i, j, w, 0.05).statistic, rel=1e-9,
                          abs=1e-9)

    @staticmethod
    def test_statistic_is_symmetric_in_the_pair(
            chain: Dag, rng: Generator
    ) -> None:
        data = chain_data(chain, rng)

        for i, j, w in [(0, 2, {1}), (0, 3, set()), (1, 3, {0, 2})]:
            assert fisher_z(data, i, j, w, 0.05).statistic \
                == approx(fisher_z(data, j, i, w, 0.05).statistic)

    @staticmethod
    def test_exact_partial_correlation_of_zero_gives_p_value_one() -> None:
        values = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0],
                           [-1.0, -1.0], [0.5, 0.0], [-0.5, 0.0]])

        outcome = fisher_z(Dataset(values), 0, 1, set(), 0.05)

        assert outcome.p_value == approx(1.0)
        assert outcome.independent

    @staticmethod
    def test_too_few_rows_for_the_conditioning_set_are_rejected(
            chain: Dag, rng: Generator
    ) -> None:
        data = chain_data(chain, rng, n=5)

        with raises(SampleTooSmall):
            fisher_z(data, 0, 1, {2, 3}, 0.05)

    @staticmethod
    def test_single_row_is_rejected() -> None:
        with raises(SampleTooSmall):
            fisher_z(Dataset(np.ones((1, 3))), 0, 1, set(), 0.05)

    @staticmethod
    def test_constant_column_is_degenerate() -> None:
        values = np.column_stack([np.arange(10.0), np.ones(10),
                                  np.arange(10.0) ** 2])

        with raises(DegenerateColumn):
            fisher_z(Dataset(values), 0, 2, {1}, 0.05)

    @staticmethod
    def test_duplicated_column_is_singular(rng: Generator) -> None:
        column = rng.normal(size=50)
        values = np.column_stack([rng.normal(size=50), column, column])

        with raises(SingularCorrelation):
            fisher_z(Dataset(values), 0, 1, {2}, 0.05)

    @staticmethod
    def test_query_with_endpoint_in_conditioning_set_is_rejected(
            chain: Dag, rng: Generator
    ) -> None:
        with raises(CitError):
            fisher_z(chain_data(chain, rng), 0, 1, {1}, 0.05)

    @staticmethod
    def test_engine_matches_the_function_and_counts_calls(
            chain: Dag, rng: Generator
    ) -> None:
        data = chain_data(chain, rng)
        engine = FisherZ(data, 0.05)

        assert engine(0, 3, {1}) == fisher_z(data, 0, 3, {1}, 0.05)
        engine(1, 2, set())
        assert engine.tests_run == 2


class TestChiSquare:
    @staticmethod
    def test_copied_column_is_dependent(rng: Generator) -> None:
        column = rng.integers(0, 3, size=300).astype(float)
        data = Dataset(np.column_stack([column, column]), DataKind.DISCRETE)

        assert not chi_square(data, 0, 1, set(), 0.05).independent

    @staticmethod
    def test_independent_columns_are_independent(rng: Generator) -> None:
        values = rng.integers(0, 2, size=(2000, 2)).astype(float)
        data = Dataset(values, DataKind.DISCRETE)

        assert chi_square(data, 0, 1, set(), 0.001).independent

    @staticmethod
    def test_discretized_chain_separates_given_the_middle(
            chain: Dag, rng: Generator
    ) -> None:
        data = discretize(sample_dataset(sample_weights(chain, rng), 3000,
                                         rng), bins=2)

        assert not chi_square(data, 0, 2, set(), 0.05).independent

    @staticmethod
    def test_constant_stratum_contributes_no_degrees_of_freedom() -> None:
        values = np.array([[0, 0], [0, 1], [0, 0], [0, 1]], dtype=float)
        data = Dataset(values, DataKind.DISCRETE)

        outcome = chi_square(data, 0, 1, set(), 0.05)

        assert outcome.independent
        assert outcome.p_value == 1.0

    @staticmethod
    def test_continuous_data_is_rejected(rng: Generator) -> None:
        with raises(CitError):
            chi_square(Dataset(rng.normal(size=(10, 2))), 0, 1, set(), 0.05)

    @staticmethod
    def test_empty_data_is_rejected() -> None:
        with raises(NoData):
            ChiSquare(Dataset(np.ones((0, 2)), DataKind.DISCRETE))(0, 1,
                                                                   set())


class TestOracleAndChannel:
    @staticmethod
    def test_oracle_answers_d_separation(collider: Dag) -> None:
        assert oracle_cit(collider, 0, 1, set()).independent
        assert not oracle_cit(collider, 0, 1, {2}).independent

    @staticmethod
    def test_channel_with_zero_noise_matches_the_oracle(
            chain: Dag, rng: Generator
    ) -> None:
        assert noisy_channel_cit(chain, 0, 2, {1}, 0.0, 0.0, rng).independent
        assert not noisy_channel_cit(chain, 0, 2, set(), 0.0, 0.0,
                                     rng).independent

    @staticmethod
    def test_channel_error_rates_match_alpha_and_beta(chain: Dag) -> None:
        engine = NoisyChannelCit(chain, 0.1, 0.3, 7)
        trials = 20000

        false_dependence = sum(not engine(0, 2, {1}).independent
                               for _ in range(trials)) / trials
        false_independence = sum(engine(0, 2, set()).independent
                                 for _ in range(trials)) / trials

        assert false_dependence == approx(0.1, abs=0.015)
        assert false_independence == approx(0.3, abs=0.015)

    @staticmethod
    def test_channel_needs_specificity_above_miss_rate(chain: Dag) -> None:
        with raises(SpecificityViolated):
            NoisyChannelCit(chain, 0.5, 0.5, 0)

    @staticmethod
    def test_predrawn_channel_is_stable_per_query(chain: Dag) -> None:
        engine = PredrawnChannelCit(chain, 0.3, 0.3, 11)

        first = [engine(0, 2, {1}).independent for _ in range(5)]
        reversed_query = engine(2, 0, {1}).independent

        assert len(set(first)) == 1
        assert reversed_query == first[0]

    @staticmethod
    def test_predrawn_channel_ignores_query_order(chain: Dag) -> None:
        queries = [(0, 2, frozenset({1})), (0, 3, frozenset()),
                   (1, 3, frozenset({2}))]
        forward = PredrawnChannelCit(chain, 0.2, 0.4, 5)
        backward = PredrawnChannelCit(chain, 0.2, 0.4, 5)

        outcomes = [forward(*query) for query in queries]
        reversed_outcomes = [backward(*query) for query in queries[::-1]]

        assert outcomes == reversed_outcomes[::-1]

    @staticmethod
    def test_counter_is_exact_under_threads(chain: Dag) -> None:
        engine = OracleCit(chain)

        with ThreadPoolExecutor(max_workers=4) as executor:
            list(executor.map(lambda _: engine(0, 3, {1}), range(400)))

        assert engine.tests_run == 400


class TestMakeEngine:
    @staticmethod
    @mark.parametrize('kind', [CitKind.FISHER_Z, CitKind.CHI_SQUARE])
    def test_data_engines_need_a_dataset(kind: CitKind) -> None:
        with raises(CitError):
            make_engine(kind, 0.05)

    @staticmethod
    @mark.parametrize('kind', [CitKind.ORACLE, CitKind.CHANNEL])
    def test_graph_engines_need_the_truth(kind: CitKind) -> None:
        with raises(CitError):
            make_engine(kind, 0.05)

    @staticmethod
    def test_channel_engine_checks_specificity(chain: Dag) -> None:
        with raises(SpecificityViolated):
            make_engine(CitKind.CHANNEL, 0.6, truth=chain, beta=0.5)

    @staticmethod
    def test_kinds_build_their_engines(chain: Dag, rng: Generator) -> None:
        data = chain_data(chain, rng, n=20)

        assert isinstance(make_engine(CitKind.FISHER_Z, 0.05, data), FisherZ)
        assert isinstance(make_engine(CitKind.ORACLE, 0.05, truth=chain),
                          OracleCit)
        assert isinstance(make_engine(CitKind.CHANNEL, 0.05, truth=chain,
                                      beta=0.2), NoisyChannelCit)
