#!/usr/bin/env python3
from pathlib import Path

import numpy as np
from numpy.random import Generator
from pytest import approx, raises

from expertpc._graphs import Dag, skeleton_of
from expertpc._synthdata import (DataError, DataKind, Dataset, EmptyFile,
                                 NTooLarge, NonNumericCell, RaggedRows,
                                 Stream, ZeroVariance, align_columns,
                                 discretize, load_csv, load_sachs_truth,
                                 permute_variables, sample_dataset,
                                 sample_weights, standardize, stream,
                                 subsample, trial_seed)


def write_csv(tmp_path: Path, text: str) -> Path:
    path = tmp_path / 'data.csv'
    path.write_text(text)
    return path


class TestSeeds:
    @staticmethod
    def test_trial_seeds_are_reproducible_and_distinct() -> None:
        seeds = [trial_seed(42, t) for t in range(100)]

        assert seeds == [trial_seed(42, t) for t in range(100)]
        assert len(set(seeds)) == 100

    @staticmethod
    def test_streams_with_different_purposes_differ() -> None:
        seed = trial_seed(0, 0)

        assert stream(seed, Stream.DATA).random() \
            != stream(seed, Stream.GRAPH).random()
        assert stream(seed, Stream.DATA, 100).random() \
            == stream(seed, Stream.DATA, 100).random()


class TestSampling:
    @staticmethod
    def test_weights_have_magnitude_in_the_sampling_range(
            chain: Dag, rng: Generator
    ) -> None:
        weighted = sample_weights(chain, rng)

        assert set(weighted.weights) == set(chain.edges)
        assert all(1.5 <= abs(w) <= 2.5 for w in weighted.weights.values())

    @staticmethod
    def test_sample_dataset_has_n_rows_and_d_columns(
            chain: Dag, rng: Generator
    ) -> None:
        data = sample_dataset(sample_weights(chain, rng), 50, rng)

        assert data.values.shape == (50, 4)
        assert data.names == chain.labels

    @staticmethod
    def test_single_row_dataset_is_allowed(
            chain: Dag, rng: Generator
    ) -> None:
        assert sample_dataset(sample_weights(chain, rng), 1, rng).n == 1

    @staticmethod
    def test_zero_rows_are_rejected(chain: Dag, rng: Generator) -> None:
        with raises(DataError):
            sample_dataset(sample_weights(chain, rng), 0, rng)

    @staticmethod
    def test_adjacent_chain_variables_are_strongly_correlated(
            chain: Dag, rng: Generator
    ) -> None:
        data = sample_dataset(sample_weights(chain, rng), 2000, rng)

        correlation = np.corrcoef(data.values, rowvar=False)

        assert abs(correlation[0, 1]) > 0.7

    @staticmethod
    def test_sample_covariance_matches_the_model(
            chain: Dag, rng: Generator
    ) -> None:
        weighted = sample_weights(chain, rng)
        inverse = np.linalg.inv(np.eye(4) - weighted.matrix())

        data = sample_dataset(weighted, 200_000, rng)

        assert np.cov(data.values, rowvar=False) \
            == approx(inverse.T @ inverse, rel=0.02)

    @staticmethod
    def test_isolated_variable_is_nearly_uncorrelated(
            collider: Dag, rng: Generator
    ) -> None:
        data = sample_dataset(sample_weights(collider, rng), 5000, rng)

        correlation = np.corrcoef(data.values, rowvar=False)

        assert abs(correlation[0, 3]) < 0.1


class TestStandardize:
    @staticmethod
    def test_columns_get_zero_mean_and_unit_variance(rng: Generator) -> None:
        data = Dataset(rng.normal(3, 2, size=(100, 3)))

        standardized = standardize(data).values

        assert standardized.mean(axis=0) == approx(np.zeros(3), abs=1e-12)
        assert standardized.std(axis=0, ddof=1) == approx(np.ones(3))

    @staticmethod
    def test_constant_column_is_rejected() -> None:
        values = np.column_stack([np.arange(5.0), np.ones(5)])

        with raises(ZeroVariance, match='x1'):
            standardize(Dataset(values))

    @staticmethod
    def test_single_row_is_rejected() -> None:
        with raises(ZeroVariance):
            standardize(Dataset(np.ones((1, 2))))

    @staticmethod
    def test_discrete_data_is_rejected() -> None:
        with raises(DataError):
            standardize(Dataset(np.ones((3, 2)), DataKind.DISCRETE))


class TestPermuteVariables:
    @staticmethod
    def test_columns_and_graph_move_together(
            chain: Dag, rng: Generator
    ) -> None:
        data = sample_dataset(sample_weights(chain, rng), 10, rng)

        permuted, truth, permutation = permute_variables(data, chain, rng)

        for vertex in range(4):
            assert np.array_equal(permuted.values[:, permutation[vertex]],
                                  data.values[:, vertex])
            assert permuted.names[permutation[vertex]] == data.names[vertex]
        assert len(skeleton_of(truth)) == 3
        for parent, child in chain.edges:
            assert (permutation[parent], permutation[child]) in truth.edges

    @staticmethod
    def test_size_mismatch_is_rejected(chain: Dag) -> None:
        with raises(DataError):
            permute_variables(Dataset(np.ones((2, 3))), chain, 0)


class TestLoadCsv:
    @staticmethod
    def test_continuous_file_is_parsed_with_names(tmp_path: Path) -> None:
        path = write_csv(tmp_path, 'a,b\n1.5,2\n3, 4\n')

        data = load_csv(path)

        assert data.names == ('a', 'b')
        assert data.values.tolist() == [[1.5, 2.0], [3.0, 4.0]]

    @staticmethod
    def test_discrete_file_gets_category_codes(tmp_path: Path) -> None:
        path = write_csv(tmp_path, 'a,b\nlow,on\nhigh,on\nlow,off\n')

        data = load_csv(path, DataKind.DISCRETE)

        assert data.kind is DataKind.DISCRETE
        assert data.values.tolist() == [[0, 0], [1, 0], [0, 1]]

    @staticmethod
    def test_empty_file_is_rejected(tmp_path: Path) -> None:
        with raises(EmptyFile):
            load_csv(write_csv(tmp_path, ''))

    @staticmethod
    def test_header_only_file_is_rejected(tmp_path: Path) -> None:
        with raises(EmptyFile):
            load_csv(write_csv(tmp_path, 'a,b\n'))

    @staticmethod
    def test_row_with_extra_fields_is_rejected(tmp_path: Path) -> None:
        with raises(RaggedRows):
            load_csv(write_csv(tmp_path, 'a,b\n1,2\n3,4,5\n'))

    @staticmethod
    def test_non_numeric_cell_is_rejected(tmp_path: Path) -> None:
        with raises(NonNumericCell):
            load_csv(write_csv(tmp_path, 'a,b\n1,2\n3,x\n'))


class TestDataHelpers:
    @staticmethod
    def test_discretize_makes_three_balanced_categories(
            rng: Generator
    ) -> None:
        data = discretize(Dataset(rng.normal(size=(300, 2))))

        assert data.kind is DataKind.DISCRETE
        assert set(np.unique(data.values)) == {0.0, 1.0, 2.0}
        assert np.bincount(data.values[:, 0].astype(int)).tolist() \
            == [100, 100, 100]

    @staticmethod
    def test_subsample_draws_distinct_rows(rng: Generator) -> None:
        values = np.arange(20.0).reshape(10, 2)

        rows = subsample(Dataset(values), 4, rng).values

        assert rows.shape == (4, 2)
        assert len({tuple(row) for row in rows}) == 4

    @staticmethod
    def test_subsample_larger_than_data_is_rejected() -> None:
        with raises(NTooLarge):
            subsample(Dataset(np.ones((3, 2))), 4, 0)

    @staticmethod
    def test_align_columns_follows_the_given_names() -> None:
        data = Dataset(np.array([[1.0, 2.0]]), names=('b', 'a'))

        aligned = align_columns(data, ['a', 'b'])

        assert aligned.values.tolist() == [[2.0, 1.0]]
        assert aligned.names == ('a', 'b')

    @staticmethod
    def test_align_columns_rejects_missing_names() -> None:
        with raises(DataError):
            align_columns(Dataset(np.ones((1, 2))), ['x0', 'y'])


class TestSachsTruth:
    @staticmethod
    def test_bundled_network_has_eleven_proteins_and_seventeen_edges(
    ) -> None:
        truth = load_sachs_truth()

        assert truth.d == 11
        assert len(truth.edges) == 17
        assert truth.labels[:2] == ('Raf', 'Mek')

    @staticmethod
    def test_bundled_network_links_mek_to_erk() -> None:
        truth = load_sachs_truth()
        mek, erk = truth.labels.index('Mek'), truth.labels.index('Erk')

        assert (mek, erk) in truth.edges
