import math
import tempfile
from itertools import combinations
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase
from hypothesis import given
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import linregress

from benchmark.evaluation import (
    EvalRecord, dispersion_R, friedman_nemenyi, morans_I, morans_I_maxmag, nemenyi_q, ols_regression,
    read_records_csv, roc_auc, write_records_csv,
)
from benchmark.exceptions import EvaluationError, IncompleteGridError
from outliers.dataset import Dataset
from outliers.lid import LidProfile
from outliers.neighbors import build_neighbor_graph


def pairwise_auc(scores, labels):
    positives = scores[labels == 1]
    negatives = scores[labels == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in positives for n in negatives)
    return wins / (len(positives) * len(negatives))


def lattice_graph(n, k):
    return build_neighbor_graph(Dataset(np.arange(n, dtype=float).reshape(-1, 1)), k)


class RocAucTests(SimpleTestCase):
    def test_perfect_ranking(self):
        self.assertEqual(roc_auc([1, 2, 3, 4], [0, 0, 1, 1]), 1.0)

    def test_all_ties(self):
        self.assertEqual(roc_auc([7, 7, 7, 7], [0, 1, 0, 1]), 0.5)

    def test_single_class(self):
        with self.assertRaisesMessage(EvaluationError, "both outliers and inliers"):
            roc_auc([1, 2, 3], [0, 0, 0])

    def test_matches_pairwise_comparison(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 200))
            labels = rng.integers(0, 2, n)
            labels[:2] = [0, 1]
            scores = rng.integers(0, 15, n).astype(float)
            self.assertEqual(roc_auc(scores, labels), pairwise_auc(scores, labels))

    @hypothesis_settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 10), st.booleans()), min_size=2, max_size=60))
    def test_antisymmetry_and_monotone_invariance(self, rows):
        scores = np.array([score for score, _ in rows], dtype=float)
        labels = np.array([int(flag) for _, flag in rows])
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        auc = roc_auc(scores, labels)
        self.assertAlmostEqual(auc + roc_auc(-scores, labels), 1.0, places=12)
        self.assertEqual(roc_auc(np.exp(scores), labels), auc)


class DispersionTests(SimpleTestCase):
    def test_equal_ids(self):
        self.assertEqual(dispersion_R(np.full(10, 3.0)), 0.0)

    def test_two_points(self):
        self.assertAlmostEqual(dispersion_R([math.e, math.e ** 3]), 2.0, places=12)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            ids = rng.uniform(0.5, 20, int(rng.integers(2, 500)))
            logs = np.log(ids)
            n = len(logs)
            brute = sum(abs(a - b) for a, b in combinations(logs, 2)) * 2 / (n * (n - 1))
            self.assertAlmostEqual(dispersion_R(ids), brute, delta=1e-10)

    def test_scale_invariance_and_profiles(self):
        ids = np.random.default_rng(2).uniform(1, 10, 100)
        profile = LidProfile('MLE', 10, ids, np.log(ids))
        self.assertAlmostEqual(dispersion_R(profile), dispersion_R(ids * 7.5), places=10)

    def test_needs_two_values(self):
        with self.assertRaises(EvaluationError):
            dispersion_R([2.0])


class MoransITests(SimpleTestCase):
    def test_constant_values(self):
        with self.assertRaisesMessage(EvaluationError, "Moran's I undefined"):
            morans_I(np.ones(20), lattice_graph(20, 2), 2)

    def test_smooth_field_is_positive(self):
        self.assertGreater(morans_I(np.arange(50.0), lattice_graph(50, 2), 2), 0.5)

    def test_symmetrized_weights(self):
        graph = lattice_graph(50, 2)
        values = np.arange(50.0)
        symmetric = morans_I(values, graph, 2, weights='symmetric')
        self.assertGreater(symmetric, 0.5)
        self.assertNotEqual(symmetric, morans_I(values, graph, 2))
        with self.settings(DAO_MORANS_WEIGHTS='symmetric'):
            self.assertEqual(morans_I(values, graph, 2), symmetric)
        with self.assertRaisesMessage(EvaluationError, "unknown Moran's I weights"):
            morans_I(values, graph, 2, weights='binary')

    def test_permuted_values_center_on_null_expectation(self):
        n = 60
        graph = lattice_graph(n, 4)
        rng = np.random.default_rng(3)
        values = np.log(rng.uniform(1, 10, n))
        samples = np.array([morans_I(rng.permutation(values), graph, 4) for _ in range(200)])
        standard_error = samples.std(ddof=1) / math.sqrt(len(samples))
        self.assertLess(abs(samples.mean() + 1 / (n - 1)), 3 * standard_error)

    def test_max_magnitude_picks_the_strongest_k(self):
        values = np.array([(-1.0) ** i for i in range(40)])
        graph = lattice_graph(40, 4)
        value, k = morans_I_maxmag(values, graph, [4, 2])
        self.assertEqual(k, 2)
        self.assertLess(value, -0.9)
        self.assertEqual(value, morans_I(values, graph, 2))

    def test_single_k(self):
        graph = lattice_graph(30, 4)
        values = np.arange(30.0)
        self.assertEqual(morans_I_maxmag(values, graph, [3]), (morans_I(values, graph, 3), 3))

    def test_ties_go_to_the_smallest_k(self):
        graph = lattice_graph(30, 3)
        values = np.arange(30.0)
        with self.settings(DAO_MORANS_K_RANGE=(3, 3)):
            self.assertEqual(morans_I_maxmag(values, graph)[1], 3)
        first = morans_I_maxmag(values, graph, [2, 2, 2])
        self.assertEqual(first[1], 2)


class RegressionTests(SimpleTestCase):
    def test_exact_line(self):
        result = ols_regression([1, 2, 3, 4], [3, 5, 7, 9])
        self.assertAlmostEqual(result.slope, 2.0)
        self.assertAlmostEqual(result.intercept, 1.0)
        self.assertEqual(result.pearson_rho, 1.0)
        self.assertEqual(result.p_value, 0.0)

    def test_p_value_matches_scipy(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            x = rng.normal(size=30)
            y = 0.3 * x + rng.normal(size=30)
            result = ols_regression(x, y)
            reference = linregress(x, y)
            self.assertAlmostEqual(result.slope, reference.slope, places=10)
            self.assertAlmostEqual(result.pearson_rho, reference.rvalue, places=10)
            self.assertAlmostEqual(result.p_value, reference.pvalue, places=10)
            self.assertEqual(np.sign(result.slope), np.sign(result.pearson_rho))

    def test_independent_noise(self):
        rng = np.random.default_rng(5)
        result = ols_regression(rng.normal(size=400), rng.normal(size=400))
        self.assertLess(abs(result.pearson_rho), 0.2)
        self.assertGreater(result.p_value, 1e-4)

    def test_degenerate_input(self):
        with self.assertRaisesMessage(EvaluationError, "zero variance"):
            ols_regression([1, 1, 1], [1, 2, 3])
        with self.assertRaisesMessage(EvaluationError, "at least 3 points"):
            ols_regression([1, 2], [1, 2])


class RankTests(SimpleTestCase):
    def test_one_method_always_wins(self):
        table = pd.DataFrame({'A': [0.9, 0.8, 0.95], 'B': [0.5, 0.7, 0.6]})
        summary = friedman_nemenyi(table)
        assert_array_equal(summary.average_ranks, [1.0, 2.0])

    def test_ties_share_the_average_rank(self):
        table = pd.DataFrame(np.full((5, 4), 0.7), columns=list('ABCD'))
        assert_array_equal(friedman_nemenyi(table).average_ranks, [2.5] * 4)

    def test_matches_sorting_each_row(self):
        rng = np.random.default_rng(6)
        table = pd.DataFrame(rng.uniform(size=(10, 4)), columns=list('ABCD'))
        expected = np.zeros(4)
        for row in table.to_numpy():
            expected[np.argsort(-row)] += np.arange(1, 5)
        summary = friedman_nemenyi(table)
        assert_allclose(summary.average_ranks, expected / 10)
        self.assertAlmostEqual(summary.critical_distance, 2.569 * math.sqrt(4 * 5 / 60), places=10)
        self.assertTrue(0 <= summary.friedman_p_value <= 1)

    def test_monotone_transform_keeps_ranks(self):
        table = pd.DataFrame(np.random.default_rng(7).uniform(size=(6, 3)), columns=list('ABC'))
        assert_array_equal(friedman_nemenyi(table).average_ranks, friedman_nemenyi(table ** 3).average_ranks)

    def test_missing_cell(self):
        table = pd.DataFrame({'A': [0.9, np.nan], 'B': [0.5, 0.7]}, index=['d1', 'd2'])
        with self.assertRaisesMessage(IncompleteGridError, "('d2', 'A')"):
            friedman_nemenyi(table)

    def test_needs_two_datasets(self):
        with self.assertRaisesMessage(EvaluationError, "at least 2 datasets required"):
            friedman_nemenyi(pd.DataFrame({'A': [0.9], 'B': [0.5]}))

    def test_nemenyi_q(self):
        self.assertEqual(nemenyi_q(0.05, 4), 2.569)
        self.assertAlmostEqual(nemenyi_q(0.05, 12), 3.268, places=2)


class RecordTableTests(SimpleTestCase):
    def test_method_names_survive_the_csv(self):
        records = [
            EvalRecord('d1', 'kNN', None, 10, 0.8),
            EvalRecord('d1', 'DAO', 'TwoNN', 12, 0.9, lid_k=2, dispersion_R=0.3, morans_I=0.1, morans_k=7),
        ]
        self.assertEqual([r.method for r in records], ['kNN', 'DAO_TwoNN'])
        with tempfile.TemporaryDirectory() as tmp:
            frame = read_records_csv(write_records_csv(records, Path(tmp) / 'records.csv'))
        self.assertEqual(list(frame['method']), ['kNN', 'DAO_TwoNN'])
        self.assertEqual(list(frame['best_k']), [10, 12])

    def test_rejects_foreign_tables(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'other.csv'
            path.write_text("a,b\n1,2\n")
            with self.assertRaisesMessage(EvaluationError, "not an EvalRecord table"):
                read_records_csv(path)
