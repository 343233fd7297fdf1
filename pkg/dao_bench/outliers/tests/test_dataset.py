import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from outliers.dataset import (
    Dataset, feature_distinctness, load_csv, read_sidecar, warn_if_indistinct, write_csv,
)
from outliers.exceptions import DatasetError


class DatasetTests(SimpleTestCase):
    def test_non_finite_value_is_named(self):
        with self.assertRaisesMessage(DatasetError, "non-finite value at row 1, column 0"):
            Dataset([[0.0, 1.0], [np.nan, 2.0]])

    def test_duplicates_rejected_by_constructor(self):
        with self.assertRaisesMessage(DatasetError, "duplicate points"):
            Dataset([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])

    def test_from_points_keeps_first_occurrence(self):
        dataset = Dataset.from_points([[0, 0], [1, 1], [0, 0], [2, 2]], [1, 0, 0, 0])
        self.assertEqual(dataset.n, 3)
        self.assertEqual(dataset.duplicates_dropped, 1)
        assert_array_equal(dataset.points, [[0, 0], [1, 1], [2, 2]])
        assert_array_equal(dataset.labels, [1, 0, 0])

    def test_negative_zero_is_a_duplicate_of_zero(self):
        dataset = Dataset.from_points([[-0.0], [0.0], [1.0]])
        self.assertEqual(dataset.n, 2)
        self.assertEqual(dataset.duplicates_dropped, 1)

    def test_labels_need_an_inlier(self):
        with self.assertRaisesMessage(DatasetError, "has no inliers"):
            Dataset([[0.0], [1.0]], [1, 1])

    def test_labels_must_be_binary(self):
        with self.assertRaises(DatasetError):
            Dataset([[0.0], [1.0]], [0, 2])

    def test_points_are_read_only(self):
        dataset = Dataset([[0.0], [1.0]])
        with self.assertRaises(ValueError):
            dataset.points[0, 0] = 5.0

    def test_fingerprint_depends_on_labels(self):
        unlabeled = Dataset([[0.0], [1.0]])
        labeled = Dataset([[0.0], [1.0]], [0, 1])
        self.assertNotEqual(unlabeled.fingerprint(), labeled.fingerprint())
        self.assertEqual(labeled.fingerprint(), Dataset([[0.0], [1.0]], [0, 1]).fingerprint())


class LoadCsvTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def write(self, text, name='data.csv'):
        path = self.dir / name
        path.write_text(text)
        return path

    def test_header_and_named_label_column(self):
        path = self.write("a,b,label\n0,0,0\n1,1,1\n0,0,0\n2,2,0\n")
        dataset = load_csv(path, label_column='label')
        self.assertEqual((dataset.n, dataset.d), (3, 2))
        self.assertEqual(dataset.duplicates_dropped, 1)
        assert_array_equal(dataset.labels, [0, 1, 0])
        self.assertEqual(dataset.name, 'data')

    def test_headerless_positional_label_column(self):
        dataset = load_csv(self.write("0.5,1,0\n1.5,2,1\n"), label_column=2)
        assert_array_equal(dataset.points, [[0.5, 1.0], [1.5, 2.0]])
        assert_array_equal(dataset.labels, [0, 1])

    def test_without_labels(self):
        dataset = load_csv(self.write("0,1\n1,2\n2,3\n"))
        self.assertFalse(dataset.has_labels)

    def test_non_numeric_cell(self):
        with self.assertRaisesMessage(DatasetError, "non-numeric value 'x' at row 1, column 1"):
            load_csv(self.write("0,0\n1,x\n"))

    def test_missing_file(self):
        with self.assertRaisesMessage(DatasetError, "file not found"):
            load_csv(self.dir / 'absent.csv')

    def test_absent_label_column(self):
        with self.assertRaisesMessage(DatasetError, "is absent"):
            load_csv(self.write("a,b\n0,0\n1,1\n"), label_column='label')

    def test_unknown_label_token(self):
        with self.assertRaisesMessage(DatasetError, "unknown label token '2' at row 0"):
            load_csv(self.write("0,0,2\n1,1,0\n"), label_column=2)

    def test_custom_label_tokens(self):
        path = self.write("x,y,class\n0,0,normal\n1,1,anomaly\n")
        dataset = load_csv(path, label_column='class', outlier_tokens=['anomaly'], inlier_tokens=['normal'])
        assert_array_equal(dataset.labels, [0, 1])

    def test_written_dataset_reads_back_with_sidecar(self):
        rng = np.random.default_rng(5)
        original = Dataset(rng.normal(size=(20, 3)), np.arange(20) % 5 == 0, name='sample',
                           seed=5, metadata={'dim_c2': 8})
        path = write_csv(original, self.dir / 'sample.csv')
        self.assertEqual(read_sidecar(path)['label_column'], 'label')
        loaded = load_csv(path)
        assert_array_equal(loaded.points, original.points)
        assert_array_equal(loaded.labels, original.labels)
        self.assertEqual((loaded.name, loaded.seed, loaded.metadata), ('sample', 5, {'dim_c2': 8}))


class DistinctnessTests(SimpleTestCase):
    def test_share_of_distinct_values(self):
        dataset = Dataset([[0, 0], [0, 1], [0, 2], [0, 3], [1, 3]])
        np.testing.assert_allclose(feature_distinctness(dataset), [0.4, 0.8])

    def test_warning_when_no_column_is_distinct_enough(self):
        points = [[i % 2, i % 3] for i in range(6)]
        dataset = Dataset(points)
        with self.assertLogs('outliers.dataset', 'WARNING') as logs:
            self.assertTrue(warn_if_indistinct(dataset, threshold=0.9))
        self.assertIn('distinct values', logs.output[0])
        self.assertFalse(warn_if_indistinct(dataset, threshold=0.5))
