import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from scipy.spatial.distance import pdist
from scipy.stats import chi2

from benchmark.exceptions import SynthesisError
from benchmark.synthgen import (
    DEFAULT_DIMS_C2, SynthSpec, _embed, benchmark_suite, chi2_quantile, generate, mahalanobis_sq, parse_dims,
    realize,
)


class Chi2QuantileTests(SimpleTestCase):
    def test_known_value(self):
        self.assertAlmostEqual(chi2_quantile(2, 0.95), 5.991464547107979, places=8)

    def test_matches_scipy(self):
        for m in (1, 2, 8, 17, 32):
            for p in (0.5, 0.95, 0.99999):
                self.assertAlmostEqual(chi2_quantile(m, p), chi2.ppf(p, m), places=7)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(SynthesisError):
            chi2_quantile(0, 0.5)
        with self.assertRaises(SynthesisError):
            chi2_quantile(2, 1.0)


class GenerateTests(SimpleTestCase):
    def test_same_seed_same_dataset(self):
        first, report = generate(SynthSpec(cluster_size=100, seed=3))
        second, _ = generate(SynthSpec(cluster_size=100, seed=3))
        assert_array_equal(first.points, second.points)
        assert_array_equal(first.labels, second.labels)
        self.assertEqual(first.name, 'synth_c2d08_s3')
        self.assertEqual(report.seed, 3)

    def test_different_seeds_differ(self):
        first, _ = generate(SynthSpec(cluster_size=50, seed=1))
        second, _ = generate(SynthSpec(cluster_size=50, seed=2))
        self.assertFalse(np.array_equal(first.points, second.points))

    def test_shape_labels_and_metadata(self):
        dataset, report = generate(SynthSpec(cluster_size=800, dim_c2=16, seed=0))
        self.assertEqual((dataset.n, dataset.d), (1600, 32))
        self.assertEqual(dataset.outlier_count, report.outliers_c1 + report.outliers_c2)
        for count in (report.outliers_c1, report.outliers_c2):
            self.assertTrue(15 <= count <= 70)
        self.assertEqual(dataset.metadata['dim_c1'], 8)
        self.assertEqual(dataset.metadata['dim_c2'], 16)
        self.assertEqual(len(dataset.metadata['subspace_c2']), 16)

    def test_realization_is_rotated_and_separated(self):
        spec = SynthSpec(cluster_size=200, dim_c2=4, seed=5)
        realization = realize(spec)
        rotation = realization.rotation
        assert_allclose(rotation.T @ rotation, np.eye(32), atol=1e-12)
        self.assertEqual([len(s) for s in realization.subspaces], [8, 4])
        self.assertEqual([z.shape for z in realization.latent], [(200, 8), (200, 4)])

        unrotated = realization.points @ rotation.T
        inside = [
            mahalanobis_sq(unrotated, shift, subspace) < chi2_quantile(len(subspace), spec.reject_quantile)
            for shift, subspace in zip(realization.translations, realization.subspaces)
        ]
        self.assertFalse((inside[0] & inside[1]).any())

    def test_labels_follow_own_cluster_distance(self):
        realization = realize(SynthSpec(cluster_size=300, seed=8))
        latent = realization.latent[0]
        expected = (latent ** 2).sum(axis=1) > chi2_quantile(8, 0.95)
        assert_array_equal(realization.labels[:300], expected)

    def test_rotation_preserves_pairwise_distances(self):
        realization = realize(SynthSpec(cluster_size=150, dim_c2=6, seed=4))
        unrotated = np.vstack([
            _embed(z, subspace, 32) + shift
            for z, subspace, shift in zip(realization.latent, realization.subspaces, realization.translations)
        ])
        assert_allclose(pdist(realization.points), pdist(unrotated), rtol=0, atol=1e-9)

    def test_labels_match_mahalanobis_in_the_rotated_frame(self):
        realization = realize(SynthSpec(cluster_size=400, dim_c2=12, seed=6))
        rotation = realization.rotation
        for c, (subspace, shift) in enumerate(zip(realization.subspaces, realization.translations)):
            projector = np.zeros((32, 32))
            projector[subspace, subspace] = 1.0
            precision = np.linalg.pinv(rotation.T @ projector @ rotation, rcond=1e-8, hermitian=True)
            offset = realization.points[c * 400:(c + 1) * 400] - shift @ rotation
            distance = np.einsum('ij,jk,ik->i', offset, precision, offset)
            expected = distance > chi2_quantile(len(subspace), 0.95)
            assert_array_equal(realization.labels[c * 400:(c + 1) * 400], expected)

    def test_cluster_means_sit_on_their_translations(self):
        for seed in range(3):
            realization = realize(SynthSpec(cluster_size=800, dim_c2=2 + 10 * seed, seed=seed))
            for c, shift in enumerate(realization.translations):
                mean = realization.points[c * 800:(c + 1) * 800].mean(axis=0)
                center = shift @ realization.rotation
                self.assertLess(np.abs(mean - center).max(), 5 / np.sqrt(800))

    def test_outlier_fraction_per_cluster(self):
        for dim_c2 in (2, 8, 32):
            for seed in range(3):
                _, report = generate(SynthSpec(dim_c2=dim_c2, seed=seed))
                for count in (report.outliers_c1, report.outliers_c2):
                    self.assertTrue(16 <= count <= 72, f"dim_c2={dim_c2}, seed={seed}: {count} outliers")

    def test_ambient_bound(self):
        with self.assertRaisesMessage(SynthesisError, "dim_c2=40 outside [2, 32]"):
            SynthSpec(dim_c2=40)
        with self.assertRaises(SynthesisError):
            SynthSpec(dim_c2=1)

    def test_retry_cap(self):
        spec = SynthSpec(cluster_size=20, translation_range=(0.0, 1e-9), retry_cap=3)
        with self.assertRaisesMessage(SynthesisError, "within 3 retries"):
            generate(spec)


class SuiteTests(SimpleTestCase):
    def test_seed_layout_and_metadata(self):
        datasets = benchmark_suite(2, [2, 8], seed0=7, cluster_size=50)
        self.assertEqual([d.seed for d in datasets], [7, 8, 9, 10])
        self.assertEqual([d.metadata['dim_c2'] for d in datasets], [2, 8, 2, 8])
        self.assertEqual(datasets[0].metadata['dims_c2_grid'], [2, 8])
        self.assertFalse(datasets[0].metadata['dims_c2_grid_is_default'])

    def test_grid_is_recorded_at_generation(self):
        alone, _ = generate(SynthSpec(cluster_size=40, seed=2))
        self.assertNotIn('dims_c2_grid', alone.metadata)
        member, _ = generate(SynthSpec(cluster_size=40, seed=2), dims_c2_grid=DEFAULT_DIMS_C2)
        self.assertEqual(member.metadata['dims_c2_grid'], list(DEFAULT_DIMS_C2))
        self.assertTrue(member.metadata['dims_c2_grid_is_default'])
        assert_array_equal(alone.points, member.points)

    def test_needs_a_repetition(self):
        with self.assertRaisesMessage(SynthesisError, "reps must be at least 1, got 0"):
            benchmark_suite(0, [2, 8])
        with self.assertRaisesMessage(SynthesisError, "at least one dim_c2 template"):
            benchmark_suite(1, [])

    def test_worker_count_does_not_change_the_suite(self):
        one = benchmark_suite(1, [2, 8, 16], seed0=3, threads=1, cluster_size=40)
        many = benchmark_suite(1, [2, 8, 16], seed0=3, threads=3, cluster_size=40)
        for a, b in zip(one, many):
            assert_array_equal(a.points, b.points)

    def test_default_grid(self):
        self.assertEqual(parse_dims('2..32:2'), list(DEFAULT_DIMS_C2))
        self.assertEqual(len(DEFAULT_DIMS_C2), 16)

    def test_parse_dims(self):
        self.assertEqual(parse_dims('8'), [8])
        self.assertEqual(parse_dims('2,8,16'), [2, 8, 16])
        with self.assertRaises(SynthesisError):
            parse_dims('two')
