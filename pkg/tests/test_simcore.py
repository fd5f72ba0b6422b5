from __future__ import annotations

import json

import numpy as np
import pytest

import oracles
from conftest import gaussian_view, make_gaussian_case, store_backed_view
from fca.embedstore import view_from_arrays
from fca.errors import EmptyClass, EmptyPairSet, SameClass, SingletonClass
from fca.simcore import (
    SimilarityConfig,
    dataset_inter,
    dataset_intra,
    full_report,
    inter_class_similarity,
    intra_class_similarity,
    nearest_class,
    pair_counts,
    pairwise_sim,
    report_csv_text,
    silhouette_instance,
    simss_class,
    simss_dataset,
    simss_instance,
    subsample_view,
    write_report_json,
)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])


def simple_view(vectors, labels):
    ids = [f"i{k}" for k in range(len(labels))]
    return view_from_arrays(ids, labels, np.asarray(vectors, dtype=float))


class TestPairwiseSim:
    def test_identical(self):
        view = simple_view([E1, E1], [0, 1])
        assert pairwise_sim(view, ["i0"], ["i1"]) == 1.0

    def test_orthogonal(self):
        view = simple_view([E1, E2], [0, 1])
        assert pairwise_sim(view, ["i0"], ["i1"]) == 0.5

    def test_antipodal(self):
        view = simple_view([E1, -E1], [0, 1])
        assert pairwise_sim(view, ["i0"], ["i1"]) == 0.0

    def test_exactly_symmetric(self):
        view, _, class_rows = gaussian_view(11)
        ids = list(view.ids)
        a, b = ids[:4], ids[4:9]
        assert pairwise_sim(view, a, b) == pairwise_sim(view, b, a)

    def test_within_set_uses_distinct_pairs(self):
        view = simple_view([E1, E1, E2], [0, 0, 0])
        value = pairwise_sim(view, ["i0", "i1", "i2"], ["i0", "i1", "i2"])
        assert value == pytest.approx((1.0 + 0.5 + 0.5) / 3)

    def test_empty_set(self):
        view = simple_view([E1, E2], [0, 1])
        with pytest.raises(EmptyPairSet):
            pairwise_sim(view, [], ["i0"])
        with pytest.raises(EmptyPairSet):
            pairwise_sim(view, ["i0"], ["i0"])


class TestClassSimilarities:
    def test_identical_pair(self):
        view = simple_view([E1, E1], [0, 0, ][:2])
        with pytest.raises(EmptyPairSet):
            # one class only: dataset ops refuse, but the class op works
            dataset_intra(view)
        assert intra_class_similarity(view, 0) == 1.0

    def test_orthonormal_pair(self):
        view = simple_view([E1, E2], [0, 0])
        assert intra_class_similarity(view, 0) == 0.5

    def test_singleton_raises(self):
        view = simple_view([E1, E2, E2], [0, 1, 1])
        with pytest.raises(SingletonClass):
            intra_class_similarity(view, 0)

    def test_inter_same_vector(self):
        view = simple_view([E1, E1], [0, 1])
        assert inter_class_similarity(view, 0, 1) == 1.0

    def test_inter_errors(self):
        view = simple_view([E1, E2], [0, 1])
        with pytest.raises(SameClass):
            inter_class_similarity(view, 0, 0)
        with pytest.raises(EmptyClass):
            inter_class_similarity(view, 0, 5)

    def test_inter_symmetric(self):
        view, _, _ = gaussian_view(12, n_classes=3)
        assert inter_class_similarity(view, 0, 2) == inter_class_similarity(view, 2, 0)

    def test_dataset_levels_trivial(self):
        view = simple_view([E1, E1, -E1, -E1], [0, 0, 1, 1])
        assert dataset_intra(view) == 1.0
        assert dataset_inter(view) == 0.0

    def test_all_identical(self):
        view = simple_view([E1] * 6, [0, 0, 1, 1, 2, 2])
        assert dataset_intra(view) == 1.0
        assert dataset_inter(view) == 1.0


class TestNearestClass:
    def test_argmax(self):
        view = simple_view([E1, E1, -E1], [0, 1, 2])
        assert nearest_class(view, "i0") == (1, 1.0)

    def test_tie_smaller_class_id(self):
        view = simple_view([E1, E2, E2], [5, 1, 3])
        class_id, value = nearest_class(view, "i0")
        assert class_id == 1
        assert value == 0.5

    def test_matches_oracle(self):
        ids, labels, raw, class_rows = make_gaussian_case(21, n_classes=3)
        view = view_from_arrays(ids, labels, raw)
        x = oracles.normalize_rows(raw)
        for row, image_id in enumerate(ids):
            expected = oracles.instance_nearest(x, row, labels[row], class_rows)
            got = nearest_class(view, image_id)
            assert got[0] == expected[0]
            assert got[1] == pytest.approx(expected[1], abs=1e-12)


class TestSimssInstance:
    def test_perfect_separation(self):
        view = simple_view([E1, E1, -E1, -E1], [0, 0, 1, 1])
        assert simss_instance(view, "i0") == 1.0

    def test_indifference(self):
        view = simple_view([E1, E1, E1, E1], [0, 0, 1, 1])
        assert simss_instance(view, "i0") == 0.0

    def test_orthogonal_other(self):
        view = simple_view([E1, E1, E2, E2], [0, 0, 1, 1])
        assert simss_instance(view, "i0") == pytest.approx(0.5)

    def test_singleton_is_zero(self):
        view = simple_view([E1, E2, E2], [0, 1, 1])
        assert simss_instance(view, "i0") == 0.0

    def test_degenerate_denominator_is_zero(self):
        # i0's same-class partner and the whole other class sit at cosine -1,
        # so alpha = beta' = 0 and the guarded ratio returns 0.
        view = simple_view([E1, -E1, -E1, -E1], [0, 0, 1, 1])
        assert simss_instance(view, "i0") == 0.0


class TestSilhouette:
    def test_tight_far_class(self):
        view = simple_view([E1, E1, -E1, -E1], [0, 0, 1, 1])
        assert silhouette_instance(view, "i0") == 1.0

    def test_equal_a_b(self):
        view = simple_view([E1, E1, E1, E1], [0, 0, 1, 1])
        assert silhouette_instance(view, "i0") == 0.0

    def test_sklearn_cross_check(self):
        from sklearn.metrics import silhouette_samples

        ids, labels, raw, class_rows = make_gaussian_case(31, n_classes=4, dim=16)
        view = view_from_arrays(ids, labels, raw)
        x = oracles.normalize_rows(raw)
        sims = (x @ x.T + 1.0) / 2.0
        d = 1.0 - sims
        np.fill_diagonal(d, 0.0)
        expected = silhouette_samples(d, np.asarray(labels), metric="precomputed")
        for row, image_id in enumerate(ids):
            assert silhouette_instance(view, image_id) == pytest.approx(
                expected[row], abs=1e-9
            )


class TestSimssAggregates:
    def test_perfectly_clustered(self):
        view = simple_view([E1, E1, -E1, -E1], [0, 0, 1, 1])
        assert simss_dataset(view) == 1.0

    def test_shuffled_labels_near_zero(self):
        for trial in range(20):
            rng = np.random.default_rng(1000 + trial)
            n, dim = 240, 8
            x = rng.normal(size=(n, dim))
            labels = rng.permutation(np.repeat(np.arange(3), n // 3))
            view = view_from_arrays([f"i{k}" for k in range(n)], labels, x)
            assert abs(simss_dataset(view)) < 0.05

    def test_matches_oracle(self):
        ids, labels, raw, class_rows = make_gaussian_case(41, n_classes=3, dim=8)
        view = view_from_arrays(ids, labels, raw)
        x = oracles.normalize_rows(raw)
        assert simss_dataset(view) == pytest.approx(
            oracles.simss_dataset(x, class_rows), abs=1e-9
        )
        for class_id in class_rows:
            assert simss_class(view, class_id) == pytest.approx(
                oracles.simss_class(x, class_id, class_rows), abs=1e-9
            )


class TestFullReport:
    def test_shape(self):
        view, _, _ = gaussian_view(3, n_classes=2, min_size=3, max_size=3)
        report = full_report(view)
        assert len(report.per_instance) == 6
        assert len(report.per_class) == 2
        assert report.dataset.simss == pytest.approx(
            np.mean([c.simss for c in report.per_class.values()]), abs=1e-12
        )

    def test_matches_individual_ops(self):
        view, _, _ = gaussian_view(7, n_classes=4)
        report = full_report(view)
        assert report.dataset.s_alpha == pytest.approx(dataset_intra(view), abs=1e-9)
        assert report.dataset.s_beta == pytest.approx(dataset_inter(view), abs=1e-9)
        assert report.dataset.simss == pytest.approx(simss_dataset(view), abs=1e-9)
        for image_id in list(view.ids)[::5]:
            row = report.per_instance[image_id]
            assert row.simss == pytest.approx(simss_instance(view, image_id), abs=1e-9)
            assert row.ss == pytest.approx(silhouette_instance(view, image_id), abs=1e-9)
            assert row.nearest_class_id == nearest_class(view, image_id)[0]

    def test_through_store_matches_in_memory(self, tmp_path):
        ids, labels, raw, _ = make_gaussian_case(13, n_classes=3, dim=12)
        stored = store_backed_view(tmp_path, ids, labels, raw)
        report = full_report(stored)
        # float32 quantization in the store keeps values within ~1e-6
        in_memory = full_report(view_from_arrays(ids, labels, raw))
        assert report.dataset.simss == pytest.approx(in_memory.dataset.simss, abs=1e-5)

    def test_singleton_class_convention(self):
        view = simple_view([E1, E1, E2], [0, 0, 7])
        report = full_report(view)
        assert report.singleton_classes == (7,)
        assert report.per_instance["i2"].simss == 0.0
        assert report.per_instance["i2"].ss == 0.0
        assert report.per_class[7].s_alpha is None
        # dataset intra averages only multi-instance classes
        assert report.dataset.s_alpha == pytest.approx(1.0)

    def test_subsample_noop_is_identical(self):
        view, _, _ = gaussian_view(17, n_classes=3, max_size=8)
        base = full_report(view)
        capped = full_report(view, SimilarityConfig(max_instances_per_class=100))
        assert base.per_instance == capped.per_instance
        assert base.dataset == capped.dataset
        assert capped.subsampled == {}

    def test_subsample_applied_and_recorded(self):
        view, _, _ = gaussian_view(19, n_classes=3, min_size=10, max_size=14)
        config = SimilarityConfig(max_instances_per_class=5, subsample_seed=2)
        report = full_report(view, config)
        assert len(report.per_instance) == 15
        assert set(report.subsampled) == {0, 1, 2}
        again = full_report(view, config)
        assert report.per_instance == again.per_instance

    def test_threads_bitwise_invariant(self):
        view, _, _ = gaussian_view(23, n_classes=4, min_size=10, max_size=20, dim=32)
        reports = [full_report(view, threads=t) for t in (1, 2, 5)]
        assert reports[0].per_instance == reports[1].per_instance
        assert reports[0].per_instance == reports[2].per_instance
        assert reports[0].dataset == reports[1].dataset == reports[2].dataset

    def test_block_size_independence(self):
        view, _, _ = gaussian_view(29, n_classes=3, min_size=8, max_size=16, dim=16)
        base = full_report(view, block_size=256)
        for block in (1, 3, 7, 64, 10_000):
            other = full_report(view, block_size=block)
            assert other.dataset.simss == pytest.approx(base.dataset.simss, abs=1e-12)
            assert other.dataset.s_beta == pytest.approx(base.dataset.s_beta, abs=1e-12)

    def test_requires_two_classes(self):
        view = simple_view([E1, E2], [0, 0])
        with pytest.raises(EmptyPairSet):
            full_report(view)


class TestInvariantProperties:
    def test_permutation_invariance(self):
        ids, labels, raw, _ = make_gaussian_case(37, n_classes=4, dim=8)
        base = full_report(view_from_arrays(ids, labels, raw)).dataset
        rng = np.random.default_rng(0)
        order = rng.permutation(len(ids))
        shuffled = view_from_arrays(
            [ids[i] for i in order], [labels[i] for i in order], raw[order]
        )
        relabeled = view_from_arrays(ids, [(l * 7 + 3) % 1000 for l in labels], raw)
        for other in (full_report(shuffled).dataset, full_report(relabeled).dataset):
            assert other.simss == pytest.approx(base.simss, abs=1e-12)
            assert other.s_alpha == pytest.approx(base.s_alpha, abs=1e-12)
            assert other.s_beta == pytest.approx(base.s_beta, abs=1e-12)

    def test_rotation_invariance(self):
        ids, labels, raw, _ = make_gaussian_case(43, n_classes=3, dim=24)
        base = full_report(view_from_arrays(ids, labels, raw)).dataset
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.normal(size=(24, 24)))
        rotated = full_report(view_from_arrays(ids, labels, raw @ q.T)).dataset
        assert rotated.simss == pytest.approx(base.simss, abs=1e-9)
        assert rotated.s_alpha == pytest.approx(base.s_alpha, abs=1e-9)
        assert rotated.s_beta == pytest.approx(base.s_beta, abs=1e-9)
        assert rotated.ss == pytest.approx(base.ss, abs=1e-9)

    def test_monotone_in_separation(self):
        # Two fixed clouds; rotate the second away in 10 steps. Intra-class
        # geometry is exactly preserved, every cross similarity falls, so the
        # dataset score must not decrease.
        rng = np.random.default_rng(99)
        dim = 8
        base_cloud = np.concatenate(
            [np.ones((12, 1)), 0.05 * rng.normal(size=(12, dim - 1))], axis=1
        )
        values = []
        for step in range(10):
            theta = step * (0.9 * np.pi) / 9
            rotation = np.eye(dim)
            rotation[0, 0] = np.cos(theta)
            rotation[0, 1] = -np.sin(theta)
            rotation[1, 0] = np.sin(theta)
            rotation[1, 1] = np.cos(theta)
            cloud_b = base_cloud @ rotation.T
            x = np.concatenate([base_cloud, cloud_b])
            ids = [f"i{k:02d}" for k in range(24)]
            view = view_from_arrays(ids, [0] * 12 + [1] * 12, x)
            values.append(simss_dataset(view))
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert values[-1] > values[0]

    def test_score_ranges(self):
        for seed in range(5):
            view, _, _ = gaussian_view(100 + seed)
            report = full_report(view)
            for row in report.per_instance.values():
                assert -1.0 <= row.simss <= 1.0
                assert -1.0 <= row.ss <= 1.0
                assert 0.0 <= row.s_beta_prime <= 1.0
                if row.s_alpha is not None:
                    assert 0.0 <= row.s_alpha <= 1.0
            assert 0.0 <= report.dataset.s_beta <= 1.0


class TestPairCounts:
    def test_counts(self):
        view = simple_view([E1, E1, E1, E2, E2], [0, 0, 0, 1, 1])
        counts = pair_counts(view)
        assert counts.intra == 3 + 1
        assert counts.dataset_class_pairs == 1
        assert counts.inter == 6


class TestReportSerialization:
    def test_json_deterministic(self, tmp_path):
        view, _, _ = gaussian_view(53, n_classes=2)
        report = full_report(view)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_report_json(report, a)
        write_report_json(report, b)
        assert a.read_bytes() == b.read_bytes()
        payload = json.loads(a.read_text())
        assert payload["schema_version"] == 1
        assert payload["num_classes"] == 2
        assert set(payload["dataset"]) == {"s_alpha", "s_beta", "s_beta_prime", "simss", "ss"}

    def test_csv_sections(self):
        view = simple_view([E1, E1, E2, E2], [0, 0, 1, 1])
        report = full_report(view)
        lines = report_csv_text(report).strip().splitlines()
        assert lines[0].startswith("level,image_id,class_id,")
        levels = [line.split(",")[0] for line in lines[1:]]
        assert levels == ["dataset", "class", "class", "instance", "instance", "instance", "instance"]
