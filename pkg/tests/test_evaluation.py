import numpy as np
import pytest

from crpshape.coding import triplet_csv
from crpshape.errors import ClassTooSmall
from crpshape.evaluation import (
    LabeledDataset,
    PipelineConfig,
    SplitProtocol,
    evaluate,
    mean_and_population_std,
    run_pipeline,
    run_pipeline_detailed,
    split_dataset,
    sweep_dimension,
    truncate_renormalize,
)
from crpshape.projection import projection_to_json
from crpshape.svm import model_to_json


def synthetic_dataset(rng, per_class=10, m=8, centers=3, spread=0.02):
    """Unit-norm descriptor clusters, one center per class."""
    columns = []
    labels = []
    for k in range(centers):
        center = np.abs(rng.standard_normal(m)) + 0.2 + k
        for _ in range(per_class):
            col = center + spread * rng.standard_normal(m)
            columns.append(np.abs(col))
            labels.append(f"class{k}")
    x = np.stack(columns, axis=1)
    x /= np.linalg.norm(x, axis=0)
    names = tuple(f"shape{i}" for i in range(x.shape[1]))
    return LabeledDataset(descriptors=x, labels=tuple(labels), names=names, descriptor_kind="gps")


@pytest.fixture
def small_dataset():
    return synthetic_dataset(np.random.default_rng(0))


class TestSplit:
    def test_half_split_on_twenty_per_class(self):
        ds = synthetic_dataset(np.random.default_rng(1), per_class=20, centers=2)
        proto = SplitProtocol(mode="fraction", train_fraction=0.5, repetitions=1, seed=3)
        train, test = split_dataset(ds, proto, 0)
        for k in range(2):
            members = [i for i, lab in enumerate(ds.labels) if lab == f"class{k}"]
            assert sum(1 for i in members if i in set(train)) == 10
            assert sum(1 for i in members if i in set(test)) == 10

    def test_split_deterministic(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=5, seed=9)
        a = split_dataset(small_dataset, proto, 3)
        b = split_dataset(small_dataset, proto, 3)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_runs_differ(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=5, seed=9)
        a = split_dataset(small_dataset, proto, 0)
        b = split_dataset(small_dataset, proto, 1)
        assert not np.array_equal(a[0], b[0])

    def test_disjoint_and_covering(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=0)
        train, test = split_dataset(small_dataset, proto, 0)
        combined = np.sort(np.concatenate([train, test]))
        assert np.array_equal(combined, np.arange(small_dataset.n))

    def test_kfold_covers_each_index_once(self, small_dataset):
        proto = SplitProtocol(mode="kfold", folds=5, repetitions=5, seed=2, train_fraction=None)
        seen = []
        for run in range(5):
            train, test = split_dataset(small_dataset, proto, run)
            seen.extend(test.tolist())
            assert len(np.intersect1d(train, test)) == 0
        assert sorted(seen) == list(range(small_dataset.n))

    def test_rounding_is_half_up(self):
        ds = synthetic_dataset(np.random.default_rng(4), per_class=5, centers=2)
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=0)
        train, _ = split_dataset(ds, proto, 0)
        # 0.7 * 5 = 3.5 -> 4 per class
        assert len(train) == 8

    def test_class_too_small_for_fraction(self):
        ds = synthetic_dataset(np.random.default_rng(5), per_class=2, centers=2)
        proto = SplitProtocol(train_fraction=0.9, repetitions=1, seed=0)
        with pytest.raises(ClassTooSmall):
            split_dataset(ds, proto, 0)

    def test_class_too_small_for_kfold(self):
        ds = synthetic_dataset(np.random.default_rng(6), per_class=3, centers=2)
        proto = SplitProtocol(mode="kfold", folds=5, repetitions=5, seed=0, train_fraction=None)
        with pytest.raises(ClassTooSmall):
            split_dataset(ds, proto, 0)

    def test_run_out_of_range(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=2, seed=0)
        with pytest.raises(ValueError):
            split_dataset(small_dataset, proto, 2)


class TestRunPipeline:
    def test_memorization(self, small_dataset):
        idx = np.arange(small_dataset.n)
        for variant in ("crp", "baseline"):
            cfg = PipelineConfig(variant=variant, coding_method="l2", d=4, baseline_dim=4)
            accuracy, confusion = run_pipeline(small_dataset, idx, idx, cfg)
            assert accuracy == 1.0
            assert confusion.sum() == small_dataset.n
            assert np.trace(confusion) == small_dataset.n

    def test_both_methods_separate_clusters(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=1)
        train, test = split_dataset(small_dataset, proto, 0)
        for method in ("l2", "nnls"):
            cfg = PipelineConfig(variant="crp", coding_method=method, d=3)
            accuracy, confusion = run_pipeline(small_dataset, train, test, cfg)
            assert accuracy == 1.0
            assert confusion.sum() == len(test)

    def test_fit_ignores_test_indices(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=7)
        train, test = split_dataset(small_dataset, proto, 0)
        cfg = PipelineConfig(variant="crp", coding_method="nnls", d=3)
        _, _, full = run_pipeline_detailed(small_dataset, train, test, cfg)
        _, _, pruned = run_pipeline_detailed(small_dataset, train, test[:-1], cfg)
        assert triplet_csv(full.coding) == triplet_csv(pruned.coding)
        assert projection_to_json(full.projection) == projection_to_json(pruned.projection)
        assert model_to_json(full.model) == model_to_json(pruned.model)

    def test_truncate_renormalize(self):
        x = np.array([[3.0, 0.0], [4.0, 1.0], [12.0, 0.0]])
        out = truncate_renormalize(x, 2)
        assert np.allclose(np.linalg.norm(out, axis=0), 1.0)
        assert out.shape == (2, 2)


class TestEvaluate:
    def test_single_repetition_stats(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=0)
        cfg = PipelineConfig(variant="baseline", coding_method="l2", baseline_dim=4)
        report = evaluate(small_dataset, proto, cfg)
        assert report.mean_accuracy == report.per_run_accuracies[0]
        assert report.std_accuracy == 0.0

    def test_accuracy_ratio_and_two_point_stats(self):
        assert 57 / 60 == pytest.approx(0.95)
        mean, std = mean_and_population_std([0.9, 1.0])
        assert mean == pytest.approx(0.95)
        assert std == pytest.approx(0.05)

    def test_confusion_row_sums(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=4, seed=2)
        cfg = PipelineConfig(variant="crp", coding_method="l2", d=3)
        report = evaluate(small_dataset, proto, cfg)
        # 10 per class, 70/30 stratified: 3 test members per class per run
        assert report.confusion.sum(axis=1).tolist() == [12, 12, 12]
        pooled = np.trace(report.confusion) / report.confusion.sum()
        assert pooled == pytest.approx(report.mean_accuracy)

    def test_bit_identical_reruns(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=3, seed=5)
        cfg = PipelineConfig(variant="crp", coding_method="nnls", d=3)
        a = evaluate(small_dataset, proto, cfg)
        b = evaluate(small_dataset, proto, cfg)
        assert a.per_run_accuracies == b.per_run_accuracies
        assert a.mean_accuracy == b.mean_accuracy
        assert np.array_equal(a.confusion, b.confusion)

    def test_report_echoes_config(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=0)
        cfg = PipelineConfig(variant="crp", coding_method="nnls", d=2)
        report = evaluate(small_dataset, proto, cfg)
        assert report.config["codingMethod"] == "nnls"
        assert report.config["descriptorKind"] == "gps"
        assert report.config["protocol"]["trainFraction"] == 0.7

    def test_overlapping_classes_confusion_bookkeeping(self):
        # heavy overlap forces misclassifications; the pooled confusion must
        # still reconcile with the per-run accuracies
        ds = synthetic_dataset(np.random.default_rng(8), per_class=12, spread=1.5)
        proto = SplitProtocol(train_fraction=0.7, repetitions=5, seed=4)
        cfg = PipelineConfig(variant="baseline", coding_method="l2", baseline_dim=8)
        report = evaluate(ds, proto, cfg)
        assert report.mean_accuracy < 1.0
        off_diagonal = report.confusion.sum() - np.trace(report.confusion)
        assert off_diagonal > 0
        assert 0.0 <= min(report.per_run_accuracies)
        assert max(report.per_run_accuracies) <= 1.0
        pooled = np.trace(report.confusion) / report.confusion.sum()
        assert pooled == pytest.approx(report.mean_accuracy)

    def test_kfold_protocol_end_to_end(self, small_dataset):
        proto = SplitProtocol(mode="kfold", folds=5, repetitions=5, seed=6,
                              train_fraction=None)
        cfg = PipelineConfig(variant="crp", coding_method="l2", d=3)
        report = evaluate(small_dataset, proto, cfg)
        # five folds of a 30-sample set: every sample tested exactly once
        assert report.confusion.sum() == small_dataset.n
        assert len(report.per_run_accuracies) == 5


class TestSweep:
    def test_matches_evaluate_at_same_dimension(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=2, seed=11)
        cfg = PipelineConfig(variant="crp", coding_method="l2", d=3)
        rows = sweep_dimension(small_dataset, proto, cfg, [3])
        report = evaluate(small_dataset, proto, cfg)
        assert rows[0][0] == 3
        assert rows[0][1] == report.mean_accuracy
        assert rows[0][2] == report.std_accuracy

    def test_max_dominates_single_dimension(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=2, seed=12)
        cfg = PipelineConfig(variant="crp", coding_method="l2", d=3)
        rows = sweep_dimension(small_dataset, proto, cfg, [1, 2, 3, 4])
        means = [row[1] for row in rows]
        assert max(means) >= means[0]

    def test_row_count(self, small_dataset):
        proto = SplitProtocol(train_fraction=0.7, repetitions=1, seed=13)
        cfg = PipelineConfig(variant="crp", coding_method="l2", d=2)
        rows = sweep_dimension(small_dataset, proto, cfg, [1, 3, 5])
        assert [row[0] for row in rows] == [1, 3, 5]


def test_dataset_requires_two_per_class():
    rng = np.random.default_rng(7)
    x = np.abs(rng.standard_normal((4, 3))) + 0.5
    x /= np.linalg.norm(x, axis=0)
    with pytest.raises(ClassTooSmall):
        LabeledDataset(
            descriptors=x, labels=("a", "a", "b"), names=("x", "y", "z"), descriptor_kind="gps"
        )
