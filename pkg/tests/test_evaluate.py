import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motionpin.evaluate import (
    EvalReport,
    LikertTable,
    digit_rate_for_pin_success,
    evaluate,
    load_likert_csv,
    pin_success_from_digit_rate,
    random_baselines,
    spearman,
    split_featureset,
    stratified_indices,
    survey_rank_correlation,
)
from motionpin.features import FeatureSet, N_FEATURES
from motionpin.mlp import MlpModel

from oracles import naive_spearman


def uniform_model(n_classes, input_dim=N_FEATURES):
    """All-zero weights: every class equally probable."""
    return MlpModel(w1=np.zeros((4, input_dim)), b1=np.zeros(4),
                    w2=np.zeros((n_classes, 4)), b2=np.zeros(n_classes),
                    norm_min=np.zeros(input_dim), norm_max=np.ones(input_dim),
                    label_space=tuple(f"c{i:02d}" for i in range(n_classes)))


def onehot_oracle_model(n_classes):
    """Probability ~1 on class j when feature j is the largest input."""
    w1 = np.zeros((n_classes, N_FEATURES))
    w1[:, :n_classes] = 8.0 * np.eye(n_classes)
    return MlpModel(w1=w1, b1=np.zeros(n_classes),
                    w2=30.0 * np.eye(n_classes), b2=np.zeros(n_classes),
                    norm_min=-np.ones(N_FEATURES), norm_max=np.ones(N_FEATURES),
                    label_space=tuple(f"c{i:02d}" for i in range(n_classes)))


def onehot_features(labels, n_classes, label_space):
    x = -np.ones((len(labels), N_FEATURES))
    for i, lab in enumerate(labels):
        x[i, label_space.index(lab)] = 1.0
    return FeatureSet(x=x, labels=tuple(labels), user_ids=("u",) * len(labels))


class TestSplit:
    def test_exact_proportions_100_samples(self):
        labels = [f"c{i}" for i in range(10) for _ in range(10)]
        tr, va, te = stratified_indices(labels, seed=0)
        assert (len(tr), len(va), len(te)) == (70, 15, 15)

    def test_same_seed_identical(self):
        labels = [i % 7 for i in range(126)]
        a = stratified_indices(labels, seed=5)
        b = stratified_indices(labels, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_different_seed_differs(self):
        labels = [i % 7 for i in range(126)]
        a = stratified_indices(labels, seed=5)
        b = stratified_indices(labels, seed=6)
        assert any(not np.array_equal(x, y) for x, y in zip(a, b))

    def test_partition_property(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 12, size=400).tolist()
        tr, va, te = stratified_indices(labels, seed=1)
        merged = np.concatenate([tr, va, te])
        assert len(merged) == 400
        assert len(set(merged.tolist())) == 400

    def test_2488_scale_within_one_per_class(self):
        # 50 classes, 2500 entries minus 12 dropped: the production shape
        rng = np.random.default_rng(0)
        labels = [f"p{i:02d}" for i in range(50) for _ in range(50)]
        for i in sorted(rng.choice(2500, size=12, replace=False), reverse=True):
            del labels[i]
        assert len(labels) == 2488
        tr, va, te = stratified_indices(labels, seed=9)
        assert len(tr) + len(va) + len(te) == 2488
        for split, ratio in ((tr, 0.70), (va, 0.15), (te, 0.15)):
            split_labels = [labels[i] for i in split]
            for lab in set(labels):
                n_class = labels.count(lab)
                got = split_labels.count(lab)
                assert abs(got - ratio * n_class) <= 1.0

    def test_small_class_rejected_by_name(self):
        labels = ["big"] * 10 + ["tiny"] * 2
        with pytest.raises(ValueError, match="tiny"):
            stratified_indices(labels, seed=0)

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValueError):
            stratified_indices([0, 0, 0, 1, 1, 1], ratios=(0.5, 0.2, 0.2), seed=0)

    def test_featureset_split_is_stratified(self):
        labels = tuple(f"c{i}" for i in range(4) for _ in range(10))
        fs = FeatureSet(x=np.zeros((40, N_FEATURES)), labels=labels, user_ids=("u",) * 40)
        tr, va, te = split_featureset(fs, seed=2)
        assert len(tr) + len(va) + len(te) == 40
        assert set(tr.labels) == set(labels)


class TestEvaluate:
    def test_oracle_model_scores_one(self):
        space = [f"c{i:02d}" for i in range(5)]
        labels = [space[i % 5] for i in range(40)]
        fs = onehot_features(labels, 5, space)
        report = evaluate(onehot_oracle_model(5), fs, ks=(1, 2, 3))
        assert report.top_k_rates == {1: 1.0, 2: 1.0, 3: 1.0}
        assert report.confusion.trace() == 40

    def test_uniform_model_matches_random_baseline(self):
        rng = np.random.default_rng(0)
        model = uniform_model(50)
        labels = [model.label_space[i] for i in rng.integers(0, 50, size=5000)]
        fs = FeatureSet(x=rng.normal(size=(5000, N_FEATURES)), labels=tuple(labels),
                        user_ids=("u",) * 5000)
        report = evaluate(model, fs, ks=(1, 3))
        for k, expected in ((1, 0.02), (3, 0.06)):
            sigma = np.sqrt(expected * (1 - expected) / 5000)
            assert abs(report.top_k_rates[k] - expected) <= 3 * sigma

    def test_rates_monotone_and_confusion_rows_sum(self, rng):
        from motionpin.mlp import init_model
        model = init_model(N_FEATURES, 6, tuple(range(8)), seed=3)
        labels = rng.integers(0, 8, size=120).tolist()
        fs = FeatureSet(x=rng.normal(size=(120, N_FEATURES)),
                        labels=tuple(labels), user_ids=("u",) * 120)
        report = evaluate(model, fs, ks=(1, 2, 3))
        assert report.top_k_rates[1] <= report.top_k_rates[2] <= report.top_k_rates[3]
        for j, lab in enumerate(model.label_space):
            assert report.confusion[j].sum() == labels.count(lab)

    def test_order_invariance(self, rng):
        from motionpin.mlp import init_model
        model = init_model(N_FEATURES, 6, tuple(range(4)), seed=3)
        labels = tuple(rng.integers(0, 4, size=60).tolist())
        fs = FeatureSet(x=rng.normal(size=(60, N_FEATURES)), labels=labels,
                        user_ids=("u",) * 60)
        base = evaluate(model, fs, ks=(1, 2))
        perm = rng.permutation(60)
        shuffled = evaluate(model, fs.subset(perm), ks=(1, 2))
        assert base.top_k_rates == shuffled.top_k_rates

    def test_unknown_label_rejected(self):
        model = uniform_model(3)
        fs = FeatureSet(x=np.zeros((2, N_FEATURES)), labels=("nope", "c00"),
                        user_ids=("u", "u"))
        with pytest.raises(ValueError, match="nope"):
            evaluate(model, fs)

    def test_report_serialization(self, tmp_path):
        report = EvalReport(top_k_rates={1: 0.5, 2: 0.75}, confusion=np.eye(2, dtype=int),
                            n_test=4, mode="pin50",
                            baselines=random_baselines("pin50"), label_space=("a", "b"))
        path = tmp_path / "report.json"
        report.save(path)
        text = report.to_text()
        assert "One" in text and "50.00%" in text
        assert path.read_text().startswith("{")


class TestSearchSpaceArithmetic:
    def test_reported_fourth_power(self):
        assert pin_success_from_digit_rate(0.9206) == pytest.approx(0.7182, abs=1e-4)

    def test_identity_at_one(self):
        assert pin_success_from_digit_rate(1.0) == 1.0

    def test_96_percent_digit_rate(self):
        assert pin_success_from_digit_rate(0.96) == pytest.approx(0.84934656, abs=1e-12)

    def test_inverse(self):
        assert digit_rate_for_pin_success(0.8546) == pytest.approx(0.8546 ** 0.25, abs=0)
        assert digit_rate_for_pin_success(pin_success_from_digit_rate(0.77)) == \
            pytest.approx(0.77, abs=1e-12)

    def test_domain_errors(self):
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError):
                pin_success_from_digit_rate(bad)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert pin_success_from_digit_rate(lo) <= pin_success_from_digit_rate(hi)


class TestRandomBaselines:
    def test_pin50(self):
        assert random_baselines("pin50") == {"random_1_attempt": 0.02,
                                             "random_3_attempts": 0.06}

    def test_full_space(self):
        assert random_baselines("pin_full_space") == {"random_81_attempts": 0.0081}

    def test_digit10_includes_pin_space(self):
        base = random_baselines("digit10")
        assert base["random_pin_81_attempts"] == 0.0081
        assert base["random_1_attempt"] == 0.1

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            random_baselines("banana")


class TestSpearman:
    def test_monotone_is_one(self):
        assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0, abs=1e-12)

    def test_reversed_is_minus_one(self):
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_naive_oracle_with_ties(self, rng):
        for _ in range(25):
            a = rng.integers(1, 6, size=25).tolist()
            b = rng.integers(1, 6, size=25).tolist()
            if len(set(a)) == 1 or len(set(b)) == 1:
                continue
            assert spearman(a, b) == pytest.approx(naive_spearman(a, b), abs=1e-12)

    def test_self_correlation_and_symmetry(self, rng):
        a = rng.integers(1, 6, size=30)
        b = rng.integers(1, 6, size=30)
        assert spearman(a, a) == pytest.approx(1.0, abs=1e-12)
        assert spearman(a, b) == spearman(b, a)

    def test_constant_input_rejected(self):
        with pytest.raises(ValueError):
            spearman([2, 2, 2], [1, 2, 3])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            spearman([1, 2], [1, 2, 3])


class TestLikert:
    def test_scores_must_be_1_to_5(self):
        with pytest.raises(ValueError):
            LikertTable(sensors=("a", "b"), scores=np.array([[0, 3]]))

    def test_csv_loader(self, tmp_path):
        path = tmp_path / "knowledge.csv"
        path.write_text("gps,camera,gyro\n5,5,1\n4,5,2\n5,4,1\n")
        table = load_likert_csv(path, group="knowledge")
        assert table.sensors == ("gps", "camera", "gyro")
        assert table.scores.shape == (3, 3)

    def test_rank_correlation_monotone_tables(self):
        sensors = tuple("abcde")
        know = LikertTable(sensors=sensors,
                           scores=np.array([[1, 2, 3, 4, 5], [1, 2, 3, 4, 5]]))
        concern = LikertTable(sensors=sensors,
                              scores=np.array([[1, 2, 3, 4, 5], [2, 3, 3, 4, 5]]))
        assert survey_rank_correlation(know, concern) == pytest.approx(1.0, abs=1e-12)

    def test_mismatched_sensors_rejected(self):
        a = LikertTable(sensors=("x", "y"), scores=np.array([[1, 2]]))
        b = LikertTable(sensors=("x", "z"), scores=np.array([[1, 2]]))
        with pytest.raises(ValueError):
            survey_rank_correlation(a, b)
