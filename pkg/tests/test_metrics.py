import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonomaly.audio import Spectrogram, SpectrogramParams
from sonomaly.detectors import AnomalyMap
from sonomaly.errors import DataError, MetricUndefinedError, ParameterError, ShapeError
from sonomaly.metrics import (
    CSV_COLUMNS,
    MetricsReport,
    ReportRow,
    aggregate_ff,
    au_pro,
    best_f1,
    faithfulness,
    percentile,
    roc_auc,
    spect_ground_truth,
    spect_level_metrics,
    spect_prediction,
    temporal_ground_truth,
    temporal_scores,
)

from .oracles import brute_au_pro, exhaustive_best_f1, pairwise_auc


def make_spec(values):
    return Spectrogram(values, SpectrogramParams(), 16000)


class TestPercentile:
    def test_hand_interpolation(self):
        # rank r = 0.4 * 4 = 1.6 -> 2 + 0.6 * (3 - 2) = 2.6
        assert percentile([1, 2, 3, 4, 5], 40) == pytest.approx(2.6)

    def test_singleton(self):
        for q in (0, 17.5, 50, 100):
            assert percentile([4.2], q) == 4.2

    def test_median_odd(self):
        assert percentile([1, 2, 3, 4, 5], 50) == 3.0

    def test_empty(self):
        with pytest.raises(DataError):
            percentile([], 50)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(0, 100))
    @settings(max_examples=60, deadline=None)
    def test_bounded_by_extremes(self, values, q):
        p = percentile(values, q)
        assert min(values) - 1e-9 <= p <= max(values) + 1e-9


class TestRocAuc:
    def test_perfectly_separated(self):
        assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_hand_example(self):
        # 3 of 4 (pos, neg) pairs correctly ordered
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_single_class(self):
        with pytest.raises(MetricUndefinedError):
            roc_auc([0.1, 0.2], [1, 1])

    def test_against_pairwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            n = int(rng.integers(2, 201))
            labels = rng.integers(0, 2, n)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            scores = np.round(rng.uniform(0, 1, n), 2)  # rounding forces ties
            assert abs(roc_auc(scores, labels) - pairwise_auc(scores, labels)) <= 1e-9

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        scores = rng.uniform(-3, 3, 50)
        labels = rng.integers(0, 2, 50)
        labels[0], labels[1] = 0, 1
        base = roc_auc(scores, labels)
        assert roc_auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert roc_auc(5.0 * scores + 11.0, labels) == pytest.approx(base, abs=1e-12)

    def test_negation_complement_no_ties(self):
        rng = np.random.default_rng(2)
        scores = rng.permutation(np.linspace(0, 1, 30))
        labels = rng.integers(0, 2, 30)
        labels[0], labels[1] = 0, 1
        assert roc_auc(scores, labels) + roc_auc(-scores, labels) == pytest.approx(1.0)


class TestBestF1:
    def test_separable(self):
        f1, _ = best_f1([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert f1 == 1.0

    def test_hand_sweep(self):
        f1, threshold = best_f1([0.9, 0.4, 0.6, 0.1], [1, 0, 0, 1])
        assert f1 == pytest.approx(2 / 3)
        assert threshold == 0.1  # lowest threshold achieving the max

    def test_single_class(self):
        with pytest.raises(MetricUndefinedError):
            best_f1([0.5, 0.6], [1, 1])

    def test_against_exhaustive_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n = int(rng.integers(2, 13))
            labels = rng.integers(0, 2, n)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            scores = np.round(rng.uniform(0, 1, n), 1)
            got_f1, got_t = best_f1(scores, labels)
            exp_f1, exp_t = exhaustive_best_f1(scores, labels)
            assert got_f1 == exp_f1
            assert got_t == exp_t

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_best_f1_dominates_fixed_thresholds(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        scores = np.round(rng.uniform(0, 1, n), 1)
        got_f1, _ = best_f1(scores, labels)
        n_pos = labels.sum()
        for t in np.unique(scores):
            pred = scores >= t
            tp = int(np.sum(pred & (labels == 1)))
            fp = int(np.sum(pred & (labels == 0)))
            f1 = 2 * tp / (2 * tp + fp + (n_pos - tp))
            assert got_f1 >= f1


class TestSpectGroundTruth:
    def test_distinct_values_top40(self):
        values = np.full((1, 12), -10.0)
        values[0, 1:11] = np.arange(1, 11)  # region of 10 cells, values 1..10
        spec = make_spec(values)
        mask = spect_ground_truth(spec, (0, 1, 1, 11))
        assert mask.sum() == 4
        assert set(np.flatnonzero(mask[0])) == {7, 8, 9, 10}

    def test_uniform_region_all_marked(self):
        spec = make_spec(np.zeros((4, 4)))
        mask = spect_ground_truth(spec, (0, 4, 0, 4))
        assert mask.all()

    def test_single_cell_region(self):
        spec = make_spec(np.zeros((3, 3)))
        mask = spect_ground_truth(spec, (1, 2, 1, 2))
        assert mask[1, 1] and mask.sum() == 1

    def test_outside_region_unmarked(self):
        rng = np.random.default_rng(4)
        spec = make_spec(rng.uniform(0, 1, (6, 6)))
        mask = spect_ground_truth(spec, (2, 4, 1, 5))
        outside = mask.copy()
        outside[2:4, 1:5] = False
        assert not outside.any()

    def test_empty_region_rejected(self):
        spec = make_spec(np.zeros((3, 3)))
        with pytest.raises(ParameterError):
            spect_ground_truth(spec, (2, 2, 0, 3))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_marked_count_bounds(self, seed):
        rng = np.random.default_rng(seed)
        t, f = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        spec = make_spec(np.round(rng.uniform(0, 1, (t, f)), 1))
        mask = spect_ground_truth(spec, (0, t, 0, f))
        k = math.ceil(0.4 * (t * f))
        assert k <= mask.sum() <= t * f


class TestSpectPrediction:
    def test_constant_map_empty(self):
        m = AnomalyMap(np.zeros((3, 3)), normalized=True)
        assert not spect_prediction(m).any()

    def test_five_values(self):
        m = AnomalyMap(np.array([[0.0, 0.25, 0.5, 0.75, 1.0]]), normalized=True)
        mask = spect_prediction(m)
        assert mask.sum() == 3  # p40 = 0.4, strict inequality

    def test_requires_normalized(self):
        with pytest.raises(ParameterError):
            spect_prediction(AnomalyMap(np.ones((2, 2)) * 3.0))

    def test_order_statistic_invariance(self):
        rng = np.random.default_rng(5)
        raw = AnomalyMap(rng.uniform(0, 5, (6, 6))).normalize()
        rescaled = AnomalyMap(raw.values**2, normalized=True)  # monotone on [0,1]
        assert np.array_equal(spect_prediction(raw), spect_prediction(rescaled))


class TestAuPro:
    def test_perfect_map(self):
        gt = np.zeros((2, 2), dtype=bool)
        gt[0, 0] = True
        m = gt.astype(float)
        assert au_pro([m], [gt]) == pytest.approx(1.0)

    def test_2x2_zero_case(self):
        gt = np.zeros((2, 2), dtype=bool)
        gt[0, 0] = True
        m = np.array([[0.25, 0.1], [0.2, 0.3]])
        assert au_pro([m], [gt]) == pytest.approx(0.0, abs=1e-12)

    def test_2x2_one_case(self):
        gt = np.zeros((2, 2), dtype=bool)
        gt[0, 0] = True
        m = np.array([[0.9, 0.1], [0.2, 0.3]])
        assert au_pro([m], [gt]) == pytest.approx(1.0, abs=1e-12)

    def test_no_anomalous_cells(self):
        with pytest.raises(MetricUndefinedError):
            au_pro([np.ones((2, 2))], [np.zeros((2, 2), dtype=bool)])

    def test_against_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(60):
            t, f = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            m = np.round(rng.uniform(0, 1, (t, f)), 1)
            gt = rng.uniform(0, 1, (t, f)) < 0.3
            if not gt.any():
                gt[0, 0] = True
            if gt.all():
                gt[0, 0] = False
            got = au_pro([m], [gt])
            expected = brute_au_pro([m], [gt])
            assert abs(got - expected) <= 1e-9

    def test_multi_map_pooling_matches_oracle(self):
        rng = np.random.default_rng(7)
        maps = [np.round(rng.uniform(0, 1, (4, 4)), 1) for _ in range(3)]
        gts = [rng.uniform(0, 1, (4, 4)) < 0.25 for _ in range(3)]
        gts[0][0, 0] = True
        assert abs(au_pro(maps, gts) - brute_au_pro(maps, gts)) <= 1e-9


class TestSpectLevelMetrics:
    def test_map_equals_gt_is_perfect(self):
        rng = np.random.default_rng(8)
        gt = rng.uniform(0, 1, (6, 6)) < 0.3
        gt[0, 0] = True
        m = AnomalyMap(gt.astype(float))
        res = spect_level_metrics([m], [gt])
        assert res.roc == 1.0
        assert res.pro == pytest.approx(1.0)
        assert res.f1 == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            spect_level_metrics([AnomalyMap(np.ones((2, 2)))], [np.zeros((3, 3), dtype=bool)])

    def test_gt_without_anomalies_undefined(self):
        with pytest.raises(MetricUndefinedError):
            spect_level_metrics([AnomalyMap(np.ones((2, 2)))], [np.zeros((2, 2), dtype=bool)])


class TestPerfectMapEndToEnd:
    def test_spect_families_perfect_when_map_equals_gt(self):
        rng = np.random.default_rng(20)
        gts, maps = [], []
        for _ in range(3):
            gt = rng.uniform(0, 1, (8, 6)) < 0.25
            gts.append(gt)
            maps.append(AnomalyMap(gt.astype(float)))
        gts[0][2, 2] = True
        maps[0] = AnomalyMap(gts[0].astype(float))
        res = spect_level_metrics(maps, gts)
        assert res.roc == 1.0
        assert res.pro == pytest.approx(1.0)

    def test_temporal_perfect_when_map_broadcasts_temporal_gt(self):
        # columns scored by their temporal label rank perfectly, including
        # all-normal clips pooled in (ties only within one class)
        rng = np.random.default_rng(21)
        values = np.zeros((10, 6))
        values[3:7] = rng.uniform(1.0, 2.0, (4, 6))
        spec = make_spec(values)
        gt = temporal_ground_truth(spec, (3, 7))
        assert gt.any() and not gt.all()
        map_anom = AnomalyMap(np.repeat(gt[:, None].astype(float), 6, axis=1))
        map_normal = AnomalyMap(np.zeros((10, 6)))
        scores = np.concatenate([temporal_scores(map_anom), temporal_scores(map_normal)])
        labels = np.concatenate([gt, np.zeros(10, dtype=bool)]).astype(int)
        assert roc_auc(scores, labels) == 1.0


class TestTemporal:
    def test_two_column_interval(self):
        values = np.zeros((4, 2))
        values[1] = [1.0, 2.0]  # column sums 3
        values[2] = [2.0, 3.0]  # and 5; p50 = 4, strict
        gt = temporal_ground_truth(make_spec(values), (1, 3))
        assert gt.tolist() == [False, False, True, False]

    def test_uniform_columns_none_marked(self):
        gt = temporal_ground_truth(make_spec(np.ones((5, 3))), (0, 5))
        assert not gt.any()

    def test_single_column_unmarked(self):
        gt = temporal_ground_truth(make_spec(np.ones((5, 3))), (2, 3))
        assert not gt.any()

    def test_empty_interval_rejected(self):
        with pytest.raises(ParameterError):
            temporal_ground_truth(make_spec(np.ones((5, 3))), (3, 3))

    def test_top5_mean(self):
        col = np.array([[0.1, 0.9, 0.5, 0.7, 0.3, 0.2]])
        got = temporal_scores(AnomalyMap(col))
        assert got[0] == pytest.approx(0.52)

    def test_constant_column(self):
        got = temporal_scores(AnomalyMap(np.full((2, 8), 0.4)))
        assert np.allclose(got, 0.4)

    def test_fewer_than_five_frequencies(self):
        col = np.array([[0.3, 0.6, 0.9]])
        assert temporal_scores(AnomalyMap(col))[0] == pytest.approx(0.6)


class TestFaithfulness:
    def test_identity_mask_v1_zero(self):
        x = make_spec(np.random.default_rng(9).uniform(-1, 1, (4, 4)))
        bg = make_spec(np.zeros((4, 4)))
        m = AnomalyMap(np.ones((4, 4)), normalized=True)
        res = faithfulness(lambda s: float(s.values.sum()), x, m, bg)
        assert res.ff_v1 == 0.0

    def test_zero_mask_v2_zero(self):
        x = make_spec(np.random.default_rng(10).uniform(-1, 1, (4, 4)))
        bg = make_spec(np.random.default_rng(11).uniform(-1, 1, (4, 4)))
        m = AnomalyMap(np.zeros((4, 4)), normalized=True)
        res = faithfulness(lambda s: float(s.values.sum()), x, m, bg)
        assert res.ff_v2 == 0.0

    def test_zero_mask_v1_formula(self):
        x = make_spec(np.random.default_rng(12).uniform(-1, 1, (4, 4)))
        bg = make_spec(np.zeros((4, 4)))
        m = AnomalyMap(np.zeros((4, 4)), normalized=True)
        f = lambda s: float(np.abs(s.values).sum())
        res = faithfulness(f, x, m, bg)
        x_zero = make_spec(np.zeros((4, 4)))
        assert res.ff_v1 == pytest.approx(f(x) - f(x_zero))

    def test_shape_mismatch(self):
        x = make_spec(np.zeros((4, 4)))
        bg = make_spec(np.zeros((3, 4)))
        m = AnomalyMap(np.zeros((4, 4)), normalized=True)
        with pytest.raises(ShapeError):
            faithfulness(lambda s: 0.0, x, m, bg)

    def test_aggregate(self):
        from sonomaly.metrics import FaithfulnessResult

        agg = aggregate_ff([FaithfulnessResult(1.0, 2.0), FaithfulnessResult(3.0, 4.0)])
        assert agg["ff_v1_mean"] == 2.0
        assert agg["ff_v1_std"] == pytest.approx(np.std([1, 3], ddof=1))
        single = aggregate_ff([FaithfulnessResult(1.0, 2.0)])
        assert single["ff_v1_std"] == 0.0
        empty = aggregate_ff([])
        assert math.isnan(empty["ff_v1_mean"])


class TestReport:
    def test_csv_columns_exact(self):
        report = MetricsReport(rows=[ReportRow("padim", 6.0, sample_roc=0.9)])
        lines = report.to_csv().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("padim,6.0,0.900000")

    def test_empty_report_has_header_only(self):
        assert MetricsReport().to_csv().splitlines() == [",".join(CSV_COLUMNS)]

    def test_nan_renders_empty_csv_and_null_json(self):
        report = MetricsReport(rows=[ReportRow("padim", 0.0)])
        line = report.to_csv().splitlines()[1]
        assert line == "padim,0.0,,,,,,,,,,,"
        back = MetricsReport.from_json(report.to_json())
        assert math.isnan(back.rows[0].sample_roc)

    def test_json_round_trip(self):
        report = MetricsReport(
            rows=[ReportRow("stfpm", -6.0, sample_roc=0.5, ff_v1_mean=0.1)],
            metadata={"seed": 7},
        )
        back = MetricsReport.from_json(report.to_json())
        assert back.rows[0].method == "stfpm"
        assert back.rows[0].sample_roc == 0.5
        assert back.metadata == {"seed": 7}

    def test_write_files(self, tmp_path):
        report = MetricsReport(rows=[ReportRow("padim", 6.0, sample_roc=1.0)])
        written = report.write(tmp_path)
        assert set(written) == {"csv", "json"}
        assert (tmp_path / "report.csv").exists()
