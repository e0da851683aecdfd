import math

import numpy as np
import pytest

from vitalstream import beats
from vitalstream.errors import (
    EmptyEvalSet,
    MalformedRow,
    UnknownLabel,
)
from vitalstream.nnet import Conv1D, Dense, Flatten, MaxPool1D, Network, ReLU, train
from vitalstream.signal_model import (
    BEAT_WINDOW_LEN,
    BeatClass,
    Channel,
    SampleSeries,
)


class TestLoader:
    def test_degenerate_zero_row(self, tmp_path):
        path = tmp_path / "beats.csv"
        path.write_text(",".join(["0"] * 187 + ["0"]) + "\n")
        segments = beats.load_mitbih_segments(path)
        assert len(segments) == 1
        assert segments[0].label is BeatClass.N
        assert segments[0].window.sum() == 0.0

    def test_label_mapping(self, tmp_path):
        path = tmp_path / "beats.csv"
        rows = [",".join(["0.5"] * 187 + [str(k)]) for k in range(5)]
        path.write_text("\n".join(rows) + "\n")
        labels = [s.label for s in beats.load_mitbih_segments(path)]
        assert labels == [BeatClass.N, BeatClass.S, BeatClass.V,
                          BeatClass.F, BeatClass.Q]

    def test_unknown_label(self, tmp_path):
        path = tmp_path / "beats.csv"
        path.write_text(",".join(["0.5"] * 187 + ["7"]) + "\n")
        with pytest.raises(UnknownLabel):
            beats.load_mitbih_segments(path)

    def test_fractional_label(self, tmp_path):
        path = tmp_path / "beats.csv"
        path.write_text(",".join(["0.5"] * 187 + ["2.5"]) + "\n")
        with pytest.raises(UnknownLabel):
            beats.load_mitbih_segments(path)

    def test_wrong_arity(self, tmp_path):
        path = tmp_path / "beats.csv"
        path.write_text(",".join(["0.5"] * 100 + ["0"]) + "\n")
        with pytest.raises(MalformedRow):
            beats.load_mitbih_segments(path)

    def test_out_of_range_value(self, tmp_path):
        path = tmp_path / "beats.csv"
        path.write_text(",".join(["1.5"] + ["0.5"] * 186 + ["0"]) + "\n")
        with pytest.raises(MalformedRow):
            beats.load_mitbih_segments(path)

    def test_roundtrip_via_save(self, tmp_path, rng):
        segments = beats.synthetic_beat_corpus(20, rng)
        path = tmp_path / "beats.csv"
        beats.save_segments_csv(path, segments)
        back = beats.load_mitbih_segments(path)
        assert [s.label for s in back] == [s.label for s in segments]


class TestForward:
    def test_zero_weights_uniform_output(self, rng):
        net = beats.build_network(rng=rng)
        for p in net.params():
            p.value[...] = 0.0
        probs = net.predict_proba(rng.random((3, 1, BEAT_WINDOW_LEN)))
        np.testing.assert_allclose(probs, 0.2, atol=1e-12)

    def test_probabilities_normalized(self, rng):
        net = beats.build_network(rng=rng)
        probs = net.predict_proba(rng.random((8, 1, BEAT_WINDOW_LEN)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(probs >= 0)

    def test_hand_computed_tiny_forward(self):
        # one conv filter (kernel 3, stride 2, same padding), pool 2/2,
        # dense to two logits, on a 4-sample input -- checked by hand:
        #   x = [1, 2, 3, 4], w = [1, 0, -1], b = 0.5
        #   same padding adds one zero on the right -> [1, 2, 3, 4, 0]
        #   conv@0: 1*1 + 2*0 - 3*1 + 0.5 = -1.5
        #   conv@2: 3*1 + 4*0 - 0*1 + 0.5 =  3.5
        #   relu -> [0, 3.5]; pool(2,2) -> [3.5]; dense w=[2,-1], b=[0.1,0.3]
        #   logits = [7.1, -3.2]; softmax = e^z / sum(e^z)
        conv = Conv1D(1, 1, 3, 2)
        conv.w.value[...] = np.array([[[1.0, 0.0, -1.0]]])
        conv.b.value[...] = 0.5
        dense = Dense(1, 2)
        dense.w.value[...] = np.array([[2.0, -1.0]])
        dense.b.value[...] = np.array([0.1, 0.3])
        net = Network([conv, ReLU(), MaxPool1D(2, 2), Flatten(), dense])
        probs = net.predict_proba(np.array([[[1.0, 2.0, 3.0, 4.0]]]))
        z = np.array([7.1, -3.2])
        expected = np.exp(z) / np.exp(z).sum()
        np.testing.assert_allclose(probs[0], expected, atol=1e-12)

    def test_hand_computed_positive_path(self):
        # same net, weights flipped so the conv output survives the ReLU:
        #   conv@0: 2*1 - 0 = ... w = [-1, 0, 1]: conv@0 = 2 - 0 = 2
        #   conv@2: 4 - 2 = 2; +b 0.5 -> [2.5, 2.5]; pool -> 2.5
        #   logits = [2*2.5 + 0.1, -2.5 + 0.3] = [5.1, -2.2]
        conv = Conv1D(1, 1, 3, 2)
        conv.w.value[...] = np.array([[[-1.0, 0.0, 1.0]]])
        conv.b.value[...] = 0.5
        dense = Dense(1, 2)
        dense.w.value[...] = np.array([[2.0, -1.0]])
        dense.b.value[...] = np.array([0.1, 0.3])
        net = Network([conv, ReLU(), MaxPool1D(2, 2), Flatten(), dense])
        logits = net.logits(np.array([[[1.0, 2.0, 3.0, 4.0]]]))
        np.testing.assert_allclose(logits[0], [5.1, -2.2], atol=1e-12)

    def test_layer_length_table(self):
        config = beats.NetworkConfig()
        net = beats.build_network(config, rng=np.random.default_rng(0))
        lengths = [config.input_len]
        for layer in net.layers:
            if isinstance(layer, (Conv1D, MaxPool1D)):
                lengths.append(layer.out_length(lengths[-1]))
        assert lengths == [187, 94, 47, 24, 12, 6, 3, 2, 1, 1, 1, 1, 1]


class TestEvaluate:
    def test_perfect_predictor(self):
        confusion = np.diag([10, 3, 5, 2, 4])
        report = beats.report_from_confusion(confusion)
        assert report.accuracy_pct == 100.0
        assert report.precision_pct == 100.0
        assert report.recall_pct == 100.0

    def test_perfect_predictor_with_absent_classes(self):
        confusion = np.zeros((5, 5), dtype=int)
        confusion[0, 0] = 7
        confusion[2, 2] = 3
        report = beats.report_from_confusion(confusion)
        assert report.accuracy_pct == 100.0
        assert report.precision_pct == 100.0
        assert report.per_class_precision_pct["S"] is None

    def test_hand_built_confusion(self):
        # rows = truth, cols = predicted
        confusion = np.array([
            [8, 1, 1, 0, 0],
            [2, 6, 0, 0, 2],
            [0, 0, 9, 1, 0],
            [0, 0, 0, 5, 0],
            [1, 0, 0, 0, 4],
        ])
        report = beats.report_from_confusion(confusion)
        assert report.accuracy_pct == pytest.approx(100 * 32 / 40)
        # per-class precision: 8/11, 6/7, 9/10, 5/6, 4/6
        expected_p = 100 * np.mean([8 / 11, 6 / 7, 9 / 10, 5 / 6, 4 / 6])
        # per-class recall: 8/10, 6/10, 9/10, 5/5, 4/5
        expected_r = 100 * np.mean([0.8, 0.6, 0.9, 1.0, 0.8])
        assert report.precision_pct == pytest.approx(expected_p)
        assert report.recall_pct == pytest.approx(expected_r)
        assert report.confusion.sum() == 40

    def test_row_sums_match_truth_counts(self, rng):
        segments = beats.synthetic_beat_corpus(60, rng)
        net = beats.build_network(rng=rng)
        report = beats.evaluate(net, segments)
        truth_counts = np.bincount(
            [s.label.value for s in segments], minlength=5)
        np.testing.assert_array_equal(report.confusion.sum(axis=1),
                                      truth_counts)

    def test_permutation_invariant(self, rng):
        segments = beats.synthetic_beat_corpus(40, rng)
        net = beats.build_network(rng=rng)
        a = beats.evaluate(net, segments)
        shuffled = list(segments)
        rng.shuffle(shuffled)
        b = beats.evaluate(net, shuffled)
        np.testing.assert_array_equal(a.confusion, b.confusion)
        assert a.accuracy_pct == b.accuracy_pct

    def test_empty_set(self, rng):
        net = beats.build_network(rng=rng)
        with pytest.raises(EmptyEvalSet):
            beats.evaluate(net, [])


class TestTrainSmoke:
    def test_loss_decreases_on_small_set(self, rng):
        segments = beats.synthetic_beat_corpus(
            60, rng, class_mix={c: 0.2 for c in BeatClass})
        x, y = beats.segments_to_arrays(segments)
        net = beats.build_network(rng=np.random.default_rng(0))
        hist = train(net, x, y, epochs=30, batch_size=16, learning_rate=0.01,
                     rng=np.random.default_rng(1))
        assert hist.loss[-1] < 0.5 * hist.loss[0]


class TestClassifyStream:
    def test_empty_peaks(self, rng):
        net = beats.build_network(rng=rng)
        series = SampleSeries(channel=Channel.ECG, rate_hz=125.0, t0_ms=0,
                              values=rng.random(500))
        calls, skipped = beats.classify_stream(net, series, [])
        assert calls == [] and skipped == []

    def test_tiled_segment_self_consistency(self, rng):
        segment = beats.synthetic_beat(BeatClass.V, rng)
        net = beats.build_network(rng=rng)
        direct = int(np.argmax(net.predict_proba(
            segment.window[None, None, :])))
        tiles = 4
        values = np.tile(segment.window, tiles)
        series = SampleSeries(channel=Channel.ECG, rate_hz=125.0, t0_ms=0,
                              values=values)
        peaks = [k * BEAT_WINDOW_LEN for k in range(tiles)]
        calls, skipped = beats.classify_stream(net, series, peaks)
        assert len(calls) == tiles - 1
        assert all(c.label.value == direct for c in calls)
        assert len(skipped) == 1  # trailing beat has no bounding peak

    def test_flat_beat_skipped(self, rng):
        net = beats.build_network(rng=rng)
        values = np.zeros(400)
        series = SampleSeriesFlat = SampleSeries(
            channel=Channel.ECG, rate_hz=125.0, t0_ms=0, values=values)
        calls, skipped = beats.classify_stream(net, series, [0, 150, 300])
        assert calls == []
        reasons = [r for _, r in skipped]
        assert any("degenerate" in r for r in reasons)


class TestSynthetic:
    def test_corpus_windows_valid(self, rng):
        for segment in beats.synthetic_beat_corpus(50, rng):
            assert segment.window.shape == (BEAT_WINDOW_LEN,)
            assert segment.window.min() >= 0.0
            assert segment.window.max() <= 1.0

    def test_stratified_split_preserves_mix(self, rng):
        segments = beats.synthetic_beat_corpus(
            1000, rng, class_mix={c: 0.2 for c in BeatClass})
        train_set, test_set = beats.stratified_split(segments, 0.2, rng)
        assert len(train_set) + len(test_set) == 1000
        for cls in BeatClass:
            total = sum(1 for s in segments if s.label is cls)
            in_test = sum(1 for s in test_set if s.label is cls)
            assert in_test == pytest.approx(0.2 * total, abs=1)
