import numpy as np
import pytest

from common.errors import ConfigError, DataError, DimensionError
from recognition.metrics import EvalReport, SpaceResult, harmonic_mean, per_class_top1

CLASSES = ("a", "b", "c")


class TestPerClassTop1:
    def test_all_correct(self):
        overall, per_class = per_class_top1([0, 1, 2, 2], [0, 1, 2, 2], CLASSES)
        assert overall == 1.0
        assert per_class == {"a": 1.0, "b": 1.0, "c": 1.0}

    def test_class_mean_not_sample_mean(self):
        truth = [0, 0, 1, 1, 1, 1, 1, 1]
        pred = [0, 0, 0, 0, 0, 0, 0, 0]
        overall, per_class = per_class_top1(pred, truth, CLASSES)
        assert overall == 0.5
        assert per_class == {"a": 1.0, "b": 0.0}

    def test_matches_loop_oracle(self, rng):
        classes = tuple(f"class_{k}" for k in range(10))
        truth = np.repeat(np.arange(10), 8)
        pred = rng.integers(0, 10, size=truth.size)
        accuracies = []
        for k in range(10):
            hits = total = 0
            for p, t in zip(pred, truth):
                if t == k:
                    total += 1
                    hits += int(p == t)
            accuracies.append(hits / total)
        overall, _ = per_class_top1(pred, truth, classes)
        assert overall == pytest.approx(sum(accuracies) / 10, abs=1e-15)

    def test_empty_truth(self):
        with pytest.raises(DataError, match="empty"):
            per_class_top1([], [], CLASSES)

    def test_label_outside_registry(self):
        with pytest.raises(DataError, match="not in the class registry"):
            per_class_top1([0, 1], [0, 3], CLASSES)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            per_class_top1([0, 1, 2], [0, 1], CLASSES)


class TestHarmonicMean:
    def test_reported_value(self):
        assert harmonic_mean(0.198, 0.486) == pytest.approx(0.281, abs=0.0005)

    def test_equal_inputs(self):
        assert harmonic_mean(0.37, 0.37) == pytest.approx(0.37)

    def test_zero(self):
        assert harmonic_mean(0.0, 0.8) == 0.0
        assert harmonic_mean(0.0, 0.0) == 0.0

    def test_bounded_by_inputs(self, rng):
        for ts, tr in rng.uniform(0.01, 1.0, size=(100, 2)):
            H = harmonic_mean(ts, tr)
            assert min(ts, tr) - 1e-12 <= H <= max(ts, tr) + 1e-12

    @pytest.mark.parametrize("ts, tr", [(-0.1, 0.5), (0.5, 1.2)])
    def test_out_of_range(self, ts, tr):
        with pytest.raises(ConfigError):
            harmonic_mean(ts, tr)


class TestEvalReport:
    def test_zsl_keys(self):
        result = SpaceResult(spaces="va", n_samples=4, accuracy=0.75, per_class={"a": 0.5, "b": 1.0})
        data = result.to_dict()
        assert "accuracy" in data
        assert "H" not in data and "ts" not in data

    def test_gzsl_keys(self):
        result = SpaceResult(spaces="v", n_samples=4, ts=0.2, tr=0.6, H=0.3)
        data = result.to_dict()
        assert {"ts", "tr", "H", "per_class_seen"} <= set(data)
        assert "accuracy" not in data
        assert result.score == 0.3

    def test_best_and_lookup(self):
        report = EvalReport(mode="zsl", dataset="toy", variant="CDL", hyperparams={}, results=[
            SpaceResult(spaces="v", n_samples=2, accuracy=0.5),
            SpaceResult(spaces="va", n_samples=2, accuracy=0.9),
        ])
        assert report.best().spaces == "va"
        assert report.result("v").accuracy == 0.5
        assert report.rows()[1] == {"spaces": "va", "n_samples": 2, "accuracy": 0.9}
        with pytest.raises(KeyError):
            report.result("s")

    def test_dict_conversion(self):
        report = EvalReport(mode="gzsl", dataset="toy", variant="CDL-Ad", hyperparams={"lam": 1.0}, results=[
            SpaceResult(spaces="v", n_samples=4, ts=0.2, tr=0.6, H=0.3, per_class={"u": 0.2},
                        per_class_seen={"s": 0.6}),
        ])
        restored = EvalReport.from_dict(report.to_dict())
        assert restored == report

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            EvalReport(mode="fsl", dataset="toy", variant="CDL", hyperparams={})
