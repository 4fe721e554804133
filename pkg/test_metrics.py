"""
Tests for the ordering evaluation measures
"""

import math

import numpy as np
import pytest

from conftest import matrix, random_matrix
from mr_prioritizer.core_model import CostProfile, DetectionCurve, Method, MrOrdering
from mr_prioritizer.errors import (
    CurveTooShort,
    EmptyList,
    InvalidThreshold,
    LengthMismatch,
    MissingCost,
    MrSetMismatch,
    NoKillableFaults,
    ZeroBaseline,
)
from mr_prioritizer.metrics import (
    INFINITE_IMPROVEMENT,
    avg_time_to_detect,
    detection_curve,
    effective_set_size,
    format_percent,
    kill_rate_summary,
    mean_curve,
    mr_kill_rates,
    relative_improvement,
    time_reduction,
    times_to_detect,
)
from mr_prioritizer.prioritize import random_orders
from mr_prioritizer.synth import SynthSpec, gen_kill_matrix


def external(*order):
    return MrOrdering(tuple(order), Method.EXTERNAL)


class TestDetectionCurve:
    def test_hand_example(self):
        km = matrix({"A": {"f1", "f2"}, "B": {"f2", "f3"}}, ["f1", "f2", "f3", "f4"])
        assert detection_curve(external("A", "B"), km).values == (50.0, 75.0)

    def test_all_false(self):
        km = matrix({"A": set(), "B": set()}, ["f1", "f2"])
        assert detection_curve(external("B", "A"), km).values == (0.0, 0.0)

    def test_single_mr_kills_everything(self):
        km = matrix({"A": {"f1", "f2"}}, ["f1", "f2"])
        assert detection_curve(external("A"), km).values == (100.0,)

    def test_killable_only_denominator(self):
        km = matrix({"A": {"f1"}, "B": {"f2"}}, ["f1", "f2", "f3", "f4"])
        assert detection_curve(external("A", "B"), km, killable_only=True).values == (50.0, 100.0)

    def test_mr_set_mismatch(self, three_mr_matrix):
        with pytest.raises(MrSetMismatch):
            detection_curve(external("A", "B"), three_mr_matrix)

    def test_random_orders_share_final_value(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            km = random_matrix(rng)
            finals = set()
            for ordering in random_orders(km.mrs, n=100, seed=int(rng.integers(2 ** 32))):
                curve = detection_curve(ordering, km)
                assert all(b >= a for a, b in zip(curve.values, curve.values[1:]))
                finals.add(round(curve.final, 9))
            assert len(finals) == 1


class TestMeanCurve:
    def test_arithmetic(self):
        assert mean_curve([DetectionCurve((0, 100)), DetectionCurve((100, 100))]).values == (50.0, 100.0)

    def test_single(self):
        curve = DetectionCurve((12.5, 40.0))
        assert mean_curve([curve]) == curve

    def test_within_envelope(self):
        curves = [DetectionCurve((10 / 3, 20 / 3, 100.0))] * 7
        mean = mean_curve(curves)
        assert mean.values == curves[0].values

    def test_empty(self):
        with pytest.raises(EmptyList):
            mean_curve([])

    def test_lengths_differ(self):
        with pytest.raises(LengthMismatch):
            mean_curve([DetectionCurve((1.0,)), DetectionCurve((1.0, 2.0))])


class TestRelativeImprovement:
    def test_identical(self):
        curve = DetectionCurve((20.0, 60.0))
        assert relative_improvement(curve, curve) == [0.0, 0.0]

    def test_arithmetic(self):
        assert relative_improvement(DetectionCurve((30,)), DetectionCurve((10,))) == [200.0]

    def test_zero_baseline(self):
        assert relative_improvement(DetectionCurve((5,)), DetectionCurve((0,))) == [INFINITE_IMPROVEMENT]
        assert relative_improvement(DetectionCurve((0,)), DetectionCurve((0,))) == [0.0]

    def test_negative(self):
        assert relative_improvement(DetectionCurve((10,)), DetectionCurve((20,))) == [-50.0]

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            relative_improvement(DetectionCurve((1.0,)), DetectionCurve((1.0, 2.0)))


class TestEffectiveSetSize:
    def test_met(self):
        size = effective_set_size(DetectionCurve((60, 80, 90, 93)), 5.0)
        assert size.size == 3
        assert size.display() == "3"

    def test_not_met(self):
        size = effective_set_size(DetectionCurve((60, 80, 90, 93)), 2.5)
        assert not size.met
        assert size.display() == "NotMet"

    def test_flat(self):
        assert effective_set_size(DetectionCurve((70, 70)), 0.1).size == 1

    def test_gap_equal_to_threshold_does_not_stop(self):
        assert effective_set_size(DetectionCurve((10, 15, 16)), 5.0).size == 2

    def test_too_short(self):
        with pytest.raises(CurveTooShort):
            effective_set_size(DetectionCurve((50,)), 5.0)

    @pytest.mark.parametrize("threshold", [0.0, -1.0])
    def test_invalid_threshold(self, threshold):
        with pytest.raises(InvalidThreshold):
            effective_set_size(DetectionCurve((50, 60)), threshold)

    def test_larger_threshold_never_gives_larger_size(self):
        violations = 0
        for seed in range(100):
            spec = SynthSpec(8, 60, 0.3, 0.2, seed=seed)
            km = gen_kill_matrix(spec)
            curve = detection_curve(random_orders(km.mrs, n=1, seed=seed)[0], km)
            loose, strict = effective_set_size(curve, 5.0), effective_set_size(curve, 2.5)
            if loose.met and strict.met and loose.size > strict.size:
                violations += 1
        assert violations == 0


class TestTimeToDetect:
    def setup_method(self):
        self.km = matrix({"A": {"f1"}, "B": {"f2"}}, ["f1", "f2", "f3"])
        self.cost = CostProfile({"A": 10.0, "B": 20.0})

    def test_hand_example(self):
        assert times_to_detect(external("A", "B"), self.km, self.cost) == {"f1": 10.0, "f2": 30.0}
        assert avg_time_to_detect(external("A", "B"), self.km, self.cost) == 20.0

    def test_first_mr_kills_all(self):
        km = matrix({"A": {"f1", "f2"}, "B": {"f2"}}, ["f1", "f2"])
        assert avg_time_to_detect(external("A", "B"), km, self.cost) == 10.0

    def test_tail_mrs_do_not_matter(self):
        km = matrix({"A": {"f1"}, "B": {"f2"}, "C": {"f1"}}, ["f1", "f2"])
        cost = CostProfile({"A": 10.0, "B": 20.0, "C": 500.0})
        assert avg_time_to_detect(external("A", "B", "C"), km, cost) == 20.0

    def test_missing_cost(self):
        with pytest.raises(MissingCost):
            avg_time_to_detect(external("A", "B"), self.km, CostProfile({"A": 1.0}))

    def test_no_killable_faults(self):
        km = matrix({"A": set(), "B": set()}, ["f1"])
        with pytest.raises(NoKillableFaults):
            avg_time_to_detect(external("A", "B"), km, self.cost)

    def test_no_mrs(self):
        km = matrix({}, ["f1", "f2"])
        assert times_to_detect(external(), km, self.cost) == {}
        with pytest.raises(NoKillableFaults):
            avg_time_to_detect(external(), km, self.cost)


class TestTimeReduction:
    @pytest.mark.parametrize("target, baseline, expected", [(141, 244, 42), (58, 149, 61), (100, 100, 0)])
    def test_rounded(self, target, baseline, expected):
        assert round(time_reduction(target, baseline)) == expected

    def test_full_precision(self):
        assert time_reduction(141, 244) == pytest.approx(42.213114754)

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaseline):
            time_reduction(10, 0)


class TestKillRates:
    def test_per_mr_rates(self):
        km = matrix({"A": {"f1", "f2"}, "B": set()}, ["f1", "f2", "f3", "f4"])
        assert mr_kill_rates(km) == {"A": 50.0, "B": 0.0}

    def test_summary(self):
        km = matrix({"A": {"f1", "f2"}, "B": set()}, ["f1", "f2", "f3", "f4"])
        mean, sd = kill_rate_summary(km)
        assert mean == 25.0
        assert sd == 25.0


class TestFormatPercent:
    @pytest.mark.parametrize("value, text", [
        (218.2412, "218.24%"),
        (None, "not computed"),
        (math.inf, "+inf"),
        (-12.5, "-12.50%"),
    ])
    def test_display(self, value, text):
        assert format_percent(value) == text
