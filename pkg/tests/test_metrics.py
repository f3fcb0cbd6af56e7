"""Metrics tests: arithmetic examples, symmetry/triangle properties,
oracle identities, and the joint removal curve."""

import math

import numpy as np
import pytest

from causal_crowds import metrics as mx
from causal_crowds.counterfactual import Category
from causal_crowds.dataset_io import FACTUAL_KEY, NONCAUSAL_KEY, PredictionSet
from causal_crowds.errors import (
    LengthMismatch,
    MissingCounterfactual,
    MissingPair,
)
from causal_crowds.scenarios import SplitSpec, Split, generate_split


@pytest.fixture(scope="module")
def id_split():
    records, _ = generate_split(SplitSpec(Split.ID, num_scenes=12,
                                          rng_seed=33))
    return records


def _steps(n=12):
    t = np.arange(n, dtype=np.float64)
    return np.stack([t * 0.4, np.zeros(n)], axis=1)


class TestAdeFde:
    def test_exact_match_zero(self):
        y = _steps()
        assert mx.ade(y, y) == 0.0
        assert mx.fde(y, y) == 0.0

    def test_constant_offset(self):
        y = _steps()
        assert mx.ade(y + [1.0, 0.0], y) == pytest.approx(1.0, abs=1e-15)

    def test_single_step_offset(self):
        # offset (3,4) at one step only -> ade 5/12, fde 0
        y = _steps()
        p = y.copy()
        p[3] += [3.0, 4.0]
        assert mx.ade(p, y) == pytest.approx(5.0 / 12.0, abs=1e-15)
        assert mx.fde(p, y) == 0.0

    def test_fde_last_point(self):
        y = _steps()
        p = y.copy()
        p[-1] += [3.0, 4.0]
        assert mx.fde(p, y) == pytest.approx(5.0, abs=1e-15)
        p2 = y.copy()
        p2[0] += [9.0, 9.0]
        assert mx.fde(p2, y) == 0.0

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b, c = rng.normal(size=(3, 12, 2))
            assert mx.ade(a, b) == mx.ade(b, a)
            assert mx.fde(a, b) == mx.fde(b, a)
            assert mx.ade(a, c) <= mx.ade(a, b) + mx.ade(b, c) + 1e-12
            assert mx.fde(a, c) <= mx.fde(a, b) + mx.fde(b, c) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mx.ade(_steps(12), _steps(11))
        with pytest.raises(LengthMismatch):
            mx.fde(_steps(12), _steps(11))


class TestAce:
    def test_two_agent_arithmetic(self, id_split):
        # build a fake scene: errors 0.1 and 0.3 -> ace 0.2
        rec = next(r for r in id_split if len(r.annotations) >= 2)
        anns = rec.annotations[:2]
        future = rec.trajectories[0, rec.config.history_steps:]
        entries = {FACTUAL_KEY: future}
        for ann, err in zip(anns, (0.1, 0.3)):
            # offset so that |estimated - true| equals err exactly
            entries[str(ann.agent_id)] = future + [ann.effect + err, 0.0]
        pred = PredictionSet(rec.scene_id, entries)
        assert mx.ace(pred, anns) == pytest.approx(0.2, abs=1e-12)

    def test_oracle_exactly_zero(self, id_split):
        preds = mx.oracle_predictions(id_split)
        for rec, pred in zip(id_split, preds):
            assert mx.ace(pred, rec.annotations) == 0.0
            for cat in (Category.NON_CAUSAL, Category.DIRECT_CAUSAL,
                        Category.INDIRECT_CAUSAL):
                v = mx.ace(pred, rec.annotations, category=cat)
                assert v == 0.0 or math.isnan(v)

    def test_constant_velocity_equals_mean_true_effect(self, id_split):
        preds = mx.constant_velocity_predictions(id_split)
        for rec, pred in zip(id_split, preds):
            expected = np.mean([a.effect for a in rec.annotations])
            assert mx.ace(pred, rec.annotations) \
                == pytest.approx(expected, abs=1e-12)

    def test_removal_invariant_ace_nc_below_epsilon(self, id_split):
        preds = mx.constant_velocity_predictions(id_split)
        for rec, pred in zip(id_split, preds):
            v = mx.ace(pred, rec.annotations, category=Category.NON_CAUSAL)
            if not math.isnan(v):
                assert v < 0.02

    def test_missing_counterfactual(self, id_split):
        rec = id_split[0]
        future = rec.trajectories[0, rec.config.history_steps:]
        pred = PredictionSet(rec.scene_id, {FACTUAL_KEY: future})
        with pytest.raises(MissingCounterfactual):
            mx.ace(pred, rec.annotations)


class TestDelta:
    def test_oracle_zero(self, id_split):
        preds = mx.oracle_predictions(id_split[:3], include_noncausal=True)
        for rec, pred in zip(id_split[:3], preds):
            truth = rec.trajectories[0, rec.config.history_steps:]
            assert mx.delta_noncausal(
                pred, truth, mx.noncausal_removed_truth(rec)) == 0.0

    def test_perfect_factual_half_meter_removed(self, id_split):
        rec = id_split[0]
        truth = rec.trajectories[0, rec.config.history_steps:]
        removed_truth = mx.noncausal_removed_truth(rec)
        pred = PredictionSet(rec.scene_id, {
            FACTUAL_KEY: truth.copy(),
            NONCAUSAL_KEY: removed_truth + [0.5, 0.0],
        })
        assert mx.delta_noncausal(pred, truth, removed_truth) \
            == pytest.approx(0.5, abs=1e-12)

    def test_missing_pair(self, id_split):
        rec = id_split[0]
        truth = rec.trajectories[0, rec.config.history_steps:]
        pred = PredictionSet(rec.scene_id, {FACTUAL_KEY: truth})
        with pytest.raises(MissingPair):
            mx.delta_noncausal(pred, truth, truth)


class TestJointCurve:
    def test_k_zero_is_null_point(self, id_split):
        pts = mx.joint_curve(id_split, [0])
        assert pts[0].k == 0
        assert pts[0].mean_effect == 0.0
        assert pts[0].fraction_exceeding == 0.0

    def test_k_one_below_epsilon(self, id_split):
        pts = mx.joint_curve(id_split, [1])
        assert pts[0].mean_effect < 0.02

    def test_skipped_scenes_counted(self, id_split):
        pts = mx.joint_curve(id_split, [50])
        assert pts[0].num_scenes == 0
        assert pts[0].num_skipped == len(id_split)


class TestEvaluateSplit:
    def test_oracle_report(self, id_split):
        preds = mx.oracle_predictions(id_split, include_noncausal=True)
        report = mx.evaluate_split(id_split, preds, ks=[0, 1])
        assert report.ade == 0.0
        assert report.fde == 0.0
        assert report.ace == 0.0
        assert report.delta == 0.0
        assert report.delta_abs == 0.0
        assert [p.k for p in report.joint_curve] == [0, 1]

    def test_constant_velocity_report(self, id_split):
        preds = mx.constant_velocity_predictions(id_split)
        report = mx.evaluate_split(id_split, preds)
        assert report.ade > 0.0
        assert report.fde >= report.ade  # error grows with horizon here
        assert math.isnan(report.delta)
