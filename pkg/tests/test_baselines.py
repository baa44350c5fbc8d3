import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adacsl.baselines import (
    SYMMETRIC,
    resample_by_cost,
    smote_oversample,
    threshold_adjusted_decision,
    train_standard,
    train_threshold_adjusted,
    train_weighted_ce,
)
from adacsl.core import CostMatrix, LabeledDataset
from adacsl.costmodel import classify
from adacsl.errors import InvalidInputError
from adacsl.nnet import TrainConfig, init_network, predict_batch

CFG = TrainConfig(learning_rate=0.5, batch_size=32, max_epochs=3, hidden=(8,))


def labelled(n_neg, n_pos, d=2, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_neg + n_pos, d))
    y = np.r_[np.zeros(n_neg, int), np.ones(n_pos, int)]
    return LabeledDataset(x, y)


def on_segment(p, a, b, tol=1e-9):
    ab = b - a
    denom = ab @ ab
    if denom == 0:
        return np.allclose(p, a, atol=tol)
    u = (p - a) @ ab / denom
    return -tol <= u <= 1 + tol and np.allclose(a + u * ab, p, atol=tol)


def separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, 2))
    x[:, 0] += np.where(x[:, 0] > 0, 0.5, -0.5)
    return LabeledDataset(x, (x[:, 0] > 0).astype(int))


class TestResample:
    def test_identity_multiplier(self):
        ds = labelled(50, 20)
        assert resample_by_cost(ds, SYMMETRIC, 0.5, 0) is ds

    def test_eight_hundred_to_one_hundred(self):
        ds = labelled(800, 40)
        out = resample_by_cost(ds, CostMatrix(1, 8), 0.5, 3)
        assert int((out.labels == 0).sum()) == 100
        assert int((out.labels == 1).sum()) == 40

    def test_upsampling_copies_then_tops_up(self):
        ds = labelled(100, 10)
        # m = 2.5 via c_fp/c_fn = 2.5 at t' = 0.5
        out = resample_by_cost(ds, CostMatrix(2.5, 1), 0.5, 0)
        neg = out.features[out.labels == 0]
        assert neg.shape[0] == 250
        orig = ds.features[ds.labels == 0]
        counts = np.array([(neg == row).all(axis=1).sum() for row in orig])
        assert set(counts) <= {2, 3}
        assert (counts == 3).sum() == 50

    def test_removing_everything_is_an_error(self):
        with pytest.raises(InvalidInputError, match="remove all negatives"):
            resample_by_cost(labelled(3, 3), CostMatrix(1, 1000), 0.5, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 300), st.integers(1, 30), st.floats(0.05, 20), st.floats(0.1, 0.9), st.integers(0, 99))
    def test_count_and_positives_preserved(self, n_neg, n_pos, ratio, t_prime, seed):
        ds = labelled(n_neg, n_pos, seed=seed)
        cm = CostMatrix(ratio, 1)
        m = ratio * (1 - t_prime) / t_prime
        target = int(np.floor(m * n_neg + 0.5))
        if target == 0:
            with pytest.raises(InvalidInputError):
                resample_by_cost(ds, cm, t_prime, seed)
            return
        out = resample_by_cost(ds, cm, t_prime, seed)
        assert int((out.labels == 0).sum()) == target
        np.testing.assert_array_equal(out.features[out.labels == 1], ds.features[ds.labels == 1])
        assert set(np.unique(out.labels)) <= {0, 1}

    def test_seeded(self):
        ds = labelled(300, 10)
        a = resample_by_cost(ds, CostMatrix(1, 3), 0.5, 5)
        b = resample_by_cost(ds, CostMatrix(1, 3), 0.5, 5)
        assert a.equals(b)


class TestSmote:
    def test_no_op_at_target_ratio(self):
        ds = labelled(40, 20)
        assert smote_oversample(ds, k=3, target_ratio=0.5) is ds

    def test_balances(self):
        out = smote_oversample(labelled(90, 12), k=5, seed=1)
        assert int((out.labels == 1).sum()) == 90
        assert int((out.labels == 0).sum()) == 90

    def test_two_points_single_segment(self):
        x = np.array([[0.0, 0.0], [1.0, 2.0], [5.0, 5.0], [6.0, 5.0], [7.0, 5.0]])
        ds = LabeledDataset(x, [1, 1, 0, 0, 0])
        out = smote_oversample(ds, k=1, target_ratio=1.0, seed=0)
        synth = out.features[len(ds):]
        assert synth.shape[0] == 1
        assert on_segment(synth[0], x[0], x[1])

    def test_segment_membership(self):
        ds = labelled(1020, 20, d=3, seed=4)
        out = smote_oversample(ds, k=5, seed=4)
        mino = ds.features[ds.labels == 1]
        synth = out.features[len(ds):]
        assert synth.shape[0] == 1000
        for p in synth:
            assert any(on_segment(p, mino[i], mino[j]) for i in range(20) for j in range(i + 1, 20))
        lo, hi = mino.min(axis=0), mino.max(axis=0)
        assert (synth >= lo - 1e-12).all() and (synth <= hi + 1e-12).all()

    def test_too_few_minority(self):
        with pytest.raises(InvalidInputError, match="k=5"):
            smote_oversample(labelled(30, 3), k=5)


class TestTrainers:
    def test_standard_is_deterministic(self):
        ds = labelled(60, 40)
        a = train_standard(ds, ds, CFG)
        b = train_standard(ds, ds, CFG)
        assert a.params.equals(b.params) and a.val_costs == b.val_costs

    def test_separable_reaches_zero_errors(self):
        ds = separable()
        cfg = TrainConfig(learning_rate=1.0, batch_size=16, max_epochs=40, hidden=(8,))
        fit = train_standard(ds, ds, cfg)
        preds = predict_batch(fit.best_params, ds.features)
        assert (classify(preds, 0.5) == ds.labels).all()

    def test_weighted_ce_symmetric_equals_standard(self):
        ds = labelled(60, 40)
        a = train_weighted_ce(ds, ds, CFG, SYMMETRIC)
        b = train_standard(ds, ds, CFG)
        assert a.params.equals(b.params)

    def test_threshold_adjusted_uses_cost_cutoff(self):
        ds = labelled(60, 40)
        fit = train_threshold_adjusted(ds, ds, CFG, CostMatrix(1, 8))
        assert fit.decision_threshold == 1 / 9
        assert train_threshold_adjusted(ds, ds, CFG, SYMMETRIC).decision_threshold == 0.5


class TestDecisionRule:
    def test_symmetric_is_plain_half(self):
        net = init_network([2, 4, 1], 0)
        x = np.random.default_rng(0).normal(size=(50, 2))
        rule = threshold_adjusted_decision(net, SYMMETRIC)
        np.testing.assert_array_equal(rule(x), classify(predict_batch(net, x), 0.5))

    def test_costly_negatives_flag_more(self):
        net = init_network([2, 4, 1], 1)
        x = np.random.default_rng(1).normal(size=(200, 2))
        rule = threshold_adjusted_decision(net, CostMatrix(1, 8))
        assert rule.tau == pytest.approx(1 / 9, rel=1e-15)
        assert rule(x).sum() >= classify(predict_batch(net, x), 0.5).sum()
