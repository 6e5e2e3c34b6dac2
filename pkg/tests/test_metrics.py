import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairminmax.metrics import (
    MetricError,
    PredictionSet,
    accuracy,
    auc_pairwise,
    auc_trapezoid,
    delta_dp,
    delta_eo,
    groupwise_roc_auc,
    roc_curve,
)

from _oracles import auc_by_pairs


def hard(labels_pred, y, z):
    return PredictionSet(np.asarray(labels_pred, dtype=float), y, z)


def test_dp_identical_rates():
    p = hard([1, 0, 1, 0], [0, 0, 0, 0], [0, 0, 1, 1])
    assert delta_dp(p) == 0.0


def test_dp_two_groups_hand_count():
    pred = [1] * 6 + [0] * 4 + [1] * 4 + [0] * 6
    z = [0] * 10 + [1] * 10
    assert delta_dp(hard(pred, [0] * 20, z)) == pytest.approx(0.2, abs=1e-15)


def test_dp_three_groups_pairwise_sum():
    pred = [1, 0, 0, 0, 0] + [1, 1, 0, 0] + [1, 1, 1, 1, 0]
    z = [0] * 5 + [1] * 4 + [2] * 5
    # rates 0.2, 0.5, 0.8
    assert delta_dp(hard(pred, [0] * 14, z)) == pytest.approx(0.3 + 0.6 + 0.3, abs=1e-15)


def test_dp_soft_mode_uses_means():
    p = PredictionSet([0.2, 0.4, 0.9, 0.7], [0, 1, 0, 1], [0, 0, 1, 1])
    assert delta_dp(p, "soft") == pytest.approx(0.5)
    assert delta_dp(p, "hard") == 1.0


def test_dp_empty_group():
    p = PredictionSet([0.2, 0.4], [0, 1], [0, 0], n_groups=2)
    with pytest.raises(MetricError, match="group 1"):
        delta_dp(p)


def test_eo_independent_within_slices():
    pred = [1, 0, 1, 0, 1, 1, 1, 1]
    y = [0, 0, 0, 0, 1, 1, 1, 1]
    z = [0, 0, 1, 1, 0, 0, 1, 1]
    assert delta_eo(hard(pred, y, z)) == 0.0


def test_eo_two_groups_hand_sum():
    # y=1 slice: rates 0.9 / 0.7, y=0 slice: 0.2 / 0.4
    pred = [1] * 9 + [0] + [1] * 7 + [0] * 3 + [1] * 2 + [0] * 8 + [1] * 4 + [0] * 6
    y = [1] * 20 + [0] * 20
    z = [0] * 10 + [1] * 10 + [0] * 10 + [1] * 10
    assert delta_eo(hard(pred, y, z)) == pytest.approx(0.4, abs=1e-15)


def test_eo_single_group():
    assert delta_eo(hard([1, 0, 1], [1, 0, 0], [0, 0, 0])) == 0.0


def test_eo_empty_cell_named():
    with pytest.raises(MetricError, match="group 1, y=0"):
        delta_eo(hard([1, 0, 1], [1, 0, 1], [0, 0, 1]))


def test_accuracy_examples():
    y = np.array([1, 1, 1, 0])
    assert accuracy(hard([1, 1, 1, 0], y, [0] * 4)) == 1.0
    assert accuracy(hard([1, 0, 1, 0], y, [0] * 4)) == 0.75
    assert accuracy(hard([0, 1, 0, 1], y, [0] * 4)) == 0.25


def test_threshold_tie_is_positive():
    p = PredictionSet([0.5, 0.49], [1, 0], [0, 0])
    assert list(p.hard_labels) == [1, 0]


def test_auc_examples():
    s = np.array([0.1, 0.4, 0.35, 0.8])
    y = np.array([0, 0, 1, 1])
    fpr, tpr = roc_curve(s, y)
    assert auc_trapezoid(fpr, tpr) == pytest.approx(0.75, abs=1e-15)
    assert auc_by_pairs(s, y) == 0.75
    assert auc_trapezoid(*roc_curve([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])) == 1.0
    assert auc_trapezoid(*roc_curve([0.3] * 6, [0, 1, 0, 1, 1, 0])) == 0.5


def test_roc_endpoints():
    fpr, tpr = roc_curve([0.2, 0.7, 0.7, 0.1], [1, 0, 1, 0])
    assert (fpr[0], tpr[0]) == (0.0, 0.0) and (fpr[-1], tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)


def test_groupwise_auc():
    s = [0.1, 0.4, 0.35, 0.8, 0.9, 0.2, 0.6, 0.7]
    y = [0, 0, 1, 1, 1, 0, 0, 1]
    z = [0, 0, 0, 0, 1, 1, 1, 1]
    out = groupwise_roc_auc(PredictionSet(s, y, z))
    assert out[0][1] == pytest.approx(0.75)
    assert out[1][1] == pytest.approx(1.0)


def test_groupwise_auc_single_class_group():
    with pytest.raises(MetricError, match="group 1"):
        groupwise_roc_auc(PredictionSet([0.1, 0.9, 0.3], [0, 1, 1], [0, 0, 1]))


def test_trapezoid_equals_pair_count_random(rng):
    for _ in range(200):
        n = int(rng.integers(2, 40))
        s = rng.integers(0, 6, size=n) / 5.0  # plenty of ties
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        a = auc_trapezoid(*roc_curve(s, y))
        assert abs(a - auc_by_pairs(s, y)) < 1e-12
        assert abs(auc_pairwise(s, y) - auc_by_pairs(s, y)) < 1e-12


def test_dp_equals_total_variation_for_two_groups(rng):
    s = rng.uniform(size=300)
    z = rng.integers(0, 2, size=300)
    p = PredictionSet(s, np.zeros(300), z)
    h = p.hard_labels
    dist = [np.bincount(h[z == g], minlength=2) / (z == g).sum() for g in (0, 1)]
    tv = 0.5 * np.abs(dist[0] - dist[1]).sum()
    assert delta_dp(p) == pytest.approx(tv, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_metrics_permutation_invariant_and_bounded(data):
    n = data.draw(st.integers(12, 60))
    seed = data.draw(st.integers(0, 2**31 - 1))
    r = np.random.default_rng(seed)
    g = int(data.draw(st.integers(1, 3)))
    s = r.uniform(size=n)
    y = np.tile([0, 1], n)[:n]
    z = np.repeat(np.arange(g), 2)[np.arange(n) % (2 * g)]
    p = PredictionSet(s, y, z, n_groups=g)
    perm = r.permutation(n)
    q = PredictionSet(s[perm], y[perm], z[perm], n_groups=g)
    pairs = g * (g - 1) / 2
    for mode in ("hard", "soft"):
        assert delta_dp(p, mode) == pytest.approx(delta_dp(q, mode), abs=1e-12)
        assert delta_eo(p, mode) == pytest.approx(delta_eo(q, mode), abs=1e-12)
        assert 0 <= delta_dp(p, mode) <= pairs + 1e-12
        assert 0 <= delta_eo(p, mode) <= 2 * pairs + 1e-12
    assert accuracy(p) == accuracy(q)


def test_length_mismatch():
    with pytest.raises(MetricError):
        PredictionSet([0.1, 0.2], [0], [0, 0])
