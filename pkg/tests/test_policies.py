import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddleplay.policies import (
    SimplexPolicy,
    TabularSoftmaxPolicy,
    ValueTable,
    action_distribution,
    entropy,
    entropy_gradient,
    load_checkpoint,
    log_prob_gradient,
    sample_action,
    save_checkpoint,
    softmax,
)


def test_zero_logits_uniform():
    pol = TabularSoftmaxPolicy.zeros(10)
    np.testing.assert_allclose(action_distribution(pol, 3), np.full(5, 0.2))


def test_large_logit_is_one_hot():
    logits = np.zeros((1, 5))
    logits[0] = -1e6
    logits[0, 2] = 0.0
    np.testing.assert_array_equal(action_distribution(TabularSoftmaxPolicy(logits), 0), np.eye(5)[2])


def test_simplex_returns_p():
    p = np.array([0.1, 0.6, 0.3])
    np.testing.assert_array_equal(action_distribution(SimplexPolicy(p), 0), p)


def test_out_of_range_observation():
    with pytest.raises(IndexError):
        action_distribution(TabularSoftmaxPolicy.zeros(4), 4)
    with pytest.raises(IndexError):
        action_distribution(SimplexPolicy([0.5, 0.5]), 1)


def test_simplex_validation():
    with pytest.raises(ValueError):
        SimplexPolicy([0.6, 0.6])
    with pytest.raises(ValueError):
        SimplexPolicy([1.1, -0.1])


def test_sample_one_hot_always():
    pol = SimplexPolicy([0.0, 1.0, 0.0])
    rng = np.random.default_rng(0)
    assert {sample_action(pol, 0, rng) for _ in range(200)} == {1}


def test_sample_uniform_frequencies():
    pol = TabularSoftmaxPolicy.zeros(1)
    acts = pol.sample_batch(np.zeros(100_000, dtype=int), np.random.default_rng(1))
    np.testing.assert_allclose(np.bincount(acts, minlength=5) / acts.size, 0.2, atol=0.01)


def test_sample_seeded():
    pol = TabularSoftmaxPolicy(np.random.default_rng(0).normal(size=(3, 5)))
    assert sample_action(pol, 2, np.random.default_rng(7)) == sample_action(pol, 2, np.random.default_rng(7))


def test_log_prob_gradient_uniform_softmax():
    pol = TabularSoftmaxPolicy.zeros(4)
    g = log_prob_gradient(pol, 2, 3)
    expected = np.zeros((4, 5))
    expected[2] = np.eye(5)[3] - 0.2
    np.testing.assert_allclose(g, expected)


def test_log_prob_gradient_simplex():
    np.testing.assert_array_equal(log_prob_gradient(SimplexPolicy([0.5, 0.5]), 0, 0), [2.0, 0.0])


def test_log_prob_gradient_zero_probability():
    with pytest.raises(ValueError):
        log_prob_gradient(SimplexPolicy([1.0, 0.0]), 0, 1)


def test_probability_floor_caps_score():
    g = log_prob_gradient(SimplexPolicy([1 - 1e-12, 1e-12]), 0, 1)
    assert g[1] == pytest.approx(1e8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_log_prob_gradient_finite_difference(seed):
    rng = np.random.default_rng(seed)
    pol = TabularSoftmaxPolicy(rng.normal(size=(3, 5)))
    s, a = int(rng.integers(3)), int(rng.integers(5))
    d = rng.normal(size=(3, 5))
    h = 1e-6

    def logp(L):
        return math.log(softmax(L[s])[a])

    fd = (logp(pol.logits + h * d) - logp(pol.logits - h * d)) / (2 * h)
    assert fd == pytest.approx(float((log_prob_gradient(pol, s, a) * d).sum()), abs=1e-5)


def test_simplex_score_finite_difference():
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(4))
    for a in range(4):
        d = rng.normal(size=4)
        h = 1e-7
        fd = (math.log(p[a] + h * d[a]) - math.log(p[a] - h * d[a])) / (2 * h)
        assert fd == pytest.approx(log_prob_gradient(SimplexPolicy(p), 0, a) @ d, abs=1e-5)


def test_score_expectation_zero_softmax():
    pol = TabularSoftmaxPolicy(np.random.default_rng(2).normal(size=(2, 5)))
    pi = pol.probs(1)
    total = sum(pi[a] * log_prob_gradient(pol, 1, a) for a in range(5))
    np.testing.assert_allclose(total, 0.0, atol=1e-15)


def test_score_expectation_simplex_monte_carlo():
    # With direct parameterisation E[score] = (1, ..., 1), which is normal to
    # the simplex; its projection onto the tangent space has mean zero.
    pol = SimplexPolicy([0.2, 0.3, 0.5])
    acts = pol.sample_batch(np.zeros(100_000, dtype=int), np.random.default_rng(4))
    scores = pol.score(acts)
    se = scores.std(axis=0, ddof=1) / math.sqrt(len(acts))
    assert np.all(np.abs(scores.mean(axis=0) - 1.0) <= 3 * se)
    tangent = scores - scores.mean(axis=1, keepdims=True)
    t_se = tangent.std(axis=0, ddof=1) / math.sqrt(len(acts))
    assert np.all(np.abs(tangent.mean(axis=0)) <= 3 * t_se)


def test_entropy_limits():
    assert entropy(TabularSoftmaxPolicy.zeros(1), 0) == pytest.approx(math.log(5))
    assert entropy(SimplexPolicy([1.0, 0.0, 0.0]), 0) == 0.0


def test_entropy_gradient_finite_difference():
    rng = np.random.default_rng(5)
    pol = TabularSoftmaxPolicy(rng.normal(size=(2, 5)))
    d = rng.normal(size=(2, 5))
    h = 1e-6
    hp = entropy(TabularSoftmaxPolicy(pol.logits + h * d), 1)
    hm = entropy(TabularSoftmaxPolicy(pol.logits - h * d), 1)
    assert (hp - hm) / (2 * h) == pytest.approx(float((entropy_gradient(pol, 1) * d).sum()), abs=1e-5)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    parts = {
        "x": TabularSoftmaxPolicy(rng.normal(size=(7, 5))),
        "y": SimplexPolicy(rng.dirichlet(np.ones(3))),
        "vx": ValueTable(rng.normal(size=7)),
    }
    meta = {"k": 3, "agent": 1, "seed": 42}
    save_checkpoint(tmp_path / "a.ckpt", parts, meta)
    loaded, m2 = load_checkpoint(tmp_path / "a.ckpt")
    assert m2 == meta
    np.testing.assert_array_equal(loaded["x"].logits, parts["x"].logits)
    np.testing.assert_array_equal(loaded["y"].p, parts["y"].p)
    np.testing.assert_array_equal(loaded["vx"].v, parts["vx"].v)
    save_checkpoint(tmp_path / "b.ckpt", parts, meta)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "bad")
