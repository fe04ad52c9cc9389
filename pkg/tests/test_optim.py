import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from saddleplay.estimators import exact_gradient
from saddleplay.games import ROCK_PAPER_SCISSORS
from saddleplay.optim import (
    DegenerateStepError,
    LRSchedule,
    RmsProp,
    TheoryConfig,
    adaptive_lr,
    clip_grad_norm,
    eval_sample_size,
    pg_sample_size,
    project_simplex,
    rmsprop_step,
    sample_size_schedule,
    sgd_step,
)


class TestProjection:
    def test_fixed_points(self):
        np.testing.assert_allclose(project_simplex([0.5, 0.5]), [0.5, 0.5])
        np.testing.assert_allclose(project_simplex([1, 1]), [0.5, 0.5])
        np.testing.assert_allclose(project_simplex([2, 0]), [1.0, 0.0])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=6))
    def test_kkt_optimality(self, v):
        v = np.array(v)
        p = project_simplex(v)
        assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9
        for q in np.eye(len(v)):
            assert (v - p) @ (q - p) <= 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6))
    def test_idempotent(self, w):
        p = np.array(w) / sum(w)
        np.testing.assert_allclose(project_simplex(p), p, atol=1e-12)

    def test_matches_qp(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            v = rng.normal(size=4) * 2
            res = minimize(lambda p: ((p - v) ** 2).sum(), np.full(4, 0.25), method="SLSQP",
                           bounds=[(0, 1)] * 4, constraints={"type": "eq", "fun": lambda p: p.sum() - 1},
                           options={"ftol": 1e-14})
            np.testing.assert_allclose(project_simplex(v), res.x, atol=1e-6)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            project_simplex([np.nan, 1.0])


class TestSgd:
    def test_identity_cases(self):
        p = np.array([0.2, 0.8])
        np.testing.assert_allclose(sgd_step(p, [3.0, -1.0], 0.0), p)
        np.testing.assert_allclose(sgd_step(p, [0.0, 0.0], 0.5), p)

    def test_one_step_matches_hand_projection(self):
        x, y = np.array([0.5, 0.3, 0.2]), np.array([0.1, 0.1, 0.8])
        gx, gy = exact_gradient(ROCK_PAPER_SCISSORS, x, y)
        # gx = M y = (0.1 - 0.8, -0.1 + 0.8, 0.1 - 0.1) = (-0.7, 0.7, 0)
        np.testing.assert_allclose(gx, [-0.7, 0.7, 0.0])
        # x - 0.5 gx = (0.85, -0.05, 0.2); threshold theta = 0.025 over support {0, 2}
        np.testing.assert_allclose(sgd_step(x, gx, 0.5, +1), [0.825, 0.0, 0.175])
        # ascent for y: y + 0.5 gy with gy = M^T x = (-0.3 + 0.2, 0.5 - 0.2, -0.5 + 0.3)
        np.testing.assert_allclose(gy, [-0.1, 0.3, -0.2])
        np.testing.assert_allclose(sgd_step(y, gy, 0.5, -1), project_simplex(y + 0.5 * gy))

    def test_bad_sign(self):
        with pytest.raises(ValueError):
            sgd_step([1.0, 0.0], [0.0, 0.0], 0.1, sign=0)


class TestRmsProp:
    def test_zero_grad(self):
        st_ = RmsProp(acc=np.array([4.0]))
        new, p = rmsprop_step(st_, np.array([1.0]), np.array([0.0]), 0.1)
        assert p[0] == 1.0 and new.acc[0] == pytest.approx(0.99 * 4.0)
        assert st_.acc[0] == 4.0  # functional form leaves input state alone

    def test_first_step(self):
        _, p = rmsprop_step(RmsProp(), np.array([0.0]), np.array([1.0]), 0.1)
        assert p[0] == pytest.approx(-0.1 / math.sqrt(0.01 + 1e-8), rel=1e-12)

    def test_scalar_recurrence(self):
        state, p = RmsProp(), np.array([0.0])
        acc, q = 0.0, 0.0
        for _ in range(10):
            state, p = rmsprop_step(state, p, np.array([1.0]), 0.1)
            acc = 0.99 * acc + 0.01
            q -= 0.1 / math.sqrt(acc + 1e-8)
        assert p[0] == pytest.approx(q, rel=1e-12)
        assert state.acc[0] >= 0


class TestClipping:
    def test_direction_and_cap(self):
        g = [np.array([3.0, 4.0]), np.array([12.0])]
        (a, b), norm = clip_grad_norm(g, 1.0)
        assert norm == pytest.approx(13.0)
        assert math.sqrt((a**2).sum() + (b**2).sum()) == pytest.approx(1.0)
        np.testing.assert_allclose(np.concatenate([a, b]) * 13, np.concatenate(g))

    def test_small_untouched(self):
        (a,), _ = clip_grad_norm([np.array([0.1, 0.1])], 1.0)
        np.testing.assert_array_equal(a, [0.1, 0.1])


class TestAdaptiveLr:
    def test_formula(self):
        assert adaptive_lr(0.5, 0.1, 0.4, 0.6, 1.0) == pytest.approx(0.3)

    def test_alpha_zero(self):
        assert adaptive_lr(0.5, 0.1, 0.4, 0.6, 0.0) == 0.0

    def test_homogeneity(self):
        assert adaptive_lr(0.5, 0.1, 0.8, 1.2) == pytest.approx(adaptive_lr(0.5, 0.1, 0.4, 0.6) / 2)

    def test_degenerate(self):
        with pytest.raises(DegenerateStepError):
            adaptive_lr(0.5, 0.1, 0.0, 0.0)


class TestSampleSizes:
    def test_k0_value(self):
        cfg = TheoryConfig(R=1, B=1, D=1, d=2, eps=0.1, delta=0.1)
        assert sample_size_schedule(0, cfg) == math.ceil(200 * math.log(40)) == 738

    def test_monotone_increment(self):
        cfg = TheoryConfig(R=1, B=1, D=1, d=2, eps=0.1, delta=0.1)
        ms = [sample_size_schedule(k, cfg) for k in range(20)]
        assert all(b > a for a, b in zip(ms, ms[1:]))
        for a, b in zip(ms, ms[1:]):
            assert abs((b - a) - 200 * math.log(2)) <= 1

    def test_eps_scaling(self):
        a = TheoryConfig(R=1, B=1, D=1, d=2, eps=0.1, delta=0.1)
        b = TheoryConfig(R=1, B=1, D=1, d=2, eps=0.05, delta=0.1)
        assert sample_size_schedule(3, b) / sample_size_schedule(3, a) == pytest.approx(4, rel=1e-3)

    def test_closed_form_sizes(self):
        assert eval_sample_size(1, 0.1, 0.01) == math.ceil(200 * math.log(200))
        assert pg_sample_size(1, 2, 3, 0.1, 0.01) == math.ceil(800 * math.log(600))

    @pytest.mark.parametrize("kw", [dict(alpha=2.5), dict(D=0.5), dict(d=1), dict(eps=0), dict(delta=1.0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            TheoryConfig(**kw)


def test_lr_schedule():
    s = LRSchedule(0.1, "linear_to_zero", 10)
    assert s(0) == 0.1 and s(5) == pytest.approx(0.05) and s(10) == 0.0
    assert LRSchedule(0.1)(1000) == 0.1
    with pytest.raises(ValueError):
        LRSchedule(0.0)
