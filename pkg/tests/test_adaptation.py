import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from binid.adaptation import (
    AffineRegressorBuilder,
    TrackingMetrics,
    control_input,
    predict,
    regret,
    update_metrics,
)
from binid.errors import DimensionMismatch

finite = st.floats(-10, 10, allow_nan=False)
BUILDER = AffineRegressorBuilder.intercept_and_input()


class TestPredict:
    def test_inner_product(self):
        assert predict([1.0, -1.0], [1.0, 2.0]) == -1.0

    def test_zero_estimate_gives_mean(self):
        assert predict([0.0, 0.0], [3.0, -7.0], mean_next=0.4) == 0.4

    def test_initial_tracking_estimate(self):
        assert predict([1.0, 1.0], [1.0, 0.0]) == 1.0

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            predict([1.0, 2.0], [1.0])


class TestRegret:
    def test_exact_estimate(self):
        assert regret([0.5, -0.5], [0.5, -0.5], [3.0, 1.0]) == 0.0

    def test_orthogonal_error(self):
        assert regret([0.5, -0.5], [1.0, -1.0], [1.0, 1.0]) == 0.0

    def test_first_coordinate(self):
        assert regret([0.5, -0.5], [1.0, -1.0], [1.0, 0.0]) == 0.25

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            regret([1.0], [1.0, 2.0], [1.0, 2.0])

    @given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
           st.lists(finite, min_size=3, max_size=3), st.floats(-3, 3))
    @settings(max_examples=200, deadline=None)
    def test_is_excess_prediction_risk(self, theta, theta_hat, phi, m):
        # E[(y - yhat)^2] = var + R when y = theta.phi + v, E v = m
        y_opt = predict(theta, phi, m)
        y_hat = predict(theta_hat, phi, m)
        assert regret(theta, theta_hat, phi) == pytest.approx((y_opt - y_hat) ** 2, rel=1e-9, abs=1e-9)


class TestControl:
    def test_at_initial_estimate(self):
        u, clamped = control_input([1.0, 1.0], BUILDER, 1.0)
        assert u == 0.0 and not clamped

    def test_at_true_parameter(self):
        u, clamped = control_input([0.5, 0.8], BUILDER, 1.0)
        assert u == pytest.approx(0.625, abs=1e-15) and not clamped
        assert predict([0.5, 0.8], BUILDER(u)) == pytest.approx(1.0, abs=1e-15)

    def test_zero_gain_is_clamped(self):
        u, clamped = control_input([0.2, 0.0], BUILDER, 1.0, gain_floor=0.3)
        assert clamped
        assert u == pytest.approx((1.0 - 0.2) / 0.3)

    def test_negative_gain_keeps_sign(self):
        u, clamped = control_input([0.0, -0.1], BUILDER, 1.0)
        assert clamped and u == pytest.approx(-1.0 / 0.3)

    def test_floor_boundary_not_clamped(self):
        _, clamped = control_input([0.0, 0.3], BUILDER, 1.0)
        assert not clamped

    def test_rejects_zero_h(self):
        with pytest.raises(ValueError):
            AffineRegressorBuilder([1.0, 0.0], [0.0, 0.0])

    def test_rejects_bad_floor(self):
        with pytest.raises(ValueError):
            control_input([1.0, 1.0], BUILDER, 1.0, gain_floor=0.0)

    @given(finite, st.floats(0.3, 5), finite, st.floats(-2, 2))
    @settings(max_examples=300, deadline=None)
    def test_prediction_hits_reference(self, a, b, y_star, m):
        u, clamped = control_input([a, b], BUILDER, y_star, mean_next=m)
        assert not clamped
        assert predict([a, b], BUILDER(u), m) == pytest.approx(y_star, abs=1e-9)

    @given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
           st.lists(finite, min_size=3, max_size=3), finite)
    @settings(max_examples=200, deadline=None)
    def test_general_builder(self, theta_hat, g, h, y_star):
        assume(abs(np.dot(theta_hat, h)) >= 0.3)
        builder = AffineRegressorBuilder(g, h)
        u, clamped = control_input(theta_hat, builder, y_star)
        assert not clamped
        assert predict(theta_hat, builder(u)) == pytest.approx(y_star, rel=1e-6, abs=1e-6)


class TestMetrics:
    def test_perfect_tracking(self):
        m = TrackingMetrics()
        for k in range(1, 11):
            update_metrics(m, k, 1.0, 1.0, 1.0, 0.0, 0.0)
        assert m.J_n == 0.0

    def test_single_step(self):
        m = update_metrics(TrackingMetrics(), 1, 3.0, 1.0, 1.0, 0.0, 0.0)
        assert m.J_n == 4.0
        assert m.L_n is None and m.G_n is None

    def test_G_zero_when_exact(self):
        m = TrackingMetrics()
        for k in range(1, 50):
            update_metrics(m, k, 0.0, 0.0, 1.0, 0.0, 0.0)
            if k >= 2:
                assert m.G_n == 0.0

    def test_closed_forms(self):
        m = TrackingMetrics()
        ys = [1.5, 0.0, 2.0, 1.0]
        for k, y in enumerate(ys, start=1):
            update_metrics(m, k, y, 1.0, 0.5, 0.1 * k, 0.04)
        n = 4
        J = (0.25 + 1.0 + 1.0 + 0.0) / n
        assert m.J_n == pytest.approx(J)
        assert m.L_n == pytest.approx(abs(J - 0.5) * math.sqrt(n / math.log(math.log(n))))
        assert m.G_n == pytest.approx(0.04 * 2.0 / math.log(4))
        assert m.regret_over_log == pytest.approx(1.0 / math.log(4))
        assert m.regret_avg == pytest.approx(0.25)

    def test_step_order_enforced(self):
        m = update_metrics(TrackingMetrics(), 1, 0.0, 0.0, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            update_metrics(m, 3, 0.0, 0.0, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            update_metrics(TrackingMetrics(), 0, 0.0, 0.0, 1.0, 0.0, 0.0)

    def test_regret_decomposition(self):
        # with y* = theta_hat.phi, E(y - y*)^2 = sigma^2 + R, so J_n - mean sigma^2 ~ mean R
        rng = np.random.default_rng(12)
        theta = np.array([0.5, 0.8])
        theta_hat = np.array([0.7, 0.6])
        m = TrackingMetrics()
        n = 200_000
        for k in range(1, n + 1):
            phi = np.array([1.0, rng.uniform(-1, 1)])
            y = theta @ phi + rng.standard_normal()
            update_metrics(m, k, y, float(theta_hat @ phi), 1.0, regret(theta, theta_hat, phi), 0.0)
        excess = m.J_n - m.sigma_sq_sum / n
        assert excess == pytest.approx(m.regret_avg, abs=5 * math.sqrt(2.0 / n) + 0.005)
