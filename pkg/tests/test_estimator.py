import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from klreplay.errors import DimensionMismatch, NonConvergence
from klreplay.estimator import (
    FilterState,
    SteadyStateGains,
    compute_steady_gains,
    initial_filter_state,
    predict,
    update,
)
from klreplay.numerics import SolverOptions
from klreplay.plant import SystemModel
from oracles import PHI, lyapunov_kron, scalar_dropout_riccati


def scalar(a=1.0, b=1.0, c=1.0, w=1.0, v=1.0):
    return SystemModel(A=[[a]], B=[[b]], C=[[c]], W=[[w]], V=[[v]])


class TestSteadyGains:
    def test_golden_ratio(self, scalar):
        g = compute_steady_gains(scalar, 1.0)
        assert g.P[0, 0] == pytest.approx(PHI, abs=1e-9)
        assert g.K[0, 0] == pytest.approx(PHI / (PHI + 1), abs=1e-9)
        assert g.Sigma[0, 0] == pytest.approx(PHI + 1, abs=1e-9)

    def test_no_measurement_reduces_to_lyapunov(self):
        A = np.array([[0.5, 0.2], [0.0, 0.3]])
        model = SystemModel(A=A, B=np.eye(2), C=np.zeros((1, 2)), W=np.eye(2), V=[[1.0]])
        g = compute_steady_gains(model, 1.0)
        np.testing.assert_array_equal(g.K, 0.0)
        np.testing.assert_allclose(g.P, lyapunov_kron(A, np.eye(2)), atol=1e-9)
        np.testing.assert_allclose(g.Sigma, [[1.0]])

    def test_dropout_inflates_covariance(self):
        model = scalar(a=0.5)
        assert compute_steady_gains(model, 1.0).P[0, 0] < compute_steady_gains(model, 0.5).P[0, 0]

    @given(
        a=st.floats(0.1, 1.3),
        w=st.floats(0.1, 5.0),
        v=st.floats(0.1, 5.0),
        beta=st.floats(0.6, 1.0),
    )
    def test_scalar_quadratic_oracle(self, a, w, v, beta):
        g = compute_steady_gains(scalar(a=a, w=w, v=v), beta)
        assert g.P[0, 0] == pytest.approx(scalar_dropout_riccati(a, 1.0, w, v, beta), rel=1e-8)

    def test_gain_consistency(self, two_state):
        g = compute_steady_gains(two_state, 0.8)
        np.testing.assert_allclose(g.K, g.P @ two_state.C.T @ np.linalg.inv(g.Sigma), atol=1e-12)
        np.testing.assert_allclose(g.Sigma, two_state.C @ g.P @ two_state.C.T + two_state.V)

    def test_fixed_point_idempotent(self, two_state):
        g = compute_steady_gains(two_state, 0.7)
        A, C, W = two_state.A, two_state.C, two_state.W
        P_next = A @ (g.P - g.beta * g.K @ C @ g.P) @ A.T + W
        assert np.max(np.abs(P_next - g.P)) < 1e-10

    def test_posterior_covariance(self, scalar):
        g = compute_steady_gains(scalar, 1.0)
        assert g.posterior_covariance[0, 0] == pytest.approx(PHI - 1.0, abs=1e-9)

    def test_unstable_plant_with_heavy_dropout_fails(self):
        # the iteration diverges once a^2 (1 - beta) >= 1
        with pytest.raises(NonConvergence):
            compute_steady_gains(scalar(a=2.0), 0.2, SolverOptions(max_iterations=20000))

    @pytest.mark.parametrize("beta", [0.0, -0.1, 1.5])
    def test_beta_range(self, scalar, beta):
        with pytest.raises(ValueError):
            compute_steady_gains(scalar, beta)


class TestPredict:
    def test_identity_dynamics(self, two_state):
        model = SystemModel(A=np.eye(2), B=np.eye(2), C=np.eye(2), W=np.eye(2), V=np.eye(2))
        s = predict(FilterState(np.zeros(2), np.array([1.0, 2.0])), model, np.zeros(2))
        np.testing.assert_array_equal(s.x_pred, [1.0, 2.0])

    def test_zero_dynamics(self):
        model = SystemModel(A=np.zeros((2, 2)), B=[[1.0], [2.0]], C=np.eye(2), W=np.eye(2), V=np.eye(2))
        s = predict(FilterState(np.zeros(2), np.array([5.0, 5.0])), model, np.array([3.0]))
        np.testing.assert_array_equal(s.x_pred, [3.0, 6.0])

    def test_scalar_arithmetic(self, scalar):
        s = predict(FilterState(np.zeros(1), np.array([2.0])), scalar, np.array([-1.0]))
        assert s.x_pred[0] == 1.0
        assert s.k == 1

    def test_dimension_mismatch(self, scalar):
        with pytest.raises(DimensionMismatch):
            predict(FilterState(np.zeros(1), np.zeros(1)), scalar, np.zeros(3))


class TestUpdate:
    gains = SteadyStateGains(P=np.array([[PHI]]), K=np.array([[0.618]]), Sigma=np.array([[PHI + 1]]), beta=1.0)

    def test_zero_innovation(self, scalar):
        s, z = update(FilterState(np.array([0.7]), np.array([0.7])), scalar, self.gains, True, [0.7])
        assert z[0] == 0.0
        assert s.x_est[0] == 0.7

    def test_lost_packet(self, scalar):
        s, z = update(FilterState(np.array([0.0]), np.zeros(1)), scalar, self.gains, False, [1.0], "bernoulli")
        assert s.x_est[0] == 0.0
        assert z[0] == 1.0

    def test_golden_gain_arithmetic(self, scalar):
        s, z = update(FilterState(np.zeros(1), np.zeros(1)), scalar, self.gains, True, [1.0])
        assert s.x_est[0] == pytest.approx(0.618)

    def test_fixed_mode_scales_by_beta(self, scalar):
        g = SteadyStateGains(P=self.gains.P, K=self.gains.K, Sigma=self.gains.Sigma, beta=0.5)
        s, _ = update(FilterState(np.zeros(1), np.zeros(1)), scalar, g, False, [1.0], "fixed")
        assert s.x_est[0] == pytest.approx(0.309)

    def test_measurement_dimension(self, scalar):
        with pytest.raises(DimensionMismatch):
            update(FilterState(np.zeros(1), np.zeros(1)), scalar, self.gains, True, [1.0, 2.0])

    def test_unknown_mode(self, scalar):
        with pytest.raises(ValueError):
            update(FilterState(np.zeros(1), np.zeros(1)), scalar, self.gains, True, [1.0], "sometimes")


def test_initial_state_defaults_to_zero(two_state):
    s = initial_filter_state(two_state)
    np.testing.assert_array_equal(s.x_pred, 0.0)
    np.testing.assert_array_equal(s.x_est, 0.0)
