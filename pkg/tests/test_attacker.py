import numpy as np
import pytest

from klreplay.attacker import (
    AttackSchedule,
    ReplayAttacker,
    intercept,
    observe,
    replay_index,
    stealthiness_classification,
    virtual_gain_matrix,
)
from klreplay.controller import LqgDesign, design_lqg
from klreplay.errors import EmptyBuffer, UsageError, ValidationError
from klreplay.estimator import SteadyStateGains, compute_steady_gains
from klreplay.plant import SystemModel


def feed(attacker, ys):
    return [intercept(observe(attacker, k, y), k, y) for k, y in enumerate(ys)]


def zero_design(p, n):
    return LqgDesign(R=np.eye(n), M=np.zeros((p, n)), F=np.eye(n), G=np.eye(p), closed_loop_radius=0.0)


class TestObserve:
    def test_before_recording_window(self):
        a = ReplayAttacker(record_from=5, attack_start=8)
        for k in range(5):
            observe(a, k, [float(k)])
        assert a.buffer == []

    def test_records_first_ten(self):
        a = ReplayAttacker(record_from=0, attack_start=10)
        for k in range(15):
            observe(a, k, [float(k)])
        assert len(a.buffer) == 10
        assert [b[0] for b in a.buffer] == list(range(10))

    def test_repeated_step_rejected(self):
        a = ReplayAttacker(record_from=0, attack_start=10)
        observe(a, 3, [1.0])
        with pytest.raises(UsageError):
            observe(a, 3, [1.0])


class TestIntercept:
    def test_identity_before_attack(self):
        a = ReplayAttacker(record_from=0, attack_start=10)
        ys = [np.array([float(k)]) for k in range(10)]
        for y, out in zip(ys, feed(a, ys)):
            np.testing.assert_array_equal(out, y)

    def test_paper_schedule(self):
        a = ReplayAttacker(record_from=0, attack_start=10)
        ys = [np.array([100.0 + k]) for k in range(25)]
        out = feed(a, ys)
        assert out[10][0] == 100.0
        assert out[19][0] == 109.0
        assert out[20][0] == 100.0

    def test_hold_last_without_wrap(self):
        a = ReplayAttacker(record_from=0, attack_start=10, wrap=False)
        out = feed(a, [np.array([float(k)]) for k in range(40)])
        assert [o[0] for o in out[19:]] == [9.0] * 21

    def test_delivers_time_shifted_measurement(self):
        a = ReplayAttacker(record_from=2, attack_start=7)
        out = feed(a, [np.array([float(k)]) for k in range(12)])
        for k in range(7, 12):
            assert out[k][0] == k - a.time_shift

    def test_disabled_is_identity(self):
        a = ReplayAttacker.from_schedule(AttackSchedule(mode="none"))
        ys = [np.array([float(k)]) for k in range(30)]
        assert [o[0] for o in feed(a, ys)] == list(range(30))

    def test_empty_buffer(self):
        a = ReplayAttacker(record_from=5, attack_start=10)
        observe(a, 10, [0.0])
        with pytest.raises(EmptyBuffer):
            intercept(a, 10, [0.0])

    def test_intercept_returns_copy(self):
        a = ReplayAttacker(record_from=0, attack_start=1)
        observe(a, 0, [1.0])
        observe(a, 1, [2.0])
        out = intercept(a, 1, [2.0])
        out[0] = 99.0
        assert a.buffer[0][0] == 1.0


class TestSchedule:
    def test_record_must_precede_attack(self):
        with pytest.raises(ValidationError):
            AttackSchedule(mode="replay", record_from=5, attack_start=5)

    def test_unknown_mode(self):
        with pytest.raises(ValidationError):
            AttackSchedule(mode="inject")

    @pytest.mark.parametrize("k,expected", [(10, 0), (19, 9), (20, 0), (35, 5)])
    def test_replay_index_wrap(self, k, expected):
        assert replay_index(k, 0, 10, 10, True) == expected

    def test_replay_index_hold(self):
        assert replay_index(50, 3, 10, 7, False) == 9


class TestVirtualGain:
    def test_open_loop_without_updates(self):
        A = np.array([[0.9, 0.2], [-0.2, 0.9]])
        model = SystemModel(A=A, B=np.eye(2), C=np.eye(2), W=np.eye(2), V=np.eye(2))
        gains = SteadyStateGains(P=np.eye(2), K=np.eye(2), Sigma=2 * np.eye(2), beta=0.0)
        np.testing.assert_allclose(virtual_gain_matrix(model, zero_design(2, 2), gains), A)

    def test_golden_ratio_loop(self, scalar):
        d = design_lqg(scalar)
        g = compute_steady_gains(scalar, 1.0)
        lam = virtual_gain_matrix(scalar, d, g)
        assert lam[0, 0] == pytest.approx((1 - 0.6180340) ** 2, abs=1e-6)
        assert lam[0, 0] == pytest.approx(0.1459, abs=1e-4)
        assert stealthiness_classification(scalar, d, g) == "stealthy"

    def test_perfect_update_annihilates(self):
        model = SystemModel(A=np.eye(2), B=np.eye(2), C=np.eye(2), W=np.eye(2), V=np.eye(2))
        gains = SteadyStateGains(P=np.eye(2), K=np.eye(2), Sigma=2 * np.eye(2), beta=1.0)
        np.testing.assert_array_equal(virtual_gain_matrix(model, zero_design(2, 2), gains), 0.0)
        assert stealthiness_classification(model, zero_design(2, 2), gains) == "stealthy"

    def test_unstable_replay_operator_is_detectable(self):
        model = SystemModel(A=[[1.5]], B=[[0.0]], C=[[1.0]], W=[[1.0]], V=[[1.0]])
        gains = SteadyStateGains(P=np.eye(1), K=np.eye(1), Sigma=np.eye(1), beta=0.0)
        assert stealthiness_classification(model, zero_design(1, 1), gains) == "detectable"
