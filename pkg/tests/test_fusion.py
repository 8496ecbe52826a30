import math

import numpy as np
import pytest

from vlpfleet import fusion
from vlpfleet.fusion import (FusedState, OdometryDelta, ProcessNoise,
                             SingularInnovation, predict, update_vlp)
from vlpfleet.pose_estimator import PositionFix


def fix_at(x, y, sigma=0.01, t=0.0):
    return PositionFix(x=x, y=y, sigma=sigma, t=t, led_id=1)


def test_zero_motion_keeps_mean_and_floors_cov():
    state = FusedState.at(1.0, 2.0, 0.5)
    out = predict(state, OdometryDelta(v=0.0, omega=0.0, dt=0.1))
    assert np.allclose(out.mean, state.mean)
    assert np.all(np.diag(out.cov) >= np.diag(state.cov))
    assert np.allclose(np.diag(out.cov) - np.diag(state.cov), fusion.COV_FLOOR)


def test_straight_line_prediction():
    state = FusedState.at(0.0, 0.0, 0.0)
    out = predict(state, OdometryDelta(v=0.22, omega=0.0, dt=1.0))
    assert out.mean[0] == pytest.approx(0.22)
    assert out.mean[1] == pytest.approx(0.0)
    assert out.cov[0, 0] > state.cov[0, 0]


def test_theta_wraps():
    state = FusedState.at(0.0, 0.0, 3.0)
    out = predict(state, OdometryDelta(v=0.0, omega=3.0, dt=1.0))
    assert -math.pi < out.mean[2] <= math.pi


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(17)
    eps = 1e-7
    for _ in range(100):
        mean = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3)])
        u = OdometryDelta(v=float(rng.uniform(-0.3, 0.3)),
                          omega=float(rng.uniform(-2, 2)),
                          dt=float(rng.uniform(0.01, 0.2)))
        jac = fusion.motion_jacobian(mean, u)
        fd = np.zeros((3, 3))
        for j in range(3):
            plus = mean.copy()
            plus[j] += eps
            minus = mean.copy()
            minus[j] -= eps
            diff = fusion.motion_model(plus, u) - fusion.motion_model(minus, u)
            # theta difference may wrap; renormalize
            diff[2] = math.atan2(math.sin(diff[2]), math.cos(diff[2]))
            fd[:, j] = diff / (2 * eps)
        assert np.max(np.abs(jac - fd)) <= 1e-6


def test_update_with_zero_innovation_shrinks_position_cov():
    state = FusedState.at(1.0, 1.0, 0.0, sigma_xy=0.1)
    out, accepted = update_vlp(state, fix_at(1.0, 1.0, sigma=0.01))
    assert accepted
    assert out.mean[0] == pytest.approx(1.0)
    assert out.mean[1] == pytest.approx(1.0)
    before = np.trace(state.cov[:2, :2])
    after = np.trace(out.cov[:2, :2])
    assert after < before


def test_tiny_sigma_pulls_to_fix():
    state = FusedState.at(0.0, 0.0, 0.0, sigma_xy=0.5)
    out, accepted = update_vlp(state, fix_at(0.3, -0.2, sigma=1e-6))
    assert accepted
    assert out.mean[0] == pytest.approx(0.3, abs=1e-4)
    assert out.mean[1] == pytest.approx(-0.2, abs=1e-4)


def test_gate_rejects_distant_fix():
    state = FusedState.at(0.0, 0.0, 0.0, sigma_xy=0.01)
    out, accepted = update_vlp(state, fix_at(1.0, 0.0, sigma=0.01))
    assert not accepted
    assert np.allclose(out.mean, state.mean)
    assert np.allclose(out.cov, state.cov)


def test_singular_innovation_raises():
    state = FusedState(mean=np.zeros(3), cov=np.full((3, 3), np.nan))
    with pytest.raises(SingularInnovation):
        update_vlp(state, fix_at(0.0, 0.0, sigma=1.0))


def test_rejects_nonpositive_sigma():
    state = FusedState.at(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        update_vlp(state, fix_at(0.0, 0.0, sigma=0.0))


def test_one_predict_one_update_against_naive_oracle():
    # independent scalar-by-scalar Kalman computation, no shared code
    sigma_v, sigma_w, dt = 0.02, 0.03, 0.1
    x0 = np.array([1.0, 2.0, 0.3])
    p0 = np.diag([0.04, 0.09, 0.01])
    v, omega = 0.2, 0.5
    zx, zy, sz = 1.1, 1.95, 0.05

    state = FusedState(mean=x0.copy(), cov=p0.copy())
    state = predict(state, OdometryDelta(v=v, omega=omega, dt=dt),
                    ProcessNoise(sigma_v=sigma_v, sigma_omega=sigma_w, inflation=1.0))
    out, accepted = update_vlp(state, fix_at(zx, zy, sigma=sz))
    assert accepted

    # oracle: explicit matrix arithmetic written element by element
    c, s = math.cos(x0[2]), math.sin(x0[2])
    xm = np.array([x0[0] + v * dt * c, x0[1] + v * dt * s, x0[2] + omega * dt])
    F = np.array([[1, 0, -v * dt * s], [0, 1, v * dt * c], [0, 0, 1]])
    Q = np.diag([(sigma_v * dt) ** 2 + 1e-10] * 2 + [(sigma_w * dt) ** 2 + 1e-10])
    Pm = F @ p0 @ F.T + Q
    H = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    S = H @ Pm @ H.T + sz ** 2 * np.eye(2)
    K = Pm @ H.T @ np.linalg.inv(S)
    innov = np.array([zx - xm[0], zy - xm[1]])
    x_post = xm + K @ innov
    P_post = (np.eye(3) - K @ H) @ Pm @ (np.eye(3) - K @ H).T + K @ (sz ** 2 * np.eye(2)) @ K.T

    assert np.allclose(out.mean, x_post, atol=1e-12)
    assert np.allclose(out.cov, P_post, atol=1e-12)


def test_covariance_stays_symmetric_psd_over_random_sequences():
    rng = np.random.default_rng(23)
    state = FusedState.at(0.0, 0.0, 0.0)
    for step in range(2000):
        u = OdometryDelta(v=float(rng.uniform(-0.25, 0.25)),
                          omega=float(rng.uniform(-2.0, 2.0)),
                          dt=float(rng.uniform(0.01, 0.1)))
        state = predict(state, u)
        if step % 3 == 0:
            fix = fix_at(state.mean[0] + rng.normal(0, 0.02),
                         state.mean[1] + rng.normal(0, 0.02),
                         sigma=float(rng.uniform(0.005, 0.05)))
            state, _ = update_vlp(state, fix)
        assert np.allclose(state.cov, state.cov.T)
        assert np.linalg.eigvalsh(state.cov).min() >= -1e-9
        assert -math.pi < state.mean[2] <= math.pi


def test_accepted_update_never_grows_position_cov():
    rng = np.random.default_rng(29)
    state = FusedState.at(0.0, 0.0, 0.0, sigma_xy=0.2, sigma_theta=0.1)
    for _ in range(200):
        state = predict(state, OdometryDelta(v=0.2, omega=0.1, dt=0.1))
        fix = fix_at(state.mean[0] + rng.normal(0, 0.01),
                     state.mean[1] + rng.normal(0, 0.01), sigma=0.02)
        before = np.trace(state.cov[:2, :2])
        state, accepted = update_vlp(state, fix)
        if accepted:
            assert np.trace(state.cov[:2, :2]) <= before + 1e-12
