import numpy as np
import pytest

from mtt.kalman import (
    KalmanState,
    MotionNoise,
    kalman_init,
    kalman_predict,
    kalman_update,
    measurement_from_box,
    rts_smooth,
)

QUIET = MotionNoise(q_pos=0.0, q_vel=0.0, r=0.0)


def cv_boxes(n, start=(10.0, 20.0, 40.0, 80.0), vel=(3.0, -2.0, 0.5, 0.0)):
    return [tuple(s + v * t for s, v in zip(start, vel)) for t in range(n)]


def state(pos, vel):
    mean = np.array([pos[0], pos[1], 10.0, 10.0, vel[0], vel[1], 0.0, 0.0])
    return KalmanState(mean, np.eye(8), 0)


def test_predict_constant_velocity():
    ks = kalman_predict(state((0, 0), (1, 0)), 1)
    np.testing.assert_allclose(ks.mean[:2], [1, 0])
    ks3 = kalman_predict(state((0, 0), (1, 0)), 3)
    np.testing.assert_allclose(ks3.mean[:2], [3, 0])
    assert ks3.frame == 3


def test_predict_covariance_grows_with_gap():
    base = state((0, 0), (1, 0))
    traces = [np.trace(kalman_predict(base, dt).cov) for dt in (1, 2, 3, 5)]
    assert all(a < b for a, b in zip(traces, traces[1:]))


def test_update_at_prediction_has_zero_innovation():
    ks = kalman_init((0, 0, 10, 20), 1)
    ks = kalman_predict(ks, 1)
    _, innov, _ = kalman_update(ks, ks.box)
    np.testing.assert_allclose(innov, 0.0, atol=1e-12)


def test_update_shrinks_measured_covariance():
    ks = kalman_predict(kalman_init((0, 0, 10, 20), 1), 1)
    post, _, _ = kalman_update(ks, (3, 1, 11, 19))
    diff = ks.cov[:4, :4] - post.cov[:4, :4]
    assert np.all(np.linalg.eigvalsh(diff) >= -1e-9)
    np.linalg.cholesky(post.cov)


def test_repeated_identical_observation_converges():
    obs = (50.0, 60.0, 30.0, 40.0)
    ks = kalman_init((0, 0, 10, 10), 1)
    for _ in range(20):
        ks = kalman_predict(ks, 1)
        ks, _, _ = kalman_update(ks, obs)
    np.testing.assert_allclose(ks.mean[:4], measurement_from_box(obs), atol=1e-3)


def test_update_rejects_bad_box():
    ks = kalman_init((0, 0, 10, 10), 1)
    with pytest.raises(ValueError):
        kalman_update(ks, (0, 0, -1, 10))


def test_zero_noise_innovation_vanishes_after_five_updates():
    boxes = cv_boxes(20)
    ks = kalman_init(boxes[0], 0, QUIET)
    for t in range(1, 20):
        ks = kalman_predict(ks, 1, QUIET)
        ks, innov, _ = kalman_update(ks, boxes[t], QUIET)
        if t > 5:
            assert np.linalg.norm(innov) < 1e-6


def test_default_noise_innovation_decays():
    boxes = cv_boxes(20)
    ks = kalman_init(boxes[0], 0)
    norms = []
    for t in range(1, 20):
        ks = kalman_predict(ks, 1)
        ks, innov, _ = kalman_update(ks, boxes[t])
        norms.append(np.linalg.norm(innov))
    assert norms[-1] < 1e-6
    assert all(b < a for a, b in zip(norms[3:], norms[4:]))


def test_smoother_reproduces_exact_constant_velocity():
    boxes = cv_boxes(20)
    out = rts_smooth(list(range(1, 21)), boxes)
    for t, b in zip(range(1, 21), boxes):
        np.testing.assert_allclose(out[t], b, atol=1e-6)


def test_smoother_fills_gap_on_line():
    boxes = cv_boxes(10)
    frames = [1, 2, 3, 4, 7, 8, 9, 10]
    out = rts_smooth(frames, [boxes[f - 1] for f in frames])
    assert sorted(out) == list(range(1, 11))
    np.testing.assert_allclose(out[5], boxes[4], atol=1e-6)


def test_smoother_single_box():
    assert rts_smooth([4], [(1, 2, 3, 4)]) == {4: (1, 2, 3, 4)}


def test_smoother_against_reference_filter():
    """Compare against a plain textbook KF/RTS written out here."""
    rng = np.random.default_rng(3)
    truth = cv_boxes(15)
    frames = list(range(1, 16))
    noisy = [tuple(np.add(b, rng.normal(0, 1.0, 4))) for b in truth]
    noise = MotionNoise()
    ours = rts_smooth(frames, noisy, noise)

    F = np.eye(8)
    F[:4, 4:] = np.eye(4)
    H = np.hstack([np.eye(4), np.zeros((4, 4))])
    Q, R = noise.process(1), noise.measurement
    z = [measurement_from_box(b) for b in noisy]
    x = np.concatenate([z[0], z[1] - z[0]])
    P = np.diag([noise.r] * 4 + [2 * noise.r + noise.q_vel] * 4)
    xs, Ps, xp, Pp = [x], [P], [x], [P]
    for k in range(1, len(z)):
        xk, Pk = F @ xs[-1], F @ Ps[-1] @ F.T + Q
        xp.append(xk)
        Pp.append(Pk)
        K = Pk @ H.T @ np.linalg.inv(H @ Pk @ H.T + R)
        xs.append(xk + K @ (z[k] - H @ xk))
        Ps.append((np.eye(8) - K @ H) @ Pk)
    sm = [None] * len(z)
    sm[-1] = xs[-1]
    for k in range(len(z) - 2, -1, -1):
        C = Ps[k] @ F.T @ np.linalg.inv(Pp[k + 1])
        sm[k] = xs[k] + C @ (sm[k + 1] - xp[k + 1])
    for k, f in enumerate(frames):
        np.testing.assert_allclose(measurement_from_box(ours[f]), sm[k][:4], atol=1e-6)
