"""Constant-velocity Kalman filter on (cx, cy, w, h) and an RTS smoother.

State is ``(cx, cy, w, h, vcx, vcy, vw, vh)`` in pixels and pixels/frame.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .config import Config

_H = np.hstack([np.eye(4), np.zeros((4, 4))])


@dataclass(frozen=True)
class MotionNoise:
    q_pos: float = 1.0
    q_vel: float = 0.25
    r: float = 1.0
    init_pos_var: float = 1.0
    init_vel_var: float = 1e3

    @classmethod
    def from_config(cls, cfg: Config) -> MotionNoise:
        return cls(cfg.kf_q_pos, cfg.kf_q_vel, cfg.kf_r, cfg.kf_init_pos_var, cfg.kf_init_vel_var)

    def process(self, dt: float) -> np.ndarray:
        return np.diag([self.q_pos] * 4 + [self.q_vel] * 4) * dt

    @property
    def measurement(self) -> np.ndarray:
        return np.eye(4) * self.r


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray  # (8,)
    cov: np.ndarray  # (8, 8)
    frame: int = 0

    @property
    def box(self) -> tuple[float, float, float, float]:
        """Current estimate as a top-left (x, y, w, h) box."""
        return xywh_from_measurement(self.mean[:4])


def measurement_from_box(box) -> np.ndarray:
    x, y, w, h = box
    return np.array([x + w / 2.0, y + h / 2.0, w, h], dtype=float)


def xywh_from_measurement(z) -> tuple[float, float, float, float]:
    cx, cy, w, h = (float(v) for v in z)
    return (cx - w / 2.0, cy - h / 2.0, w, h)


def transition(dt: float) -> np.ndarray:
    F = np.eye(8)
    F[:4, 4:] = np.eye(4) * dt
    return F


def kalman_init(box, frame: int = 0, noise: MotionNoise = MotionNoise()) -> KalmanState:
    mean = np.concatenate([measurement_from_box(box), np.zeros(4)])
    cov = np.diag([noise.init_pos_var] * 4 + [noise.init_vel_var] * 4)
    return KalmanState(mean, cov, frame)


def kalman_predict(ks: KalmanState, dt: int = 1, noise: MotionNoise = MotionNoise()) -> KalmanState:
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return ks
    F = transition(dt)
    return KalmanState(F @ ks.mean, F @ ks.cov @ F.T + noise.process(dt), ks.frame + dt)


def _chol_solve(S: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``S x = rhs``, adding 1e-6 * I once if ``S`` is not positive definite."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        S = S + 1e-6 * np.eye(S.shape[0])
        L = np.linalg.cholesky(S)  # a second failure propagates
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, y), S


def kalman_update(
    ks: KalmanState, box, noise: MotionNoise = MotionNoise()
) -> tuple[KalmanState, np.ndarray, np.ndarray]:
    """Measurement update with a top-left box.

    Returns the posterior, the innovation ``z - H x`` and its covariance.
    """
    z = measurement_from_box(box)
    if z[2] <= 0 or z[3] <= 0:
        raise ValueError(f"non-positive box {box}")
    innov = z - _H @ ks.mean
    S = _H @ ks.cov @ _H.T + noise.measurement
    S = (S + S.T) / 2.0
    PHt = ks.cov @ _H.T
    Kt, S = _chol_solve(S, PHt.T)
    K = Kt.T
    mean = ks.mean + K @ innov
    IKH = np.eye(8) - K @ _H
    cov = IKH @ ks.cov @ IKH.T + K @ noise.measurement @ K.T
    cov = (cov + cov.T) / 2.0
    mean[2:4] = np.maximum(mean[2:4], 1e-3)
    return KalmanState(mean, cov, ks.frame), innov, S


def rts_smooth(
    frames: Sequence[int], boxes: Sequence, noise: MotionNoise = MotionNoise()
) -> dict[int, tuple[float, float, float, float]]:
    """Forward filter plus Rauch-Tung-Striebel pass over every frame in the span.

    The velocity prior comes from the first two observations, so exact
    constant-velocity input is reproduced exactly. Frames without an
    observation get the smoothed prediction.
    """
    order = np.argsort(frames)
    frames = [int(frames[i]) for i in order]
    zs = [measurement_from_box(boxes[i]) for i in order]
    if len(frames) == 1:
        return {frames[0]: tuple(float(v) for v in boxes[order[0]])}
    first, last = frames[0], frames[-1]
    obs = dict(zip(frames, zs))

    dt0 = frames[1] - frames[0]
    vel = (zs[1] - zs[0]) / dt0
    mean = np.concatenate([zs[0], vel])
    cov = np.diag([noise.r] * 4 + [2.0 * noise.r / dt0**2 + noise.q_vel] * 4)
    ks = KalmanState(mean, cov, first)
    F = transition(1)

    filt_m, filt_P, pred_m, pred_P = [], [], [], []
    for t in range(first, last + 1):
        if t > first:
            pm, pP = F @ ks.mean, F @ ks.cov @ F.T + noise.process(1)
            ks = KalmanState(pm, pP, t)
        else:
            pm, pP = ks.mean, ks.cov
        pred_m.append(pm)
        pred_P.append(pP)
        if t in obs and t > first:
            ks, _, _ = kalman_update(ks, xywh_from_measurement(obs[t]), noise)
        filt_m.append(ks.mean)
        filt_P.append(ks.cov)

    sm = [None] * len(filt_m)
    sP = [None] * len(filt_m)
    sm[-1], sP[-1] = filt_m[-1], filt_P[-1]
    for i in range(len(filt_m) - 2, -1, -1):
        C = filt_P[i] @ F.T @ np.linalg.pinv(pred_P[i + 1])
        sm[i] = filt_m[i] + C @ (sm[i + 1] - pred_m[i + 1])
        sP[i] = filt_P[i] + C @ (sP[i + 1] - pred_P[i + 1]) @ C.T
    return {first + i: xywh_from_measurement(m[:4]) for i, m in enumerate(sm)}
