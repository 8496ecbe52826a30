"""Loosely-coupled EKF over (x, y, theta).

Odometry drives the prediction through a unicycle model; VLP position
fixes arrive as 2-D measurements, gated on Mahalanobis distance and
applied with the Joseph-form update. Heading is never measured directly:
it is corrected only through the cross-covariance that motion builds
between heading and position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_angle
from .pose_estimator import PositionFix

DEFAULT_SIGMA_V = 0.02    # m/s
DEFAULT_SIGMA_OMEGA = 0.03  # rad/s
# Optional process-noise inflation for platforms that drift worse than the
# white-noise model; 1.0 keeps the filter exactly matched to the simulator.
DEFAULT_Q_INFLATION = 1.0
COV_FLOOR = 1e-10
CHI2_GATE_2DOF_99 = 9.21


class SingularInnovation(np.linalg.LinAlgError):
    """Innovation covariance not invertible; state left unchanged."""


@dataclass(frozen=True)
class OdometryDelta:
    v: float
    omega: float
    dt: float

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class ProcessNoise:
    sigma_v: float = DEFAULT_SIGMA_V
    sigma_omega: float = DEFAULT_SIGMA_OMEGA
    inflation: float = DEFAULT_Q_INFLATION


@dataclass(frozen=True)
class FusedState:
    mean: np.ndarray            # (3,) x, y, theta
    cov: np.ndarray             # (3, 3)
    t: float = 0.0

    @classmethod
    def at(cls, x: float, y: float, theta: float,
           sigma_xy: float = 1e-3, sigma_theta: float = 1e-3,
           t: float = 0.0) -> "FusedState":
        mean = np.array([x, y, wrap_angle(theta)])
        cov = np.diag([sigma_xy ** 2, sigma_xy ** 2, sigma_theta ** 2])
        return cls(mean=mean, cov=cov, t=t)

    @property
    def x(self) -> float:
        return float(self.mean[0])

    @property
    def y(self) -> float:
        return float(self.mean[1])

    @property
    def theta(self) -> float:
        return float(self.mean[2])


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return (cov + cov.T) / 2.0


def motion_model(mean: np.ndarray, u: OdometryDelta) -> np.ndarray:
    x, y, theta = mean
    return np.array([
        x + u.v * u.dt * np.cos(theta),
        y + u.v * u.dt * np.sin(theta),
        wrap_angle(theta + u.omega * u.dt),
    ])


def motion_jacobian(mean: np.ndarray, u: OdometryDelta) -> np.ndarray:
    theta = mean[2]
    return np.array([
        [1.0, 0.0, -u.v * u.dt * np.sin(theta)],
        [0.0, 1.0, u.v * u.dt * np.cos(theta)],
        [0.0, 0.0, 1.0],
    ])


def predict(state: FusedState, u: OdometryDelta,
            q: ProcessNoise = ProcessNoise()) -> FusedState:
    """Propagate through the unicycle model and grow the covariance.

    Process noise scales with motion: a parked robot only accrues the
    numerical floor.
    """
    mean = motion_model(state.mean, u)
    jac = motion_jacobian(state.mean, u)
    moving = 1.0 if (u.v != 0.0 or u.omega != 0.0) else 0.0
    scale = q.inflation ** 2
    process = np.diag([
        scale * (q.sigma_v * u.dt) ** 2 * moving + COV_FLOOR,
        scale * (q.sigma_v * u.dt) ** 2 * moving + COV_FLOOR,
        scale * (q.sigma_omega * u.dt) ** 2 * moving + COV_FLOOR,
    ])
    cov = _symmetrize(jac @ state.cov @ jac.T + process)
    return FusedState(mean=mean, cov=cov, t=state.t + u.dt)


def update_vlp(state: FusedState, fix: PositionFix,
               gate: float = CHI2_GATE_2DOF_99) -> tuple[FusedState, bool]:
    """Fuse a VLP position fix; returns (new state, accepted).

    Fixes failing the chi-square gate leave the state untouched so a
    rare decoder misgeometry cannot corrupt the filter.
    """
    if fix.sigma <= 0:
        raise ValueError("fix.sigma must be positive")
    h_mat = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    z = np.array([fix.x, fix.y])
    innovation = z - h_mat @ state.mean
    s_mat = h_mat @ state.cov @ h_mat.T + (fix.sigma ** 2) * np.eye(2)
    try:
        s_inv = np.linalg.inv(s_mat)
    except np.linalg.LinAlgError as err:
        raise SingularInnovation(str(err)) from err
    if not np.all(np.isfinite(s_inv)):
        raise SingularInnovation("non-finite innovation covariance inverse")
    d_sq = float(innovation @ s_inv @ innovation)
    if d_sq > gate:
        return state, False
    gain = state.cov @ h_mat.T @ s_inv
    mean = state.mean + gain @ innovation
    mean[2] = wrap_angle(mean[2])
    identity = np.eye(3)
    joseph = identity - gain @ h_mat
    cov = joseph @ state.cov @ joseph.T + gain @ ((fix.sigma ** 2) * np.eye(2)) @ gain.T
    return FusedState(mean=mean, cov=_symmetrize(cov), t=state.t), True
