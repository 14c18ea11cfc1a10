"""State estimation: linear Kalman, NSA Kalman and unscented Kalman filters"""

import math
from typing import Literal, Optional

import numpy as np
from filterpy.kalman import MerweScaledSigmaPoints, unscented_transform
from pydantic import ValidationError
from scipy import linalg

from src.config import MotionModel, NoiseConfig
from src.errors import InputError, NumericalError
from src.models import TrackState

NDIM = 4
SQRT_JITTER = 1e-9

# x' = F x for one frame of constant velocity
MOTION_MAT = np.eye(2 * NDIM)
MOTION_MAT[:NDIM, NDIM:] = np.eye(NDIM)
UPDATE_MAT = np.eye(NDIM, 2 * NDIM)


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    cov = (cov + cov.T) / 2
    diag = np.diag(cov)
    if np.any(diag < 0):
        cov = cov.copy()
        np.fill_diagonal(cov, np.maximum(diag, 0.0))
    return cov


def _jittered_cholesky(matrix: np.ndarray) -> np.ndarray:
    """Upper Cholesky factor; retries once with 1e-9 I added"""
    try:
        return linalg.cholesky(matrix, lower=False, check_finite=False)
    except linalg.LinAlgError:
        pass
    try:
        jittered = matrix + SQRT_JITTER * np.eye(matrix.shape[0])
        return linalg.cholesky(jittered, lower=False, check_finite=False)
    except linalg.LinAlgError as e:
        raise NumericalError("covariance is not positive semi-definite") from e


def build_state(mean: np.ndarray, cov: np.ndarray, **context) -> TrackState:
    """TrackState from raw arrays; a failed state check is a NumericalError"""
    try:
        return TrackState(mean=mean, cov=cov)
    except ValidationError as e:
        reason = e.errors()[0]["msg"]
        raise NumericalError(f"invalid track state: {reason}", **context) from e


class MotionService:
    """Predict/update steps over TrackState values"""

    @staticmethod
    def initiate(measurement: np.ndarray, noise: NoiseConfig) -> TrackState:
        """
        Create a state from an unassociated measurement (cx, cy, a, h)

        Args:
            measurement: Measurement vector
            noise: Noise configuration

        Returns:
            TrackState with zero velocity
        """
        h = measurement[3]
        pos = noise.position_std_factor * h
        vel = noise.velocity_std_factor * h
        std = [2 * pos, 2 * pos, 1e-2, 2 * pos, 10 * vel, 10 * vel, 1e-5, 10 * vel]
        base = np.concatenate([noise.measurement_base, noise.measurement_base])
        cov = np.diag(np.square(std) + base)
        mean = np.concatenate([np.asarray(measurement, dtype=float), np.zeros(NDIM)])
        return build_state(mean, cov)

    @staticmethod
    def measurement_covariance(noise: NoiseConfig, height: float) -> np.ndarray:
        """R_k: base diagonal plus (position_std_factor * h)^2 on cx, cy, h"""
        pos = noise.position_std_factor * height
        scaled = np.square([pos, pos, 0.0, pos])
        return np.diag(np.asarray(noise.measurement_base) + scaled)

    @staticmethod
    def process_covariance(noise: NoiseConfig, height: float) -> np.ndarray:
        """Q: base diagonal plus height-proportional position/velocity terms"""
        pos = noise.position_std_factor * height
        vel = noise.velocity_std_factor * height
        scaled = np.square([pos, pos, 0.0, pos, vel, vel, 0.0, vel])
        return np.diag(np.asarray(noise.process_base) + scaled)

    @staticmethod
    def nsa_covariance(base: np.ndarray, confidence: float) -> np.ndarray:
        """
        Noise-scale-adaptive measurement covariance (1 - c) R

        Args:
            base: Preset measurement covariance R_k
            confidence: Detection confidence c_k in [0, 1]

        Returns:
            Scaled covariance

        Raises:
            InputError: If confidence is outside [0, 1]
        """
        if not 0.0 <= confidence <= 1.0:
            raise InputError(f"confidence must lie in [0, 1], got {confidence}")
        return (1.0 - confidence) * np.asarray(base)

    @staticmethod
    def predict(
        state: TrackState,
        model: MotionModel,
        noise: NoiseConfig,
        process_cov: Optional[np.ndarray] = None,
    ) -> TrackState:
        """
        Propagate a state one frame

        Args:
            state: Current state
            model: Motion model; ctrv is propagated through the unscented transform
            noise: Noise configuration
            process_cov: Explicit Q overriding the configured one

        Returns:
            Predicted state
        """
        q = (
            process_cov
            if process_cov is not None
            else MotionService.process_covariance(noise, state.mean[3])
        )
        if model.kind == "ctrv":
            return MotionService._unscented_predict(state, model, q)
        mean = MOTION_MAT @ state.mean
        cov = np.linalg.multi_dot((MOTION_MAT, state.cov, MOTION_MAT.T)) + q
        return build_state(mean, _symmetrize(cov))

    @staticmethod
    def project(
        state: TrackState, measurement_cov: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Project a state into measurement space: (H x, H P H^T + R)"""
        mean = UPDATE_MAT @ state.mean
        cov = np.linalg.multi_dot((UPDATE_MAT, state.cov, UPDATE_MAT.T))
        return mean, cov + measurement_cov

    @staticmethod
    def update(
        state: TrackState,
        z: np.ndarray,
        confidence: float,
        mode: Literal["vanilla", "nsa"],
        noise: NoiseConfig,
        measurement_cov: Optional[np.ndarray] = None,
        frame: Optional[int] = None,
        track_id: Optional[int] = None,
    ) -> TrackState:
        """
        Kalman correction; in nsa mode R is replaced by (1 - confidence) R

        Args:
            state: Predicted state
            z: Measurement (cx, cy, a, h)
            confidence: Detection confidence c_k
            mode: vanilla or nsa
            noise: Noise configuration
            measurement_cov: Explicit R overriding the configured one
            frame: Frame index for error context
            track_id: Track id for error context

        Returns:
            Posterior state

        Raises:
            NumericalError: If the innovation covariance is singular or the
                posterior is not finite
        """
        r = (
            measurement_cov
            if measurement_cov is not None
            else MotionService.measurement_covariance(noise, state.mean[3])
        )
        if mode == "nsa":
            r = MotionService.nsa_covariance(r, confidence)
        projected_mean, projected_cov = MotionService.project(state, r)
        try:
            chol_factor, lower = linalg.cho_factor(
                projected_cov, lower=True, check_finite=False
            )
        except linalg.LinAlgError as e:
            raise NumericalError(
                "innovation covariance is singular", frame=frame, track_id=track_id
            ) from e
        kalman_gain = linalg.cho_solve(
            (chol_factor, lower), (state.cov @ UPDATE_MAT.T).T, check_finite=False
        ).T
        innovation = np.asarray(z, dtype=float) - projected_mean
        mean = state.mean + kalman_gain @ innovation
        cov = state.cov - np.linalg.multi_dot(
            (kalman_gain, projected_cov, kalman_gain.T)
        )
        return build_state(mean, _symmetrize(cov), frame=frame, track_id=track_id)

    @staticmethod
    def gating_distance(
        state: TrackState,
        z: np.ndarray,
        noise: NoiseConfig,
        measurement_cov: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Squared Mahalanobis distance of measurement(s) to the projected state

        Args:
            state: Predicted state
            z: One measurement (4,) or several (N, 4)
            noise: Noise configuration
            measurement_cov: Explicit R overriding the configured one

        Returns:
            Distance per measurement (scalar array for a single measurement)

        Raises:
            NumericalError: If the innovation covariance is singular
        """
        r = (
            measurement_cov
            if measurement_cov is not None
            else MotionService.measurement_covariance(noise, state.mean[3])
        )
        mean, cov = MotionService.project(state, r)
        try:
            cholesky_factor = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise NumericalError("innovation covariance is singular") from e
        d = np.atleast_2d(np.asarray(z, dtype=float)) - mean
        solved = linalg.solve_triangular(
            cholesky_factor, d.T, lower=True, check_finite=False
        )
        squared_maha = np.sum(solved * solved, axis=0)
        return squared_maha if np.ndim(z) == 2 else squared_maha[0]

    @staticmethod
    def ukf_step(
        state: TrackState,
        model: MotionModel,
        noise: NoiseConfig,
        z: Optional[np.ndarray] = None,
        confidence: Optional[float] = None,
        mode: Literal["vanilla", "nsa"] = "nsa",
        process_cov: Optional[np.ndarray] = None,
        measurement_cov: Optional[np.ndarray] = None,
    ) -> TrackState:
        """
        Unscented predict, followed by a measurement update when z is given

        Args:
            state: Current state
            model: Motion model (cv or ctrv) and sigma spread parameters
            noise: Noise configuration
            z: Optional measurement
            confidence: Detection confidence for the nsa update
            mode: vanilla or nsa
            process_cov: Explicit Q
            measurement_cov: Explicit R

        Returns:
            Predicted (and optionally corrected) state
        """
        q = (
            process_cov
            if process_cov is not None
            else MotionService.process_covariance(noise, state.mean[3])
        )
        predicted = MotionService._unscented_predict(state, model, q)
        if z is None:
            return predicted
        return MotionService.ukf_update(
            predicted, z, confidence or 0.0, mode, model, noise, measurement_cov
        )

    @staticmethod
    def ukf_update(
        state: TrackState,
        z: np.ndarray,
        confidence: float,
        mode: Literal["vanilla", "nsa"],
        model: MotionModel,
        noise: NoiseConfig,
        measurement_cov: Optional[np.ndarray] = None,
    ) -> TrackState:
        """Unscented measurement update with sigma points redrawn from the prior"""
        r = (
            measurement_cov
            if measurement_cov is not None
            else MotionService.measurement_covariance(noise, state.mean[3])
        )
        if mode == "nsa":
            r = MotionService.nsa_covariance(r, confidence)
        points = MotionService._sigma_points(model)
        sigmas = points.sigma_points(state.mean, state.cov)
        sigmas_h = sigmas[:, :NDIM]
        zp, s = unscented_transform(sigmas_h, points.Wm, points.Wc, r)
        pxz = np.einsum(
            "i,ij,ik->jk", points.Wc, sigmas - state.mean, sigmas_h - zp
        )
        try:
            kalman_gain = pxz @ np.linalg.inv(s)
        except np.linalg.LinAlgError as e:
            raise NumericalError("innovation covariance is singular") from e
        mean = state.mean + kalman_gain @ (np.asarray(z, dtype=float) - zp)
        cov = state.cov - np.linalg.multi_dot((kalman_gain, s, kalman_gain.T))
        return build_state(mean, _symmetrize(cov))

    @staticmethod
    def transition(x: np.ndarray, model: MotionModel) -> np.ndarray:
        """Propagate one state vector one frame under the motion model"""
        if model.kind == "cv" or abs(model.turn_rate) < 1e-12:
            return MOTION_MAT @ x
        omega = model.turn_rate * model.dt
        vx, vy = x[4], x[5]
        speed = math.hypot(vx, vy)
        heading = math.atan2(vy, vx)
        out = MOTION_MAT @ x
        out[0] = x[0] + speed / omega * (math.sin(heading + omega) - math.sin(heading))
        out[1] = x[1] + speed / omega * (math.cos(heading) - math.cos(heading + omega))
        out[4] = speed * math.cos(heading + omega)
        out[5] = speed * math.sin(heading + omega)
        return out

    @staticmethod
    def _sigma_points(model: MotionModel) -> MerweScaledSigmaPoints:
        return MerweScaledSigmaPoints(
            n=2 * NDIM,
            alpha=model.alpha,
            beta=model.beta,
            kappa=model.kappa,
            sqrt_method=_jittered_cholesky,
        )

    @staticmethod
    def _unscented_predict(
        state: TrackState, model: MotionModel, process_cov: np.ndarray
    ) -> TrackState:
        points = MotionService._sigma_points(model)
        sigmas = points.sigma_points(state.mean, state.cov)
        sigmas_f = np.array([MotionService.transition(s, model) for s in sigmas])
        mean, cov = unscented_transform(sigmas_f, points.Wm, points.Wc, process_cov)
        return build_state(mean, _symmetrize(cov))
