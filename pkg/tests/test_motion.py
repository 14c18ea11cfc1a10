import math

import numpy as np
import pytest

from src.config import MotionModel, NoiseConfig
from src.errors import InputError, NumericalError
from src.models import TrackState
from src.services.motion_service import (
    SQRT_JITTER,
    UPDATE_MAT,
    MotionService,
    _jittered_cholesky,
    build_state,
)

CV = MotionModel()


def _random_state(rng: np.random.Generator) -> TrackState:
    a = rng.normal(size=(8, 8))
    cov = a @ a.T + np.eye(8)
    return TrackState(mean=rng.normal(0.0, 10.0, 8), cov=(cov + cov.T) / 2)


def _state(noise: NoiseConfig) -> TrackState:
    state = MotionService.initiate(np.array([100.0, 50.0, 0.5, 40.0]), noise)
    mean = state.mean.copy()
    mean[4:] = [1.0, -0.5, 0.0, 0.1]
    return TrackState(mean=mean, cov=state.cov)


def test_initiate_has_zero_velocity(noise):
    state = MotionService.initiate(np.array([10.0, 20.0, 0.5, 30.0]), noise)
    np.testing.assert_array_equal(state.mean[4:], np.zeros(4))
    np.testing.assert_array_equal(state.mean[:4], [10.0, 20.0, 0.5, 30.0])
    assert np.all(np.diag(state.cov) > 0)


def test_nsa_covariance_scales_by_one_minus_confidence():
    base = np.diag([4.0, 4.0, 0.01, 4.0])
    np.testing.assert_allclose(MotionService.nsa_covariance(base, 0.75), base * 0.25)
    np.testing.assert_array_equal(MotionService.nsa_covariance(base, 1.0), base * 0.0)


@pytest.mark.parametrize("confidence", [-0.1, 1.5])
def test_nsa_covariance_rejects_confidence_outside_unit_interval(confidence):
    with pytest.raises(InputError):
        MotionService.nsa_covariance(np.eye(4), confidence)


def test_predict_moves_by_velocity(noise):
    state = _state(noise)
    predicted = MotionService.predict(state, CV, noise)
    np.testing.assert_allclose(predicted.mean[:4], state.mean[:4] + state.mean[4:])
    assert np.all(np.diag(predicted.cov) >= np.diag(state.cov))


def test_nsa_full_confidence_snaps_to_measurement(noise):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        state = _random_state(rng)
        z = rng.normal(0.0, 10.0, 4)
        posterior = MotionService.update(
            state, z, 1.0, "nsa", noise, measurement_cov=np.eye(4)
        )
        assert np.max(np.abs(UPDATE_MAT @ posterior.mean - z)) < 1e-9


def test_nsa_zero_confidence_equals_vanilla(noise):
    rng = np.random.default_rng(1)
    for _ in range(50):
        state = _random_state(rng)
        z = rng.normal(0.0, 10.0, 4)
        r = np.diag(rng.uniform(0.5, 3.0, 4))
        nsa = MotionService.update(state, z, 0.0, "nsa", noise, measurement_cov=r)
        vanilla = MotionService.update(state, z, 0.3, "vanilla", noise, measurement_cov=r)
        np.testing.assert_array_equal(nsa.mean, vanilla.mean)
        np.testing.assert_array_equal(nsa.cov, vanilla.cov)


def test_update_never_grows_posterior_variances(noise):
    rng = np.random.default_rng(2)
    for _ in range(500):
        state = _random_state(rng)
        z = rng.normal(0.0, 10.0, 4)
        r = np.diag(rng.uniform(0.5, 3.0, 4))
        mode = "nsa" if rng.uniform() < 0.5 else "vanilla"
        posterior = MotionService.update(
            state, z, float(rng.uniform(0.0, 0.99)), mode, noise, measurement_cov=r
        )
        prior_diag = np.diag(state.cov)
        assert np.all(np.diag(posterior.cov) <= prior_diag + 1e-9 * prior_diag)


def test_nsa_posterior_approaches_measurement_as_confidence_rises(noise):
    rng = np.random.default_rng(4)
    confidences = np.linspace(0.0, 0.99, 12)
    for _ in range(100):
        state = _random_state(rng)
        z = rng.normal(0.0, 10.0, 4)
        r = np.diag(rng.uniform(0.5, 3.0, 4))
        r_inv = np.linalg.inv(r)
        distances = []
        for c in confidences:
            posterior = MotionService.update(
                state, z, float(c), "nsa", noise, measurement_cov=r
            )
            residual = UPDATE_MAT @ posterior.mean - z
            distances.append(float(residual @ r_inv @ residual))
        assert all(b <= a + 1e-9 * (1 + a) for a, b in zip(distances, distances[1:]))


def test_jittered_cholesky_retries_singular_matrices():
    singular = np.ones((3, 3))
    upper = _jittered_cholesky(singular)
    np.testing.assert_allclose(upper.T @ upper, singular + SQRT_JITTER * np.eye(3))
    with pytest.raises(NumericalError):
        _jittered_cholesky(-np.eye(3))


def _filter_rmse(measurements, confidences, truth, mode, r0):
    noise = NoiseConfig()
    r = np.eye(4) * r0
    q = np.diag([1e-4] * 4 + [1e-6] * 4)
    mean = np.concatenate([measurements[0], np.zeros(4)])
    state = TrackState(mean=mean, cov=np.diag([r0] * 4 + [1.0] * 4))
    errors = []
    for z, c, x in zip(measurements[1:], confidences[1:], truth[1:]):
        state = MotionService.predict(state, CV, noise, process_cov=q)
        state = MotionService.update(state, z, c, mode, noise, measurement_cov=r)
        errors.append(state.mean[0] - x[0])
    return math.sqrt(float(np.mean(np.square(errors))))


def test_nsa_beats_vanilla_when_noise_follows_confidence():
    r0 = 4.0
    nsa, vanilla = [], []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        steps = np.arange(101)
        truth = np.column_stack(
            [100.0 + steps, np.full(101, 50.0), np.full(101, 0.5), np.full(101, 50.0)]
        )
        confidences = rng.uniform(0.0, 1.0, 101)
        sigma = np.sqrt((1.0 - confidences) * r0)
        measurements = truth + rng.normal(size=(101, 4)) * sigma[:, None]
        nsa.append(_filter_rmse(measurements, confidences, truth, "nsa", r0))
        vanilla.append(_filter_rmse(measurements, confidences, truth, "vanilla", r0))
    assert np.median(nsa) <= 0.95 * np.median(vanilla)


def test_update_with_singular_innovation_raises(noise):
    state = TrackState(mean=np.ones(8), cov=np.zeros((8, 8)))
    with pytest.raises(NumericalError):
        MotionService.update(
            state, np.ones(4), 1.0, "nsa", noise, measurement_cov=np.eye(4)
        )


def test_build_state_reports_invalid_states_as_numerical_errors():
    with pytest.raises(NumericalError, match="finite") as excinfo:
        build_state(np.full(8, np.nan), np.eye(8), frame=3, track_id=7)
    assert excinfo.value.context == {"frame": 3, "track_id": 7}
    with pytest.raises(NumericalError, match="symmetric"):
        build_state(np.zeros(8), np.triu(np.ones((8, 8))))


def test_update_with_non_finite_measurement_raises(noise):
    with pytest.raises(NumericalError) as excinfo:
        MotionService.update(
            _state(noise),
            np.array([np.nan, 50.0, 0.5, 40.0]),
            0.8,
            "nsa",
            noise,
            frame=12,
            track_id=4,
        )
    assert excinfo.value.context == {"frame": 12, "track_id": 4}


def test_gating_distance_zero_at_projected_mean(noise):
    state = _state(noise)
    assert MotionService.gating_distance(state, state.mean[:4], noise) == pytest.approx(
        0.0
    )


def test_gating_distance_vectorized(noise):
    state = _state(noise)
    z = np.array([state.mean[:4], state.mean[:4] + [5.0, 0.0, 0.0, 0.0]])
    distances = MotionService.gating_distance(state, z, noise)
    assert distances.shape == (2,)
    assert distances[0] == pytest.approx(0.0)
    assert distances[1] > 0.0
    assert distances[1] == pytest.approx(
        MotionService.gating_distance(state, z[1], noise)
    )


def test_ukf_predict_matches_linear_predict_for_cv(noise):
    state = _state(noise)
    q = MotionService.process_covariance(noise, state.mean[3])
    linear = MotionService.predict(state, CV, noise, process_cov=q)
    unscented = MotionService.ukf_step(state, CV, noise, process_cov=q)
    np.testing.assert_allclose(unscented.mean, linear.mean, atol=1e-5)
    np.testing.assert_allclose(unscented.cov, linear.cov, rtol=1e-5, atol=1e-6)


def test_ukf_update_matches_linear_update_for_cv(noise):
    state = _state(noise)
    z = state.mean[:4] + np.array([2.0, -1.0, 0.01, 0.5])
    r = MotionService.measurement_covariance(noise, state.mean[3])
    linear = MotionService.update(state, z, 0.8, "nsa", noise, measurement_cov=r)
    unscented = MotionService.ukf_update(
        state, z, 0.8, "nsa", CV, noise, measurement_cov=r
    )
    np.testing.assert_allclose(unscented.mean, linear.mean, atol=1e-5)
    np.testing.assert_allclose(unscented.cov, linear.cov, rtol=1e-5, atol=1e-6)


def test_ctrv_without_turn_rate_is_constant_velocity():
    x = np.array([10.0, 20.0, 0.5, 30.0, 1.0, 2.0, 0.0, 0.1])
    ctrv = MotionModel(kind="ctrv", turn_rate=0.0)
    np.testing.assert_array_equal(
        MotionService.transition(x, ctrv), MotionService.transition(x, CV)
    )


def test_ctrv_rotates_velocity_and_keeps_speed():
    x = np.array([0.0, 0.0, 0.5, 30.0, 2.0, 0.0, 0.0, 0.0])
    out = MotionService.transition(x, MotionModel(kind="ctrv", turn_rate=math.pi / 2))
    assert math.hypot(out[4], out[5]) == pytest.approx(2.0)
    assert out[4] == pytest.approx(0.0, abs=1e-12)
    assert out[5] == pytest.approx(2.0)
    # quarter circle of radius speed / omega
    assert out[0] == pytest.approx(4.0 / math.pi)
    assert out[1] == pytest.approx(4.0 / math.pi)


def test_ukf_ctrv_predict_is_finite_and_symmetric(noise):
    state = _state(noise)
    predicted = MotionService.predict(
        state, MotionModel(kind="ctrv", turn_rate=0.05), noise
    )
    assert np.all(np.isfinite(predicted.mean))
    np.testing.assert_allclose(predicted.cov, predicted.cov.T)
