import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopper_est.models import (
    PARAM_NAMES,
    REFERENCE_TRAINED_PARAMS,
    EstimatorParams,
    EventKind,
    FilterKind,
    ImuptKind,
    RobotParams,
)
from hopper_est.services.hvse import (
    DEFAULT_P0,
    IMUPT_SCHEDULE,
    KF3_SCHEDULE,
    EstimatorFault,
    FilterState,
    ImuptContext,
    ImuptMeasurement,
    ImuptRejected,
    apply_imupt,
    build_imupt,
    compute_Lf,
    delta_vlo,
    imupts_for,
    initial_filter_state,
    measurement_update,
    predict,
    thrust_fit,
    trainable_params,
)

P = EstimatorParams()
RP = RobotParams()


def _kf1(x, P) -> FilterState:  # noqa: N803
    return FilterState(FilterKind.KF1, np.array(x, dtype=float), np.array(P, dtype=float))


def test_predict_with_zero_state_and_input_stays_at_zero() -> None:
    fs = predict(_kf1([0.0, 0.0], np.zeros((2, 2))), 0.0, 0.001, P)

    assert np.array_equal(fs.x, [0.0, 0.0])


def test_predict_propagates_constant_acceleration() -> None:
    fs = predict(_kf1([1.0, 2.0], np.zeros((2, 2))), -9.81, 0.001, P)

    assert fs.x == pytest.approx([1.001995095, 1.99019], rel=1e-12)


def test_predict_adds_acceleration_noise() -> None:
    fs = predict(_kf1([0.0, 0.0], np.zeros((2, 2))), 0.0, 0.001, P)

    assert fs.P[0, 0] == pytest.approx(2.5e-13)
    assert fs.P[0, 1] == pytest.approx(5e-10)
    assert fs.P[1, 0] == pytest.approx(5e-10)
    assert fs.P[1, 1] == pytest.approx(1e-6)


def test_bias_state_is_subtracted_from_input() -> None:
    fs = initial_filter_state(FilterKind.KF2, bias0=0.5)

    fs = predict(fs, 0.5, 0.01, P)

    assert fs.x[:2] == pytest.approx([0.0, 0.0], abs=1e-15)
    assert fs.x[2] == 0.5


@pytest.mark.parametrize(("u", "dt"), [(math.nan, 0.001), (math.inf, 0.001), (0.0, 0.0)])
def test_predict_rejects_bad_inputs(u: float, dt: float) -> None:
    with pytest.raises(EstimatorFault):
        predict(initial_filter_state(FilterKind.KF1), u, dt, P)


def test_position_update_matches_scalar_kalman_arithmetic() -> None:
    prior = _kf1([1.0, 0.0], np.diag([0.04, 0.01]))

    post = measurement_update(prior, ImuptMeasurement(ImuptKind.POSITION_TD, 1.2, 8.281e-5))

    gain = 0.04 / (0.04 + 8.281e-5)
    assert gain == pytest.approx(0.9979, abs=1e-4)
    assert post.x[0] == pytest.approx(1.19959, abs=1e-5)
    assert post.x[1] == 0.0
    assert post.P[0, 0] == pytest.approx(8.264e-5, rel=1e-3)
    assert post.P[1, 1] == pytest.approx(0.01)


def test_uninformative_measurement_leaves_prior() -> None:
    prior = _kf1([1.0, 0.5], np.diag([0.04, 0.01]))

    post = measurement_update(prior, ImuptMeasurement(ImuptKind.POSITION_LO, 3.0, math.inf))

    assert np.array_equal(post.x, prior.x)
    assert np.array_equal(post.P, prior.P)


def test_perfect_prior_ignores_measurement() -> None:
    prior = _kf1([1.0, 0.5], np.zeros((2, 2)))

    post = measurement_update(prior, ImuptMeasurement(ImuptKind.POSITION_TD, 3.0, 1e-4))

    assert np.array_equal(post.x, prior.x)


def test_error_state_update_injects_and_resets() -> None:
    prior = FilterState(
        FilterKind.ESKF1,
        np.array([1.0, 0.0, 0.0]),
        np.diag([0.04, 0.01, 1e-4]),
        np.zeros(3),
    )

    post = measurement_update(prior, ImuptMeasurement(ImuptKind.POSITION_TD, 1.2, 8.281e-5))

    assert post.x[0] == pytest.approx(1.19959, abs=1e-5)
    assert np.array_equal(post.dx, np.zeros(3))


def test_bias_measurement_is_rejected_without_bias_state() -> None:
    with pytest.raises(ImuptRejected, match="does not carry"):
        measurement_update(
            initial_filter_state(FilterKind.KF1),
            ImuptMeasurement(ImuptKind.ACCEL_BIAS_AERIAL, 0.0, 1.0),
        )


def test_measurement_variance_must_be_positive() -> None:
    with pytest.raises(ValueError, match="variance"):
        ImuptMeasurement(ImuptKind.VELOCITY_MS, 0.0, 0.0)


@given(
    st.floats(min_value=1e-3, max_value=3.0),
    st.floats(min_value=1e-3, max_value=3.0),
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=1e-6, max_value=10.0),
    st.sampled_from([ImuptKind.POSITION_TD, ImuptKind.VELOCITY_MS]),
)
def test_update_keeps_covariance_symmetric_psd(a, b, c, R, kind) -> None:  # noqa: N803
    lower = np.array([[a, 0.0], [c, b]])
    prior = _kf1([0.3, -0.2], lower @ lower.T)

    post = measurement_update(prior, ImuptMeasurement(kind, 0.27, R))

    assert np.array_equal(post.P, post.P.T)
    scale = max(1.0, float(np.max(np.abs(prior.P))))
    assert np.linalg.eigvalsh(post.P).min() >= -1e-9 * scale


def test_initial_state_uses_default_covariance() -> None:
    kf1 = initial_filter_state(FilterKind.KF1, z0=1.0)
    eskf = initial_filter_state(FilterKind.ESKF2)

    assert np.array_equal(kf1.P, DEFAULT_P0)
    assert kf1.dx is None
    assert eskf.x.shape == (3,)
    assert np.array_equal(eskf.P[:2, :2], DEFAULT_P0)
    assert np.array_equal(eskf.dx, np.zeros(3))


def test_foot_offset_for_reference_robot() -> None:
    assert compute_Lf(RP) == pytest.approx(-0.27035, abs=1e-5)


def test_foot_offset_vanishes_with_mass_centre_at_the_foot() -> None:
    robot = RobotParams(m_B=1.0, m_L=1.0, L_1=0.1, L_2=0.2, L_3=0.5)

    assert compute_Lf(robot) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(("v_lo", "h_ch"), [(0.0, 1.0), (2.5, 3.0), (-1.0, 0.5)])
def test_identity_coefficients_leave_liftoff_velocity_unscaled(v_lo: float, h_ch: float) -> None:
    assert delta_vlo(v_lo, h_ch, P) == 1.0


def test_reference_coefficients_scale_liftoff_velocity() -> None:
    assert delta_vlo(5.0, 3.0, REFERENCE_TRAINED_PARAMS) == pytest.approx(221.8, rel=1e-3)


def test_thrust_fit_is_linear_in_duty() -> None:
    assert thrust_fit(2.0, P) == pytest.approx(3.24)


def test_touchdown_position_measurement() -> None:
    ctx = ImuptContext(params=P, robot=RP)

    z = build_imupt(initial_filter_state(FilterKind.KF1), ImuptKind.POSITION_TD, ctx)

    assert z.value == pytest.approx(0.27035, abs=1e-5)
    assert z.R == pytest.approx(P.sigma_pz**2)


def test_midstance_velocity_measurement_is_zero() -> None:
    ctx = ImuptContext(params=P, robot=RP)

    z = build_imupt(initial_filter_state(FilterKind.KF1, v0=-0.4), ImuptKind.VELOCITY_MS, ctx)

    assert z.value == 0.0
    assert z.R == pytest.approx(P.sigma_vz**2)


def test_zero_liftoff_velocity_gives_zero_measurement() -> None:
    ctx = ImuptContext(params=REFERENCE_TRAINED_PARAMS, robot=RP, h_ch=3.0, v_lo_est=0.0)

    z = build_imupt(initial_filter_state(FilterKind.KF1, v0=2.0), ImuptKind.VELOCITY_LO, ctx)

    assert z.value == 0.0


def test_aerial_bias_measurement_without_thrust() -> None:
    ctx = ImuptContext(params=P, robot=RP, u=-9.5)

    z = build_imupt(initial_filter_state(FilterKind.KF2), ImuptKind.ACCEL_BIAS_AERIAL, ctx)

    assert z.value == pytest.approx(-9.5 + RP.g)


def test_apply_imupt_snaps_position_toward_foot_offset() -> None:
    fs = _kf1([0.5, -1.0], np.diag([0.04, 0.01]))

    post = apply_imupt(fs, ImuptKind.POSITION_TD, ImuptContext(params=P, robot=RP))

    assert abs(post.x[0] - 0.27035) < abs(fs.x[0] - 0.27035)


def test_liftoff_velocity_update_is_not_scheduled_for_eskf1() -> None:
    fs = initial_filter_state(FilterKind.ESKF1)

    with pytest.raises(ImuptRejected, match="not scheduled"):
        apply_imupt(fs, ImuptKind.VELOCITY_LO, ImuptContext(params=P, robot=RP))


def test_touchdown_only_schedule_rejects_midstance_update() -> None:
    fs = initial_filter_state(FilterKind.KF1)
    ctx = ImuptContext(params=P, robot=RP)

    apply_imupt(fs, ImuptKind.POSITION_TD, ctx, schedule=KF3_SCHEDULE)
    with pytest.raises(ImuptRejected):
        apply_imupt(fs, ImuptKind.VELOCITY_MS, ctx, schedule=KF3_SCHEDULE)


def test_imupts_for_event_respects_schedule() -> None:
    assert imupts_for(IMUPT_SCHEDULE[FilterKind.KF1], EventKind.LO) == (
        ImuptKind.POSITION_LO,
        ImuptKind.VELOCITY_LO,
    )
    assert imupts_for(IMUPT_SCHEDULE[FilterKind.ESKF1], EventKind.LO) == (ImuptKind.POSITION_LO,)
    assert imupts_for(IMUPT_SCHEDULE[FilterKind.KF2], EventKind.HA) == ()


def test_trainable_params_follow_the_schedule() -> None:
    kf1 = trainable_params(FilterKind.KF1)
    eskf1 = trainable_params(FilterKind.ESKF1)

    assert trainable_params(FilterKind.KF2) == PARAM_NAMES
    assert "sigma_bz" not in kf1
    assert "c_vel0" in kf1 and "c_m1" not in kf1
    assert "sigma_bz" in eskf1 and "c_vel0" not in eskf1
    assert set(trainable_params(FilterKind.ESKF2)) == set(eskf1) | {"c_m1", "c_m0"}


def _matrix_form(kind: FilterKind, dt: float, params: EstimatorParams):
    h = 0.5 * dt * dt
    if kind.state_size == 2:
        F = np.array([[1.0, dt], [0.0, 1.0]])  # noqa: N806
        G = np.array([h, dt])  # noqa: N806
        Q = np.outer(G, G) * params.sigma_az**2  # noqa: N806
    else:
        F = np.array([[1.0, dt, -h], [0.0, 1.0, -dt], [0.0, 0.0, 1.0]])  # noqa: N806
        G = np.array([h, dt, 0.0])  # noqa: N806
        Q = np.outer(G, G) * params.sigma_az**2  # noqa: N806
        Q[2, 2] += params.sigma_bz**2 * dt
    return F, G, Q


def _random_state(kind: FilterKind, rng: np.random.Generator) -> FilterState:
    n = kind.state_size
    lower = np.tril(rng.normal(size=(n, n))) + np.eye(n)
    return FilterState(kind, rng.normal(size=n), lower @ lower.T)


@pytest.mark.parametrize("kind", list(FilterKind))
def test_prediction_matches_matrix_form(kind: FilterKind) -> None:
    rng = np.random.default_rng(5)
    params = EstimatorParams(sigma_az=1.7, sigma_bz=0.3)
    F, G, Q = _matrix_form(kind, 1 / 840, params)  # noqa: N806
    prior = _random_state(kind, rng)

    post = predict(prior, -3.2, 1 / 840, params)

    np.testing.assert_allclose(post.x, F @ prior.x + G * -3.2, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(post.P, F @ prior.P @ F.T + Q, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("imupt", [ImuptKind.POSITION_TD, ImuptKind.VELOCITY_MS])
@pytest.mark.parametrize("kind", list(FilterKind))
def test_update_matches_joseph_matrix_form(kind: FilterKind, imupt: ImuptKind) -> None:
    rng = np.random.default_rng(9)
    prior = _random_state(kind, rng)
    idx = 0 if imupt is ImuptKind.POSITION_TD else 1
    R = 0.02  # noqa: N806

    post = measurement_update(prior, ImuptMeasurement(imupt, 0.4, R))

    n = kind.state_size
    H = np.zeros(n)  # noqa: N806
    H[idx] = 1.0
    K = prior.P @ H / (H @ prior.P @ H + R)  # noqa: N806
    A = np.eye(n) - np.outer(K, H)  # noqa: N806
    expected_P = A @ prior.P @ A.T + R * np.outer(K, K)  # noqa: N806
    np.testing.assert_allclose(post.x, prior.x + K * (0.4 - prior.x[idx]), rtol=1e-12)
    np.testing.assert_allclose(post.P, expected_P, rtol=1e-10, atol=1e-14)


def test_thousand_noise_free_predictions_match_closed_form() -> None:
    params = EstimatorParams(sigma_az=1.0)
    dt, n, u = 1e-3, 1000, -9.81
    fs = _kf1([1.0, 2.0], np.zeros((2, 2)))

    for _ in range(n):
        fs = predict(fs, u, dt, params)

    t = n * dt
    assert fs.x[0] == pytest.approx(1.0 + 2.0 * t + 0.5 * u * t * t, rel=1e-9)
    assert fs.x[1] == pytest.approx(2.0 + u * t, rel=1e-9)
    # sum of F^k Q F^k^T for white acceleration noise
    assert fs.P[0, 0] == pytest.approx(dt**4 * n * (4 * n * n - 1) / 12, rel=1e-9)
    assert fs.P[0, 1] == pytest.approx(dt**3 * n * n / 2, rel=1e-9)
    assert fs.P[1, 1] == pytest.approx(dt**2 * n, rel=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("kind", list(FilterKind))
def test_covariance_stays_symmetric_psd_over_long_random_runs(kind: FilterKind) -> None:
    rng = np.random.default_rng(11)
    params = EstimatorParams(sigma_az=2.0, sigma_bz=0.05)
    measured = [ImuptKind.POSITION_TD, ImuptKind.VELOCITY_MS]
    if kind.state_size == 3:
        measured.append(ImuptKind.ACCEL_BIAS_AERIAL)
    fs = initial_filter_state(kind)

    worst = 0.0
    for _ in range(100_000):
        fs = predict(fs, float(rng.normal(0.0, 20.0)), 1 / 840, params)
        if rng.random() < 0.02:
            imupt = measured[int(rng.integers(len(measured)))]
            R = float(10.0 ** rng.uniform(-6.0, 0.0))  # noqa: N806
            fs = measurement_update(fs, ImuptMeasurement(imupt, float(rng.normal()), R))
        assert np.array_equal(fs.P, fs.P.T)
        worst = min(worst, float(np.linalg.eigvalsh(fs.P).min()))

    assert worst >= -1e-12
