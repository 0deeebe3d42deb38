import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopper_est.models import AgilityInputs, MetricsReport
from hopper_est.services.dataset import DataError
from hopper_est.services.metrics import (
    AgilityError,
    agility,
    build_hop_records,
    compare_estimators,
    compute_metrics,
    error_growth,
    ground_height_track,
    optical_flow_error_proxy,
    per_hop_errors,
    report_row,
    trial_agility,
)

G = 9.81


def test_perfect_estimates_have_zero_error(make_log, make_trace) -> None:
    log = make_log(n_hops=3)

    report = compute_metrics(build_hop_records(log, make_trace(log)))

    assert report.n_hops == 3
    assert report.M1 == pytest.approx(0.0, abs=1e-12)
    assert report.M2 == pytest.approx(0.0, abs=1e-12)
    assert report.M3 == 0.0
    assert report.M4 == 0.0
    assert report.M5 == pytest.approx(0.0, abs=1e-4)
    assert report.gamma2 == 0.0
    assert report.excluded_hops == []
    assert len(report.ground_height) == 3


def test_hop_records_follow_true_transitions(make_log, make_trace) -> None:
    log = make_log(n_hops=3, height=1.3)

    records = build_hop_records(log, make_trace(log))

    assert [r.index for r in records] == [0, 1, 2]
    for rec in records:
        assert rec.h_HA_true == pytest.approx(1.3, abs=1e-4)
        assert rec.t_HA == rec.t_HA_true
        assert rec.h_TD == pytest.approx(0.0, abs=1e-2)
        assert rec.aerial[-1]


def test_hop_records_need_matching_trace(make_log, make_trace) -> None:
    log = make_log(n_hops=2)

    with pytest.raises(DataError, match="does not match"):
        build_hop_records(log, make_trace(make_log(n_hops=3)))


def test_hop_record_validation(make_record) -> None:
    rec = make_record()

    with pytest.raises(ValueError, match="precede"):
        replace(rec, t_HA_true=0.0)
    with pytest.raises(ValueError, match="differ in length"):
        replace(rec, v_hat=np.zeros(3))


def test_apex_and_timing_errors(make_record) -> None:
    records = [make_record(h_HA=1.1, t_HA=1.05), make_record(1, h_HA=0.9, t_HA=0.95)]

    report = compute_metrics(records)

    assert report.M3 == pytest.approx(10.0)
    assert report.gamma1 == pytest.approx(0.1)
    assert report.M4 == pytest.approx(0.05)


def test_normalized_tracking_errors(make_record) -> None:
    report = compute_metrics([make_record(z_scale=1.1, v_scale=0.8, h_desired=1.2)])

    assert report.M1 == pytest.approx(10.0)
    assert report.M2 == pytest.approx(20.0)
    assert report.M5 == pytest.approx(0.2)
    assert report.ground_height == []


def test_aerial_only_errors_ignore_stance(make_record) -> None:
    rec = make_record()
    rec = replace(
        rec,
        z_hat=rec.z * np.array([1.0, 1.0, 2.0, 2.0]),
        aerial=np.array([True, True, False, False]),
    )

    assert compute_metrics([rec], aerial_only=True).M1 == 0.0
    assert compute_metrics([rec]).M1 > 0.0


def test_zero_truth_hops_are_excluded(make_record) -> None:
    zero = replace(make_record(1), z=np.zeros(4), z_hat=np.zeros(4))

    report = compute_metrics([make_record(0, z_scale=1.1), zero])

    assert report.excluded_hops == [1]
    assert report.n_hops == 2
    assert report.M1 == pytest.approx(10.0)


def test_every_hop_excluded_raises(make_record) -> None:
    zero = replace(make_record(), v=np.zeros(4), v_hat=np.zeros(4))

    with pytest.raises(DataError, match="Every hop"):
        compute_metrics([zero])


def test_metrics_need_a_usable_hop(make_record) -> None:
    rec = make_record()
    short = replace(
        rec,
        z=rec.z[:1],
        z_hat=rec.z_hat[:1],
        v=rec.v[:1],
        v_hat=rec.v_hat[:1],
        aerial=rec.aerial[:1],
    )

    with pytest.raises(DataError, match="at least one hop"):
        compute_metrics([])
    with pytest.raises(DataError, match="at least one hop"):
        compute_metrics([short])


def test_ground_height_step(make_record) -> None:
    records = [make_record(0, h_HA=1.0), make_record(1, h_HA=1.1)]

    assert ground_height_track(records) == pytest.approx([0.0, 0.05])


def test_ground_height_of_identical_hops_is_flat(make_record) -> None:
    records = [make_record(i, h_HA=1.2, h_TD=0.0) for i in range(4)]

    assert ground_height_track(records) == pytest.approx([0.0] * 4)


def test_terrain_step_is_tracked_within_one_hop(make_record) -> None:
    # a +0.2 m step under hop 3: the touchdown sees it first, the apex next
    h_TD = [0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0]  # noqa: N806
    h_HA = [1.0, 1.0, 1.0, 1.2, 1.2, 1.2, 1.2]  # noqa: N806
    records = [
        make_record(i, h_TD=td, h_HA=ha)
        for i, (td, ha) in enumerate(zip(h_TD, h_HA, strict=True))
    ]

    track = ground_height_track(records)

    assert track == pytest.approx([0.0, 0.0, 0.0, 0.1, 0.2, 0.2, 0.2])


def test_flat_ground_drift_stays_small_over_thirty_hops(make_record) -> None:
    rng = np.random.default_rng(30)
    records = [
        make_record(i, h_TD=float(rng.normal(0.0, 0.005)), h_HA=float(rng.normal(1.0, 0.01)))
        for i in range(30)
    ]

    track = ground_height_track(records)

    assert len(track) == 30
    assert abs(float(np.mean(track))) <= 0.05
    assert abs(float(track[-1])) <= 0.05


def test_ground_height_needs_two_hops(make_record) -> None:
    with pytest.raises(DataError, match="two hops"):
        ground_height_track([make_record()])


def test_ballistic_agility() -> None:
    res = agility(AgilityInputs(h1=1.0))

    assert res.t_r == pytest.approx(math.sqrt(2.0 / G))
    assert res.nu_ha == pytest.approx(2.2147, abs=1e-4)
    assert res.nu_vja == pytest.approx(res.nu_ha)
    assert res.h0_implied == pytest.approx(1.0)


def test_direct_time_agility_matches_published_values() -> None:
    res = agility(AgilityInputs(h1=3.92, t_apogee=1.58, t_cycle=2.60))

    assert res.nu_vja == pytest.approx(2.47, abs=0.02)
    assert res.nu_ha == pytest.approx(3.01, abs=0.02)
    assert res.t_d == pytest.approx(1.02)


def test_apogee_without_cycle_assumes_symmetric_descent() -> None:
    res = agility(AgilityInputs(h1=1.0, t_s=0.1, t_apogee=0.5))

    assert res.t_r == pytest.approx(0.4)
    assert res.t_d == pytest.approx(0.4)


def test_explicit_times_take_precedence() -> None:
    res = agility(AgilityInputs(h1=1.0, t_apogee=0.5, t_r=0.3, t_d=0.2))

    assert res.t_r == 0.3
    assert res.t_d == 0.2
    assert res.nu_ha == pytest.approx(2.0 / 0.5)


def test_implied_drop_height() -> None:
    res = agility(AgilityInputs(h1=1.0, gamma_r=0.2, gamma_d=0.1))

    assert res.h0_implied == pytest.approx(0.8 / 0.9)


@given(
    h1=st.floats(min_value=0.05, max_value=10.0),
    t_s=st.floats(min_value=0.0, max_value=0.5),
    gamma_r=st.floats(min_value=-2.0, max_value=0.9),
    gamma_d=st.floats(min_value=-2.0, max_value=0.9),
)
def test_unified_agility_limits(h1: float, t_s: float, gamma_r: float, gamma_d: float) -> None:
    base = {"h1": h1, "t_s": t_s, "gamma_r": gamma_r, "gamma_d": gamma_d}

    vertical = agility(AgilityInputs(**base, beta=0.0))
    hopping = agility(AgilityInputs(**base, beta=1.0))

    assert vertical.nu_uha == pytest.approx(vertical.nu_vja)
    assert hopping.nu_uha == pytest.approx(hopping.nu_ha)


@pytest.mark.parametrize(
    ("inputs", "match"),
    [
        ({"h1": 1.0, "gamma_ld": 1.5}, "Non-positive"),
        ({"h1": 1.0, "t_s": 0.6, "t_apogee": 0.5}, "must exceed t_s"),
        ({"h1": 1.0, "t_apogee": 0.5, "t_cycle": 0.4}, "must exceed t_apogee"),
    ],
)
def test_agility_rejects_inconsistent_inputs(inputs, match: str) -> None:
    with pytest.raises(AgilityError, match=match):
        agility(AgilityInputs(**inputs))


def test_trial_agility_is_height_over_cycle(make_log) -> None:
    height = 1.0
    log = make_log(n_hops=3, height=height)

    res = trial_agility(log)

    t_fall = math.sqrt(2.0 * (height - 0.2683) / G)
    cycle = 2.0 * t_fall + math.pi / 35.4
    assert res.nu_ha == pytest.approx(2.0 * height / cycle, rel=1e-2)


def test_trial_agility_needs_a_full_cycle(make_log) -> None:
    assert trial_agility(make_log(n_hops=1)) is None


def test_optical_flow_proxy() -> None:
    assert optical_flow_error_proxy(3.5) == 3.5
    with pytest.raises(ValueError, match="non-negative"):
        optical_flow_error_proxy(-1.0)


def _spread_records(make_record, offset: float = 0.0) -> list:
    return [
        make_record(
            i,
            h_HA=1.0 + 0.1 * (i + 1) + offset,
            t_HA=1.0 + 0.01 * (i + 1) + offset,
            z_scale=1.0 + 0.1 * (i + 1) + offset,
            v_scale=1.0 + 0.05 * (i + 1) + offset,
        )
        for i in range(4)
    ]


def test_per_hop_errors_in_percent(make_record) -> None:
    errors = per_hop_errors([make_record(h_HA=1.2, z_scale=1.1)])

    assert errors["M1"] == pytest.approx([10.0])
    assert errors["apex_error"] == pytest.approx([20.0])


def test_identical_estimators_are_indistinguishable(make_record) -> None:
    records = _spread_records(make_record)

    results = compare_estimators(records, records)

    assert [r.metric for r in results] == ["M1", "M2", "apex_error", "apex_time_error"]
    for r in results:
        assert r.statistic == pytest.approx(0.0, abs=1e-9)
        assert r.pvalue == pytest.approx(1.0)
        assert r.n_a == r.n_b == 4


def test_clearly_worse_estimator_is_significant(make_record) -> None:
    results = compare_estimators(_spread_records(make_record), _spread_records(make_record, 0.5))

    by_metric = {r.metric: r for r in results}
    assert by_metric["M1"].pvalue < 0.01
    assert by_metric["M1"].statistic < 0.0


def test_single_hop_comparison_is_undefined(make_record) -> None:
    results = compare_estimators([make_record()], [make_record()])

    assert all(math.isnan(r.statistic) and math.isnan(r.pvalue) for r in results)


def test_error_growth_flags_drift() -> None:
    t = np.linspace(0.0, 10.0, 1001)
    sign = np.where(np.arange(len(t)) % 2 == 0, 1.0, -1.0)

    growing = error_growth(t, t * sign)
    bounded = error_growth(t, sign)

    assert growing["unbounded"]
    assert growing["slope"] > 0.0
    assert not bounded["unbounded"]
    assert bounded["first_std"] == pytest.approx(1.0, abs=1e-3)


def test_error_growth_needs_samples() -> None:
    with pytest.raises(DataError, match="two samples"):
        error_growth(np.array([0.0]), np.array([0.0]))


def _settled_hopping_error(t: np.ndarray) -> np.ndarray:
    # zero until the first contact, then a bounded per-hop oscillation
    return np.where(t < 1.8, 0.0, 0.3 * np.sin(2.0 * np.pi * t / 1.7))


def test_error_growth_ignores_the_settling_span() -> None:
    t = np.arange(0.0, 10.0, 1 / 840)
    err = _settled_hopping_error(t)

    assert error_growth(t, err, window=2.0, settle=0.0)["unbounded"]
    assert not error_growth(t, err)["unbounded"]


def test_error_growth_flags_drift_after_settling() -> None:
    t = np.arange(0.0, 10.0, 1 / 840)
    err = _settled_hopping_error(t) + 0.2 * np.clip(t - 2.0, 0.0, None) ** 2

    growth = error_growth(t, err)

    assert growth["unbounded"]
    assert growth["last_std"] > 2.0 * growth["first_std"]


def test_error_growth_rejects_a_settle_longer_than_the_run() -> None:
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(DataError, match="settling span"):
        error_growth(t, np.zeros_like(t), settle=2.0)


def test_report_row_flattens_series(make_log, make_trace) -> None:
    log = make_log(n_hops=3)
    report = compute_metrics(build_hop_records(log, make_trace(log)))

    row = report_row(report, filter="kf1", trial=log.name)

    assert row["filter"] == "kf1"
    assert row["n_hops"] == 3
    assert row["n_excluded"] == 0
    assert row["ground_height_final"] == report.ground_height[-1]
    assert "ground_height" not in row


def test_report_row_includes_agility() -> None:
    report = MetricsReport(
        M1=1.0,
        M2=2.0,
        M3=3.0,
        M4=0.1,
        M5=0.2,
        gamma1=0.03,
        gamma2=0.1,
        gamma3=0.2,
        n_hops=1,
        agility=agility(AgilityInputs(h1=1.0)),
    )

    row = report_row(report)

    assert row["agility_nu_ha"] == pytest.approx(2.2147, abs=1e-4)
    assert row["ground_height_final"] == 0.0
