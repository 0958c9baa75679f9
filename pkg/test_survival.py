import datetime

import numpy as np
import pytest
from lifelines import KaplanMeierFitter
from lifelines.statistics import logrank_test as lifelines_logrank

from conftest import ext_id
from vetting.records import ExtensionRecord, VettingLabel
from vetting.survival import (
    EmptyInput, NoDeaths, SurvivalObservation, chi_square_sf, km_estimate, lifetime_observations,
    lifetime_thresholds, logrank_test, sample_per_group, stratified_survival,
)


def _obs(pairs):
    return [SurvivalObservation(t, event) for t, event in pairs]


def _random_obs(seed, n=60, scale=100.0):
    rng = np.random.default_rng(seed)
    durations = rng.exponential(scale, size=n).astype(int)
    events = rng.random(n) < 0.7
    return _obs(zip(durations.tolist(), events.tolist()))


def test_all_censored():
    curve = km_estimate(_obs([(3, False), (9, False)]))
    assert curve.steps == []
    assert curve.median is None
    assert curve.survival_at(100) == 1.0


def test_hand_computed_curve():
    curve = km_estimate(_obs([(2, True), (4, True), (5, False)]))
    assert [(s.t, s.at_risk, s.deaths) for s in curve.steps] == [(2.0, 3, 1), (4.0, 2, 1)]
    assert curve.survival_at(1) == 1.0
    assert curve.survival_at(2) == pytest.approx(2 / 3)
    assert curve.survival_at(4.5) == pytest.approx(1 / 3)
    assert curve.median == 4.0


def test_single_mass_point():
    curve = km_estimate(_obs([(7, True)] * 4))
    assert curve.survival_at(7) == 0.0
    assert curve.median == 7.0


def test_censored_at_death_time_stays_at_risk():
    curve = km_estimate(_obs([(5, True), (5, False), (8, True)]))
    assert curve.steps[0].at_risk == 3
    assert curve.survival_at(5) == pytest.approx(2 / 3)


def test_no_censoring_is_empirical():
    durations = [1, 3, 3, 6, 10]
    curve = km_estimate(_obs([(d, True) for d in durations]))
    for t in range(12):
        assert curve.survival_at(t) == pytest.approx(np.mean(np.array(durations) > t))


def test_empty():
    with pytest.raises(EmptyInput):
        km_estimate([])
    with pytest.raises(ValueError):
        SurvivalObservation(-1, True)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_lifelines(seed):
    observations = _random_obs(seed)
    curve = km_estimate(observations)
    kmf = KaplanMeierFitter().fit([o.duration_days for o in observations], [o.event for o in observations])
    expected = kmf.survival_function_["KM_estimate"]
    ci = kmf.confidence_interval_survival_function_
    for step in curve.steps:
        assert step.survival == pytest.approx(expected.loc[step.t], abs=1e-10)
        if 0.0 < step.survival < 1.0:
            low, high = sorted(ci.loc[step.t])
            assert step.ci_low == pytest.approx(low, abs=1e-6)
            assert step.ci_high == pytest.approx(high, abs=1e-6)
    if curve.median is not None:
        assert curve.median == pytest.approx(kmf.median_survival_time_)


def test_logrank_identical_groups():
    group = _obs([(1, True), (4, False), (6, True), (9, True)])
    result = logrank_test(group, list(group))
    assert result.chi_square == pytest.approx(0.0)
    assert result.p_value == pytest.approx(1.0)


def test_logrank_extreme_separation():
    result = logrank_test(_obs([(1, True)] * 20), _obs([(100, False)] * 20))
    assert result.p_value < 0.005


def test_logrank_symmetric():
    a, b = _random_obs(3), _random_obs(4, scale=60.0)
    ab, ba = logrank_test(a, b), logrank_test(b, a)
    assert ab.chi_square == pytest.approx(ba.chi_square)
    assert ab.p_value == pytest.approx(ba.p_value)


@pytest.mark.parametrize("seeds", [(5, 6), (7, 8)])
def test_logrank_matches_lifelines(seeds):
    a, b = _random_obs(seeds[0]), _random_obs(seeds[1], scale=70.0)
    ours = logrank_test(a, b)
    reference = lifelines_logrank([o.duration_days for o in a], [o.duration_days for o in b],
                                  [o.event for o in a], [o.event for o in b])
    assert ours.chi_square == pytest.approx(reference.test_statistic, rel=1e-9)
    assert ours.p_value == pytest.approx(reference.p_value, rel=1e-9)


def test_chi_square_critical_value():
    assert chi_square_sf(3.841) == pytest.approx(0.05, abs=1e-3)
    assert chi_square_sf(0.0) == 1.0


def test_logrank_errors():
    with pytest.raises(NoDeaths):
        logrank_test(_obs([(1, False)]), _obs([(2, False)]))
    with pytest.raises(EmptyInput):
        logrank_test([], _obs([(1, True)]))


def test_thresholds():
    stats = lifetime_thresholds(_obs([(3, True), (20, True), (400, True), (4000, False)]))
    assert stats["share_under_1_week"] == 0.25
    assert stats["share_under_1_month"] == 0.5
    assert stats["share_over_1_year"] == 0.5
    assert stats["count_over_10_years"] == 1
    assert stats["median_days"] == 210.0


def test_sampling_is_seeded_and_ordered():
    groups = {"a": list(range(50)), "b": list(range(3))}
    first = sample_per_group(groups, size=10, seed=1)
    assert first == sample_per_group(groups, size=10, seed=1)
    assert first["a"] == sorted(first["a"]) and len(first["a"]) == 10
    assert first["b"] == [0, 1, 2]


def _record(n, label, release_day, removal_day=None):
    release = datetime.date(2021, 1, 1) + datetime.timedelta(days=release_day)
    removal = datetime.date(2021, 1, 1) + datetime.timedelta(days=removal_day) if removal_day is not None else None
    return ExtensionRecord(ext_id(n), "1", "p", 1, release, release, removal, VettingLabel.parse(label), f"x{n}")


def test_lifetimes_censor_at_crawl_end():
    records = [_record(1, "malware", 0, 30), _record(2, "none", 10)]
    observations = lifetime_observations(records, crawl_end=datetime.date(2021, 3, 2))
    assert observations == [SurvivalObservation(30, True), SurvivalObservation(50, False)]
    assert lifetime_observations(records)[1] == SurvivalObservation(20, False)


def test_stratified_survival():
    records = ([_record(n, "malware", 0, 5 + n) for n in range(10)]
               + [_record(20 + n, "policy_violation", 0, 300 + n) for n in range(10)]
               + [_record(40 + n, "none", n) for n in range(5)])
    report = stratified_survival(records, crawl_end=datetime.date(2022, 1, 1))
    assert list(report.curves) == ["All", "M", "PV"]
    assert report.curves["M"].median == 9.0
    assert list(report.tests) == [("M", "PV")]
    assert report.tests[("M", "PV")].p_value < 0.005
    assert report.tests_frame().shape == (1, 4)
    assert report.curves["All"].to_frame().columns.tolist() == ["t", "survival", "at_risk", "deaths",
                                                                "ci_low", "ci_high"]
