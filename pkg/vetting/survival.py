# survival.py
"""Time-to-removal analysis: Kaplan-Meier curves and log-rank tests."""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.stats import chi2, norm

from common import config
from common.errors import LookalikeError
from vetting.records import VETTED_LABELS, crawl_end_of

logger = logging.getLogger(__name__)

CI_LEVEL = 0.95


class EmptyInput(LookalikeError):
    pass


class NoDeaths(LookalikeError):
    pass


@dataclass(frozen=True)
class SurvivalObservation:
    duration_days: int
    event: bool

    def __post_init__(self):
        if self.duration_days < 0:
            raise ValueError("duration must be non-negative")


@dataclass(frozen=True)
class KmStep:
    t: float
    survival: float
    at_risk: int
    deaths: int
    ci_low: float
    ci_high: float


@dataclass
class KmCurve:
    steps: List[KmStep]
    median: Optional[float]
    n: int = 0

    def survival_at(self, t):
        """S(t): product over death times <= t."""
        s = 1.0
        for step in self.steps:
            if step.t > t:
                break
            s = step.survival
        return s

    def to_frame(self):
        return pd.DataFrame(
            [(s.t, s.survival, s.at_risk, s.deaths, s.ci_low, s.ci_high) for s in self.steps],
            columns=["t", "survival", "at_risk", "deaths", "ci_low", "ci_high"],
        )


@dataclass(frozen=True)
class LogRankResult:
    chi_square: float
    p_value: float

    def to_dict(self):
        return {"chi_square": self.chi_square, "p_value": self.p_value}


def _arrays(observations):
    t = np.array([o.duration_days for o in observations], dtype=float)
    e = np.array([bool(o.event) for o in observations], dtype=bool)
    return t, e


def _exp_greenwood(s, greenwood, z):
    """Log(-log) transformed interval; degenerate at S = 1 and S = 0."""
    if s >= 1.0:
        return 1.0, 1.0
    if s <= 0.0 or not np.isfinite(greenwood):
        return 0.0, 0.0
    log_s = np.log(s)
    spread = z * np.sqrt(greenwood) / log_s
    low = float(np.exp(-np.exp(np.log(-log_s) - spread)))
    high = float(np.exp(-np.exp(np.log(-log_s) + spread)))
    return low, high


def km_estimate(observations, ci_level=CI_LEVEL):
    """
    Product-limit estimate of the survival function.

    Parameters:
        observations: SurvivalObservation list (event True = removed).
        ci_level: two-sided level of the exponential Greenwood interval.

    Returns:
        KmCurve stepping only at death times. Observations censored at a
        death time stay in that time's risk set.
    """
    if not observations:
        raise EmptyInput("km_estimate needs at least one observation")
    t, e = _arrays(observations)
    z = norm.ppf(0.5 + ci_level / 2)
    s, greenwood = 1.0, 0.0
    steps = []
    for ut in np.unique(t[e]):
        at_risk = int(np.sum(t >= ut))
        deaths = int(np.sum((t == ut) & e))
        s *= 1.0 - deaths / at_risk
        greenwood = greenwood + deaths / (at_risk * (at_risk - deaths)) if at_risk > deaths else np.inf
        low, high = _exp_greenwood(s, greenwood, z)
        steps.append(KmStep(float(ut), float(s), at_risk, deaths, low, high))
    median = next((step.t for step in steps if step.survival <= 0.5), None)
    return KmCurve(steps, median, len(observations))


def chi_square_sf(x, dof=1):
    """Upper-tail chi-square probability."""
    return float(chi2.sf(x, dof))


def logrank_test(group_a, group_b):
    """
    Two-group log-rank test.

    Returns:
        LogRankResult with the 1-dof chi-square statistic and its p-value.
    """
    if not group_a or not group_b:
        raise EmptyInput("logrank_test needs two non-empty groups")
    ta, ea = _arrays(group_a)
    tb, eb = _arrays(group_b)
    death_times = np.unique(np.concatenate([ta[ea], tb[eb]]))
    if death_times.size == 0:
        raise NoDeaths("no deaths in either group")

    observed_minus_expected, variance = 0.0, 0.0
    for ut in death_times:
        n_a = np.sum(ta >= ut)
        n = n_a + np.sum(tb >= ut)
        d_a = np.sum((ta == ut) & ea)
        d = d_a + np.sum((tb == ut) & eb)
        share = n_a / n
        observed_minus_expected += d_a - d * share
        if n > 1:
            variance += d * share * (1 - share) * (n - d) / (n - 1)

    if variance <= 0:
        return LogRankResult(0.0, 1.0)
    statistic = float(observed_minus_expected ** 2 / variance)
    return LogRankResult(statistic, chi_square_sf(statistic, 1))


def lifetime_observations(records, crawl_end=None):
    """One observation per record: removal is the event, still-published items are censored."""
    records = list(records)
    crawl_end = crawl_end or crawl_end_of(records)
    return [SurvivalObservation(r.lifetime_days(crawl_end), r.removed) for r in records]


def lifetime_thresholds(observations):
    """Headline lifetime shares among the given (usually vetted) observations."""
    if not observations:
        raise EmptyInput("no observations")
    days = np.array([o.duration_days for o in observations])
    return {
        "count": int(days.size),
        "share_over_1_year": float(np.mean(days > 365)),
        "count_over_10_years": int(np.sum(days > 3650)),
        "share_under_1_month": float(np.mean(days < 30)),
        "share_under_1_week": float(np.mean(days < 7)),
        "median_days": float(np.median(days)),
    }


def sample_per_group(groups, size=config.KM_SAMPLE_SIZE, seed=config.KM_SAMPLE_SEED):
    """Fixed-seed sample of at most size items per group, original order kept."""
    rng = np.random.default_rng(seed)
    sampled = {}
    for name in sorted(groups):
        items = list(groups[name])
        if size is None or len(items) <= size:
            sampled[name] = items
            continue
        picked = np.sort(rng.choice(len(items), size=size, replace=False))
        sampled[name] = [items[i] for i in picked]
    return sampled


@dataclass
class SurvivalReport:
    curves: Dict[str, KmCurve] = field(default_factory=dict)
    tests: Dict[Tuple[str, str], LogRankResult] = field(default_factory=dict)
    thresholds: Dict[str, dict] = field(default_factory=dict)

    def tests_frame(self):
        return pd.DataFrame(
            [(a, b, r.chi_square, r.p_value) for (a, b), r in self.tests.items()],
            columns=["group_a", "group_b", "chi_square", "p_value"],
        )


def stratified_survival(records, crawl_end=None, sample_size=None, seed=config.KM_SAMPLE_SEED):
    """
    KM curves for all records and per vetting label, plus pairwise label log-rank tests.

    Sampling (sample_size) only thins the plotted curves; tests use every record.
    """
    records = list(records)
    crawl_end = crawl_end or crawl_end_of(records)
    groups = {"All": records}
    for label in VETTED_LABELS:
        groups[label.code] = [r for r in records if r.vetting_label is label]

    observations = {name: lifetime_observations(members, crawl_end) for name, members in groups.items()}
    plotted = sample_per_group(observations, sample_size, seed) if sample_size else observations

    report = SurvivalReport()
    for name, obs in plotted.items():
        if obs:
            report.curves[name] = km_estimate(obs)
            report.thresholds[name] = lifetime_thresholds(obs)
    for a, b in combinations([label.code for label in VETTED_LABELS], 2):
        try:
            report.tests[(a, b)] = logrank_test(observations[a], observations[b])
        except (EmptyInput, NoDeaths) as e:
            logger.warning("log-rank %s vs %s skipped: %s", a, b, e)
    # curves keep the All, M, PV, MPV order
    report.curves = {k: report.curves[k] for k in groups if k in report.curves}
    return report
