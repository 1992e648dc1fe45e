"""Efficacy parameters against a counterfactual (unenrolled) placebo group.

theta_c is the proportionate reduction in incidence of the control regimen
versus that counterfactual placebo. Given the experimental-vs-control rate
ratio rr, both target parameters are affine in rr:

    PE  = 1 - rr * (1 - theta_c)        (multiplicative prevention efficacy)
    AIR = (1 - rr * (1 - theta_c)) / theta_c   (averted infections ratio)

theta_c is never estimated from the trial at hand; it enters as an exogenous
ignorance interval, and the reported uncertainty interval is the envelope of
fixed-theta_c sampling confidence intervals over a grid spanning it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import chi2

from .errors import EmptyInput, NoControlEvents, ThetaCZero, ValidationError
from .quantiles import normal_quantile


@dataclass(frozen=True)
class ArmSummary:
    """Event count and person-years at risk for one arm or cohort."""

    events: int
    person_years: float

    def __post_init__(self):
        if self.events < 0:
            raise ValidationError(f"must be nonnegative, got {self.events}", field="events")
        if self.person_years <= 0:
            raise ValidationError(
                f"must be positive, got {self.person_years}", field="person_years"
            )

    @property
    def rate(self) -> float:
        return self.events / self.person_years


@dataclass(frozen=True)
class ThetaCInterval:
    low: float
    high: float

    def __post_init__(self):
        if not 0.0 <= self.low <= self.high < 1.0:
            raise ValidationError(
                f"need 0 <= low <= high < 1, got [{self.low}, {self.high}]", field="theta_c"
            )


class EfficacyParameter(Enum):
    PE = "pe"
    AIR = "air"


@dataclass(frozen=True)
class RateRatio:
    rr: float
    log_se: float
    ci_low: float
    ci_high: float
    one_sided: bool = False


@dataclass(frozen=True)
class EfficacyEstimate:
    """Point and intervals for PE or AIR.

    point, ci_low, ci_high are evaluated at theta_c fixed to the low end of
    its interval; ui_low/ui_high envelope the sampling CIs across the whole
    theta_c grid.
    """

    parameter: str
    point: float
    ci_low: float
    ci_high: float
    ui_low: float
    ui_high: float
    theta_low: float
    theta_high: float


def rate_ratio(exp: ArmSummary, ctl: ArmSummary, continuity: bool = False) -> RateRatio:
    """Experimental/control incidence rate ratio with a Wald CI on the log
    scale, log SE = sqrt(1/events_exp + 1/events_ctl).

    With zero experimental events and continuity=False the point estimate is
    0, flagged one_sided, and the CI upper bound falls back to 0.5-event
    continuity-corrected counts. continuity=True applies the 0.5 correction
    to both arms throughout.
    """
    if ctl.events == 0:
        raise NoControlEvents("control arm has zero events", field="control.events")
    z = normal_quantile(0.975)
    e1, e2 = float(exp.events), float(ctl.events)
    if continuity:
        e1, e2 = e1 + 0.5, e2 + 0.5
    if e1 == 0.0:
        ec = 0.5
        rr_c = (ec / exp.person_years) / ((e2 + 0.5) / ctl.person_years)
        se_c = math.sqrt(1.0 / ec + 1.0 / (e2 + 0.5))
        upper = math.exp(math.log(rr_c) + z * se_c)
        return RateRatio(rr=0.0, log_se=math.inf, ci_low=0.0, ci_high=upper, one_sided=True)
    rr = (e1 / exp.person_years) / (e2 / ctl.person_years)
    log_se = math.sqrt(1.0 / e1 + 1.0 / e2)
    return RateRatio(
        rr=rr,
        log_se=log_se,
        ci_low=rr * math.exp(-z * log_se),
        ci_high=rr * math.exp(z * log_se),
        one_sided=False,
    )


def pe_vs_counterfactual(rr: float, theta_c: float) -> float:
    """PE = 1 - rr * (1 - theta_c); reduces to 1 - rr at theta_c = 0."""
    if rr < 0:
        raise ValidationError(f"must be nonnegative, got {rr}", field="rr")
    if not 0.0 <= theta_c < 1.0:
        raise ValidationError(f"must be in [0, 1), got {theta_c}", field="theta_c")
    return 1.0 - rr * (1.0 - theta_c)


def averted_infections_ratio(rr: float, theta_c: float) -> float:
    """AIR = (1 - rr * (1 - theta_c)) / theta_c; above 1 when the experimental
    regimen averts more infections than control, both versus the
    counterfactual placebo."""
    if rr < 0:
        raise ValidationError(f"must be nonnegative, got {rr}", field="rr")
    if theta_c == 0.0:
        raise ThetaCZero("averted infections ratio is undefined at theta_c = 0", field="theta_c")
    if not 0.0 < theta_c < 1.0:
        raise ValidationError(f"must be in (0, 1), got {theta_c}", field="theta_c")
    return (1.0 - rr * (1.0 - theta_c)) / theta_c


def _parameter_at(parameter: EfficacyParameter, rr: float, theta_c: float) -> float:
    if parameter is EfficacyParameter.PE:
        return pe_vs_counterfactual(rr, theta_c)
    return averted_infections_ratio(rr, theta_c)


def uncertainty_interval_from_rate_ratio(
    rr: float,
    log_se: float,
    theta: ThetaCInterval,
    parameter: EfficacyParameter,
    grid_points: int = 101,
) -> EfficacyEstimate:
    """Envelope interval for PE or AIR over a theta_c grid.

    At each grid theta_c the sampling 95% CI comes from the delta method on
    log rr (the parameter is affine in rr, so the rr CI endpoints map to the
    parameter CI endpoints). The uncertainty interval is the pointwise
    envelope; the reported point and CI sit at theta_c = low.
    """
    if rr <= 0:
        raise ValidationError(f"must be positive, got {rr}", field="rr")
    if parameter is EfficacyParameter.AIR and theta.low == 0.0:
        raise ThetaCZero("averted infections ratio is undefined at theta_c = 0", field="theta_c")
    z = normal_quantile(0.975)
    rr_lo = rr * math.exp(-z * log_se)
    rr_hi = rr * math.exp(z * log_se)
    ui_low, ui_high = math.inf, -math.inf
    for theta_c in np.linspace(theta.low, theta.high, grid_points):
        t = float(theta_c)
        # The parameter decreases in rr, so the rr upper bound gives the lower
        # parameter bound.
        lo = _parameter_at(parameter, rr_hi, t)
        hi = _parameter_at(parameter, rr_lo, t)
        ui_low = min(ui_low, lo)
        ui_high = max(ui_high, hi)
    point = _parameter_at(parameter, rr, theta.low)
    ci_low = _parameter_at(parameter, rr_hi, theta.low)
    ci_high = _parameter_at(parameter, rr_lo, theta.low)
    return EfficacyEstimate(
        parameter=parameter.value,
        point=point,
        ci_low=ci_low,
        ci_high=ci_high,
        ui_low=ui_low,
        ui_high=ui_high,
        theta_low=theta.low,
        theta_high=theta.high,
    )


def uncertainty_interval(
    exp: ArmSummary,
    ctl: ArmSummary,
    theta: ThetaCInterval,
    parameter: EfficacyParameter = EfficacyParameter.PE,
    grid_points: int = 101,
    continuity: bool = False,
) -> EfficacyEstimate:
    """Envelope interval from raw arm summaries; see
    uncertainty_interval_from_rate_ratio."""
    ratio = rate_ratio(exp, ctl, continuity=continuity)
    if ratio.rr == 0.0:
        raise ValidationError(
            "zero experimental events: rerun with continuity=True", field="experimental.events"
        )
    return uncertainty_interval_from_rate_ratio(
        ratio.rr, ratio.log_se, theta, parameter, grid_points
    )


@dataclass(frozen=True)
class AdditiveDifference:
    difference: float
    se: float
    ci_low: float
    ci_high: float


def additive_difference(arm1: ArmSummary, arm2: ArmSummary) -> AdditiveDifference:
    """Incidence-rate difference lambda_2 - lambda_1 per person-year with a
    Wald CI, variance lambda_1/py_1 + lambda_2/py_2.

    Precision is driven by person-years, so the difference stays estimable
    even when event counts are small.
    """
    l1, l2 = arm1.rate, arm2.rate
    var = l1 / arm1.person_years + l2 / arm2.person_years
    se = math.sqrt(var)
    z = normal_quantile(0.975)
    diff = l2 - l1
    return AdditiveDifference(diff, se, diff - z * se, diff + z * se)


def exact_poisson_ci(
    events: int, person_years: float, coverage: float = 0.95
) -> tuple[float, float]:
    """Garwood exact Poisson CI for an incidence rate, via chi-square
    quantiles; the lower bound is 0 at zero events."""
    if events < 0:
        raise ValidationError(f"must be nonnegative, got {events}", field="events")
    if person_years <= 0:
        raise ValidationError(f"must be positive, got {person_years}", field="person_years")
    if not 0.0 < coverage < 1.0:
        raise ValidationError(f"must be in (0, 1), got {coverage}", field="coverage")
    tail = (1.0 - coverage) / 2.0
    low = 0.0 if events == 0 else chi2.ppf(tail, 2 * events) / (2.0 * person_years)
    high = chi2.ppf(1.0 - tail, 2 * (events + 1)) / (2.0 * person_years)
    return float(low), float(high)


@dataclass(frozen=True)
class SentinelCohort:
    """One background-cohort measurement: a label, the calendar window it
    covers (start, end), and its incidence summary."""

    label: str
    calendar_window: tuple[float, float]
    summary: ArmSummary


@dataclass(frozen=True)
class PooledIncidence:
    calendar_window: tuple[float, float]
    events: int
    person_years: float
    rate: float
    ci_low: float
    ci_high: float
    labels: tuple[str, ...] = ()


def sentinel_pooled_incidence(cohorts: list[SentinelCohort]) -> list[PooledIncidence]:
    """Pool cohorts by identical calendar window: summed events over summed
    person-years, with Garwood exact CIs. Windows sort ascending."""
    if not cohorts:
        raise EmptyInput("no sentinel cohorts supplied", field="cohorts")
    grouped: dict[tuple[float, float], list[SentinelCohort]] = {}
    for c in cohorts:
        grouped.setdefault(c.calendar_window, []).append(c)
    out = []
    for window in sorted(grouped):
        events = sum(c.summary.events for c in grouped[window])
        py = sum(c.summary.person_years for c in grouped[window])
        lo, hi = exact_poisson_ci(events, py)
        out.append(
            PooledIncidence(
                calendar_window=window,
                events=events,
                person_years=py,
                rate=events / py,
                ci_low=lo,
                ci_high=hi,
                labels=tuple(c.label for c in grouped[window]),
            )
        )
    return out
