"""Closed-form sizing for two-arm prevention efficacy trials.

Event requirements come from the standard event-count formula for a one-sided
proportional-hazards comparison: the required number of pooled infection
events is

    D = ceil[ (z_{1-alpha} + z_{power})^2 / (p1 * p2 * ln^2(hr_alt / hr_null)) ]

with p1, p2 the allocation fractions (4x multiplier for 1:1). Total sample
size converts D through a per-participant event probability under one of two
selectable event-accrual models, then compares against the published
reference sample-size table for the three design families (facilitated
access, active-control comparison, background provision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import DegenerateHypotheses, InvalidAllocation, ValidationError
from .quantiles import normal_quantile


class DesignKind(Enum):
    """Two-arm design families, by how the proven background intervention
    is accommodated."""

    LAYER = "layer"
    COMPARE = "compare"
    COMBINE = "combine"

    @property
    def how_b_accommodated(self) -> str:
        return _KIND_TEXT[self][0]

    @property
    def enrolled_population(self) -> str:
        return _KIND_TEXT[self][1]

    @property
    def effect_scale(self) -> str:
        """PE against an inactive comparator, RPE between active regimens."""
        return "PE" if self is DesignKind.LAYER else "RPE"


_KIND_TEXT = {
    DesignKind.LAYER: (
        "facilitated access to the proven intervention for all participants",
        "individuals who declined the proven intervention after facilitated access",
    ),
    DesignKind.COMPARE: (
        "proven intervention provided to one study arm, experimental regimen to the other",
        "individuals willing to accept either regimen by randomization",
    ),
    DesignKind.COMBINE: (
        "proven intervention provided to all participants, experimental regimen added in one arm",
        "individuals accepting the proven intervention",
    ),
}


class EventAccrualModel(Enum):
    """How annual incidence converts to a per-participant event probability."""

    EXPONENTIAL_DEPLETION = "exponential_depletion"
    LINEAR_PERSON_TIME = "linear_person_time"


@dataclass(frozen=True)
class HypothesisPair:
    """Null and alternative prevention efficacy for a one-sided test.

    Parameters
    ----------
    pe_null : float
        Prevention efficacy under the null, in [0, 1). The null hazard
        ratio is 1 - pe_null.
    pe_alt : float
        Prevention efficacy under the alternative, in (0, 1); must exceed
        pe_null.
    one_sided_alpha : float
        One-sided type I error rate.
    power : float
        Target power at the alternative.
    """

    pe_null: float
    pe_alt: float
    one_sided_alpha: float = 0.025
    power: float = 0.90

    def __post_init__(self):
        if not 0.0 <= self.pe_null < 1.0:
            raise ValidationError(f"must be in [0, 1), got {self.pe_null}", field="pe_null")
        if not 0.0 < self.pe_alt < 1.0:
            raise ValidationError(f"must be in (0, 1), got {self.pe_alt}", field="pe_alt")
        if self.pe_alt <= self.pe_null:
            raise ValidationError(
                f"pe_alt ({self.pe_alt}) must exceed pe_null ({self.pe_null})", field="pe_alt"
            )
        if not 0.0 < self.one_sided_alpha < 0.5:
            raise ValidationError(
                f"must be in (0, 0.5), got {self.one_sided_alpha}", field="one_sided_alpha"
            )
        if not 0.5 <= self.power < 1.0:
            raise ValidationError(f"must be in [0.5, 1), got {self.power}", field="power")

    @property
    def hr_null(self) -> float:
        return 1.0 - self.pe_null

    @property
    def hr_alt(self) -> float:
        return 1.0 - self.pe_alt


@dataclass(frozen=True)
class DesignSpec:
    """Structural assumptions for one trial design.

    `annual_dropout` is the total fraction lost over the follow-up window by
    default (`dropout_is_annual=False`), matching a "10% random dropout"
    reading; set `dropout_is_annual=True` to interpret it as a yearly rate.
    Either way dropout is modeled as exponential censoring.
    """

    kind: DesignKind
    hypotheses: HypothesisPair
    followup_years: float = 2.0
    accrual_years: float = 0.0
    annual_dropout: float = 0.10
    allocation: tuple[int, int] = (1, 1)
    event_accrual_model: EventAccrualModel = EventAccrualModel.EXPONENTIAL_DEPLETION
    dropout_is_annual: bool = False

    def __post_init__(self):
        if self.followup_years <= 0:
            raise ValidationError(
                f"must be positive, got {self.followup_years}", field="followup_years"
            )
        if self.accrual_years < 0:
            raise ValidationError(
                f"must be nonnegative, got {self.accrual_years}", field="accrual_years"
            )
        if not 0.0 <= self.annual_dropout < 1.0:
            raise ValidationError(
                f"must be in [0, 1), got {self.annual_dropout}", field="annual_dropout"
            )
        a1, a2 = self.allocation
        if a1 <= 0 or a2 <= 0:
            raise InvalidAllocation(
                f"allocation parts must be positive, got {self.allocation}", field="allocation"
            )

    @property
    def allocation_fractions(self) -> tuple[float, float]:
        a1, a2 = self.allocation
        return a1 / (a1 + a2), a2 / (a1 + a2)


@dataclass(frozen=True)
class IncidenceScenario:
    """Annual infection incidences for the two arms, optionally derived from
    a counterfactual placebo incidence and uptake of the background
    intervention."""

    annual_incidence_arm1: float
    annual_incidence_arm2: float
    counterfactual_placebo_incidence: float | None = None
    b_uptake: float | None = None
    b_efficacy: float = 0.67

    def __post_init__(self):
        # Zero is allowed in arm 1 only: a fully protective regimen is a
        # legitimate simulation edge case.
        if self.annual_incidence_arm1 < 0:
            raise ValidationError(
                f"must be nonnegative, got {self.annual_incidence_arm1}",
                field="annual_incidence_arm1",
            )
        if self.annual_incidence_arm2 <= 0:
            raise ValidationError(
                f"must be positive, got {self.annual_incidence_arm2}",
                field="annual_incidence_arm2",
            )
        if self.annual_incidence_arm1 > self.annual_incidence_arm2:
            raise ValidationError(
                "arm 1 incidence must not exceed arm 2 incidence under the alternative",
                field="annual_incidence_arm1",
            )
        if self.b_uptake is not None and not 0.0 <= self.b_uptake <= 1.0:
            raise ValidationError(f"must be in [0, 1], got {self.b_uptake}", field="b_uptake")
        if not 0.0 <= self.b_efficacy <= 1.0:
            raise ValidationError(f"must be in [0, 1], got {self.b_efficacy}", field="b_efficacy")


def required_events(hyp: HypothesisPair, allocation: tuple[int, int] = (1, 1)) -> int:
    """Pooled infection events needed for the one-sided proportional-hazards
    test of hyp at its alpha and power.

    Parameters
    ----------
    hyp : HypothesisPair
    allocation : tuple of int
        Arm 1 : arm 2 randomization ratio.

    Returns
    -------
    int
        Event count, rounded up.
    """
    a1, a2 = allocation
    if a1 <= 0 or a2 <= 0:
        raise InvalidAllocation(
            f"allocation parts must be positive, got {allocation}", field="allocation"
        )
    ratio = hyp.hr_alt / hyp.hr_null
    if abs(ratio - 1.0) < 1e-12:
        raise DegenerateHypotheses(
            "null and alternative hazard ratios coincide", field="pe_alt"
        )
    p1, p2 = a1 / (a1 + a2), a2 / (a1 + a2)
    z = normal_quantile(1.0 - hyp.one_sided_alpha) + normal_quantile(hyp.power)
    return math.ceil(z * z / (p1 * p2 * math.log(ratio) ** 2))


def dropout_hazard(spec: DesignSpec) -> float:
    """Exponential censoring hazard implied by the design's dropout setting."""
    d = spec.annual_dropout
    if d == 0.0:
        return 0.0
    if spec.dropout_is_annual:
        return -math.log1p(-d)
    return -math.log1p(-d) / spec.followup_years


def expected_person_years(spec: DesignSpec) -> float:
    """Expected at-risk person-years per enrolled participant, counting
    dropout but not infection depletion."""
    mu = dropout_hazard(spec)
    t = spec.followup_years
    if mu == 0.0:
        return t
    return (1.0 - math.exp(-mu * t)) / mu


def event_probability(arm_incidence: float, spec: DesignSpec) -> float:
    """Probability an enrolled participant has an observed infection event.

    Under EXPONENTIAL_DEPLETION the participant is exposed to competing
    exponential infection (rate lambda) and dropout (rate mu) hazards over the
    follow-up window T:

        p = lambda / (lambda + mu) * (1 - exp(-(lambda + mu) * T))

    Under LINEAR_PERSON_TIME the event probability is incidence times the
    expected at-risk person-years (dropout only, no infection depletion),
    capped at 1. The two agree to first order in lambda*T.
    """
    lam = arm_incidence
    if lam < 0:
        raise ValidationError(f"must be nonnegative, got {lam}", field="arm_incidence")
    if lam == 0.0:
        return 0.0
    mu = dropout_hazard(spec)
    t = spec.followup_years
    if spec.event_accrual_model is EventAccrualModel.EXPONENTIAL_DEPLETION:
        s = lam + mu
        return lam / s * (1.0 - math.exp(-s * t))
    return min(lam * expected_person_years(spec), 1.0)


@dataclass(frozen=True)
class SizingResult:
    """Intermediate sizing quantities, kept for reporting."""

    required_events: int
    event_probability_arm1: float
    event_probability_arm2: float
    mean_event_probability: float
    n_unrounded: float
    n_total: int


def sizing_detail(spec: DesignSpec, scen: IncidenceScenario) -> SizingResult:
    """Full sizing computation: events, per-arm event probabilities, and the
    rounded total sample size."""
    d = required_events(spec.hypotheses, spec.allocation)
    p1 = event_probability(scen.annual_incidence_arm1, spec)
    p2 = event_probability(scen.annual_incidence_arm2, spec)
    w1, w2 = spec.allocation_fractions
    pbar = w1 * p1 + w2 * p2
    if pbar <= 0.0:
        raise ValidationError("event probability is zero in both arms", field="scenario")
    raw = d / pbar
    a1, a2 = spec.allocation
    g = math.gcd(a1, a2)
    block = (a1 + a2) // g
    n = math.ceil(raw)
    n = ((n + block - 1) // block) * block
    return SizingResult(d, p1, p2, pbar, raw, n)


def total_sample_size(spec: DesignSpec, scen: IncidenceScenario) -> int:
    """Total enrollment (both arms) so the expected pooled event count meets
    the requirement; rounded up to a multiple of the allocation block."""
    return sizing_detail(spec, scen).n_total


def incidence_under_uptake(placebo_incidence: float, u: float, e: float) -> float:
    """Arm incidence implied by uptake `u` of a background intervention with
    efficacy `e`, applied to a counterfactual placebo incidence."""
    if placebo_incidence <= 0:
        raise ValidationError(
            f"must be positive, got {placebo_incidence}", field="placebo_incidence"
        )
    if not 0.0 <= u <= 1.0:
        raise ValidationError(f"must be in [0, 1], got {u}", field="u")
    if not 0.0 <= e <= 1.0:
        raise ValidationError(f"must be in [0, 1], got {e}", field="e")
    return placebo_incidence * (1.0 - u * e)


@dataclass(frozen=True)
class UptakeRow:
    uptake: float
    efficacy: float
    implied_incidence: float
    nominal_incidence: float
    deviates_from_nominal: bool


# Published nominal incidence levels paired with the uptake fractions they
# are described as representing (0%/50%/90% protected person-years).
NOMINAL_UPTAKE_INCIDENCES = ((0.0, 0.03), (0.5, 0.015), (0.9, 0.003))


def uptake_report(placebo_incidence: float = 0.03, efficacy: float = 0.67) -> list[UptakeRow]:
    """Implied arm incidences for the nominal uptake scenarios, next to the
    published nominal values; rows are flagged when the two disagree (they
    coincide only for efficacy = 1)."""
    rows = []
    for u, nominal in NOMINAL_UPTAKE_INCIDENCES:
        implied = incidence_under_uptake(placebo_incidence, u, efficacy)
        rows.append(
            UptakeRow(
                uptake=u,
                efficacy=efficacy,
                implied_incidence=implied,
                nominal_incidence=nominal,
                deviates_from_nominal=not math.isclose(implied, nominal, rel_tol=1e-9),
            )
        )
    return rows


@dataclass(frozen=True)
class Table2Row:
    """One reference-table row recomputed under both event-accrual models."""

    kind: DesignKind
    pe_null: float
    pe_alt: float
    incidence_arm1: float
    incidence_arm2: float
    n_linear_person_time: int
    n_exponential_depletion: int
    n_published: int
    rel_dev_linear: float
    rel_dev_exponential: float


# Published reference sample sizes being reproduced: three incidence levels
# per hypothesis block, for each design family.
PUBLISHED_ROWS = (
    (DesignKind.LAYER, 0.00, 0.50, 0.015, 0.03, 2071),
    (DesignKind.LAYER, 0.00, 0.50, 0.0075, 0.015, 4141),
    (DesignKind.LAYER, 0.00, 0.50, 0.0025, 0.005, 12422),
    (DesignKind.LAYER, 0.25, 0.70, 0.009, 0.03, 1369),
    (DesignKind.LAYER, 0.25, 0.70, 0.0045, 0.015, 2737),
    (DesignKind.LAYER, 0.25, 0.70, 0.0015, 0.005, 8211),
    (DesignKind.COMPARE, 0.00, 0.40, 0.006, 0.01, 10632),
    (DesignKind.COMPARE, 0.00, 0.40, 0.003, 0.005, 21264),
    (DesignKind.COMPARE, 0.00, 0.40, 0.0015, 0.0025, 42527),
    (DesignKind.COMBINE, 0.00, 0.40, 0.006, 0.01, 10632),
    (DesignKind.COMBINE, 0.00, 0.40, 0.003, 0.005, 21264),
    (DesignKind.COMBINE, 0.00, 0.40, 0.0015, 0.0025, 42527),
)


def table2() -> list[Table2Row]:
    """Recompute the full reference sample-size table under both event-accrual
    models and report relative deviations from the published values."""
    rows = []
    for kind, pe0, pe1, inc1, inc2, published in PUBLISHED_ROWS:
        hyp = HypothesisPair(pe_null=pe0, pe_alt=pe1)
        scen = IncidenceScenario(annual_incidence_arm1=inc1, annual_incidence_arm2=inc2)
        base = DesignSpec(kind=kind, hypotheses=hyp)
        n_exp = total_sample_size(base, scen)
        n_lin = total_sample_size(
            replace(base, event_accrual_model=EventAccrualModel.LINEAR_PERSON_TIME), scen
        )
        rows.append(
            Table2Row(
                kind=kind,
                pe_null=pe0,
                pe_alt=pe1,
                incidence_arm1=inc1,
                incidence_arm2=inc2,
                n_linear_person_time=n_lin,
                n_exponential_depletion=n_exp,
                n_published=published,
                rel_dev_linear=n_lin / published - 1.0,
                rel_dev_exponential=n_exp / published - 1.0,
            )
        )
    return rows
