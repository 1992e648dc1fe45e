"""Design and analysis toolkit for two-arm HIV prevention efficacy trials
with active comparison regimens, plus antibody regimen scoring."""

__version__ = "0.1.0"

from .bnab import (
    Antibody,
    CensoredMode,
    CombinationModel,
    Dose,
    DosingSchedule,
    PKModel,
    PKParams,
    ParticipantScores,
    RankedRegimen,
    Regimen,
    RegimenScore,
    TiterCurve,
    VirusPanel,
    auc_score,
    combine_additivity,
    combine_bliss_hill,
    concentration_curve,
    id80_curve,
    participant_scores,
    rank_regimens,
    regimen_score,
    single_ab_titer,
)
from .counterfactual import (
    AdditiveDifference,
    ArmSummary,
    EfficacyEstimate,
    EfficacyParameter,
    PooledIncidence,
    RateRatio,
    SentinelCohort,
    ThetaCInterval,
    additive_difference,
    averted_infections_ratio,
    exact_poisson_ci,
    pe_vs_counterfactual,
    rate_ratio,
    sentinel_pooled_incidence,
    uncertainty_interval,
    uncertainty_interval_from_rate_ratio,
)
from .design import (
    DesignKind,
    DesignSpec,
    EventAccrualModel,
    HypothesisPair,
    IncidenceScenario,
    SizingResult,
    Table2Row,
    UptakeRow,
    event_probability,
    incidence_under_uptake,
    required_events,
    sizing_detail,
    table2,
    total_sample_size,
    uptake_report,
)
from .errors import (
    DegenerateHypotheses,
    EmptyInput,
    GridTooShort,
    InvalidAllocation,
    InvalidSize,
    NoControlEvents,
    NonConvergence,
    NoSensitiveAntibody,
    PanelIncomplete,
    ThetaCZero,
    ValidationError,
)
from .quantiles import normal_quantile
from .simulate import (
    LogrankResult,
    PowerEstimate,
    TrialDataset,
    estimate_power,
    logrank_test,
    replicate_outcomes,
    simulate_trial,
)

__all__ = [
    "__version__",
    "Antibody",
    "CensoredMode",
    "CombinationModel",
    "Dose",
    "DosingSchedule",
    "PKModel",
    "PKParams",
    "ParticipantScores",
    "RankedRegimen",
    "Regimen",
    "RegimenScore",
    "TiterCurve",
    "VirusPanel",
    "auc_score",
    "combine_additivity",
    "combine_bliss_hill",
    "concentration_curve",
    "id80_curve",
    "participant_scores",
    "rank_regimens",
    "regimen_score",
    "single_ab_titer",
    "AdditiveDifference",
    "ArmSummary",
    "EfficacyEstimate",
    "EfficacyParameter",
    "PooledIncidence",
    "RateRatio",
    "SentinelCohort",
    "ThetaCInterval",
    "additive_difference",
    "averted_infections_ratio",
    "exact_poisson_ci",
    "pe_vs_counterfactual",
    "rate_ratio",
    "sentinel_pooled_incidence",
    "uncertainty_interval",
    "uncertainty_interval_from_rate_ratio",
    "DesignKind",
    "DesignSpec",
    "EventAccrualModel",
    "HypothesisPair",
    "IncidenceScenario",
    "SizingResult",
    "Table2Row",
    "UptakeRow",
    "event_probability",
    "incidence_under_uptake",
    "required_events",
    "sizing_detail",
    "table2",
    "total_sample_size",
    "uptake_report",
    "DegenerateHypotheses",
    "EmptyInput",
    "GridTooShort",
    "InvalidAllocation",
    "InvalidSize",
    "NoControlEvents",
    "NonConvergence",
    "NoSensitiveAntibody",
    "PanelIncomplete",
    "ThetaCZero",
    "ValidationError",
    "normal_quantile",
    "LogrankResult",
    "PowerEstimate",
    "TrialDataset",
    "estimate_power",
    "logrank_test",
    "replicate_outcomes",
    "simulate_trial",
]
