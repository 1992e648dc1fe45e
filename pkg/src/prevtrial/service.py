"""HTTP service exposing the core package.

The CLI talks to this app in-process through an ASGI transport by default,
or to a remote instance over the network; both paths exercise the same
request validation and response shapes.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .bnab import (
    Antibody,
    CensoredMode,
    CombinationModel,
    Dose,
    DosingSchedule,
    PKModel,
    PKParams,
    Regimen,
    RegimenScore,
    VirusPanel,
    id80_curve,
    rank_regimens,
    regimen_score,
)
from .counterfactual import (
    ArmSummary,
    EfficacyParameter,
    SentinelCohort,
    ThetaCInterval,
    additive_difference,
    exact_poisson_ci,
    rate_ratio,
    sentinel_pooled_incidence,
    uncertainty_interval,
)
from .design import (
    DesignKind,
    DesignSpec,
    EventAccrualModel,
    HypothesisPair,
    IncidenceScenario,
    sizing_detail,
    table2,
)
from .errors import NonConvergence, ValidationError
from .simulate import estimate_power

app = FastAPI(title="prevtrial", version=__version__)


@app.exception_handler(ValidationError)
async def _domain_validation(request: Request, exc: ValidationError) -> JSONResponse:
    loc = ["body"] + ([exc.field] if exc.field else [])
    return JSONResponse(
        status_code=422,
        content={"detail": [{"loc": loc, "msg": exc.message, "type": "domain_error"}]},
    )


@app.exception_handler(NonConvergence)
async def _nonconvergence(request: Request, exc: NonConvergence) -> JSONResponse:
    return JSONResponse(status_code=500, content={"detail": str(exc)})


_KINDS = {
    "layer": DesignKind.LAYER,
    "compare": DesignKind.COMPARE,
    "combine": DesignKind.COMBINE,
}
_MODELS = {
    "exponential_depletion": EventAccrualModel.EXPONENTIAL_DEPLETION,
    "linear_person_time": EventAccrualModel.LINEAR_PERSON_TIME,
}


class DesignRequest(BaseModel):
    design: Literal["layer", "compare", "combine"]
    pe_null: float
    pe_alt: float
    one_sided_alpha: float = 0.025
    power: float = 0.90
    inc_treat: float = Field(description="annual incidence, arm 1 (regimen under test)")
    inc_control: float = Field(description="annual incidence, arm 2 (comparison arm)")
    followup: float = 2.0
    accrual: float = 0.0
    dropout: float = 0.10
    dropout_is_annual: bool = False
    allocation: tuple[int, int] = (1, 1)
    model: Literal["exponential_depletion", "linear_person_time"] = "exponential_depletion"

    def to_core(self) -> tuple[DesignSpec, IncidenceScenario]:
        spec = DesignSpec(
            kind=_KINDS[self.design],
            hypotheses=HypothesisPair(
                pe_null=self.pe_null,
                pe_alt=self.pe_alt,
                one_sided_alpha=self.one_sided_alpha,
                power=self.power,
            ),
            followup_years=self.followup,
            accrual_years=self.accrual,
            annual_dropout=self.dropout,
            allocation=self.allocation,
            event_accrual_model=_MODELS[self.model],
            dropout_is_annual=self.dropout_is_annual,
        )
        scenario = IncidenceScenario(
            annual_incidence_arm1=self.inc_treat, annual_incidence_arm2=self.inc_control
        )
        return spec, scenario


class SizeResponse(BaseModel):
    required_events: int
    event_probability_arm1: float
    event_probability_arm2: float
    mean_event_probability: float
    n_unrounded: float
    n_total: int


class PowerRequest(DesignRequest):
    n_total: int | None = None
    n_reps: int = 10000
    seed: int
    threads: int = 1
    null_hazard_ratio: float | None = None


class PowerResponse(BaseModel):
    n_total: int
    rejection_rate: float
    mc_replicates: int
    mc_halfwidth_95: float
    seed: int


class Table2Request(BaseModel):
    pass


class ArmCounts(BaseModel):
    events: int
    person_years: float


class ThetaCModel(BaseModel):
    low: float
    high: float


class CounterfactualRequest(BaseModel):
    experimental: ArmCounts
    control: ArmCounts
    theta_c: ThetaCModel
    parameter: Literal["PE", "AIR"] = "PE"
    grid_points: int = 101
    continuity: bool = False


class BnabPKModel(BaseModel):
    model: Literal["one_compartment", "two_compartment"]
    clearance_l_per_day: float
    v_central_l: float
    intercompartment_clearance_l_per_day: float | None = None
    v_peripheral_l: float | None = None

    def to_core(self) -> PKParams:
        return PKParams(
            model=PKModel(self.model),
            clearance_l_per_day=self.clearance_l_per_day,
            v_central_l=self.v_central_l,
            intercompartment_clearance_l_per_day=self.intercompartment_clearance_l_per_day,
            v_peripheral_l=self.v_peripheral_l,
        )


class BnabAntibody(BaseModel):
    name: str
    pk: BnabPKModel


class BnabDose(BaseModel):
    week: float
    mg_per_kg: float


class HillSlopeEntry(BaseModel):
    antibody: str
    virus: str | None = None
    slope: float


class RegimenModel(BaseModel):
    name: str
    body_weight_kg: float = 70.0
    doses: list[BnabDose]
    antibodies: list[BnabAntibody]
    hill_slopes: list[HillSlopeEntry] = []

    def to_core(self) -> tuple[Regimen, dict[str, float]]:
        schedule = DosingSchedule(
            doses=tuple(Dose(week=d.week, mg_per_kg=d.mg_per_kg) for d in self.doses),
            body_weight_kg=self.body_weight_kg,
        )
        regimen = Regimen(
            name=self.name,
            antibodies=tuple(
                Antibody(name=a.name, pk=a.pk.to_core()) for a in self.antibodies
            ),
            schedule=schedule,
        )
        slopes: dict[str, float] = {}
        for entry in self.hill_slopes:
            key = entry.antibody if entry.virus is None else f"{entry.antibody}|{entry.virus}"
            slopes[key] = entry.slope
        return regimen, slopes


class PanelRow(BaseModel):
    virus_id: str
    antibody: str
    ic80_ug_ml: str | float


class BnabScoreRequest(BaseModel):
    regimens: list[RegimenModel]
    panel: list[PanelRow]
    model: Literal["additivity", "bliss_hill"] = "additivity"
    window_days: int = 560
    scale: Literal["linear", "log10p1"] = "linear"
    censored_mode: Literal["resistant", "bound_value"] = "resistant"
    include_curves: bool = False


class ScoreEntry(BaseModel):
    regimen: str
    score: float


class BnabRankRequest(BaseModel):
    scores: list[ScoreEntry]


@app.get("/health")
async def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/size", response_model=SizeResponse)
async def size(req: DesignRequest) -> SizeResponse:
    spec, scenario = req.to_core()
    result = sizing_detail(spec, scenario)
    return SizeResponse(
        required_events=result.required_events,
        event_probability_arm1=result.event_probability_arm1,
        event_probability_arm2=result.event_probability_arm2,
        mean_event_probability=result.mean_event_probability,
        n_unrounded=result.n_unrounded,
        n_total=result.n_total,
    )


@app.post("/table2")
async def table2_endpoint(req: Table2Request) -> dict:
    rows = []
    for row in table2():
        rows.append(
            {
                "design": row.kind.value,
                "pe_null": row.pe_null,
                "pe_alt": row.pe_alt,
                "inc_treat": row.incidence_arm1,
                "inc_control": row.incidence_arm2,
                "n_linear_person_time": row.n_linear_person_time,
                "n_exponential_depletion": row.n_exponential_depletion,
                "n_published": row.n_published,
                "rel_dev_linear": row.rel_dev_linear,
                "rel_dev_exponential": row.rel_dev_exponential,
            }
        )
    return {"rows": rows}


@app.post("/power", response_model=PowerResponse)
async def power(req: PowerRequest) -> PowerResponse:
    spec, scenario = req.to_core()
    n_total = req.n_total
    if n_total is None:
        n_total = sizing_detail(spec, scenario).n_total
    estimate = estimate_power(
        spec,
        scenario,
        n_total=n_total,
        n_reps=req.n_reps,
        seed=req.seed,
        null_hazard_ratio=req.null_hazard_ratio,
        threads=req.threads,
    )
    return PowerResponse(
        n_total=n_total,
        rejection_rate=estimate.rejection_rate,
        mc_replicates=estimate.mc_replicates,
        mc_halfwidth_95=estimate.mc_halfwidth_95,
        seed=req.seed,
    )


@app.post("/counterfactual")
async def counterfactual(req: CounterfactualRequest) -> dict:
    experimental = ArmSummary(events=req.experimental.events, person_years=req.experimental.person_years)
    control = ArmSummary(events=req.control.events, person_years=req.control.person_years)
    theta = ThetaCInterval(low=req.theta_c.low, high=req.theta_c.high)
    parameter = EfficacyParameter[req.parameter]
    rr = rate_ratio(experimental, control, continuity=req.continuity)
    estimate = uncertainty_interval(
        experimental,
        control,
        theta,
        parameter=parameter,
        grid_points=req.grid_points,
        continuity=req.continuity,
    )
    diff = additive_difference(experimental, control)
    ci_exp = exact_poisson_ci(experimental.events, experimental.person_years)
    ci_ctl = exact_poisson_ci(control.events, control.person_years)
    return {
        "rate_ratio": {
            "rr": rr.rr,
            "log_se": rr.log_se if rr.log_se != float("inf") else None,
            "ci_low": rr.ci_low,
            "ci_high": rr.ci_high,
            "one_sided": rr.one_sided,
        },
        "estimate": {
            "parameter": estimate.parameter,
            "point": estimate.point,
            "ci_low": estimate.ci_low,
            "ci_high": estimate.ci_high,
            "ui_low": estimate.ui_low,
            "ui_high": estimate.ui_high,
            "theta_low": estimate.theta_low,
            "theta_high": estimate.theta_high,
        },
        "additive_difference": {
            "difference": diff.difference,
            "se": diff.se,
            "ci_low": diff.ci_low,
            "ci_high": diff.ci_high,
        },
        "arm_rates": {
            "experimental": {
                "rate": experimental.rate,
                "exact_ci_low": ci_exp[0],
                "exact_ci_high": ci_exp[1],
            },
            "control": {
                "rate": control.rate,
                "exact_ci_low": ci_ctl[0],
                "exact_ci_high": ci_ctl[1],
            },
        },
    }


class SentinelCohortModel(BaseModel):
    label: str
    window_start: float
    window_end: float
    events: int
    person_years: float


class SentinelRequest(BaseModel):
    cohorts: list[SentinelCohortModel]


@app.post("/sentinel")
async def sentinel(req: SentinelRequest) -> dict:
    cohorts = [
        SentinelCohort(
            label=c.label,
            calendar_window=(c.window_start, c.window_end),
            summary=ArmSummary(events=c.events, person_years=c.person_years),
        )
        for c in req.cohorts
    ]
    pooled = sentinel_pooled_incidence(cohorts)
    return {
        "windows": [
            {
                "window_start": p.calendar_window[0],
                "window_end": p.calendar_window[1],
                "events": p.events,
                "person_years": p.person_years,
                "rate": p.rate,
                "exact_ci_low": p.ci_low,
                "exact_ci_high": p.ci_high,
                "cohorts": list(p.labels),
            }
            for p in pooled
        ]
    }


def _panel_from_rows(rows: list[PanelRow]) -> VirusPanel:
    records = []
    for row in rows:
        raw = row.ic80_ug_ml
        if isinstance(raw, str):
            text = raw.strip()
            censored = text.startswith(">")
            try:
                value = float(text[1:] if censored else text)
            except ValueError:
                raise ValidationError(f"bad ic80 value {raw!r}", field="panel") from None
        else:
            value, censored = float(raw), False
        records.append((row.virus_id, row.antibody, value, censored))
    return VirusPanel.from_records(records)


@app.post("/bnab/score")
async def bnab_score(req: BnabScoreRequest) -> dict:
    if not req.regimens:
        raise ValidationError("no regimens supplied", field="regimens")
    panel = _panel_from_rows(req.panel)
    model = CombinationModel(req.model)
    mode = CensoredMode(req.censored_mode)
    out = []
    curves = []
    for regimen_model in req.regimens:
        regimen, slopes = regimen_model.to_core()
        score = regimen_score(
            regimen,
            panel,
            model=model,
            window_days=req.window_days,
            scale=req.scale,
            hill_slopes=slopes or None,
            censored_mode=mode,
        )
        out.append(
            {
                "regimen": score.regimen_name,
                "score": score.score,
                "per_virus": [
                    {"virus_id": v, "auc_titer_days": score.per_virus_auc[v]}
                    for v in panel.viruses
                ],
            }
        )
        if req.include_curves:
            for virus in panel.viruses:
                curve = id80_curve(
                    regimen,
                    virus,
                    panel,
                    model=model,
                    window_days=req.window_days,
                    hill_slopes=slopes or None,
                    censored_mode=mode,
                )
                curves.append(
                    {
                        "regimen": regimen.name,
                        "virus_id": virus,
                        "id80": [float(x) for x in curve.id80],
                    }
                )
    body = {
        "model": req.model,
        "window_days": req.window_days,
        "scale": req.scale,
        "regimens": out,
    }
    if req.include_curves:
        body["curves"] = curves
    return body


@app.post("/bnab/rank")
async def bnab_rank(req: BnabRankRequest) -> dict:
    scores = [
        RegimenScore(
            regimen_name=s.regimen,
            per_virus_auc={},
            score=s.score,
            window_days=0,
            model=CombinationModel.ADDITIVITY,
            scale="linear",
        )
        for s in req.scores
    ]
    ranked = rank_regimens(scores)
    return {
        "ranking": [
            {"rank": r.rank, "regimen": r.regimen_name, "score": r.score, "tied": r.tied}
            for r in ranked
        ]
    }
