"""Antibody regimen scoring: PK curves, predicted serum ID80 titers, AUC.

The pipeline predicts, for each candidate regimen and each virus in a panel,
the serum 80% inhibitory dilution (ID80) on a daily grid over the scoring
window, integrates it to an area-under-curve, and averages across viruses to
a single ranking score.

Concentrations come from linear IV-bolus PK (one- or two-compartment closed
forms, superposed across doses). Single-antibody ID80 is concentration over
IC80. Combinations are predicted either by summing the per-antibody titers
(additivity) or by composing per-antibody Hill curves under Bliss
independence and solving for the dilution giving 80% neutralization
(Bliss-Hill). For Hill slope 1 the Bliss-Hill titer is never below the
additivity titer whenever the undiluted serum reaches 80% neutralization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    GridTooShort,
    NoSensitiveAntibody,
    NonConvergence,
    PanelIncomplete,
    ValidationError,
)

ID80_TARGET = 0.8
# Hill-curve algebra: f = x^h/(1+x^h) = 0.8 at x = 4^(1/h), so
# ic50 = ic80 / 4^(1/h).
IC80_TO_IC50_FACTOR = 4.0


class PKModel(Enum):
    ONE_COMPARTMENT = "one_compartment"
    TWO_COMPARTMENT = "two_compartment"


@dataclass(frozen=True)
class PKParams:
    """Disposition parameters; liters and days. Two-compartment fields are
    required for (and only for) the two-compartment model."""

    model: PKModel
    clearance_l_per_day: float
    v_central_l: float
    intercompartment_clearance_l_per_day: float | None = None
    v_peripheral_l: float | None = None

    def __post_init__(self):
        if self.clearance_l_per_day <= 0:
            raise ValidationError(
                f"must be positive, got {self.clearance_l_per_day}", field="clearance_l_per_day"
            )
        if self.v_central_l <= 0:
            raise ValidationError(f"must be positive, got {self.v_central_l}", field="v_central_l")
        two = self.model is PKModel.TWO_COMPARTMENT
        if two:
            if self.intercompartment_clearance_l_per_day is None or self.v_peripheral_l is None:
                raise ValidationError(
                    "two-compartment model needs intercompartment_clearance_l_per_day "
                    "and v_peripheral_l",
                    field="pk",
                )
            if self.intercompartment_clearance_l_per_day <= 0:
                raise ValidationError(
                    f"must be positive, got {self.intercompartment_clearance_l_per_day}",
                    field="intercompartment_clearance_l_per_day",
                )
            if self.v_peripheral_l <= 0:
                raise ValidationError(
                    f"must be positive, got {self.v_peripheral_l}", field="v_peripheral_l"
                )
        else:
            if self.intercompartment_clearance_l_per_day is not None or (
                self.v_peripheral_l is not None
            ):
                raise ValidationError(
                    "one-compartment model takes no peripheral parameters", field="pk"
                )


@dataclass(frozen=True)
class Dose:
    week: float
    mg_per_kg: float

    def __post_init__(self):
        if self.week < 0:
            raise ValidationError(f"must be nonnegative, got {self.week}", field="week")
        if self.mg_per_kg <= 0:
            raise ValidationError(f"must be positive, got {self.mg_per_kg}", field="mg_per_kg")

    @property
    def day(self) -> float:
        return self.week * 7.0


@dataclass(frozen=True)
class DosingSchedule:
    doses: tuple[Dose, ...]
    body_weight_kg: float

    def __post_init__(self):
        if not self.doses:
            raise EmptyInput("schedule has no doses", field="doses")
        if self.doses[0].week != 0:
            raise ValidationError("first dose must be at week 0", field="doses")
        weeks = [d.week for d in self.doses]
        if any(b <= a for a, b in zip(weeks, weeks[1:])):
            raise ValidationError("dose times must be strictly increasing", field="doses")
        if self.body_weight_kg <= 0:
            raise ValidationError(
                f"must be positive, got {self.body_weight_kg}", field="body_weight_kg"
            )


@dataclass(frozen=True)
class Antibody:
    name: str
    pk: PKParams

    def __post_init__(self):
        if not self.name:
            raise ValidationError("antibody name must be nonempty", field="name")


@dataclass(frozen=True)
class Regimen:
    """A cocktail: every antibody follows the shared dosing schedule (same
    mg/kg at the same visits)."""

    name: str
    antibodies: tuple[Antibody, ...]
    schedule: DosingSchedule

    def __post_init__(self):
        if not self.antibodies:
            raise EmptyInput("regimen has no antibodies", field="antibodies")
        names = [a.name for a in self.antibodies]
        if len(set(names)) != len(names):
            raise ValidationError("antibody names must be unique", field="antibodies")


def concentration_curve(
    pk: PKParams, schedule: DosingSchedule, grid_days: np.ndarray
) -> np.ndarray:
    """Serum concentration (ug/mL) at each grid day.

    Instantaneous IV bolus (an approximation: infusion time is negligible
    against 8-weekly dosing intervals), linear kinetics, doses superposed.
    One compartment: C(t) = sum_i (D_i/V) e^{-k (t - t_i)}, k = CL/V.
    Two compartments: biexponential with the standard macro-constants:
    k10 = CL/V1, k12 = Q/V1, k21 = Q/V2; alpha+beta = k10+k12+k21,
    alpha*beta = k10*k21; C(t) = (D/V1) [A e^{-alpha t} + B e^{-beta t}]
    with A = (alpha-k21)/(alpha-beta), B = (k21-beta)/(alpha-beta).
    """
    grid = np.asarray(grid_days, dtype=np.float64)
    if grid.size < 1:
        raise ValidationError("grid is empty", field="grid_days")
    last_dose = schedule.doses[-1].day
    if grid[-1] < last_dose:
        raise GridTooShort(
            f"grid ends at day {grid[-1]:g} before the last dose at day {last_dose:g}",
            field="grid_days",
        )
    conc = np.zeros_like(grid)
    w = schedule.body_weight_kg
    if pk.model is PKModel.ONE_COMPARTMENT:
        k = pk.clearance_l_per_day / pk.v_central_l
        for dose in schedule.doses:
            dt = grid - dose.day
            live = dt >= 0
            conc[live] += (dose.mg_per_kg * w / pk.v_central_l) * np.exp(-k * dt[live])
        return conc
    k10 = pk.clearance_l_per_day / pk.v_central_l
    k12 = pk.intercompartment_clearance_l_per_day / pk.v_central_l
    k21 = pk.intercompartment_clearance_l_per_day / pk.v_peripheral_l
    s = k10 + k12 + k21
    disc = math.sqrt(max(s * s - 4.0 * k10 * k21, 0.0))
    # Repeated-root parameter sets are a measure-zero edge; keep the
    # biexponential form finite by separating the exponents minutely.
    disc = max(disc, 1e-12 * s)
    alpha = (s + disc) / 2.0
    beta = (s - disc) / 2.0
    a = (alpha - k21) / (alpha - beta)
    b = (k21 - beta) / (alpha - beta)
    for dose in schedule.doses:
        dt = grid - dose.day
        live = dt >= 0
        amount = dose.mg_per_kg * w / pk.v_central_l
        conc[live] += amount * (a * np.exp(-alpha * dt[live]) + b * np.exp(-beta * dt[live]))
    return conc


def single_ab_titer(conc: float, ic80: float) -> float:
    """Predicted ID80 of a single antibody: concentration / IC80."""
    if ic80 <= 0:
        raise ValidationError(f"must be positive, got {ic80}", field="ic80")
    if conc < 0:
        raise ValidationError(f"must be nonnegative, got {conc}", field="conc")
    return conc / ic80


def combine_additivity(titers: Sequence[float]) -> float:
    """Combined ID80 under additivity: the sum of per-antibody titers."""
    if len(titers) == 0:
        raise EmptyInput("no titers to combine", field="titers")
    return float(sum(titers))


def _bliss_log_survival(log_d: np.ndarray, conc: np.ndarray, ic50: np.ndarray, hill: np.ndarray):
    """sum_j log(1 + x_j^h_j) at dilution exp(log_d); >= log 5 iff F >= 0.8."""
    x = (conc / np.exp(log_d)[..., None]) / ic50
    with np.errstate(over="ignore"):
        return np.sum(np.log1p(np.power(x, hill)), axis=-1)


def _bliss_titer_grid(
    conc: np.ndarray,
    ic50: np.ndarray,
    hill: np.ndarray,
    clamp_below_undiluted: bool = True,
    rel_tol: float = 1e-9,
) -> np.ndarray:
    """Vectorized Bliss-Hill ID80 for a (days x antibodies) concentration
    matrix. Solves F(d)=0.8 per day by bisection on log d inside an exact
    analytic bracket."""
    n_days, m = conc.shape
    target = math.log(5.0)
    titers = np.zeros(n_days)
    # Exact bracket: every f_j(d*) <= 0.8 gives d* >= max_j c_j/(4^{1/h} ic50);
    # some f_j(d*) must reach level 5^{1/m}-1 in x^h, giving the upper bound.
    with np.errstate(divide="ignore"):
        lo_d = np.max(conc / (ic50 * 4.0 ** (1.0 / hill)), axis=1)
        up_level = (5.0 ** (1.0 / m) - 1.0) ** (1.0 / hill)
        hi_d = np.max(conc / (ic50 * up_level), axis=1)
    positive = lo_d > 0.0
    if clamp_below_undiluted:
        active = positive & (
            _bliss_log_survival(np.zeros(n_days), conc, ic50, hill) >= target
        )
    else:
        active = positive
    if not np.any(active):
        return titers
    lo = np.log(lo_d[active])
    hi = np.log(np.maximum(hi_d[active], lo_d[active]))
    sub_conc = conc[active]
    tol = math.log1p(rel_tol)
    for _ in range(200):
        if float(np.max(hi - lo)) <= tol:
            break
        mid = 0.5 * (lo + hi)
        ge = _bliss_log_survival(mid, sub_conc, ic50, hill) >= target
        lo = np.where(ge, mid, lo)
        hi = np.where(ge, hi, mid)
    else:
        raise NonConvergence("Bliss-Hill bisection did not converge")
    titers[active] = np.exp(0.5 * (lo + hi))
    return titers


def combine_bliss_hill(
    concs: Sequence[float],
    ic50s: Sequence[float],
    hills: Sequence[float] | None = None,
    clamp_below_undiluted: bool = True,
) -> float:
    """Combined ID80 under Bliss independence of per-antibody Hill curves.

    At dilution d, antibody j neutralizes f_j(d) = x^h/(1+x^h) with
    x = (conc_j/d)/ic50_j; the combination neutralizes
    F(d) = 1 - prod_j(1 - f_j(d)). The titer is the unique d* solving
    F(d*) = 0.8 (bisection on log d, relative tolerance 1e-6 or better).
    By default days where even undiluted serum misses 80% (F(1) < 0.8)
    report titer 0; pass clamp_below_undiluted=False to get the
    mathematical root below 1 instead.

    Censored or resistant antibodies are expressed as infinite ic50; if all
    are infinite there is nothing to solve and NoSensitiveAntibody is raised.
    """
    if len(concs) == 0:
        raise EmptyInput("no antibodies to combine", field="concs")
    if len(ic50s) != len(concs):
        raise ValidationError("concs and ic50s must align", field="ic50s")
    if hills is None:
        hills = [1.0] * len(concs)
    if len(hills) != len(concs):
        raise ValidationError("concs and hills must align", field="hills")
    conc = np.asarray(concs, dtype=np.float64)
    ic50 = np.asarray(ic50s, dtype=np.float64)
    hill = np.asarray(hills, dtype=np.float64)
    if np.any(conc < 0):
        raise ValidationError("concentrations must be nonnegative", field="concs")
    if np.any(ic50 <= 0):
        raise ValidationError("ic50 values must be positive", field="ic50s")
    if np.any(hill <= 0):
        raise ValidationError("hill slopes must be positive", field="hills")
    usable = np.isfinite(ic50) & (conc > 0)
    if not np.any(np.isfinite(ic50)):
        raise NoSensitiveAntibody("all antibodies censored or resistant", field="ic50s")
    if not np.any(usable):
        return 0.0
    out = _bliss_titer_grid(
        conc[usable][None, :], ic50[usable], hill[usable], clamp_below_undiluted
    )
    return float(out[0])


class CombinationModel(Enum):
    ADDITIVITY = "additivity"
    BLISS_HILL = "bliss_hill"


class CensoredMode(Enum):
    """Censored IC80 (a ">value" lower bound): treat the virus as fully
    resistant to that antibody, or plug in the bound value."""

    RESISTANT = "resistant"
    BOUND_VALUE = "bound_value"


@dataclass(frozen=True)
class PanelEntry:
    ic80: float
    censored: bool = False

    def __post_init__(self):
        if self.ic80 <= 0:
            raise ValidationError(f"must be positive, got {self.ic80}", field="ic80")


class VirusPanel:
    """IC80 lookup for (virus, antibody) pairs. Missing pairs are an error at
    scoring time, never silently imputed."""

    def __init__(self, entries: Mapping[tuple[str, str], PanelEntry]):
        if not entries:
            raise EmptyInput("panel has no entries", field="panel")
        self._entries = dict(entries)
        seen: list[str] = []
        for virus, _ in self._entries:
            if virus not in seen:
                seen.append(virus)
        self.viruses: tuple[str, ...] = tuple(seen)

    @classmethod
    def from_records(cls, records: Sequence[tuple[str, str, float, bool]]) -> "VirusPanel":
        entries: dict[tuple[str, str], PanelEntry] = {}
        for virus, antibody, ic80, censored in records:
            key = (virus, antibody)
            if key in entries:
                raise ValidationError(f"duplicate panel entry {key}", field="panel")
            entries[key] = PanelEntry(ic80=ic80, censored=censored)
        return cls(entries)

    @classmethod
    def from_csv(cls, path) -> "VirusPanel":
        """Parse `virus_id,antibody,ic80_ug_ml` rows; values like ">50" set
        the censored flag and keep the bound."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise EmptyInput("panel CSV is empty", field="panel") from None
            expected = ["virus_id", "antibody", "ic80_ug_ml"]
            if [h.strip() for h in header] != expected:
                raise ValidationError(
                    f"panel CSV header must be {','.join(expected)}", field="panel"
                )
            records = []
            for i, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise ValidationError(f"line {i}: expected 3 columns", field="panel")
                raw = row[2].strip()
                censored = raw.startswith(">")
                try:
                    value = float(raw[1:] if censored else raw)
                except ValueError:
                    raise ValidationError(
                        f"line {i}: bad ic80 value {raw!r}", field="panel"
                    ) from None
                records.append((row[0].strip(), row[1].strip(), value, censored))
        return cls.from_records(records)

    def entry(self, virus: str, antibody: str) -> PanelEntry:
        try:
            return self._entries[(virus, antibody)]
        except KeyError:
            raise PanelIncomplete([(virus, antibody)]) from None

    def require(self, viruses: Sequence[str], antibodies: Sequence[str]) -> None:
        missing = [
            (v, a) for v in viruses for a in antibodies if (v, a) not in self._entries
        ]
        if missing:
            raise PanelIncomplete(missing)


# Keys are "antibody" or "antibody|virus"; the latter wins for that pair.
HillSlopes = Mapping[str, float] | None


def _hill_for(hill_slopes: HillSlopes, antibody: str, virus: str) -> float:
    """Per-(antibody, virus) override wins, then per-antibody, then 1."""
    if not hill_slopes:
        return 1.0
    exact = hill_slopes.get(f"{antibody}|{virus}")
    if exact is not None:
        return exact
    return hill_slopes.get(antibody, 1.0)


@dataclass(frozen=True)
class TiterCurve:
    grid: np.ndarray
    id80: np.ndarray

    def __post_init__(self):
        if self.grid.size != self.id80.size:
            raise ValidationError("grid and id80 must align", field="id80")


def id80_curve(
    regimen: Regimen,
    virus: str,
    panel: VirusPanel,
    model: CombinationModel = CombinationModel.ADDITIVITY,
    window_days: int = 560,
    hill_slopes: HillSlopes = None,
    censored_mode: CensoredMode = CensoredMode.RESISTANT,
) -> TiterCurve:
    """Predicted serum ID80 against one virus on the daily grid
    0..window_days inclusive."""
    if window_days < 1:
        raise ValidationError(f"must be >= 1, got {window_days}", field="window_days")
    grid = np.arange(window_days + 1, dtype=np.float64)
    names = [ab.name for ab in regimen.antibodies]
    panel.require([virus], names)
    conc_cols = []
    ic80s = []
    hills = []
    for ab in regimen.antibodies:
        ent = panel.entry(virus, ab.name)
        if ent.censored and censored_mode is CensoredMode.RESISTANT:
            continue
        conc_cols.append(concentration_curve(ab.pk, regimen.schedule, grid))
        ic80s.append(ent.ic80)
        hills.append(_hill_for(hill_slopes, ab.name, virus))
    if not conc_cols:
        return TiterCurve(grid=grid, id80=np.zeros_like(grid))
    conc = np.column_stack(conc_cols)
    ic80_arr = np.asarray(ic80s)
    hill_arr = np.asarray(hills)
    if model is CombinationModel.ADDITIVITY:
        titers = np.sum(conc / ic80_arr, axis=1)
    else:
        ic50_arr = ic80_arr / IC80_TO_IC50_FACTOR ** (1.0 / hill_arr)
        titers = _bliss_titer_grid(conc, ic50_arr, hill_arr)
    return TiterCurve(grid=grid, id80=titers)


def auc_score(curve: TiterCurve, scale: str = "linear") -> float:
    """Trapezoidal area under the daily titer curve; scale "linear" or
    "log10p1" (log10 of 1 + titer)."""
    if curve.grid.size < 2:
        raise ValidationError("need at least 2 grid points", field="curve")
    if scale == "linear":
        values = curve.id80
    elif scale == "log10p1":
        values = np.log10(1.0 + curve.id80)
    else:
        raise ValidationError(f"unknown scale {scale!r}", field="scale")
    return float(np.trapezoid(values, curve.grid))


@dataclass(frozen=True)
class RegimenScore:
    regimen_name: str
    per_virus_auc: dict[str, float]
    score: float
    window_days: int
    model: CombinationModel
    scale: str


def regimen_score(
    regimen: Regimen,
    panel: VirusPanel,
    model: CombinationModel = CombinationModel.ADDITIVITY,
    window_days: int = 560,
    scale: str = "linear",
    hill_slopes: HillSlopes = None,
    censored_mode: CensoredMode = CensoredMode.RESISTANT,
) -> RegimenScore:
    """Mean per-virus AUC across the panel (unweighted arithmetic mean)."""
    per_virus = {}
    for virus in panel.viruses:
        curve = id80_curve(
            regimen, virus, panel, model, window_days, hill_slopes, censored_mode
        )
        per_virus[virus] = auc_score(curve, scale)
    return RegimenScore(
        regimen_name=regimen.name,
        per_virus_auc=per_virus,
        score=float(np.mean(list(per_virus.values()))),
        window_days=window_days,
        model=model,
        scale=scale,
    )


@dataclass(frozen=True)
class ParticipantScores:
    """Distribution of per-participant regimen scores when each participant
    carries their own PK parameters."""

    regimen_name: str
    scores: tuple[float, ...]
    median: float
    q1: float
    q3: float


def participant_scores(
    regimen: Regimen,
    participant_pk: Sequence[Mapping[str, PKParams]],
    panel: VirusPanel,
    model: CombinationModel = CombinationModel.ADDITIVITY,
    window_days: int = 560,
    scale: str = "linear",
    hill_slopes: HillSlopes = None,
    censored_mode: CensoredMode = CensoredMode.RESISTANT,
) -> ParticipantScores:
    """Score the regimen once per participant PK set; the median is the
    default regimen-level summary, quartiles describe the spread."""
    if not participant_pk:
        raise EmptyInput("no participant PK sets", field="participant_pk")
    scores = []
    for pk_map in participant_pk:
        abs_ = []
        for ab in regimen.antibodies:
            if ab.name not in pk_map:
                raise ValidationError(
                    f"participant PK set missing antibody {ab.name!r}", field="participant_pk"
                )
            abs_.append(Antibody(name=ab.name, pk=pk_map[ab.name]))
        variant = Regimen(
            name=regimen.name, antibodies=tuple(abs_), schedule=regimen.schedule
        )
        scores.append(
            regimen_score(
                variant, panel, model, window_days, scale, hill_slopes, censored_mode
            ).score
        )
    q1, med, q3 = np.percentile(scores, [25.0, 50.0, 75.0])
    return ParticipantScores(
        regimen_name=regimen.name,
        scores=tuple(scores),
        median=float(med),
        q1=float(q1),
        q3=float(q3),
    )


@dataclass(frozen=True)
class RankedRegimen:
    rank: int
    regimen_name: str
    score: float
    tied: bool


def rank_regimens(scores: Sequence[RegimenScore]) -> list[RankedRegimen]:
    """Order regimens by descending score. Scores within a relative 1e-9 of
    each other form a tie group: all members are flagged and keep their
    input order. Ranks are 1-based positions after ordering."""
    if not scores:
        raise EmptyInput("no regimen scores to rank", field="scores")
    indexed = sorted(enumerate(scores), key=lambda p: (-p[1].score, p[0]))

    def close(a: float, b: float) -> bool:
        return abs(a - b) <= 1e-9 * max(abs(a), abs(b), 1e-300)

    groups: list[list[tuple[int, RegimenScore]]] = [[indexed[0]]]
    for item in indexed[1:]:
        if close(item[1].score, groups[-1][-1][1].score):
            groups[-1].append(item)
        else:
            groups.append([item])
    ranked = []
    position = 1
    for group in groups:
        tied = len(group) > 1
        for original_index, sc in sorted(group, key=lambda p: p[0]):
            ranked.append(
                RankedRegimen(
                    rank=position, regimen_name=sc.regimen_name, score=sc.score, tied=tied
                )
            )
            position += 1
    return ranked
