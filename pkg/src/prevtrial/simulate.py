"""Monte Carlo simulation of two-arm time-to-event trials.

Participants draw exponential infection and dropout times; administrative
censoring closes follow-up a fixed window after entry. The one-sided log-rank
score test compares arm 1 (experimental) against arm 2, optionally against a
non-unity null hazard ratio so designs sized against an active null can be
tested on their own terms.

Reproducibility: replicate r of a run seeded with `seed` draws from a Philox
counter-based generator keyed by SeedSequence(entropy=(seed, r)). Replicates
are independent streams, so outcomes are unchanged by re-chunking, threading,
or extending the replicate count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design import DesignSpec, IncidenceScenario, dropout_hazard
from .errors import InvalidSize, ValidationError
from .quantiles import normal_quantile

def _rng_for(seed, replicate: int) -> np.random.Generator:
    entropy = seed if isinstance(seed, tuple) else (int(seed),)
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=(replicate,))
    return np.random.Generator(np.random.Philox(ss))


def _split_arms(spec: DesignSpec, n_total: int) -> tuple[int, int]:
    a1, a2 = spec.allocation
    n1 = (n_total * a1) // (a1 + a2)
    return n1, n_total - n1


def _draw_arm(rng: np.random.Generator, n: int, lam: float, mu: float, t: float):
    """Observed time at risk and event indicator for one arm.

    Draw order (infection then dropout) is part of the determinism contract.
    """
    infection = rng.exponential(1.0 / lam, n) if lam > 0 else np.full(n, np.inf)
    dropout = rng.exponential(1.0 / mu, n) if mu > 0 else np.full(n, np.inf)
    censor = np.minimum(dropout, t)
    time_at_risk = np.minimum(infection, censor)
    event = infection <= censor
    return time_at_risk, event


@dataclass
class TrialDataset:
    """One simulated trial. Participant arrays are index-aligned; arm 1
    occupies the leading block."""

    arm: np.ndarray
    entry_time: np.ndarray
    time_at_risk: np.ndarray
    event: np.ndarray
    seed: object
    spec_snapshot: DesignSpec

    @property
    def n_total(self) -> int:
        return self.arm.size

    def arm_arrays(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.arm == arm
        return self.time_at_risk[mask], self.event[mask]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("arm,entry_time,time_at_risk,event\n")
            for a, e, x, d in zip(self.arm, self.entry_time, self.time_at_risk, self.event):
                fh.write(f"{a},{e:.6g},{x:.6g},{int(d)}\n")


def simulate_trial(
    spec: DesignSpec, scen: IncidenceScenario, n_total: int, seed, replicate: int = 0
) -> TrialDataset:
    """Simulate one trial of `n_total` participants.

    Identical (spec, scen, n_total, seed, replicate) inputs produce a
    bit-identical dataset.
    """
    if n_total < 2:
        raise InvalidSize(f"need at least 2 participants, got {n_total}", field="n_total")
    rng = _rng_for(seed, replicate)
    n1, n2 = _split_arms(spec, n_total)
    mu = dropout_hazard(spec)
    t = spec.followup_years
    x1, e1 = _draw_arm(rng, n1, scen.annual_incidence_arm1, mu, t)
    x2, e2 = _draw_arm(rng, n2, scen.annual_incidence_arm2, mu, t)
    if spec.accrual_years > 0:
        entry = rng.uniform(0.0, spec.accrual_years, n_total)
    else:
        entry = np.zeros(n_total)
    return TrialDataset(
        arm=np.concatenate([np.ones(n1, dtype=np.int8), np.full(n2, 2, dtype=np.int8)]),
        entry_time=entry,
        time_at_risk=np.concatenate([x1, x2]),
        event=np.concatenate([e1, e2]),
        seed=seed,
        spec_snapshot=spec,
    )


@dataclass(frozen=True)
class LogrankResult:
    z_statistic: float
    reject: bool
    hazard_ratio_estimate: float
    n_events: int
    no_events: bool


def _logrank_arrays(
    x1: np.ndarray,
    e1: np.ndarray,
    x2: np.ndarray,
    e2: np.ndarray,
    one_sided_alpha: float,
    null_hazard_ratio: float,
) -> LogrankResult:
    event_times = np.concatenate([x1[e1], x2[e2]])
    d = event_times.size
    if d == 0:
        return LogrankResult(math.nan, False, math.nan, 0, True)
    # The score sums run over event times in any order, so per-arm sorted
    # times plus searchsorted give the at-risk counts without a merged scan.
    t1 = np.sort(x1)
    t2 = np.sort(x2)
    r1 = t1.size - np.searchsorted(t1, event_times, side="left")
    r2 = t2.size - np.searchsorted(t2, event_times, side="left")
    total = r1 + r2
    expected = r1 / total
    v = float(np.sum(r1 * r2 / (total * total), dtype=np.float64))
    o1 = float(np.count_nonzero(e1))
    u = o1 - float(np.sum(expected, dtype=np.float64))
    if v <= 0.0:
        return LogrankResult(math.nan, False, math.nan, d, False)
    z = (u - v * math.log(null_hazard_ratio)) / math.sqrt(v)
    hr = math.exp(u / v)
    reject = z <= -normal_quantile(1.0 - one_sided_alpha)
    return LogrankResult(z, bool(reject), hr, d, False)


def logrank_test(
    data: TrialDataset, one_sided_alpha: float = 0.025, null_hazard_ratio: float = 1.0
) -> LogrankResult:
    """One-sided log-rank score test that arm 1 has lower hazard than arm 2.

    Z = (O - E - V ln h0) / sqrt(V) with O observed arm-1 events, E and V the
    hypergeometric moments accumulated over pooled event times, and h0 the
    null hazard ratio (1 gives the standard statistic). Rejects when
    Z <= -z_{1-alpha}. The reported hazard ratio estimate exp((O-E)/V) is the
    one-step score estimator, descriptive only. With zero events the result
    carries no_events=True and no rejection.
    """
    if not 0.0 < one_sided_alpha < 0.5:
        raise ValidationError(
            f"must be in (0, 0.5), got {one_sided_alpha}", field="one_sided_alpha"
        )
    if null_hazard_ratio <= 0.0:
        raise ValidationError(
            f"must be positive, got {null_hazard_ratio}", field="null_hazard_ratio"
        )
    x1, e1 = data.arm_arrays(1)
    x2, e2 = data.arm_arrays(2)
    return _logrank_arrays(x1, e1, x2, e2, one_sided_alpha, null_hazard_ratio)


@dataclass(frozen=True)
class PowerEstimate:
    rejection_rate: float
    mc_replicates: int
    mc_halfwidth_95: float


def replicate_outcomes(
    spec: DesignSpec,
    scen: IncidenceScenario,
    n_total: int,
    n_reps: int,
    seed,
    null_hazard_ratio: float | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Per-replicate rejection outcomes. Replicate r depends only on
    (seed, r), so a longer run extends a shorter one without changing it."""
    if n_total < 2:
        raise InvalidSize(f"need at least 2 participants, got {n_total}", field="n_total")
    if n_reps < 100:
        raise ValidationError(f"need at least 100 replicates, got {n_reps}", field="n_reps")
    h0 = spec.hypotheses.hr_null if null_hazard_ratio is None else null_hazard_ratio
    alpha = spec.hypotheses.one_sided_alpha
    n1, n2 = _split_arms(spec, n_total)
    mu = dropout_hazard(spec)
    t = spec.followup_years
    lam1 = scen.annual_incidence_arm1
    lam2 = scen.annual_incidence_arm2

    def one(r: int) -> bool:
        rng = _rng_for(seed, r)
        x1, e1 = _draw_arm(rng, n1, lam1, mu, t)
        x2, e2 = _draw_arm(rng, n2, lam2, mu, t)
        return _logrank_arrays(x1, e1, x2, e2, alpha, h0).reject

    out = np.zeros(n_reps, dtype=bool)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for r, rej in enumerate(pool.map(one, range(n_reps), chunksize=64)):
                out[r] = rej
    else:
        for r in range(n_reps):
            out[r] = one(r)
    return out


def estimate_power(
    spec: DesignSpec,
    scen: IncidenceScenario,
    n_total: int,
    n_reps: int,
    seed,
    null_hazard_ratio: float | None = None,
    threads: int = 1,
) -> PowerEstimate:
    """Simulated rejection rate over `n_reps` independent trials.

    The test's null hazard ratio defaults to the design's own null, so power
    is measured against the hypotheses the trial was sized for.
    """
    outcomes = replicate_outcomes(spec, scen, n_total, n_reps, seed, null_hazard_ratio, threads)
    p = float(np.count_nonzero(outcomes)) / n_reps
    half = normal_quantile(0.975) * math.sqrt(p * (1.0 - p) / n_reps)
    return PowerEstimate(rejection_rate=p, mc_replicates=n_reps, mc_halfwidth_95=half)
