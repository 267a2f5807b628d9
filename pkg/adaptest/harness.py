"""Monte Carlo acceptance estimates and experiment tables."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import sqrt
from pathlib import Path
from typing import Any, Mapping

from scipy.stats import norm

from .access import ModelSpec, ModelViolation, validate_log
from .dists import Dist
from .lab import generate
from .records import ExperimentConfig, ReportRow
from .testers import as_epsilon, get_tester, open_tester_session

logger = logging.getLogger(__name__)

CONFIDENCE = 0.99


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("the Wilson interval needs at least one trial")
    z = float(norm.ppf(1 - (1 - confidence) / 2))
    rate = successes / trials
    denominator = 1 + z * z / trials
    center = (rate + z * z / (2 * trials)) / denominator
    half = z * sqrt(rate * (1 - rate) / trials + z * z / (4 * trials * trials)) / denominator
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class TrialOutcome:
    accept: bool
    queries: int
    samples: int
    violation: bool = False
    audited: bool = True


@dataclass
class AcceptanceReport:
    tester: str
    epsilon: Fraction
    params: dict[str, int]
    trials: int
    accepts: int
    rate: float
    interval: tuple[float, float]
    mean_queries: float
    mean_samples: float
    violations: int = 0
    audit_model: str | None = None
    audit_failures: int = 0
    outcomes: list[TrialOutcome] = field(default_factory=list, repr=False)

    @property
    def decided(self) -> int:
        """Trials that reached a decision; violated trials are left out of the rate."""
        return self.trials - self.violations

    @property
    def rejects(self) -> int:
        return self.decided - self.accepts


def run_trial(
    tester: str,
    dist: Dist,
    epsilon: Fraction,
    params: Mapping[str, int],
    seed: int | tuple[int, ...],
    audit_model: ModelSpec | None = None,
) -> TrialOutcome:
    spec, session, checked = open_tester_session(tester, dist, epsilon, params, seed)
    try:
        verdict = spec.run(session, epsilon, **checked)
    except ModelViolation as exc:
        logger.warning("%s broke %s on seed %s: %s", tester, session.model, seed, exc)
        queries, touched = session.accounting()
        return TrialOutcome(False, queries, touched, violation=True, audited=False)
    audited = True
    if audit_model is not None:
        audited = validate_log(audit_model, verdict.log, session.s, dist.n).ok
    return TrialOutcome(verdict.accept, verdict.queries, verdict.samples_touched, audited=audited)


def _trial_job(job: tuple) -> TrialOutcome:
    return run_trial(*job)


def estimate_acceptance(
    tester: str,
    dist: Dist,
    epsilon: Fraction | str,
    params: Mapping[str, int] | None = None,
    trials: int = 1000,
    seed: int = 0,
    *,
    workers: int = 1,
    audit_model: ModelSpec | str | None = None,
) -> AcceptanceReport:
    """Run ``trials`` independent sessions; trial ``t`` is seeded with ``(seed, t)``."""

    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    epsilon = as_epsilon(epsilon)
    params = dict(params or {})
    if isinstance(audit_model, str):
        audit_model = ModelSpec.parse(audit_model)
    jobs = [(tester, dist, epsilon, params, (seed, t), audit_model) for t in range(trials)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_job, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        outcomes = []
        for t, job in enumerate(jobs):
            outcomes.append(_trial_job(job))
            logger.debug("%s trial %d: %s", tester, t, outcomes[-1])

    accepts = sum(outcome.accept for outcome in outcomes)
    violations = sum(outcome.violation for outcome in outcomes)
    decided = trials - violations
    if violations:
        logger.warning("%s: %d of %d trials broke the model", tester, violations, trials)
    return AcceptanceReport(
        tester=tester,
        epsilon=epsilon,
        params=params,
        trials=trials,
        accepts=accepts,
        rate=accepts / decided if decided else float("nan"),
        interval=wilson_interval(accepts, decided) if decided else (0.0, 1.0),
        mean_queries=sum(outcome.queries for outcome in outcomes) / trials,
        mean_samples=sum(outcome.samples for outcome in outcomes) / trials,
        violations=violations,
        audit_model=None if audit_model is None else str(audit_model),
        audit_failures=sum(not outcome.audited for outcome in outcomes),
        outcomes=outcomes,
    )


def _row(
    config: ExperimentConfig,
    tester: str,
    family: str,
    params: dict[str, Any],
    epsilon: Fraction,
    workers: int,
) -> ReportRow:
    spec = get_tester(tester)
    tester_params = {name: int(params[name]) for name in spec.params}
    declared = spec.model(tester_params)
    audit = ModelSpec.parse(config.model) if config.model else declared
    instance = generate(family, params, config.seed)
    report = estimate_acceptance(
        tester,
        instance.dist,
        epsilon,
        tester_params,
        config.trials,
        config.seed,
        workers=workers,
        audit_model=audit,
    )
    row = ReportRow(
        tester=tester,
        model=str(declared),
        family=family,
        params=params,
        epsilon=str(epsilon),
        certificate=None if instance.certificate is None else str(instance.certificate),
        trials=report.trials,
        accept_rate=report.rate,
        ci_low=report.interval[0],
        ci_high=report.interval[1],
        mean_queries=report.mean_queries,
        mean_samples=report.mean_samples,
        rejects=report.rejects,
        violations=report.violations,
        audit_model=str(audit),
        audit_failures=report.audit_failures,
    )
    if row.violations:
        logger.warning("%s on %s: %d model violations", tester, family, row.violations)
    logger.info(
        "%s %s %s eps=%s: accept %.3f, audit %s failures %d",
        tester, family, params, epsilon, row.accept_rate, row.audit_model, row.audit_failures,
    )
    return row


def run_experiment(config: ExperimentConfig, *, workers: int | None = None) -> list[ReportRow]:
    """Cross tester x family x params x epsilon and write ``report.json`` and ``report.csv``."""

    workers = workers or config.workers
    rows = [
        _row(config, tester, family, dict(params), epsilon, workers)
        for tester, family, params, epsilon in product(
            config.testers, config.families, config.param_sets, config.epsilons
        )
    ]
    write_report(rows, config.out)
    return rows


def write_report(rows: list[ReportRow], out: Path) -> tuple[Path, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    json_path.write_text(
        json.dumps([row.model_dump() for row in rows], indent=2) + "\n", encoding="utf-8"
    )
    csv_path = out / "report.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(ReportRow.model_fields))
        writer.writeheader()
        for row in rows:
            writer.writerow(row.flat())
    logger.info("wrote %s and %s", json_path, csv_path)
    return json_path, csv_path


__all__ = [
    "AcceptanceReport",
    "TrialOutcome",
    "estimate_acceptance",
    "run_experiment",
    "run_trial",
    "wilson_interval",
]
