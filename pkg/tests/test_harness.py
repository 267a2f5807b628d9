"""Tests for acceptance estimates and experiment reports."""

import csv
import json
import math
from fractions import Fraction

import pytest

from adaptest import testers
from adaptest.access import ModelSpec
from adaptest.bitcore import ones, zeros
from adaptest.dists import point
from adaptest.harness import estimate_acceptance, run_experiment, run_trial, wilson_interval
from adaptest.lab import Family, gen_sym
from adaptest.records import ExperimentConfig
from adaptest.testers import TesterSpec


def test_wilson_interval_brackets_the_rate() -> None:
    low, high = wilson_interval(30, 100)
    assert 0 < low < 0.3 < high < 1
    wide = wilson_interval(30, 100, 0.999)
    assert wide[0] < low and wide[1] > high
    assert wilson_interval(0, 50)[0] == pytest.approx(0, abs=1e-9)
    assert wilson_interval(50, 50)[1] == pytest.approx(1, abs=1e-9)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_estimate_on_members_and_far_inputs() -> None:
    accept = estimate_acceptance("all_zero", point(zeros(6)), "1/4", trials=50)
    assert (accept.accepts, accept.rate, accept.rejects) == (50, 1.0, 0)
    assert accept.mean_queries == 4
    assert accept.violations == 0

    reject = estimate_acceptance("all_zero", point(ones(6)), "1/4", trials=50)
    assert reject.accepts == 0
    assert reject.mean_queries == 1


@pytest.mark.slow
def test_estimate_matches_closed_form(zero_one_dist, trial_count) -> None:
    trials = trial_count(4000, 500)
    report = estimate_acceptance("all_zero", zero_one_dist, Fraction(1, 2), trials=trials, seed=9)
    low, high = wilson_interval(report.accepts, trials, 0.999)
    assert low <= 0.25 <= high
    assert report.interval == wilson_interval(report.accepts, trials)


def test_trials_are_reproducible(zero_one_dist) -> None:
    first = estimate_acceptance("determinism", zero_one_dist, "1/3", trials=40, seed=2)
    second = estimate_acceptance("determinism", zero_one_dist, "1/3", trials=40, seed=2)
    assert [o.accept for o in first.outcomes] == [o.accept for o in second.outcomes]


def test_workers_do_not_change_the_outcome(zero_one_dist) -> None:
    sequential = estimate_acceptance("determinism", zero_one_dist, "1/3", trials=24, seed=4)
    pooled = estimate_acceptance("determinism", zero_one_dist, "1/3", trials=24, seed=4, workers=2)
    assert pooled.outcomes == sequential.outcomes


def test_audit_counts_logs_outside_the_audit_model() -> None:
    dist = gen_sym(Family.SYM_YES, 16, seed=1).dist
    report = estimate_acceptance("sym_weak2", dist, "1/2", trials=6, audit_model="forward-only")
    assert report.audit_model == "forward-only"
    assert report.audit_failures == 6
    assert report.accepts == 6

    own = estimate_acceptance("sym_weak2", dist, "1/2", trials=6, audit_model=ModelSpec.weak(2))
    assert own.audit_failures == 0


def test_run_trial_reports_accounting() -> None:
    outcome = run_trial("all_zero", point(zeros(4)), Fraction(1, 2), {}, (0, 1))
    assert outcome.accept and outcome.audited and not outcome.violation
    assert (outcome.queries, outcome.samples) == (2, 2)


def test_estimate_checks_its_arguments() -> None:
    with pytest.raises(ValueError):
        estimate_acceptance("all_zero", point(zeros(4)), "1/2", trials=0)
    with pytest.raises(ValueError):
        estimate_acceptance("all_zero", point(zeros(4)), "2")


def test_run_experiment_writes_json_and_csv(tmp_path) -> None:
    config = ExperimentConfig(
        tester="inv_forward",
        family=["InvYes", "InvNo"],
        params={"n": 64},
        epsilon=["1/4"],
        trials=5,
        seed=1,
        out=tmp_path / "results",
    )
    rows = run_experiment(config)
    assert [row.family for row in rows] == ["InvYes", "InvNo"]
    assert rows[0].accept_rate == 1.0
    assert rows[1].certificate is not None
    assert all(row.violations == 0 and row.audit_failures == 0 for row in rows)
    assert all(row.audit_model == "forward-only" for row in rows)

    payload = json.loads((tmp_path / "results" / "report.json").read_text())
    assert len(payload) == 2
    with (tmp_path / "results" / "report.csv").open() as handle:
        table = list(csv.DictReader(handle))
    assert [line["family"] for line in table] == ["InvYes", "InvNo"]
    assert json.loads(table[0]["params"]) == {"n": 64}


def _half_broken(session, epsilon):
    if session.seed[1] % 2:
        session.query(1, 1)
    session.plan([])
    return session.decide(True)


def test_violated_trials_are_left_out_of_the_rate(monkeypatch) -> None:
    spec = TesterSpec(
        "half_broken", lambda params: ModelSpec.non_adaptive(), lambda e, p: 1, lambda e, p, n: 1, _half_broken
    )
    monkeypatch.setitem(testers.TESTERS, "half_broken", spec)
    report = estimate_acceptance("half_broken", point(zeros(4)), "1/4", trials=10)
    assert (report.violations, report.accepts, report.decided) == (5, 5, 5)
    assert report.rate == 1.0
    assert report.rejects == 0
    assert report.interval == wilson_interval(5, 5)


def test_all_violated_trials_give_no_rate(monkeypatch) -> None:
    def always_broken(session, epsilon):
        session.query(1, 1)

    spec = TesterSpec(
        "always_broken", lambda params: ModelSpec.non_adaptive(), lambda e, p: 1, lambda e, p, n: 1, always_broken
    )
    monkeypatch.setitem(testers.TESTERS, "always_broken", spec)
    report = estimate_acceptance("always_broken", point(zeros(4)), "1/4", trials=4)
    assert report.violations == 4 and report.decided == 0
    assert math.isnan(report.rate)
    assert report.interval == (0.0, 1.0)
    assert report.rejects == 0
