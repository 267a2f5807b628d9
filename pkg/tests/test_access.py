"""Tests for sessions, the adaptivity guards and offline log validation."""

import numpy as np
import pytest

from adaptest.access import (
    Decide,
    Forget,
    ModelKind,
    ModelSpec,
    ModelViolation,
    Plan,
    Query,
    QueryLog,
    Seal,
    Session,
    accounting,
    cursor,
    decide,
    forget,
    open_session,
    plan,
    query,
    realize_strong,
    validate_log,
)
from adaptest.bitcore import word
from adaptest.dists import Dist, uniform


@pytest.fixture
def nibbles() -> Dist:
    return uniform(word([int(b) for b in format(v, "04b")]) for v in range(16))


def test_model_spec_parse_and_text() -> None:
    assert ModelSpec.parse("weak:2") == ModelSpec.weak(2)
    assert ModelSpec.parse(" Forward-Only ") == ModelSpec.forward_only()
    assert str(ModelSpec.strong(3)) == "strong:3"
    assert str(ModelSpec.non_adaptive()) == "non-adaptive"
    with pytest.raises(ValueError):
        ModelSpec.parse("bogus")
    with pytest.raises(ValueError):
        ModelSpec.weak(0)
    with pytest.raises(ValueError):
        ModelSpec(ModelKind.FORWARD_ONLY, 2)


def test_rows_depend_only_on_seed_and_index(nibbles) -> None:
    first = Session(nibbles, 6, ModelSpec.fully_adaptive(), seed=3)
    second = Session(nibbles, 6, ModelSpec.fully_adaptive(), seed=3)
    forward = [first.row(i) for i in range(1, 7)]
    backward = [second.row(i) for i in range(6, 0, -1)][::-1]
    assert forward == backward

    other = Session(nibbles, 6, ModelSpec.fully_adaptive(), seed=(3, 1))
    assert [other.row(i) for i in range(1, 7)] != forward


def test_query_answers_come_from_the_rows(nibbles) -> None:
    session = Session(nibbles, 4, ModelSpec.fully_adaptive(), seed=11)
    for i in range(1, 5):
        assert [session.query(i, j) for j in range(1, 5)] == list(session.row(i).symbols)


def test_sessions_reject_bad_arguments(nibbles) -> None:
    with pytest.raises(ValueError):
        Session(nibbles, 0, ModelSpec.fully_adaptive())
    with pytest.raises(ValueError):
        Session(nibbles, 2, ModelSpec.fully_adaptive(), seed=-1)
    session = Session(nibbles, 2, ModelSpec.fully_adaptive())
    with pytest.raises(ModelViolation):
        session.query(3, 1)
    with pytest.raises(ModelViolation):
        session.query(1, 5)


def test_forward_only_never_steps_back(nibbles) -> None:
    session = Session(nibbles, 5, ModelSpec.forward_only())
    session.query(1, 1)
    session.query(3, 2)
    session.query(3, 4)
    assert session.memory_state() == frozenset({3, 4, 5})
    with pytest.raises(ModelViolation) as caught:
        session.query(2, 1)
    assert caught.value.event_index == 3
    session.query(5, 1)


def test_weak_memory_keeps_a_sliding_window(nibbles) -> None:
    session = Session(nibbles, 6, ModelSpec.weak(2))
    session.query(1, 1)
    session.query(3, 1)
    session.query(2, 1)
    assert session.memory_state() == frozenset({2, 3})
    with pytest.raises(ModelViolation):
        session.query(1, 2)
    session.query(6, 1)
    with pytest.raises(ModelViolation):
        session.query(4, 1)
    session.query(5, 3)


def test_strong_memory_admits_in_order_and_never_recalls(nibbles) -> None:
    session = Session(nibbles, 5, ModelSpec.strong(2))
    assert session.memory_state() == frozenset({1, 2})
    session.query(2, 1)
    with pytest.raises(ModelViolation):
        session.query(3, 1)
    session.forget(1)
    with pytest.raises(ModelViolation):
        session.query(1, 1)
    with pytest.raises(ModelViolation):
        session.query(4, 1)
    session.query(3, 1)
    assert session.memory_state() == frozenset({2, 3})
    with pytest.raises(ModelViolation):
        session.forget(1)
    with pytest.raises(ModelViolation):
        session.forget(5)


def test_forget_only_under_strong_memory(nibbles) -> None:
    session = Session(nibbles, 3, ModelSpec.weak(2))
    session.query(1, 1)
    with pytest.raises(ModelViolation):
        session.forget(1)


def test_non_adaptive_queries_follow_one_plan(nibbles) -> None:
    session = Session(nibbles, 3, ModelSpec.non_adaptive())
    with pytest.raises(ModelViolation):
        session.query(1, 1)
    session.plan([(1, 1), (2, 3)])
    session.query(2, 3)
    session.query(1, 1)
    with pytest.raises(ModelViolation):
        session.query(1, 2)
    with pytest.raises(ModelViolation):
        session.plan([(1, 2)])


def _read_first_and_last(cursor) -> int:
    return cursor.query(1) + cursor.query(4)


def test_locally_bounded_runs_one_strategy_per_sample(nibbles) -> None:
    session = Session(nibbles, 3, ModelSpec.locally_bounded())
    with pytest.raises(ModelViolation):
        session.query(1, 1)

    first = session.cursor(1, _read_first_and_last)
    assert first.sealed
    with pytest.raises(ModelViolation):
        first.query(2)
    with pytest.raises(ModelViolation):
        _ = first.transcript
    with pytest.raises(ModelViolation):
        _ = first.result

    session.cursor(2, _read_first_and_last)
    with pytest.raises(ModelViolation):
        session.cursor(2, _read_first_and_last)

    row = session.row(1)
    assert session.transcripts()[1] == ((1, row[0]), (4, row[3]))
    assert session.results()[2] == session.row(2)[0] + session.row(2)[3]
    assert first.transcript == ((1, row[0]), (4, row[3]))
    with pytest.raises(ModelViolation):
        session.cursor(3, _read_first_and_last)
    assert session.decide(False).accept is False
    assert validate_log(ModelSpec.locally_bounded(), session.log, 3, 4)


def test_cursors_run_one_at_a_time(nibbles) -> None:
    session = Session(nibbles, 2, ModelSpec.locally_bounded())

    def opens_another(cursor) -> None:
        cursor.query(1)
        session.cursor(2, _read_first_and_last)

    with pytest.raises(ModelViolation):
        session.cursor(1, opens_another)
    with pytest.raises(ModelViolation):
        session.cursor(3, _read_first_and_last)


def test_queries_steered_by_other_samples_are_rejected(nibbles) -> None:
    session = Session(nibbles, 3, ModelSpec.locally_bounded(), seed=4)
    seen: dict[int, int] = {}

    def lead(cursor) -> None:
        seen[1] = cursor.query(1)

    def follow(cursor) -> None:
        seen[2] = cursor.query(2 + seen[1])

    def last(cursor) -> None:
        cursor.query(1 if seen[2] else 3)

    for i, strategy in enumerate((lead, follow, last), start=1):
        session.cursor(i, strategy)
    with pytest.raises(ModelViolation) as caught:
        session.transcripts()
    assert "other samples" in caught.value.rule
    with pytest.raises(ModelViolation):
        session.decide(True)
    assert session.log.decision() is None


def test_decide_audits_cursors_it_was_not_shown(nibbles) -> None:
    session = Session(nibbles, 2, ModelSpec.locally_bounded(), seed=1)
    seen: list[int] = []
    session.cursor(1, lambda cursor: seen.append(cursor.query(2)))
    session.cursor(2, lambda cursor: cursor.query(1 + 2 * seen[-1]))
    with pytest.raises(ModelViolation):
        session.decide(True)


def test_private_coins_pass_the_locality_audit(nibbles) -> None:
    def wander(cursor) -> list[int]:
        return [cursor.query(int(j)) for j in cursor.coins.integers(1, 5, size=3)]

    runs = []
    for _ in range(2):
        session = Session(nibbles, 4, ModelSpec.locally_bounded(), seed=2)
        for i in range(1, 5):
            session.cursor(i, wander)
        runs.append(session.transcripts())
        assert all(len(transcript) == 3 for transcript in runs[-1].values())
    assert runs[0] == runs[1]


def test_decision_is_final(nibbles) -> None:
    session = Session(nibbles, 3, ModelSpec.fully_adaptive())
    session.query(1, 1)
    session.query(1, 2)
    session.query(3, 1)
    verdict = session.decide(True)
    assert (verdict.queries, verdict.samples_touched) == (3, 2)
    assert accounting(session) == (3, 2)
    assert session.log.decision() is True
    with pytest.raises(ModelViolation):
        session.query(2, 1)
    with pytest.raises(ModelViolation):
        session.decide(False)


@pytest.mark.parametrize(
    ("model", "events", "index"),
    [
        (ModelSpec.forward_only(), [Query(1, 1, 0), Query(2, 1, 0), Query(1, 2, 0)], 2),
        (ModelSpec.weak(2), [Query(1, 1, 0), Query(3, 1, 0), Query(1, 2, 0)], 2),
        (ModelSpec.weak(2), [Query(1, 1, 0), Query(2, 1, 0), Query(1, 2, 0), Decide(True)], None),
        (ModelSpec.strong(1), [Query(1, 1, 0), Query(2, 1, 0)], 1),
        (ModelSpec.strong(1), [Query(1, 1, 0), Forget(1), Query(2, 1, 0), Decide(True)], None),
        (ModelSpec.non_adaptive(), [Plan(((1, 1),)), Query(1, 1, 0), Plan(((2, 1),))], 2),
        (ModelSpec.locally_bounded(), [Query(1, 1, 0, cursor=True), Decide(True)], 1),
        (ModelSpec.locally_bounded(), [Query(1, 1, 0, cursor=True), Seal(1), Decide(True)], None),
        (ModelSpec.fully_adaptive(), [Decide(True), Query(1, 1, 0)], 1),
        (ModelSpec.fully_adaptive(), [Forget(1)], 0),
    ],
)
def test_validate_log_reports_the_first_violation(model, events, index) -> None:
    result = validate_log(model, events, s=3, n=4)
    assert bool(result) is (index is None)
    assert result.index == index


def test_session_logs_validate_under_their_own_model(nibbles) -> None:
    session = Session(nibbles, 4, ModelSpec.weak(2), seed=5)
    for i in (1, 2, 1, 3, 2, 4, 3):
        session.query(i, 1 + i % 4)
    session.decide(True)
    assert validate_log(ModelSpec.weak(2), session.log, 4, 4)
    assert not validate_log(ModelSpec.forward_only(), session.log, 4, 4)


def test_realize_strong_turns_a_weak_log_into_a_strong_one(nibbles) -> None:
    session = Session(nibbles, 6, ModelSpec.weak(2), seed=1)
    for i in (1, 2, 1, 3, 2, 4, 5, 4, 6):
        session.query(i, 2)
    session.decide(False)
    assert not validate_log(ModelSpec.strong(2), session.log, 6, 4)

    realized = realize_strong(session.log, 2, 6)
    assert validate_log(ModelSpec.strong(2), realized, 6, 4)
    assert realized.queries() == session.log.queries()
    assert sum(isinstance(event, Forget) for event in realized) == 4


def _replay(model: ModelSpec, events: list, s: int, n: int, dist: Dist) -> int | None:
    session = Session(dist, s, model)
    for index, event in enumerate(events):
        try:
            session._submit(event)
        except ModelViolation as exc:
            assert exc.event_index == index
            return index
    return None


@pytest.mark.parametrize(
    "model",
    [ModelSpec.forward_only(), ModelSpec.weak(2), ModelSpec.strong(2), ModelSpec.fully_adaptive()],
    ids=str,
)
def test_live_guard_and_replay_agree_on_mutated_logs(model, nibbles) -> None:
    rng = np.random.default_rng(17)
    s, n = 5, 4
    for _ in range(200):
        events = []
        for _ in range(int(rng.integers(1, 9))):
            i = int(rng.integers(1, s + 1))
            if model.kind is ModelKind.STRONG_MEMORY and rng.random() < 0.3:
                events.append(Forget(i))
            else:
                events.append(Query(i, int(rng.integers(1, n + 1)), 0))
        if rng.random() < 0.5:
            events.insert(int(rng.integers(0, len(events) + 1)), Decide(True))
        expected = validate_log(model, events, s, n)
        assert _replay(model, events, s, n, nibbles) == expected.index


def test_query_log_helpers() -> None:
    log = QueryLog([Query(1, 1, 0), Forget(1), Query(2, 2, 1), Decide(False)])
    assert len(log) == 4
    assert [q.i for q in log.queries()] == [1, 2]
    assert log.decision() is False
    assert QueryLog().decision() is None


def test_module_level_operations(nibbles) -> None:
    session = open_session(nibbles, 2, ModelSpec.non_adaptive(), seed=9)
    plan(session, [(1, 2), (2, 2)])
    assert query(session, 2, 2) == session.row(2)[1]
    assert decide(session, True).queries == 1

    strong = open_session(nibbles, 2, ModelSpec.strong(1))
    query(strong, 1, 1)
    forget(strong, 1)
    assert strong.memory_state() == frozenset()

    local = open_session(nibbles, 1, ModelSpec.locally_bounded())
    cursor(local, 1, lambda handle: handle.query(3))
    assert decide(local, False).samples_touched == 1
