"""Sample-matrix sessions with enforced adaptivity models and offline log validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .bitcore import SymString, word
from .dists import Dist, draw

logger = logging.getLogger(__name__)

SeedLike = int | Sequence[int]

_ROW_STREAM = 0
_COIN_STREAM = 1
_CURSOR_STREAM = 2


class ModelKind(str, Enum):
    NON_ADAPTIVE = "non-adaptive"
    LOCALLY_BOUNDED = "locally-bounded"
    FORWARD_ONLY = "forward-only"
    WEAK_MEMORY = "weak"
    STRONG_MEMORY = "strong"
    FULLY_ADAPTIVE = "adaptive"


@dataclass(frozen=True, slots=True)
class ModelSpec:
    """An adaptivity model; the memory models carry their window size ``mem``."""

    kind: ModelKind
    mem: int | None = None

    def __post_init__(self) -> None:
        needs_mem = self.kind in (ModelKind.WEAK_MEMORY, ModelKind.STRONG_MEMORY)
        if needs_mem and (self.mem is None or self.mem < 1):
            raise ValueError(f"{self.kind.value} memory needs mem >= 1, got {self.mem}")
        if not needs_mem and self.mem is not None:
            raise ValueError(f"{self.kind.value} takes no memory parameter")

    @classmethod
    def non_adaptive(cls) -> ModelSpec:
        return cls(ModelKind.NON_ADAPTIVE)

    @classmethod
    def locally_bounded(cls) -> ModelSpec:
        return cls(ModelKind.LOCALLY_BOUNDED)

    @classmethod
    def forward_only(cls) -> ModelSpec:
        return cls(ModelKind.FORWARD_ONLY)

    @classmethod
    def weak(cls, mem: int) -> ModelSpec:
        return cls(ModelKind.WEAK_MEMORY, mem)

    @classmethod
    def strong(cls, mem: int) -> ModelSpec:
        return cls(ModelKind.STRONG_MEMORY, mem)

    @classmethod
    def fully_adaptive(cls) -> ModelSpec:
        return cls(ModelKind.FULLY_ADAPTIVE)

    @classmethod
    def parse(cls, text: str) -> ModelSpec:
        """Parse ``forward-only``, ``weak:2``, ``strong:3`` and friends."""

        name, _, arg = text.strip().lower().partition(":")
        try:
            kind = ModelKind(name)
        except ValueError as exc:
            choices = ", ".join(kind.value for kind in ModelKind)
            raise ValueError(f"unknown model {text!r}; expected one of {choices}") from exc
        return cls(kind, int(arg) if arg else None)

    def __str__(self) -> str:
        return self.kind.value if self.mem is None else f"{self.kind.value}:{self.mem}"


@dataclass(frozen=True, slots=True)
class Query:
    i: int
    j: int
    answer: int
    cursor: bool = False


@dataclass(frozen=True, slots=True)
class Forget:
    i: int


@dataclass(frozen=True, slots=True)
class Plan:
    queries: tuple[tuple[int, int], ...]


@dataclass(frozen=True, slots=True)
class Seal:
    i: int


@dataclass(frozen=True, slots=True)
class Decide:
    accept: bool


Event = Query | Forget | Plan | Seal | Decide


@dataclass
class QueryLog:
    events: list[Event] = field(default_factory=list)

    def append(self, event: Event) -> None:
        self.events.append(event)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def queries(self) -> list[Query]:
        return [event for event in self.events if isinstance(event, Query)]

    def decision(self) -> bool | None:
        for event in reversed(self.events):
            if isinstance(event, Decide):
                return event.accept
        return None


class ModelViolation(ValueError):
    """Raised when a query, forget or decision breaks the session's adaptivity model."""

    def __init__(self, rule: str, event_index: int) -> None:
        super().__init__(f"{rule} (event {event_index})")
        self.rule = rule
        self.event_index = event_index


@dataclass(frozen=True, slots=True)
class LogValidation:
    ok: bool
    index: int | None = None
    rule: str | None = None

    def __bool__(self) -> bool:
        return self.ok


class _Guard:
    """The legality rules of one model, shared by live sessions and log replay."""

    def __init__(self, model: ModelSpec, s: int, n: int) -> None:
        self.model = model
        self.s = s
        self.n = n
        self.top = 0
        self.touched: set[int] = set()
        self.planned: set[tuple[int, int]] | None = None
        self.sealed: set[int] = set()
        self.decided = False
        self.memory: set[int] = set()
        self.forgotten: set[int] = set()
        self.admitted = 0
        if model.kind is ModelKind.STRONG_MEMORY:
            assert model.mem is not None
            self.admitted = min(model.mem, s)
            self.memory = set(range(1, self.admitted + 1))

    def _sample_in_range(self, i: int) -> str | None:
        if not 1 <= i <= self.s:
            return f"sample index {i} outside 1..{self.s}"
        return None

    def check_query(self, i: int, j: int, cursor: bool) -> str | None:
        if self.decided:
            return "the log continues after the decision"
        if problem := self._sample_in_range(i):
            return problem
        if not 1 <= j <= self.n:
            return f"position {j} outside 1..{self.n}"
        if cursor and i in self.sealed:
            return "a sealed cursor cannot query again"

        kind, mem = self.model.kind, self.model.mem
        if kind is ModelKind.NON_ADAPTIVE:
            if self.planned is None or (i, j) not in self.planned:
                return "all queries must be pre-registered in one batch before any answer is revealed"
        elif kind is ModelKind.LOCALLY_BOUNDED:
            if not cursor:
                return "queries must go through a per-sample cursor"
        elif kind is ModelKind.FORWARD_ONLY:
            if i < self.top:
                return "cannot query a sample after querying a later one"
        elif kind is ModelKind.WEAK_MEMORY:
            assert mem is not None
            if self.top - mem >= i:
                return f"sample {i} left the window of the {mem} most recent samples"
        elif kind is ModelKind.STRONG_MEMORY:
            assert mem is not None
            if i in self.memory:
                return None
            if i in self.forgotten:
                return "a forgotten sample cannot be recalled"
            if i != self.admitted + 1:
                return "new samples must be admitted in order"
            if len(self.memory) >= mem:
                return f"memory already holds {mem} samples; forget one first"
        return None

    def check_forget(self, i: int) -> str | None:
        if self.decided:
            return "the log continues after the decision"
        if self.model.kind is not ModelKind.STRONG_MEMORY:
            return "forget is only meaningful under strong memory"
        if problem := self._sample_in_range(i):
            return problem
        if i in self.forgotten:
            return f"sample {i} was already forgotten"
        if i not in self.memory:
            return f"sample {i} is not in memory"
        return None

    def check_plan(self, queries: Iterable[tuple[int, int]]) -> str | None:
        if self.decided:
            return "the log continues after the decision"
        if self.model.kind is ModelKind.NON_ADAPTIVE and (self.planned is not None or self.touched):
            return "queries must be registered in one batch before any answer is revealed"
        for i, j in queries:
            if problem := self._sample_in_range(i):
                return problem
            if not 1 <= j <= self.n:
                return f"position {j} outside 1..{self.n}"
        return None

    def check_seal(self, i: int) -> str | None:
        if self.decided:
            return "the log continues after the decision"
        if problem := self._sample_in_range(i):
            return problem
        if i in self.sealed:
            return f"cursor {i} is already sealed"
        return None

    def check_decide(self) -> str | None:
        if self.decided:
            return "a log holds at most one decision"
        if self.model.kind is ModelKind.LOCALLY_BOUNDED and self.touched - self.sealed:
            return "the decision may read transcripts only after every cursor is sealed"
        return None

    def check(self, event: Event) -> str | None:
        match event:
            case Query(i=i, j=j, cursor=cursor):
                return self.check_query(i, j, cursor)
            case Forget(i=i):
                return self.check_forget(i)
            case Plan(queries=queries):
                return self.check_plan(queries)
            case Seal(i=i):
                return self.check_seal(i)
            case Decide():
                return self.check_decide()
        raise TypeError(f"unknown log event {event!r}")

    def apply(self, event: Event) -> None:
        match event:
            case Query(i=i):
                self.touched.add(i)
                self.top = max(self.top, i)
                if self.model.kind is ModelKind.STRONG_MEMORY and i not in self.memory:
                    self.memory.add(i)
                    self.admitted = i
            case Forget(i=i):
                self.memory.discard(i)
                self.forgotten.add(i)
            case Plan(queries=queries):
                self.planned = (self.planned or set()) | set(queries)
            case Seal(i=i):
                self.sealed.add(i)
            case Decide():
                self.decided = True

    def accessible(self) -> frozenset[int]:
        kind, mem = self.model.kind, self.model.mem
        if kind is ModelKind.STRONG_MEMORY:
            return frozenset(self.memory)
        if kind is ModelKind.WEAK_MEMORY and self.top:
            assert mem is not None
            return frozenset(range(max(1, self.top - mem + 1), self.top + 1))
        if kind is ModelKind.FORWARD_ONLY and self.top:
            return frozenset(range(self.top, self.s + 1))
        return frozenset(range(1, self.s + 1))


@dataclass(slots=True)
class Verdict:
    accept: bool
    queries: int
    samples_touched: int
    log: QueryLog


def _entropy(seed: SeedLike) -> list[int]:
    values = [seed] if isinstance(seed, int) else list(seed)
    if not values or any(value < 0 for value in values):
        raise ValueError(f"seeds are non-negative integers, got {seed!r}")
    return [int(value) for value in values]


Transcript = tuple[tuple[int, int], ...]


class SampleCursor:
    """One sample's view in a locally-bounded run: its own row and its own coins.

    A cursor is handed to a per-sample strategy and sealed when the strategy
    returns. Shared randomness must be drawn from ``session.coins`` before the
    cursor is opened; ``coins`` belongs to this sample alone. The transcript and
    the strategy's return value stay hidden until the session's cursor phase ends.
    """

    def __init__(self, session: Session, index: int, *, shadow_row: SymString | None = None) -> None:
        self._session = session
        self.index = index
        self.coins = session._cursor_coins(index)
        self._shadow_row = shadow_row
        self._answers: list[tuple[int, int]] = []
        self._result: Any = None
        self.sealed = False

    def query(self, j: int) -> int:
        if self.sealed:
            raise ModelViolation(f"cursor {self.index} is sealed", len(self._session.log))
        if self._shadow_row is None:
            answer = self._session._ask(self.index, j, cursor=True)
        elif 1 <= j <= len(self._shadow_row):
            answer = self._shadow_row[j - 1]
        else:
            raise ModelViolation(f"position {j} outside 1..{len(self._shadow_row)}", len(self._session.log))
        self._answers.append((j, answer))
        return answer

    def seal(self) -> None:
        if self.sealed:
            return
        if self._shadow_row is None:
            self._session._submit(Seal(self.index))
        self.sealed = True

    def _readable(self) -> None:
        if not (self.sealed and self._session._cursors_closed):
            raise ModelViolation(
                "cursor output is readable only after the cursor phase ends",
                len(self._session.log),
            )

    @property
    def transcript(self) -> Transcript:
        self._readable()
        return tuple(self._answers)

    @property
    def result(self) -> Any:
        self._readable()
        return self._result


LocalStrategy = Callable[[SampleCursor], Any]

class Session:
    """Oracle access to ``s`` samples drawn in advance from ``dist``.

    Rows are materialized lazily from per-row seed streams, so a row's value
    never depends on which rows were read before it.
    """

    def __init__(self, dist: Dist, s: int, model: ModelSpec, seed: SeedLike = 0) -> None:
        if s < 1:
            raise ValueError(f"a session needs at least one sample, got s={s}")
        self.dist = dist
        self.s = s
        self.model = model
        self.seed = seed
        self.log = QueryLog()
        self._entropy = _entropy(seed)
        self._rows: dict[int, SymString] = {}
        self._guard = _Guard(model, s, dist.n)
        self._cursors: dict[int, SampleCursor] = {}
        self._strategies: list[tuple[int, LocalStrategy]] = []
        self._running: int | None = None
        self._cursors_closed = False
        self._locality_error: ModelViolation | None = None
        self.coins = np.random.default_rng(
            np.random.SeedSequence(self._entropy, spawn_key=(_COIN_STREAM,))
        )

    @property
    def n(self) -> int:
        return self.dist.n

    def row(self, i: int) -> SymString:
        """The ``i``-th sample; for harness inspection, never for testers."""

        if i not in self._rows:
            stream = np.random.SeedSequence(self._entropy, spawn_key=(_ROW_STREAM, i))
            self._rows[i] = draw(self.dist, np.random.default_rng(stream))
        return self._rows[i]

    def _submit(self, event: Event) -> None:
        rule = self._guard.check(event)
        if rule is not None:
            raise ModelViolation(rule, len(self.log))
        self._guard.apply(event)
        self.log.append(event)

    def _ask(self, i: int, j: int, *, cursor: bool) -> int:
        rule = self._guard.check_query(i, j, cursor)
        if rule is not None:
            raise ModelViolation(rule, len(self.log))
        event = Query(i, j, self.row(i)[j - 1], cursor)
        self._guard.apply(event)
        self.log.append(event)
        return event.answer

    def query(self, i: int, j: int) -> int:
        """The ``j``-th symbol of sample ``i`` (both 1-based)."""
        return self._ask(i, j, cursor=False)

    def plan(self, queries: Iterable[tuple[int, int]]) -> None:
        self._submit(Plan(tuple((int(i), int(j)) for i, j in queries)))

    def forget(self, i: int) -> None:
        self._submit(Forget(i))

    def _cursor_coins(self, i: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self._entropy, spawn_key=(_CURSOR_STREAM, i))
        )

    def cursor(self, i: int, strategy: LocalStrategy) -> SampleCursor:
        """Run ``strategy`` against sample ``i`` alone and seal its cursor when it returns."""

        at = len(self.log)
        if self._cursors_closed:
            raise ModelViolation("no cursor can be opened after the cursor phase ends", at)
        if self._running is not None:
            raise ModelViolation(f"cursor {i} opened while cursor {self._running} is running", at)
        if not 1 <= i <= self.s:
            raise ModelViolation(f"sample index {i} outside 1..{self.s}", at)
        if i in self._cursors:
            raise ModelViolation(f"sample {i} already had its cursor", at)

        handle = SampleCursor(self, i)
        self._cursors[i] = handle
        self._strategies.append((i, strategy))
        self._running = i
        try:
            handle._result = strategy(handle)
        finally:
            self._running = None
        handle.seal()
        return handle

    def _shifted(self, k: int) -> SymString:
        row = self.row(k)
        c = row.alphabet_size
        return word([(a + 1) % c for a in row.symbols], c)

    def _replay(self, upto: int) -> Transcript | None:
        """Sample ``i``'s transcript when every earlier sample answers with shifted symbols."""

        i = self._strategies[upto][0]
        for k, strategy in self._strategies[: upto + 1]:
            shadow = SampleCursor(self, k, shadow_row=self.row(k) if k == i else self._shifted(k))
            try:
                strategy(shadow)
            except ModelViolation:
                return None
        return tuple(shadow._answers)

    def _audit_locality(self) -> ModelViolation | None:
        for upto, (i, _) in enumerate(self._strategies[1:], start=1):
            if self._replay(upto) != tuple(self._cursors[i]._answers):
                logger.debug("cursor %d changed its queries under shifted neighbours", i)
                return ModelViolation(
                    f"queries to sample {i} depend on answers from other samples", len(self.log)
                )
        return None

    def _close_cursors(self) -> None:
        if not self._cursors_closed:
            self._cursors_closed = True
            self._locality_error = self._audit_locality()
        if self._locality_error is not None:
            raise self._locality_error

    def transcripts(self) -> dict[int, Transcript]:
        """End the cursor phase and return every transcript.

        Ending the phase replays each strategy with the other samples' answers
        shifted; a sample whose queries change raises ``ModelViolation``.
        """

        self._close_cursors()
        return {i: cursor.transcript for i, cursor in sorted(self._cursors.items())}

    def results(self) -> dict[int, Any]:
        self._close_cursors()
        return {i: cursor.result for i, cursor in sorted(self._cursors.items())}

    def memory_state(self) -> frozenset[int]:
        return self._guard.accessible()

    def accounting(self) -> tuple[int, int]:
        return accounting(self)

    def decide(self, accept: bool) -> Verdict:
        if self._cursors:
            self._close_cursors()
        self._submit(Decide(bool(accept)))
        q, touched = self.accounting()
        return Verdict(accept=bool(accept), queries=q, samples_touched=touched, log=self.log)


def open_session(dist: Dist, s: int, model: ModelSpec, seed: SeedLike = 0) -> Session:
    return Session(dist, s, model, seed)


def query(session: Session, i: int, j: int) -> int:
    return session.query(i, j)


def forget(session: Session, i: int) -> None:
    session.forget(i)


def plan(session: Session, queries: Iterable[tuple[int, int]]) -> None:
    session.plan(queries)


def cursor(session: Session, i: int, strategy: LocalStrategy) -> SampleCursor:
    return session.cursor(i, strategy)


def decide(session: Session, accept: bool) -> Verdict:
    return session.decide(accept)


def accounting(session: Session) -> tuple[int, int]:
    queries = session.log.queries()
    return len(queries), len({event.i for event in queries})


def validate_log(model: ModelSpec, log: QueryLog | Iterable[Event], s: int, n: int) -> LogValidation:
    """Replay ``log`` against the rules of ``model``; report the first violation."""

    guard = _Guard(model, s, n)
    for index, event in enumerate(log):
        rule = guard.check(event)
        if rule is not None:
            return LogValidation(ok=False, index=index, rule=rule)
        guard.apply(event)
    return LogValidation(ok=True)


def realize_strong(log: QueryLog, mem: int, s: int) -> QueryLog:
    """Insert forgets so a weak ``mem``-memory log runs under strong ``mem``-memory.

    Applies to logs whose new samples are first touched in index order.
    """

    memory = set(range(1, min(mem, s) + 1))
    top = 0
    realized = QueryLog()
    for event in log:
        if isinstance(event, Query):
            top = max(top, event.i)
            low = top - mem + 1
            for stale in sorted(sample for sample in memory if sample < low):
                memory.discard(stale)
                realized.append(Forget(stale))
            memory.add(event.i)
        realized.append(event)
    return realized


__all__ = [
    "Decide",
    "Event",
    "Forget",
    "LocalStrategy",
    "LogValidation",
    "ModelKind",
    "ModelSpec",
    "ModelViolation",
    "Plan",
    "Query",
    "QueryLog",
    "SampleCursor",
    "Seal",
    "Session",
    "Transcript",
    "Verdict",
    "accounting",
    "cursor",
    "decide",
    "forget",
    "open_session",
    "plan",
    "query",
    "realize_strong",
    "validate_log",
]
