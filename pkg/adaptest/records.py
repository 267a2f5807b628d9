"""Wire formats: distribution files, code descriptors, JSON-lines logs, verdicts and configs."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, ClassVar, Iterable, Literal, Type

from pydantic import BaseModel, Field, ValidationError, field_validator

from .access import Decide, Event, Forget, ModelSpec, Plan, Query, QueryLog, Seal, Verdict
from .bitcore import SymString, SystematicCode
from .dists import Dist


class LogParseError(ValueError):
    """Raised when a query-log line cannot be parsed into an event."""


def parse_fraction(value: str | int | Fraction) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {value!r}") from exc


# Distributions and codes


class SupportEntry(BaseModel):
    string: str = Field(..., description="0/1 text, or space-separated symbols when c > 2")
    num: int = Field(..., gt=0)
    den: int = Field(..., gt=0)

    @field_validator("string")
    @classmethod
    def _strip_string(cls, value: str) -> str:
        cleaned = value.strip()
        if not cleaned:
            raise ValueError("support strings cannot be empty")
        return cleaned


class DistFile(BaseModel):
    n: int = Field(..., gt=0, description="length of every support string")
    alphabet_size: int = Field(2, ge=2)
    support: list[SupportEntry]

    @classmethod
    def from_dist(cls, dist: Dist) -> DistFile:
        return cls(
            n=dist.n,
            alphabet_size=dist.alphabet_size,
            support=[
                SupportEntry(string=str(x), num=p.numerator, den=p.denominator) for x, p in dist
            ],
        )

    def to_dist(self) -> Dist:
        return Dist(
            n=self.n,
            alphabet_size=self.alphabet_size,
            support=tuple(
                (SymString.from_text(entry.string, self.alphabet_size), Fraction(entry.num, entry.den))
                for entry in self.support
            ),
        )


def dist_to_file(dist: Dist, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(DistFile.from_dist(dist).model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def dist_from_file(path: Path | str) -> Dist:
    return DistFile.model_validate_json(Path(path).read_text(encoding="utf-8")).to_dist()


class CodeDescriptor(BaseModel):
    m: int
    n: int
    L: int
    codewords: list[str]

    @classmethod
    def from_code(cls, code: SystematicCode) -> CodeDescriptor:
        return cls(m=code.m, n=code.n, L=code.L, codewords=code.lines())


class CertificateRecord(BaseModel):
    family: str
    params: dict[str, Any]
    seed: int | list[int]
    certificate: str | None = Field(None, description="rational lower bound on the farness")


# Query logs


class LogLine(BaseModel):
    """One JSON-lines event; ``tag`` is the value of its ``"t"`` field."""

    tag: ClassVar[str]

    def to_event(self) -> Event:  # pragma: no cover - interface definition
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps({"t": self.tag, **self.model_dump(exclude_defaults=True)})

    @classmethod
    def from_event(cls, event: Event) -> LogLine:
        match event:
            case Query(i=i, j=j, answer=answer, cursor=cursor):
                return QueryLine(i=i, j=j, a=answer, c=cursor)
            case Forget(i=i):
                return ForgetLine(i=i)
            case Plan(queries=queries):
                return PlanLine(qs=[[i, j] for i, j in queries])
            case Seal(i=i):
                return SealLine(i=i)
            case Decide(accept=accept):
                return DecideLine(v="accept" if accept else "reject")
        raise LogParseError(f"no log line for event {event!r}")

    @classmethod
    def from_string(cls, line: str) -> LogLine:
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(f"malformed log line: {line!r}") from exc
        if not isinstance(payload, dict) or "t" not in payload:
            raise LogParseError(f"log line lacks an event tag: {line!r}")
        factory = LOG_LINE_REGISTRY.get(payload.pop("t"))
        if factory is None:
            raise LogParseError(f"unsupported event tag in {line!r}")
        try:
            return factory.model_validate(payload)
        except ValidationError as exc:
            raise LogParseError(f"invalid {factory.tag!r} event: {line!r}") from exc


class QueryLine(LogLine):
    tag: ClassVar[str] = "q"

    i: int = Field(..., ge=1)
    j: int = Field(..., ge=1)
    a: int = Field(..., ge=0, description="symbol read")
    c: bool = Field(False, description="issued through a per-sample cursor")

    def to_event(self) -> Query:
        return Query(self.i, self.j, self.a, self.c)


class ForgetLine(LogLine):
    tag: ClassVar[str] = "f"

    i: int = Field(..., ge=1)

    def to_event(self) -> Forget:
        return Forget(self.i)


class PlanLine(LogLine):
    tag: ClassVar[str] = "p"

    qs: list[tuple[int, int]]

    def to_event(self) -> Plan:
        return Plan(tuple((i, j) for i, j in self.qs))


class SealLine(LogLine):
    tag: ClassVar[str] = "s"

    i: int = Field(..., ge=1)

    def to_event(self) -> Seal:
        return Seal(self.i)


class DecideLine(LogLine):
    tag: ClassVar[str] = "d"

    v: Literal["accept", "reject"]

    def to_event(self) -> Decide:
        return Decide(self.v == "accept")


LOG_LINE_REGISTRY: dict[str, Type[LogLine]] = {
    QueryLine.tag: QueryLine,
    ForgetLine.tag: ForgetLine,
    PlanLine.tag: PlanLine,
    SealLine.tag: SealLine,
    DecideLine.tag: DecideLine,
}


def parse_log_line(line: str) -> Event:
    return LogLine.from_string(line).to_event()


def log_to_lines(log: QueryLog | Iterable[Event]) -> list[str]:
    return [LogLine.from_event(event).to_json() for event in log]


def log_from_lines(lines: Iterable[str]) -> QueryLog:
    log = QueryLog()
    for line in lines:
        if line.strip():
            log.append(parse_log_line(line))
    return log


def write_log(log: QueryLog, path: Path | str) -> Path:
    path = Path(path)
    path.write_text("".join(line + "\n" for line in log_to_lines(log)), encoding="utf-8")
    return path


def read_log(path: Path | str) -> QueryLog:
    return log_from_lines(Path(path).read_text(encoding="utf-8").splitlines())


# Verdicts, reports and experiment configs


class VerdictRecord(BaseModel):
    tester: str
    epsilon: str
    params: dict[str, int] = Field(default_factory=dict)
    seed: int | list[int]
    accept: bool
    queries: int
    samples_touched: int

    @classmethod
    def from_verdict(
        cls, verdict: Verdict, *, tester: str, epsilon: Fraction, params: dict[str, int], seed: Any
    ) -> VerdictRecord:
        return cls(
            tester=tester,
            epsilon=str(epsilon),
            params=dict(params),
            seed=seed,
            accept=verdict.accept,
            queries=verdict.queries,
            samples_touched=verdict.samples_touched,
        )


class ReportRow(BaseModel):
    """One line of an experiment report."""

    tester: str
    model: str
    family: str
    params: dict[str, Any]
    epsilon: str
    certificate: str | None = None
    trials: int
    accept_rate: float
    ci_low: float
    ci_high: float
    mean_queries: float
    mean_samples: float
    rejects: int
    violations: int = Field(0, description="online model violations; must be 0")
    audit_model: str
    audit_failures: int = Field(0, description="trial logs rejected by the audit model")

    def flat(self) -> dict[str, Any]:
        row = self.model_dump()
        row["params"] = json.dumps(row["params"], sort_keys=True)
        return row


def _listify(value: Any) -> list[Any]:
    return value if isinstance(value, list) else [value]


class ExperimentConfig(BaseModel):
    tester: str | list[str]
    model: str | None = Field(None, description="audit model; defaults to each tester's own")
    family: str | list[str]
    params: dict[str, Any] | list[dict[str, Any]] = Field(default_factory=dict)
    epsilon: str | list[str]
    trials: int = Field(..., ge=1)
    seed: int = Field(0, ge=0)
    out: Path = Path("results")
    workers: int = Field(1, ge=1)

    @field_validator("tester")
    @classmethod
    def _known_testers(cls, value: str | list[str]) -> str | list[str]:
        from .testers import TESTERS

        unknown = [name for name in _listify(value) if name not in TESTERS]
        if unknown:
            raise ValueError(f"unknown testers {unknown}; expected names from {sorted(TESTERS)}")
        return value

    @field_validator("family")
    @classmethod
    def _known_families(cls, value: str | list[str]) -> str | list[str]:
        from .lab import Family

        known = {family.value for family in Family}
        unknown = [name for name in _listify(value) if name not in known]
        if unknown:
            raise ValueError(f"unknown families {unknown}; expected names from {sorted(known)}")
        return value

    @field_validator("model")
    @classmethod
    def _parse_model(cls, value: str | None) -> str | None:
        if value is not None:
            ModelSpec.parse(value)
        return value

    @field_validator("epsilon")
    @classmethod
    def _rational_epsilon(cls, value: str | list[str]) -> str | list[str]:
        for text in _listify(value):
            if not 0 < parse_fraction(text) < 1:
                raise ValueError(f"epsilon must lie in (0, 1), got {text}")
        return value

    @property
    def testers(self) -> list[str]:
        return _listify(self.tester)

    @property
    def families(self) -> list[str]:
        return _listify(self.family)

    @property
    def param_sets(self) -> list[dict[str, Any]]:
        return _listify(self.params)

    @property
    def epsilons(self) -> list[Fraction]:
        return [parse_fraction(text) for text in _listify(self.epsilon)]


__all__ = [
    "CertificateRecord",
    "CodeDescriptor",
    "DecideLine",
    "DistFile",
    "ExperimentConfig",
    "ForgetLine",
    "LOG_LINE_REGISTRY",
    "LogLine",
    "LogParseError",
    "PlanLine",
    "QueryLine",
    "ReportRow",
    "SealLine",
    "SupportEntry",
    "VerdictRecord",
    "dist_from_file",
    "dist_to_file",
    "log_from_lines",
    "log_to_lines",
    "parse_fraction",
    "parse_log_line",
    "read_log",
    "write_log",
]
