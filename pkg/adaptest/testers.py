"""The one-sided testers, each bound to the adaptivity model it runs under."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, comb, log
from typing import Callable, Mapping

from .access import ModelSpec, SampleCursor, SeedLike, Session, Verdict, open_session
from .bitcore import SystematicCode, make_systematic_code, prefix_length
from .dists import Dist, FnTable, par_data_index

logger = logging.getLogger(__name__)

Params = Mapping[str, int]


def as_epsilon(value: Fraction | float | int | str) -> Fraction:
    epsilon = Fraction(value)
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {value}")
    return epsilon


def _positions(session: Session, count: int) -> list[int]:
    return [int(j) for j in session.coins.integers(1, session.n + 1, size=count)]


def _code(m: int, n: int) -> SystematicCode:
    return make_systematic_code(m, n, relaxed=m < 10 or n < m)


# AllZero and Determinism


def all_zero_samples(epsilon: Fraction) -> int:
    return ceil(1 / epsilon)


def test_all_zero(session: Session, epsilon: Fraction) -> Verdict:
    s = all_zero_samples(epsilon)
    plan = list(zip(range(1, s + 1), _positions(session, s)))
    session.plan(plan)
    for i, j in plan:
        if session.query(i, j) != 0:
            return session.decide(False)
    return session.decide(True)


def determinism_samples(epsilon: Fraction) -> int:
    return 1 + ceil(1 / epsilon)


def test_determinism(session: Session, epsilon: Fraction) -> Verdict:
    s = determinism_samples(epsilon)
    positions = _positions(session, s - 1)
    pairs = [((1, j), (i, j)) for i, j in zip(range(2, s + 1), positions)]
    session.plan(query for pair in pairs for query in pair)
    for first, other in pairs:
        if session.query(*first) != session.query(*other):
            return session.decide(False)
    return session.decide(True)


# Bounded support


def support_na_shape(epsilon: Fraction, m: int) -> tuple[int, int]:
    """``(s, t)``: samples drawn and positions read from each."""

    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    return 1 + ceil(8 * m / epsilon), ceil(4 * (log(m) + 2) / float(epsilon))


def test_support_na(session: Session, epsilon: Fraction, m: int) -> Verdict:
    s, t = support_na_shape(epsilon, m)
    J = _positions(session, t)
    session.plan((i, j) for i in range(1, s + 1) for j in J)
    seen: set[tuple[int, ...]] = set()
    for i in range(1, s + 1):
        seen.add(tuple(session.query(i, j) for j in J))
        if len(seen) > m:
            logger.debug("found %d distinct restrictions after %d samples", len(seen), i)
            return session.decide(False)
    return session.decide(True)


def support_adaptive_samples(epsilon: Fraction, m: int) -> int:
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    return 1 + ceil(2 * m / epsilon)


def test_support_strongmem(session: Session, epsilon: Fraction, m: int) -> Verdict:
    """Keep up to ``m`` representatives that ``J`` tells apart, re-reading them each round."""

    s = support_adaptive_samples(epsilon, m)
    positions = _positions(session, s)
    representatives: list[int] = []
    J: list[int] = []
    for k in range(1, s + 1):
        y_k = tuple(session.query(k, j) for j in J)
        restrictions = [tuple(session.query(z, j) for j in J) for z in representatives]
        j = positions[k - 1]
        x_j = session.query(k, j)
        match = next((z for z, y in zip(representatives, restrictions) if y == y_k), None)
        if match is None:
            representatives.append(k)
        elif session.query(match, j) != x_j:
            representatives.append(k)
            J.append(j)
        else:
            session.forget(k)
        if len(representatives) > m:
            return session.decide(False)
    return session.decide(True)


def test_support_forward(session: Session, epsilon: Fraction, m: int) -> Verdict:
    """The same search with every representative read ahead at all positions."""

    s = support_adaptive_samples(epsilon, m)
    positions = _positions(session, s)
    stored: list[dict[int, int]] = []
    A: list[int] = []

    def speculate(k: int) -> None:
        row: dict[int, int] = {}
        for j in positions:
            row[j] = session.query(k, j)
        stored.append(row)

    for k in range(1, s + 1):
        x = {j: session.query(k, j) for j in A}
        found = False
        for row in list(stored):
            if all(row[j] == x[j] for j in A):
                found = True
                j = positions[k - 1]
                if row[j] != session.query(k, j):
                    A.append(j)
                    speculate(k)
                break
        if not found:
            speculate(k)
        if len(stored) > m:
            return session.decide(False)
    return session.decide(True)


# Inv


def inv_samples(epsilon: Fraction) -> int:
    return 1 + ceil(3 / epsilon**2)


def inv_iteration_rejects(f: FnTable, g: FnTable, j: int, k: int) -> bool:
    return f(j) != g(j) and g(f(k)) != k


def test_inv_forward(session: Session, epsilon: Fraction) -> Verdict:
    """Samples are functions ``[n] -> [n]``; symbol ``v`` stands for the image ``v + 1``."""

    s = inv_samples(epsilon)
    js = _positions(session, s - 1)
    ks = _positions(session, s - 1)
    f_at_j = [session.query(1, j) + 1 for j in js]
    f_at_k = [session.query(1, k) + 1 for k in ks]
    for i in range(2, s + 1):
        j, k = js[i - 2], ks[i - 2]
        g_j = session.query(i, j) + 1
        g_f_k = session.query(i, f_at_k[i - 2]) + 1
        if f_at_j[i - 2] != g_j and g_f_k != k:
            return session.decide(False)
    return session.decide(True)


# Sym and Par_k


def sym_iterations(epsilon: Fraction) -> int:
    return ceil(8 / epsilon**2)


def sym_keys(n: int) -> int:
    if n % 2:
        raise ValueError(f"Sym strings have even length, got n={n}")
    return n // 2


def sym_code(m: int) -> SystematicCode:
    return _code(m, m)


def _read_key(session: Session, i: int, m: int) -> int:
    value = 0
    for j in range(1, prefix_length(m) + 1):
        value = (value << 1) | session.query(i, j)
    return value % m + 1


def test_sym_weak2(session: Session, epsilon: Fraction) -> Verdict:
    m = sym_keys(session.n)
    code = sym_code(m)
    for t in range(1, sym_iterations(epsilon) + 1):
        x, y = 2 * t - 1, 2 * t
        a = _read_key(session, x, m)
        b = _read_key(session, y, m)
        (i,) = [int(v) for v in session.coins.integers(1, m + 1, size=1)]
        x_i, y_i = session.query(x, i), session.query(y, i)
        phi_x, phi_y = session.query(x, m + b), session.query(y, m + a)
        if x_i != code.codeword(a)[i - 1] or y_i != code.codeword(b)[i - 1]:
            logger.debug("iteration %d rejects by key invalidity", t)
            return session.decide(False)
        if phi_x != phi_y:
            logger.debug("iteration %d rejects by asymmetry", t)
            return session.decide(False)
    return session.decide(True)


def par_iterations(epsilon: Fraction, k: int) -> int:
    return ceil(4 * k / epsilon**k)


def par_keys(k: int, n: int) -> int:
    """The ``m`` with ``binom(m - 1, k - 1) == n``."""

    if k < 2:
        raise ValueError(f"Par_k needs k >= 2, got k={k}")
    m = k + 1
    while comb(m - 1, k - 1) < n:
        m += 1
    if comb(m - 1, k - 1) != n:
        raise ValueError(f"no m has binom(m - 1, {k - 1}) = {n}")
    return m


def par_code(k: int, m: int) -> SystematicCode:
    return _code(m, comb(m - 1, k - 1))


def test_par_k(session: Session, epsilon: Fraction, k: int) -> Verdict:
    if session.n % 2:
        raise ValueError(f"Par_k strings have even length, got n={session.n}")
    n = session.n // 2
    m = par_keys(k, n)
    code = par_code(k, m)
    for t in range(par_iterations(epsilon, k)):
        samples = range(k * t + 1, k * t + k + 1)
        keys = []
        for x in samples:
            a = _read_key(session, x, m)
            (i,) = [int(v) for v in session.coins.integers(1, n + 1, size=1)]
            if session.query(x, i) != code.codeword(a)[i - 1]:
                return session.decide(False)
            keys.append(a)
        if len(set(keys)) == k:
            A = set(keys)
            parity = 0
            for x, a in zip(samples, keys):
                parity ^= session.query(x, n + 1 + par_data_index(a, sorted(A - {a})))
            if parity:
                logger.debug("iteration %d rejects by parity on %s", t + 1, sorted(A))
                return session.decide(False)
    return session.decide(True)


# CPal


def cpal_samples(epsilon: Fraction) -> int:
    return 1 + ceil(1 / epsilon)


def cpal_mirror_checks(epsilon: Fraction) -> int:
    return ceil(2 / epsilon)


def cpal_anchors(epsilon: Fraction) -> int:
    return ceil(2 / epsilon)


def _mirror(p: int, t: int, length: int) -> int:
    return t + 1 - p if p <= t else t + 1 + length - p


class _SymbolReader:
    """Reads two-bit cpal symbols through a cursor, reusing bits already seen."""

    def __init__(self, cursor: SampleCursor) -> None:
        self.cursor = cursor
        self.bits: dict[int, int] = {}

    def bit(self, j: int) -> int:
        if j not in self.bits:
            self.bits[j] = self.cursor.query(j)
        return self.bits[j]

    def high(self, p: int) -> int:
        return self.bit(2 * p - 1)

    def symbol(self, p: int) -> int:
        return 2 * self.high(p) + self.bit(2 * p)


def _cpal_scan(reader: _SymbolReader, length: int, pairs: list[int]) -> bool:
    lo, hi = 1, length + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if reader.high(mid):
            hi = mid
        else:
            lo = mid + 1
    t = lo - 1
    for p in pairs:
        q = _mirror(p, t, length)
        left = reader.symbol(p)
        if left != reader.symbol(q) or (left >= 2) != (p > t):
            return False
    return True


def test_cpal_local(session: Session, epsilon: Fraction) -> Verdict:
    """Split-palindrome check per cursor, plus shared anchor symbols that catch non-determinism.

    Every cursor reads the same ``cpal_anchors`` symbols, drawn before any cursor
    opens; the global decision rejects when two samples disagree on one of them.
    """

    if session.n % 2:
        raise ValueError("cpal samples are two-bit encodings of {0,1,2,3} strings")
    length = session.n // 2
    s = cpal_samples(epsilon)
    checks = cpal_mirror_checks(epsilon)
    anchors = [int(v) for v in session.coins.integers(1, length + 1, size=cpal_anchors(epsilon))]

    def local(cursor: SampleCursor) -> tuple[bool, tuple[int, ...]]:
        reader = _SymbolReader(cursor)
        pairs = [int(v) for v in cursor.coins.integers(1, length + 1, size=checks)]
        ok = _cpal_scan(reader, length, pairs)
        return ok, tuple(reader.symbol(p) for p in anchors)

    for i in range(1, s + 1):
        session.cursor(i, local)
    outcomes = session.results().values()
    consistent = len({seen for _, seen in outcomes}) == 1
    return session.decide(all(ok for ok, _ in outcomes) and consistent)


# Registry


@dataclass(frozen=True)
class TesterSpec:
    """A tester with its model and its closed-form sample and query budgets."""

    name: str
    model: Callable[[Params], ModelSpec]
    samples: Callable[[Fraction, Params], int]
    query_budget: Callable[[Fraction, Params, int], int]
    run: Callable[..., Verdict]
    params: tuple[str, ...] = ()

    def check_params(self, params: Params) -> dict[str, int]:
        missing = [name for name in self.params if name not in params]
        extra = [name for name in params if name not in self.params]
        if missing or extra:
            raise ValueError(
                f"{self.name} takes parameters {list(self.params)}, got {sorted(params)}"
            )
        return {name: int(params[name]) for name in self.params}


def _support_na_budget(epsilon: Fraction, params: Params, n: int) -> int:
    s, t = support_na_shape(epsilon, params["m"])
    return s * t


def _strongmem_budget(epsilon: Fraction, params: Params, n: int) -> int:
    m = params["m"]
    return support_adaptive_samples(epsilon, m) * (m * m + m + 2)


def _forward_budget(epsilon: Fraction, params: Params, n: int) -> int:
    m = params["m"]
    return 2 * (m + 1) * support_adaptive_samples(epsilon, m)


def _sym_budget(epsilon: Fraction, params: Params, n: int) -> int:
    return sym_iterations(epsilon) * (2 * prefix_length(sym_keys(n)) + 4)


def _par_budget(epsilon: Fraction, params: Params, n: int) -> int:
    k = params["k"]
    L = prefix_length(par_keys(k, n // 2))
    return par_iterations(epsilon, k) * k * (L + 2)


def cpal_cursor_budget(epsilon: Fraction, n: int) -> int:
    length = n // 2
    return length.bit_length() + 4 * cpal_mirror_checks(epsilon) + 2 * cpal_anchors(epsilon)


TESTERS: dict[str, TesterSpec] = {
    spec.name: spec
    for spec in (
        TesterSpec(
            "all_zero",
            lambda p: ModelSpec.non_adaptive(),
            lambda e, p: all_zero_samples(e),
            lambda e, p, n: all_zero_samples(e),
            test_all_zero,
        ),
        TesterSpec(
            "determinism",
            lambda p: ModelSpec.non_adaptive(),
            lambda e, p: determinism_samples(e),
            lambda e, p, n: 2 * (determinism_samples(e) - 1),
            test_determinism,
        ),
        TesterSpec(
            "support_na",
            lambda p: ModelSpec.non_adaptive(),
            lambda e, p: support_na_shape(e, p["m"])[0],
            _support_na_budget,
            test_support_na,
            ("m",),
        ),
        TesterSpec(
            "support_strongmem",
            lambda p: ModelSpec.strong(p["m"] + 1),
            lambda e, p: support_adaptive_samples(e, p["m"]),
            _strongmem_budget,
            test_support_strongmem,
            ("m",),
        ),
        TesterSpec(
            "support_forward",
            lambda p: ModelSpec.forward_only(),
            lambda e, p: support_adaptive_samples(e, p["m"]),
            _forward_budget,
            test_support_forward,
            ("m",),
        ),
        TesterSpec(
            "inv_forward",
            lambda p: ModelSpec.forward_only(),
            lambda e, p: inv_samples(e),
            lambda e, p, n: 4 * (inv_samples(e) - 1),
            test_inv_forward,
        ),
        TesterSpec(
            "sym_weak2",
            lambda p: ModelSpec.weak(2),
            lambda e, p: 2 * sym_iterations(e),
            _sym_budget,
            test_sym_weak2,
        ),
        TesterSpec(
            "par_k",
            lambda p: ModelSpec.weak(p["k"]),
            lambda e, p: p["k"] * par_iterations(e, p["k"]),
            _par_budget,
            test_par_k,
            ("k",),
        ),
        TesterSpec(
            "cpal_local",
            lambda p: ModelSpec.locally_bounded(),
            lambda e, p: cpal_samples(e),
            lambda e, p, n: cpal_samples(e) * cpal_cursor_budget(e, n),
            test_cpal_local,
        ),
    )
}


def get_tester(name: str) -> TesterSpec:
    try:
        return TESTERS[name]
    except KeyError as exc:
        raise KeyError(f"unknown tester {name!r}; expected one of {sorted(TESTERS)}") from exc


def open_tester_session(
    name: str, dist: Dist, epsilon: Fraction | str, params: Params | None = None, seed: SeedLike = 0
) -> tuple[TesterSpec, Session, dict[str, int]]:
    spec = get_tester(name)
    epsilon = as_epsilon(epsilon)
    checked = spec.check_params(params or {})
    session = open_session(dist, spec.samples(epsilon, checked), spec.model(checked), seed)
    return spec, session, checked


def run_tester(
    name: str,
    dist: Dist,
    epsilon: Fraction | str,
    params: Params | None = None,
    seed: SeedLike = 0,
) -> Verdict:
    """Open the session ``name`` needs over ``dist`` and run the tester once."""

    spec, session, checked = open_tester_session(name, dist, epsilon, params, seed)
    return spec.run(session, as_epsilon(epsilon), **checked)


__all__ = [
    "TESTERS",
    "TesterSpec",
    "as_epsilon",
    "cpal_cursor_budget",
    "cpal_anchors",
    "get_tester",
    "inv_iteration_rejects",
    "open_tester_session",
    "par_code",
    "par_keys",
    "run_tester",
    "support_na_shape",
    "sym_code",
    "test_all_zero",
    "test_cpal_local",
    "test_determinism",
    "test_inv_forward",
    "test_par_k",
    "test_support_forward",
    "test_support_na",
    "test_support_strongmem",
    "test_sym_weak2",
]
