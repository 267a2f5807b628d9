"""Hard-instance generators, soundness analysis quantities and inequality checks."""

from __future__ import annotations

import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations, product
from math import ceil, comb, factorial
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .access import SeedLike
from .bitcore import (
    BitString,
    ShapeMismatch,
    SymString,
    SystematicCode,
    cpal_pairing,
    hamming,
    key_of,
    make_systematic_code,
    ordinal,
    prefix_length,
    word,
)
from .dists import (
    Dist,
    FnTable,
    draw,
    encode_binary,
    p_uv,
    par_data_index,
    phi,
    point,
    restrict,
    sample_map,
    u_f_par,
    u_f_sym,
)
from .metrics import (
    GuardExceeded,
    dist_f_to_par_k,
    dist_f_to_sym,
    dist_to_all_zero,
    dist_to_cpal,
    emd,
    inv_farness_certificate,
    is_inv,
    is_par,
    is_sym,
)
from .testers import as_epsilon, par_code, par_keys, sym_code

logger = logging.getLogger(__name__)

INV_FIDELITY_MIN_N = 61
PAR_EXACT_LIMIT = 200_000
PAR_ESTIMATE_DRAWS = 20_000


class BoundViolation(AssertionError):
    """Raised when a repair map breaks the inequality it is supposed to satisfy."""


class Family(str, Enum):
    INV_YES = "InvYes"
    INV_NO = "InvNo"
    SYM_YES = "SymYes"
    SYM_NO = "SymNo"
    PAR_YES = "ParYes"
    PAR_NO = "ParNo"

    @property
    def is_yes(self) -> bool:
        return self.value.endswith("Yes")


@dataclass(frozen=True)
class HardInstance:
    family: Family
    params: dict[str, Any]
    dist: Dist
    functions: tuple[FnTable, ...]
    certificate: Fraction | None = None
    code: SystematicCode | None = None


def _rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed if isinstance(seed, int) else list(seed))


def _as_family(family: Family | str) -> Family:
    try:
        return Family(family)
    except ValueError as exc:
        raise ValueError(f"unknown family {family!r}") from exc


def gen_inv(family: Family | str, n: int, seed: SeedLike = 0, *, encoded: bool = False) -> HardInstance:
    """``uniform{f, f^-1}`` for InvYes, ``uniform{f, g}`` with independent ``g`` for InvNo."""

    family = _as_family(family)
    if family not in (Family.INV_YES, Family.INV_NO):
        raise ValueError(f"gen_inv builds Inv families, got {family.value}")
    if n < 2:
        raise ValueError(f"need n >= 2, got n={n}")
    if n < INV_FIDELITY_MIN_N:
        warnings.warn(
            f"n={n} is below {INV_FIDELITY_MIN_N}; the 1/5 farness estimate assumes larger n",
            UserWarning,
            stacklevel=2,
        )
    rng = _rng(seed)
    f = FnTable.endo([int(v) + 1 for v in rng.permutation(n)])
    if family is Family.INV_YES:
        g = f.inverse()
        certificate = None
    else:
        g = FnTable.endo([int(v) + 1 for v in rng.permutation(n)])
        certificate = inv_farness_certificate(f, g)
    dist = p_uv(f.as_string(), g.as_string())
    if family is Family.INV_YES and not is_inv(dist):
        raise AssertionError("InvYes payload left Inv")

    code = None
    if encoded:
        code = make_systematic_code(n, n, relaxed=n < 10)
        dist = encode_binary(dist, code)
        if certificate is not None:
            certificate /= 3
    return HardInstance(family, {"n": n, "encoded": encoded}, dist, (f, g), certificate, code)


def random_square(m: int, rng: np.random.Generator, *, symmetric: bool) -> FnTable:
    """A uniform symmetric table, or a uniform anti-symmetric one (diagonal left free)."""

    rows = [[0] * m for _ in range(m)]
    for a in range(m):
        rows[a][a] = int(rng.integers(0, 2))
        for b in range(a + 1, m):
            bit = int(rng.integers(0, 2))
            rows[a][b] = bit
            rows[b][a] = bit if symmetric else 1 - bit
    return FnTable.square(rows)


def random_kset(m: int, k: int, rng: np.random.Generator, *, odd: bool) -> FnTable:
    """Uniform k-bit values of fixed parity: k-1 free bits, the last one completes the parity."""

    def value(A: tuple[int, ...]) -> tuple[int, ...]:
        free = tuple(int(b) for b in rng.integers(0, 2, size=k - 1))
        return free + ((sum(free) + int(odd)) % 2,)

    return FnTable.kset(m, k, value)


def gen_sym(family: Family | str, m: int, seed: SeedLike = 0) -> HardInstance:
    family = _as_family(family)
    if family not in (Family.SYM_YES, Family.SYM_NO):
        raise ValueError(f"gen_sym builds Sym families, got {family.value}")
    if m < 10:
        raise ValueError(f"Sym instances need m >= 10, got m={m}")
    code = sym_code(m)
    f = random_square(m, _rng(seed), symmetric=family is Family.SYM_YES)
    dist = u_f_sym(f, code)
    if family is Family.SYM_YES:
        if not is_sym(dist, code):
            raise AssertionError("SymYes payload left Sym")
        certificate = None
    else:
        certificate = dist_f_to_sym(f) / 6
    return HardInstance(family, {"m": m}, dist, (f,), certificate, code)


def gen_par(family: Family | str, k: int, m: int, seed: SeedLike = 0) -> HardInstance:
    family = _as_family(family)
    if family not in (Family.PAR_YES, Family.PAR_NO):
        raise ValueError(f"gen_par builds Par families, got {family.value}")
    if k < 2 or m <= 2 * k * k:
        raise ValueError(f"Par_k instances need k >= 2 and m > 2k^2, got k={k}, m={m}")
    code = par_code(k, m)
    f = random_kset(m, k, _rng(seed), odd=family is Family.PAR_NO)
    dist = u_f_par(k, f, code)
    if family is Family.PAR_YES:
        if not is_par(dist, code, k):
            raise AssertionError("ParYes payload left Par_k")
        certificate = None
    else:
        certificate = dist_f_to_par_k(f) / 6
    return HardInstance(family, {"k": k, "m": m}, dist, (f,), certificate, code)


def _palindrome(length: int, alphabet: tuple[int, int], rng: np.random.Generator) -> list[int]:
    half = [alphabet[int(b)] for b in rng.integers(0, 2, size=(length + 1) // 2)]
    return half + half[: length // 2][::-1]


def gen_cpal(length: int, seed: SeedLike = 0, *, member: bool = True) -> tuple[Dist, Fraction]:
    """A point mass on an encoded {0,1,2,3} string and its exact distance from cpal.

    Members split at a uniform boundary into two palindromes; non-members are uniform strings.
    """

    if length < 1:
        raise ValueError(f"need a positive length, got {length}")
    rng = _rng(seed)
    if member:
        t = int(rng.integers(0, length + 1))
        symbols = _palindrome(t, (0, 1), rng) + _palindrome(length - t, (2, 3), rng)
    else:
        symbols = [int(v) for v in rng.integers(0, 4, size=length)]
    x = word(symbols, 4)
    return encode_binary(point(x), cpal_pairing()), dist_to_cpal(x)


def generate(family: Family | str, params: Mapping[str, Any], seed: SeedLike = 0) -> HardInstance:
    """Dispatch to the generator of ``family`` with keyword ``params``."""

    family = _as_family(family)
    if family in (Family.INV_YES, Family.INV_NO):
        return gen_inv(family, int(params["n"]), seed, encoded=bool(params.get("encoded", False)))
    if family in (Family.SYM_YES, Family.SYM_NO):
        return gen_sym(family, int(params["m"]), seed)
    return gen_par(family, int(params["k"]), int(params["m"]), seed)


@dataclass
class AnalysisReport:
    """Exact soundness quantities of a Sym or Par_k input.

    ``zeroness`` holds ``p_{a,b}`` (Sym) or ``p_{A,a}`` (Par_k); ``costs`` maps each
    pair or set to its specific fixing costs and ``fixing`` to their minimum.
    """

    k: int
    m: int
    n: int
    key_mass: dict[int, Fraction]
    K: Fraction
    I: Fraction
    zeroness: dict[tuple, Fraction] = field(default_factory=dict)
    costs: dict[tuple, dict[Any, Fraction]] = field(default_factory=dict)
    fixing: dict[tuple, Fraction] = field(default_factory=dict)
    exact: bool = True
    interval: tuple[float, float] | None = None


@dataclass
class Repair:
    """A repaired distribution with its exact distance from the input.

    ``cost`` is the transport cost of the repair map itself, never below ``distance``.
    """

    image: Dist
    distance: Fraction
    cost: Fraction
    bound: Fraction
    pruned: Dist
    kept: frozenset[int]
    report: AnalysisReport


def _binary_layout(P: Dist) -> int:
    if P.alphabet_size != 2 or P.n % 2:
        raise ShapeMismatch("expected a distribution over binary strings of even length")
    return P.n // 2


def _keyed(P: Dist, m: int) -> list[tuple[SymString, Fraction, int]]:
    return [(x, p, key_of(x, m)) for x, p in P]


def _key_invalidity(keyed, code: SystematicCode) -> tuple[dict[int, Fraction], Fraction]:
    mass: dict[int, Fraction] = defaultdict(Fraction)
    K = Fraction(0)
    for x, p, a in keyed:
        mass[a] += p
        K += p * hamming(x.slice(0, code.n), code.codeword(a))
    return dict(mass), K


def analyze_sym(P: Dist, code: SystematicCode | None = None) -> AnalysisReport:
    m = _binary_layout(P)
    code = code or sym_code(m)
    keyed = _keyed(P, m)
    mass, K = _key_invalidity(keyed, code)
    I = sum(
        (px * py for x, px, a in keyed for y, py, b in keyed if phi(x, b, m) != phi(y, a, m)),
        Fraction(0),
    )
    keys = sorted(mass)
    zeroness = {
        (a, b): sum((p for x, p, c in keyed if c == a and phi(x, b, m) == 0), Fraction(0)) / mass[a]
        for a in keys
        for b in keys
    }
    report = AnalysisReport(k=2, m=m, n=m, key_mass=mass, K=K, I=I, zeroness=zeroness)
    for a, b in ((a, b) for a in keys for b in keys if a <= b):
        p_ab, p_ba = zeroness[(a, b)], zeroness[(b, a)]
        zero_fix = ((1 - p_ab) * mass[a] + (1 - p_ba) * mass[b]) / (2 * m)
        one_fix = (p_ab * mass[a] + p_ba * mass[b]) / (2 * m)
        report.costs[(a, b)] = {0: zero_fix, 1: one_fix}
        report.fixing[(a, b)] = min(zero_fix, one_fix)
    logger.debug("analyze_sym: m=%d K=%s I=%s", m, K, I)
    return report


def _check_delta(delta: Fraction | str | float) -> Fraction:
    delta = Fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return delta


def _transport_cost(P: Dist, h) -> Fraction:
    return sum((p * hamming(x, h(x)) for x, p in P), Fraction(0))


def repair_sym(P: Dist, delta: Fraction | str, code: SystematicCode | None = None) -> Repair:
    """Apply the majority repair over frequent keys and check its cost bound."""

    delta = _check_delta(delta)
    report = analyze_sym(P, code)
    m = report.m
    code = code or sym_code(m)
    kept = frozenset(a for a, w in report.key_mass.items() if w >= delta / m)
    value = {
        pair: int(costs[1] <= costs[0])
        for pair, costs in report.costs.items()
        if pair[0] in kept and pair[1] in kept
    }

    def h(x: SymString) -> SymString:
        a = key_of(x, m)
        data = list(x.symbols[m:])
        if a in kept:
            for b in kept:
                data[b - 1] = value[(min(a, b), max(a, b))]
        return code.codeword(a) + BitString(tuple(data))

    image = sample_map(h, P)
    cost = _transport_cost(P, h)
    distance, _ = emd(P, image)
    bound = report.K / 2 + report.I / delta
    pruned = restrict(image, lambda z: key_of(z, m) in kept)
    if distance > bound:
        raise BoundViolation(f"Sym repair distance {distance} exceeds K/2 + I/delta = {bound}")
    if not is_sym(pruned, code):
        raise BoundViolation("pruned Sym repair is not a Sym member")
    return Repair(image, distance, cost, bound, pruned, kept, report)


def _even_strings(k: int) -> list[tuple[int, ...]]:
    return [s for s in product((0, 1), repeat=k) if sum(s) % 2 == 0]


def _set_bit(x: SymString, a: int, A: Sequence[int], n: int) -> int:
    return x[n + par_data_index(a, [b for b in A if b != a])]


def _odd_tuple(xs, n: int, k: int) -> bool:
    keys = {a for _, _, a in xs}
    if len(keys) != k:
        return False
    A = sorted(keys)
    return sum(_set_bit(x, a, A, n) for x, _, a in xs) % 2 == 1


def analyze_par(
    P: Dist,
    k: int,
    code: SystematicCode | None = None,
    *,
    seed: SeedLike = 0,
    draws: int = PAR_ESTIMATE_DRAWS,
) -> AnalysisReport:
    """Exact ``K_k`` and fixing costs; ``I_k`` exact while ``|supp|^k`` stays under the guard."""

    n = _binary_layout(P)
    m = par_keys(k, n)
    code = code or par_code(k, m)
    keyed = _keyed(P, m)
    mass, K = _key_invalidity(keyed, code)
    report = AnalysisReport(k=k, m=m, n=n, key_mass=mass, K=K, I=Fraction(0))

    evens = _even_strings(k)
    for A in combinations(sorted(mass), k):
        ps = []
        for a in A:
            zero = sum((p for x, p, c in keyed if c == a and _set_bit(x, a, A, n) == 0), Fraction(0))
            report.zeroness[(A, a)] = zero / mass[a]
            ps.append(zero / mass[a])
        costs = {
            s: sum(
                ((s_i * p_i + (1 - s_i) * (1 - p_i)) * mass[a] for s_i, p_i, a in zip(s, ps, A)),
                Fraction(0),
            )
            / (2 * n)
            for s in evens
        }
        report.costs[A] = costs
        report.fixing[A] = min(costs.values())

    if len(keyed) ** k <= PAR_EXACT_LIMIT:
        total = Fraction(0)
        for xs in product(keyed, repeat=k):
            if _odd_tuple(xs, n, k):
                weight = Fraction(1)
                for _, p, _ in xs:
                    weight *= p
                total += weight
        report.I = total
    else:
        from .harness import wilson_interval

        logger.info("estimating I_k from %d draws: support^k exceeds %d", draws, PAR_EXACT_LIMIT)
        rng = _rng(seed)
        lookup = {x: (x, p, a) for x, p, a in keyed}
        hits = sum(
            _odd_tuple([lookup[draw(P, rng)] for _ in range(k)], n, k) for _ in range(draws)
        )
        report.I = Fraction(hits, draws)
        report.exact = False
        report.interval = wilson_interval(hits, draws)
    return report


def repair_par(
    P: Dist, delta: Fraction | str, k: int, code: SystematicCode | None = None
) -> Repair:
    """Apply the cheapest even-parity repair over frequent keys and check its cost bound."""

    delta = _check_delta(delta)
    report = analyze_par(P, k, code)
    if not report.exact:
        raise GuardExceeded("repair_par needs an exact parity-invalidity; the support is too large")
    m, n = report.m, report.n
    if m <= 2 * k * k:
        raise ValueError(f"the Par_k repair bound needs m > 2k^2, got m={m}, k={k}")
    code = code or par_code(k, m)
    kept = frozenset(a for a, w in report.key_mass.items() if w >= delta / m)
    value = {
        A: min(costs, key=costs.__getitem__)
        for A, costs in report.costs.items()
        if kept.issuperset(A)
    }

    def h(x: SymString) -> SymString:
        a = key_of(x, m)
        data = list(x.symbols[n:])
        if a in kept:
            for B in combinations(sorted(kept - {a}), k - 1):
                A = tuple(sorted(B + (a,)))
                data[par_data_index(a, B)] = value[A][ordinal(a, A) - 1]
        return code.codeword(a) + BitString(tuple(data))

    image = sample_map(h, P)
    cost = _transport_cost(P, h)
    distance, _ = emd(P, image)
    bound = report.K / 2 + 2 * delta ** (1 - k) * report.I
    pruned = restrict(image, lambda z: key_of(z, m) in kept)
    if distance > bound:
        raise BoundViolation(f"Par_{k} repair distance {distance} exceeds K/2 + 2 delta^(1-k) I = {bound}")
    if not is_par(pruned, code, k):
        raise BoundViolation(f"pruned Par_{k} repair is not a Par_{k} member")
    return Repair(image, distance, cost, bound, pruned, kept, report)


def sym_dichotomy(report: AnalysisReport, epsilon: Fraction | str) -> bool:
    """``K > eps/2`` or ``I > eps^2/8``: what every eps-far Sym input must satisfy."""

    epsilon = as_epsilon(epsilon)
    return report.K > epsilon / 2 or report.I > epsilon**2 / 8


def all_zero_accept_probability(P: Dist, epsilon: Fraction | str) -> Fraction:
    epsilon = as_epsilon(epsilon)
    return (1 - dist_to_all_zero(P)) ** ceil(1 / epsilon)


def parity_odd_probability(ps: Iterable[Fraction]) -> Fraction:
    odd = Fraction(0)
    for p in ps:
        odd = odd * (1 - p) + p * (1 - odd)
    return odd


def check_even_deviation(
    grid: Sequence[Fraction] | None = None, max_length: int = 4
) -> list[tuple[Fraction, ...]]:
    """Vectors over ``grid`` (values at most 1/2) violating ``max p <= Pr[odd] <= 1/2``."""

    grid = grid if grid is not None else [Fraction(i, 8) for i in range(5)]
    failures = []
    for length in range(1, max_length + 1):
        for ps in product(grid, repeat=length):
            odd = parity_odd_probability(ps)
            if not max(ps) <= odd <= Fraction(1, 2):
                failures.append(tuple(ps))
    return failures


def par_iteration_queries(k: int, m: int) -> int:
    return k * (prefix_length(m) + 2)


def check_par_query_bound(k: int, m: int) -> bool:
    """Per-iteration queries of the Par_k tester against ``7 log2 n``, compared as powers of two."""

    n = comb(m - 1, k - 1)
    return 2 ** par_iteration_queries(k, m) <= n**7


@dataclass(frozen=True)
class AppendixCase:
    bound: str
    values: dict[str, int]


@dataclass
class AppendixReport:
    checked: dict[str, int] = field(default_factory=dict)
    counterexamples: list[AppendixCase] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def record(self, bound: str, holds: bool, **values: int) -> None:
        self.checked[bound] = self.checked.get(bound, 0) + 1
        if not holds:
            self.counterexamples.append(AppendixCase(bound, values))


def exp_lower(x: Fraction, terms: int = 12) -> Fraction:
    """Taylor partial sum of ``e^x``; a lower bound for ``x >= 0``."""

    total, term = Fraction(0), Fraction(1)
    for i in range(terms):
        total += term
        term = term * x / (i + 1)
    return total


def check_appendix_bounds(
    ks: Iterable[int] = range(2, 7),
    m_max: int = 200,
    n_max: int = 40,
    a_values: Iterable[int] = (1, 2, 3),
) -> AppendixReport:
    """Sweep the four counting inequalities behind the Par_k analysis, conservatively."""

    report = AppendixReport()
    ks = list(ks)
    for a in a_values:
        e_inv_a = exp_lower(Fraction(1, a))
        for k in ks:
            for m in range(a * k * k + 1, m_max + 1):
                falling = factorial(m - 1) // factorial(m - k)
                report.record("falling-factorial", m ** (k - 1) < e_inv_a * falling, a=a, k=k, m=m)

    for k in ks:
        for m in range(2 * k * k + 1, m_max + 1):
            n = comb(m - 1, k - 1)
            c = prefix_length(m)
            report.record("key-length", 2 ** ((k - 1) * (c - 1)) <= n * k ** (k - 1), k=k, m=m)
            report.record("k-log-k", k**k <= n, k=k, m=m)

    for n in range(2, n_max + 1):
        for q in range(1, n):
            steps = 2 * q
            exp_bound = (1 + Fraction(q * q, n - q) / steps) ** steps
            for h in range(q + 1):
                report.record("tail-ratio", Fraction(n, n - q) ** h < exp_bound, n=n, q=q, h=h)
    logger.info("appendix sweep: %s", report.checked)
    return report


__all__ = [
    "AnalysisReport",
    "AppendixReport",
    "BoundViolation",
    "Family",
    "HardInstance",
    "Repair",
    "all_zero_accept_probability",
    "analyze_par",
    "analyze_sym",
    "check_appendix_bounds",
    "check_even_deviation",
    "check_par_query_bound",
    "gen_cpal",
    "gen_inv",
    "gen_par",
    "gen_sym",
    "generate",
    "parity_odd_probability",
    "repair_par",
    "repair_sym",
    "sym_dichotomy",
]
