"""Finite distributions over strings and the constructions built from them."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb
from typing import Callable, Iterable, Iterator, Literal, Mapping, Sequence

import numpy as np

from .bitcore import (
    BitString,
    ShapeMismatch,
    SymString,
    SystematicCode,
    colex_rank,
    colex_unrank,
    ordinal,
    vectorize,
    verify_code_distance,
    word,
)

Weight = int | Fraction | str
_DRAW_BITS = 64


class DistError(ValueError):
    """Raised when a distribution cannot be formed from its inputs."""


def _fraction(weight: Weight) -> Fraction:
    value = Fraction(weight)
    if value <= 0:
        raise DistError(f"weights must be positive, got {weight}")
    return value


@dataclass(frozen=True, eq=False)
class Dist:
    """A distribution with exact rational probabilities over equal-length strings."""

    n: int
    alphabet_size: int
    support: tuple[tuple[SymString, Fraction], ...]

    def __post_init__(self) -> None:
        if not self.support:
            raise DistError("a distribution needs a nonempty support")
        seen: set[SymString] = set()
        total = Fraction(0)
        for x, p in self.support:
            if len(x) != self.n or x.alphabet_size != self.alphabet_size:
                raise ShapeMismatch(
                    f"support string {x} does not fit n={self.n}, c={self.alphabet_size}"
                )
            if x in seen:
                raise DistError(f"duplicate support string {x}")
            if p <= 0:
                raise DistError(f"probability of {x} must be positive, got {p}")
            seen.add(x)
            total += p
        if total != 1:
            raise DistError(f"probabilities sum to {total}, not 1")

    def __iter__(self) -> Iterator[tuple[SymString, Fraction]]:
        return iter(self.support)

    def __len__(self) -> int:
        return len(self.support)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dist):
            return NotImplemented
        return (
            self.n == other.n
            and self.alphabet_size == other.alphabet_size
            and self.as_dict() == other.as_dict()
        )

    def __hash__(self) -> int:
        return hash((self.n, self.alphabet_size, frozenset(self.support)))

    @property
    def strings(self) -> list[SymString]:
        return [x for x, _ in self.support]

    def prob(self, x: SymString) -> Fraction:
        return self.as_dict().get(x, Fraction(0))

    def as_dict(self) -> dict[SymString, Fraction]:
        return self._table

    @cached_property
    def _table(self) -> dict[SymString, Fraction]:
        return dict(self.support)

    @cached_property
    def _cuts(self) -> list[int]:
        cuts: list[int] = []
        cumulative = Fraction(0)
        for _, p in self.support:
            cumulative += p
            cuts.append((cumulative.numerator << _DRAW_BITS) // cumulative.denominator)
        return cuts

    def is_deterministic(self) -> bool:
        return len(self.support) == 1


def dist_from_weighted_support(
    entries: Iterable[tuple[SymString | str, Weight]], alphabet_size: int | None = None
) -> Dist:
    """Normalize weighted entries into a Dist, merging repeated strings."""

    merged: dict[SymString, Fraction] = {}
    for raw, weight in entries:
        if isinstance(raw, str):
            x = SymString.from_text(raw, alphabet_size or 2)
        else:
            x = raw
        merged[x] = merged.get(x, Fraction(0)) + _fraction(weight)
    if not merged:
        raise DistError("cannot build a distribution from no entries")
    total = sum(merged.values(), Fraction(0))
    first = next(iter(merged))
    return Dist(
        n=len(first),
        alphabet_size=first.alphabet_size,
        support=tuple((x, weight / total) for x, weight in merged.items()),
    )


def point(x: SymString) -> Dist:
    return Dist(n=len(x), alphabet_size=x.alphabet_size, support=((x, Fraction(1)),))


def uniform(strings: Iterable[SymString]) -> Dist:
    return dist_from_weighted_support((x, 1) for x in strings)


def draw(dist: Dist, rng: np.random.Generator) -> SymString:
    """One independent sample, using a 64-bit uniform draw against rational cut points."""

    u = int(rng.integers(0, 1 << _DRAW_BITS, dtype=np.uint64))
    return dist.support[bisect_right(dist._cuts, u)][0]


def sample_map(f: Callable[[SymString], SymString], P: Dist) -> Dist:
    """Pushforward of ``P`` through ``f``; colliding images add up."""

    images = [(f(x), p) for x, p in P]
    lengths = {len(y) for y, _ in images}
    alphabets = {y.alphabet_size for y, _ in images}
    if len(lengths) != 1 or len(alphabets) != 1:
        raise DistError("sample map produced strings of inconsistent shape")
    return dist_from_weighted_support(images)


def restrict(P: Dist, predicate: Callable[[SymString], bool]) -> Dist:
    """Condition ``P`` on the event ``predicate``."""

    kept = [(x, p) for x, p in P if predicate(x)]
    if not kept:
        raise DistError("conditioning on an event of probability zero")
    return dist_from_weighted_support(kept)


@lru_cache(maxsize=None)
def _encoding_ok(code: SystematicCode) -> bool:
    return verify_code_distance(code) >= Fraction(1, 3)


def encode_binary(P: Dist, code: SystematicCode) -> Dist:
    """Replace every symbol ``s`` by the codeword of key ``s + 1``."""

    if code.m != P.alphabet_size:
        raise DistError(
            f"code has {code.m} codewords but the alphabet has {P.alphabet_size} symbols"
        )
    if not _encoding_ok(code):
        raise DistError("encoding code must have distance at least 1/3")

    def encode(x: SymString) -> SymString:
        bits: list[int] = []
        for symbol in x:
            bits.extend(code.codewords[symbol].bits)
        return BitString(tuple(bits))

    return Dist(
        n=P.n * code.n,
        alphabet_size=2,
        support=tuple((encode(x), p) for x, p in P),
    )


def p_uv(u: SymString, v: SymString) -> Dist:
    if len(u) != len(v) or u.alphabet_size != v.alphabet_size:
        raise ShapeMismatch("p_uv needs two strings of the same shape")
    return point(u) if u == v else uniform([u, v])


FnKind = Literal["endo", "square", "kset"]


@dataclass(frozen=True)
class FnTable:
    """A total function stored as a dense table.

    ``endo`` maps ``[n] -> [n]`` (1-based images), ``square`` maps ``S^2 -> {0,1}``
    row-major, and ``kset`` maps each k-subset of ``S`` (indexed by colex rank) to
    a k-bit tuple.
    """

    kind: FnKind
    size: int
    values: tuple
    k: int = field(default=0)

    def __post_init__(self) -> None:
        if self.kind == "endo":
            if len(self.values) != self.size:
                raise DistError("endo table must list one image per point")
            if any(not 1 <= v <= self.size for v in self.values):
                raise DistError("endo images must lie in 1..n")
        elif self.kind == "square":
            if len(self.values) != self.size * self.size:
                raise DistError("square table must have m*m entries")
            if any(v not in (0, 1) for v in self.values):
                raise DistError("square table entries are bits")
        elif self.kind == "kset":
            if len(self.values) != comb(self.size, self.k):
                raise DistError("kset table must list one value per k-subset")
            for value in self.values:
                if len(value) != self.k or any(bit not in (0, 1) for bit in value):
                    raise DistError("kset values are k-bit tuples")
        else:
            raise DistError(f"unknown function kind {self.kind!r}")

    @classmethod
    def endo(cls, images: Sequence[int]) -> FnTable:
        return cls(kind="endo", size=len(images), values=tuple(int(v) for v in images))

    @classmethod
    def square(cls, rows: Sequence[Sequence[int]]) -> FnTable:
        m = len(rows)
        return cls(
            kind="square",
            size=m,
            values=tuple(int(rows[a][b]) for a in range(m) for b in range(m)),
        )

    @classmethod
    def kset(
        cls, m: int, k: int, rule: Mapping[tuple[int, ...], Sequence[int]] | Callable
    ) -> FnTable:
        """Tabulate a rule over the k-subsets of ``1..m`` (sorted 1-based tuples)."""

        lookup = rule.__getitem__ if isinstance(rule, Mapping) else rule
        table = []
        for rank in range(comb(m, k)):
            A = tuple(element + 1 for element in colex_unrank(rank, k))
            table.append(tuple(int(bit) for bit in lookup(A)))
        return cls(kind="kset", size=m, values=tuple(table), k=k)

    def __call__(self, *args):
        if self.kind == "endo":
            (i,) = args
            return self.values[i - 1]
        if self.kind == "square":
            a, b = args
            return self.values[(a - 1) * self.size + (b - 1)]
        (A,) = args
        return self.values[colex_rank([element - 1 for element in A])]

    def sets(self) -> Iterator[tuple[int, ...]]:
        """k-subsets of the domain as sorted 1-based tuples, in colex order."""

        for rank in range(comb(self.size, self.k)):
            yield tuple(element + 1 for element in colex_unrank(rank, self.k))

    def is_permutation(self) -> bool:
        return self.kind == "endo" and sorted(self.values) == list(range(1, self.size + 1))

    def inverse(self) -> FnTable:
        if not self.is_permutation():
            raise DistError("only permutations have inverses")
        images = [0] * self.size
        for i, v in enumerate(self.values, start=1):
            images[v - 1] = i
        return FnTable.endo(images)

    def as_string(self) -> SymString:
        """The function as a length-n string over ``[n]`` (symbol = image - 1)."""
        if self.kind != "endo":
            raise DistError("only endo tables have a string form")
        return word((v - 1 for v in self.values), self.size)

    @classmethod
    def from_string(cls, x: SymString) -> FnTable:
        if x.alphabet_size != len(x):
            raise DistError("an [n]->[n] function is a length-n string over [n]")
        return cls.endo([symbol + 1 for symbol in x])


def compose(outer: FnTable, inner: FnTable) -> FnTable:
    """``i -> outer(inner(i))``."""

    if outer.kind != "endo" or inner.kind != "endo" or outer.size != inner.size:
        raise DistError("composition needs two endo tables on the same domain")
    return FnTable.endo([outer(inner(i)) for i in range(1, inner.size + 1)])


def identity(n: int) -> FnTable:
    return FnTable.endo(list(range(1, n + 1)))


def phi(x: SymString, b: int, m: int) -> int:
    """The data bit of a Sym-layout string for key ``b``."""
    return x[m + b - 1]


def u_f_sym(f: FnTable, code: SystematicCode) -> Dist:
    """Uniform over ``C(a) || <f(a, b) | b in S>`` for every key ``a``."""

    if f.kind != "square":
        raise DistError("u_f_sym needs a function on S^2")
    m = f.size
    if code.m != m or code.n != m:
        raise ShapeMismatch(f"u_f_sym needs a code [m] -> {{0,1}}^m with m={m}")
    keys = range(1, m + 1)
    return uniform(
        code.codeword(a) + BitString(vectorize(lambda b, a=a: f(a, b), keys)) for a in keys
    )


def par_subset(a: int, rank: int, k: int, m: int) -> tuple[int, ...]:
    """The (k-1)-subset of ``S - {a}`` sitting at data position ``rank`` of key ``a``."""

    relabelled = colex_unrank(rank, k - 1)
    return tuple(e + 1 if e < a - 1 else e + 2 for e in relabelled)


def par_data_index(a: int, B: Iterable[int]) -> int:
    """Colex rank of ``B`` among the (k-1)-subsets of ``S - {a}``."""
    return colex_rank([b - 1 if b < a else b - 2 for b in B])


def par_length(k: int, m: int) -> int:
    return comb(m - 1, k - 1)


def u_f_par(k: int, f: FnTable, code: SystematicCode) -> Dist:
    """Uniform over ``C(a) || <f(B+a)_ord(a, B+a) | B>`` with ``B`` in colex order."""

    if f.kind != "kset" or f.k != k:
        raise DistError(f"u_f_par needs a function on the {k}-subsets")
    m = f.size
    if m <= k:
        raise DistError(f"u_f_par needs m > k, got m={m}, k={k}")
    n = par_length(k, m)
    if code.m != m or code.n != n:
        raise ShapeMismatch(f"u_f_par needs a code [m] -> {{0,1}}^{n}")

    def member(a: int) -> SymString:
        data = []
        for rank in range(n):
            A = tuple(sorted(par_subset(a, rank, k, m) + (a,)))
            data.append(f(A)[ordinal(a, A) - 1])
        return code.codeword(a) + BitString(tuple(data))

    return uniform(member(a) for a in range(1, m + 1))


def k_subsets(elements: Iterable[int], k: int) -> Iterator[tuple[int, ...]]:
    return combinations(sorted(elements), k)


__all__ = [
    "Dist",
    "DistError",
    "FnTable",
    "compose",
    "dist_from_weighted_support",
    "draw",
    "encode_binary",
    "identity",
    "k_subsets",
    "p_uv",
    "par_data_index",
    "par_length",
    "par_subset",
    "phi",
    "point",
    "restrict",
    "sample_map",
    "u_f_par",
    "u_f_sym",
    "uniform",
]
