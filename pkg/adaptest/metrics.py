"""Variation distance, exact earth mover's distance and distance-to-property oracles."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from itertools import permutations, product
from math import comb, lcm
from typing import Callable, Sequence

from .bitcore import (
    BitString,
    ShapeMismatch,
    SymString,
    SystematicCode,
    cpal_pairing,
    hamming,
    key_of,
    key_valid,
    make_systematic_code,
    word,
)
from .dists import (
    Dist,
    FnTable,
    compose,
    dist_from_weighted_support,
    identity,
    k_subsets,
    par_data_index,
    phi,
)

logger = logging.getLogger(__name__)

SUPPORT_GUARD = 12
SYM_EXACT_MAX_M = 3
SYM_EXACT_MAX_SUPPORT = 3
INV_EXACT_MAX_N = 5
SYM_BRUTE_MAX_M = 4


class GuardExceeded(ValueError):
    """Raised when an exact oracle would have to enumerate beyond its guard."""


def _check_shapes(P: Dist, Q: Dist) -> None:
    if P.n != Q.n or P.alphabet_size != Q.alphabet_size:
        raise ShapeMismatch(
            f"distributions differ in shape: ({P.n}, {P.alphabet_size}) vs ({Q.n}, {Q.alphabet_size})"
        )


def variation(P: Dist, Q: Dist) -> Fraction:
    _check_shapes(P, Q)
    p, q = P.as_dict(), Q.as_dict()
    return sum((abs(p.get(x, 0) - q.get(x, 0)) for x in p.keys() | q.keys()), Fraction(0)) / 2


@dataclass(frozen=True, slots=True)
class TransferPlan:
    """A coupling of two distributions, listed as ``(x, y, mass)`` triples."""

    entries: tuple[tuple[SymString, SymString, Fraction], ...]

    def cost(self) -> Fraction:
        return sum((mass * hamming(x, y) for x, y, mass in self.entries), Fraction(0))

    def marginals(self) -> tuple[dict[SymString, Fraction], dict[SymString, Fraction]]:
        rows: dict[SymString, Fraction] = defaultdict(Fraction)
        cols: dict[SymString, Fraction] = defaultdict(Fraction)
        for x, y, mass in self.entries:
            rows[x] += mass
            cols[y] += mass
        return dict(rows), dict(cols)

    def couples(self, P: Dist, Q: Dist) -> bool:
        rows, cols = self.marginals()
        return rows == P.as_dict() and cols == Q.as_dict()


class _Edge:
    __slots__ = ("to", "cap", "cost", "rev")

    def __init__(self, to: int, cap: Fraction | None, cost: int, rev: int) -> None:
        self.to = to
        self.cap = cap  # None is unbounded
        self.cost = cost
        self.rev = rev


class _FlowNetwork:
    """Residual graph for successive shortest paths with exact rational capacities."""

    def __init__(self, size: int) -> None:
        self.graph: list[list[_Edge]] = [[] for _ in range(size)]

    def add_edge(self, u: int, v: int, cap: Fraction | None, cost: int) -> _Edge:
        forward = _Edge(v, cap, cost, len(self.graph[v]))
        backward = _Edge(u, Fraction(0), -cost, len(self.graph[u]))
        self.graph[u].append(forward)
        self.graph[v].append(backward)
        return forward

    @staticmethod
    def _open(edge: _Edge) -> bool:
        return edge.cap is None or edge.cap > 0

    def _shortest_path(self, source: int) -> tuple[list[int | None], list[tuple[int, int] | None]]:
        # Bellman-Ford: residual reverse edges carry negative costs.
        dist: list[int | None] = [None] * len(self.graph)
        parent: list[tuple[int, int] | None] = [None] * len(self.graph)
        dist[source] = 0
        for _ in range(len(self.graph)):
            changed = False
            for u, edges in enumerate(self.graph):
                if dist[u] is None:
                    continue
                for index, edge in enumerate(edges):
                    if not self._open(edge):
                        continue
                    candidate = dist[u] + edge.cost
                    if dist[edge.to] is None or candidate < dist[edge.to]:
                        dist[edge.to] = candidate
                        parent[edge.to] = (u, index)
                        changed = True
            if not changed:
                break
        return dist, parent

    def min_cost_flow(self, source: int, sink: int, demand: Fraction) -> None:
        flow = Fraction(0)
        while flow < demand:
            dist, parent = self._shortest_path(source)
            if dist[sink] is None:
                raise RuntimeError("transportation network ran out of augmenting paths")
            push = demand - flow
            node = sink
            while node != source:
                u, index = parent[node]  # type: ignore[misc]
                edge = self.graph[u][index]
                if edge.cap is not None:
                    push = min(push, edge.cap)
                node = u
            node = sink
            while node != source:
                u, index = parent[node]  # type: ignore[misc]
                edge = self.graph[u][index]
                if edge.cap is not None:
                    edge.cap -= push
                reverse = self.graph[edge.to][edge.rev]
                if reverse.cap is not None:
                    reverse.cap += push
                node = u
            flow += push


def emd(P: Dist, Q: Dist) -> tuple[Fraction, TransferPlan]:
    """Exact earth mover's distance together with an optimal transfer plan."""

    _check_shapes(P, Q)
    xs, ys = P.support, Q.support
    source, sink = 0, len(xs) + len(ys) + 1
    network = _FlowNetwork(sink + 1)
    arcs: list[tuple[int, int, _Edge]] = []
    for i, (x, p) in enumerate(xs):
        network.add_edge(source, 1 + i, p, 0)
        for j, (y, _) in enumerate(ys):
            mismatches = sum(1 for a, b in zip(x.symbols, y.symbols) if a != b)
            edge = network.add_edge(1 + i, 1 + len(xs) + j, None, mismatches)
            arcs.append((i, j, edge))
    for j, (_, q) in enumerate(ys):
        network.add_edge(1 + len(xs) + j, sink, q, 0)
    network.min_cost_flow(source, sink, Fraction(1))

    entries = []
    for i, j, edge in arcs:
        reverse = network.graph[edge.to][edge.rev]
        mass = reverse.cap
        if mass:
            entries.append((xs[i][0], ys[j][0], mass))
    plan = TransferPlan(tuple(entries))
    return plan.cost(), plan


def dist_to_all_zero(P: Dist) -> Fraction:
    if P.alphabet_size != 2:
        raise ShapeMismatch("all-zero distance is defined for binary distributions")
    return sum((p * Fraction(sum(x.symbols), P.n) for x, p in P), Fraction(0))


def _block_profile(
    strings: Sequence[SymString], weights: Sequence[int], mask: int, alphabet_size: int
) -> tuple[int, SymString]:
    """Cost and coordinatewise weighted-plurality center of one group."""

    members = [index for index in range(len(strings)) if mask >> index & 1]
    center: list[int] = []
    cost = 0
    for position in range(len(strings[0])):
        tally = [0] * alphabet_size
        for index in members:
            tally[strings[index][position]] += weights[index]
        best = max(range(alphabet_size), key=lambda symbol: (tally[symbol], -symbol))
        center.append(best)
        cost += sum(tally) - tally[best]
    return cost, word(center, alphabet_size)


def support_repair(P: Dist, m: int) -> tuple[Fraction, Dist]:
    """Distance from ``P`` to support size ``m`` and the closest distribution found."""

    if m < 1:
        raise ValueError("support bound must be positive")
    if len(P) <= m:
        return Fraction(0), P
    if len(P) > SUPPORT_GUARD:
        raise GuardExceeded(f"support of size {len(P)} exceeds the guard {SUPPORT_GUARD}")

    strings = P.strings
    scale = lcm(*(p.denominator for _, p in P))
    weights = [int(p * scale) for _, p in P]
    full = (1 << len(strings)) - 1
    profiles = {
        mask: _block_profile(strings, weights, mask, P.alphabet_size)
        for mask in range(1, full + 1)
    }

    # best[j][mask]: cheapest cover of ``mask`` by j groups; choice[j][mask] its first group.
    best: list[dict[int, int]] = [{0: 0}]
    choice: list[dict[int, int]] = [{}]
    for groups in range(1, m + 1):
        layer: dict[int, int] = {}
        picks: dict[int, int] = {}
        for mask in range(1, full + 1):
            low = mask & -mask
            rest = mask ^ low
            sub = rest
            while True:
                block = sub | low
                remainder = mask ^ block
                previous = best[groups - 1].get(remainder)
                if previous is not None:
                    total = previous + profiles[block][0]
                    if mask not in layer or total < layer[mask]:
                        layer[mask] = total
                        picks[mask] = block
                if sub == 0:
                    break
                sub = (sub - 1) & rest
        best.append(layer)
        choice.append(picks)

    groups, mask = m, full
    centers: list[tuple[SymString, Fraction]] = []
    while mask:
        block = choice[groups][mask]
        mass = sum((P.support[i][1] for i in range(len(strings)) if block >> i & 1), Fraction(0))
        centers.append((profiles[block][1], mass))
        mask ^= block
        groups -= 1
    witness = dist_from_weighted_support(centers)
    return Fraction(best[m][full], scale * P.n), witness


def dist_to_support_m(P: Dist, m: int) -> Fraction:
    return support_repair(P, m)[0]


def _segment_cost(symbols: Sequence[int], alphabet: tuple[int, int]) -> int:
    cost = 0
    length = len(symbols)
    for i in range(length // 2):
        a, b = symbols[i], symbols[length - 1 - i]
        cost += min(int(a != c) + int(b != c) for c in alphabet)
    if length % 2:
        cost += int(symbols[length // 2] not in alphabet)
    return cost


def dist_to_cpal(x: SymString) -> Fraction:
    """Exact normalized distance to {0,1}-palindrome followed by a {2,3}-palindrome."""

    if x.alphabet_size != 4:
        raise ShapeMismatch("cpal strings are over the alphabet {0,1,2,3}")
    symbols = x.symbols
    n = len(symbols)
    cheapest = min(
        _segment_cost(symbols[:t], (0, 1)) + _segment_cost(symbols[t:], (2, 3))
        for t in range(n + 1)
    )
    return Fraction(cheapest, n)


def is_cpal_string(x: SymString) -> bool:
    return dist_to_cpal(x) == 0


def inv_farness_certificate(f: FnTable, g: FnTable) -> Fraction:
    """Certified lower bound on the distance of ``uniform{f, g}`` from Inv."""

    apart = hamming(f.as_string(), g.as_string())
    round_trip = hamming(compose(g, f).as_string(), identity(f.size).as_string())
    return min(apart / 2, round_trip / 2)


def dist_f_to_inv_exact(f: FnTable, g: FnTable) -> Fraction:
    """Exact distance of the pair ``(f, g)`` from inv, by enumerating permutations."""

    n = f.size
    if n > INV_EXACT_MAX_N:
        raise GuardExceeded(f"n={n} exceeds the inv enumeration guard {INV_EXACT_MAX_N}")
    fs, gs = f.as_string(), g.as_string()
    best = hamming(fs, gs) / 2
    for images in permutations(range(1, n + 1)):
        pi = FnTable.endo(images)
        candidate = (hamming(fs, pi.as_string()) + hamming(gs, pi.inverse().as_string())) / 2
        best = min(best, candidate)
    return best


def dist_f_to_sym(f: FnTable) -> Fraction:
    m = f.size
    violations = sum(1 for a in range(1, m + 1) for b in range(a + 1, m + 1) if f(a, b) != f(b, a))
    return Fraction(violations, m * m)


def dist_f_to_sym_brute(f: FnTable) -> Fraction:
    """Minimum over every symmetric table; a cross-check for small m."""

    m = f.size
    if m > SYM_BRUTE_MAX_M:
        raise GuardExceeded(f"m={m} exceeds the symmetric enumeration guard {SYM_BRUTE_MAX_M}")
    cells = [(a, b) for a in range(1, m + 1) for b in range(a, m + 1)]
    best = m * m
    for bits in product((0, 1), repeat=len(cells)):
        changed = 0
        for (a, b), bit in zip(cells, bits):
            changed += int(f(a, b) != bit)
            if a != b:
                changed += int(f(b, a) != bit)
        best = min(best, changed)
    return Fraction(best, m * m)


def dist_f_to_par_k(f: FnTable) -> Fraction:
    odd = sum(1 for value in f.values if sum(value) % 2)
    return Fraction(odd, f.k * comb(f.size, f.k))


def _sym_pair_ok(x: SymString, y: SymString, m: int) -> bool:
    return phi(x, key_of(y, m), m) == phi(y, key_of(x, m), m)


def sym_members_ok(strings: Sequence[SymString], code: SystematicCode) -> bool:
    """Whether a distribution supported on ``strings`` belongs to Sym."""

    m = code.m
    if any(len(x) != 2 * m or not key_valid(x, code) for x in strings):
        return False
    return all(
        _sym_pair_ok(strings[i], strings[j], m)
        for i in range(len(strings))
        for j in range(i + 1, len(strings))
    )


def is_sym(P: Dist, code: SystematicCode) -> bool:
    return P.alphabet_size == 2 and P.n == 2 * code.m and sym_members_ok(P.strings, code)


def dist_to_sym_exact(P: Dist, code: SystematicCode | None = None) -> Fraction:
    """Exact distance from Sym by searching every repair map of a tiny support."""

    if P.n % 2 or P.alphabet_size != 2:
        raise ShapeMismatch("Sym distributions live over {0,1}^{2m}")
    m = P.n // 2
    if m > SYM_EXACT_MAX_M or len(P) > SYM_EXACT_MAX_SUPPORT:
        raise GuardExceeded(
            f"exact Sym distance needs m <= {SYM_EXACT_MAX_M} and support <= {SYM_EXACT_MAX_SUPPORT}"
        )
    code = code or make_systematic_code(m, m, relaxed=True)
    candidates = [
        z
        for z in (BitString(bits) for bits in product((0, 1), repeat=P.n))
        if key_valid(z, code)
    ]
    compatible = {
        (z, w): _sym_pair_ok(z, w, m) for z in candidates for w in candidates
    }
    support = P.support
    costs = [
        [sum(1 for a, b in zip(x.symbols, z.symbols) if a != b) for z in candidates]
        for x, _ in support
    ]
    scale = lcm(*(p.denominator for _, p in support))
    weights = [int(p * scale) for _, p in support]
    # Mapping everything onto one valid string is always feasible.
    best = max(weights) * P.n * len(support) + 1

    def search(index: int, chosen: list[int], spent: int) -> None:
        nonlocal best
        if spent >= best:
            return
        if index == len(support):
            best = spent
            return
        options = sorted(range(len(candidates)), key=lambda c: costs[index][c])
        for c in options:
            z = candidates[c]
            if all(compatible[(z, candidates[prior])] for prior in chosen):
                chosen.append(c)
                search(index + 1, chosen, spent + weights[index] * costs[index][c])
                chosen.pop()

    search(0, [], 0)
    return Fraction(best, scale * P.n)


def par_members_ok(strings: Sequence[SymString], code: SystematicCode, k: int) -> bool:
    """Whether a distribution supported on ``strings`` belongs to Par_k."""

    m, n = code.m, code.n
    if any(len(x) != 2 * n or not key_valid(x, code) for x in strings):
        return False
    by_key: dict[int, list[SymString]] = defaultdict(list)
    for x in strings:
        by_key[key_of(x, m)].append(x)
    for A in k_subsets(by_key, k):
        parity = 0
        for a in A:
            rest = tuple(b for b in A if b != a)
            offset = n + par_data_index(a, rest)
            bits = {x[offset] for x in by_key[a]}
            if len(bits) > 1:
                return False
            parity ^= bits.pop()
        if parity:
            return False
    return True


def is_par(P: Dist, code: SystematicCode, k: int) -> bool:
    return P.alphabet_size == 2 and P.n == 2 * code.n and par_members_ok(P.strings, code, k)


def is_inv(P: Dist) -> bool:
    if P.alphabet_size != P.n:
        return False
    if len(P) == 1:
        return True
    if len(P) > 2:
        return False
    f, g = (FnTable.from_string(x) for x in P.strings)
    return compose(g, f) == identity(P.n)


def is_cpal(P: Dist, pairing: SystematicCode | None = None) -> bool:
    """Deterministic, and the decoded symbol string is in cpal."""

    pairing = pairing or cpal_pairing()
    if not P.is_deterministic() or P.alphabet_size != 2 or P.n % pairing.n:
        return False
    (x,) = P.strings
    lookup = {codeword.bits: symbol for symbol, codeword in enumerate(pairing.codewords)}
    width = pairing.n
    try:
        symbols = [lookup[x.symbols[i : i + width]] for i in range(0, P.n, width)]
    except KeyError:
        return False
    return is_cpal_string(word(symbols, 4))


@dataclass(frozen=True)
class PropertyOracle:
    """A named property with an exact membership test and its distance oracle, if any."""

    tag: str
    contains: Callable[[Dist], bool]
    distance: str | None = None


def property_oracle(tag: str, *, m: int | None = None, k: int | None = None,
                    code: SystematicCode | None = None) -> PropertyOracle:
    """Look up the oracle for a property tag such as ``"Sym"`` or ``"ParK"``."""

    if tag == "AllZero":
        return PropertyOracle(tag, lambda P: dist_to_all_zero(P) == 0, "dist_to_all_zero")
    if tag == "Determinism":
        return PropertyOracle(tag, Dist.is_deterministic)
    if tag == "Support":
        if m is None:
            raise ValueError("Support needs m")
        return PropertyOracle(f"Support({m})", lambda P: len(P) <= m, "dist_to_support_m")
    if tag == "CPal":
        return PropertyOracle(tag, is_cpal, "dist_to_cpal")
    if tag == "Inv":
        return PropertyOracle(tag, is_inv, "inv_farness_certificate")
    if tag == "Sym":
        if code is None:
            raise ValueError("Sym needs its code")
        return PropertyOracle(f"Sym({code.m})", lambda P: is_sym(P, code), "dist_to_sym_exact")
    if tag == "ParK":
        if code is None or k is None:
            raise ValueError("ParK needs k and its code")
        return PropertyOracle(f"ParK({k},{code.m})", lambda P: is_par(P, code, k))
    raise KeyError(f"unknown property tag {tag!r}")


PROPERTY_TAGS = ("AllZero", "Determinism", "Support", "CPal", "Inv", "Sym", "ParK")
PROPERTIES: dict[str, Callable[..., PropertyOracle]] = {
    tag: partial(property_oracle, tag) for tag in PROPERTY_TAGS
}


__all__ = [
    "GuardExceeded",
    "PROPERTIES",
    "PROPERTY_TAGS",
    "PropertyOracle",
    "TransferPlan",
    "dist_f_to_inv_exact",
    "dist_f_to_par_k",
    "dist_f_to_sym",
    "dist_f_to_sym_brute",
    "dist_to_all_zero",
    "dist_to_cpal",
    "dist_to_support_m",
    "dist_to_sym_exact",
    "emd",
    "inv_farness_certificate",
    "is_cpal",
    "is_cpal_string",
    "is_inv",
    "is_par",
    "is_sym",
    "par_members_ok",
    "property_oracle",
    "support_repair",
    "sym_members_ok",
    "variation",
]
