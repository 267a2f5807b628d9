"""Tests for the distances and the distance-to-property oracles."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from adaptest.bitcore import ShapeMismatch, cpal_pairing, hamming, make_systematic_code, word, zeros
from adaptest.dists import (
    Dist,
    FnTable,
    dist_from_weighted_support,
    encode_binary,
    point,
    u_f_sym,
    uniform,
)
from adaptest.metrics import (
    PROPERTIES,
    GuardExceeded,
    dist_f_to_inv_exact,
    dist_f_to_par_k,
    dist_f_to_sym,
    dist_f_to_sym_brute,
    dist_to_all_zero,
    dist_to_cpal,
    dist_to_support_m,
    dist_to_sym_exact,
    emd,
    inv_farness_certificate,
    is_cpal,
    is_inv,
    is_sym,
    property_oracle,
    support_repair,
    variation,
)


def _random_dist(rng: np.random.Generator, n: int, alphabet_size: int = 2, size: int = 3) -> Dist:
    entries = [
        (word([int(v) for v in rng.integers(0, alphabet_size, size=n)], alphabet_size), int(rng.integers(1, 5)))
        for _ in range(size)
    ]
    return dist_from_weighted_support(entries)


def _cpal_strings(length: int):
    for t in range(length + 1):
        for left in product((0, 1), repeat=(t + 1) // 2):
            for right in product((2, 3), repeat=(length - t + 1) // 2):
                first = list(left) + list(left[: t // 2])[::-1]
                second = list(right) + list(right[: (length - t) // 2])[::-1]
                yield word(first + second, 4)


def test_variation_and_emd_on_point_masses() -> None:
    P, Q = point(word([0, 0, 0, 0])), point(word([1, 1, 0, 0]))
    assert variation(P, Q) == 1
    distance, plan = emd(P, Q)
    assert distance == Fraction(1, 2)
    assert plan.couples(P, Q)


def test_emd_moves_only_the_mass_that_differs() -> None:
    P = dist_from_weighted_support([("000", 1), ("111", 1)])
    Q = dist_from_weighted_support([("000", 1), ("110", 1)])
    distance, plan = emd(P, Q)
    assert distance == Fraction(1, 6)
    assert plan.cost() == distance
    assert plan.couples(P, Q)


def test_emd_shapes_must_agree() -> None:
    with pytest.raises(ShapeMismatch):
        emd(point(zeros(2)), point(zeros(3)))


def test_emd_never_exceeds_variation(rng, trial_count) -> None:
    for _ in range(trial_count(1000, 150)):
        n = int(rng.integers(1, 7))
        P = _random_dist(rng, n, size=int(rng.integers(1, 5)))
        Q = _random_dist(rng, n, size=int(rng.integers(1, 5)))
        distance, plan = emd(P, Q)
        assert plan.couples(P, Q)
        assert plan.cost() == distance
        assert distance <= variation(P, Q)


def test_encoding_keeps_emd_within_a_factor_of_three(rng, small_code, trial_count) -> None:
    for _ in range(trial_count(1000, 100)):
        n = int(rng.integers(1, 4))
        P = _random_dist(rng, n, alphabet_size=4)
        Q = _random_dist(rng, n, alphabet_size=4)
        d, _ = emd(P, Q)
        encoded, _ = emd(encode_binary(P, small_code), encode_binary(Q, small_code))
        assert d / 3 <= encoded <= d


def test_dist_to_all_zero(zero_one_dist) -> None:
    assert dist_to_all_zero(zero_one_dist) == Fraction(1, 2)
    assert dist_to_all_zero(point(zeros(5))) == 0


def test_support_repair_on_four_constants(four_constants) -> None:
    distance, witness = support_repair(four_constants, 2)
    assert distance == Fraction(1, 2)
    assert len(witness) <= 2
    assert emd(four_constants, witness)[0] <= distance
    assert dist_to_support_m(four_constants, 4) == 0
    assert dist_to_support_m(four_constants, 3) == Fraction(1, 4)


def test_support_repair_guards_large_supports() -> None:
    P = uniform(word([int(b) for b in format(v, "04b")]) for v in range(16))
    with pytest.raises(GuardExceeded):
        dist_to_support_m(P, 2)


def test_dist_to_cpal_matches_enumeration(rng) -> None:
    for length in range(1, 5):
        members = list(_cpal_strings(length))
        for symbols in product(range(4), repeat=length):
            x = word(symbols, 4)
            assert dist_to_cpal(x) == min(hamming(x, z) for z in members)
    members = list(_cpal_strings(6))
    for _ in range(100):
        x = word([int(v) for v in rng.integers(0, 4, size=6)], 4)
        assert dist_to_cpal(x) == min(hamming(x, z) for z in members)


def test_is_cpal_reads_the_two_bit_encoding() -> None:
    member = encode_binary(point(word([1, 0, 1, 3, 2, 3], 4)), cpal_pairing())
    assert is_cpal(member)
    outsider = encode_binary(point(word([2, 0, 1, 3], 4)), cpal_pairing())
    assert not is_cpal(outsider)
    assert not is_cpal(uniform([zeros(4), word([0, 0, 0, 1])]))


def test_inv_certificate_lower_bounds_the_exact_distance(rng) -> None:
    n = 5
    for _ in range(30):
        f = FnTable.endo([int(v) + 1 for v in rng.permutation(n)])
        g = FnTable.endo([int(v) + 1 for v in rng.permutation(n)])
        assert inv_farness_certificate(f, g) <= dist_f_to_inv_exact(f, g)
        assert inv_farness_certificate(f, f.inverse()) == 0
        assert dist_f_to_inv_exact(f, f.inverse()) == 0


def test_inv_exact_is_guarded() -> None:
    f = FnTable.endo(list(range(1, 7)))
    with pytest.raises(GuardExceeded):
        dist_f_to_inv_exact(f, f)


def test_is_inv() -> None:
    f = FnTable.endo([2, 3, 1])
    assert is_inv(uniform([f.as_string(), f.inverse().as_string()]))
    assert is_inv(point(FnTable.endo([1, 2, 3]).as_string()))
    assert not is_inv(uniform([f.as_string(), FnTable.endo([1, 1, 1]).as_string()]))


def test_sym_function_distance_matches_brute_force(rng) -> None:
    for _ in range(20):
        m = int(rng.integers(2, 4))
        f = FnTable.square([[int(b) for b in rng.integers(0, 2, size=m)] for _ in range(m)])
        assert dist_f_to_sym(f) == dist_f_to_sym_brute(f)


@pytest.mark.parametrize("pattern", list(product((0, 1), repeat=3)))
def test_sym_distance_on_antisymmetric_patterns(pattern: tuple[int, int, int]) -> None:
    m = 3
    rows = [[0] * m for _ in range(m)]
    for bit, (a, b) in zip(pattern, [(0, 1), (0, 2), (1, 2)]):
        rows[a][b], rows[b][a] = bit, 1 - bit
    f = FnTable.square(rows)
    code = make_systematic_code(m, m, relaxed=True)
    P = u_f_sym(f, code)
    assert not is_sym(P, code)
    assert dist_f_to_sym(f) == Fraction(1, 3)
    assert dist_to_sym_exact(P, code) >= dist_f_to_sym(f) / 6


def test_sym_members_have_distance_zero() -> None:
    m = 3
    code = make_systematic_code(m, m, relaxed=True)
    f = FnTable.square([[1, 0, 1], [0, 0, 1], [1, 1, 0]])
    P = u_f_sym(f, code)
    assert is_sym(P, code)
    assert dist_to_sym_exact(P, code) == 0


def test_par_function_distance_counts_odd_sets() -> None:
    f = FnTable.kset(4, 2, lambda A: (1, 0) if A == (1, 2) else (1, 1))
    assert dist_f_to_par_k(f) == Fraction(1, 12)


def test_property_registry(four_constants) -> None:
    assert set(PROPERTIES) == {"AllZero", "Determinism", "Support", "CPal", "Inv", "Sym", "ParK"}
    assert PROPERTIES["AllZero"]().contains(point(zeros(3)))
    assert not PROPERTIES["Support"](m=2).contains(four_constants)
    assert PROPERTIES["Support"](m=4).contains(four_constants)
    assert PROPERTIES["Determinism"]().contains(point(zeros(3)))
    with pytest.raises(ValueError):
        property_oracle("Sym")
    with pytest.raises(KeyError):
        property_oracle("Palindrome")
