"""Tests for the testers: one-sided completeness, soundness on far inputs and model compliance."""

from fractions import Fraction
from itertools import permutations

import pytest

from adaptest import testers
from adaptest.access import ModelSpec, open_session, validate_log
from adaptest.bitcore import cpal_pairing, ones, prefix_length, word, zeros
from adaptest.dists import FnTable, encode_binary, point, uniform
from adaptest.harness import wilson_interval
from adaptest.lab import Family, gen_cpal, gen_inv, gen_par, gen_sym
from adaptest.metrics import dist_to_cpal

SEEDS = range(12)


def _accepts(name, dist, epsilon, params=None, seeds=SEEDS) -> list[bool]:
    return [testers.run_tester(name, dist, epsilon, params, seed).accept for seed in seeds]


def test_as_epsilon() -> None:
    assert testers.as_epsilon("1/4") == Fraction(1, 4)
    assert testers.as_epsilon(0.5) == Fraction(1, 2)
    for bad in (0, 1, "3/2", -0.1):
        with pytest.raises(ValueError):
            testers.as_epsilon(bad)


def test_registry_lookup_and_params(four_constants) -> None:
    assert set(testers.TESTERS) == {
        "all_zero",
        "determinism",
        "support_na",
        "support_strongmem",
        "support_forward",
        "inv_forward",
        "sym_weak2",
        "par_k",
        "cpal_local",
    }
    with pytest.raises(KeyError):
        testers.get_tester("support_magic")
    with pytest.raises(ValueError):
        testers.run_tester("support_na", four_constants, "1/4")
    with pytest.raises(ValueError):
        testers.run_tester("all_zero", four_constants, "1/4", {"m": 2})
    assert testers.TESTERS["support_strongmem"].model({"m": 3}) == ModelSpec.strong(4)
    assert testers.TESTERS["par_k"].model({"k": 3}) == ModelSpec.weak(3)


def test_key_counts() -> None:
    assert testers.sym_keys(32) == 16
    with pytest.raises(ValueError):
        testers.sym_keys(33)
    assert testers.par_keys(2, 8) == 9
    assert testers.par_keys(3, 153) == 19
    with pytest.raises(ValueError):
        testers.par_keys(3, 4)
    with pytest.raises(ValueError):
        testers.par_keys(1, 4)


def test_all_zero_runs_one_planned_batch() -> None:
    session = open_session(point(zeros(8)), testers.all_zero_samples(Fraction(1, 3)), ModelSpec.non_adaptive(), 4)
    verdict = testers.test_all_zero(session, Fraction(1, 3))
    assert verdict.accept
    assert verdict.queries == 3
    assert not any(testers.run_tester("all_zero", point(ones(8)), "1/3", seed=seed).accept for seed in SEEDS)


@pytest.mark.slow
def test_all_zero_acceptance_matches_its_closed_form(zero_one_dist, trial_count) -> None:
    trials = trial_count(4000, 400)
    accepts = sum(_accepts("all_zero", zero_one_dist, "1/2", seeds=range(trials)))
    low, high = wilson_interval(accepts, trials, 0.999)
    assert low <= 0.25 <= high


def test_determinism_is_one_sided(zero_one_dist) -> None:
    assert all(_accepts("determinism", point(word([1, 0, 1, 1])), "1/4"))
    assert not all(_accepts("determinism", zero_one_dist, "1/2"))


def test_support_na_shape() -> None:
    assert testers.support_na_shape(Fraction(1, 2), 2) == (33, 22)
    with pytest.raises(ValueError):
        testers.support_na_shape(Fraction(1, 2), 0)


@pytest.mark.parametrize("name", ["support_na", "support_strongmem", "support_forward"])
def test_support_testers_accept_small_supports(name, four_constants) -> None:
    assert all(_accepts(name, four_constants, "1/4", {"m": 4}, range(5)))
    assert all(_accepts(name, point(zeros(32)), "1/4", {"m": 1}, range(5)))


@pytest.mark.parametrize("name", ["support_na", "support_strongmem", "support_forward"])
def test_support_testers_reject_four_constants_for_m_two(name, four_constants) -> None:
    assert not any(_accepts(name, four_constants, "1/8", {"m": 2}, range(8)))


@pytest.mark.parametrize("m", [1, 2, 4])
def test_strong_memory_and_forward_support_testers_agree(m, four_constants, rng) -> None:
    inputs = [
        four_constants,
        uniform(word([int(v) for v in rng.integers(0, 2, size=12)]) for _ in range(5)),
        uniform([zeros(12), ones(12), word([0, 1] * 6)]),
    ]
    for dist in inputs:
        for seed in range(10):
            strong = testers.run_tester("support_strongmem", dist, "1/3", {"m": m}, seed)
            forward = testers.run_tester("support_forward", dist, "1/3", {"m": m}, seed)
            assert strong.accept == forward.accept


def test_support_adaptive_logs_fit_their_models(four_constants) -> None:
    for seed in range(5):
        spec, session, params = testers.open_tester_session("support_strongmem", four_constants, "1/4", {"m": 3}, seed)
        verdict = spec.run(session, Fraction(1, 4), **params)
        assert validate_log(ModelSpec.strong(4), verdict.log, session.s, session.n)
        assert not validate_log(ModelSpec.forward_only(), verdict.log, session.s, session.n)

        spec, session, params = testers.open_tester_session("support_forward", four_constants, "1/4", {"m": 3}, seed)
        verdict = spec.run(session, Fraction(1, 4), **params)
        assert validate_log(ModelSpec.forward_only(), verdict.log, session.s, session.n)


def test_inv_iteration_rejects_exactly_off_the_property() -> None:
    n = 3
    tables = [FnTable.endo(list(p)) for p in permutations(range(1, n + 1))]
    for f in tables:
        for g in tables:
            rejects = any(
                testers.inv_iteration_rejects(f, g, j, k) for j in range(1, n + 1) for k in range(1, n + 1)
            )
            assert rejects == (g != f and g != f.inverse())


def test_inv_forward_is_complete_and_sound() -> None:
    yes = gen_inv(Family.INV_YES, 64, seed=1)
    assert all(_accepts("inv_forward", yes.dist, "1/4"))
    no = gen_inv(Family.INV_NO, 64, seed=2)
    assert no.certificate is not None
    assert not any(_accepts("inv_forward", no.dist, "1/5", seeds=range(10)))


def test_sym_weak2_queries_per_iteration() -> None:
    instance = gen_sym(Family.SYM_YES, 16, seed=3)
    epsilon = Fraction(1, 2)
    verdict = testers.run_tester("sym_weak2", instance.dist, epsilon, seed=5)
    assert verdict.accept
    per_iteration = 2 * prefix_length(16) + 4
    assert per_iteration == 12
    assert verdict.queries == testers.sym_iterations(epsilon) * per_iteration
    assert verdict.queries == testers.TESTERS["sym_weak2"].query_budget(epsilon, {}, instance.dist.n)


def test_sym_weak2_logs_need_two_samples_of_memory() -> None:
    instance = gen_sym(Family.SYM_YES, 16, seed=4)
    for seed in range(4):
        spec, session, params = testers.open_tester_session("sym_weak2", instance.dist, "1/2", None, seed)
        verdict = spec.run(session, Fraction(1, 2), **params)
        assert validate_log(ModelSpec.weak(2), verdict.log, session.s, session.n)
        assert not validate_log(ModelSpec.forward_only(), verdict.log, session.s, session.n)


@pytest.mark.parametrize(("m", "epsilon"), [(16, "1/2"), (128, "1/14")])
def test_sym_weak2_is_complete_and_sound(m, epsilon) -> None:
    assert all(_accepts("sym_weak2", gen_sym(Family.SYM_YES, m, seed=6).dist, "1/2", seeds=range(4)))
    assert not any(_accepts("sym_weak2", gen_sym(Family.SYM_NO, m, seed=7).dist, epsilon, seeds=range(6)))


@pytest.mark.parametrize(("k", "m"), [(2, 9), (3, 19)])
def test_par_k_accepts_even_inputs(k, m) -> None:
    instance = gen_par(Family.PAR_YES, k, m, seed=8)
    assert all(_accepts("par_k", instance.dist, "1/2", {"k": k}, range(4)))


def test_par_k_rejects_odd_inputs() -> None:
    instance = gen_par(Family.PAR_NO, 2, 64, seed=9)
    assert not any(_accepts("par_k", instance.dist, "1/12", {"k": 2}, range(6)))


def test_par_k_logs_fit_weak_memory() -> None:
    instance = gen_par(Family.PAR_YES, 2, 9, seed=10)
    spec, session, params = testers.open_tester_session("par_k", instance.dist, "1/2", {"k": 2}, 0)
    verdict = spec.run(session, Fraction(1, 2), **params)
    assert validate_log(ModelSpec.weak(2), verdict.log, session.s, session.n)
    assert verdict.queries <= spec.query_budget(Fraction(1, 2), params, session.n)


def test_cpal_local_accepts_members() -> None:
    for seed in range(6):
        dist, distance = gen_cpal(40, seed)
        assert distance == 0
        assert all(_accepts("cpal_local", dist, "1/4", seeds=range(3)))


def test_cpal_local_rejects_far_strings() -> None:
    x = word([0, 2] * 64, 4)
    assert dist_to_cpal(x) >= Fraction(1, 5)
    dist = encode_binary(point(x), cpal_pairing())
    assert dist.n == 256
    assert not any(_accepts("cpal_local", dist, "1/5", seeds=range(8)))


def test_cpal_local_rejects_mixtures_of_members() -> None:
    first = encode_binary(point(word([0] * 16, 4)), cpal_pairing())
    second = encode_binary(point(word([3] * 16, 4)), cpal_pairing())
    mixture = uniform(list(first.strings) + list(second.strings))
    assert not all(_accepts("cpal_local", mixture, "1/4"))


def test_cpal_local_rejects_mixtures_of_close_members() -> None:
    flat = word([0] * 128, 4)
    stepped = word([0] * 76 + [3] * 52, 4)
    assert dist_to_cpal(flat) == dist_to_cpal(stepped) == 0
    mixture = encode_binary(uniform([flat, stepped]), cpal_pairing())
    verdicts = _accepts("cpal_local", mixture, "1/5", seeds=range(40))
    assert verdicts.count(False) >= 30


def test_cpal_cursors_stay_within_budget() -> None:
    dist, _ = gen_cpal(64, 3, member=False)
    epsilon = Fraction(1, 4)
    for seed in range(5):
        spec, session, params = testers.open_tester_session("cpal_local", dist, epsilon, None, seed)
        spec.run(session, epsilon, **params)
        per_cursor = testers.cpal_cursor_budget(epsilon, session.n)
        for i in range(1, session.s + 1):
            assert sum(q.i == i for q in session.log.queries()) <= per_cursor
        assert validate_log(ModelSpec.locally_bounded(), session.log, session.s, session.n)


@pytest.mark.parametrize(
    ("name", "dist_factory", "params"),
    [
        ("support_na", lambda: uniform([zeros(16), ones(16)]), {"m": 2}),
        ("support_strongmem", lambda: uniform([zeros(16), ones(16)]), {"m": 2}),
        ("support_forward", lambda: uniform([zeros(16), ones(16)]), {"m": 2}),
        ("inv_forward", lambda: gen_inv(Family.INV_YES, 64, seed=11).dist, {}),
        ("par_k", lambda: gen_par(Family.PAR_YES, 2, 9, seed=12).dist, {"k": 2}),
    ],
)
def test_queries_stay_within_the_declared_budget(name, dist_factory, params) -> None:
    dist = dist_factory()
    spec = testers.get_tester(name)
    epsilon = Fraction(1, 3)
    for seed in range(3):
        verdict = testers.run_tester(name, dist, epsilon, params, seed)
        assert verdict.queries <= spec.query_budget(epsilon, params, dist.n)
        assert verdict.samples_touched <= spec.samples(epsilon, params)
