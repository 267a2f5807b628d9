"""Tabulate which adaptivity models accept the query logs each tester produces."""

from __future__ import annotations

import argparse
import json
from fractions import Fraction

import numpy as np

from adaptest.access import ModelSpec, ModelViolation, SampleCursor, open_session, validate_log
from adaptest.bitcore import word, zeros
from adaptest.dists import Dist, point, uniform
from adaptest.lab import Family, gen_cpal, gen_inv, gen_par, gen_sym
from adaptest.testers import TESTERS, inv_samples, open_tester_session

# Locally-bounded is left out: its log rule only sees cursor flags. Information flow
# between samples is checked by the locality audit, see ``inv_through_cursors``.
AUDIT_MODELS = (
    "non-adaptive",
    "forward-only",
    "weak:2",
    "weak:3",
    "strong:3",
    "adaptive",
)


def _support_instance(m: int, n: int, seed: int) -> Dist:
    rng = np.random.default_rng(seed)
    strings = {tuple(int(b) for b in rng.integers(0, 2, size=n)) for _ in range(m)}
    return uniform(word(bits) for bits in strings)


def instances(seed: int) -> dict[str, tuple[Dist, dict[str, int]]]:
    """One in-property input per tester, with the tester's parameters."""

    return {
        "all_zero": (point(zeros(16)), {}),
        "determinism": (point(word([1, 0] * 8)), {}),
        "support_na": (_support_instance(2, 32, seed), {"m": 2}),
        "support_strongmem": (_support_instance(2, 32, seed), {"m": 2}),
        "support_forward": (_support_instance(2, 32, seed), {"m": 2}),
        "inv_forward": (gen_inv(Family.INV_YES, 64, seed).dist, {}),
        "sym_weak2": (gen_sym(Family.SYM_YES, 16, seed).dist, {}),
        "par_k": (gen_par(Family.PAR_YES, 2, 9, seed).dist, {"k": 2}),
        "cpal_local": (gen_cpal(64, seed)[0], {}),
    }


def separation_table(
    epsilon: Fraction, runs: int, seed: int, *, models: tuple[str, ...] = AUDIT_MODELS
) -> dict[str, dict[str, float]]:
    table: dict[str, dict[str, float]] = {}
    for name, (dist, params) in instances(seed).items():
        valid = dict.fromkeys(models, 0)
        for run in range(runs):
            spec, session, checked = open_tester_session(name, dist, epsilon, params, (seed, run))
            verdict = spec.run(session, epsilon, **checked)
            for model in models:
                valid[model] += validate_log(ModelSpec.parse(model), verdict.log, session.s, dist.n).ok
        table[name] = {model: count / runs for model, count in valid.items()}
    return table


def inv_through_cursors(dist: Dist, epsilon: Fraction, seed: int | tuple[int, ...]) -> bool:
    """Drive the Inv tester's reads through per-sample cursors; False when the audit objects.

    Sample ``i`` reads ``g`` at ``f(k)``, an answer from sample 1, so the locality
    audit sees its positions move once sample 1 answers differently.
    """

    s = inv_samples(epsilon)
    session = open_session(dist, s, ModelSpec.locally_bounded(), seed)
    js = [int(j) for j in session.coins.integers(1, dist.n + 1, size=s - 1)]
    ks = [int(k) for k in session.coins.integers(1, dist.n + 1, size=s - 1)]
    f_at_k: dict[int, int] = {}

    def first(cursor: SampleCursor) -> None:
        for j in js:
            cursor.query(j)
        for k in ks:
            f_at_k[k] = cursor.query(k) + 1

    def later(t: int):
        def read(cursor: SampleCursor) -> None:
            cursor.query(js[t])
            cursor.query(f_at_k[ks[t]])

        return read

    session.cursor(1, first)
    for i in range(2, s + 1):
        session.cursor(i, later(i - 2))
    try:
        session.transcripts()
    except ModelViolation:
        return False
    return True


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epsilon", default="1/4", help="proximity parameter, e.g. 1/4")
    parser.add_argument("--runs", type=int, default=20, help="seeded runs per tester")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    epsilon = Fraction(args.epsilon)
    table = separation_table(epsilon, args.runs, args.seed)
    inv = gen_inv(Family.INV_YES, 64, args.seed).dist
    local = sum(inv_through_cursors(inv, epsilon, (args.seed, run)) for run in range(args.runs))
    print(
        json.dumps(
            {
                "testers": sorted(TESTERS),
                "valid_fraction": table,
                "inv_locality_audit_passes": local / args.runs,
            },
            indent=2,
        )
    )


if __name__ == "__main__":
    main()
