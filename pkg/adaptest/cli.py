"""The ``adaptest`` console script."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from functools import singledispatch
from pathlib import Path
from typing import Any, Sequence

from . import config
from .access import LogValidation, ModelSpec, Verdict, validate_log
from .bitcore import make_systematic_code
from .harness import AcceptanceReport, estimate_acceptance, run_experiment
from .lab import AppendixReport, BoundViolation, Family, check_appendix_bounds, generate
from .metrics import emd
from .records import (
    CertificateRecord,
    CodeDescriptor,
    ExperimentConfig,
    ReportRow,
    VerdictRecord,
    dist_from_file,
    dist_to_file,
    read_log,
    write_log,
)
from .testers import TESTERS, as_epsilon, run_tester

logger = logging.getLogger(__name__)

RED = "\033[91m"
GREEN = "\033[92m"
YELLOW = "\033[93m"
CYAN = "\033[96m"
GRAY = "\033[90m"
RESET = "\033[0m"


@singledispatch
def pprint(x: Any) -> None:
    print(x)


@pprint.register
def _(x: Verdict) -> None:
    if x.accept:
        print(f"{GREEN}accept{RESET}")
    else:
        print(f"{RED}reject{RESET}")
    print(f"  queries: {x.queries}")
    print(f"  samples touched: {x.samples_touched}")
    print(f"{GRAY}  log events: {len(x.log)}{RESET}")


@pprint.register
def _(x: AcceptanceReport) -> None:
    low, high = x.interval
    print(f"{CYAN}{x.tester}{RESET} at epsilon {x.epsilon} over {x.trials} trials")
    print(f"  accept rate: {x.rate:.4f}  (99% interval {low:.4f} .. {high:.4f})")
    print(f"  rejects: {x.rejects}")
    print(f"  mean queries: {x.mean_queries:.2f}, mean samples touched: {x.mean_samples:.2f}")
    if x.violations:
        print(f"  {RED}model violations: {x.violations}{RESET}")
    if x.audit_model is not None:
        color = GREEN if not x.audit_failures else YELLOW
        print(f"  {color}audit {x.audit_model}: {x.audit_failures} failing logs{RESET}")


@pprint.register
def _(x: LogValidation) -> None:
    if x.ok:
        print(f"{GREEN}log is valid{RESET}")
    else:
        print(f"{RED}log is invalid{RESET} at event {x.index}: {x.rule}")


@pprint.register
def _(x: AppendixReport) -> None:
    status = f"{GREEN}all bounds hold{RESET}" if x.ok else f"{RED}counterexamples found{RESET}"
    print(status)
    for bound, count in x.checked.items():
        print(f"  {bound}: {count} cases")
    for case in x.counterexamples[:20]:
        print(f"  {YELLOW}[{case.bound}]{RESET} {case.values}")


@pprint.register
def _(x: list) -> None:
    for item in x:
        if isinstance(item, ReportRow):
            color = RED if item.violations else GRAY
            print(
                f"{CYAN}{item.tester}{RESET} {item.family} {item.params} eps={item.epsilon}: "
                f"accept {item.accept_rate:.4f} [{item.ci_low:.4f}, {item.ci_high:.4f}] "
                f"{color}violations {item.violations}, audit {item.audit_model} "
                f"failures {item.audit_failures}{RESET}"
            )
        else:
            print(item)


def _emit(payload: Any, fmt: str, *, rows: list[dict[str, Any]] | None = None) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, default=str))
    elif fmt == "csv":
        rows = rows if rows is not None else [payload]
        writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    else:
        pprint(payload)


def _params(pairs: Sequence[str] | None) -> dict[str, int]:
    params: dict[str, int] = {}
    for pair in pairs or ():
        name, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"parameters are written name=value, got {pair!r}")
        params[name.strip()] = int(value)
    return params


# Subcommands


def cmd_gen(args: argparse.Namespace) -> None:
    params = {name: getattr(args, name) for name in ("n", "m", "k") if getattr(args, name) is not None}
    if args.encoded:
        params["encoded"] = True
    instance = generate(args.family, params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dist_path = dist_to_file(instance.dist, out / "dist.json")
    record = CertificateRecord(
        family=instance.family.value,
        params=instance.params,
        seed=args.seed,
        certificate=None if instance.certificate is None else str(instance.certificate),
    )
    cert_path = out / "certificate.json"
    cert_path.write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s and %s", dist_path, cert_path)
    _emit(record.model_dump(), args.format)


def cmd_run(args: argparse.Namespace) -> None:
    epsilon = as_epsilon(args.epsilon)
    params = _params(args.param)
    verdict = run_tester(args.tester, dist_from_file(args.dist), epsilon, params, args.seed)
    if args.log:
        write_log(verdict.log, args.log)
        logger.info("wrote %d events to %s", len(verdict.log), args.log)
    if args.format == "text":
        pprint(verdict)
        return
    record = VerdictRecord.from_verdict(
        verdict, tester=args.tester, epsilon=epsilon, params=params, seed=args.seed
    )
    _emit(record.model_dump(), args.format)


def cmd_estimate(args: argparse.Namespace) -> None:
    report = estimate_acceptance(
        args.tester,
        dist_from_file(args.dist),
        args.epsilon,
        _params(args.param),
        args.trials,
        args.seed,
        workers=args.workers,
        audit_model=args.audit_model,
    )
    if args.format == "text":
        pprint(report)
        return
    _emit(
        {
            "tester": report.tester,
            "epsilon": str(report.epsilon),
            "params": json.dumps(report.params, sort_keys=True),
            "trials": report.trials,
            "accept_rate": report.rate,
            "ci_low": report.interval[0],
            "ci_high": report.interval[1],
            "mean_queries": report.mean_queries,
            "mean_samples": report.mean_samples,
            "rejects": report.rejects,
            "violations": report.violations,
            "audit_model": report.audit_model,
            "audit_failures": report.audit_failures,
        },
        args.format,
    )


def cmd_experiment(args: argparse.Namespace) -> None:
    experiment = ExperimentConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
    rows = run_experiment(experiment, workers=args.workers)
    if args.format == "text":
        pprint(rows)
    elif args.format == "json":
        _emit([row.model_dump() for row in rows], "json")
    else:
        _emit(None, "csv", rows=[row.flat() for row in rows])


def cmd_emd(args: argparse.Namespace) -> None:
    distance, plan = emd(dist_from_file(args.p), dist_from_file(args.q))
    payload = {
        "distance": str(distance),
        "plan": [[str(x), str(y), str(mass)] for x, y, mass in plan.entries],
    }
    if args.format == "csv":
        _emit(None, "csv", rows=[{"x": x, "y": y, "mass": mass} for x, y, mass in payload["plan"]])
    elif args.format == "json":
        _emit(payload, "json")
    else:
        print(f"{CYAN}emd{RESET} = {distance}")
        for x, y, mass in payload["plan"]:
            print(f"  {x} -> {y}: {mass}")


def cmd_code(args: argparse.Namespace) -> None:
    code = make_systematic_code(args.m, args.n, relaxed=args.relaxed)
    if args.format == "json":
        _emit(CodeDescriptor.from_code(code).model_dump(), "json")
    elif args.format == "csv":
        _emit(None, "csv", rows=[{"key": key, "codeword": word} for key, word in enumerate(code.lines(), 1)])
    else:
        print("\n".join(code.lines()))


def cmd_validate_log(args: argparse.Namespace) -> None:
    result = validate_log(ModelSpec.parse(args.model), read_log(args.log), args.s, args.n)
    if args.format == "text":
        pprint(result)
    else:
        _emit({"ok": result.ok, "index": result.index, "rule": result.rule}, args.format)
    if not result.ok:
        raise SystemExit(1)


def cmd_appendix(args: argparse.Namespace) -> None:
    report = check_appendix_bounds(m_max=args.m_max, n_max=args.n_max)
    if args.format == "text":
        pprint(report)
    else:
        _emit(
            {
                "ok": report.ok,
                "checked": report.checked,
                "counterexamples": [{"bound": c.bound, **c.values} for c in report.counterexamples],
            },
            "json",
        )
    if not report.ok:
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptest", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str, formats=("text", "json", "csv")) -> argparse.ArgumentParser:
        command = sub.add_parser(name, help=help_text)
        command.add_argument("--format", choices=formats, default="text")
        command.set_defaults(handler=handler)
        return command

    gen = add("gen", cmd_gen, "generate a hard instance", ("text", "json"))
    gen.add_argument("family", choices=[family.value for family in Family])
    gen.add_argument("--n", type=int)
    gen.add_argument("--m", type=int)
    gen.add_argument("--k", type=int)
    gen.add_argument("--encoded", action="store_true", help="binary-encode Inv instances")
    gen.add_argument("--seed", type=int, default=config.default_seed())
    gen.add_argument("--out", type=Path, default=config.default_out_dir())

    run = add("run", cmd_run, "run a tester once", ("text", "json"))
    run.add_argument("tester", choices=sorted(TESTERS))
    run.add_argument("dist", type=Path)
    run.add_argument("--epsilon", required=True)
    run.add_argument("--param", action="append", metavar="NAME=VALUE")
    run.add_argument("--seed", type=int, default=config.default_seed())
    run.add_argument("--log", type=Path, help="write the JSON-lines query log here")

    estimate = add("estimate", cmd_estimate, "estimate a tester's acceptance probability")
    estimate.add_argument("tester", choices=sorted(TESTERS))
    estimate.add_argument("dist", type=Path)
    estimate.add_argument("--epsilon", required=True)
    estimate.add_argument("--trials", type=int, default=1000)
    estimate.add_argument("--param", action="append", metavar="NAME=VALUE")
    estimate.add_argument("--seed", type=int, default=config.default_seed())
    estimate.add_argument("--workers", type=int, default=config.default_workers())
    estimate.add_argument("--audit-model", help="re-validate every trial log under this model")

    experiment = add("experiment", cmd_experiment, "run an experiment config")
    experiment.add_argument("config", type=Path)
    experiment.add_argument("--workers", type=int, default=None)

    distance = add("emd", cmd_emd, "exact earth mover's distance")
    distance.add_argument("p", type=Path)
    distance.add_argument("q", type=Path)

    code = add("code", cmd_code, "print a systematic code")
    code.add_argument("m", type=int)
    code.add_argument("n", type=int)
    code.add_argument("--relaxed", action="store_true")

    validate = add("validate-log", cmd_validate_log, "check a query log against a model", ("text", "json", "csv"))
    validate.add_argument("log", type=Path)
    validate.add_argument("--model", required=True, help="e.g. forward-only, weak:2, strong:3")
    validate.add_argument("--s", type=int, required=True)
    validate.add_argument("--n", type=int, required=True)

    appendix = add("appendix", cmd_appendix, "sweep the analytic inequalities", ("text", "json"))
    appendix.add_argument("--m-max", type=int, default=200)
    appendix.add_argument("--n-max", type=int, default=40)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, KeyError, OSError, BoundViolation) as exc:
        print(f"{RED}error:{RESET} {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
