"""Command-line frontend: ``kohnlab {type,run,verify,suite}``.

Every invocation prints one JSON report on stdout (prose with ``--human``)
and exits with a fixed code:

==  ==========================================
0   success
2   unreadable or malformed input file
3   colength not certified finite
4   generic draws exhausted
5   resource budget exhausted
6   certificate rejected
7   suite reported a failure
==  ==========================================

Reports hold no wall-clock data unless ``--timings`` is given, so the same
inputs and seed always produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from .certificate import DOMAIN_SCHEMA, Certificate, SpecialDomain, fmt_rational, verify_certificate
from .engine import DegenerateDomain, DomainRejected, EngineConfig, GenericityExhausted, run
from .groebner import Budget, ResourceLimitExceeded
from .invariants import MAX_DIMENSION, DimensionTooLarge, NotCertifiedFinite, invariant_report
from .poly import ParseError, parse
from .verifiers import DEFAULT_CASES, SUITES, run_suite

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_COLENGTH = 3
EXIT_GENERICITY = 4
EXIT_BUDGET = 5
EXIT_REJECT = 6
EXIT_SUITE = 7


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# domain files


def _position(text: str, offset: int):
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def load_domain(path: str) -> SpecialDomain:
    """Read a domain file, failing with a line/column diagnostic."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"{path}: cannot read: {exc.strerror or exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    return domain_from_json(data, path, text)


def domain_from_json(data, path: str = "<domain>", text: str = "") -> SpecialDomain:
    def fail(msg):
        raise CliError(EXIT_PARSE, f"{path}: {msg}")

    if not isinstance(data, dict):
        fail("top level must be an object")
    if data.get("schema") != DOMAIN_SCHEMA:
        fail(f"schema must be {DOMAIN_SCHEMA!r}, got {data.get('schema')!r}")
    n = data.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        fail("n must be a positive integer")
    if n > MAX_DIMENSION:
        fail(f"n={n} exceeds the supported maximum {MAX_DIMENSION}")
    names = data.get("vars", [f"z{i + 1}" for i in range(n)])
    if not isinstance(names, list) or len(names) != n or not all(isinstance(v, str) and v for v in names):
        fail(f"vars must list {n} variable names")
    if len(set(names)) != n:
        fail("variable names must be distinct")
    gens = data.get("generators")
    if not isinstance(gens, list) or not gens or not all(isinstance(g, str) for g in gens):
        fail("generators must be a nonempty list of polynomial strings")
    polys = []
    for j, g in enumerate(gens):
        try:
            polys.append(parse(g, n, names))
        except ParseError as exc:
            where = text.find(json.dumps(g)) if text else -1
            if where >= 0:
                line, col = _position(text, where + 1 + exc.position)
                fail(f"line {line}, column {col}: generator {j + 1}: {exc}")
            fail(f"generator {j + 1}: {exc}")
    return SpecialDomain(n, tuple(polys), tuple(names))


# ---------------------------------------------------------------------------
# commands


def _budget(args) -> Budget:
    return Budget(max_pairs=args.max_spairs, max_degree=args.max_degree)


def cmd_type(args) -> dict:
    dom = load_domain(args.domain)
    try:
        rep = invariant_report(list(dom.generators), budget=_budget(args))
    except NotCertifiedFinite as exc:
        raise CliError(EXIT_COLENGTH, f"colength not certified finite: {exc}")
    result = rep.to_json()
    if args.out:
        _write_json(args.out, result)
    return {"result": result, "artifacts": [args.out] if args.out else []}


def cmd_run(args) -> dict:
    dom = load_domain(args.domain)
    config = EngineConfig(seed=args.seed, retries=args.retries, budget=_budget(args))
    try:
        cert = run(dom, config)
    except DomainRejected as exc:
        code = EXIT_COLENGTH if "colength" in str(exc) else EXIT_PARSE
        raise CliError(code, f"not a special domain: {exc}")
    except (GenericityExhausted, DegenerateDomain) as exc:
        raise CliError(EXIT_GENERICITY, str(exc))
    Path(args.out).write_text(cert.dumps())
    terminal = cert.node(cert.terminal)
    return {
        "result": {
            "nodes": len(cert.nodes),
            "terminal": terminal.id,
            "terminal_kind": terminal.kind,
            "terminal_epsilon": fmt_rational(cert.terminal_epsilon),
        },
        "artifacts": [args.out],
    }


def cmd_verify(args) -> dict:
    dom = load_domain(args.domain)
    try:
        text = Path(args.certificate).read_text()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"{args.certificate}: cannot read: {exc.strerror or exc}")
    try:
        cert = Certificate.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{args.certificate}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{args.certificate}: malformed certificate: {exc}")
    report = verify_certificate(cert, dom, _budget(args))
    out = {"result": report.to_json(), "artifacts": []}
    if not report.ok:
        out["exit_code"] = EXIT_REJECT
        out["error"] = f"rejected at {report.node}: {report.reason}"
    return out


def cmd_suite(args) -> dict:
    names = list(SUITES) if args.name == "all" else [args.name]
    results = [run_suite(s, args.seed, args.cases, args.jobs) for s in names]
    body = [r.to_json(args.timings) for r in results]
    result = body[0] if len(body) == 1 else {"suites": body, "ok": all(r.ok for r in results)}
    if args.out:
        _write_json(args.out, result)
    out = {"result": result, "artifacts": [args.out] if args.out else []}
    failed = [r.name for r in results if not r.ok]
    if failed:
        out["exit_code"] = EXIT_SUITE
        out["error"] = f"theorem-violation failures in: {', '.join(failed)}"
    return out


def _write_json(path: str, data) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed of every random stream (default 0)")
    common.add_argument("--max-degree", type=int, default=Budget().max_degree,
                        help="largest total degree allowed during Groebner computations")
    common.add_argument("--max-spairs", type=int, default=Budget().max_pairs,
                        help="largest number of S-pairs one Groebner computation may process")
    common.add_argument("--retries", type=int, default=EngineConfig().retries,
                        help="generic draws tried before giving up")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for suites")
    common.add_argument("--human", action="store_true", help="print prose instead of JSON")
    common.add_argument("--timings", action="store_true", help="add wall-clock timings to the report")

    parser = argparse.ArgumentParser(prog="kohnlab", description="Effective Kohn multipliers on special domains.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("type", parents=[common], help="invariants s, q, p and the type of a domain")
    p.add_argument("domain")
    p.add_argument("--out", help="also write the invariant report here")
    p.set_defaults(func=cmd_type)

    p = sub.add_parser("run", parents=[common], help="run the multiplier engine and write a certificate")
    p.add_argument("domain")
    p.add_argument("--out", default="cert.json", help="certificate path (default cert.json)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", parents=[common], help="replay a certificate against a domain")
    p.add_argument("certificate")
    p.add_argument("domain")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("suite", parents=[common], help="run a property suite")
    p.add_argument("name", choices=list(SUITES) + ["all"])
    p.add_argument("--cases", type=int, default=None,
                   help="cases per suite (default: " + ", ".join(f"{k} {v}" for k, v in DEFAULT_CASES.items()) + ")")
    p.add_argument("--out", help="also write the suite result here")
    p.set_defaults(func=cmd_suite)
    return parser


def _inputs(args) -> dict:
    skip = {"func", "human", "timings", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _human(report: dict) -> str:
    lines = [f"kohnlab {report['command']}: {report['outcome']} (exit {report['exit_code']})"]
    if "error" in report:
        lines.append(f"error: {report['error']}")
    result = report.get("result")
    if isinstance(result, dict):
        for k, v in result.items():
            if isinstance(v, (list, dict)) and len(json.dumps(v)) > 120:
                v = f"<{len(v)} entries>"
            lines.append(f"  {k}: {v}")
    for a in report.get("artifacts", []):
        lines.append(f"  wrote {a}")
    return "\n".join(lines)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for flag in ("max_degree", "max_spairs", "retries", "jobs"):
        if getattr(args, flag) < 1:
            parser.error(f"--{flag.replace('_', '-')} must be at least 1")
    start = time.perf_counter()
    report = {"command": args.command, "inputs": _inputs(args)}
    try:
        out = args.func(args)
        code = out.pop("exit_code", EXIT_OK)
        report.update(out)
    except CliError as exc:
        code = exc.code
        report["error"] = str(exc)
        report["artifacts"] = []
    except ResourceLimitExceeded as exc:
        code = EXIT_BUDGET
        report["error"] = f"resource budget exhausted: {exc}"
        report["artifacts"] = []
    except DimensionTooLarge as exc:
        code = EXIT_PARSE
        report["error"] = str(exc)
        report["artifacts"] = []
    report["outcome"] = "success" if code == EXIT_OK else "failure"
    report["exit_code"] = code
    if args.timings:
        report["timings"] = {"wall_s": round(time.perf_counter() - start, 3)}
    if args.human:
        print(_human(report))
    else:
        print(json.dumps(report, indent=1, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
