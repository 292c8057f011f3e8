"""Command-line front end.

Subcommands:
  verify            verify a program file under fia / sound / combinable
  check-derivation  re-validate a serialized derivation document
  oracle            brute-force queries: footprint / combinable / entail / minimal
  laws              run the separation-algebra law suite on a universe

Exit codes: 0 verified/accepted/true, 1 rejected/false, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import algebra, oracle
from .algorithms import COMBINABLE, FIA, SOUND
from .assertions import Wand, format_assertion
from .package_logic import CheckFailure, check_derivation, check_derivation_lifted
from .parser import (
    ParseError,
    parse_assertion_text,
    parse_program_text,
    parse_state_text,
    parse_universe_text,
)
from .serialization import (
    derivation_doc_parse,
    dumps_canonical,
    state_to_text,
)
from .states import BudgetExceeded
from .universe import Universe, UniverseError
from .verifier import ProgramError, run


class CliError(Exception):
    pass


def load_universe(path: str) -> Universe:
    return parse_universe_text(Path(path).read_text())


def load_program(path: str):
    p = parse_program_text(Path(path).read_text())
    if not p.universe_ref:
        raise CliError(f"{path}: program declares no universe")
    upath = Path(path).parent / p.universe_ref
    u = parse_universe_text(upath.read_text())
    return p.__class__(p.universe_ref, p.methods, u)


def identity_store(u: Universe) -> dict:
    """Universe-level assertions may name references directly as variables."""
    return {r: r for r in u.refs}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wandpack",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="verify a program file")
    pv.add_argument("file")
    pv.add_argument("--algorithm", choices=[FIA, SOUND, COMBINABLE], default=SOUND)
    pv.add_argument("--emit-derivation", metavar="PATH")
    pv.add_argument("--json", metavar="PATH")
    pv.add_argument("--audit", action="store_true", help="re-check every packaged footprint with the oracle")
    pv.add_argument("--threads", type=int, default=1)

    pc = sub.add_parser("check-derivation", help="re-validate a derivation document")
    pc.add_argument("file")

    po = sub.add_parser("oracle", help="brute-force semantic queries")
    osub = po.add_subparsers(dest="query", required=True)
    of = osub.add_parser("footprint", help="is a state a footprint of a wand")
    of.add_argument("--universe", required=True)
    of.add_argument("--wand", required=True)
    of.add_argument("--state", required=True)
    of.add_argument("--kind", choices=[oracle.STANDARD, oracle.COMBINABLE])
    oc = osub.add_parser("combinable", help="is an assertion combinable")
    oc.add_argument("--universe", required=True)
    oc.add_argument("--assertion", required=True)
    oe = osub.add_parser("entail", help="does one assertion entail another")
    oe.add_argument("--universe", required=True)
    oe.add_argument("--lhs", required=True)
    oe.add_argument("--rhs", required=True)
    om = osub.add_parser("minimal", help="minimal footprints of a wand")
    om.add_argument("--universe", required=True)
    om.add_argument("--wand", required=True)
    om.add_argument("--kind", choices=[oracle.STANDARD, oracle.COMBINABLE])
    om.add_argument("--compatible-only", action="store_true")

    pl = sub.add_parser("laws", help="run the algebra law suite on a universe")
    pl.add_argument("file")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ParseError, UniverseError, CliError, ProgramError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "check-derivation":
        return _cmd_check_derivation(args)
    if args.command == "oracle":
        return _cmd_oracle(args)
    if args.command == "laws":
        return _cmd_laws(args)
    raise CliError(f"unknown command {args.command!r}")


def _cmd_verify(args) -> int:
    program = load_program(args.file)
    started = time.monotonic()
    report = run(
        program,
        args.algorithm,
        audit=args.audit,
        threads=max(1, args.threads),
    )
    report.elapsed_seconds = time.monotonic() - started
    doc = report.to_json()
    if args.json:
        Path(args.json).write_text(dumps_canonical(doc))
    if args.emit_derivation:
        derivs = [p["derivation"] for m in doc["methods"] for p in m["packages"] if p["derivation"]]
        Path(args.emit_derivation).write_text(dumps_canonical(derivs))
    for m in report.methods:
        for s in m.statements:
            mark = "ok" if s.status == "ok" else "ERROR"
            line = f"{m.name} {s.pos[0]}:{s.pos[1]} {s.kind}: {mark} ({s.worlds} worlds)"
            print(line)
            if s.error:
                print(f"  {s.error['message']}")
                if s.error.get("world"):
                    print(f"  in world: {s.error['world']['state']}")
    verdict = "VERIFIED" if report.verified else "REJECTED"
    print(f"{verdict} ({args.algorithm}, {report.elapsed_seconds:.2f}s)")
    if args.audit:
        print(f"audit violations: {report.audit_violations}")
    return 0 if report.verified else 1


def _cmd_check_derivation(args) -> int:
    payload = json.loads(Path(args.file).read_text())
    docs = payload if isinstance(payload, list) else [payload]
    if not docs:
        print("error: no derivations in file", file=sys.stderr)
        return 2
    for i, doc in enumerate(docs):
        u, store, wand, conf, deriv = derivation_doc_parse(doc)
        checker = check_derivation_lifted if doc["kind"] == "combinable" else check_derivation
        try:
            final = checker(conf, deriv, u, store)
        except CheckFailure as e:
            print(f"derivation {i}: REJECTED: {e}")
            return 1
        from .package_logic import extract_footprint

        fp = extract_footprint(conf.context.outer, final.outer)
        print(f"derivation {i}: ACCEPTED, footprint {state_to_text(fp)}")
    return 0


def _cmd_oracle(args) -> int:
    u = load_universe(args.universe)
    store = identity_store(u)
    p = oracle.plan(u)
    if args.query == "footprint":
        wand = _parse_wand(args.wand)
        kind = args.kind or (oracle.COMBINABLE if wand.combinable else oracle.STANDARD)
        sigma = parse_state_text(args.state)
        ok = oracle.is_footprint(sigma, wand, kind, p, store)
        print("footprint" if ok else "not a footprint")
        return 0 if ok else 1
    if args.query == "combinable":
        a = parse_assertion_text(args.assertion)
        ok, cex = oracle.check_combinable(a, p, store)
        if ok:
            print("combinable")
            return 0
        fp, fq, s = cex
        print(f"not combinable: p={fp}, q={fq}, state {state_to_text(s)}")
        return 1
    if args.query == "entail":
        a = parse_assertion_text(args.lhs)
        b = parse_assertion_text(args.rhs)
        ok = oracle.check_entailment(a, b, p, store)
        print("entails" if ok else "does not entail")
        return 0 if ok else 1
    if args.query == "minimal":
        wand = _parse_wand(args.wand)
        kind = args.kind or (oracle.COMBINABLE if wand.combinable else oracle.STANDARD)
        fps = oracle.minimal_footprints(wand, kind, p, store, compatible_with_lhs=args.compatible_only)
        for s in fps:
            print(state_to_text(s))
        return 0 if fps else 1
    raise CliError(f"unknown oracle query {args.query!r}")


def _parse_wand(text: str) -> Wand:
    a = parse_assertion_text(text)
    if not isinstance(a, Wand):
        raise CliError(f"not a wand: {format_assertion(a)}")
    return a


def _cmd_laws(args) -> int:
    u = load_universe(args.file)
    started = time.monotonic()
    reports = algebra.check_axioms(u)
    elapsed = time.monotonic() - started
    for r in reports:
        mark = "pass" if r.passed else "FAIL"
        line = f"{r.axiom}: {mark}"
        if not r.passed:
            states = "; ".join(state_to_text(s) for s in r.counterexample or ())
            line += f" ({r.detail}; counterexample: {states})"
        print(line)
    print(f"{len(reports)} axioms checked in {elapsed:.2f}s")
    return 0 if algebra.all_pass(reports) else 1


if __name__ == "__main__":
    sys.exit(main())
