"""Why per-case footprint inference is unsound, end to end.

The wand

    acc(x.f) * (x.f == y || x.f == z)  --*  acc(x.f) * acc(x.f.g)

promises acc(x.f.g) for *every* state satisfying its left-hand side.  If
x.f points to y the footprint must own y.g; if it points to z, z.g.  A
correct footprint therefore owns both.  The per-case baseline infers one
footprint per case and keeps whichever permission the case did not need —
and that lets a program prove false.
"""

from pathlib import Path

from wandpack import (
    is_footprint,
    package_fia,
    package_sound,
    parse_assertion_text,
    parse_state_text,
    plan,
)
from wandpack.cli import load_program
from wandpack.parser import format_state, parse_universe_text
from wandpack.verifier import run

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

u = parse_universe_text((CORPUS / "pointers.universe").read_text())
store = {"x": "x", "y": "y", "z": "z"}
wand = parse_assertion_text("acc(x.f) * (x.f == y || x.f == z) --* acc(x.f) * acc(x.f.g)")
outer = parse_state_text("{x.f @ 1 = y, y.g @ 1 = 0, z.g @ 1 = 0}")

print("== packaging in", format_state(outer))

fia = package_fia(outer, wand, (), store, u)
print("\nper-case inference:")
for case, fp in fia.case_footprints:
    valid = is_footprint(fp, wand, "standard", plan(u), store)
    print(f"  case {format_state(case)}")
    print(f"    footprint {format_state(fp)}   oracle says valid: {valid}")

sound = package_sound(outer, wand, (), store, u)
print("\nwitness-set algorithm:")
print(f"  footprint {format_state(sound.footprint)}   oracle says valid:",
      is_footprint(sound.footprint, wand, "standard", plan(u), store))

print("\n== the proof-of-false program (corpus/proof_of_false.wnd)")
program = load_program(str(CORPUS / "proof_of_false.wnd"))
for alg in ("fia", "sound"):
    report = run(program, alg)
    verdict = "VERIFIED (including `assert false`!)" if report.verified else "REJECTED"
    print(f"  --algorithm {alg}: {verdict}")
