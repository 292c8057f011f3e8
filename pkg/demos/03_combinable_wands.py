"""Fractions of wands: why standard wands cannot be recombined, and how
the restricted interpretation fixes it.

A state with full x.f satisfies acc(x.f, 1/2) --* acc(x.g) trivially: it
is incompatible with every state that owns half of x.f.  Scaled down,
that incompatibility evaporates — half of that footprint plus half of an
honest one is not a footprint at all.  The restricted (combinable) wand
pre-shrinks each footprint so its scaled copies stay compatible,
closing the loophole.
"""

from fractions import Fraction
from pathlib import Path

import wandpack.states as st
from wandpack import check_combinable, is_footprint, parse_assertion_text, parse_state_text, plan, restrict
from wandpack.parser import format_state, parse_universe_text

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
HALF = Fraction(1, 2)

u = parse_universe_text((CORPUS / "mixed.universe").read_text())
store = {"x": "x"}
p = plan(u)

w = parse_assertion_text("acc(x.f, 1/2) --* acc(x.g)")
wc = parse_assertion_text("acc(x.f, 1/2) --*c acc(x.g)")
sigma_f = parse_state_text("{x.f @ 1 = 0}")
sigma_g = parse_state_text("{x.g @ 1 = 0}")

print("standard wand", "acc(x.f, 1/2) --* acc(x.g)")
print("  sigma_f footprint (incompatibility):", is_footprint(sigma_f, w, "standard", p, store))
print("  sigma_g footprint (funds the RHS):  ", is_footprint(sigma_g, w, "standard", p, store))
half_half = st.add(st.mult(HALF, sigma_f), st.mult(HALF, sigma_g))
print("  half of each combined:", format_state(half_half),
      "->", is_footprint(half_half, w, "standard", p, store))
ok, cex = check_combinable(w, p, store)
print("  combinable:", ok, "counterexample:", None if ok else format_state(cex[2]))

print("\nrestricted wand", "acc(x.f, 1/2) --*c acc(x.g)")
sigma_a = parse_state_text("{x.f @ 1/2 = 0}")
print("  restrict(sigma_a, sigma_f) =", format_state(restrict(sigma_a, sigma_f)),
      "(capped so scaled copies stay compatible)")
print("  sigma_f footprint now:", is_footprint(sigma_f, wc, "combinable", p, store))
print("  sigma_g footprint now:", is_footprint(sigma_g, wc, "combinable", p, store))
ok, _ = check_combinable(wc, p, store)
print("  combinable:", ok)
