"""Exhaustive differential check on a tiny universe.

Unlike the seeded random sweeps, this enumerates *every* well-formed wand
over a small atom pool and packages it in several outer states; each
success must be an oracle-valid footprint, and the restricted wand must
entail the standard one.  Small enough to run on every test invocation.
"""

import itertools
from fractions import Fraction

import wandpack.oracle as orc
from wandpack.algorithms import package_combinable, package_sound
from wandpack.assertions import Acc, Imp, OrA, Pure, Star, Wand, wf
from wandpack.exprs import Eq, FieldAcc, Lit, Var
from wandpack.parser import parse_state_text, parse_universe_text

HALF = Fraction(1, 2)

U = parse_universe_text(
    """
    universe v1
    granularity 2
    refs x
    loc x.f: int {0}
    loc x.g: int {0}
    """
)
STORE = {"x": "x"}

ATOMS = [
    Acc(Var("x"), "f", Fraction(1)),
    Acc(Var("x"), "f", HALF),
    Acc(Var("x"), "g", Fraction(1)),
    Pure(Lit(False)),
    Pure(Eq(FieldAcc(Var("x"), "f"), Lit(0))),
]
GUARD = Eq(FieldAcc(Var("x"), "f"), Lit(0))


def _pool():
    pool = list(ATOMS)
    for a, b in itertools.product(ATOMS, repeat=2):
        pool.append(Star(a, b))
        pool.append(OrA(a, b))
    for a in ATOMS:
        pool.append(Imp(GUARD, a))
    return pool


OUTERS = [
    parse_state_text("{x.f @ 1 = 0, x.g @ 1 = 0}"),
    parse_state_text("{x.g @ 1 = 0, x.f @ 1/2 = 0}"),
]


def test_every_small_wand_packages_soundly():
    plan = orc.plan(U)
    pool = _pool()
    runs = successes = 0
    for lhs, rhs in itertools.product(pool, repeat=2):
        w = Wand(lhs, rhs, False)
        if not wf(w):
            continue
        wc = Wand(lhs, rhs, True)
        for outer in OUTERS:
            for kind, fn, ww in (("standard", package_sound, w), ("combinable", package_combinable, wc)):
                runs += 1
                out = fn(outer, ww, (), STORE, U)
                if out.success:
                    successes += 1
                    assert orc.is_footprint(out.footprint, ww, kind, plan, STORE), (
                        kind,
                        ww,
                        outer,
                        out.footprint,
                    )
    assert runs > 3000 and successes > 1000


def test_restricted_wand_entails_standard_exhaustively():
    plan = orc.plan(U)
    pool = _pool()
    checked = 0
    for i, (lhs, rhs) in enumerate(itertools.product(pool, repeat=2)):
        if i % 17:  # stride for runtime; still hundreds of wands
            continue
        w = Wand(lhs, rhs, False)
        if not wf(w):
            continue
        assert orc.check_entailment(Wand(lhs, rhs, True), w, plan, STORE)
        checked += 1
    assert checked > 60
