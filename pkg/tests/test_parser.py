import pytest

from wandpack.assertions import Imp, OrA, Pure, Star, Wand, format_assertion
from wandpack.exprs import Not, format_expr
from wandpack.parser import (
    ParseError,
    format_state,
    format_universe,
    parse_assertion_text,
    parse_expr_text,
    parse_program_text,
    parse_state_text,
    parse_universe_text,
)
from wandpack.program import format_program

from conftest import U1_TEXT, U2_TEXT


EXPRS = [
    "x",
    "null",
    "true",
    "x.f",
    "x.f.g",
    "x.f == y",
    "x.f != y",
    "!x.b",
    "x.b && y.b || z.b",
    "x.b ==> y.b",
    "x.f == y ? 1 : 0",
    "perm(x.f) == write",
    "perm(x.f) == 1/2",
    "perm(x.f) == none",
    "ref(x) == x.f",
]


@pytest.mark.parametrize("src", EXPRS)
def test_expr_round_trip(src):
    e = parse_expr_text(src)
    assert parse_expr_text(format_expr(e)) == e


ASSERTIONS = [
    "acc(x.f)",
    "acc(x.f, 1/2)",
    "acc(x.f) * acc(y.g)",
    "acc(x.f) * (x.f == y || x.f == z)",
    "x.b ==> acc(x.f)",
    "acc(y.g) || acc(z.g)",
    "acc(x.f) * (x.f == y || x.f == z) --* acc(x.f) * acc(x.f.g)",
    "acc(x.f, 1/2) --*c acc(x.g)",
    "acc(x.b, 1/2) --* acc(x.b, 1/2) * (x.b ==> acc(x.f))",
    "P(x)",
    "acc(P(x), 1/2)",
    "acc(x.f) --* P(x)",
    "false",
]


@pytest.mark.parametrize("src", ASSERTIONS)
def test_assertion_round_trip(src):
    a = parse_assertion_text(src)
    assert parse_assertion_text(format_assertion(a)) == a


def test_disjunction_is_assertion_level():
    a = parse_assertion_text("x.f == y || x.f == z")
    assert isinstance(a, OrA)
    assert isinstance(a.left, Pure) and isinstance(a.right, Pure)


def test_conditional_assertion_desugars():
    a = parse_assertion_text("x.f == y ? acc(y.g) : acc(z.g)")
    assert isinstance(a, Star)
    assert isinstance(a.left, Imp) and isinstance(a.right, Imp)
    assert isinstance(a.right.guard, Not)


def test_wand_binds_loosest_and_right_assoc():
    a = parse_assertion_text("acc(x.f) --* acc(x.g) --* acc(x.h)")
    assert isinstance(a, Wand)
    assert isinstance(a.rhs, Wand)


def test_guard_must_be_pure():
    with pytest.raises(ParseError):
        parse_assertion_text("acc(x.f) ==> acc(x.g)")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_assertion_text("acc(x.f) *")
    assert exc.value.line == 1
    assert exc.value.col > 1


def test_universe_round_trip():
    for text in (U1_TEXT, U2_TEXT):
        u = parse_universe_text(text)
        assert parse_universe_text(format_universe(u)) == u


def test_universe_with_predicate_round_trip():
    u = parse_universe_text(
        """
        universe v1
        granularity 2
        refs x, y
        loc x.f: int {0}
        loc y.f: int {0}
        pred Cell(r) = acc(r.f)
        """
    )
    assert parse_universe_text(format_universe(u)) == u
    assert "Cell" in u.predicates


def test_universe_rejects_recursion():
    with pytest.raises(ParseError):
        parse_universe_text(
            """
            universe v1
            granularity 2
            refs x
            loc x.f: int {0}
            pred P(r) = acc(r.f) * P(r)
            """
        )


def test_universe_rejects_mutual_recursion():
    with pytest.raises(ParseError):
        parse_universe_text(
            """
            universe v1
            granularity 2
            refs x
            loc x.f: int {0}
            pred P(r) = Q(r)
            pred Q(r) = P(r)
            """
        )


def test_universe_rejects_wand_in_predicate():
    with pytest.raises(ParseError):
        parse_universe_text(
            """
            universe v1
            granularity 2
            refs x
            loc x.f: int {0}
            loc x.g: int {0}
            pred P(r) = acc(r.f) --* acc(r.g)
            """
        )


def test_universe_rejects_null_location():
    with pytest.raises(ParseError):
        parse_universe_text(
            """
            universe v1
            granularity 2
            refs x
            loc null.f: int {0}
            """
        )


STATES = [
    "{}",
    "{x.f @ 1 = y}",
    "{x.f @ 1/2 = y, y.g @ 1 = 0}",
    "{x.f @ 0 = y}",
    "{Cell(x) @ 1/2}",
    "{wand[acc(x.f) --* acc(x.g)] @ 1}",
]


@pytest.mark.parametrize("src", STATES)
def test_state_round_trip(src):
    s = parse_state_text(src)
    assert parse_state_text(format_state(s)) == s


def test_program_round_trip(corpus_dir):
    # positions shift when comments are stripped, so compare the printed
    # fixpoint rather than the raw ASTs
    for name in ("proof_of_false.wnd", "two_footprints.wnd", "preds.wnd", "combinable.wnd", "basic.wnd"):
        src = (corpus_dir / name).read_text()
        printed = format_program(parse_program_text(src))
        assert format_program(parse_program_text(printed)) == printed


def test_empty_method_parses_to_noop_body():
    p = parse_program_text(
        """
        program v1
        method nothing(x: Ref) {
        }
        """
    )
    assert p.methods[0].body == ()


def test_apply_of_non_wand_is_type_error():
    with pytest.raises(ParseError):
        parse_program_text(
            """
            program v1
            method m(x: Ref) {
              apply acc(x.f)
            }
            """
        )


def test_print_parse_identity_on_random_assertions():
    import random

    import gen

    rng = random.Random(424242)
    for i in range(600):
        u = gen.random_universe(rng)
        wand = gen.random_wand(rng, u, combinable=i % 2 == 1)
        for side in (wand.lhs, wand.rhs, wand):
            assert parse_assertion_text(format_assertion(side)) == side


def test_statement_positions():
    p = parse_program_text(
        """program v1
method m(x: Ref)
{
  inhale acc(x.f)
  assert acc(x.f)
}
"""
    )
    stmts = p.methods[0].body
    assert stmts[0].pos == (4, 3)
    assert stmts[1].pos == (5, 3)
