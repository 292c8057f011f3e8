"""Heap-dependent expressions and their evaluation.

Expressions evaluate against a partial heap and a store of local
variables.  Dereferencing a location the heap does not frame raises
``Unframed`` — callers decide whether that is a falsity (satisfaction) or
a hard error (well-formedness, verification).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Union

from .universe import BOOL, INT, NULL, REF, FieldLoc, Universe, Value

Store = Mapping[str, Value]

PERM = "perm"


class ExprError(Exception):
    """Static expression problem: unknown variable, bad operand types."""


class Unframed(Exception):
    """A dereference whose location has no heap entry (or a null base)."""

    def __init__(self, description: str):
        super().__init__(description)
        self.description = description


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: Union[Value, Fraction]


@dataclass(frozen=True)
class FieldAcc:
    base: "Expr"
    field: str


@dataclass(frozen=True)
class Eq:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or" | "implies"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Ite:
    cond: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class PermOf:
    """Permission introspection: the mask amount held for base.field."""

    base: "Expr"
    field: str


Expr = Union[Var, Lit, FieldAcc, Eq, Not, BoolOp, Ite, PermOf]


def eval_expr(
    e: Expr,
    heap: Mapping[FieldLoc, Value],
    store: Store,
    mask: Optional[Mapping] = None,
) -> Union[Value, Fraction]:
    """Evaluate an expression; raises Unframed on unbacked dereferences.

    ``mask`` supplies the permission table for ``perm`` introspection and
    is only available at verifier level.
    """
    if isinstance(e, Var):
        if e.name not in store:
            raise ExprError(f"unbound variable {e.name}")
        return store[e.name]
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, FieldAcc):
        base = eval_expr(e.base, heap, store, mask)
        if not isinstance(base, str):
            raise ExprError(f"field access on non-reference value {base!r}")
        if base == NULL:
            raise Unframed(f"null dereference at .{e.field}")
        loc = FieldLoc(base, e.field)
        if loc not in heap:
            raise Unframed(f"no heap value for {loc}")
        return heap[loc]
    if isinstance(e, Eq):
        return eval_expr(e.left, heap, store, mask) == eval_expr(e.right, heap, store, mask)
    if isinstance(e, Not):
        return not _as_bool(eval_expr(e.arg, heap, store, mask))
    if isinstance(e, BoolOp):
        lv = _as_bool(eval_expr(e.left, heap, store, mask))
        if e.op == "and":
            return lv and _as_bool(eval_expr(e.right, heap, store, mask))
        if e.op == "or":
            return lv or _as_bool(eval_expr(e.right, heap, store, mask))
        if e.op == "implies":
            return (not lv) or _as_bool(eval_expr(e.right, heap, store, mask))
        raise ExprError(f"unknown boolean operator {e.op}")
    if isinstance(e, Ite):
        if _as_bool(eval_expr(e.cond, heap, store, mask)):
            return eval_expr(e.then, heap, store, mask)
        return eval_expr(e.other, heap, store, mask)
    if isinstance(e, PermOf):
        if mask is None:
            raise ExprError("perm() is only available at verifier level")
        base = eval_expr(e.base, heap, store, mask)
        if not isinstance(base, str) or base == NULL:
            raise Unframed(f"perm() on non-reference or null base {base!r}")
        loc = FieldLoc(base, e.field)
        amt = Fraction(0)
        for rid, a in mask.items() if isinstance(mask, Mapping) else mask:
            if rid == loc:
                amt = a
        return amt
    raise ExprError(f"unknown expression node {e!r}")


def _as_bool(v) -> bool:
    if not isinstance(v, bool):
        raise ExprError(f"expected a boolean, got {v!r}")
    return v


def eval_bool(e: Expr, heap, store: Store, mask=None) -> bool:
    return _as_bool(eval_expr(e, heap, store, mask))


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Lit):
        return set()
    if isinstance(e, (FieldAcc, PermOf)):
        return free_vars(e.base)
    if isinstance(e, Eq):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Not):
        return free_vars(e.arg)
    if isinstance(e, BoolOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Ite):
        return free_vars(e.cond) | free_vars(e.then) | free_vars(e.other)
    raise ExprError(f"unknown expression node {e!r}")


def substitute(e: Expr, binding: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return binding.get(e.name, e)
    if isinstance(e, Lit):
        return e
    if isinstance(e, FieldAcc):
        return FieldAcc(substitute(e.base, binding), e.field)
    if isinstance(e, PermOf):
        return PermOf(substitute(e.base, binding), e.field)
    if isinstance(e, Eq):
        return Eq(substitute(e.left, binding), substitute(e.right, binding))
    if isinstance(e, Not):
        return Not(substitute(e.arg, binding))
    if isinstance(e, BoolOp):
        return BoolOp(e.op, substitute(e.left, binding), substitute(e.right, binding))
    if isinstance(e, Ite):
        return Ite(
            substitute(e.cond, binding),
            substitute(e.then, binding),
            substitute(e.other, binding),
        )
    raise ExprError(f"unknown expression node {e!r}")


def contains_perm(e: Expr) -> bool:
    if isinstance(e, PermOf):
        return True
    if isinstance(e, (Var, Lit)):
        return False
    if isinstance(e, FieldAcc):
        return contains_perm(e.base)
    if isinstance(e, Eq):
        return contains_perm(e.left) or contains_perm(e.right)
    if isinstance(e, Not):
        return contains_perm(e.arg)
    if isinstance(e, BoolOp):
        return contains_perm(e.left) or contains_perm(e.right)
    if isinstance(e, Ite):
        return any(contains_perm(x) for x in (e.cond, e.then, e.other))
    return False


def infer_type(e: Expr, u: Universe, var_types: Mapping[str, str]) -> str:
    """Type an expression (ref/int/bool/perm) against a universe."""
    if isinstance(e, Var):
        if e.name not in var_types:
            raise ExprError(f"unbound variable {e.name}")
        return var_types[e.name]
    if isinstance(e, Lit):
        if isinstance(e.value, Fraction):
            return PERM
        if isinstance(e.value, bool):
            return BOOL
        if isinstance(e.value, int):
            return INT
        return REF
    if isinstance(e, FieldAcc):
        bt = infer_type(e.base, u, var_types)
        if bt != REF:
            raise ExprError(f"field access base must be a reference, got {bt}")
        ft = u.field_type(e.field)
        if ft is None:
            raise ExprError(f"unknown field {e.field}")
        return ft
    if isinstance(e, PermOf):
        bt = infer_type(e.base, u, var_types)
        if bt != REF:
            raise ExprError(f"perm() base must be a reference, got {bt}")
        if u.field_type(e.field) is None:
            raise ExprError(f"unknown field {e.field}")
        return PERM
    if isinstance(e, Eq):
        lt = infer_type(e.left, u, var_types)
        rt = infer_type(e.right, u, var_types)
        if lt != rt:
            raise ExprError(f"equality between {lt} and {rt}")
        return BOOL
    if isinstance(e, Not):
        if infer_type(e.arg, u, var_types) != BOOL:
            raise ExprError("negation of a non-boolean")
        return BOOL
    if isinstance(e, BoolOp):
        for side in (e.left, e.right):
            if infer_type(side, u, var_types) != BOOL:
                raise ExprError(f"{e.op} applied to a non-boolean")
        return BOOL
    if isinstance(e, Ite):
        if infer_type(e.cond, u, var_types) != BOOL:
            raise ExprError("ternary condition must be boolean")
        tt = infer_type(e.then, u, var_types)
        et = infer_type(e.other, u, var_types)
        if tt != et:
            raise ExprError(f"ternary branches disagree: {tt} vs {et}")
        return tt
    raise ExprError(f"unknown expression node {e!r}")


TRUE = Lit(True)
FALSE = Lit(False)


def format_expr(e: Expr) -> str:
    return _fmt(e, 0)


# precedence: 0 ternary, 1 implies, 2 or, 3 and, 4 eq, 5 unary/atom
def _fmt(e: Expr, prec: int) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        if isinstance(e.value, Fraction):
            return "write" if e.value == 1 else f"{e.value.numerator}/{e.value.denominator}"
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        if isinstance(e.value, int):
            return str(e.value)
        if e.value == NULL:
            return "null"
        return f"ref({e.value})"
    if isinstance(e, FieldAcc):
        return f"{_fmt(e.base, 5)}.{e.field}"
    if isinstance(e, PermOf):
        return f"perm({_fmt(e.base, 5)}.{e.field})"
    if isinstance(e, Eq):
        s = f"{_fmt(e.left, 5)} == {_fmt(e.right, 5)}"
        return _paren(s, 4, prec)
    if isinstance(e, Not):
        return f"!{_fmt(e.arg, 5)}"
    if isinstance(e, BoolOp):
        sym, level = {"implies": ("==>", 1), "or": ("||", 2), "and": ("&&", 3)}[e.op]
        if e.op == "implies":  # right-associative in the grammar
            s = f"{_fmt(e.left, level + 1)} {sym} {_fmt(e.right, level)}"
        else:  # || and && are left-associative
            s = f"{_fmt(e.left, level)} {sym} {_fmt(e.right, level + 1)}"
        return _paren(s, level, prec)
    if isinstance(e, Ite):
        s = f"{_fmt(e.cond, 1)} ? {_fmt(e.then, 1)} : {_fmt(e.other, 0)}"
        return _paren(s, 0, prec)
    raise ExprError(f"unknown expression node {e!r}")


def _paren(s: str, level: int, prec: int) -> str:
    return f"({s})" if level < prec else s
