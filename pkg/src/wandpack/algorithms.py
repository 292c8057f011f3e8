"""The three package algorithms and proof-script execution.

* ``package_sound`` — the witness-set algorithm for standard wands; every
  success yields one footprint plus a derivation the checker accepts.
* ``package_combinable`` — the same proof search run through the lifted
  logic: each pair carries the restriction transformer anchored at its
  left-hand-side state, and extraction distributes per-pair deltas.
* ``package_fia`` — the deliberately flawed baseline, kept for
  differential comparison: it infers a footprint for each left-hand-side
  case separately and returns one post-state per case.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import states as st
from .assertions import (
    Assertion,
    Imp,
    OrA,
    Pure,
    Star,
    Wand,
    assertion_substitute,
    demands,
    format_assertion,
    wand_key,
    wf,
)
from .exprs import Expr, Not, Store, Unframed, eval_bool
from .package_logic import (
    CheckFailure,
    Configuration,
    Context,
    DAtom,
    Derivation,
    DExtract,
    DImplication,
    DStar,
    WitnessPair,
    apply_extract,
    check_derivation,
    ctx_heap,
    extract_footprint,
    init_witness_set,
    pc_holds,
)
from .program import SApply, SAssert, SFold, SIf, SUnfold, ScriptStmt
from .states import EMPTY, State, state_key
from .universe import FieldLoc, PredInst, Universe

SOUND = "sound"
COMBINABLE = "combinable"
FIA = "fia"


class PackageFailure(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


@dataclass(frozen=True)
class PackageOutcome:
    status: str  # "success" | "failure"
    diagnostic: Optional[str] = None
    footprint: Optional[State] = None
    case_footprints: tuple[tuple[State, State], ...] = ()
    post_states: tuple[State, ...] = ()
    derivation: Optional[Derivation] = None
    configuration: Optional[Configuration] = None

    @property
    def success(self) -> bool:
        return self.status == "success"


# -- consLHS ----------------------------------------------------------------------


def cons_lhs(
    seeds: Sequence[State], pc: tuple[Expr, ...], a: Assertion, u: Universe, store: Store
) -> list[State]:
    """Construct minimal satisfying states from permission-free, total-heap
    seed states: stars chain, implications extend the path condition, pure
    atoms filter, resource atoms add their minimal demand, and
    disjunctions split into branch unions."""
    if isinstance(a, Star):
        return cons_lhs(cons_lhs(seeds, pc, a.left, u, store), pc, a.right, u, store)
    if isinstance(a, Imp):
        return cons_lhs(seeds, pc + (a.guard,), a.body, u, store)
    if isinstance(a, OrA):
        both = cons_lhs(seeds, pc, a.left, u, store) + cons_lhs(seeds, pc, a.right, u, store)
        return sorted(set(both), key=state_key)
    out = []
    for s in seeds:
        heap = s.heap_dict()
        try:
            if not all(eval_bool(g, heap, store) for g in pc):
                out.append(s)
                continue
            if isinstance(a, Pure):
                if eval_bool(a.expr, heap, store):
                    out.append(s)
                continue
            ds = demands(u, a, heap, store)
        except Unframed:
            continue
        if not ds:
            continue
        grown = st.add(s, ds[0])
        if grown is not None:
            out.append(grown)
    return sorted(set(out), key=state_key)


def lhs_cases(u: Universe, a: Assertion, store: Store, budget: int = 10**6) -> list[State]:
    seeds = list(st.enumerate_states(u, total_heap_only=True, zero_mask_only=True, budget=budget))
    return cons_lhs(seeds, (), a, u, store)


# -- shared coverage / extraction machinery --------------------------------------


def _pair_demands(u, a, pair: WitnessPair, store, outer_heap) -> list[State]:
    try:
        return demands(u, a, ctx_heap(pair), store, fallback_heap=outer_heap)
    except Unframed as e:
        raise PackageFailure(
            f"unframed expression while reducing {format_assertion(a)}: {e.description}"
        )


def _first_covered(sigma_a: State, ds: Sequence[State]) -> Optional[State]:
    for d in ds:
        if st.geq(sigma_a, d):
            return d
    return None


def _shortfall(sigma_a: State, d: State) -> State:
    missing = {}
    values = {}
    for rid, amt in d.mask:
        gap = amt - sigma_a.mask_of(rid)
        if gap > 0:
            missing[rid] = gap
            if isinstance(rid, FieldLoc):
                v = d.heap_value(rid)
                if v is not None:
                    values[rid] = v
    return State.make(missing, values)


def _target_demand(sigma_a: State, ds: Sequence[State]) -> tuple[State, State]:
    """The demand this pair should be steered toward: least missing
    permission first, leftmost on ties.  Returns (demand, shortfall)."""
    best = None
    for i, d in enumerate(ds):
        gap = _shortfall(sigma_a, d)
        size = sum(a for _, a in gap.mask)
        key = (size, i)
        if best is None or key < best[0]:
            best = (key, d, gap)
    assert best is not None
    return best[1], best[2]


def _extract_to_cover(
    u: Universe,
    ctx: Context,
    active: Sequence[WitnessPair],
    a: Assertion,
    store: Store,
    outer_heap: dict,
    what: str,
) -> tuple[Context, Optional[State]]:
    """Ensure every active pair covers some demand of ``a``, extracting one
    minimal stable state from the outer state if needed.  Returns the new
    context and the extracted state (None when nothing was needed)."""
    needed: dict = {}
    values: dict = {}
    witness: Optional[WitnessPair] = None
    for pair in active:
        ds = _pair_demands(u, a, pair, store, outer_heap)
        if not ds:
            if isinstance(a, Pure):
                raise PackageFailure(
                    f"{what}: {format_assertion(a)} does not hold for pair "
                    f"({pair.sigma_a}, {pair.sigma_b})"
                )
            raise PackageFailure(
                f"{what}: insufficient permission for {format_assertion(a)}; no way "
                f"to satisfy it for pair ({pair.sigma_a}, {pair.sigma_b})"
            )
        if _first_covered(pair.sigma_a, ds) is not None:
            continue
        _, gap = _target_demand(pair.sigma_a, ds)
        witness = witness or pair
        for rid, amt in gap.mask:
            if amt > needed.get(rid, Fraction(0)):
                needed[rid] = amt
            if isinstance(rid, FieldLoc):
                v = gap.heap_value(rid)
                if v is None:
                    v = outer_heap.get(rid)
                if v is None:
                    raise PackageFailure(
                        f"{what}: no value available for extracted location {rid}"
                    )
                values[rid] = v
    if not needed:
        return ctx, None
    sigma_w = State.make(needed, values)
    if not st.geq(ctx.outer, sigma_w):
        assert witness is not None
        raise PackageFailure(
            f"{what}: insufficient permission for {format_assertion(a)}; "
            f"outer state lacks {sigma_w} (witness pair {witness.sigma_a})"
        )
    try:
        return apply_extract(ctx, sigma_w), sigma_w
    except CheckFailure as e:
        raise PackageFailure(f"{what}: {e.message}")


def _active(ctx: Context, conds: tuple[Expr, ...], store: Store) -> list[WitnessPair]:
    out = []
    for pair in ctx.pairs:
        try:
            if all(eval_bool(g, ctx_heap(pair), store) for g in conds):
                out.append(pair)
        except Unframed as e:
            raise PackageFailure(f"unframed script condition: {e.description}")
    return out


# -- proveRHS ----------------------------------------------------------------------


def prove_rhs(
    ctx: Context,
    pc: tuple[Expr, ...],
    b: Assertion,
    u: Universe,
    store: Store,
    outer_heap: Optional[dict] = None,
) -> tuple[Context, Derivation]:
    """Left-to-right proof search over the right-hand side.

    Stars and implications recurse; atoms either transfer per-pair choices
    directly or extract a minimal missing state from the outer state
    first.  The combinable variant is selected by the transformers the
    context's pairs carry.  Raises PackageFailure with the offending atom
    and a witness pair when the outer state cannot close a shortfall.
    """
    heap = dict(outer_heap or ctx.outer.heap_dict())
    return _prove(ctx, pc, b, u, store, heap)


def _prove(ctx, pc, b, u, store, outer_heap) -> tuple[Context, Derivation]:
    if isinstance(b, Star):
        ctx1, d1 = _prove(ctx, pc, b.left, u, store, outer_heap)
        ctx2, d2 = _prove(ctx1, pc, b.right, u, store, outer_heap)
        return ctx2, DStar(d1, d2)
    if isinstance(b, Imp):
        ctx1, d = _prove(ctx, pc + (b.guard,), b.body, u, store, outer_heap)
        return ctx1, DImplication(d)
    # a semantic atom: Pure / Acc / Pred / Wand / Or
    try:
        active = [p for p in ctx.pairs if pc_holds(pc, p.sigma_a, store)]
    except CheckFailure as e:
        raise PackageFailure(e.message)
    ctx, extracted = _extract_to_cover(u, ctx, active, b, store, outer_heap, "prove")
    try:
        active = [p for p in ctx.pairs if pc_holds(pc, p.sigma_a, store)]
    except CheckFailure as e:
        raise PackageFailure(e.message)
    choices = {}
    new_pairs = []
    for pair in ctx.pairs:
        if pair not in active:
            new_pairs.append(pair)
            continue
        ds = _pair_demands(u, b, pair, store, outer_heap)
        chosen = _first_covered(pair.sigma_a, ds)
        if chosen is None:
            raise PackageFailure(
                f"prove: {format_assertion(b)} still unsatisfied for pair "
                f"({pair.sigma_a}, {pair.sigma_b}) after extraction"
            )
        choices[(pair.sigma_a, pair.sigma_b)] = chosen
        moved = st.add(pair.sigma_b, chosen)
        assert moved is not None
        new_pairs.append(WitnessPair(st.sub(pair.sigma_a, chosen), moved, pair.transformer))
    node: Derivation = DAtom.make(choices)
    if extracted is not None:
        node = DExtract(extracted, node)
    return Context.make(ctx.outer, new_pairs, ctx.extracted), node


# -- proof-script execution ----------------------------------------------------------


def run_script(
    ctx: Context,
    script: Sequence[ScriptStmt],
    store: Store,
    u: Universe,
    outer_heap: Optional[dict] = None,
) -> tuple[Context, list[State], bool]:
    """Execute a proof script against a context.

    Returns the new context, the states extracted from the outer state (in
    order), and whether any statement reshaped available states in a way
    the core rules cannot express (fold/unfold/apply) — in that case an
    emitted derivation must start from the post-script configuration.
    """
    heap = dict(outer_heap or ctx.outer.heap_dict())
    extracts: list[State] = []
    mutated = [False]
    ctx = _run_script(ctx, tuple(script), (), store, u, heap, extracts, mutated)
    return ctx, extracts, mutated[0]


def _run_script(ctx, script, conds, store, u, outer_heap, extracts, mutated) -> Context:
    for stmt in script:
        if isinstance(stmt, SIf):
            ctx = _run_script(ctx, stmt.then, conds + (stmt.cond,), store, u, outer_heap, extracts, mutated)
            ctx = _run_script(ctx, stmt.els, conds + (Not(stmt.cond),), store, u, outer_heap, extracts, mutated)
            continue
        if isinstance(stmt, SAssert):
            ctx, ex = _extract_to_cover(
                u, ctx, _active(ctx, conds, store), stmt.assertion, store, outer_heap, "assert"
            )
            if ex is not None:
                extracts.append(ex)
            for pair in _active(ctx, conds, store):
                ds = _pair_demands(u, stmt.assertion, pair, store, outer_heap)
                if _first_covered(pair.sigma_a, ds) is None:
                    raise PackageFailure(
                        f"assert {format_assertion(stmt.assertion)} fails for pair "
                        f"({pair.sigma_a}, {pair.sigma_b})"
                    )
            continue
        if isinstance(stmt, SFold):
            ctx = _script_fold(ctx, stmt, conds, store, u, outer_heap, extracts)
            mutated[0] = True
            continue
        if isinstance(stmt, SUnfold):
            ctx = _script_unfold(ctx, stmt, conds, store, u)
            mutated[0] = True
            continue
        if isinstance(stmt, SApply):
            ctx = _script_apply(ctx, stmt, conds, store, u, outer_heap, extracts)
            mutated[0] = True
            continue
        raise PackageFailure(f"unknown script statement {stmt!r}")
    return ctx


def _instantiated_body(u: Universe, name: str, args) -> Assertion:
    d = u.predicate(name)
    if len(d.params) != len(args):
        raise PackageFailure(f"{name} expects {len(d.params)} arguments")
    return assertion_substitute(d.body, dict(zip(d.params, args)))


def _script_fold(ctx, stmt: SFold, conds, store, u, outer_heap, extracts) -> Context:
    body = _instantiated_body(u, stmt.name, stmt.args)
    ctx, ex = _extract_to_cover(u, ctx, _active(ctx, conds, store), body, store, outer_heap, "fold")
    if ex is not None:
        extracts.append(ex)
    active_keys = {p.key() for p in _active(ctx, conds, store)}
    new_pairs = []
    for pair in ctx.pairs:
        if pair.key() not in active_keys:
            new_pairs.append(pair)
            continue
        heap = ctx_heap(pair)
        ds = _pair_demands(u, body, pair, store, outer_heap)
        chosen = _first_covered(pair.sigma_a, ds)
        if chosen is None:
            raise PackageFailure(f"fold {stmt.name}: body not available for pair ({pair.sigma_a})")
        try:
            vals = tuple(_eval_arg(x, heap, store) for x in stmt.args)
        except Unframed as e:
            raise PackageFailure(f"fold {stmt.name}: {e.description}")
        token = State.make({PredInst(stmt.name, vals): Fraction(1)}, {})
        grown = st.add(st.sub(pair.sigma_a, chosen), token)
        if grown is None:
            raise PackageFailure(f"fold {stmt.name}: instance already held in full")
        new_pairs.append(WitnessPair(grown, pair.sigma_b, pair.transformer))
    return Context.make(ctx.outer, new_pairs, ctx.extracted)


def _script_unfold(ctx, stmt: SUnfold, conds, store, u) -> Context:
    body = _instantiated_body(u, stmt.name, stmt.args)
    active_keys = {p.key() for p in _active(ctx, conds, store)}
    new_pairs = []
    for pair in ctx.pairs:
        if pair.key() not in active_keys:
            new_pairs.append(pair)
            continue
        heap = ctx_heap(pair)
        try:
            vals = tuple(_eval_arg(x, heap, store) for x in stmt.args)
        except Unframed as e:
            raise PackageFailure(f"unfold {stmt.name}: {e.description}")
        token = State.make({PredInst(stmt.name, vals): Fraction(1)}, {})
        if not st.geq(pair.sigma_a, token):
            raise PackageFailure(
                f"unfold {stmt.name}: no full instance held by pair ({pair.sigma_a})"
            )
        stripped = st.sub(pair.sigma_a, token)
        # body values may be undetermined (the instance came straight from
        # the LHS): fork the pair over the possible valuations
        try:
            ds = demands(u, body, ctx_heap(WitnessPair(stripped, pair.sigma_b)), store, fresh="fork")
        except Unframed as e:
            raise PackageFailure(f"unfold {stmt.name}: {e.description}")
        forks = []
        for d in ds:
            grown = st.add(stripped, d)
            if grown is not None:
                forks.append(WitnessPair(grown, pair.sigma_b, pair.transformer))
        new_pairs.extend(forks)  # zero forks: the case is inconsistent, drop it
    return Context.make(ctx.outer, new_pairs, ctx.extracted)


def _script_apply(ctx, stmt: SApply, conds, store, u, outer_heap, extracts) -> Context:
    w = stmt.wand
    token = State.make({wand_key(w, store): Fraction(1)}, {})
    ctx, ex = _extract_to_cover(
        u, ctx, _active(ctx, conds, store), w.lhs, store, outer_heap, "apply (left-hand side)"
    )
    if ex is not None:
        extracts.append(ex)
    active_keys = {p.key() for p in _active(ctx, conds, store)}
    new_pairs = []
    for pair in ctx.pairs:
        if pair.key() not in active_keys:
            new_pairs.append(pair)
            continue
        if not st.geq(pair.sigma_a, token):
            raise PackageFailure(
                f"apply {format_assertion(w)}: no wand instance held by pair ({pair.sigma_a})"
            )
        ds = _pair_demands(u, w.lhs, pair, store, outer_heap)
        chosen = _first_covered(pair.sigma_a, ds)
        if chosen is None:
            raise PackageFailure(
                f"apply {format_assertion(w)}: left-hand side not available for pair ({pair.sigma_a})"
            )
        base = st.sub(st.sub(pair.sigma_a, token), chosen)
        try:
            rds = demands(u, w.rhs, ctx_heap(WitnessPair(base, pair.sigma_b)), store, fresh="fork")
        except Unframed as e:
            raise PackageFailure(f"apply {format_assertion(w)}: {e.description}")
        forks = []
        for d in rds:
            grown = st.add(base, d)
            if grown is not None:
                forks.append(WitnessPair(grown, pair.sigma_b, pair.transformer))
        new_pairs.extend(forks)
    return Context.make(ctx.outer, new_pairs, ctx.extracted)


def _eval_arg(x, heap, store):
    from .exprs import eval_expr

    return eval_expr(x, heap, store)


# -- the package algorithms -----------------------------------------------------------


def _package_witnessed(
    outer: State,
    wand: Wand,
    script: Sequence[ScriptStmt],
    store: Store,
    u: Universe,
    combinable: bool,
    budget: int = 10**6,
    self_check: bool = True,
) -> PackageOutcome:
    if not wf(wand):
        return PackageOutcome("failure", diagnostic="wand is not well-formed (self-framing)")
    pairs = init_witness_set(wand.lhs, u, True, store, combinable=combinable, budget=budget)
    conf0 = Configuration(wand.rhs, (), Context.make(outer, pairs))
    outer_heap = outer.heap_dict()
    try:
        ctx1, extracts, mutated = run_script(conf0.context, script, store, u, outer_heap)
        ctx2, tree = prove_rhs(ctx1, (), wand.rhs, u, store, outer_heap)
    except PackageFailure as e:
        return PackageOutcome("failure", diagnostic=e.message)
    footprint = extract_footprint(outer, ctx2.outer)
    if mutated:
        conf = Configuration(wand.rhs, (), ctx1)
        derivation = tree
    else:
        conf = conf0
        derivation = tree
        for sigma in reversed(extracts):
            derivation = DExtract(sigma, derivation)
    if self_check:
        check_derivation(conf, derivation, u, store)  # internal consistency guard
    return PackageOutcome(
        "success",
        footprint=footprint,
        post_states=(ctx2.outer,),
        derivation=derivation,
        configuration=conf,
    )


def package_sound(
    outer: State,
    wand: Wand,
    script: Sequence[ScriptStmt] = (),
    store: Store = {},
    u: Universe = None,
    budget: int = 10**6,
) -> PackageOutcome:
    """Package a standard wand; the returned derivation re-validates."""
    if wand.combinable:
        return PackageOutcome("failure", diagnostic="sound algorithm expects a standard wand")
    return _package_witnessed(outer, wand, script, store, u, combinable=False, budget=budget)


def package_combinable(
    outer: State,
    wand: Wand,
    script: Sequence[ScriptStmt] = (),
    store: Store = {},
    u: Universe = None,
    budget: int = 10**6,
) -> PackageOutcome:
    """Package a combinable wand through the lifted logic."""
    if not wand.combinable:
        return PackageOutcome("failure", diagnostic="combinable algorithm expects a --*c wand")
    return _package_witnessed(outer, wand, script, store, u, combinable=True, budget=budget)


def package_fia(
    outer: State,
    wand: Wand,
    script: Sequence[ScriptStmt] = (),
    store: Store = {},
    u: Universe = None,
    budget: int = 10**6,
) -> PackageOutcome:
    """The unsound baseline: one footprint per left-hand-side case.

    Each case is processed in isolation, using the values that hold in
    that case; the per-case footprints generally do not justify the wand
    for the other cases.  No derivation is emitted — in general none
    exists.
    """
    if not wf(wand):
        return PackageOutcome("failure", diagnostic="wand is not well-formed (self-framing)")
    cases = lhs_cases(u, wand.lhs, store, budget=budget)
    results: list[tuple[State, State]] = []
    posts: list[State] = []
    for case in cases:
        try:
            refined, taken = _fia_case(u, case, wand, tuple(script), store, outer)
        except PackageFailure as e:
            return PackageOutcome("failure", diagnostic=f"case {case}: {e.message}")
        entry = (refined, taken)
        if entry not in results:
            results.append(entry)
        post = st.sub(outer, taken)
        if post not in posts:
            posts.append(post)
    return PackageOutcome(
        "success",
        case_footprints=tuple(results),
        post_states=tuple(sorted(posts, key=state_key)),
    )


def _fia_case(u, case: State, wand: Wand, script, store, outer: State) -> tuple[State, State]:
    """Run the single-pair inference for one LHS case.

    Returns (refined case state, taken state).  Values for permissions
    taken from the outer state come from the outer heap; the case state's
    unowned placeholder values are refined to match, mirroring how the
    original inference copies values from the current state.
    """
    sigma_a = case
    taken = EMPTY

    def take_from_outer(gap: State, what: str) -> None:
        nonlocal sigma_a, taken
        take_mask = {}
        take_heap = {}
        for rid, amt in gap.mask:
            take_mask[rid] = amt
            if isinstance(rid, FieldLoc):
                v = outer.heap_value(rid)
                if v is None:
                    raise PackageFailure(f"{what}: current state has no value for {rid}")
                take_heap[rid] = v
        got = State.make(take_mask, take_heap)
        new_taken = st.add(taken, got)
        if new_taken is None or not st.geq(outer, new_taken):
            raise PackageFailure(f"insufficient permission in the current state for {what}")
        mask = sigma_a.mask_dict()
        heap = sigma_a.heap_dict()
        for rid, amt in got.mask:
            have = mask.get(rid, Fraction(0))
            if have + amt > 1:
                raise PackageFailure(f"{what}: case state cannot absorb {got}")
            if have == 0 and isinstance(rid, FieldLoc):
                heap[rid] = take_heap[rid]  # unowned placeholder, refine it
            elif isinstance(rid, FieldLoc) and heap.get(rid) != take_heap.get(rid):
                raise PackageFailure(f"{what}: value clash at {rid}")
            mask[rid] = have + amt
        sigma_a, taken = State.make(mask, heap), new_taken

    def ensure(a: Assertion) -> State:
        nonlocal sigma_a
        try:
            ds = demands(u, a, sigma_a.heap_dict(), store)
        except Unframed as e:
            raise PackageFailure(f"unframed expression: {e.description}")
        if not ds:
            raise PackageFailure(f"{format_assertion(a)} does not hold in this case")
        chosen = _first_covered(sigma_a, ds)
        if chosen is None:
            _, gap = _target_demand(sigma_a, ds)
            take_from_outer(gap, format_assertion(a))
            ds = demands(u, a, sigma_a.heap_dict(), store)
            chosen = _first_covered(sigma_a, ds)
            if chosen is None:
                raise PackageFailure(f"{format_assertion(a)} still unsatisfied after transfer")
        return chosen

    def consume(a: Assertion) -> None:
        nonlocal sigma_a
        chosen = ensure(a)
        sigma_a = st.sub(sigma_a, chosen)

    def run(stmts, conds):
        nonlocal sigma_a, taken
        for s in stmts:
            if isinstance(s, SIf):
                run(s.then, conds + (s.cond,))
                run(s.els, conds + (Not(s.cond),))
                continue
            try:
                live = all(eval_bool(g, sigma_a.heap_dict(), store) for g in conds)
            except Unframed as e:
                raise PackageFailure(f"unframed script condition: {e.description}")
            if not live:
                continue
            if isinstance(s, SAssert):
                ensure(s.assertion)
            elif isinstance(s, SFold):
                body = _instantiated_body(u, s.name, s.args)
                d = ensure(body)
                vals = tuple(_eval_arg(x, sigma_a.heap_dict(), store) for x in s.args)
                token = State.make({PredInst(s.name, vals): Fraction(1)}, {})
                grown = st.add(st.sub(sigma_a, d), token)
                if grown is None:
                    raise PackageFailure(f"fold {s.name}: instance already held in full")
                sigma_a = grown
            elif isinstance(s, SUnfold):
                body = _instantiated_body(u, s.name, s.args)
                vals = tuple(_eval_arg(x, sigma_a.heap_dict(), store) for x in s.args)
                token = State.make({PredInst(s.name, vals): Fraction(1)}, {})
                if not st.geq(sigma_a, token):
                    raise PackageFailure(f"unfold {s.name}: no full instance held")
                ds = demands(u, body, sigma_a.heap_dict(), store, fresh="fork")
                if not ds:
                    raise PackageFailure(f"unfold {s.name}: body unsatisfiable")
                grown = st.add(st.sub(sigma_a, token), ds[0])
                if grown is None:
                    raise PackageFailure(f"unfold {s.name}: body clashes with held state")
                sigma_a = grown
            elif isinstance(s, SApply):
                token = State.make({wand_key(s.wand, store): Fraction(1)}, {})
                if not st.geq(sigma_a, token):
                    raise PackageFailure(f"apply: no instance of {format_assertion(s.wand)}")
                d = ensure(s.wand.lhs)
                base = st.sub(st.sub(sigma_a, token), d)
                rds = demands(u, s.wand.rhs, base.heap_dict(), store, fresh="fork")
                if not rds:
                    raise PackageFailure("apply: right-hand side unsatisfiable")
                grown = st.add(base, rds[0])
                if grown is None:
                    raise PackageFailure("apply: right-hand side clashes with held state")
                sigma_a = grown
            else:
                raise PackageFailure(f"unknown script statement {s!r}")

    run(script, ())
    _fia_rhs(u, wand.rhs, (), store, consume, lambda: sigma_a.heap_dict())
    # report the case with its mask as enumerated and its refined values
    return State.make(case.mask_dict(), sigma_a.heap_dict()), taken


def _fia_rhs(u, b: Assertion, guards, store, ensure, heap_of):
    if isinstance(b, Star):
        _fia_rhs(u, b.left, guards, store, ensure, heap_of)
        _fia_rhs(u, b.right, guards, store, ensure, heap_of)
        return
    if isinstance(b, Imp):
        _fia_rhs(u, b.body, guards + (b.guard,), store, ensure, heap_of)
        return
    try:
        live = all(eval_bool(g, heap_of(), store) for g in guards)
    except Unframed as e:
        raise PackageFailure(f"unframed guard: {e.description}")
    if live:
        ensure(b)


PACKAGERS = {
    SOUND: package_sound,
    COMBINABLE: package_combinable,
    FIA: package_fia,
}
