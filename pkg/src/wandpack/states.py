"""States and the separation-algebra operations over them.

A state pairs a permission mask (resource id -> fraction in [0,1]) with a
partial heap (field location -> value).  Addition is defined when the heaps
agree on their common domain and no per-resource permission sum exceeds 1;
the core of a state keeps the heap and zeroes the mask.  Heap values held
at zero permission are valid (the state is merely unstable) — cores and
verifier worlds rely on this.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional

from .universe import (
    FieldLoc,
    ResourceId,
    Universe,
    Value,
    format_value,
    rid_key,
    value_key,
)

ONE = Fraction(1)
ZERO = Fraction(0)


class StateError(Exception):
    """Contract violation on a state operation (e.g. sub on non-geq inputs)."""


@dataclass(frozen=True)
class State:
    """Immutable (mask, heap) pair, normalized and hashable.

    Zero mask entries are dropped on construction; mask and heap are kept
    as sorted tuples so equal states compare and hash equal.
    """

    mask: tuple[tuple[ResourceId, Fraction], ...]
    heap: tuple[tuple[FieldLoc, Value], ...]

    @staticmethod
    def make(
        mask: Mapping[ResourceId, Fraction] | Iterable[tuple[ResourceId, Fraction]] = (),
        heap: Mapping[FieldLoc, Value] | Iterable[tuple[FieldLoc, Value]] = (),
    ) -> "State":
        mitems = mask.items() if isinstance(mask, Mapping) else mask
        hitems = heap.items() if isinstance(heap, Mapping) else heap
        m = {}
        for rid, amt in mitems:
            amt = Fraction(amt)
            if amt < 0 or amt > 1:
                raise StateError(f"permission {amt} for {rid} outside [0, 1]")
            if amt > 0:
                m[rid] = amt
        h = dict(hitems)
        return State(
            mask=tuple(sorted(m.items(), key=lambda kv: rid_key(kv[0]))),
            heap=tuple(sorted(h.items(), key=lambda kv: rid_key(kv[0]))),
        )

    # -- accessors ----------------------------------------------------------

    def mask_of(self, rid: ResourceId) -> Fraction:
        for r, a in self.mask:
            if r == rid:
                return a
        return ZERO

    def heap_value(self, loc: FieldLoc) -> Optional[Value]:
        for l, v in self.heap:
            if l == loc:
                return v
        return None

    def mask_dict(self) -> dict[ResourceId, Fraction]:
        return dict(self.mask)

    def heap_dict(self) -> dict[FieldLoc, Value]:
        return dict(self.heap)

    def is_empty(self) -> bool:
        return not self.mask and not self.heap

    def __str__(self) -> str:
        parts = [f"{rid}@{amt}" + (f"={format_value(self.heap_value(rid))}"
                                   if isinstance(rid, FieldLoc) and self.heap_value(rid) is not None
                                   else "")
                 for rid, amt in self.mask]
        owned = {rid for rid, _ in self.mask}
        parts += [f"{loc}@0={format_value(v)}" for loc, v in self.heap if loc not in owned]
        return "{" + ", ".join(parts) + "}"


EMPTY = State.make()


def state_key(s: State) -> tuple:
    """Deterministic total order used wherever iteration order matters."""
    return (
        tuple((rid_key(r), a) for r, a in s.mask),
        tuple((rid_key(l), value_key(v)) for l, v in s.heap),
    )


def validate(s: State, u: Universe) -> None:
    """Check a state against its universe (domains, declaredness, validity)."""
    for rid, amt in s.mask:
        if isinstance(rid, FieldLoc):
            if not u.has_location(rid):
                raise StateError(f"mask entry for undeclared location {rid}")
            if amt > 0 and s.heap_value(rid) is None:
                raise StateError(f"owned location {rid} has no heap value")
    for loc, v in s.heap:
        if not u.has_location(loc):
            raise StateError(f"heap entry for undeclared location {loc}")
        if v not in u.domain(loc):
            raise StateError(f"value {format_value(v)} outside domain of {loc}")


# -- separation algebra ------------------------------------------------------


def heaps_agree(a: State, b: State) -> bool:
    bh = b.heap_dict()
    return all(loc not in bh or bh[loc] == v for loc, v in a.heap)


def add(a: State, b: State) -> Optional[State]:
    """Partial addition: None (undefined) when the states are incompatible."""
    if not heaps_agree(a, b):
        return None
    m = a.mask_dict()
    for rid, amt in b.mask:
        tot = m.get(rid, ZERO) + amt
        if tot > 1:
            return None
        m[rid] = tot
    h = a.heap_dict()
    h.update(b.heap)
    return State.make(m, h)


def add_all(states: Iterable[State]) -> Optional[State]:
    acc = EMPTY
    for s in states:
        acc = add(acc, s)
        if acc is None:
            return None
    return acc


def compatible(a: State, b: State) -> bool:
    return add(a, b) is not None


def core(a: State) -> State:
    return State.make((), a.heap)


def is_pure(a: State) -> bool:
    return not a.mask


def is_stable(a: State) -> bool:
    """Heap values exactly where field permission is positive.

    Predicate and wand resources carry no heap entry, so only field
    locations are constrained.
    """
    owned = {rid for rid, _ in a.mask if isinstance(rid, FieldLoc)}
    held = {loc for loc, _ in a.heap}
    return owned == held


def geq(a: State, b: State) -> bool:
    """a >= b in the induced order: some r exists with a = b (+) r."""
    am = a.mask_dict()
    for rid, amt in b.mask:
        if am.get(rid, ZERO) < amt:
            return False
    ah = a.heap_dict()
    return all(ah.get(loc) == v for loc, v in b.heap)


def sub(a: State, b: State) -> State:
    """The largest r with a = b (+) r: mask difference, a's heap in full.

    Keeping the whole heap (not just the remaining support) is what makes
    the result maximal — the pure part is duplicable.
    """
    if not geq(a, b):
        raise StateError("sub requires the first state to be >= the second")
    bm = b.mask_dict()
    m = {rid: amt - bm.get(rid, ZERO) for rid, amt in a.mask}
    return State.make(m, a.heap)


# -- fractional-permission extras ---------------------------------------------


def mult(alpha: Fraction, s: State) -> Optional[State]:
    """alpha (*) s: scale every permission; undefined if any amount exceeds 1."""
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise StateError("scaling factor must be positive")
    m = {}
    for rid, amt in s.mask:
        scaled = alpha * amt
        if scaled > 1:
            return None
        m[rid] = scaled
    return State.make(m, s.heap)


def in_scaled(candidate: State, s: State) -> bool:
    """candidate in scaled(s): candidate = alpha (*) s for some alpha in (0,1].

    Decided exactly: the heaps must match, the mask supports must match,
    and all per-resource ratios must agree on a single alpha in (0,1].
    """
    if candidate.heap != s.heap:
        return False
    cm, sm = candidate.mask_dict(), s.mask_dict()
    if set(cm) != set(sm):
        return False
    if not sm:
        return True  # alpha (*) s = s for the permission-free state
    alpha = None
    for rid, amt in sm.items():
        ratio = cm[rid] / amt
        if alpha is None:
            alpha = ratio
        elif alpha != ratio:
            return False
    return alpha is not None and 0 < alpha <= 1


def exists_compatible_scaled(sigma_a: State, sigma_w: State) -> bool:
    """Is some scaled copy of sigma_w compatible with sigma_a?

    Closed form instead of quantifying over infinitely many alpha: heaps
    are alpha-invariant, and for a small enough alpha the mask sums shrink
    below 1 wherever sigma_a is not already full.  So: heaps must agree,
    and every resource sigma_w owns must be strictly below 1 in sigma_a.
    """
    if not heaps_agree(sigma_a, sigma_w):
        return False
    return all(sigma_a.mask_of(rid) < 1 for rid, _ in sigma_w.mask)


def restrict(sigma_a: State, sigma_w: State) -> State:
    """The combinable-wand transform: cap sigma_w so all its scaled copies
    stay compatible with sigma_a, or return it unchanged when no scaled
    copy is compatible at all.

    The cap min(pi_w, 1 - pi_a) is applied uniformly to every resource id,
    predicate and wand instances included.
    """
    if not exists_compatible_scaled(sigma_a, sigma_w):
        return sigma_w
    m = {rid: min(amt, 1 - sigma_a.mask_of(rid)) for rid, amt in sigma_w.mask}
    return State.make(m, sigma_w.heap)


def bin_mask(s: State) -> State:
    """Binary restriction: keep full-permission entries, zero the rest."""
    m = {rid: amt for rid, amt in s.mask if amt == 1}
    return State.make(m, s.heap)


# -- enumeration --------------------------------------------------------------


class BudgetExceeded(Exception):
    def __init__(self, count: int, budget: int):
        super().__init__(f"universe has {count} states, over the budget of {budget}")
        self.count = count
        self.budget = budget


def count_states(
    u: Universe,
    stable_only: bool = False,
    total_heap_only: bool = False,
    zero_mask_only: bool = False,
) -> int:
    g = u.granularity
    n = 1
    for loc in u.sorted_locations():
        d = len(u.domain(loc))
        if zero_mask_only:
            per = d if total_heap_only else 1 + d
        elif total_heap_only:
            per = (g + 1) * d
        elif stable_only:
            per = 1 + g * d
        else:
            per = 1 + (g + 1) * d
        n *= per
    if not zero_mask_only:
        for _ in u.predicate_instances():
            n *= g + 1
    return n


def enumerate_states(
    u: Universe,
    stable_only: bool = False,
    total_heap_only: bool = False,
    zero_mask_only: bool = False,
    budget: Optional[int] = 10**6,
) -> Iterator[State]:
    """All valid states of the universe on the granularity lattice.

    ``total_heap_only`` yields states whose heap assigns every declared
    location; ``zero_mask_only`` additionally drops all permissions (these
    are the seed states for LHS case construction).  Deterministic order.
    """
    if budget is not None:
        n = count_states(u, stable_only, total_heap_only, zero_mask_only)
        if n > budget:
            raise BudgetExceeded(n, budget)
    fracs = u.fraction_lattice()
    locs = u.sorted_locations()
    per_loc: list[list[tuple[Fraction, Optional[Value]]]] = []
    for loc in locs:
        dom = u.domain(loc)
        opts: list[tuple[Fraction, Optional[Value]]] = []
        if zero_mask_only:
            opts = [(ZERO, v) for v in dom] if total_heap_only else [(ZERO, None)] + [(ZERO, v) for v in dom]
        else:
            for p in fracs:
                if p == 0:
                    if not total_heap_only:
                        opts.append((ZERO, None))
                    if not stable_only:
                        opts.extend((ZERO, v) for v in dom)
                else:
                    opts.extend((p, v) for v in dom)
        per_loc.append(opts)
    preds = [] if zero_mask_only else u.predicate_instances()
    pred_opts = [fracs for _ in preds]
    for combo in itertools.product(*per_loc, *pred_opts):
        mask: dict[ResourceId, Fraction] = {}
        heap: dict[FieldLoc, Value] = {}
        for loc, (p, v) in zip(locs, combo[: len(locs)]):
            if p > 0:
                mask[loc] = p
            if v is not None:
                heap[loc] = v
        for pid, p in zip(preds, combo[len(locs):]):
            if p > 0:
                mask[pid] = p
        yield State.make(mask, heap)


def minimal_elements(states: Iterable[State]) -> list[State]:
    """The >=-antichain of minimal states, in deterministic order."""
    pool = sorted(set(states), key=state_key)
    out: list[State] = []
    for s in pool:
        if not any(s != t and geq(s, t) for t in pool):
            out.append(s)
    return out
