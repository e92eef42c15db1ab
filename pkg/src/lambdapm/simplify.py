"""Scheme-level constraint simplification and hiding.

Three rewrite rules shrink a generalizable bag without losing solutions:

  * coalesce-up:   a variable fed only by a single coercion `(m, Id) |> v`
                   (or `(Id, m) |> v`) collapses onto `m` when `v` still
                   flows onward elsewhere
  * coalesce-down: dually, a variable consumed by a single coercion
                   `(v, Id) |> m` collapses onto `m` when `v` is still fed
                   from elsewhere
  * join:          a variable whose in-flows are all fully ground is set to
                   the principal join of those pairs, when one exists

Substituting is restricted to Bot, ground constructors, or *other eligible
variables* — never a protected variable and never the variable itself — so a
scheme's interface (anything visible in its body type) is left untouched.

Hiding then drops constraints whose evidence needs no caller input: exact
duplicates alias the surviving twin, identity-shaped coercions get a
pass-through, and fully ground constraints already justified by the
signature get a dictionary lookup.
"""

from __future__ import annotations

from typing import Optional

from .signature import Signature, entail, principal_join
from .syntax import (
    AutoEv,
    BOT,
    Constraint,
    EvVar,
    MBot,
    MGround,
    MVar,
    MonadicType,
    Subst,
    TargetTerm,
    free_type_vars,
)


def flows_to(nu: int, bag: list[Constraint]) -> list[tuple[MonadicType, MonadicType]]:
    """In-flow pairs: the (left, middle) arguments of every constraint whose
    result is exactly the variable `nu`."""
    out = []
    for c in bag:
        if isinstance(c.result, MVar) and c.result.ident == nu:
            out.append((c.left, c.middle))
    return out


def flows_from(nu: int, bag: list[Constraint]) -> list[MonadicType]:
    """Out-flow results: the result of every constraint using `nu` as an
    argument."""
    out = []
    for c in bag:
        for slot in (c.left, c.middle):
            if isinstance(slot, MVar) and slot.ident == nu:
                out.append(c.result)
                break
    return out


def _is_ground(m: MonadicType) -> bool:
    vs = free_type_vars(m)
    return not vs.tvars and not vs.mvars


def _admissible(m: MonadicType, nu: int, eligible: set[int]) -> bool:
    if isinstance(m, MBot):
        return True
    if isinstance(m, MGround):
        return not free_type_vars(m).mvars
    if isinstance(m, MVar):
        return m.ident != nu and m.ident in eligible
    return False


def _var_order(bag: list[Constraint], eligible: set[int]) -> list[int]:
    seen: list[int] = []
    for c in bag:
        for slot in (c.left, c.middle, c.result):
            if isinstance(slot, MVar) and slot.ident in eligible and slot.ident not in seen:
                seen.append(slot.ident)
    return seen


def _coercion_into(c: Constraint, nu: int) -> Optional[MonadicType]:
    """If c is `(m, Id) |> nu` or `(Id, m) |> nu`, return m."""
    if not (isinstance(c.result, MVar) and c.result.ident == nu):
        return None
    if isinstance(c.left, MBot):
        return c.middle
    if isinstance(c.middle, MBot):
        return c.left
    return None


def _coercion_outof(c: Constraint, nu: int) -> Optional[MonadicType]:
    """If c is `(nu, Id) |> m` or `(Id, nu) |> m`, return m."""
    slots = (c.left, c.middle)
    for i, j in ((0, 1), (1, 0)):
        if (isinstance(slots[i], MVar) and slots[i].ident == nu
                and isinstance(slots[j], MBot)):
            return c.result
    return None


def simplify_step(bag: list[Constraint], eligible: set[int], sig: Signature
                  ) -> Optional[tuple[int, MonadicType]]:
    """One rewrite, or None when the bag is in normal form.

    Rules are attempted in a fixed order (coalesce-up, coalesce-down, join),
    each over variables in first-occurrence order, so simplification is
    deterministic.
    """
    order = _var_order(bag, eligible)

    for nu in order:
        for idx, c in enumerate(bag):
            m = _coercion_into(c, nu)
            if m is None or not _admissible(m, nu, eligible):
                continue
            rest = bag[:idx] + bag[idx + 1:]
            if flows_to(nu, rest):
                continue
            if not flows_from(nu, rest):
                continue
            return nu, m

    for nu in order:
        for idx, c in enumerate(bag):
            m = _coercion_outof(c, nu)
            if m is None or not _admissible(m, nu, eligible):
                continue
            rest = bag[:idx] + bag[idx + 1:]
            if flows_from(nu, rest):
                continue
            if not flows_to(nu, rest):
                continue
            return nu, m

    for nu in order:
        pairs = flows_to(nu, bag)
        if not pairs:
            continue
        if not all(_is_ground(a) and _is_ground(b) for a, b in pairs):
            continue
        joined = principal_join(sig, pairs)
        if joined is not None:
            return nu, joined

    return None


def simplify(bag: list[Constraint], eligible: set[int], sig: Signature
             ) -> tuple[dict[int, MonadicType], list[Constraint]]:
    """Run simplify_step to fixpoint; returns the composed substitution on
    the eliminated variables plus the rewritten bag."""
    sub = Subst()
    current = list(bag)
    while True:
        step = simplify_step(current, eligible, sig)
        if step is None:
            break
        nu, m = step
        sub.bind_m(nu, m)
        current = sub.apply_bag(current)
    final = {ident: sub.apply_monad(MVar(ident)) for ident in sub.m_map}
    return final, current


# ---------------------------------------------------------------------------
# Hiding


def _identity_shaped(c: Constraint) -> bool:
    if isinstance(c.middle, MBot) and c.left == c.result:
        return True
    if isinstance(c.left, MBot) and c.middle == c.result:
        return True
    return False


def hide_partition(bag: list[Constraint], sig: Signature
                   ) -> tuple[list[Constraint], list[Constraint], dict[int, TargetTerm]]:
    """Split a bag into (kept, hidden) and produce the evidence rewrite for
    the hidden part.

    Hidden evidence never depends on how a caller later solves the kept
    constraints: duplicates alias the first occurrence's evidence variable,
    and identity-shaped or signature-justified ground constraints evaluate
    through a shape-directed pass-through.
    """
    first: dict[tuple, int] = {}
    unique: list[Constraint] = []
    rewrite: dict[int, TargetTerm] = {}
    for c in bag:
        if c.triple in first:
            rewrite[c.cid] = EvVar(first[c.triple])
            continue
        first[c.triple] = c.cid
        unique.append(c)

    kept: list[Constraint] = []
    hidden: list[Constraint] = []
    for c in unique:
        if _identity_shaped(c):
            hidden.append(c)
            rewrite[c.cid] = AutoEv(c.left, c.middle, c.result)
            continue
        if _is_ground(c.left) and _is_ground(c.middle) and _is_ground(c.result) \
                and entail(sig, c, require_identity=True) is not None:
            hidden.append(c)
            rewrite[c.cid] = AutoEv(c.left, c.middle, c.result)
            continue
        kept.append(c)
    return kept, hidden, rewrite
