"""Checking that a signature denotes a lawful structure.

Set-level properties (which binds exist) are checked exhaustively over the
bounded ground universe.  Equational properties are checked by evaluating
both sides on runtime samples; since every runtime's bind looks only at the
Bot-ness of the three positions — never at the indexes — one evaluation per
shape combination covers all ground instances of that shape.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .runtime import Comp, Runtime, get_runtime, shaped_bind
from .signature import Signature
from .syntax import BOT, MBot, MonadicType, print_monadic


@dataclass
class LawCheck:
    name: str
    ok: bool
    witness: Optional[str] = None


@dataclass
class LawReport:
    sig_name: str
    bound: str
    checks: list[LawCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[LawCheck]:
        return [c for c in self.checks if not c.ok]


def _is_bot(m: MonadicType) -> bool:
    return isinstance(m, MBot)


class _Tables:
    """Ground bind tables shaped for the law checks.

    Alongside the set-valued tables there is an integer-indexed view: monads
    get dense indexes (Bot is index 0) and result sets become bitmasks, which
    keeps the quantifier sweeps affordable on signatures with thousands of
    ground binds.
    """

    def __init__(self, sig: Signature, depth: int):
        self.sig = sig
        self.depth = depth
        self.monads = sig.ground_monads(depth)
        self.binds = sig.ground_binds(depth)
        self.by_pair: dict[tuple, set] = {}
        for gb in self.binds:
            self.by_pair.setdefault((gb.left, gb.middle), set()).add(gb.result)
        self.by_left: dict[MonadicType, list[tuple[MonadicType, set]]] = {}
        for (l, m), rs in self.by_pair.items():
            self.by_left.setdefault(l, []).append((m, rs))
        # morphisms (m, Id) |> n
        self.morph_dst: dict[MonadicType, set] = {}
        for (l, m), rs in self.by_pair.items():
            if _is_bot(m):
                self.morph_dst.setdefault(l, set()).update(rs)
        self.morph_src: dict[MonadicType, set] = {}
        for m, ns in self.morph_dst.items():
            for n in ns:
                self.morph_src.setdefault(n, set()).add(m)
        self.units: set = set(self.by_pair.get((BOT, BOT), set()))
        # B: binds that are neither units nor morphisms
        self.full_binds = [gb for gb in self.binds if not _is_bot(gb.middle)]
        # indexed view
        ordered = [BOT] + [m for m in self.monads if not _is_bot(m)]
        self.index: dict[MonadicType, int] = {m: i for i, m in enumerate(ordered)}
        self.of_index: list[MonadicType] = ordered
        self.res_mask: dict[tuple[int, int], int] = {}
        for (l, m), rs in self.by_pair.items():
            mask = 0
            for r in rs:
                mask |= 1 << self.index[r]
            self.res_mask[(self.index[l], self.index[m])] = mask
        self.by_left_idx: dict[int, list[tuple[int, int]]] = {}
        self.by_middle_idx: dict[int, list[tuple[int, int]]] = {}
        for (li, mi), mask in self.res_mask.items():
            self.by_left_idx.setdefault(li, []).append((mi, mask))
            self.by_middle_idx.setdefault(mi, []).append((li, mask))
        self.morph_dst_mask: dict[int, int] = {}
        for m, ns in self.morph_dst.items():
            mask = 0
            for n in ns:
                mask |= 1 << self.index[n]
            self.morph_dst_mask[self.index[m]] = mask

    def results(self, a: MonadicType, b: MonadicType) -> set:
        return self.by_pair.get((a, b), set())

    @staticmethod
    def bits(mask: int):
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low


# ---------------------------------------------------------------------------
# Samples


class _Sampler:
    def __init__(self, rt: Runtime, samples: int):
        self.rt = rt
        self.n = samples
        self.states = rt.sample_states()[:samples]

    def comps(self, bot: bool) -> list:
        if bot:
            return [3 * i + 1 for i in range(self.n)]
        return [self.rt.sample_comps(i) for i in range(self.n)]

    def funs(self, bot: bool) -> list[Callable]:
        if bot:
            return [lambda v, j=j: v * 2 + 5 * j for j in range(self.n)]
        return [self.rt.sample_funs(j) for j in range(self.n)]

    def observe(self, x) -> object:
        if isinstance(x, Comp):
            return tuple(x.run(s) for s in self.states)
        return x


def _same(sampler: _Sampler, a, b) -> bool:
    return sampler.observe(a) == sampler.observe(b)


# ---------------------------------------------------------------------------
# Definition-level laws


def check_functor(sig: Signature, depth: int = 2, samples: int = 2) -> LawCheck:
    t = _Tables(sig, depth)
    rt = get_runtime(sig.runtime_name)
    sampler = _Sampler(rt, samples)
    for m in t.monads:
        if m not in t.results(m, BOT):
            return LawCheck("Functor", False,
                            f"no (M, Id) |> M bind for M = {print_monadic(m)}")
    for bot in {True, False} & {_is_bot(m) for m in t.monads}:
        b = shaped_bind(rt, bot, True, bot)
        for c in sampler.comps(bot):
            if not _same(sampler, b(c, lambda y: y), c):
                return LawCheck("Functor", False,
                                "map with the identity changed a computation")
    return LawCheck("Functor", True)


def check_paired_morphisms(sig: Signature, depth: int = 2, samples: int = 2
                           ) -> LawCheck:
    t = _Tables(sig, depth)
    rt = get_runtime(sig.runtime_name)
    sampler = _Sampler(rt, samples)
    left_shape = {(l, r) for (l, m), rs in t.by_pair.items() if _is_bot(m)
                  for r in rs}
    right_shape = {(m, r) for (l, m), rs in t.by_pair.items() if _is_bot(l)
                   for r in rs}
    for m, n in left_shape - right_shape:
        return LawCheck(
            "Paired morphisms", False,
            f"({print_monadic(m)}, Id) |> {print_monadic(n)} has no (Id, M) twin")
    for m, n in right_shape - left_shape:
        return LawCheck(
            "Paired morphisms", False,
            f"(Id, {print_monadic(m)}) |> {print_monadic(n)} has no (M, Id) twin")
    shapes = {(_is_bot(m), _is_bot(n)) for m, n in left_shape}
    for bm, bn in shapes:
        b1 = shaped_bind(rt, bm, True, bn)
        b2 = shaped_bind(rt, True, bm, bn)
        for f in sampler.funs(bm):
            for v in (0, 4):
                if not _same(sampler, b1(f(v), lambda y: y), b2(v, f)):
                    return LawCheck("Paired morphisms", False,
                                    "the two coercion forms disagree")
    return LawCheck("Paired morphisms", True)


def check_diamond(sig: Signature, depth: int = 2) -> LawCheck:
    t = _Tables(sig, depth)
    lhs: dict[tuple, int] = {}
    for (mi, ni), pmask in t.res_mask.items():
        for pi in t.bits(pmask):
            for ri, tmask in t.by_left_idx.get(pi, ()):
                key = (mi, ni, ri)
                lhs[key] = lhs.get(key, 0) | tmask
    rhs: dict[tuple, int] = {}
    for (ni, ri), smask in t.res_mask.items():
        for si in t.bits(smask):
            for mi, tmask in t.by_middle_idx.get(si, ()):
                key = (mi, ni, ri)
                rhs[key] = rhs.get(key, 0) | tmask
    for key in set(lhs) | set(rhs):
        a = lhs.get(key, 0)
        b = rhs.get(key, 0)
        if a != b:
            mi, ni, ri = key
            diff = [t.of_index[i] for i in t.bits(a ^ b)]
            return LawCheck(
                "Diamond", False,
                f"at M={print_monadic(t.of_index[mi])},"
                f" N={print_monadic(t.of_index[ni])},"
                f" R={print_monadic(t.of_index[ri])}: results"
                f" {{{', '.join(sorted(print_monadic(x) for x in diff))}}}"
                " reachable from one side only")
    return LawCheck("Diamond", True)


def _class_results(t: _Tables) -> dict[tuple[bool, bool], set[bool]]:
    """Result Bot-ness reachable from each pair of argument Bot-nesses."""
    cres: dict[tuple[bool, bool], set[bool]] = {}
    for (li, mi), mask in t.res_mask.items():
        s = cres.setdefault((li == 0, mi == 0), set())
        if mask & 1:
            s.add(True)
        if mask & ~1:
            s.add(False)
    return cres


def _assoc_shapes(t: _Tables) -> set[tuple]:
    """Bot-ness shapes (M,N,P,R,T,S) realized by some quadruple of ground
    binds b1@(M,N)|>P, b2@(P,R)|>T, b3@(N,R)|>S, b4@(M,S)|>T.

    The exact sweep stops once it has witnessed every shape that is even
    class-feasible, which it typically does almost immediately."""
    cres = _class_results(t)
    upper: set[tuple] = set()
    for (cm, cn), cps in cres.items():
        for cp in cps:
            for (cp2, cr), cts in cres.items():
                if cp2 != cp:
                    continue
                for ct in cts:
                    for cs in cres.get((cn, cr), ()):
                        if ct in cres.get((cm, cs), ()):
                            upper.add((cm, cn, cp, cr, ct, cs))
    found: set[tuple] = set()
    for (mi, ni), pmask in t.res_mask.items():
        cm, cn = mi == 0, ni == 0
        for pi in t.bits(pmask):
            cp = pi == 0
            for ri, tmask in t.by_left_idx.get(pi, ()):
                cr = ri == 0
                for si in t.bits(t.res_mask.get((ni, ri), 0)):
                    t2 = tmask & t.res_mask.get((mi, si), 0)
                    if not t2:
                        continue
                    cs = si == 0
                    if t2 & 1:
                        found.add((cm, cn, cp, cr, True, cs))
                    if t2 & ~1:
                        found.add((cm, cn, cp, cr, False, cs))
                    if len(found) == len(upper):
                        return found
    return found


def check_associativity(sig: Signature, depth: int = 2, samples: int = 2
                        ) -> LawCheck:
    t = _Tables(sig, depth)
    rt = get_runtime(sig.runtime_name)
    sampler = _Sampler(rt, samples)
    for bm, bn, bp, br, bt, bs in sorted(_assoc_shapes(t)):
        b1 = shaped_bind(rt, bm, bn, bp)
        b2 = shaped_bind(rt, bp, br, bt)
        b3 = shaped_bind(rt, bn, br, bs)
        b4 = shaped_bind(rt, bm, bs, bt)
        for c in sampler.comps(bm):
            for f in sampler.funs(bn):
                for g in sampler.funs(br):
                    lhs = b2(b1(c, f), g)
                    rhs = b4(c, lambda x: b3(f(x), g))
                    if not _same(sampler, lhs, rhs):
                        shape = ", ".join(
                            "Id" if b else "M"
                            for b in (bm, bn, bp, br, bt, bs))
                        return LawCheck(
                            "Associativity", False,
                            f"rebracketing changed an observable result"
                            f" (shape {shape}: left {sampler.observe(lhs)!r},"
                            f" right {sampler.observe(rhs)!r})")
    return LawCheck("Associativity", True)


def check_closure(sig: Signature, depth: int = 2) -> LawCheck:
    t = _Tables(sig, depth)
    morph_src_mask: dict[int, int] = {}
    for n, ss in t.morph_src.items():
        mask = 0
        for s in ss:
            mask |= 1 << t.index[s]
        morph_src_mask[t.index[n]] = mask
    for (mi, ni), pmask in t.res_mask.items():
        us = 0
        for pi in t.bits(pmask):
            us |= t.morph_dst_mask.get(pi, 0)
        if not us:
            continue
        for si in t.bits(morph_src_mask.get(mi, 0)):  # (S, Id) |> M
            for ti in t.bits(morph_src_mask.get(ni, 0)):  # (T, Id) |> N
                have = t.res_mask.get((si, ti), 0)
                if us & ~have:
                    missing = t.of_index[next(t.bits(us & ~have))]
                    return LawCheck(
                        "Closure", False,
                        f"({print_monadic(t.of_index[si])},"
                        f" {print_monadic(t.of_index[ti])}) |>"
                        f" {print_monadic(missing)} required by composition"
                        " but absent")
    return LawCheck("Closure", True)


def check_laws(sig: Signature, depth: int = 2, samples: int = 2) -> LawReport:
    report = LawReport(sig.name, bound_description(sig, depth))
    report.checks.append(check_functor(sig, depth, samples))
    report.checks.append(check_paired_morphisms(sig, depth, samples))
    report.checks.append(check_diamond(sig, depth))
    report.checks.append(check_associativity(sig, depth, samples))
    report.checks.append(check_closure(sig, depth))
    report.checks.append(check_principality(sig, depth))
    return report


def bound_description(sig: Signature, depth: int) -> str:
    if sig.theory.kind == "free":
        return f"depth {depth}"
    return "exhaustive"


# ---------------------------------------------------------------------------
# Derived laws


def check_derived_laws(sig: Signature, depth: int = 2, samples: int = 2
                       ) -> list[LawCheck]:
    t = _Tables(sig, depth)
    rt = get_runtime(sig.runtime_name)
    sampler = _Sampler(rt, samples)
    out = [
        _left_unit(t, rt, sampler),
        _right_unit(t, rt, sampler),
        _morphism_1(t, rt, sampler),
        _morphism_2(t, rt, sampler),
    ]
    return out


def _unit_fn(rt: Runtime, m: MonadicType) -> Callable:
    u = shaped_bind(rt, True, True, _is_bot(m))
    return lambda v: u(v, lambda y: y)


def _left_unit(t: _Tables, rt: Runtime, sampler: _Sampler) -> LawCheck:
    done: set[tuple] = set()
    for gb in t.full_binds:
        if gb.left not in t.units or gb.result != gb.middle:
            continue
        shape = (_is_bot(gb.left), _is_bot(gb.middle))
        if shape in done:
            continue
        done.add(shape)
        unit = _unit_fn(rt, gb.left)
        b = shaped_bind(rt, *shape, _is_bot(gb.result))
        for f in sampler.funs(shape[1]):
            for v in (1, 6):
                if not _same(sampler, b(unit(v), f), f(v)):
                    return LawCheck("Left unit", False,
                                    f"unit into {print_monadic(gb.middle)}"
                                    " is not neutral on the left")
    return LawCheck("Left unit", True)


def _right_unit(t: _Tables, rt: Runtime, sampler: _Sampler) -> LawCheck:
    done: set[tuple] = set()
    for gb in t.full_binds:
        if gb.middle not in t.units or gb.result != gb.left:
            continue
        shape = (_is_bot(gb.left), _is_bot(gb.middle))
        if shape in done:
            continue
        done.add(shape)
        unit = _unit_fn(rt, gb.middle)
        b = shaped_bind(rt, *shape, _is_bot(gb.result))
        for c in sampler.comps(shape[0]):
            if not _same(sampler, b(c, unit), c):
                return LawCheck("Right unit", False,
                                f"unit into {print_monadic(gb.middle)}"
                                " is not neutral on the right")
    return LawCheck("Right unit", True)


def _morphism_1(t: _Tables, rt: Runtime, sampler: _Sampler) -> LawCheck:
    done: set[tuple] = set()
    for m in t.units:
        for n in t.morph_dst.get(m, ()):
            if n not in t.units:
                continue
            shape = (_is_bot(m), _is_bot(n))
            if shape in done:
                continue
            done.add(shape)
            lift_bind = shaped_bind(rt, shape[0], True, shape[1])
            unit1 = _unit_fn(rt, m)
            unit2 = _unit_fn(rt, n)
            for v in (2, 9):
                if not _same(sampler, lift_bind(unit1(v), lambda y: y), unit2(v)):
                    return LawCheck(
                        "Morphism 1", False,
                        f"lifting a unit from {print_monadic(m)} to"
                        f" {print_monadic(n)} is not the target unit")
    return LawCheck("Morphism 1", True)


def _morphism_2_shapes(t: _Tables) -> set[tuple]:
    """Bot-ness shapes (M,P,S,N,Q,T) with b1@(M,P)|>S, morphisms M->N, P->Q,
    S->T, and b2@(N,Q)|>T, collected exactly with a class-feasible cap."""
    cres = _class_results(t)
    cmorph: dict[bool, set[bool]] = {}
    for mi, mask in t.morph_dst_mask.items():
        s = cmorph.setdefault(mi == 0, set())
        if mask & 1:
            s.add(True)
        if mask & ~1:
            s.add(False)
    upper: set[tuple] = set()
    for (cm, cp), css in cres.items():
        if cp:
            continue
        for cs in css:
            for cn in cmorph.get(cm, ()):
                for cq in cmorph.get(cp, ()):
                    for ct in cres.get((cn, cq), ()):
                        if ct in cmorph.get(cs, ()):
                            upper.add((cm, cp, cs, cn, cq, ct))
    found: set[tuple] = set()
    for (mi, pi), smask in t.res_mask.items():
        if pi == 0:
            continue
        cm, cp = mi == 0, False
        # Merge the morphism targets of the possible S results by class so
        # the inner loops stay per-pair rather than per-result.
        s_dst = {True: 0, False: 0}
        for si in t.bits(smask):
            s_dst[si == 0] |= t.morph_dst_mask.get(si, 0)
        for ni in t.bits(t.morph_dst_mask.get(mi, 0)):
            cn = ni == 0
            for qi in t.bits(t.morph_dst_mask.get(pi, 0)):
                cq = qi == 0
                tmask = t.res_mask.get((ni, qi), 0)
                if not tmask:
                    continue
                for cs in (True, False):
                    t2 = tmask & s_dst[cs]
                    if t2 & 1:
                        found.add((cm, cp, cs, cn, cq, True))
                    if t2 & ~1:
                        found.add((cm, cp, cs, cn, cq, False))
                if len(found) == len(upper):
                    return found
    return found


def _morphism_2(t: _Tables, rt: Runtime, sampler: _Sampler) -> LawCheck:
    for bm, bp, bs, bn, bq, bt in sorted(_morphism_2_shapes(t)):
        b1 = shaped_bind(rt, bm, bp, bs)
        b2 = shaped_bind(rt, bn, bq, bt)
        l1 = shaped_bind(rt, bm, True, bn)
        l2 = shaped_bind(rt, bp, True, bq)
        l3 = shaped_bind(rt, bs, True, bt)
        for c in sampler.comps(bm):
            for f in sampler.funs(bp):
                lhs = l3(b1(c, f), lambda y: y)
                rhs = b2(l1(c, lambda y: y),
                         lambda x: l2(f(x), lambda y: y))
                if not _same(sampler, lhs, rhs):
                    return LawCheck(
                        "Morphism 2", False,
                        "lifting after binding differs from"
                        " binding the lifted parts")
    return LawCheck("Morphism 2", True)


# ---------------------------------------------------------------------------
# Principality


def check_principality(sig: Signature, depth: int = 2, max_sets: int = 3
                       ) -> LawCheck:
    """Every intersection of up to `max_sets` distinct join-sets that is
    non-empty must contain a principal element: one with a coercion onto
    every other member.  Intersections are built stagewise with
    deduplication, since distinct join-sets intersect to far fewer sets than
    the combination count suggests."""
    table = sig.bind_table(depth)
    distinct: list[frozenset] = []
    seen: set[frozenset] = set()
    for rs in table.values():
        f = frozenset(rs)
        if f and f not in seen:
            seen.add(f)
            distinct.append(f)
    layer: set[frozenset] = set(distinct)
    todo = set(layer)
    for _ in range(max_sets - 1):
        new: set[frozenset] = set()
        for a in todo:
            for b in distinct:
                c = a & b
                if c and c not in layer and c not in new:
                    new.add(c)
        layer |= new
        todo = new
        if not new:
            break
    for c in sorted(layer, key=lambda f: (len(f), sorted(map(print_monadic, f)))):
        if _principal_of(sig, table, c, depth) is None:
            names = "{" + ", ".join(sorted(print_monadic(x) for x in c)) + "}"
            return LawCheck(
                "Principality", False,
                f"candidate set {names} has no principal element")
    return LawCheck("Principality", True)


def _principal_of(sig: Signature, table: dict, c: frozenset, depth: int
                  ) -> Optional[MonadicType]:
    for cand in sorted(c, key=lambda m: _canon_key(sig, m)):
        if all(other == cand or other in table.get((cand, BOT), ())
               for other in c):
            return cand
    return None


def _canon_key(sig: Signature, m: MonadicType) -> tuple:
    if _is_bot(m):
        return (0,)
    return (1, m.con, tuple(sig.theory.canonical_key(ix) for ix in m.indexes))
