"""Grounding residual constraint bags against a signature.

Solving works over the bounded ground universe.  Every variable in the bag —
monadic variables at constraint positions and index variables inside ground
constructors — gets a candidate set, pruned to fixpoint by support
propagation: a candidate survives only while some ground bind instantiates
its constraint compatibly with every other candidate set.  An empty set
pinpoints the first unsolvable constraint for diagnostics.  Search then
assigns variables in first-occurrence order; at each choice the principal
join of the variable's already-determined in-flows is tried first, giving
canonical solutions, with remaining candidates in canonical order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .graph import FlowInterp, build_graph, find_core, flow_interpretation
from .runtime import Comp, Runtime, get_runtime, shaped_bind
from .signature import Signature, entail_with_reasons, principal_join
from .syntax import (
    BOT,
    Constraint,
    MBot,
    MGround,
    MVar,
    MonadicType,
    PmError,
    TCon,
    TSet,
    TVar,
    ValueType,
    free_type_vars,
    print_constraint,
    print_monadic,
    print_value_type,
)


class SolveBudget(PmError):
    exit_code = 2


@dataclass(frozen=True)
class Solution:
    m_assign: tuple[tuple[int, MonadicType], ...]
    t_assign: tuple[tuple[str, ValueType], ...]

    def monads(self) -> dict[int, MonadicType]:
        return dict(self.m_assign)

    def types(self) -> dict[str, ValueType]:
        return dict(self.t_assign)

    def monad(self, ident: int) -> MonadicType:
        return dict(self.m_assign)[ident]


@dataclass
class Diagnosis:
    constraint: Optional[Constraint] = None
    reasons: list[str] = field(default_factory=list)
    cyclic: bool = False

    def render(self) -> str:
        if self.cyclic:
            return "unsolved: cyclic constraints (no grounding within the bound)"
        if self.constraint is None:
            return "unsolved: no grounding exists within the bound"
        lines = [f"no way to solve {print_constraint(self.constraint)}"]
        lines.extend(f"  {r}" for r in self.reasons)
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Variables, patterns, and matching


def bag_variables(bag: list[Constraint]) -> tuple[list[int], list[str]]:
    """Monadic and index variables in first-occurrence order."""
    mvars: list[int] = []
    tvars: list[str] = []

    def walk_index(v: ValueType) -> None:
        if isinstance(v, TVar):
            if v.name not in tvars:
                tvars.append(v.name)
        elif isinstance(v, TCon):
            for a in v.args:
                walk_index(a)

    for c in bag:
        for slot in (c.left, c.middle, c.result):
            if isinstance(slot, MVar):
                if slot.ident not in mvars:
                    mvars.append(slot.ident)
            elif isinstance(slot, MGround):
                for ix in slot.indexes:
                    walk_index(ix)
    return mvars, tvars


def _match_index(pat: ValueType, g: ValueType, binding: dict[str, ValueType]
                 ) -> Optional[dict[str, ValueType]]:
    if isinstance(pat, TVar):
        have = binding.get(pat.name)
        if have is None:
            out = dict(binding)
            out[pat.name] = g
            return out
        return binding if have == g else None
    if isinstance(pat, TSet):
        return binding if pat == g else None
    if isinstance(pat, TCon):
        if not isinstance(g, TCon) or pat.con != g.con or len(pat.args) != len(g.args):
            return None
        for p, a in zip(pat.args, g.args):
            binding = _match_index(p, a, binding)
            if binding is None:
                return None
        return binding
    return binding if pat == g else None


def _match_slot(pat: MonadicType, g: MonadicType, binding: dict[str, ValueType]
                ) -> Optional[dict[str, ValueType]]:
    if isinstance(pat, MBot):
        return binding if isinstance(g, MBot) else None
    assert isinstance(pat, MGround)
    if not isinstance(g, MGround) or pat.con != g.con:
        return None
    for p, a in zip(pat.indexes, g.indexes):
        binding = _match_index(p, a, binding)
        if binding is None:
            return None
    return binding


def apply_solution_m(m: MonadicType, sol: Solution) -> MonadicType:
    if isinstance(m, MVar):
        return sol.monads().get(m.ident, m)
    if isinstance(m, MGround):
        ts = sol.types()
        return MGround(m.con, tuple(_subst_index(ix, ts) for ix in m.indexes))
    return m


def _subst_index(v: ValueType, ts: dict[str, ValueType]) -> ValueType:
    if isinstance(v, TVar):
        return ts.get(v.name, v)
    if isinstance(v, TCon):
        return TCon(v.con, tuple(_subst_index(a, ts) for a in v.args))
    return v


def apply_solution_c(c: Constraint, sol: Solution) -> Constraint:
    return Constraint(
        c.cid,
        apply_solution_m(c.left, sol),
        apply_solution_m(c.middle, sol),
        apply_solution_m(c.result, sol),
    )


def solution_satisfies(bag: list[Constraint], sig: Signature, sol: Solution,
                       depth: int = 2) -> bool:
    for c in bag:
        g = apply_solution_c(c, sol)
        if free_type_vars(g.triple).mvars or free_type_vars(g.triple).tvars:
            return False
        if not sig.has_ground(g.left, g.middle, g.result, depth):
            return False
    return True


# ---------------------------------------------------------------------------
# The solver state


def _canon_m_key(sig: Signature, m: MonadicType) -> tuple:
    if isinstance(m, MBot):
        return (0,)
    cons = list(sig.constructors)
    return (1, cons.index(m.con) if m.con in cons else len(cons),
            tuple(sig.theory.canonical_key(ix) for ix in m.indexes))


class _Solver:
    def __init__(self, bag: list[Constraint], sig: Signature, depth: int,
                 fixed_m: Optional[dict[int, MonadicType]] = None,
                 fixed_t: Optional[dict[str, ValueType]] = None,
                 prefer_principal: bool = True,
                 node_budget: int = 2_000_000):
        self.bag = list(bag)
        self.sig = sig
        self.depth = depth
        self.prefer_principal = prefer_principal
        self.nodes = 0
        self.node_budget = node_budget
        self.mvars, self.tvars = bag_variables(self.bag)
        monads = sig.ground_monads(depth)
        domain = sig.theory.ground_domain(depth)
        self.cand_m: dict[int, list[MonadicType]] = {}
        for i in self.mvars:
            if fixed_m and i in fixed_m:
                self.cand_m[i] = [fixed_m[i]]
            else:
                self.cand_m[i] = list(monads)
        self.cand_t: dict[str, list[ValueType]] = {}
        for n in self.tvars:
            if fixed_t and n in fixed_t:
                self.cand_t[n] = [fixed_t[n]]
            else:
                self.cand_t[n] = list(domain)
        self.binds = sig.ground_binds(depth)
        self.conflict: Optional[Constraint] = None
        # Candidate domains of the conflict's own variables at the moment the
        # conflict was recorded; used to ground the constraint for diagnosis.
        self.conflict_m: dict[int, list[MonadicType]] = {}
        self.conflict_t: dict[str, list[ValueType]] = {}
        self._m_id: dict[MonadicType, int] = {}
        for m in itertools.chain(monads, *self.cand_m.values()):
            if m not in self._m_id:
                self._m_id[m] = len(self._m_id)
        self._t_id: dict[ValueType, int] = {}
        for v in itertools.chain(domain, *self.cand_t.values()):
            if v not in self._t_id:
                self._t_id[v] = len(self._t_id)
        self._tables = [self._build_table(c) for c in self.bag]
        self._pj_cache: dict[frozenset, Optional[MonadicType]] = {}

    # -- propagation --------------------------------------------------------

    def _build_table(self, c: Constraint) -> tuple[Constraint, list[tuple], object]:
        """Ground binds matching a constraint's shape, as an id matrix with
        one column per variable the constraint mentions."""
        keys: list[tuple] = []
        for s in (c.left, c.middle, c.result):
            if isinstance(s, MVar):
                if ("m", s.ident) not in keys:
                    keys.append(("m", s.ident))
            elif isinstance(s, MGround):
                for n in sorted(free_type_vars(s).tvars):
                    if ("t", n) not in keys:
                        keys.append(("t", n))
        rows: set[tuple] = set()
        for gb in self.binds:
            binding: Optional[dict[str, ValueType]] = {}
            vals: dict[tuple, int] = {}
            ok = True
            for slot, g in zip((c.left, c.middle, c.result), gb.triple):
                if isinstance(slot, MVar):
                    mid = self._m_id.get(g)
                    k = ("m", slot.ident)
                    if mid is None or vals.get(k, mid) != mid:
                        ok = False
                        break
                    vals[k] = mid
                else:
                    binding = _match_slot(slot, g, binding)
                    if binding is None:
                        ok = False
                        break
            if not ok:
                continue
            assert binding is not None
            for n, v in binding.items():
                tid = self._t_id.get(v)
                if tid is None:
                    ok = False
                    break
                vals[("t", n)] = tid
            if ok:
                rows.add(tuple(vals[k] for k in keys))
        arr = np.array(sorted(rows), dtype=np.int32).reshape(len(rows), len(keys))
        return (c, keys, arr)

    def _ids(self, kind: str, values: list) -> np.ndarray:
        table = self._m_id if kind == "m" else self._t_id
        return np.fromiter((table[v] for v in values), np.int32, len(values))

    def propagate(self, cand_m: dict, cand_t: dict) -> bool:
        """Prune candidates to fixpoint.  False (and a recorded conflict) when
        some constraint has no support."""
        full_m, full_t = len(self._m_id), len(self._t_id)
        changed = True
        while changed:
            changed = False
            for c, keys, arr in self._tables:
                if not keys:
                    if arr.shape[0] == 0:
                        self._record_conflict(c, {}, {})
                        return False
                    continue
                start = {
                    k: (cand_m[k[1]] if k[0] == "m" else cand_t[k[1]])
                    for k in keys
                }
                mask = None
                for j, (kind, key) in enumerate(keys):
                    cur = start[(kind, key)]
                    if len(cur) >= (full_m if kind == "m" else full_t):
                        continue
                    colmask = np.isin(arr[:, j], self._ids(kind, cur))
                    mask = colmask if mask is None else mask & colmask
                kept = arr if mask is None else arr[mask]
                if kept.shape[0] == 0:
                    self._conflict_from(c, keys, start)
                    return False
                for j, (kind, key) in enumerate(keys):
                    sup = set(np.unique(kept[:, j]).tolist())
                    idmap = self._m_id if kind == "m" else self._t_id
                    cur = cand_m[key] if kind == "m" else cand_t[key]
                    new = [v for v in cur if idmap[v] in sup]
                    if len(new) != len(cur):
                        if kind == "m":
                            cand_m[key] = new
                        else:
                            cand_t[key] = new
                        changed = True
                        if not new:
                            self._conflict_from(c, keys, start)
                            return False
        return True

    def _conflict_from(self, c: Constraint, keys: list[tuple],
                       start: dict) -> None:
        msets = {k: set(vs) for (kind, k), vs in start.items() if kind == "m"}
        tsets = {k: set(vs) for (kind, k), vs in start.items() if kind == "t"}
        self._record_conflict(c, msets, tsets)

    def _record_conflict(self, c: Constraint, msets: dict, tsets: dict) -> None:
        self.conflict = c
        self.conflict_m = {
            i: sorted(vs, key=lambda m: _canon_m_key(self.sig, m))
            for i, vs in msets.items()
        }
        self.conflict_t = {
            n: sorted(vs, key=self.sig.theory.canonical_key)
            for n, vs in tsets.items()
        }

    # -- search --------------------------------------------------------------

    def _pick(self, cand_m: dict, cand_t: dict) -> Optional[tuple[str, object]]:
        for i in self.mvars:
            if len(cand_m[i]) > 1:
                return ("m", i)
        for n in self.tvars:
            if len(cand_t[n]) > 1:
                return ("t", n)
        return None

    def _ordered_candidates(self, ident: int, cand_m: dict, cand_t: dict
                            ) -> list[MonadicType]:
        cands = list(cand_m[ident])
        cands.sort(key=lambda m: _canon_m_key(self.sig, m))
        if not self.prefer_principal:
            return cands
        pairs: list[tuple[MonadicType, MonadicType]] = []
        for c in self.bag:
            if isinstance(c.result, MVar) and c.result.ident == ident:
                sides = []
                for slot in (c.left, c.middle):
                    g = self._determined(slot, cand_m, cand_t)
                    if g is None:
                        sides = None
                        break
                    sides.append(g)
                if sides is not None:
                    pairs.append((sides[0], sides[1]))
        if not pairs:
            return cands
        key = frozenset(pairs)
        if key not in self._pj_cache:
            self._pj_cache[key] = principal_join(self.sig, pairs, self.depth)
        pj = self._pj_cache[key]
        if pj is not None and pj in cands:
            cands.remove(pj)
            cands.insert(0, pj)
        return cands

    def _determined(self, slot: MonadicType, cand_m: dict, cand_t: dict
                    ) -> Optional[MonadicType]:
        if isinstance(slot, MBot):
            return slot
        if isinstance(slot, MVar):
            cs = cand_m[slot.ident]
            return cs[0] if len(cs) == 1 else None
        assert isinstance(slot, MGround)
        idx = []
        for ix in slot.indexes:
            names = free_type_vars(ix).tvars
            ts = {}
            for n in names:
                cs = cand_t[n]
                if len(cs) != 1:
                    return None
                ts[n] = cs[0]
            idx.append(_subst_index(ix, ts))
        return MGround(slot.con, tuple(idx))

    def _solution(self, cand_m: dict, cand_t: dict) -> Solution:
        return Solution(
            tuple((i, cand_m[i][0]) for i in self.mvars),
            tuple((n, cand_t[n][0]) for n in self.tvars),
        )

    def search(self, cand_m: dict, cand_t: dict, collect: list[Solution],
               want_all: bool, limit: Optional[int]) -> bool:
        """Returns True when enough solutions were found to stop."""
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise SolveBudget("constraint search exceeded its budget")
        if not self.propagate(cand_m, cand_t):
            return False
        pick = self._pick(cand_m, cand_t)
        if pick is None:
            collect.append(self._solution(cand_m, cand_t))
            if limit is not None and len(collect) >= limit:
                return True
            return not want_all
        kind, key = pick
        if kind == "m":
            values: Iterable = self._ordered_candidates(key, cand_m, cand_t)
        else:
            values = sorted(cand_t[key], key=self.sig.theory.canonical_key)
        for v in values:
            nm = {i: list(cs) for i, cs in cand_m.items()}
            nt = {n: list(cs) for n, cs in cand_t.items()}
            if kind == "m":
                nm[key] = [v]
            else:
                nt[key] = [v]
            if self.search(nm, nt, collect, want_all, limit):
                return True
        return False

    def diagnose(self) -> Diagnosis:
        if self.conflict is not None:
            shown = self._display_constraint(self.conflict)
            return Diagnosis(shown, self._conflict_reasons(shown))
        if self._has_cycle():
            return Diagnosis(cyclic=True)
        return Diagnosis()

    def _display_constraint(self, c: Constraint) -> Constraint:
        pin_m = dict(self.conflict_m) or self.cand_m
        pin_t = dict(self.conflict_t) or self.cand_t
        fake = Solution(
            tuple((i, cs[0]) for i, cs in pin_m.items() if len(cs) == 1),
            tuple((n, cs[0]) for n, cs in pin_t.items() if len(cs) == 1),
        )
        return apply_solution_c(c, fake)

    def _conflict_reasons(self, shown: Constraint) -> list[str]:
        """Explain the conflict by grounding it over what was left of its
        variables' candidate sets and collecting the failing side
        conditions."""
        vs = free_type_vars(shown)
        mvars = sorted(vs.mvars)
        tvars = sorted(vs.tvars)
        m_dom = {i: self.conflict_m.get(i) or self.cand_m.get(i, []) for i in mvars}
        t_dom = {n: self.conflict_t.get(n) or self.cand_t.get(n, []) for n in tvars}
        lines: list[str] = []
        for i in mvars:
            opts = ", ".join(print_monadic(m) for m in m_dom[i])
            lines.append(f"?{i} ranges over: {opts}")
        for n in tvars:
            opts = ", ".join(print_value_type(v) for v in t_dom[n])
            lines.append(f"{n} ranges over: {opts}")
        combos = 1
        for d in list(m_dom.values()) + list(t_dom.values()):
            combos *= len(d)
        seen: set[str] = set()
        if 0 < combos <= 256:
            for ms in itertools.product(*(m_dom[i] for i in mvars)):
                for ts in itertools.product(*(t_dom[n] for n in tvars)):
                    sol = Solution(tuple(zip(mvars, ms)), tuple(zip(tvars, ts)))
                    ground = apply_solution_c(shown, sol)
                    e, rs = entail_with_reasons(self.sig, ground, self.depth)
                    if e is None:
                        for r in rs:
                            if r not in seen:
                                seen.add(r)
                                lines.append(r)
        else:
            _, rs = entail_with_reasons(self.sig, shown, self.depth)
            for r in rs:
                if r not in seen:
                    seen.add(r)
                    lines.append(r)
        return lines

    def _has_cycle(self) -> bool:
        g = build_graph(self.bag)
        chosen = frozenset(range(len(g.flow_edges)))
        from .graph import _violation_flow_edges
        return _violation_flow_edges(g, chosen) is not None


# ---------------------------------------------------------------------------
# Public entry points


def solve(bag: list[Constraint], sig: Signature, depth: int = 2,
          fixed_m: Optional[dict[int, MonadicType]] = None,
          fixed_t: Optional[dict[str, ValueType]] = None,
          prefer_principal: bool = True
          ) -> tuple[Optional[Solution], Optional[Diagnosis]]:
    if not sig.ground_binds(depth):
        return None, Diagnosis(reasons=["the signature has no ground binds"])
    solver = _Solver(bag, sig, depth, fixed_m, fixed_t, prefer_principal)
    found: list[Solution] = []
    solver.search(
        {i: list(c) for i, c in solver.cand_m.items()},
        {n: list(c) for n, c in solver.cand_t.items()},
        found, want_all=False, limit=None,
    )
    if found:
        return found[0], None
    return None, solver.diagnose()


def enumerate_solutions(bag: list[Constraint], sig: Signature, depth: int = 2,
                        fixed_m: Optional[dict[int, MonadicType]] = None,
                        fixed_t: Optional[dict[str, ValueType]] = None,
                        limit: Optional[int] = None) -> list[Solution]:
    solver = _Solver(bag, sig, depth, fixed_m, fixed_t, prefer_principal=False)
    found: list[Solution] = []
    solver.search(
        {i: list(c) for i, c in solver.cand_m.items()},
        {n: list(c) for n, c in solver.cand_t.items()},
        found, want_all=True, limit=limit,
    )
    seen = set()
    out = []
    for s in found:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def build_evidence(bag: list[Constraint], sol: Solution, rt: Runtime) -> dict[int, Callable]:
    eenv: dict[int, Callable] = {}
    for c in bag:
        g = apply_solution_c(c, sol)
        eenv[c.cid] = shaped_bind(
            rt,
            isinstance(g.left, MBot),
            isinstance(g.middle, MBot),
            isinstance(g.result, MBot),
        )
    return eenv


# ---------------------------------------------------------------------------
# Observational equivalence of solutions


def _obs(x, states: list) -> object:
    if isinstance(x, Comp):
        return tuple(x.run(s) for s in states)
    return tuple((x, s) for s in states)


def _sample_pair_comps(rt: Runtime, bot1: bool, bot2: bool, n: int
                       ) -> list[tuple[object, object]]:
    """Computation samples for a slot assigned shape bot1 by one solution and
    bot2 by the other.  A seed denotes the same data on both sides: plain
    where the shape is Bot, a unit injection otherwise.  Fully effectful
    samples only make sense when both sides are non-Bot."""
    seeds = [4 * i + 2 for i in range(n)]

    def inject(v, bot):
        return v if bot else Comp(lambda s, v=v: (v, s))

    out = [(inject(v, bot1), inject(v, bot2)) for v in seeds]
    if not bot1 and not bot2:
        out += [(rt.sample_comps(i), rt.sample_comps(i)) for i in range(n)]
    return out


def _sample_pair_funs(rt: Runtime, bot1: bool, bot2: bool, n: int
                      ) -> list[tuple[Callable, Callable]]:
    def plain(j):
        return lambda v: v * 3 + j

    def inject(j, bot):
        if bot:
            return plain(j)
        return lambda v, j=j: Comp(lambda s, v=v: (v * 3 + j, s))

    out = [(inject(j, bot1), inject(j, bot2)) for j in range(n)]
    if not bot1 and not bot2:
        out += [(rt.sample_funs(j), rt.sample_funs(j)) for j in range(n)]
    return out


def _composite(rt: Runtime, interp: FlowInterp, inner: Constraint,
               outer: Constraint) -> Callable:
    bots = tuple(isinstance(s, MBot) for s in
                 (inner.left, inner.middle, inner.result,
                  outer.left, outer.middle, outer.result))
    return _shaped_composite(rt, interp.position, bots)


def solutions_equivalent(bag: list[Constraint], sig: Signature, s1: Solution,
                         s2: Solution, protected: set[int], depth: int = 2,
                         samples: int = 2) -> bool:
    """Two solutions agreeing on the protected interface are equivalent when
    every core flow edge's composite behaves identically under both."""
    m1, m2 = s1.monads(), s2.monads()
    for i in protected:
        if m1.get(i) != m2.get(i):
            return False
    rt = get_runtime(sig.runtime_name)
    states = rt.sample_states()[:samples]
    g = build_graph(bag)
    core = find_core(g, protected)
    if core is None:
        return False
    for edge in core:
        interp = flow_interpretation(g, edge)
        inner1 = apply_solution_c(g.constraint(interp.inner_cid), s1)
        outer1 = apply_solution_c(g.constraint(interp.outer_cid), s1)
        inner2 = apply_solution_c(g.constraint(interp.inner_cid), s2)
        outer2 = apply_solution_c(g.constraint(interp.outer_cid), s2)
        f1 = _composite(rt, interp, inner1, outer1)
        f2 = _composite(rt, interp, inner2, outer2)
        if interp.position == 0:
            x_shapes = (inner1.left, inner2.left)
            y_shapes = (inner1.middle, inner2.middle)
            z_shapes = (outer1.middle, outer2.middle)
        else:
            x_shapes = (outer1.left, outer2.left)
            y_shapes = (inner1.left, inner2.left)
            z_shapes = (inner1.middle, inner2.middle)
        xs = _sample_pair_comps(rt, isinstance(x_shapes[0], MBot),
                                isinstance(x_shapes[1], MBot), samples)
        ys = _sample_pair_funs(rt, isinstance(y_shapes[0], MBot),
                               isinstance(y_shapes[1], MBot), samples)
        zs = _sample_pair_funs(rt, isinstance(z_shapes[0], MBot),
                               isinstance(z_shapes[1], MBot), samples)
        for (x1, x2), (y1, y2), (z1, z2) in itertools.product(xs, ys, zs):
            try:
                r1 = f1(x1, y1, z1)
                r2 = f2(x2, y2, z2)
            except PmError:
                return False
            if _obs(r1, states) != _obs(r2, states):
                return False
    return True


@dataclass
class CoherenceReport:
    ok: bool
    solutions: int
    groups: int
    pairs: int
    witness: Optional[str] = None


def _freeze(x) -> object:
    if isinstance(x, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in x.items()))
    if isinstance(x, (list, tuple)):
        return tuple(_freeze(v) for v in x)
    return x


def _slot_samples_comp(rt: Runtime, bot: bool, n: int) -> list[tuple]:
    """(category, computation) samples for one edge slot.  Category ("b", k)
    samples denote the same data under either shape; ("e", k) samples are
    genuinely effectful and exist only for non-Bot shapes."""
    out: list[tuple] = []
    for k in range(n):
        v = 4 * k + 2
        out.append((("b", k), v if bot else Comp(lambda s, v=v: (v, s))))
    if not bot:
        out += [(("e", k), rt.sample_comps(k)) for k in range(n)]
    return out


def _slot_samples_fun(rt: Runtime, bot: bool, n: int) -> list[tuple]:
    out: list[tuple] = []
    for j in range(n):
        if bot:
            out.append((("b", j), lambda v, j=j: v * 3 + j))
        else:
            out.append((("b", j), lambda v, j=j: Comp(lambda s, v=v: (v * 3 + j, s))))
    if not bot:
        out += [(("e", j), rt.sample_funs(j)) for j in range(n)]
    return out


def _solution_shapes(g, interps, sol: Solution) -> tuple:
    """Bot-ness pattern of the core composites under a solution.  The
    observable behaviour of every composite is a function of this pattern
    alone: the runtime realizations and the sample sets are all chosen by
    slot shape."""
    out = []
    for interp in interps:
        inner = apply_solution_c(g.constraint(interp.inner_cid), sol)
        outer = apply_solution_c(g.constraint(interp.outer_cid), sol)
        out.append(tuple(isinstance(s, MBot) for s in
                         (inner.left, inner.middle, inner.result,
                          outer.left, outer.middle, outer.result)))
    return tuple(out)


def _shape_signature(interps, rt: Runtime, states: list, shapes_key: tuple,
                     samples: int) -> tuple[tuple, dict, bool]:
    """Observable behaviour of the core composites for one Bot-ness pattern.

    Returns (basic, effectful, errored): `basic` covers the shape-adapted
    seed samples every pattern answers, so two patterns are comparable on it
    regardless of their shapes; `effectful` entries exist only where this
    pattern's slots are non-Bot and may be compared only against patterns
    that also have them; `errored` marks a runtime failure on some sample,
    which the pairwise comparison never accepts as equivalent."""
    basic: dict = {}
    eff: dict = {}
    errored = False
    for ei, (interp, bots) in enumerate(zip(interps, shapes_key)):
        f = _shaped_composite(rt, interp.position, bots)
        if interp.position == 0:
            sample_bots = (bots[0], bots[1], bots[4])
        else:
            sample_bots = (bots[3], bots[0], bots[1])
        xs = _slot_samples_comp(rt, sample_bots[0], samples)
        ys = _slot_samples_fun(rt, sample_bots[1], samples)
        zs = _slot_samples_fun(rt, sample_bots[2], samples)
        for (cx, x), (cy, y), (cz, z) in itertools.product(xs, ys, zs):
            try:
                o = _freeze(_obs(f(x, y, z), states))
            except PmError:
                o = ("error",)
                errored = True
            key = (ei, cx, cy, cz)
            if cx[0] == "e" or cy[0] == "e" or cz[0] == "e":
                eff[key] = o
            else:
                basic[key] = o
    return tuple(sorted(basic.items())), eff, errored


def _shaped_composite(rt: Runtime, position: int, bots: tuple) -> Callable:
    b_in = shaped_bind(rt, bots[0], bots[1], bots[2])
    b_out = shaped_bind(rt, bots[3], bots[4], bots[5])
    if position == 0:
        return lambda x, y, z: b_out(b_in(x, y), z)
    return lambda x, y, z: b_out(x, lambda a: b_in(y(a), z))


def coherence_check(bag: list[Constraint], sig: Signature, protected: set[int],
                    depth: int = 2, samples: int = 2,
                    limit: Optional[int] = 20_000) -> CoherenceReport:
    """Enumerate bounded solutions, group them by their protected interface,
    and require observational agreement inside each group.

    Rather than comparing each pair directly, every solution gets an
    observation signature over the core flow edges (each side of the old
    pairwise comparison is computed from shared seeds independently), so a
    group is coherent iff all members share the basic signature, agree on
    every effectful entry they have in common, and none hits a runtime
    failure.  This decides exactly the same property in O(n) work instead of
    O(n^2); signatures are further memoized on the Bot-ness pattern they are
    a function of."""
    sols = enumerate_solutions(bag, sig, depth, limit=limit)
    rt = get_runtime(sig.runtime_name)
    states = rt.sample_states()[:samples]
    g = build_graph(bag)
    core = find_core(g, protected)
    interps = None if core is None else [flow_interpretation(g, e) for e in core]
    groups: dict[tuple, list[Solution]] = {}
    for s in sols:
        ms = s.monads()
        key = tuple((i, ms[i]) for i in sorted(protected) if i in ms)
        groups.setdefault(key, []).append(s)
    pairs = 0
    memo: dict[tuple, tuple[tuple, dict, bool]] = {}
    for key, members in groups.items():
        pairs += len(members) * (len(members) - 1) // 2
        if len(members) < 2:
            continue
        if interps is None:
            return CoherenceReport(
                False, len(sols), len(groups), pairs,
                witness="no core covers the protected interface")
        rep: dict[tuple, Solution] = {}
        eff_seen: dict[tuple, tuple[object, Solution]] = {}
        for s in members:
            shapes = _solution_shapes(g, interps, s)
            if shapes not in memo:
                memo[shapes] = _shape_signature(interps, rt, states, shapes,
                                                samples)
            basic, eff, errored = memo[shapes]
            if errored:
                other = next((m for m in members if m is not s), s)
                return CoherenceReport(
                    False, len(sols), len(groups), pairs,
                    witness=_render_solution_pair(other, s))
            if basic not in rep:
                rep[basic] = s
                if len(rep) > 1:
                    other = next(v for k, v in rep.items() if k != basic)
                    return CoherenceReport(
                        False, len(sols), len(groups), pairs,
                        witness=_render_solution_pair(other, s))
            for k, v in eff.items():
                if k in eff_seen and eff_seen[k][0] != v:
                    return CoherenceReport(
                        False, len(sols), len(groups), pairs,
                        witness=_render_solution_pair(eff_seen[k][1], s))
                eff_seen.setdefault(k, (v, s))
    return CoherenceReport(True, len(sols), len(groups), pairs)


def _render_solution_pair(a: Solution, b: Solution) -> str:
    diffs = []
    ma, mb = a.monads(), b.monads()
    for i in sorted(set(ma) | set(mb)):
        if ma.get(i) != mb.get(i):
            diffs.append(
                f"v{i}: {print_monadic(ma[i])} vs {print_monadic(mb[i])}")
    return "; ".join(diffs) or "(identical assignments)"


def render_solution(sol: Solution, mvar_names: Optional[dict[int, str]] = None
                    ) -> str:
    parts = []
    for i, m in sol.m_assign:
        name = (mvar_names or {}).get(i, f"v{i}")
        parts.append(f"{name} = {print_monadic(m)}")
    for n, v in sol.t_assign:
        from .syntax import print_value_type
        parts.append(f"{n} = {print_value_type(v)}")
    return "{" + ", ".join(parts) + "}"
