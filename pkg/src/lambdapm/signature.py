"""Signatures: constructor declarations, bind specifications, index theories.

A signature file declares an index theory (a finite lattice, a finite set
algebra over declared atoms, or free first-order terms), unary-constructor
families with their index arities, a set of bind specifications

    bind name : forall vars. side-conditions => (m1, m2) |> m3

and primitive bindings with qualified types.  Entailment instantiates a spec
to match a requested constraint; the ground tables enumerate every instance
over a bounded universe, which is what the law checker and the solver consume.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from .syntax import (
    BOT,
    Constraint,
    MBot,
    MGround,
    MVar,
    MonadicType,
    ParseError,
    PmError,
    Scheme,
    TArrow,
    TCon,
    TSet,
    TVar,
    Token,
    TokenStream,
    UNIT,
    ValueType,
    print_constraint,
    print_monadic,
    print_value_type,
    tokenize,
)


class SignatureError(PmError):
    exit_code = 2


# ---------------------------------------------------------------------------
# Side conditions (theory constraints)


@dataclass(frozen=True)
class SUnion:
    """Union of set-valued index expressions (side conditions only)."""

    parts: tuple["IndexExpr", ...]


IndexExpr = Union[TVar, TCon, TSet, SUnion]


@dataclass(frozen=True)
class Phi:
    op: str  # '<=' | 'sub' | '='
    lhs: IndexExpr
    rhs: IndexExpr

    def __str__(self) -> str:
        return f"{_show_iexpr(self.lhs)} {self.op} {_show_iexpr(self.rhs)}"


def _show_iexpr(e: IndexExpr) -> str:
    if isinstance(e, SUnion):
        return " + ".join(_show_iexpr(p) for p in e.parts)
    return print_value_type(e)


def _iexpr_vars(e: IndexExpr, out: set[str]) -> None:
    if isinstance(e, TVar):
        out.add(e.name)
    elif isinstance(e, TCon):
        for a in e.args:
            _iexpr_vars(a, out)
    elif isinstance(e, SUnion):
        for p in e.parts:
            _iexpr_vars(p, out)


def _subst_iexpr(e: IndexExpr, env: dict[str, ValueType]) -> IndexExpr:
    if isinstance(e, TVar):
        got = env.get(e.name)
        if got is None:
            return e
        return _subst_iexpr(got, env)  # chase chains
    if isinstance(e, TCon):
        if not e.args:
            return e
        return TCon(e.con, tuple(_subst_iexpr(a, env) for a in e.args))
    if isinstance(e, SUnion):
        return SUnion(tuple(_subst_iexpr(p, env) for p in e.parts))
    return e


# ---------------------------------------------------------------------------
# Theories


class Theory:
    """Interprets index side conditions and enumerates ground indexes."""

    kind: str = "abstract"

    def validate(self) -> None:
        pass

    def ground_domain(self, depth_bound: int) -> list[ValueType]:
        raise NotImplementedError

    def canonical_key(self, v: ValueType) -> tuple:
        raise NotImplementedError

    def check(self, phi: Phi) -> tuple[bool, str]:
        """Evaluate a fully ground side condition; returns (ok, reason)."""
        raise NotImplementedError

    def check_opaque(self, phi: Phi) -> bool:
        """Side condition whose variables are opaque constants: holds only
        reflexively (both sides identical) or when fully ground and true."""
        vars_: set[str] = set()
        _iexpr_vars(phi.lhs, vars_)
        _iexpr_vars(phi.rhs, vars_)
        if not vars_:
            return self.check(phi)[0]
        return phi.lhs == phi.rhs

    def solve(self, phis: list[Phi], variables: list[str], depth_bound: int = 2
              ) -> Optional[dict[str, ValueType]]:
        """Canonical satisfying assignment: enumerate the ground domain in
        canonical (size, shape) order, first hit wins."""
        domain = self.ground_domain(depth_bound)
        for combo in itertools.product(domain, repeat=len(variables)):
            env = dict(zip(variables, combo))
            if all(self.check(_ground_phi(p, env))[0] for p in phis):
                return env
        return None

    def canonical_default(self, depth_bound: int = 2) -> ValueType:
        return self.ground_domain(depth_bound)[0]


def _ground_phi(phi: Phi, env: dict[str, ValueType]) -> Phi:
    return Phi(phi.op, _subst_iexpr(phi.lhs, env), _subst_iexpr(phi.rhs, env))


class LatticeTheory(Theory):
    kind = "lattice"

    def __init__(self, elements: list[str], covers: list[tuple[str, str]]):
        self.elements = list(elements)
        self.covers = list(covers)
        # reflexive-transitive closure of the declared order
        leq = {(a, a) for a in elements}
        leq |= set(covers)
        changed = True
        while changed:
            changed = False
            for (a, b) in list(leq):
                for (c, d) in list(leq):
                    if b == c and (a, d) not in leq:
                        leq.add((a, d))
                        changed = True
        self._leq = leq
        self._rank = {e: sum(1 for x in elements if (x, e) in leq) for e in elements}

    def validate(self) -> None:
        for a in self.elements:
            for b in self.elements:
                if a != b and (a, b) in self._leq and (b, a) in self._leq:
                    raise SignatureError(f"lattice order is not antisymmetric: {a}, {b}")
                if self.lub(a, b) is None:
                    raise SignatureError(f"lattice join missing for {a}, {b}")
                if self.glb(a, b) is None:
                    raise SignatureError(f"lattice meet missing for {a}, {b}")

    def leq(self, a: str, b: str) -> bool:
        return (a, b) in self._leq

    def _bound(self, a: str, b: str, upper: bool) -> Optional[str]:
        if upper:
            cands = [e for e in self.elements if self.leq(a, e) and self.leq(b, e)]
            best = [e for e in cands if all(self.leq(e, o) for o in cands)]
        else:
            cands = [e for e in self.elements if self.leq(e, a) and self.leq(e, b)]
            best = [e for e in cands if all(self.leq(o, e) for o in cands)]
        return best[0] if best else None

    def lub(self, a: str, b: str) -> Optional[str]:
        return self._bound(a, b, upper=True)

    def glb(self, a: str, b: str) -> Optional[str]:
        return self._bound(a, b, upper=False)

    def ground_domain(self, depth_bound: int = 2) -> list[ValueType]:
        return [TCon(e) for e in sorted(self.elements, key=lambda e: (self._rank[e], e))]

    def canonical_key(self, v: ValueType) -> tuple:
        assert isinstance(v, TCon)
        return (self._rank.get(v.con, 99), v.con)

    def check(self, phi: Phi) -> tuple[bool, str]:
        lhs, rhs = phi.lhs, phi.rhs
        if not isinstance(lhs, TCon) or not isinstance(rhs, TCon):
            return (False, f"not ground: {phi}")
        if phi.op == "<=":
            ok = self.leq(lhs.con, rhs.con)
            return (ok, "" if ok else f"requires {lhs.con} <= {rhs.con}")
        if phi.op == "=":
            ok = lhs.con == rhs.con
            return (ok, "" if ok else f"requires {lhs.con} = {rhs.con}")
        return (False, f"operator {phi.op!r} not supported by a lattice theory")


class SetTheory(Theory):
    kind = "sets"

    def __init__(self, atoms: list[str]):
        self.atoms = sorted(atoms)
        self.top = frozenset(self.atoms)

    def ground_domain(self, depth_bound: int = 2) -> list[ValueType]:
        subsets: list[TSet] = []
        for r in range(len(self.atoms) + 1):
            for combo in itertools.combinations(self.atoms, r):
                subsets.append(TSet(frozenset(combo)))
        return subsets

    def canonical_key(self, v: ValueType) -> tuple:
        assert isinstance(v, TSet)
        return (len(v.atoms), tuple(sorted(v.atoms)))

    def _eval(self, e: IndexExpr) -> Optional[frozenset]:
        if isinstance(e, TSet):
            return e.atoms
        if isinstance(e, SUnion):
            acc: frozenset = frozenset()
            for p in e.parts:
                v = self._eval(p)
                if v is None:
                    return None
                acc |= v
            return acc
        return None

    def check(self, phi: Phi) -> tuple[bool, str]:
        lhs = self._eval(phi.lhs)
        rhs = self._eval(phi.rhs)
        if lhs is None or rhs is None:
            return (False, f"not ground: {phi}")
        if phi.op == "sub":
            ok = lhs <= rhs
        elif phi.op == "=":
            ok = lhs == rhs
        else:
            return (False, f"operator {phi.op!r} not supported by a set theory")
        if ok:
            return (True, "")
        show = lambda s: "{%s}" % ", ".join(sorted(s))
        return (False, f"requires {show(lhs)} {phi.op} {show(rhs)}")

    def check_opaque(self, phi: Phi) -> bool:
        vars_: set[str] = set()
        _iexpr_vars(phi.lhs, vars_)
        _iexpr_vars(phi.rhs, vars_)
        if not vars_:
            return self.check(phi)[0]
        if phi.lhs == phi.rhs:
            return True
        # x sub x + y holds for opaque x, y: every union operand is below it
        if phi.op == "sub" and isinstance(phi.rhs, SUnion) and phi.lhs in phi.rhs.parts:
            return True
        return False


class FreeTheory(Theory):
    """Free first-order terms: no side conditions, unification only.

    Term constructors are declared with argument sorts; `type` slots are
    populated from a fixed payload universe ({int}) when enumerating, `state`
    slots recurse up to the depth bound.
    """

    kind = "free"
    payload_universe = (TCon("int"),)

    def __init__(self, constructors: list[tuple[str, tuple[str, ...]]]):
        self.constructors = list(constructors)

    def term_constructor_names(self) -> set[str]:
        return {name for name, _ in self.constructors}

    def ground_domain(self, depth_bound: int = 2) -> list[ValueType]:
        by_depth: list[list[ValueType]] = [[]]
        for name, sorts in self.constructors:
            if not sorts:
                by_depth[0].append(TCon(name))
        acc = list(by_depth[0])
        prev = list(by_depth[0])
        for _ in range(depth_bound):
            level: list[ValueType] = []
            for name, sorts in self.constructors:
                if not sorts:
                    continue
                pools = [
                    list(self.payload_universe) if s == "type" else list(prev)
                    for s in sorts
                ]
                for combo in itertools.product(*pools):
                    t = TCon(name, tuple(combo))
                    level.append(t)
            acc.extend(t for t in level if t not in acc)
            prev = acc
        return sorted(acc, key=self.canonical_key)

    def canonical_key(self, v: ValueType) -> tuple:
        def depth(t: ValueType) -> int:
            if isinstance(t, TCon) and t.args:
                return 1 + max(depth(a) for a in t.args)
            return 0

        return (depth(v), print_value_type(v))

    def check(self, phi: Phi) -> tuple[bool, str]:
        if phi.op == "=":
            ok = phi.lhs == phi.rhs
            return (ok, "" if ok else f"requires {phi}")
        return (False, f"operator {phi.op!r} not supported by a free theory")

    def solve(self, phis: list[Phi], variables: list[str], depth_bound: int = 2
              ) -> Optional[dict[str, ValueType]]:
        if not phis:
            default = self.canonical_default(depth_bound)
            return {v: default for v in variables}
        return super().solve(phis, variables, depth_bound)


# ---------------------------------------------------------------------------
# Bind specifications and signatures


@dataclass(frozen=True)
class BindSpec:
    name: str
    vars: tuple[str, ...]
    phi: tuple[Phi, ...]
    left: MonadicType
    middle: MonadicType
    result: MonadicType

    def __str__(self) -> str:
        head = f"bind {self.name} : "
        if self.vars:
            head += "forall " + " ".join(self.vars) + ". "
        if self.phi:
            head += ", ".join(str(p) for p in self.phi) + " => "
        return head + print_constraint(Constraint(-1, self.left, self.middle, self.result))


@dataclass(frozen=True)
class GroundBind:
    left: MonadicType
    middle: MonadicType
    result: MonadicType
    spec: str

    @property
    def triple(self):
        return (self.left, self.middle, self.result)


@dataclass(frozen=True)
class Entailment:
    spec: str
    theta_m: tuple[tuple[int, MonadicType], ...]
    theta_t: tuple[tuple[str, ValueType], ...]

    def monad_map(self) -> dict[int, MonadicType]:
        return dict(self.theta_m)

    def type_map(self) -> dict[str, ValueType]:
        return dict(self.theta_t)


class Signature:
    def __init__(
        self,
        theory: Theory,
        constructors: dict[str, int],
        specs: list[BindSpec],
        prims: dict[str, Scheme],
        runtime_name: str = "identity",
        name: str = "<sig>",
    ):
        self.theory = theory
        self.constructors = dict(constructors)
        self.specs = list(specs)
        self.prims = dict(prims)
        self.runtime_name = runtime_name
        self.name = name
        self._ground_cache: dict[int, list[GroundBind]] = {}
        self._table_cache: dict[int, dict] = {}
        self._monad_cache: dict[int, list[MonadicType]] = {}
        self._morph_cache: dict[int, dict] = {}

    # -- enumeration ------------------------------------------------------

    def ground_monads(self, depth_bound: int = 2) -> list[MonadicType]:
        """Bot plus every constructor applied to ground indexes, in canonical
        order (Bot first, constructors in declaration order, indexes in the
        theory's canonical order)."""
        if depth_bound in self._monad_cache:
            return self._monad_cache[depth_bound]
        out: list[MonadicType] = [BOT]
        domain = self.theory.ground_domain(depth_bound)
        for con, arity in self.constructors.items():
            for combo in itertools.product(domain, repeat=arity):
                out.append(MGround(con, tuple(combo)))
        self._monad_cache[depth_bound] = out
        return out

    def morphism_targets(self, depth_bound: int = 2) -> dict:
        """m -> frozenset of everything m can be coerced to, m included."""
        if depth_bound in self._morph_cache:
            return self._morph_cache[depth_bound]
        table = self.bind_table(depth_bound)
        out = {m: frozenset(table.get((m, BOT), ())) | {m}
               for m in self.ground_monads(depth_bound)}
        self._morph_cache[depth_bound] = out
        return out

    def ground_binds(self, depth_bound: int = 2) -> list[GroundBind]:
        if depth_bound in self._ground_cache:
            return self._ground_cache[depth_bound]
        domain = self.theory.ground_domain(depth_bound)
        out: list[GroundBind] = []
        seen: set[tuple] = set()
        for spec in self.specs:
            for combo in itertools.product(domain, repeat=len(spec.vars)):
                env = dict(zip(spec.vars, combo))
                if not all(self.theory.check(_ground_phi(p, env))[0] for p in spec.phi):
                    continue
                triple = tuple(_inst_slot(s, env) for s in (spec.left, spec.middle, spec.result))
                if None in triple:
                    continue
                key = triple + (spec.name,)
                if key not in seen:
                    seen.add(key)
                    out.append(GroundBind(triple[0], triple[1], triple[2], spec.name))
        self._ground_cache[depth_bound] = out
        return out

    def bind_table(self, depth_bound: int = 2) -> dict[tuple, set]:
        """(m1, m2) -> set of m3 over the bounded ground universe."""
        if depth_bound in self._table_cache:
            return self._table_cache[depth_bound]
        table: dict[tuple, set] = {}
        for gb in self.ground_binds(depth_bound):
            table.setdefault((gb.left, gb.middle), set()).add(gb.result)
        self._table_cache[depth_bound] = table
        return table

    def has_ground(self, m1: MonadicType, m2: MonadicType, m3: MonadicType,
                   depth_bound: int = 2) -> bool:
        return m3 in self.bind_table(depth_bound).get((m1, m2), ())

    # -- merging ----------------------------------------------------------

    @staticmethod
    def merge(sigs: list["Signature"]) -> "Signature":
        if not sigs:
            raise SignatureError("no signature given")
        base = sigs[0]
        theory = base.theory
        constructors = dict(base.constructors)
        specs = list(base.specs)
        prims = dict(base.prims)
        runtime_name = base.runtime_name
        for s in sigs[1:]:
            if not isinstance(s.theory, _NoTheory):
                if not isinstance(theory, _NoTheory):
                    raise SignatureError("multiple theory declarations across signature files")
                theory = s.theory
            for c, a in s.constructors.items():
                if constructors.get(c, a) != a:
                    raise SignatureError(f"constructor {c} declared with conflicting arities")
                constructors[c] = a
            specs.extend(s.specs)
            for p, sch in s.prims.items():
                if p in prims:
                    raise SignatureError(f"prim {p} declared twice")
                prims[p] = sch
            if s.runtime_name != "identity":
                runtime_name = s.runtime_name
        return Signature(theory, constructors, specs, prims, runtime_name,
                         name="+".join(x.name for x in sigs))


def _inst_slot(slot: MonadicType, env: dict[str, ValueType]) -> Optional[MonadicType]:
    if isinstance(slot, MBot):
        return BOT
    assert isinstance(slot, MGround)
    idx = tuple(_subst_iexpr(ix, env) for ix in slot.indexes)
    return MGround(slot.con, idx)


class _NoTheory(Theory):
    """Placeholder for prim-only signature files."""

    kind = "none"

    def ground_domain(self, depth_bound: int = 2) -> list[ValueType]:
        return []

    def check(self, phi: Phi) -> tuple[bool, str]:
        return (False, "no theory declared")


# ---------------------------------------------------------------------------
# Matching and entailment


class MatchState:
    """Unification state shared across constraint/spec matching.

    Two variable namespaces: the constraint's own variables (monadic `MVar`s
    and index `TVar`s) and spec variables freshened with a `#n` suffix.
    Spec variables always bind; constraint variables bind only when
    `allow_pi_binding` is set (entailment-as-solving vs. membership checks).
    """

    def __init__(self, allow_pi_binding: bool = True):
        self.allow_pi_binding = allow_pi_binding
        self.m_map: dict[int, MonadicType] = {}
        self.t_map: dict[str, ValueType] = {}
        self._fresh = 0

    def freshen_spec(self, spec: BindSpec) -> tuple[MonadicType, MonadicType, MonadicType, list[Phi], list[str]]:
        self._fresh += 1
        ren = {v: f"{v}#{self._fresh}" for v in spec.vars}

        def r_ix(e: IndexExpr) -> IndexExpr:
            if isinstance(e, TVar):
                return TVar(ren.get(e.name, e.name))
            if isinstance(e, TCon):
                return TCon(e.con, tuple(r_ix(a) for a in e.args))
            if isinstance(e, SUnion):
                return SUnion(tuple(r_ix(p) for p in e.parts))
            return e

        def r_m(m: MonadicType) -> MonadicType:
            if isinstance(m, MGround):
                return MGround(m.con, tuple(r_ix(ix) for ix in m.indexes))
            return m

        phis = [Phi(p.op, r_ix(p.lhs), r_ix(p.rhs)) for p in spec.phi]
        return (r_m(spec.left), r_m(spec.middle), r_m(spec.result), phis, list(ren.values()))

    # -- lookup ------------------------------------------------------------

    def walk_m(self, m: MonadicType) -> MonadicType:
        while isinstance(m, MVar) and m.ident in self.m_map:
            m = self.m_map[m.ident]
        return m

    def walk_t(self, t: ValueType) -> ValueType:
        while isinstance(t, TVar) and t.name in self.t_map:
            t = self.t_map[t.name]
        return t

    def resolve_m(self, m: MonadicType) -> MonadicType:
        m = self.walk_m(m)
        if isinstance(m, MGround):
            return MGround(m.con, tuple(self.resolve_t(ix) for ix in m.indexes))
        return m

    def resolve_t(self, t: ValueType) -> ValueType:
        t = self.walk_t(t)
        if isinstance(t, TCon):
            if not t.args:
                return t
            return TCon(t.con, tuple(self.resolve_t(a) for a in t.args))
        if isinstance(t, TArrow):
            return TArrow(self.resolve_t(t.dom), self.resolve_m(t.eff), self.resolve_t(t.cod))
        return t

    def snapshot(self) -> tuple[dict, dict]:
        return (dict(self.m_map), dict(self.t_map))

    def restore(self, snap: tuple[dict, dict]) -> None:
        self.m_map, self.t_map = dict(snap[0]), dict(snap[1])

    # -- binding -----------------------------------------------------------

    @staticmethod
    def _is_spec_var(name: str) -> bool:
        return "#" in name

    def _bind_t(self, name: str, t: ValueType) -> bool:
        if not self._is_spec_var(name) and not self.allow_pi_binding:
            return False
        if _occurs_t(name, t, self):
            return False
        self.t_map[name] = t
        return True

    def unify_t(self, a: ValueType, b: ValueType) -> bool:
        a, b = self.walk_t(a), self.walk_t(b)
        if isinstance(a, TVar) and isinstance(b, TVar) and a.name == b.name:
            return True
        if isinstance(a, TVar):
            if self._is_spec_var(a.name) or self.allow_pi_binding:
                return self._bind_t(a.name, b)
            # a is an opaque constraint variable: b must be the same var
            return False
        if isinstance(b, TVar):
            return self.unify_t(b, a)
        if isinstance(a, TCon) and isinstance(b, TCon):
            if a.con != b.con or len(a.args) != len(b.args):
                return False
            return all(self.unify_t(x, y) for x, y in zip(a.args, b.args))
        if isinstance(a, TSet) and isinstance(b, TSet):
            return a.atoms == b.atoms
        if isinstance(a, TArrow) and isinstance(b, TArrow):
            return (
                self.unify_t(a.dom, b.dom)
                and self.unify_m(a.eff, b.eff)
                and self.unify_t(a.cod, b.cod)
            )
        return False

    def unify_m(self, a: MonadicType, b: MonadicType) -> bool:
        a, b = self.walk_m(a), self.walk_m(b)
        if isinstance(a, MBot) and isinstance(b, MBot):
            return True
        if isinstance(a, MVar) and isinstance(b, MVar) and a.ident == b.ident:
            return True
        if isinstance(a, MVar):
            if not self.allow_pi_binding:
                return False
            if _occurs_m(a.ident, b, self):
                return False
            self.m_map[a.ident] = b
            return True
        if isinstance(b, MVar):
            return self.unify_m(b, a)
        if isinstance(a, MGround) and isinstance(b, MGround):
            if a.con != b.con or len(a.indexes) != len(b.indexes):
                return False
            return all(self.unify_t(x, y) for x, y in zip(a.indexes, b.indexes))
        return False


def _occurs_t(name: str, t: ValueType, st: MatchState) -> bool:
    t = st.walk_t(t)
    if isinstance(t, TVar):
        return t.name == name
    if isinstance(t, TCon):
        return any(_occurs_t(name, a, st) for a in t.args)
    if isinstance(t, TArrow):
        return (
            _occurs_t(name, t.dom, st)
            or _occurs_m_t(name, t.eff, st)
            or _occurs_t(name, t.cod, st)
        )
    return False


def _occurs_m_t(name: str, m: MonadicType, st: MatchState) -> bool:
    m = st.walk_m(m)
    if isinstance(m, MGround):
        return any(_occurs_t(name, ix, st) for ix in m.indexes)
    return False


def _occurs_m(ident: int, m: MonadicType, st: MatchState) -> bool:
    m = st.walk_m(m)
    if isinstance(m, MVar):
        return m.ident == ident
    if isinstance(m, MGround):
        return any(_occurs_m_in_t(ident, ix, st) for ix in m.indexes)
    return False


def _occurs_m_in_t(ident: int, t: ValueType, st: MatchState) -> bool:
    t = st.walk_t(t)
    if isinstance(t, TCon):
        return any(_occurs_m_in_t(ident, a, st) for a in t.args)
    if isinstance(t, TArrow):
        return (
            _occurs_m_in_t(ident, t.dom, st)
            or _occurs_m(ident, t.eff, st)
            or _occurs_m_in_t(ident, t.cod, st)
        )
    return False


def _phi_ground(phi: Phi, st: MatchState) -> Phi:
    def res(e: IndexExpr) -> IndexExpr:
        if isinstance(e, SUnion):
            return SUnion(tuple(res(p) for p in e.parts))
        return st.resolve_t(e)

    return Phi(phi.op, res(phi.lhs), res(phi.rhs))


def entail(sig: Signature, pi: Constraint, require_identity: bool = False,
           depth_bound: int = 2) -> Optional[Entailment]:
    """Find the first spec (declaration order) whose instantiation matches
    `pi`.  In `require_identity` mode the constraint's own variables are
    opaque: no substitution may touch them, and side conditions involving
    them must hold reflexively."""
    result = _entail_impl(sig, pi, require_identity, depth_bound)
    return result[0]


def entail_with_reasons(sig: Signature, pi: Constraint, depth_bound: int = 2
                        ) -> tuple[Optional[Entailment], list[str]]:
    """Entailment plus, on failure, one reason per spec that matched
    structurally but whose side conditions failed."""
    return _entail_impl(sig, pi, False, depth_bound)


def _entail_impl(sig: Signature, pi: Constraint, require_identity: bool,
                 depth_bound: int) -> tuple[Optional[Entailment], list[str]]:
    reasons: list[str] = []
    pre = free_vars_of_constraint(pi)
    for spec in sig.specs:
        st = MatchState(allow_pi_binding=not require_identity)
        left, middle, result, phis, spec_vars = st.freshen_spec(spec)
        if not (
            st.unify_m(left, pi.left)
            and st.unify_m(middle, pi.middle)
            and st.unify_m(result, pi.result)
        ):
            continue
        grounded = [_phi_ground(p, st) for p in phis]
        if require_identity:
            if all(sig.theory.check_opaque(p) for p in grounded):
                theta = _extract_theta(st, pre)
                return (Entailment(spec.name, *theta), reasons)
            continue
        # Residual side-condition variables: spec vars and constraint index
        # vars alike; solve canonically.
        residual_vars: set[str] = set()
        for p in grounded:
            _iexpr_vars(p.lhs, residual_vars)
            _iexpr_vars(p.rhs, residual_vars)
        sol = sig.theory.solve(grounded, sorted(residual_vars), depth_bound)
        if sol is None:
            bad = next(
                (sig.theory.check(p)[1] for p in grounded
                 if not free_phi_vars(p) and not sig.theory.check(p)[0]),
                None,
            )
            reasons.append(f"{spec.name}: " + (bad or "side conditions unsatisfiable"))
            continue
        for name, val in sol.items():
            if name not in st.t_map:
                st.t_map[name] = val
        # Default any spec vars that never got constrained (e.g. a unit into
        # an unconstrained constructor) so outputs are fully ground.
        default = sig.theory.canonical_default(depth_bound) if sig.theory.ground_domain(depth_bound) else None
        for v in spec_vars:
            if v not in st.t_map and default is not None:
                st.t_map[v] = default
        theta = _extract_theta(st, pre)
        return (Entailment(spec.name, *theta), reasons)
    return (None, reasons)


def free_vars_of_constraint(pi: Constraint) -> tuple[set[int], set[str]]:
    from .syntax import free_type_vars

    vs = free_type_vars(pi)
    return (vs.mvars, vs.tvars)


def free_phi_vars(phi: Phi) -> set[str]:
    out: set[str] = set()
    _iexpr_vars(phi.lhs, out)
    _iexpr_vars(phi.rhs, out)
    return out


def _extract_theta(st: MatchState, pre: tuple[set[int], set[str]]
                   ) -> tuple[tuple, tuple]:
    mvars, tvars = pre
    theta_m = tuple(
        (i, st.resolve_m(MVar(i))) for i in sorted(mvars) if i in st.m_map
    )
    theta_t = tuple(
        (n, st.resolve_t(TVar(n))) for n in sorted(tvars) if n in st.t_map
    )
    return (theta_m, theta_t)


# ---------------------------------------------------------------------------
# Principal joins


def principal_join(sig: Signature, F: Iterable[tuple[MonadicType, MonadicType]],
                   depth_bound: int = 2) -> Optional[MonadicType]:
    """The canonical best way to combine every pair in F: a common result
    with a morphism to every other common result."""
    pairs = list(F)
    table = sig.bind_table(depth_bound)
    monads = sig.ground_monads(depth_bound)
    if pairs:
        common: Optional[set] = None
        for p in pairs:
            results = table.get(p, set())
            common = set(results) if common is None else common & results
        candidates = common or set()
    else:
        candidates = set(monads)
    morph = sig.morphism_targets(depth_bound)
    for m_hat in monads:
        if m_hat in candidates and candidates <= morph[m_hat]:
            return m_hat
    return None


def theory_solve(theory: Theory, phis: list[Phi], depth_bound: int = 2
                 ) -> Optional[dict[str, ValueType]]:
    variables: set[str] = set()
    for p in phis:
        variables |= free_phi_vars(p)
    return theory.solve(phis, sorted(variables), depth_bound)


# ---------------------------------------------------------------------------
# Signature parsing


def load_signature_file(path: str) -> Signature:
    import os

    with open(path) as f:
        return load_signature(f.read(), name=os.path.basename(path))


def load_signature(source: str, name: str = "<sig>") -> Signature:
    ts = TokenStream(tokenize(source))
    theory: Theory = _NoTheory()
    theory_declared = False
    constructors: dict[str, int] = {}
    specs: list[BindSpec] = []
    prims: dict[str, Scheme] = {}
    runtime_name = "identity"
    elements: set[str] = set()  # constant names known to the theory
    term_cons: dict[str, int] = {}  # free-theory term constructors and arities

    while not ts.at("eof"):
        tok = ts.peek()
        if ts.at_kw("theory"):
            ts.next()
            if theory_declared:
                raise SignatureError("multiple theory declarations")
            theory_declared = True
            kind = ts.expect("ident").text
            if kind == "lattice":
                ts.expect("{")
                elems: list[str] = []
                covers: list[tuple[str, str]] = []
                while not ts.at("}"):
                    a = ts.expect("ident").text
                    if a not in elems:
                        elems.append(a)
                    while ts.at("<"):
                        ts.next()
                        b = ts.expect("ident").text
                        if b not in elems:
                            elems.append(b)
                        covers.append((a, b))
                        a = b
                    if ts.at(","):
                        ts.next()
                ts.expect("}")
                theory = LatticeTheory(elems, covers)
                elements = set(elems)
            elif kind == "sets":
                ts.expect("{")
                atoms: list[str] = []
                while not ts.at("}"):
                    atoms.append(ts.expect("ident").text)
                    if ts.at(","):
                        ts.next()
                ts.expect("}")
                theory = SetTheory(atoms)
                elements = set(atoms)
            elif kind == "free":
                cons: list[tuple[str, tuple[str, ...]]] = []
                if ts.at("{"):
                    ts.next()
                    while not ts.at("}"):
                        cname = ts.expect("ident").text
                        sorts: list[str] = []
                        while ts.at("ident", "type") or ts.at("ident", "state"):
                            sorts.append(ts.next().text)
                        cons.append((cname, tuple(sorts)))
                        term_cons[cname] = len(sorts)
                        if ts.at(","):
                            ts.next()
                    ts.expect("}")
                theory = FreeTheory(cons)
                elements = set()
            else:
                raise ParseError(f"unknown theory kind {kind!r}", tok.line, tok.col)
            theory.validate()
        elif ts.at_kw("constructor"):
            ts.next()
            cname = ts.expect("ident").text
            ts.expect("/")
            arity = int(ts.expect("int").text)
            constructors[cname] = arity
        elif ts.at_kw("bind"):
            ts.next()
            bname = ts.expect("ident").text
            ts.expect(":")
            spec_vars: list[str] = []
            if ts.at_kw("forall"):
                ts.next()
                while not ts.at("."):
                    spec_vars.append(ts.expect("ident").text)
                ts.expect(".")
            ctx = _IndexContext(set(spec_vars), elements, term_cons)
            phis: list[Phi] = []
            if not ts.at("("):
                while True:
                    phis.append(_parse_phi(ts, ctx))
                    if ts.at(","):
                        ts.next()
                        continue
                    break
                ts.expect("=>")
            left = _parse_spec_monad(ts, ctx, constructors, expect_paren=True)
            ts.expect(",")
            middle = _parse_spec_monad(ts, ctx, constructors)
            ts.expect(")")
            ts.expect("|>")
            result = _parse_spec_monad(ts, ctx, constructors)
            specs.append(BindSpec(bname, tuple(spec_vars), tuple(phis), left, middle, result))
        elif ts.at_kw("prim"):
            ts.next()
            pname = ts.expect("ident").text
            ts.expect(":")
            pvars: list[str] = []
            if ts.at_kw("forall"):
                ts.next()
                while not ts.at("."):
                    pvars.append(ts.expect("ident").text)
                ts.expect(".")
            ctx = _IndexContext(set(pvars), elements, term_cons)
            body = _parse_type(ts, ctx, constructors)
            prims[pname] = Scheme(tuple(pvars), (), (), body)
        elif ts.at_kw("runtime"):
            ts.next()
            runtime_name = ts.expect("ident").text
        else:
            raise ParseError(
                f"expected a signature item, found {tok.text!r}", tok.line, tok.col
            )

    for spec in specs:
        for slot in (spec.left, spec.middle, spec.result):
            if isinstance(slot, MGround) and slot.con not in constructors:
                raise SignatureError(f"bind {spec.name} uses undeclared constructor {slot.con}")
            if isinstance(slot, MGround) and len(slot.indexes) != constructors[slot.con]:
                raise SignatureError(f"bind {spec.name}: wrong index count for {slot.con}")
    sig = Signature(theory, constructors, specs, prims, runtime_name, name)
    _resolve_tops(sig)
    return sig


class _IndexContext:
    def __init__(self, variables: set[str], elements: set[str], term_cons: dict[str, int]):
        self.variables = variables
        self.elements = elements
        self.term_cons = term_cons

    def classify(self, name: str) -> ValueType:
        if name in self.variables:
            return TVar(name)
        return TCon(name)


def _parse_set_literal(ts: TokenStream) -> TSet:
    ts.expect("{")
    atoms: list[str] = []
    while not ts.at("}"):
        atoms.append(ts.expect("ident").text)
        if ts.at(","):
            ts.next()
    ts.expect("}")
    return TSet(frozenset(atoms))


def _parse_index_atom(ts: TokenStream, ctx: _IndexContext) -> ValueType:
    if ts.at("{"):
        return _parse_set_literal(ts)
    if ts.at_kw("top"):
        ts.next()
        return TCon("top")  # resolved against the theory below
    if ts.at("("):
        ts.next()
        t = _parse_index_term(ts, ctx)
        ts.expect(")")
        return t
    name = ts.expect("ident").text
    return ctx.classify(name)


def _parse_index_term(ts: TokenStream, ctx: _IndexContext) -> ValueType:
    head = _parse_index_atom(ts, ctx)
    if isinstance(head, TCon) and head.con in ctx.term_cons:
        arity = ctx.term_cons[head.con]
        args = tuple(_parse_index_atom(ts, ctx) for _ in range(arity))
        return TCon(head.con, args)
    return head


def _parse_iexpr(ts: TokenStream, ctx: _IndexContext) -> IndexExpr:
    parts: list[IndexExpr] = [_parse_index_term(ts, ctx)]
    while ts.at("+"):
        ts.next()
        parts.append(_parse_index_term(ts, ctx))
    if len(parts) == 1:
        return parts[0]
    return SUnion(tuple(parts))


def _parse_phi(ts: TokenStream, ctx: _IndexContext) -> Phi:
    lhs = _parse_iexpr(ts, ctx)
    tok = ts.peek()
    if ts.at("<="):
        op = "<="
        ts.next()
    elif ts.at_kw("sub"):
        op = "sub"
        ts.next()
    elif ts.at("="):
        op = "="
        ts.next()
    else:
        raise ParseError(f"expected a side-condition operator, found {tok.text!r}",
                         tok.line, tok.col)
    rhs = _parse_iexpr(ts, ctx)
    return Phi(op, lhs, rhs)


def _parse_spec_monad(ts: TokenStream, ctx: _IndexContext,
                      constructors: dict[str, int], expect_paren: bool = False
                      ) -> MonadicType:
    if expect_paren:
        ts.expect("(")
    tok = ts.peek()
    name = ts.expect("ident").text
    if name == "Bot":
        return BOT
    if name not in constructors:
        raise ParseError(f"unknown constructor {name!r} in bind spec", tok.line, tok.col)
    indexes = tuple(_parse_index_atom(ts, ctx) for _ in range(constructors[name]))
    return MGround(name, indexes)


def _parse_type_atom(ts: TokenStream, ctx: _IndexContext,
                     constructors: dict[str, int]) -> ValueType:
    if ts.at("()"):
        ts.next()
        return UNIT
    if ts.at("{"):
        return _parse_set_literal(ts)
    if ts.at_kw("top"):
        ts.next()
        return TCon("top")
    if ts.at("("):
        ts.next()
        t = _parse_type(ts, ctx, constructors)
        ts.expect(")")
        return t
    name = ts.expect("ident").text
    return ctx.classify(name)


_TYPE_ATOM_STARTS = ("ident", "(", "()", "{")


def _parse_type_app(ts: TokenStream, ctx: _IndexContext,
                    constructors: dict[str, int]) -> ValueType:
    head = _parse_type_atom(ts, ctx, constructors)
    args: list[ValueType] = []
    while ts.peek().kind in _TYPE_ATOM_STARTS or ts.at_kw("top"):
        args.append(_parse_type_atom(ts, ctx, constructors))
    if not args:
        return head
    if isinstance(head, TCon) and not head.args:
        return TCon(head.con, tuple(args))
    raise ParseError("cannot apply a non-constructor type", ts.peek().line, ts.peek().col)


def _parse_comp_type(ts: TokenStream, ctx: _IndexContext,
                     constructors: dict[str, int]) -> tuple[MonadicType, ValueType]:
    """A type in codomain position: optionally a monadic constructor applied
    to its indexes, then a value type."""
    if ts.at("ident") and ts.peek().text in constructors:
        con = ts.next().text
        indexes = tuple(_parse_index_atom(ts, ctx) for _ in range(constructors[con]))
        cod = _parse_type_app(ts, ctx, constructors)
        if ts.at("->"):
            raise ParseError("monadic annotation must sit on the final codomain",
                             ts.peek().line, ts.peek().col)
        return (MGround(con, indexes), cod)
    left = _parse_type_app(ts, ctx, constructors)
    if ts.at("->"):
        ts.next()
        eff, cod = _parse_comp_type(ts, ctx, constructors)
        return (BOT, TArrow(left, eff, cod))
    return (BOT, left)


def _parse_type(ts: TokenStream, ctx: _IndexContext,
                constructors: dict[str, int]) -> ValueType:
    tok = ts.peek()
    eff, t = _parse_comp_type(ts, ctx, constructors)
    if not isinstance(eff, MBot):
        raise ParseError("a prim's type must be a value type", tok.line, tok.col)
    return t


def _resolve_tops(sig: Signature) -> None:
    """Rewrite the `top` literal to the theory's full atom set."""
    if not isinstance(sig.theory, SetTheory):
        return
    full = TSet(sig.theory.top)

    def fix_v(t: ValueType) -> ValueType:
        if isinstance(t, TCon):
            if t.con == "top" and not t.args:
                return full
            return TCon(t.con, tuple(fix_v(a) for a in t.args))
        if isinstance(t, TArrow):
            return TArrow(fix_v(t.dom), fix_m(t.eff), fix_v(t.cod))
        return t

    def fix_m(m: MonadicType) -> MonadicType:
        if isinstance(m, MGround):
            return MGround(m.con, tuple(fix_v(ix) for ix in m.indexes))
        return m

    def fix_ix(e: IndexExpr) -> IndexExpr:
        if isinstance(e, SUnion):
            return SUnion(tuple(fix_ix(p) for p in e.parts))
        return fix_v(e)

    sig.specs = [
        BindSpec(
            s.name,
            s.vars,
            tuple(Phi(p.op, fix_ix(p.lhs), fix_ix(p.rhs)) for p in s.phi),
            fix_m(s.left),
            fix_m(s.middle),
            fix_m(s.result),
        )
        for s in sig.specs
    ]
    sig.prims = {
        n: Scheme(sch.tvars, sch.mvars, sch.constraints, fix_v(sch.body))
        for n, sch in sig.prims.items()
    }
