"""Type inference with bind-constraint collection and evidence elaboration.

Every syntactic construct contributes bind constraints to a bag:

  * a value used as an expression has the identity effect `Bot`
  * an application `e1 e2` sequences the argument into the function's latent
    effect (`(m2, m3) |> m4`) and then the function computation around it
    (`(m1, m4) |> m5`)
  * `let x = e1 in e2` with an effectful `e1` sequences via `(m1, m2) |> m3`
  * `if` joins both branches into a fresh result via morphism constraints

Elaboration makes every constraint explicit as an evidence application; a
generalized definition abstracts over the evidence of its surviving
constraints (`EvAbs`), and each use site re-applies fresh evidence (`EvApp`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .graph import ambiguity_witness, unambiguous
from .signature import Signature, entail
from .simplify import hide_partition, simplify
from .syntax import (
    App,
    AutoEv,
    BOOL,
    BOT,
    BindApp,
    Constraint,
    EvAbs,
    EvApp,
    EvVar,
    INT,
    If,
    Lam,
    Let,
    LetRec,
    Lit,
    MBot,
    MGround,
    MVar,
    MonadicType,
    PmError,
    Program,
    Scheme,
    Subst,
    TApp,
    TArrow,
    TCon,
    TIf,
    TLam,
    TLet,
    TLetRec,
    TSet,
    TVar,
    TargetTerm,
    Term,
    UNIT,
    ValueType,
    Var,
    free_type_vars,
    is_value,
    print_constraint,
    print_monadic,
    print_value_type,
)


class TypeProblem(PmError):
    exit_code = 2

    def __init__(self, message: str, details: Optional[list[str]] = None):
        super().__init__(message)
        self.details = details or []


_ID_LAM = TLam("x", Var("x"))


def _builtin(t: ValueType) -> Scheme:
    return Scheme((), (), (), t)


_INT_BINOP = TArrow(INT, BOT, TArrow(INT, BOT, INT))
_INT_CMP = TArrow(INT, BOT, TArrow(INT, BOT, BOOL))

BUILTINS: dict[str, Scheme] = {
    "+": _builtin(_INT_BINOP),
    "-": _builtin(_INT_BINOP),
    "*": _builtin(_INT_BINOP),
    ">": _builtin(_INT_CMP),
    "<": _builtin(_INT_CMP),
    "=": _builtin(_INT_CMP),
    "incr": _builtin(TArrow(INT, BOT, INT)),
}


def base_env(sig: Optional[Signature] = None) -> dict[str, Scheme]:
    env = dict(BUILTINS)
    if sig is not None:
        env.update(sig.prims)
    return env


@dataclass
class BindingResult:
    name: str
    scheme: Scheme
    target: TargetTerm
    raw_scheme: Scheme  # before simplification/hide (display with --no-simplify)
    kind: str = "let"


@dataclass
class ProgramResult:
    bindings: list[BindingResult]
    main_monad: Optional[MonadicType]
    main_type: Optional[ValueType]
    main_target: Optional[TargetTerm]
    main_bag: list[Constraint]

    def whole_target(self) -> Optional[TargetTerm]:
        if self.main_target is None:
            return None
        t = self.main_target
        for b in reversed(self.bindings):
            node = TLetRec if b.kind == "letrec" else TLet
            t = node(b.name, b.target, t)
        return t


class Inferencer:
    def __init__(
        self,
        sig: Signature,
        simplify_schemes: bool = True,
        hide_schemes: bool = True,
        check_ambiguity: bool = True,
    ):
        self.sig = sig
        self.simplify_schemes = simplify_schemes
        self.hide_schemes = hide_schemes
        self.check_ambiguity = check_ambiguity
        self.subst = Subst()
        self._next_m = 0
        self._next_t = 0
        self._next_cid = 0

    # -- fresh names --------------------------------------------------------

    def fresh_m(self) -> MVar:
        self._next_m += 1
        return MVar(self._next_m)

    def fresh_t(self, base: str = "t") -> TVar:
        self._next_t += 1
        return TVar(f"{base}.{self._next_t}")

    def constraint(self, left: MonadicType, middle: MonadicType, result: MonadicType
                   ) -> Constraint:
        self._next_cid += 1
        return Constraint(self._next_cid, left, middle, result)

    # -- unification --------------------------------------------------------

    def unify_v(self, a: ValueType, b: ValueType) -> None:
        a = self.subst.walk_t(a)
        b = self.subst.walk_t(b)
        if isinstance(a, TVar) and isinstance(b, TVar) and a.name == b.name:
            return
        if isinstance(a, TVar):
            if self._occurs_t(a.name, b):
                raise TypeProblem(f"infinite type: {a.name} occurs in {print_value_type(self.subst.apply_value(b))}")
            self.subst.bind_t(a.name, b)
            return
        if isinstance(b, TVar):
            self.unify_v(b, a)
            return
        if isinstance(a, TCon) and isinstance(b, TCon):
            if a.con != b.con or len(a.args) != len(b.args):
                raise TypeProblem(self._mismatch(a, b))
            for x, y in zip(a.args, b.args):
                self.unify_v(x, y)
            return
        if isinstance(a, TSet) and isinstance(b, TSet):
            if a.atoms != b.atoms:
                raise TypeProblem(self._mismatch(a, b))
            return
        if isinstance(a, TArrow) and isinstance(b, TArrow):
            self.unify_v(a.dom, b.dom)
            self.unify_m(a.eff, b.eff)
            self.unify_v(a.cod, b.cod)
            return
        raise TypeProblem(self._mismatch(a, b))

    def unify_m(self, a: MonadicType, b: MonadicType) -> None:
        a = self.subst.walk_m(a)
        b = self.subst.walk_m(b)
        if isinstance(a, MVar) and isinstance(b, MVar) and a.ident == b.ident:
            return
        if isinstance(a, MVar):
            self.subst.bind_m(a.ident, b)
            return
        if isinstance(b, MVar):
            self.unify_m(b, a)
            return
        if isinstance(a, MBot) and isinstance(b, MBot):
            return
        if isinstance(a, MGround) and isinstance(b, MGround) and a.con == b.con:
            for x, y in zip(a.indexes, b.indexes):
                self.unify_v(x, y)
            return
        raise TypeProblem(
            f"cannot unify effect {print_monadic(self.subst.apply_monad(a))}"
            f" with {print_monadic(self.subst.apply_monad(b))}"
        )

    def _mismatch(self, a: ValueType, b: ValueType) -> str:
        return (
            f"cannot unify {print_value_type(self.subst.apply_value(a))}"
            f" with {print_value_type(self.subst.apply_value(b))}"
        )

    def _occurs_t(self, name: str, t: ValueType) -> bool:
        t = self.subst.apply_value(t)
        return name in free_type_vars(t).tvars

    # -- instantiation ------------------------------------------------------

    def instantiate(self, name: str, scheme: Scheme
                    ) -> tuple[ValueType, TargetTerm, list[Constraint]]:
        sub = Subst()
        for tv in scheme.tvars:
            sub.bind_t(tv, self.fresh_t(base="i"))
        for mv in scheme.mvars:
            sub.bind_m(mv, self.fresh_m())
        fresh: list[Constraint] = []
        for c in scheme.constraints:
            ac = sub.apply_constraint(c)
            fresh.append(self.constraint(ac.left, ac.middle, ac.result))
        body = sub.apply_value(scheme.body)
        term: TargetTerm = Var(name)
        if fresh:
            term = EvApp(term, tuple(EvVar(c.cid) for c in fresh))
        return body, term, fresh

    # -- value typing -------------------------------------------------------

    def infer_value(self, env: dict[str, Scheme], v: Term
                    ) -> tuple[ValueType, TargetTerm, list[Constraint]]:
        if isinstance(v, Var):
            if v.name not in env:
                raise TypeProblem(f"unbound variable {v.name}")
            return self.instantiate(v.name, env[v.name])
        if isinstance(v, Lit):
            if v.value is None:
                return UNIT, v, []
            if isinstance(v.value, bool):
                return BOOL, v, []
            return INT, v, []
        if isinstance(v, Lam):
            a = self.fresh_t()
            inner = dict(env)
            inner[v.param] = Scheme((), (), (), a)
            m, cod, body, bag = self.infer_expr(inner, v.body)
            return TArrow(a, m, cod), TLam(v.param, body), bag
        raise TypeProblem(f"not a value: {type(v).__name__}")

    # -- expression typing --------------------------------------------------

    def infer_expr(self, env: dict[str, Scheme], e: Term
                   ) -> tuple[MonadicType, ValueType, TargetTerm, list[Constraint]]:
        if is_value(e):
            # A value's computation is the identity: give it effect Bot and
            # let the surrounding constraint (application, branch morphism,
            # sequencing) absorb any lifting.  Introducing a fresh
            # `(Bot, Bot) |> v` here instead would be equally sound but pins
            # a unit variable into every lambda's latent effect.
            t, v, bag = self.infer_value(env, e)
            return BOT, t, v, bag

        if isinstance(e, App):
            m1, t1, f_term, p1 = self.infer_expr(env, e.fn)
            m2, t2, a_term, p2 = self.infer_expr(env, e.arg)
            m3 = self.fresh_m()
            res = self.fresh_t()
            self.unify_v(t1, TArrow(t2, m3, res))
            m4 = self.fresh_m()
            m5 = self.fresh_m()
            inner = self.constraint(m2, m3, m4)
            outer = self.constraint(m1, m4, m5)
            term = BindApp(
                EvVar(outer.cid), f_term, BindApp(EvVar(inner.cid), a_term, None)
            )
            return m5, res, term, p1 + p2 + [inner, outer]

        if isinstance(e, Let):
            if is_value(e.bound):
                t1, v_term, p1 = self.infer_value(env, e.bound)
                scheme, wrapped = self.generalize(env, p1, t1, v_term)
                inner = dict(env)
                inner[e.name] = scheme
                m, t, b_term, p2 = self.infer_expr(inner, e.body)
                return m, t, TLet(e.name, wrapped, b_term), p2
            m1, t1, e_term, p1 = self.infer_expr(env, e.bound)
            inner = dict(env)
            inner[e.name] = Scheme((), (), (), t1)
            m2, t2, b_term, p2 = self.infer_expr(inner, e.body)
            m3 = self.fresh_m()
            seq = self.constraint(m1, m2, m3)
            term = BindApp(EvVar(seq.cid), e_term, TLam(e.name, b_term))
            return m3, t2, term, p1 + p2 + [seq]

        if isinstance(e, LetRec):
            if not is_value(e.bound):
                raise TypeProblem("letrec requires a value on the right-hand side")
            guess = self.fresh_t()
            inner = dict(env)
            inner[e.name] = Scheme((), (), (), guess)
            t1, v_term, p1 = self.infer_value(inner, e.bound)
            self.unify_v(guess, t1)
            scheme, wrapped = self.generalize(env, p1, t1, v_term, rec_name=e.name)
            outer = dict(env)
            outer[e.name] = scheme
            m, t, b_term, p2 = self.infer_expr(outer, e.body)
            return m, t, TLetRec(e.name, wrapped, b_term), p2

        if isinstance(e, If):
            m1, t1, c_term, p1 = self.infer_expr(env, e.cond)
            self.unify_v(t1, BOOL)
            m2, t2, then_term, p2 = self.infer_expr(env, e.then)
            m3, t3, else_term, p3 = self.infer_expr(env, e.other)
            self.unify_v(t2, t3)
            join = self.fresh_m()
            out = self.fresh_m()
            c_then = self.constraint(m2, BOT, join)
            c_else = self.constraint(m3, BOT, join)
            c_seq = self.constraint(m1, join, out)
            scrut = f"_c{c_seq.cid}"
            term = BindApp(
                EvVar(c_seq.cid),
                c_term,
                TLam(
                    scrut,
                    TIf(
                        Var(scrut),
                        BindApp(EvVar(c_then.cid), then_term, _ID_LAM),
                        BindApp(EvVar(c_else.cid), else_term, _ID_LAM),
                    ),
                ),
            )
            return out, t2, term, p1 + p2 + p3 + [c_then, c_else, c_seq]

        raise TypeProblem(f"cannot infer {type(e).__name__}")

    # -- generalization -----------------------------------------------------

    def generalize(self, env: dict[str, Scheme], bag: list[Constraint],
                   t: ValueType, term: TargetTerm, rec_name: Optional[str] = None
                   ) -> tuple[Scheme, TargetTerm]:
        bag = self.subst.apply_bag(bag)
        t = self.subst.apply_value(t)
        env_vars = free_type_vars({k: self.subst.apply_scheme(s) for k, s in env.items()})
        own = free_type_vars(list(bag) + [t])
        gen_m = own.mvars - env_vars.mvars
        body_m = free_type_vars(t).mvars
        eligible = gen_m - body_m

        if self.simplify_schemes and eligible:
            sub_map, bag = simplify(bag, eligible, self.sig)
            for ident, m in sub_map.items():
                if ident not in self.subst.m_map:
                    self.subst.bind_m(ident, m)
            bag = self.subst.apply_bag(bag)
            t = self.subst.apply_value(t)

        if self.hide_schemes:
            kept, hidden, rewrite = hide_partition(bag, self.sig)
        else:
            kept, hidden, rewrite = list(bag), [], {}
        term = _rewrite_evidence(term, rewrite)

        own = free_type_vars(list(kept) + list(hidden) + [t])
        gen_tv = tuple(sorted(own.tvars - env_vars.tvars, key=_occurrence_key(kept, t)))
        gen_mv = tuple(sorted(own.mvars - env_vars.mvars, key=_occurrence_key(kept, t)))

        if self.check_ambiguity:
            protected = (own.mvars & env_vars.mvars) | body_m
            witness = ambiguity_witness(kept, protected)
            if witness is not None:
                detail = [print_constraint(c) for c in kept]
                raise TypeProblem(
                    f"ambiguous constraints: open variable {witness} admits no"
                    " coherent dataflow",
                    details=detail,
                )

        scheme = Scheme(gen_tv, gen_mv, tuple(kept), t, tuple(hidden))
        wrapped: TargetTerm = EvAbs(tuple(c.cid for c in kept), term)
        if rec_name is not None and kept:
            wrapped = EvAbs(
                tuple(c.cid for c in kept),
                _reapply_recursive(term, rec_name, tuple(c.cid for c in kept)),
            )
        return scheme, wrapped


def _occurrence_key(kept: list[Constraint], t: ValueType):
    order: dict[object, int] = {}
    counter = [0]

    def note(key: object) -> None:
        if key not in order:
            order[key] = counter[0]
            counter[0] += 1

    def walk_m(m: MonadicType) -> None:
        if isinstance(m, MVar):
            note(m.ident)
        elif isinstance(m, MGround):
            for ix in m.indexes:
                walk_v(ix)

    def walk_v(v: ValueType) -> None:
        if isinstance(v, TVar):
            note(v.name)
        elif isinstance(v, TCon):
            for a in v.args:
                walk_v(a)
        elif isinstance(v, TArrow):
            walk_v(v.dom)
            walk_m(v.eff)
            walk_v(v.cod)

    for c in kept:
        walk_m(c.left)
        walk_m(c.middle)
        walk_m(c.result)
    walk_v(t)

    def key(x):
        return (order.get(x, len(order)), str(x))

    return key


def _rewrite_evidence(term: TargetTerm, rewrite: dict[int, TargetTerm]) -> TargetTerm:
    if not rewrite:
        return term

    def go(t: TargetTerm) -> TargetTerm:
        if isinstance(t, EvVar):
            got = rewrite.get(t.cid)
            return go(got) if got is not None and got != t else t
        if isinstance(t, (Var, Lit, AutoEv)):
            return t
        if isinstance(t, TLam):
            return TLam(t.param, go(t.body))
        if isinstance(t, TApp):
            return TApp(go(t.fn), go(t.arg))
        if isinstance(t, TLet):
            return TLet(t.name, go(t.bound), go(t.body))
        if isinstance(t, TLetRec):
            return TLetRec(t.name, go(t.bound), go(t.body))
        if isinstance(t, TIf):
            return TIf(go(t.cond), go(t.then), go(t.other))
        if isinstance(t, EvAbs):
            return EvAbs(t.cids, go(t.body))
        if isinstance(t, EvApp):
            return EvApp(go(t.fn), tuple(go(a) for a in t.args))
        if isinstance(t, BindApp):
            return BindApp(go(t.ev), go(t.comp), None if t.cont is None else go(t.cont))
        raise TypeError(type(t).__name__)

    return go(term)


def _reapply_recursive(term: TargetTerm, name: str, cids: tuple[int, ...]) -> TargetTerm:
    """Recursive occurrences re-supply the definition's own evidence lambdas."""

    def go(t: TargetTerm) -> TargetTerm:
        if isinstance(t, Var):
            if t.name == name:
                return EvApp(t, tuple(EvVar(c) for c in cids))
            return t
        if isinstance(t, (Lit, EvVar, AutoEv)):
            return t
        if isinstance(t, TLam):
            return t if t.param == name else TLam(t.param, go(t.body))
        if isinstance(t, TApp):
            return TApp(go(t.fn), go(t.arg))
        if isinstance(t, TLet):
            bound = go(t.bound)
            return TLet(t.name, bound, t.body if t.name == name else go(t.body))
        if isinstance(t, TLetRec):
            if t.name == name:
                return t
            return TLetRec(t.name, go(t.bound), go(t.body))
        if isinstance(t, TIf):
            return TIf(go(t.cond), go(t.then), go(t.other))
        if isinstance(t, EvAbs):
            return EvAbs(t.cids, go(t.body))
        if isinstance(t, EvApp):
            return EvApp(go(t.fn), tuple(go(a) for a in t.args))
        if isinstance(t, BindApp):
            return BindApp(go(t.ev), go(t.comp), None if t.cont is None else go(t.cont))
        raise TypeError(type(t).__name__)

    return go(term)


# ---------------------------------------------------------------------------
# Entailment of wanted constraints from a given bag plus the signature


def entails(bag: list[Constraint], sig: Signature, wanted: list[Constraint]) -> bool:
    have = {c.triple for c in bag}
    for w in wanted:
        if w.triple in have:
            continue
        if entail(sig, w, require_identity=True) is None:
            return False
    return True


# ---------------------------------------------------------------------------
# Whole-program driving


def infer_program(program: Program, sig: Signature, *, simplify_schemes: bool = True,
                  hide_schemes: bool = True, check_ambiguity: bool = True
                  ) -> ProgramResult:
    """Infer every top-level binding (generalizing each), then the main
    expression under the accumulated environment."""
    inf = Inferencer(sig, simplify_schemes, hide_schemes, check_ambiguity)
    env = base_env(sig)
    results: list[BindingResult] = []
    for b in program.bindings:
        if b.kind == "letrec":
            guess = inf.fresh_t()
            inner = dict(env)
            inner[b.name] = Scheme((), (), (), guess)
            t1, v_term, p1 = inf.infer_value(inner, b.term)
            inf.unify_v(guess, t1)
            scheme, wrapped = inf.generalize(env, p1, t1, v_term, rec_name=b.name)
        else:
            if not is_value(b.term):
                raise TypeProblem(
                    f"top-level binding {b.name} must be a value"
                    " (sequence effects inside a function body)"
                )
            t1, v_term, p1 = inf.infer_value(env, b.term)
            scheme, wrapped = inf.generalize(env, p1, t1, v_term)
        raw_scheme = _raw_scheme_for(b, env, sig)
        results.append(BindingResult(b.name, scheme, wrapped, raw_scheme, b.kind))
        env = dict(env)
        env[b.name] = scheme

    main_m = main_t = main_term = None
    main_bag: list[Constraint] = []
    if program.main is not None:
        main_m, main_t, main_term, main_bag = inf.infer_expr(env, program.main)
        main_m = inf.subst.apply_monad(main_m)
        main_t = inf.subst.apply_value(main_t)
        main_bag = inf.subst.apply_bag(main_bag)
    res = ProgramResult(results, main_m, main_t, main_term, main_bag)
    return res


def _raw_scheme_for(b, env: dict[str, Scheme], sig: Signature) -> Scheme:
    """The binding's scheme without simplification (hide still normalizes
    duplicates away for display)."""
    raw = Inferencer(sig, simplify_schemes=False, hide_schemes=False,
                     check_ambiguity=False)
    if b.kind == "letrec":
        guess = raw.fresh_t()
        inner = dict(env)
        inner[b.name] = Scheme((), (), (), guess)
        t1, v_term, p1 = raw.infer_value(inner, b.term)
        raw.unify_v(guess, t1)
        scheme, _ = raw.generalize(env, p1, t1, v_term, rec_name=b.name)
    else:
        t1, v_term, p1 = raw.infer_value(env, b.term)
        scheme, _ = raw.generalize(env, p1, t1, v_term)
    return scheme
