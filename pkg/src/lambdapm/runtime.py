"""Evaluation of elaborated programs.

A non-trivial computation is a `Comp`: a suspended function from a runtime
state to a (value, next state) pair.  A computation in `Bot` is just a plain
value.  Bind evidence therefore comes *shaped*: the same constraint
`(m1, m2) |> m3` means one of several concrete operations depending on which
of the three positions are `Bot`:

    (Bot, Bot) |> Bot   apply the continuation directly
    (Bot, Bot) |> M     inject the continuation's value (a unit)
    (M, Bot)   |> N     run, then transform the value (a map)
    (Bot, M)   |> N     feed the value straight to the continuation
    (M, N)     |> P     the runtime's real bind

Each runtime supplies the real bind, its primitives, and sample data for
equational law checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .syntax import (
    AutoEv,
    BindApp,
    EvAbs,
    EvApp,
    EvVar,
    Lit,
    MBot,
    MonadicType,
    PmError,
    TApp,
    TIf,
    TLam,
    TLet,
    TLetRec,
    TargetTerm,
    Var,
    free_type_vars,
)


class RuntimeProblem(PmError):
    exit_code = 4


@dataclass
class Comp:
    run: Callable[[object], tuple[object, object]]


@dataclass
class VClosure:
    param: str
    body: TargetTerm
    env: dict
    eenv: dict


@dataclass
class VEvClosure:
    cids: tuple[int, ...]
    body: TargetTerm
    env: dict
    eenv: dict


@dataclass
class VPartial:
    """A bind applied to its computation but still awaiting the
    continuation; used for the argument position of applications."""
    bind: Callable
    comp: object


@dataclass
class VBuiltin:
    name: str
    arity: int
    fn: Callable
    args: tuple = ()


@dataclass(frozen=True)
class VRef:
    cell: str


# ---------------------------------------------------------------------------
# Runtimes


@dataclass
class Runtime:
    name: str
    bind_mm: Callable[[Comp, Callable], Comp]
    prims: dict[str, VBuiltin] = field(default_factory=dict)
    make_state: Callable[[dict, tuple], object] = lambda store, script: None
    sample_states: Callable[[], list] = lambda: [None]
    sample_comps: Callable[[int], Comp] = None  # type: ignore[assignment]
    sample_funs: Callable[[int], Callable] = None  # type: ignore[assignment]
    render_state: Callable[[object, object], list[str]] = lambda s0, s1: []


def _bind_threaded(c: Comp, k: Callable) -> Comp:
    def run(s):
        v, s1 = c.run(s)
        r = k(v)
        if not isinstance(r, Comp):
            raise RuntimeProblem("evidence shape mismatch: continuation returned a plain value")
        return r.run(s1)

    return Comp(run)


def _bind_state_reset(c: Comp, k: Callable) -> Comp:
    # Deliberately broken bind: the continuation runs, but its state updates
    # are thrown away.  Used as a law-checking mutant.
    def run(s):
        v, s1 = c.run(s)
        r = k(v)
        if not isinstance(r, Comp):
            raise RuntimeProblem("evidence shape mismatch: continuation returned a plain value")
        w, _s2 = r.run(s1)
        return w, s1

    return Comp(run)


def shaped_bind(rt: Runtime, left_bot: bool, middle_bot: bool, result_bot: bool
                ) -> Callable[[object, Callable], object]:
    if result_bot and not (left_bot and middle_bot):
        raise RuntimeProblem("evidence shape mismatch: cannot discard an effect")

    def bind(c, k):
        if left_bot and isinstance(c, Comp):
            raise RuntimeProblem("evidence shape mismatch: expected a plain value")
        if not left_bot and not isinstance(c, Comp):
            raise RuntimeProblem("evidence shape mismatch: expected a computation")
        if left_bot and middle_bot and result_bot:
            r = k(c)
            if isinstance(r, Comp):
                raise RuntimeProblem("evidence shape mismatch: continuation returned a computation")
            return r
        if left_bot and middle_bot:
            v = k(c)
            if isinstance(v, Comp):
                raise RuntimeProblem("evidence shape mismatch: continuation returned a computation")
            return Comp(lambda s: (v, s))
        if left_bot:
            r = k(c)
            if not isinstance(r, Comp):
                raise RuntimeProblem("evidence shape mismatch: continuation returned a plain value")
            return r
        if middle_bot:
            def run(s):
                v, s1 = c.run(s)
                r = k(v)
                if isinstance(r, Comp):
                    raise RuntimeProblem("evidence shape mismatch: continuation returned a computation")
                return r, s1
            return Comp(run)
        return rt.bind_mm(c, k)

    return bind


def dynamic_bind(rt: Runtime) -> Callable[[object, Callable], object]:
    """Pass-through evidence for hidden identity-shaped constraints whose
    carrier is still a variable: dispatch on the actual computation shape."""

    def bind(c, k):
        if isinstance(c, Comp):
            def run(s):
                v, s1 = c.run(s)
                r = k(v)
                if isinstance(r, Comp):
                    return r.run(s1)
                return r, s1
            return Comp(run)
        return k(c)

    return bind


def auto_evidence(rt: Runtime, left: MonadicType, middle: MonadicType,
                  result: MonadicType) -> Callable:
    vs = free_type_vars((left, middle, result))
    if vs.tvars or vs.mvars:
        return dynamic_bind(rt)
    return shaped_bind(rt, isinstance(left, MBot), isinstance(middle, MBot),
                       isinstance(result, MBot))


# -- concrete runtimes -------------------------------------------------------


def _mk_identity() -> Runtime:
    return Runtime(
        name="identity",
        bind_mm=_bind_threaded,
        sample_states=lambda: [None],
        sample_comps=lambda i: Comp(lambda s, i=i: (7 + i, s)),
        sample_funs=lambda j: (lambda v, j=j: Comp(lambda s: (v * 2 + j, s))),
    )


def _state_prims() -> dict[str, VBuiltin]:
    def read(ref):
        if not isinstance(ref, VRef):
            raise RuntimeProblem("read expects a reference")
        return Comp(lambda st: (st.get(ref.cell, 0), st))

    def write(ref, v):
        if not isinstance(ref, VRef):
            raise RuntimeProblem("write expects a reference")
        return Comp(lambda st: (None, {**st, ref.cell: v}))

    return {
        "read": VBuiltin("read", 1, read),
        "write": VBuiltin("write", 2, write),
    }


def _state_samples() -> list:
    return [{}, {"x": 3}, {"x": 5, "y": 1}]


def _mk_state(name: str, bind_mm) -> Runtime:
    return Runtime(
        name=name,
        bind_mm=bind_mm,
        prims=_state_prims(),
        make_state=lambda store, script: dict(store),
        sample_states=_state_samples,
        sample_comps=lambda i: Comp(
            lambda st, i=i: (st.get("x", 0) + 10 * i + 1,
                             {**st, "x": st.get("x", 0) + i + 1})),
        sample_funs=lambda j: (lambda v, j=j: Comp(
            lambda st: (v + 3 * st.get("x", 0) + j,
                        {**st, "x": st.get("x", 0) + 2 * j + 1, "y": v}))),
        render_state=_render_store,
    )


def _render_store(s0, s1) -> list[str]:
    changed = {k: v for k, v in sorted(s1.items()) if s0.get(k) != v}
    if not changed:
        return ["store unchanged"]
    return ["store: " + ", ".join(f"{k}={v}" for k, v in changed.items())]


def _writer_prims() -> dict[str, VBuiltin]:
    def read(ref):
        def run(st):
            store, trace = st
            return store.get(ref.cell, 0), (store, trace + (("read", ref.cell),))
        return Comp(run)

    def write(ref, v):
        def run(st):
            store, trace = st
            return None, ({**store, ref.cell: v}, trace + (("write", ref.cell, v),))
        return Comp(run)

    return {
        "read": VBuiltin("read", 1, read),
        "write": VBuiltin("write", 2, write),
    }


def _mk_writer() -> Runtime:
    return Runtime(
        name="writer",
        bind_mm=_bind_threaded,
        prims=_writer_prims(),
        make_state=lambda store, script: (dict(store), ()),
        sample_states=lambda: [({}, ()), ({"r": 1}, (("seed", 0),))],
        sample_comps=lambda i: Comp(
            lambda st, i=i: (len(st[1]) + 10 * i, (st[0], st[1] + (("c", i),)))),
        sample_funs=lambda j: (lambda v, j=j: Comp(
            lambda st: (v + len(st[1]) + j, (st[0], st[1] + (("f", j, v),))))),
        render_state=_render_writer,
    )


def _render_writer(s0, s1) -> list[str]:
    _store0, trace0 = s0
    store1, trace1 = s1
    new = trace1[len(trace0):]
    lines = ["trace: [" + ", ".join(_render_event(e) for e in new) + "]"]
    changed = {k: v for k, v in sorted(store1.items()) if s0[0].get(k) != v}
    if changed:
        lines.append("store: " + ", ".join(f"{k}={v}" for k, v in changed.items()))
    return lines


def _session_prims() -> dict[str, VBuiltin]:
    def send(v):
        def run(st):
            script, trace = st
            return None, (script, trace + (("send", v),))
        return Comp(run)

    def recv(_unit):
        def run(st):
            script, trace = st
            if not script:
                raise RuntimeProblem("recv on an empty script")
            return script[0], (script[1:], trace + (("recv", script[0]),))
        return Comp(run)

    return {
        "send": VBuiltin("send", 1, send),
        "recv": VBuiltin("recv", 1, recv),
    }


def _mk_session() -> Runtime:
    return Runtime(
        name="session",
        bind_mm=_bind_threaded,
        prims=_session_prims(),
        make_state=lambda store, script: (tuple(script), ()),
        sample_states=lambda: [(tuple(range(10, 18)), ()),
                               (tuple(range(30, 38)), (("send", 0),))],
        sample_comps=lambda i: Comp(
            lambda st, i=i: (st[0][0] + i,
                             (st[0][1:], st[1] + (("recv", st[0][0]),)))),
        sample_funs=lambda j: (lambda v, j=j: Comp(
            lambda st: (v + j, (st[0], st[1] + (("send", v + j),))))),
        render_state=_render_session,
    )


def _render_session(s0, s1) -> list[str]:
    trace = s1[1][len(s0[1]):]
    return ["trace: [" + ", ".join(_render_event(e) for e in trace) + "]"]


def _render_event(e: tuple) -> str:
    tag = e[0]
    rest = ", ".join(render_value(x) for x in e[1:])
    label = {"send": "Send", "recv": "Recv", "read": "Read", "write": "Write"}.get(
        tag, tag)
    if tag == "write":
        return f"Write {e[1]}={render_value(e[2])}"
    if tag == "read":
        return f"Read {e[1]}"
    return f"{label} {rest}" if rest else label


RUNTIMES: dict[str, Runtime] = {}


def get_runtime(name: str) -> Runtime:
    if name not in RUNTIMES:
        raise RuntimeProblem(f"unknown runtime {name}")
    return RUNTIMES[name]


def _install() -> None:
    for rt in (
        _mk_identity(),
        _mk_state("state", _bind_threaded),
        _mk_state("state_reset", _bind_state_reset),
        _mk_writer(),
        _mk_session(),
    ):
        RUNTIMES[rt.name] = rt


_install()


# ---------------------------------------------------------------------------
# Builtins (pure, curried)


def _builtin_fns() -> dict[str, VBuiltin]:
    def arith(op):
        def fn(a, b):
            if not isinstance(a, int) or not isinstance(b, int):
                raise RuntimeProblem(f"{op} expects integers")
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == ">":
                return a > b
            if op == "<":
                return a < b
            return a == b
        return fn

    table = {op: VBuiltin(op, 2, arith(op)) for op in "+-*><="}
    table["incr"] = VBuiltin("incr", 1, lambda a: a + 1)
    return table


BUILTIN_VALUES = _builtin_fns()


# ---------------------------------------------------------------------------
# Evaluation


class Evaluator:
    def __init__(self, rt: Runtime, fuel: int = 1_000_000):
        self.rt = rt
        self.fuel = fuel

    def _tick(self) -> None:
        self.fuel -= 1
        if self.fuel <= 0:
            raise RuntimeProblem("out of fuel (likely divergence; raise --fuel)")

    def eval(self, t: TargetTerm, env: dict, eenv: dict):
        self._tick()
        if isinstance(t, Var):
            if t.name in env:
                return env[t.name]
            raise RuntimeProblem(f"unbound variable {t.name} at runtime")
        if isinstance(t, Lit):
            return t.value
        if isinstance(t, TLam):
            return VClosure(t.param, t.body, env, eenv)
        if isinstance(t, TApp):
            f = self.eval(t.fn, env, eenv)
            a = self.eval(t.arg, env, eenv)
            return self.apply(f, a)
        if isinstance(t, TLet):
            v = self.eval(t.bound, env, eenv)
            inner = dict(env)
            inner[t.name] = v
            return self.eval(t.body, inner, eenv)
        if isinstance(t, TLetRec):
            inner = dict(env)
            inner[t.name] = None
            v = self.eval(t.bound, inner, eenv)
            inner[t.name] = v
            return self.eval(t.body, inner, eenv)
        if isinstance(t, TIf):
            c = self.eval(t.cond, env, eenv)
            if not isinstance(c, bool):
                raise RuntimeProblem("if condition did not evaluate to a boolean")
            return self.eval(t.then if c else t.other, env, eenv)
        if isinstance(t, EvVar):
            if t.cid not in eenv:
                raise RuntimeProblem(f"unsolved evidence #{t.cid}")
            return eenv[t.cid]
        if isinstance(t, AutoEv):
            return auto_evidence(self.rt, t.left, t.middle, t.result)
        if isinstance(t, EvAbs):
            return VEvClosure(t.cids, t.body, env, eenv)
        if isinstance(t, EvApp):
            f = self.eval(t.fn, env, eenv)
            args = [self.eval(a, env, eenv) for a in t.args]
            if not isinstance(f, VEvClosure):
                if not args:
                    return f
                raise RuntimeProblem("evidence applied to a non-generalized value")
            if len(args) != len(f.cids):
                raise RuntimeProblem("evidence arity mismatch")
            inner = dict(f.eenv)
            for cid, ev in zip(f.cids, args):
                inner[cid] = ev
            return self.eval(f.body, f.env, inner)
        if isinstance(t, BindApp):
            ev = self.eval(t.ev, env, eenv)
            comp = self.eval(t.comp, env, eenv)
            if t.cont is None:
                return VPartial(ev, comp)
            kv = self.eval(t.cont, env, eenv)
            return ev(comp, lambda x: self.apply(kv, x))
        raise RuntimeProblem(f"cannot evaluate {type(t).__name__}")

    def apply(self, f, a):
        self._tick()
        if isinstance(f, VClosure):
            inner = dict(f.env)
            inner[f.param] = a
            return self.eval(f.body, inner, f.eenv)
        if isinstance(f, VBuiltin):
            args = f.args + (a,)
            if len(args) == f.arity:
                return f.fn(*args)
            return VBuiltin(f.name, f.arity, f.fn, args)
        if isinstance(f, VPartial):
            return f.bind(f.comp, lambda x: self.apply(a, x))
        if isinstance(f, VEvClosure) and not f.cids:
            return self.apply(self.eval(f.body, f.env, f.eenv), a)
        raise RuntimeProblem(f"cannot apply {render_value(f)}")


def base_values(rt: Runtime, sig_prims: dict) -> dict:
    env = dict(BUILTIN_VALUES)
    for name in sig_prims:
        if name in rt.prims:
            env[name] = rt.prims[name]
        else:
            # nullary reference primitives name a cell of the same name
            env[name] = VRef(name)
    return env


def run_program(target: TargetTerm, rt: Runtime, sig_prims: dict,
                eenv: dict, store: Optional[dict] = None,
                script: tuple = (), fuel: int = 1_000_000):
    """Evaluate an elaborated program and force its top-level computation.
    Returns (value, initial state, final state)."""
    ev = Evaluator(rt, fuel)
    env = base_values(rt, sig_prims)
    result = ev.eval(target, env, eenv)
    s0 = rt.make_state(store or {}, script)
    if isinstance(result, Comp):
        v, s1 = result.run(s0)
        return v, s0, s1
    return result, s0, s0


def render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "()"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, VRef):
        return f"<ref {v.cell}>"
    if isinstance(v, (VClosure, VBuiltin, VEvClosure, VPartial)):
        return "<fun>"
    if isinstance(v, Comp):
        return "<computation>"
    return repr(v)
