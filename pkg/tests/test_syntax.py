"""Parsing, printing, and scheme equivalence up to renaming."""

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from conftest import load_corpus_program
from lambdapm.syntax import (
    App,
    Constraint,
    Lam,
    Let,
    MBot,
    MGround,
    MVar,
    ParseError,
    Scheme,
    TArrow,
    TCon,
    TVar,
    Var,
    alpha_equivalent,
    is_value,
    parse_program_source,
    parse_term,
    print_constraint,
    print_type,
)

# ---------------------------------------------------------------------------
# Parsing


def test_parse_application_structure():
    t = parse_term("lam f. lam x. f x")
    assert isinstance(t, Lam) and t.param == "f"
    assert isinstance(t.body, Lam) and t.body.param == "x"
    app = t.body.body
    assert isinstance(app, App)
    assert isinstance(app.fn, Var) and app.fn.name == "f"
    assert isinstance(app.arg, Var) and app.arg.name == "x"


def test_application_is_left_associative():
    t = parse_term("f x y")
    assert isinstance(t, App)
    assert isinstance(t.fn, App)
    assert t.fn.fn == Var("f") and t.fn.arg == Var("x") and t.arg == Var("y")


def test_let_and_literals_and_comments():
    t = parse_term("(* noise *) let x = 1 in x + 2")
    assert isinstance(t, Let) and t.name == "x"


def test_parse_rejects_garbage():
    with pytest.raises(ParseError):
        parse_term("lam . x")
    with pytest.raises(ParseError):
        parse_term("let x = in x")
    with pytest.raises(ParseError):
        parse_program_source("let = 3")


@pytest.mark.parametrize(
    "name",
    [
        "add_interest.pm",
        "add_interest_main.pm",
        "app.pm",
        "ce_log.pm",
        "flow_violation.pm",
        "go.pm",
        "go_main.pm",
        "lib.pm",
        "lib_use_ist.pm",
        "lib_use_session.pm",
        "ping.pm",
        "sum.pm",
    ],
)
def test_corpus_files_parse(name):
    prog = load_corpus_program(name)
    assert prog.bindings or prog.main is not None


def test_value_classification():
    assert is_value(parse_term("lam x. x"))
    assert is_value(parse_term("42"))
    assert not is_value(parse_term("f x"))
    assert not is_value(parse_term("let x = f 1 in x"))


# ---------------------------------------------------------------------------
# Printing smoke checks (exact scheme displays are covered by acceptance)


def test_print_constraint_shapes():
    c = Constraint(0, MBot(), MBot(), MVar(3))
    assert print_constraint(c) == "Bot |> ?3"
    c2 = Constraint(
        1, MGround("IST", (TCon("H"), TVar("a1"))), MVar(3), MVar(4)
    )
    assert print_constraint(c2) == "(IST H a1, ?3) |> ?4"


def test_print_type_round_shape():
    s = Scheme(
        tvars=("a",),
        mvars=(1,),
        constraints=(Constraint(0, MBot(), MBot(), MVar(1)),),
        body=TArrow(TVar("a"), MVar(1), TCon("unit")),
    )
    out = print_type(s)
    assert out == "forall a1 v1. Bot |> v1 => a1 -> v1 ()"


# ---------------------------------------------------------------------------
# Scheme equivalence: property tests over randomly built schemes


_mslots = st.one_of(
    st.just(MBot()),
    st.integers(min_value=1, max_value=3).map(MVar),
    st.sampled_from(
        [
            MGround("IST", (TCon("H"), TCon("L"))),
            MGround("IST", (TCon("L"), TVar("a"))),
        ]
    ),
)

_bodies = st.sampled_from(
    [
        TArrow(TVar("a"), MVar(1), TVar("b")),
        TArrow(TVar("a"), MVar(2), TCon("int")),
        TArrow(TCon("int"), MVar(3), TArrow(TVar("b"), MBot(), TVar("a"))),
    ]
)


@st.composite
def _schemes(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    cons = tuple(
        Constraint(i, draw(_mslots), draw(_mslots), draw(_mslots))
        for i in range(n)
    )
    return Scheme(("a", "b"), (1, 2, 3), cons, draw(_bodies))


def _rename(s: Scheme) -> Scheme:
    """Shift every quantified variable to a fresh name, consistently."""
    tmap = {v: f"r.{v}" for v in s.tvars}
    mmap = {i: i + 100 for i in s.mvars}

    def go_v(t):
        if isinstance(t, TVar):
            return TVar(tmap.get(t.name, t.name))
        if isinstance(t, TCon):
            return TCon(t.con, tuple(go_v(a) for a in t.args))
        if isinstance(t, TArrow):
            return TArrow(go_v(t.dom), go_m(t.eff), go_v(t.cod))
        return t

    def go_m(m):
        if isinstance(m, MVar):
            return MVar(mmap.get(m.ident, m.ident))
        if isinstance(m, MGround):
            return MGround(m.con, tuple(go_v(i) for i in m.indexes))
        return m

    cons = tuple(
        Constraint(c.cid, go_m(c.left), go_m(c.middle), go_m(c.result))
        for c in s.constraints
    )
    return Scheme(
        tuple(tmap[v] for v in s.tvars),
        tuple(mmap[i] for i in s.mvars),
        cons,
        go_v(s.body),
    )


@settings(max_examples=60, deadline=None)
@given(_schemes())
def test_equivalence_is_reflexive(s):
    assert alpha_equivalent(s, s)


@settings(max_examples=60, deadline=None)
@given(_schemes())
def test_equivalence_survives_consistent_renaming(s):
    assert alpha_equivalent(s, _rename(s))
    assert alpha_equivalent(_rename(s), s)


@settings(max_examples=60, deadline=None)
@given(_schemes(), st.randoms())
def test_equivalence_ignores_constraint_order(s, rng):
    cons = list(s.constraints)
    rng.shuffle(cons)
    assert alpha_equivalent(s, Scheme(s.tvars, s.mvars, tuple(cons), s.body))


@settings(max_examples=60, deadline=None)
@given(_schemes())
def test_extra_constraint_breaks_equivalence(s):
    extra = s.constraints + (Constraint(99, MBot(), MBot(), MBot()),)
    assert not alpha_equivalent(s, Scheme(s.tvars, s.mvars, extra, s.body))


def test_inconsistent_renaming_is_rejected():
    body = TArrow(TVar("a"), MVar(1), TVar("a"))
    s1 = Scheme(("a",), (1,), (), body)
    s2 = Scheme(("a", "b"), (1,), (), TArrow(TVar("a"), MVar(1), TVar("b")))
    assert not alpha_equivalent(s1, s2)  # quantifier counts differ
    s3 = Scheme(("a", "b"), (1,), (), body)
    assert not alpha_equivalent(s3, s2)  # a cannot map to both a and b
