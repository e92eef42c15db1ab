"""Core syntax: terms, types, constraints, schemes, parsing and printing.

The surface language is a small ML dialect: lambdas, let / letrec, if,
integer arithmetic, and monadic sequencing written as ordinary `let x = e in e`
where the bound expression is effectful.  Types are value types whose arrows
carry a monadic annotation on the codomain (`a -> M b`); `Bot` is the
distinguished identity constructor (`Bot t = t`), so a pure arrow is just
`a -> b`.  Qualified types carry a bag of bind constraints `(m1, m2) |> m3`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


# ---------------------------------------------------------------------------
# Errors


class PmError(Exception):
    """Base class for user-facing language errors."""

    exit_code = 1


class ParseError(PmError):
    exit_code = 1

    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        if line:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Value types (including type indexes) and monadic types


@dataclass(frozen=True)
class TVar:
    name: str

    def __repr__(self) -> str:
        return f"TVar({self.name})"


@dataclass(frozen=True)
class TCon:
    con: str
    args: tuple["ValueType", ...] = ()

    def __repr__(self) -> str:
        if not self.args:
            return f"TCon({self.con})"
        return f"TCon({self.con}, {list(self.args)})"


@dataclass(frozen=True)
class TSet:
    """A finite-set index literal (used by set-algebra theories)."""

    atoms: frozenset[str]

    def __repr__(self) -> str:
        return "TSet({%s})" % ", ".join(sorted(self.atoms))


@dataclass(frozen=True)
class TArrow:
    dom: "ValueType"
    eff: "MonadicType"
    cod: "ValueType"

    def __repr__(self) -> str:
        return f"TArrow({self.dom!r}, {self.eff!r}, {self.cod!r})"


ValueType = Union[TVar, TCon, TSet, TArrow]


@dataclass(frozen=True)
class MBot:
    """The identity constructor: computations are plain values."""

    def __repr__(self) -> str:
        return "Bot"


@dataclass(frozen=True)
class MVar:
    ident: int

    def __repr__(self) -> str:
        return f"MVar({self.ident})"


@dataclass(frozen=True)
class MGround:
    con: str
    indexes: tuple[ValueType, ...] = ()

    def __repr__(self) -> str:
        return f"MGround({self.con}, {list(self.indexes)})"


MonadicType = Union[MBot, MVar, MGround]

BOT = MBot()

UNIT = TCon("unit")
INT = TCon("int")
BOOL = TCon("bool")


# ---------------------------------------------------------------------------
# Bind constraints and schemes


@dataclass(frozen=True)
class Constraint:
    """A bind constraint (m1, m2) |> m3 with a stable identity.

    The `cid` ties the constraint to the evidence variable that witnesses it
    in the elaborated term; it survives substitution and simplification.
    """

    cid: int
    left: MonadicType
    middle: MonadicType
    result: MonadicType

    @property
    def triple(self) -> tuple[MonadicType, MonadicType, MonadicType]:
        return (self.left, self.middle, self.result)

    def __repr__(self) -> str:
        return f"C{self.cid}[{self.left!r},{self.middle!r} |> {self.result!r}]"


@dataclass(frozen=True)
class Scheme:
    """A qualified type scheme: forall tvars mvars. constraints => body.

    `constraints` are the abstracted (evidence-carrying) ones; `hidden`
    records constraints elided from display whose evidence is auto-supplied.
    """

    tvars: tuple[str, ...]
    mvars: tuple[int, ...]
    constraints: tuple[Constraint, ...]
    body: ValueType
    hidden: tuple[Constraint, ...] = ()

    def all_constraints(self) -> tuple[Constraint, ...]:
        return self.constraints + self.hidden


# ---------------------------------------------------------------------------
# Terms (source) and target terms (elaborated, with explicit evidence)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: object  # int | bool | None (unit)


@dataclass(frozen=True)
class Lam:
    param: str
    body: "Term"


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class LetRec:
    name: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class If:
    cond: "Term"
    then: "Term"
    other: "Term"


Term = Union[Var, Lit, Lam, App, Let, LetRec, If]


@dataclass(frozen=True)
class EvVar:
    """Reference to the evidence witnessing constraint `cid`."""

    cid: int


@dataclass(frozen=True)
class AutoEv:
    """Evidence supplied automatically (no lambda): a bind resolved from the
    signature or a universal pass-through for identity-shaped constraints.

    The triple is a snapshot; solutions substitute into it before running.
    """

    left: MonadicType
    middle: MonadicType
    result: MonadicType


@dataclass(frozen=True)
class EvAbs:
    """Evidence lambdas wrapping a generalized definition (outermost first)."""

    cids: tuple[int, ...]
    body: "TargetTerm"


@dataclass(frozen=True)
class EvApp:
    """Instantiation applying evidence arguments in declaration order."""

    fn: "TargetTerm"
    args: tuple["TargetTerm", ...]


@dataclass(frozen=True)
class BindApp:
    """An explicit bind application `ev comp cont`.

    `cont` may be None: the bind is partially applied and awaits its
    continuation (this shape arises when sequencing an argument into an
    application).
    """

    ev: "TargetTerm"
    comp: "TargetTerm"
    cont: Optional["TargetTerm"]


@dataclass(frozen=True)
class TLam:
    param: str
    body: "TargetTerm"


@dataclass(frozen=True)
class TApp:
    fn: "TargetTerm"
    arg: "TargetTerm"


@dataclass(frozen=True)
class TLet:
    name: str
    bound: "TargetTerm"
    body: "TargetTerm"


@dataclass(frozen=True)
class TLetRec:
    name: str
    bound: "TargetTerm"
    body: "TargetTerm"


@dataclass(frozen=True)
class TIf:
    cond: "TargetTerm"
    then: "TargetTerm"
    other: "TargetTerm"


TargetTerm = Union[
    Var, Lit, TLam, TApp, TLet, TLetRec, TIf, EvVar, AutoEv, EvAbs, EvApp, BindApp
]


# ---------------------------------------------------------------------------
# Free variables and substitution


class VarSets:
    """Free variables split by kind (value/index vars vs monadic vars)."""

    __slots__ = ("tvars", "mvars")

    def __init__(self, tvars: Optional[set[str]] = None, mvars: Optional[set[int]] = None):
        self.tvars: set[str] = tvars if tvars is not None else set()
        self.mvars: set[int] = mvars if mvars is not None else set()

    def update(self, other: "VarSets") -> None:
        self.tvars |= other.tvars
        self.mvars |= other.mvars

    def __contains__(self, item: object) -> bool:
        if isinstance(item, str):
            return item in self.tvars
        return item in self.mvars

    def __repr__(self) -> str:
        return f"VarSets(tvars={sorted(self.tvars)}, mvars={sorted(self.mvars)})"


def _ftv_value(t: ValueType, out: VarSets) -> None:
    if isinstance(t, TVar):
        out.tvars.add(t.name)
    elif isinstance(t, TCon):
        for a in t.args:
            _ftv_value(a, out)
    elif isinstance(t, TArrow):
        _ftv_value(t.dom, out)
        _ftv_monad(t.eff, out)
        _ftv_value(t.cod, out)
    # TSet has no variables


def _ftv_monad(m: MonadicType, out: VarSets) -> None:
    if isinstance(m, MVar):
        out.mvars.add(m.ident)
    elif isinstance(m, MGround):
        for ix in m.indexes:
            _ftv_value(ix, out)


def free_type_vars(x) -> VarSets:
    """Free variables of a type, monadic type, constraint, bag, scheme, or
    environment (mapping of names to schemes/types)."""
    out = VarSets()
    _collect(x, out)
    return out


def _collect(x, out: VarSets) -> None:
    if isinstance(x, (TVar, TCon, TSet, TArrow)):
        _ftv_value(x, out)
    elif isinstance(x, (MBot, MVar, MGround)):
        _ftv_monad(x, out)
    elif isinstance(x, Constraint):
        _ftv_monad(x.left, out)
        _ftv_monad(x.middle, out)
        _ftv_monad(x.result, out)
    elif isinstance(x, Scheme):
        inner = VarSets()
        for c in x.all_constraints():
            _collect(c, inner)
        _ftv_value(x.body, inner)
        inner.tvars -= set(x.tvars)
        inner.mvars -= set(x.mvars)
        out.update(inner)
    elif isinstance(x, dict):
        for v in x.values():
            _collect(v, out)
    elif isinstance(x, (list, tuple, set, frozenset)):
        for v in x:
            _collect(v, out)
    else:
        raise TypeError(f"free_type_vars: unsupported {type(x).__name__}")


class Subst:
    """A substitution over monadic variables and type variables.

    Bindings are chased lazily: `m_map` values may themselves mention bound
    variables.  `apply_*` always produces fully substituted results.
    """

    def __init__(self) -> None:
        self.m_map: dict[int, MonadicType] = {}
        self.t_map: dict[str, ValueType] = {}

    def bind_m(self, ident: int, m: MonadicType) -> None:
        assert ident not in self.m_map, f"monad var {ident} bound twice"
        self.m_map[ident] = m

    def bind_t(self, name: str, t: ValueType) -> None:
        assert name not in self.t_map, f"type var {name} bound twice"
        self.t_map[name] = t

    def walk_m(self, m: MonadicType) -> MonadicType:
        while isinstance(m, MVar) and m.ident in self.m_map:
            m = self.m_map[m.ident]
        return m

    def walk_t(self, t: ValueType) -> ValueType:
        while isinstance(t, TVar) and t.name in self.t_map:
            t = self.t_map[t.name]
        return t

    def apply_value(self, t: ValueType) -> ValueType:
        t = self.walk_t(t)
        if isinstance(t, TCon):
            if not t.args:
                return t
            return TCon(t.con, tuple(self.apply_value(a) for a in t.args))
        if isinstance(t, TArrow):
            return TArrow(self.apply_value(t.dom), self.apply_monad(t.eff), self.apply_value(t.cod))
        return t

    def apply_monad(self, m: MonadicType) -> MonadicType:
        m = self.walk_m(m)
        if isinstance(m, MGround):
            if not m.indexes:
                return m
            return MGround(m.con, tuple(self.apply_value(ix) for ix in m.indexes))
        return m

    def apply_constraint(self, c: Constraint) -> Constraint:
        return Constraint(
            c.cid,
            self.apply_monad(c.left),
            self.apply_monad(c.middle),
            self.apply_monad(c.result),
        )

    def apply_bag(self, bag) -> list[Constraint]:
        return [self.apply_constraint(c) for c in bag]

    def apply_scheme(self, s: Scheme) -> Scheme:
        # Quantified variables are never in the substitution's domain here
        # (fresh instantiation guarantees disjointness).
        return Scheme(
            s.tvars,
            s.mvars,
            tuple(self.apply_constraint(c) for c in s.constraints),
            self.apply_value(s.body),
            tuple(self.apply_constraint(c) for c in s.hidden),
        )


# ---------------------------------------------------------------------------
# Lexer


_TWO_CHAR = ("|>", "=>", "<=", "->", "()")
_ONE_CHAR = "(){},.:/=+-*><_"
_KEYWORDS = {
    "let", "letrec", "in", "lam", "if", "then", "else", "true", "false",
    "forall", "theory", "constructor", "bind", "prim", "runtime", "top", "sub",
}


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'int' | 'kw' | symbol text | 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("(*", i):
            depth = 1
            j = i + 2
            l2, c2 = line, col + 2
            while j < n and depth:
                if source.startswith("(*", j):
                    depth += 1
                    j += 2
                    c2 += 2
                elif source.startswith("*)", j):
                    depth -= 1
                    j += 2
                    c2 += 2
                else:
                    if source[j] == "\n":
                        l2 += 1
                        c2 = 1
                    else:
                        c2 += 1
                    j += 1
            if depth:
                raise ParseError("unterminated comment", line, col)
            i, line, col = j, l2, c2
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR:
            toks.append(Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("int", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_'"):
                j += 1
            text = source[i:j]
            kind = "kw" if text in _KEYWORDS else "ident"
            toks.append(Token(kind, text, line, col))
            col += j - i
            i = j
            continue
        if ch in _ONE_CHAR:
            toks.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class TokenStream:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def at_kw(self, word: str) -> bool:
        return self.at("kw", word)


# ---------------------------------------------------------------------------
# Term parsing

_CMP_OPS = (">", "<", "=")
_ADD_OPS = ("+", "-")
_MUL_OPS = ("*",)

_fresh_wild = 0


def _wild_name() -> str:
    global _fresh_wild
    _fresh_wild += 1
    return f"_w{_fresh_wild}"


def _parse_binder(ts: TokenStream) -> str:
    if ts.at("_"):
        ts.next()
        return _wild_name()
    return ts.expect("ident").text


def _parse_term(ts: TokenStream) -> Term:
    if ts.at_kw("lam"):
        ts.next()
        param = _parse_binder(ts)
        ts.expect(".")
        return Lam(param, _parse_term(ts))
    if ts.at_kw("letrec"):
        ts.next()
        name = ts.expect("ident").text
        ts.expect("=")
        bound = _parse_term(ts)
        ts.expect("kw", "in")
        return LetRec(name, bound, _parse_term(ts))
    if ts.at_kw("let"):
        ts.next()
        name = _parse_binder(ts)
        ts.expect("=")
        bound = _parse_term(ts)
        ts.expect("kw", "in")
        return Let(name, bound, _parse_term(ts))
    if ts.at_kw("if"):
        ts.next()
        cond = _parse_term(ts)
        ts.expect("kw", "then")
        then = _parse_term(ts)
        ts.expect("kw", "else")
        return If(cond, then, _parse_term(ts))
    return _parse_cmp(ts)


def _parse_cmp(ts: TokenStream) -> Term:
    left = _parse_add(ts)
    if ts.peek().kind in _CMP_OPS:
        op = ts.next().text
        right = _parse_add(ts)
        return App(App(Var(op), left), right)
    return left


def _parse_add(ts: TokenStream) -> Term:
    left = _parse_mul(ts)
    while ts.peek().kind in _ADD_OPS:
        op = ts.next().text
        right = _parse_mul(ts)
        left = App(App(Var(op), left), right)
    return left


def _parse_mul(ts: TokenStream) -> Term:
    left = _parse_app(ts)
    while ts.peek().kind in _MUL_OPS:
        op = ts.next().text
        right = _parse_app(ts)
        left = App(App(Var(op), left), right)
    return left


_ATOM_STARTS = ("ident", "int", "(", "()")


def _parse_app(ts: TokenStream) -> Term:
    t = _parse_atom(ts)
    while ts.peek().kind in _ATOM_STARTS or ts.at_kw("true") or ts.at_kw("false"):
        t = App(t, _parse_atom(ts))
    return t


def _parse_atom(ts: TokenStream) -> Term:
    tok = ts.peek()
    if tok.kind == "()":
        ts.next()
        return Lit(None)
    if tok.kind == "int":
        ts.next()
        return Lit(int(tok.text))
    if tok.kind == "kw" and tok.text in ("true", "false"):
        ts.next()
        return Lit(tok.text == "true")
    if tok.kind == "ident":
        ts.next()
        return Var(tok.text)
    if tok.kind == "(":
        ts.next()
        inner = _parse_term(ts)
        ts.expect(")")
        return inner
    raise ParseError(f"expected a term, found {tok.text or 'end of input'!r}", tok.line, tok.col)


@dataclass(frozen=True)
class TopBinding:
    kind: str  # 'let' | 'letrec'
    name: str
    term: Term


@dataclass(frozen=True)
class Program:
    bindings: tuple[TopBinding, ...]
    main: Optional[Term]

    def as_term(self) -> Term:
        """Desugar: nest bindings around the main expression (default `()`)."""
        body: Term = self.main if self.main is not None else Lit(None)
        for b in reversed(self.bindings):
            body = (LetRec if b.kind == "letrec" else Let)(b.name, b.term, body)
        return body


def parse_program_source(source: str) -> Program:
    """Parse a program file: a sequence of top-level `let`/`letrec` bindings
    (no `in`) followed by an optional main expression."""
    ts = TokenStream(tokenize(source))
    bindings: list[TopBinding] = []
    main: Optional[Term] = None
    while not ts.at("eof"):
        if ts.at_kw("let") or ts.at_kw("letrec"):
            kind = ts.next().text
            name = ts.expect("ident").text
            ts.expect("=")
            bound = _parse_term(ts)
            if ts.at_kw("in"):
                # It was an expression after all: this is the main term.
                ts.next()
                body = _parse_term(ts)
                main = (LetRec if kind == "letrec" else Let)(name, bound, body)
                break
            bindings.append(TopBinding(kind, name, bound))
        else:
            main = _parse_term(ts)
            break
    tok = ts.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected {tok.text!r} after program end", tok.line, tok.col)
    return Program(tuple(bindings), main)


def parse_program(source: str) -> Term:
    return parse_program_source(source).as_term()


def parse_term(source: str) -> Term:
    ts = TokenStream(tokenize(source))
    t = _parse_term(ts)
    tok = ts.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected {tok.text!r} after term", tok.line, tok.col)
    return t


# ---------------------------------------------------------------------------
# Values (Fig.-style value subset: variables, literals, lambdas)


def is_value(t: Term) -> bool:
    return isinstance(t, (Var, Lit, Lam))


# ---------------------------------------------------------------------------
# Printing


class _Namer:
    """Canonical display names: value vars a1,a2,..., monad vars v1,v2,...

    Quantified variables are renamed in first-occurrence order; free ones
    keep their source names (or ?N for raw monad variables).
    """

    def __init__(self, rename_t: set[str], rename_m: set[int]):
        self.rename_t = rename_t
        self.rename_m = rename_m
        self.t_names: dict[str, str] = {}
        self.m_names: dict[int, str] = {}

    def tvar(self, name: str) -> str:
        if name not in self.rename_t:
            return name
        if name not in self.t_names:
            self.t_names[name] = f"a{len(self.t_names) + 1}"
        return self.t_names[name]

    def mvar(self, ident: int) -> str:
        if ident not in self.rename_m:
            return f"?{ident}"
        if ident not in self.m_names:
            self.m_names[ident] = f"v{len(self.m_names) + 1}"
        return self.m_names[ident]


def _print_value(t: ValueType, nm: _Namer, atom: bool = False) -> str:
    if isinstance(t, TVar):
        return nm.tvar(t.name)
    if isinstance(t, TSet):
        return "{%s}" % ", ".join(sorted(t.atoms))
    if isinstance(t, TCon):
        if t.con == "unit" and not t.args:
            return "()"
        if not t.args:
            return t.con
        s = t.con + " " + " ".join(_print_value(a, nm, atom=True) for a in t.args)
        return f"({s})" if atom else s
    if isinstance(t, TArrow):
        dom = _print_value(t.dom, nm, atom=False)
        if isinstance(t.dom, TArrow):
            dom = f"({dom})"
        cod = _print_value(t.cod, nm, atom=True)
        if isinstance(t.eff, MBot):
            s = f"{dom} -> {cod}"
        else:
            s = f"{dom} -> {_print_monad(t.eff, nm, atom=True)} {cod}"
        return f"({s})" if atom else s
    raise TypeError(type(t).__name__)


def _print_monad(m: MonadicType, nm: _Namer, atom: bool = False) -> str:
    if isinstance(m, MBot):
        return "Bot"
    if isinstance(m, MVar):
        return nm.mvar(m.ident)
    if not m.indexes:
        return m.con
    s = m.con + " " + " ".join(_print_value(ix, nm, atom=True) for ix in m.indexes)
    return f"({s})" if atom else s


def _print_constraint(c: Constraint, nm: _Namer) -> str:
    if isinstance(c.middle, MBot):
        return f"{_print_monad(c.left, nm)} |> {_print_monad(c.result, nm)}"
    return (
        f"({_print_monad(c.left, nm)}, {_print_monad(c.middle, nm)})"
        f" |> {_print_monad(c.result, nm)}"
    )


def _occurrence_order(s: Scheme) -> tuple[list[str], list[int]]:
    t_order: list[str] = []
    m_order: list[int] = []
    t_seen: set[str] = set()
    m_seen: set[int] = set()

    def walk_v(t: ValueType) -> None:
        if isinstance(t, TVar):
            if t.name not in t_seen:
                t_seen.add(t.name)
                t_order.append(t.name)
        elif isinstance(t, TCon):
            for a in t.args:
                walk_v(a)
        elif isinstance(t, TArrow):
            walk_v(t.dom)
            walk_m(t.eff)
            walk_v(t.cod)

    def walk_m(m: MonadicType) -> None:
        if isinstance(m, MVar):
            if m.ident not in m_seen:
                m_seen.add(m.ident)
                m_order.append(m.ident)
        elif isinstance(m, MGround):
            for ix in m.indexes:
                walk_v(ix)

    for c in s.constraints:
        walk_m(c.left)
        walk_m(c.middle)
        walk_m(c.result)
    walk_v(s.body)
    for c in s.hidden:
        walk_m(c.left)
        walk_m(c.middle)
        walk_m(c.result)
    return t_order, m_order


def print_type(s: Scheme, show_hidden: bool = False) -> str:
    """Render a scheme with canonical variable names.

    Constraints print in declaration order; a morphism-shaped constraint
    `(m, Bot) |> n` prints as `m |> n`.
    """
    nm = _Namer(set(s.tvars), set(s.mvars))
    t_order, m_order = _occurrence_order(s)
    for name in t_order:
        if name in nm.rename_t:
            nm.tvar(name)
    for ident in m_order:
        if ident in nm.rename_m:
            nm.mvar(ident)

    parts: list[str] = []
    quant: list[str] = [nm.tvar(n) for n in s.tvars if n in nm.t_names]
    quant += [nm.mvar(i) for i in s.mvars if i in nm.m_names]
    if quant:
        parts.append("forall " + " ".join(quant) + ".")
    shown = list(s.constraints) + (list(s.hidden) if show_hidden else [])
    if shown:
        parts.append(", ".join(_print_constraint(c, nm) for c in shown) + " =>")
    parts.append(_print_value(s.body, nm))
    return " ".join(parts)


def scheme_monad_names(s: Scheme) -> dict[int, str]:
    """The display name print_type would give each quantified monad
    variable."""
    nm = _Namer(set(s.tvars), set(s.mvars))
    t_order, m_order = _occurrence_order(s)
    for name in t_order:
        if name in nm.rename_t:
            nm.tvar(name)
    for ident in m_order:
        if ident in nm.rename_m:
            nm.mvar(ident)
    return dict(nm.m_names)


def print_main_typing(bag, m: MonadicType, t: ValueType) -> str:
    """Render the typing of a program's main expression: its residual
    constraints, result effect, and value type."""
    vs = free_type_vars(list(bag) + [m, t])
    fake = Scheme(tuple(vs.tvars), tuple(vs.mvars), tuple(bag),
                  TArrow(t, m, t))
    nm = _Namer(set(fake.tvars), set(fake.mvars))
    t_order, m_order = _occurrence_order(fake)
    for name in t_order:
        nm.tvar(name)
    for ident in m_order:
        nm.mvar(ident)
    parts = []
    if bag:
        parts.append(", ".join(_print_constraint(c, nm) for c in bag) + " =>")
    parts.append(_print_monad(m, nm, atom=True))
    parts.append(_print_value(t, nm, atom=True))
    return " ".join(parts)


def print_monadic(m: MonadicType) -> str:
    return _print_monad(m, _Namer(set(), set()))


def print_value_type(t: ValueType) -> str:
    return _print_value(t, _Namer(set(), set()))


def print_constraint(c: Constraint) -> str:
    return _print_constraint(c, _Namer(set(), set()))


# ---------------------------------------------------------------------------
# Term printing (source and elaborated forms)


def _is_identity_lam(t: TargetTerm) -> bool:
    return isinstance(t, TLam) and isinstance(t.body, Var) and t.body.name == t.param


def print_term(t, ev_names: Optional[dict[int, str]] = None) -> str:
    """Pretty-print a source or elaborated term on one line."""
    ev = ev_names or {}

    def go(t, prec: int) -> str:
        # prec: 0 = open, 10 = application argument
        if isinstance(t, Var):
            return t.name
        if isinstance(t, Lit):
            if t.value is None:
                return "()"
            if isinstance(t.value, bool):
                return "true" if t.value else "false"
            return str(t.value)
        if isinstance(t, EvVar):
            return ev.get(t.cid, f"ev{t.cid}")
        if isinstance(t, AutoEv):
            nm = _Namer(set(), set())
            return "{%s}" % _print_constraint(Constraint(-1, t.left, t.middle, t.result), nm)
        if isinstance(t, (Lam, TLam)):
            s = f"lam {t.param}. {go(t.body, 0)}"
            return f"({s})" if prec > 0 else s
        if isinstance(t, EvAbs):
            lams = " ".join(ev.get(c, f"ev{c}") for c in t.cids)
            s = f"lam {lams}. {go(t.body, 0)}" if t.cids else go(t.body, 0)
            return f"({s})" if prec > 0 and t.cids else s
        if isinstance(t, (Let, TLet)):
            s = f"let {t.name} = {go(t.bound, 0)} in {go(t.body, 0)}"
            return f"({s})" if prec > 0 else s
        if isinstance(t, (LetRec, TLetRec)):
            s = f"letrec {t.name} = {go(t.bound, 0)} in {go(t.body, 0)}"
            return f"({s})" if prec > 0 else s
        if isinstance(t, (If, TIf)):
            s = f"if {go(t.cond, 0)} then {go(t.then, 0)} else {go(t.other, 0)}"
            return f"({s})" if prec > 0 else s
        if isinstance(t, (App, TApp)):
            s = f"{go(t.fn, 5)} {go(t.arg, 10)}"
            return f"({s})" if prec > 5 else s
        if isinstance(t, EvApp):
            s = go(t.fn, 5)
            for a in t.args:
                s += f" {go(a, 10)}"
            return f"({s})" if prec > 5 else s
        if isinstance(t, BindApp):
            # Identity-shaped automatic evidence applied to an identity
            # continuation is just the computation: show it bare.
            if isinstance(t.ev, AutoEv) and t.cont is not None and _is_identity_lam(t.cont):
                return go(t.comp, prec)
            s = f"{go(t.ev, 10)} {go(t.comp, 10)}"
            if t.cont is not None:
                s += f" {go(t.cont, 10)}"
            return f"({s})" if prec > 5 else s
        raise TypeError(type(t).__name__)

    return go(t, 0)


# ---------------------------------------------------------------------------
# Alpha equivalence of schemes


def _shape_key(c: Constraint) -> tuple:
    def slot(m: MonadicType):
        if isinstance(m, MBot):
            return ("bot",)
        if isinstance(m, MVar):
            return ("var",)
        return ("ground", m.con)

    return (slot(c.left), slot(c.middle), slot(c.result))


def alpha_equivalent(s1: Scheme, s2: Scheme) -> bool:
    """Schemes equal up to renaming of quantified variables and reordering
    of the constraint bag (hidden constraints are ignored)."""
    if (
        len(s1.tvars) != len(s2.tvars)
        or len(s1.mvars) != len(s2.mvars)
        or len(s1.constraints) != len(s2.constraints)
    ):
        return False

    b1 = set(s1.tvars)
    b2 = set(s2.tvars)
    mb1 = set(s1.mvars)
    mb2 = set(s2.mvars)

    # tmap: s1 tvar -> s2 tvar; mmap: s1 mvar -> s2 mvar (bijections)
    def match_value(t1: ValueType, t2: ValueType, tmap: dict, mmap: dict) -> bool:
        if isinstance(t1, TVar) or isinstance(t2, TVar):
            if not (isinstance(t1, TVar) and isinstance(t2, TVar)):
                return False
            in1, in2 = t1.name in b1, t2.name in b2
            if in1 != in2:
                return False
            if not in1:
                return t1.name == t2.name
            if t1.name in tmap:
                return tmap[t1.name] == t2.name
            if t2.name in tmap.values():
                return False
            tmap[t1.name] = t2.name
            return True
        if isinstance(t1, TCon) and isinstance(t2, TCon):
            if t1.con != t2.con or len(t1.args) != len(t2.args):
                return False
            return all(match_value(a, b, tmap, mmap) for a, b in zip(t1.args, t2.args))
        if isinstance(t1, TSet) and isinstance(t2, TSet):
            return t1.atoms == t2.atoms
        if isinstance(t1, TArrow) and isinstance(t2, TArrow):
            return (
                match_value(t1.dom, t2.dom, tmap, mmap)
                and match_monad(t1.eff, t2.eff, tmap, mmap)
                and match_value(t1.cod, t2.cod, tmap, mmap)
            )
        return False

    def match_monad(m1: MonadicType, m2: MonadicType, tmap: dict, mmap: dict) -> bool:
        if isinstance(m1, MBot) and isinstance(m2, MBot):
            return True
        if isinstance(m1, MVar) or isinstance(m2, MVar):
            if not (isinstance(m1, MVar) and isinstance(m2, MVar)):
                return False
            in1, in2 = m1.ident in mb1, m2.ident in mb2
            if in1 != in2:
                return False
            if not in1:
                return m1.ident == m2.ident
            if m1.ident in mmap:
                return mmap[m1.ident] == m2.ident
            if m2.ident in mmap.values():
                return False
            mmap[m1.ident] = m2.ident
            return True
        if isinstance(m1, MGround) and isinstance(m2, MGround):
            if m1.con != m2.con or len(m1.indexes) != len(m2.indexes):
                return False
            return all(match_value(a, b, tmap, mmap) for a, b in zip(m1.indexes, m2.indexes))
        return False

    cons2 = list(s2.constraints)

    def search(i: int, tmap: dict, mmap: dict, used: set[int]) -> bool:
        if i == len(s1.constraints):
            return match_value(s1.body, s2.body, dict(tmap), dict(mmap))
        c1 = s1.constraints[i]
        key = _shape_key(c1)
        for j, c2 in enumerate(cons2):
            if j in used or _shape_key(c2) != key:
                continue
            tm, mm = dict(tmap), dict(mmap)
            if (
                match_monad(c1.left, c2.left, tm, mm)
                and match_monad(c1.middle, c2.middle, tm, mm)
                and match_monad(c1.result, c2.result, tm, mm)
            ):
                if search(i + 1, tm, mm, used | {j}):
                    return True
        return False

    return search(0, {}, {}, set())
