"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import os

import pytest

import lambdapm
from lambdapm.signature import Signature, load_signature_file
from lambdapm.syntax import MBot, MGround, Program, TCon, TSet, parse_program_source

CORPUS = os.path.join(os.path.dirname(lambdapm.__file__), "corpus")


def corpus_path(name: str) -> str:
    return os.path.join(CORPUS, name)


def load_corpus_program(name: str) -> Program:
    with open(corpus_path(name)) as f:
        return parse_program_source(f.read())


# ---------------------------------------------------------------------------
# Canonical encodings shared with the brute-force oracles: a ground monadic
# type becomes a plain tuple of strings / frozensets / nested tuples, so sets
# of ground binds can be compared across the two implementations.


def canon_index(v) -> object:
    if isinstance(v, TSet):
        return v.atoms
    if isinstance(v, TCon):
        if not v.args:
            return v.con if v.con in ("L", "H", "int") else (v.con,)
        return (v.con,) + tuple(canon_index(a) for a in v.args)
    raise TypeError(type(v).__name__)


def canon_monad(m) -> tuple:
    if isinstance(m, MBot):
        return ("Bot",)
    assert isinstance(m, MGround), m
    return (m.con,) + tuple(canon_index(i) for i in m.indexes)


def index_from_canon(i) -> object:
    if isinstance(i, frozenset):
        return TSet(i)
    if isinstance(i, str):
        return TCon(i)
    return TCon(i[0], tuple(index_from_canon(a) for a in i[1:]))


def monad_from_canon(t) -> object:
    if t == ("Bot",):
        return MBot()
    return MGround(t[0], tuple(index_from_canon(i) for i in t[1:]))


def ground_triples(sig: Signature, depth: int = 2) -> set:
    return {
        tuple(canon_monad(x) for x in (gb.left, gb.middle, gb.result))
        for gb in sig.ground_binds(depth)
    }


# ---------------------------------------------------------------------------
# Session-scoped signature fixtures: each Signature memoizes its ground
# universe, so sharing one instance keeps the suite fast.


@pytest.fixture(scope="session")
def ist_sig() -> Signature:
    return load_signature_file(corpus_path("ist.sig"))


@pytest.fixture(scope="session")
def ce_sig() -> Signature:
    return load_signature_file(corpus_path("ce.sig"))


@pytest.fixture(scope="session")
def session_sig() -> Signature:
    return load_signature_file(corpus_path("session.sig"))
