"""The equational law suite: bundled signatures pass, mutants fail."""

import oracles as O
import pytest
from conftest import corpus_path
from lambdapm.laws import (
    bound_description,
    check_derived_laws,
    check_laws,
    check_principality,
)
from lambdapm.signature import load_signature_file

CORE_LAWS = [
    "Functor",
    "Paired morphisms",
    "Diamond",
    "Associativity",
    "Closure",
    "Principality",
]


@pytest.mark.parametrize("name", ["ist.sig", "ce.sig", "session.sig"])
def test_bundled_signature_passes_all_laws(name):
    sig = load_signature_file(corpus_path(name))
    report = check_laws(sig)
    assert [c.name for c in report.checks] == CORE_LAWS
    assert report.ok, [f"{c.name}: {c.witness}" for c in report.failures()]


@pytest.mark.parametrize("name", ["ist.sig", "ce.sig", "session.sig"])
def test_bundled_signature_passes_derived_laws(name):
    sig = load_signature_file(corpus_path(name))
    checks = check_derived_laws(sig)
    assert [c.name for c in checks] == [
        "Left unit",
        "Right unit",
        "Morphism 1",
        "Morphism 2",
    ]
    assert all(c.ok for c in checks), [
        f"{c.name}: {c.witness}" for c in checks if not c.ok
    ]


@pytest.mark.parametrize(
    "name,expected", sorted(O.MUTANT_EXPECTED_FAILS.items())
)
def test_mutant_fails_expected_laws(name, expected):
    sig = load_signature_file(corpus_path(name))
    report = check_laws(sig)
    assert not report.ok
    failed = {c.name for c in report.failures()}
    assert expected <= failed, (failed, expected)
    for c in report.failures():
        assert c.witness, f"{c.name} failed without a counterexample"


def test_counterexamples_name_concrete_instances():
    report = check_laws(load_signature_file(corpus_path("ist_nomap.sig")))
    (functor,) = [c for c in report.failures() if c.name == "Functor"]
    assert functor.witness == "no (M, Id) |> M bind for M = IST L L"
    report = check_laws(load_signature_file(corpus_path("ist_reset.sig")))
    (assoc,) = [c for c in report.failures() if c.name == "Associativity"]
    assert "left (" in assoc.witness and "right (" in assoc.witness


def test_bound_description_is_exhaustive_for_small_theories(ist_sig):
    assert bound_description(ist_sig, 2) == "exhaustive"


def test_principality_check_passes_alone(ist_sig):
    assert check_principality(ist_sig).ok
