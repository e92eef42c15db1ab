"""Ground universes, entailment, and principal combination.

The bundled signatures' bounded ground universes are compared, as full sets
of (left, middle, result) triples, against the brute-force oracles.
"""

import random

import oracles as O
import pytest
from conftest import (
    canon_monad,
    corpus_path,
    ground_triples,
    monad_from_canon,
)
from lambdapm.signature import entail, load_signature_file, principal_join
from lambdapm.syntax import Constraint


def test_store_universe_matches_oracle(ist_sig):
    assert ground_triples(ist_sig) == O.ist_ground_binds()
    assert len(ist_sig.ground_monads(2)) == O.FROZEN_IST_MONAD_COUNT


def test_region_universe_matches_oracle(ce_sig):
    assert ground_triples(ce_sig) == O.ce_ground_binds()
    assert len(ce_sig.ground_monads(2)) == O.FROZEN_CE_MONAD_COUNT


def test_session_universe_matches_oracle(session_sig):
    assert ground_triples(session_sig) == O.session_ground_binds(2)
    assert len(session_sig.ground_monads(2)) == O.FROZEN_SESSION_MONAD_COUNT


def test_mutant_universes_match_oracle():
    nomap = load_signature_file(corpus_path("ist_nomap.sig"))
    assert ground_triples(nomap) == O.ist_ground_binds(nomap=True)
    weak = load_signature_file(corpus_path("ist_weak.sig"))
    assert ground_triples(weak) == O.ist_ground_binds(weak=True)
    assert len(weak.ground_binds(2)) == O.FROZEN_IST_WEAK_INSTANCE_COUNT
    reset = load_signature_file(corpus_path("ist_reset.sig"))
    assert ground_triples(reset) == O.ist_ground_binds()  # same binds, other runtime


def test_bind_table_agrees_with_ground_binds(ist_sig):
    table = ist_sig.bind_table(2)
    rebuilt = {
        (gb.left, gb.middle, r)
        for gb in ist_sig.ground_binds(2)
        for r in table[(gb.left, gb.middle)]
    }
    assert {gb.triple for gb in ist_sig.ground_binds(2)} <= rebuilt
    for (m1, m2), results in table.items():
        for r in results:
            assert ist_sig.has_ground(m1, m2, r)


def test_entailment_agrees_with_ground_universe(ist_sig):
    """A fully ground constraint is entailed exactly when its triple is in
    the bounded ground universe."""
    oracle = O.ist_ground_binds()
    monads = ist_sig.ground_monads(2)
    for m1 in monads:
        for m2 in monads:
            for m3 in monads:
                c = Constraint(0, m1, m2, m3)
                got = entail(ist_sig, c) is not None
                want = tuple(map(canon_monad, (m1, m2, m3))) in oracle
                assert got == want, (m1, m2, m3)


def test_principal_join_frozen_cases(ist_sig):
    for pairs, expected in O.FROZEN_PJ_CASES:
        impl_pairs = [
            (monad_from_canon(a), monad_from_canon(b)) for a, b in pairs
        ]
        got = principal_join(ist_sig, impl_pairs)
        want = None if expected is None else monad_from_canon(expected)
        assert got == want, pairs


def test_principal_join_agrees_with_oracle_randomized(ist_sig):
    rng = random.Random(26)
    canon_monads = [O.BOT] + [O.ist(p, l) for p in "LH" for l in "LH"]
    for _ in range(120):
        pairs = [
            (rng.choice(canon_monads), rng.choice(canon_monads))
            for _ in range(rng.randint(1, 3))
        ]
        want = O.principal_join_oracle(pairs)
        got = principal_join(
            ist_sig,
            [(monad_from_canon(a), monad_from_canon(b)) for a, b in pairs],
        )
        got_canon = None if got is None else canon_monad(got)
        assert got_canon == want, pairs


def test_principal_join_is_a_common_result(ist_sig):
    """When a principal combination exists, it is a result of every pair and
    every other common result is reachable from it by a coercion."""
    rng = random.Random(27)
    table = ist_sig.bind_table(2)
    monads = ist_sig.ground_monads(2)
    checked = 0
    for _ in range(120):
        pairs = [
            (rng.choice(monads), rng.choice(monads))
            for _ in range(rng.randint(1, 3))
        ]
        m_hat = principal_join(ist_sig, pairs)
        if m_hat is None:
            continue
        checked += 1
        common = None
        for a, b in pairs:
            rs = set(table.get((a, b), set()))
            common = rs if common is None else common & rs
        assert common is not None and m_hat in common
        for other in common:
            assert other == m_hat or ist_sig.has_ground(
                m_hat, monad_from_canon(O.BOT), other
            )
    assert checked > 10


def test_morphism_targets_match_bind_table(ist_sig):
    table = ist_sig.bind_table(2)
    targets = ist_sig.morphism_targets(2)
    for m in ist_sig.ground_monads(2):
        want = set(table.get((m, monad_from_canon(O.BOT)), set())) | {m}
        assert targets[m] == want
