"""The brute-force oracles still produce the values frozen at authoring time.

These tests guard against silent drift in the oracle module itself; the
rest of the suite compares the implementation against these functions.
"""

import oracles as O


def test_store_bind_counts():
    assert len(O.ist_ground_binds()) == O.FROZEN_IST_BIND_COUNT
    assert len(O.ist_ground_binds(nomap=True)) == O.FROZEN_IST_NOMAP_BIND_COUNT
    assert len(O.ist_ground_binds(weak=True)) == O.FROZEN_IST_WEAK_BIND_COUNT


def test_store_variants_nest():
    assert O.ist_ground_binds(nomap=True) < O.ist_ground_binds()
    assert O.ist_ground_binds() < O.ist_ground_binds(weak=True)


def test_region_bind_counts():
    binds = O.ce_ground_binds()
    assert len(binds) == O.FROZEN_CE_BIND_COUNT
    two_sided = {b for b in binds if b[0] != O.BOT and b[1] != O.BOT}
    assert len(two_sided) == O.FROZEN_CE_TWO_SIDED_COUNT


def test_session_universe_counts():
    assert len(O.session_states(2)) == O.FROZEN_SESSION_STATE_COUNT
    assert len(O.session_ground_binds(2)) == O.FROZEN_SESSION_BIND_COUNT


def test_program_oracles():
    assert O.add_interest_oracle(100, 5) == O.FROZEN_ADD_INTEREST_STORE
    value, trace = O.go_oracle(7, [41])
    assert value == O.FROZEN_GO_RESULT
    assert trace == O.FROZEN_GO_TRACE
    _, ptrace = O.ping_oracle(1, [41])
    assert ptrace == O.FROZEN_PING_TRACE
    assert O.sum_oracle(5) == O.FROZEN_SUM_5
    assert O.lib_use_ist_oracle(100, 5) == O.FROZEN_LIB_USE_IST


def test_principal_join_cases_frozen():
    for pairs, expected in O.FROZEN_PJ_CASES:
        assert O.principal_join_oracle(pairs) == expected


def test_interface_projection_frozen():
    assert len(O.P0_PRINTED) == 19
    assert O.p0_projection() == O.FROZEN_P0_PROJECTION
