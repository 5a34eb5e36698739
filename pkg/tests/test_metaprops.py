from __future__ import annotations

from dataclasses import replace

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import issued
from findel.derivatives import erce, frce
from findel.engine import FinContract, Gateway
from findel.marketplace import (
    ContractDescription,
    Deleted,
    Executed,
    Issue,
    IssuedFor,
    Join,
    Rejection,
    State,
    Tick,
    apply,
    join,
)
from findel.metaprops import (
    GATEWAY_ADDRESSES,
    check_consistent,
    check_events_monotone,
    check_ledger_monotone,
    check_preservation,
    check_trace,
    check_trichotomy,
    count_gateway_primitives,
    random_scenario,
    random_trace,
)
from findel.syntax import Zero


def test_empty_state_consistent():
    assert check_consistent(State()).ok


def test_condition_one_violation():
    c = FinContract(5, 0, Zero(), 1, 1, 2, 1)
    r = check_consistent(State(contracts=(c,), fresh_id=3))
    assert not r.fresh_dominates_contracts and r.violations == [(1, 5)]
    assert not r


def test_condition_two_violation():
    r = check_consistent(State(events=(Executed(4),), fresh_id=4))
    assert not r.fresh_dominates_events and (2, 4) in r.violations


def test_condition_three_violation():
    c = FinContract(1, 0, Zero(), 1, 1, 2, 1)
    r = check_consistent(State(contracts=(c,), events=(Deleted(1),), fresh_id=3))
    assert not r.live_not_closed and (3, 1) in r.violations


def test_condition_four_violation():
    r = check_consistent(State(events=(Executed(2), Deleted(2)), fresh_id=3))
    assert not r.no_double_close and r.violations == [(4, 2)]


def test_issued_for_events_do_not_count_as_closing():
    c = FinContract(0, 0, Zero(), 1, 1, 2, 1)
    assert check_consistent(State(contracts=(c,), events=(IssuedFor(2, 0),), fresh_id=1)).ok


def test_preservation_examples():
    s = State(descriptions=(ContractDescription(0, frce()),))
    assert check_preservation(s, Issue(0, 1, 2))
    assert check_preservation(s, Tick(5))
    assert check_preservation(s, Join(3, 1))  # rejected, state unchanged


def test_ledger_monotone_and_tamper_detection():
    s = issued(frce())
    s2 = join(s, 0, 2)
    assert check_ledger_monotone(s, s) and check_ledger_monotone(s, s2)
    assert len(s2.ledger) - len(s.ledger) == 2
    tampered = replace(s2, ledger=(replace(s2.ledger[0], amount=12),) + s2.ledger[1:])
    assert not check_ledger_monotone(s2, tampered)
    assert not check_ledger_monotone(s2, replace(s2, ledger=s2.ledger[1:]))


def test_events_monotone_and_one_closing_event_per_join():
    s = issued(frce())
    assert check_events_monotone(s, s)
    s2 = join(s, 0, 2)
    assert check_events_monotone(s, s2)
    assert s2.events[1:] == s.events and isinstance(s2.events[0], Executed)
    try:
        apply(s, Join(0, 9))
    except Rejection:
        pass
    assert not check_events_monotone(s2, s)


def test_trichotomy_cases():
    s = issued(erce(1, 5))
    (c,) = s.contracts
    assert check_trichotomy(s, apply(s, Tick(1)), c)
    ok = replace(s, gateways=(Gateway(5, 1, 100),))
    assert check_trichotomy(ok, join(ok, 0, 2), c)
    assert check_trichotomy(s, join(s, 0, 2), c)
    broken = replace(join(s, 0, 2), contracts=(c,))
    assert not check_trichotomy(s, broken, c)


def test_random_trace_deterministic():
    assert random_trace(11, 30) == random_trace(11, 30)
    assert random_trace(11, 0) == []
    assert len(random_trace(3, 25, "gateway-heavy")) == 25


def test_gateway_heavy_profile_statistics():
    assert count_gateway_primitives(1, 2000, "gateway-heavy") >= 0.30


def test_scenario_uses_gateway_addresses():
    case = random_scenario(5, 10)
    assert {addr for addr, _ in case.timeline.samples} <= set(GATEWAY_ADDRESSES)
    assert check_consistent(case.initial).ok


def test_check_trace_reports_injected_violation():
    case = random_scenario(2, 5)
    bad = replace(case, initial=replace(case.initial, events=(Executed(99),)))
    assert not check_trace(bad).ok


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 40), st.sampled_from(["default", "gateway-heavy"]))
def test_random_traces_satisfy_metaproperties(seed, length, profile):
    result = check_trace(random_scenario(seed, length, profile))
    assert result.ok, result.violations
    assert result.steps == length
