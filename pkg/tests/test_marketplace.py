from __future__ import annotations

from dataclasses import replace

import pytest

from findel.engine import Balance, Gateway
from findel.marketplace import (
    Choice,
    ContractDescription,
    Deleted,
    Executed,
    GatewayTimeline,
    Issue,
    IssuedFor,
    Join,
    JoinOr,
    Outcome,
    Rejection,
    RejectReason,
    State,
    Tick,
    apply,
    issue,
    join,
    join_or,
    run_trace,
    tick,
)
from findel.syntax import INF, Currency, Or, parse

USD, EUR = Currency.USD, Currency.EUR
FRCE = parse("And(Give(Scale(11, One(USD))), Scale(10, One(EUR)))")
OR = parse("Or(One(USD), Scale(2, One(EUR)))")


def market(*descriptions, time=100, **kw):
    return State(descriptions=tuple(descriptions), time=time, **kw)


def test_issue_prepends_contract_and_event():
    s = market(ContractDescription(0, FRCE, 3), fresh_id=5)
    s = issue(s, 0, 1, 2)
    (c,) = s.contracts
    assert (c.ctr_id, c.issuer, c.owner, c.proposed_owner, c.scale) == (5, 1, 1, 2, 3)
    assert s.events == (IssuedFor(2, 5),)
    assert s.fresh_id == 6
    s = issue(s, 0, 4, 0)
    assert [c.ctr_id for c in s.contracts] == [6, 5]
    assert s.events[0] == IssuedFor(0, 6)


def test_issue_unknown_description():
    with pytest.raises(Rejection) as e:
        issue(market(), 3, 1, 2)
    assert e.value.reason is RejectReason.UNKNOWN_DESCRIPTION


def test_example3_join():
    s = market(ContractDescription(0, FRCE),
               balance=Balance({(1, USD): 100, (1, EUR): 50, (2, USD): 20, (2, EUR): 30}))
    s = join(issue(s, 0, 1, 2), 0, 2)
    assert s.balance == Balance({(1, USD): 111, (1, EUR): 40, (2, USD): 9, (2, EUR): 40})
    assert s.events == (Executed(0), IssuedFor(2, 0))
    assert [tx.transfer() for tx in s.ledger] == [(2, 1, 11, USD), (1, 2, 10, EUR)]
    assert s.contracts == ()


def test_anyone_may_join_when_proposed_owner_is_zero():
    s = join(issue(market(ContractDescription(0, FRCE)), 0, 1, 0), 0, 7)
    assert s.ledger[0].transfer() == (7, 1, 11, USD)


def test_wrong_caller_rejected():
    s = issue(market(ContractDescription(0, FRCE)), 0, 1, 2)
    with pytest.raises(Rejection) as e:
        join(s, 0, 3)
    assert e.value.reason is RejectReason.NOT_AUTHORIZED


def test_unknown_contract_rejected():
    with pytest.raises(Rejection) as e:
        join(market(), 0, 1)
    assert e.value.reason is RejectReason.UNKNOWN_CONTRACT
    with pytest.raises(Rejection) as e:
        join_or(market(), 0, 1, Choice.FIRST)
    assert e.value.reason is RejectReason.UNKNOWN_CONTRACT


def test_or_requires_join_or_and_vice_versa():
    s = issue(issue(market(ContractDescription(0, OR), ContractDescription(1, FRCE)), 0, 1, 2), 1, 1, 2)
    with pytest.raises(Rejection) as e:
        join(s, 0, 2)
    assert e.value.reason is RejectReason.MUST_USE_JOIN_OR
    with pytest.raises(Rejection) as e:
        join_or(s, 1, 2, Choice.FIRST)
    assert e.value.reason is RejectReason.NOT_AN_OR


@pytest.mark.parametrize("choice, transfer", [(Choice.FIRST, (1, 2, 1, USD)), (Choice.SECOND, (1, 2, 2, EUR))])
def test_join_or_executes_chosen_branch(choice, transfer):
    s = join_or(issue(market(ContractDescription(0, OR)), 0, 1, 2), 0, 2, choice)
    assert [tx.transfer() for tx in s.ledger] == [transfer]
    assert s.events[0] == Executed(0)


@pytest.mark.parametrize("time, ok", [(49, False), (50, True), (80, True), (81, False)])
def test_description_validity_window_is_inclusive(time, ok):
    s = issue(market(ContractDescription(0, FRCE, 1, (), 50, 80), time=time), 0, 1, 2)
    if ok:
        assert join(s, 0, 2).events[0] == Executed(0)
    else:
        with pytest.raises(Rejection) as e:
            join(s, 0, 2)
        assert e.value.reason is RejectReason.OUTSIDE_VALIDITY


def test_failed_join_deletes_and_keeps_balance_ledger_and_fresh():
    p = parse("And(One(USD), ScaleObs(5, One(EUR)))")
    s = issue(market(ContractDescription(0, p), balance=Balance({(1, USD): 4})), 0, 1, 2)
    s2 = join(s, 0, 2)
    assert s2.events[0] == Deleted(0)
    assert (s2.balance, s2.ledger, s2.fresh_id) == (s.balance, s.ledger, s.fresh_id)
    assert s2.contracts == ()


def test_generated_contracts_appended_and_carry_parent_description():
    p = parse("And(Or(Zero, Zero), Timebound(500, 600, One(USD)))")
    s = issue(market(ContractDescription(4, p, 2)), 4, 1, 2)
    s = join(s, 0, 2)
    assert [(c.ctr_id, c.dsc_id, c.scale) for c in s.contracts] == [(2, 4, 2), (4, 4, 2)]
    assert isinstance(s.contracts[0].prim, Or)


def test_join_with_live_gateway():
    p = parse("ScaleObs(5, One(USD))")
    s = issue(market(ContractDescription(0, p), gateways=(Gateway(5, 3, 90),)), 0, 1, 2)
    assert join(s, 0, 2).ledger[0].amount == 3
    stale = replace(s, time=121)
    assert join(stale, 0, 2).events[0] == Deleted(0)


def test_tick():
    s = market(time=5)
    assert tick(s, 0) is s
    assert tick(s, 10).time == 15
    with pytest.raises(Rejection) as e:
        tick(market(time=INF - 5), 5)
    assert e.value.reason is RejectReason.CLOCK_OVERFLOW
    assert tick(market(time=INF - 5), 4).time == INF - 1


def test_apply_dispatch_and_run_trace_outcomes():
    s0 = market(ContractDescription(0, FRCE))
    actions = [Issue(9, 1, 2), Issue(0, 1, 2), Join(0, 3), Join(0, 2), Join(0, 2), Tick(3),
               JoinOr(0, 2, Choice.FIRST)]
    final, log = run_trace(s0, actions)
    assert [st.outcome for st in log] == [
        Outcome.REJECTED, Outcome.ISSUED, Outcome.REJECTED, Outcome.EXECUTED,
        Outcome.REJECTED, Outcome.TICKED, Outcome.REJECTED,
    ]
    assert [st.reason for st in log if st.reason] == [
        RejectReason.UNKNOWN_DESCRIPTION, RejectReason.NOT_AUTHORIZED,
        RejectReason.UNKNOWN_CONTRACT, RejectReason.UNKNOWN_CONTRACT,
    ]
    for st in log:
        if st.outcome is Outcome.REJECTED:
            assert st.after is st.before
    assert final.time == 103
    assert apply(s0, Tick(1)).time == 101


def test_deleted_outcome_in_trace():
    s0 = market(ContractDescription(0, parse("Timebound(0, 50, Zero)")))
    _, log = run_trace(s0, [Issue(0, 1, 2), Join(0, 2)])
    assert log[1].outcome is Outcome.DELETED


def test_gateway_timeline_latest_sample_goes_stale():
    tl = GatewayTimeline.of({5: [(100, 1), (200, 2)], 6: []})
    assert tl(99) == ()
    assert tl(150) == (Gateway(5, 1, 100),)
    assert tl(250) == (Gateway(5, 2, 200),)
    s0 = market(ContractDescription(0, parse("ScaleObs(5, One(USD))")), time=100)
    actions = [Issue(0, 1, 2), Issue(0, 1, 2), Join(1, 2), Tick(31), Join(0, 2)]
    final, log = run_trace(s0, actions, gateways_at=tl)
    assert log[2].outcome is Outcome.EXECUTED
    assert log[4].outcome is Outcome.DELETED
    assert len(final.ledger) == 1
