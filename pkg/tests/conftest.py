from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import strategies as st

from findel.syntax import (
    INF,
    And,
    Currency,
    Give,
    If,
    One,
    Or,
    Scale,
    ScaleObs,
    Timebound,
    Zero,
)

SCENARIOS = Path(__file__).parent / "scenarios"

nats = st.one_of(st.integers(0, 1000), st.just(INF), st.integers(0, INF))
addresses = st.integers(1, 9)


def primitives(max_leaves: int = 12):
    leaves = st.one_of(st.just(Zero()), st.sampled_from(list(Currency)).map(One))

    def extend(sub):
        return st.one_of(
            st.builds(Scale, nats, sub),
            st.builds(ScaleObs, addresses, sub),
            st.builds(Give, sub),
            st.builds(And, sub, sub),
            st.builds(Or, sub, sub),
            st.builds(If, addresses, sub, sub),
            st.builds(Timebound, nats, nats, sub),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


@pytest.fixture
def scenarios_dir() -> Path:
    return SCENARIOS


def issued(prim, scale=1, time=100, issuer=1, owner=2, gateways=(), balance=None):
    """A market holding one freshly issued contract (id 0) for ``prim``."""
    from findel.engine import Balance
    from findel.marketplace import ContractDescription, State, issue

    s = State(descriptions=(ContractDescription(0, prim, scale),), time=time,
              gateways=tuple(gateways), balance=balance or Balance())
    return issue(s, 0, issuer, owner)


def transfers(s, since=0):
    return [tx.transfer() for tx in s.ledger[since:]]
