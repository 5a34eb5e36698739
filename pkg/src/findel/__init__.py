"""Findel financial-derivative contracts: syntax, execution, marketplace and analysis."""

from findel.engine import Balance, FinContract, Gateway, Transaction, execute
from findel.marketplace import (
    Choice,
    ContractDescription,
    Issue,
    Join,
    JoinOr,
    Rejection,
    RejectReason,
    State,
    Tick,
    apply,
    run_trace,
)
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
    parse,
    to_text,
)

__all__ = [
    "INF", "And", "Balance", "Choice", "ContractDescription", "Currency", "FinContract",
    "Gateway", "Give", "If", "Issue", "Join", "JoinOr", "One", "Or", "RejectReason",
    "Rejection", "Scale", "ScaleObs", "State", "Tick", "Timebound", "Transaction", "Zero",
    "apply", "execute", "parse", "run_trace", "to_text",
]
