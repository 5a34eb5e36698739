"""The marketplace state machine: issue, join, join-or, fail and tick.

Every rule takes a ``State`` and returns a new one. A rule whose side
conditions do not hold raises ``Rejection``; the input state is untouched
because states are never mutated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence, Union

from findel.engine import (
    DEFAULT_ENGINE,
    Balance,
    EngineConfig,
    FinContract,
    Gateway,
    Transaction,
    execute,
)
from findel.syntax import INF, Address, Or, Primitive, Time

__all__ = [
    "Action",
    "Choice",
    "ContractDescription",
    "Deleted",
    "Event",
    "Executed",
    "FinContract",
    "GatewayTimeline",
    "Issue",
    "IssuedFor",
    "Join",
    "JoinOr",
    "Outcome",
    "Rejection",
    "RejectReason",
    "State",
    "Step",
    "Tick",
    "apply",
    "issue",
    "join",
    "join_or",
    "run_trace",
    "tick",
]


@dataclass(frozen=True)
class ContractDescription:
    dsc_id: int
    prim: Primitive
    scale: int = 1
    gateways: tuple[Gateway, ...] = ()
    valid_from: Time = 0
    valid_until: Time = INF


# -- events -----------------------------------------------------------------


@dataclass(frozen=True)
class IssuedFor:
    proposed_owner: Address
    ctr_id: int


@dataclass(frozen=True)
class Executed:
    ctr_id: int


@dataclass(frozen=True)
class Deleted:
    ctr_id: int


Event = Union[IssuedFor, Executed, Deleted]


# -- actions ----------------------------------------------------------------


class Choice(enum.Enum):
    FIRST = "first"
    SECOND = "second"


@dataclass(frozen=True)
class Issue:
    dsc_id: int
    issuer: Address
    proposed_owner: Address


@dataclass(frozen=True)
class Join:
    ctr_id: int
    caller: Address


@dataclass(frozen=True)
class JoinOr:
    ctr_id: int
    caller: Address
    choice: Choice


@dataclass(frozen=True)
class Tick:
    n: int


Action = Union[Issue, Join, JoinOr, Tick]


class RejectReason(enum.Enum):
    UNKNOWN_DESCRIPTION = "UnknownDescription"
    UNKNOWN_CONTRACT = "UnknownContract"
    NOT_AUTHORIZED = "NotAuthorized"
    MUST_USE_JOIN_OR = "MustUseJoinOr"
    NOT_AN_OR = "NotAnOr"
    OUTSIDE_VALIDITY = "OutsideValidity"
    CLOCK_OVERFLOW = "ClockOverflow"


class Rejection(Exception):
    """A rule's side condition failed; no state change, no event."""

    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


# -- state ------------------------------------------------------------------


@dataclass(frozen=True)
class State:
    """A marketplace snapshot.

    ``contracts`` and ``events`` are newest-first (rules prepend), ``ledger``
    is in append order.
    """

    contracts: tuple[FinContract, ...] = ()
    descriptions: tuple[ContractDescription, ...] = ()
    balance: Balance = field(default_factory=Balance)
    time: Time = 0
    gateways: tuple[Gateway, ...] = ()
    fresh_id: int = 0
    ledger: tuple[Transaction, ...] = ()
    events: tuple[Event, ...] = ()

    def description(self, dsc_id: int) -> Optional[ContractDescription]:
        for d in self.descriptions:
            if d.dsc_id == dsc_id:
                return d
        return None

    def contract(self, ctr_id: int) -> Optional[FinContract]:
        for c in self.contracts:
            if c.ctr_id == ctr_id:
                return c
        return None


def issue(s: State, dsc_id: int, issuer: Address, proposed_owner: Address) -> State:
    d = s.description(dsc_id)
    if d is None:
        raise Rejection(RejectReason.UNKNOWN_DESCRIPTION, f"no description {dsc_id}")
    i = s.fresh_id
    c = FinContract(i, d.dsc_id, d.prim, issuer, issuer, proposed_owner, d.scale)
    return replace(
        s,
        contracts=(c,) + s.contracts,
        fresh_id=i + 1,
        events=(IssuedFor(proposed_owner, i),) + s.events,
    )


def _checked_contract(s: State, ctr_id: int, caller: Address) -> FinContract:
    c = s.contract(ctr_id)
    if c is None:
        raise Rejection(RejectReason.UNKNOWN_CONTRACT, f"no live contract {ctr_id}")
    if c.proposed_owner not in (0, caller):
        raise Rejection(
            RejectReason.NOT_AUTHORIZED,
            f"contract {ctr_id} is proposed to {c.proposed_owner}, not {caller}",
        )
    return c


def _check_validity(s: State, c: FinContract) -> None:
    d = s.description(c.dsc_id)
    if d is None:
        raise Rejection(RejectReason.UNKNOWN_DESCRIPTION, f"no description {c.dsc_id}")
    if not d.valid_from <= s.time <= d.valid_until:
        raise Rejection(
            RejectReason.OUTSIDE_VALIDITY,
            f"time {s.time} outside [{d.valid_from}, {d.valid_until}]",
        )


def _run(s: State, c: FinContract, body: Primitive, caller: Address, cfg: EngineConfig) -> State:
    rest = tuple(x for x in s.contracts if x is not c)
    r = execute(body, c.scale, c.issuer, caller, s.balance, s.time, s.gateways,
                c.ctr_id, c.dsc_id, s.fresh_id, s.ledger, cfg)
    if r is None:
        return replace(s, contracts=rest, events=(Deleted(c.ctr_id),) + s.events)
    return replace(
        s,
        contracts=rest + r.contracts,
        balance=r.balance,
        fresh_id=r.next,
        ledger=r.ledger,
        events=(Executed(c.ctr_id),) + s.events,
    )


def join(s: State, ctr_id: int, caller: Address, cfg: EngineConfig = DEFAULT_ENGINE) -> State:
    """Join a non-``Or`` contract, executing it (``Executed``) or failing it (``Deleted``)."""
    c = _checked_contract(s, ctr_id, caller)
    if isinstance(c.prim, Or):
        raise Rejection(RejectReason.MUST_USE_JOIN_OR, f"contract {ctr_id} is rooted at Or")
    _check_validity(s, c)
    return _run(s, c, c.prim, caller, cfg)


def join_or(
    s: State, ctr_id: int, caller: Address, choice: Choice, cfg: EngineConfig = DEFAULT_ENGINE
) -> State:
    c = _checked_contract(s, ctr_id, caller)
    if not isinstance(c.prim, Or):
        raise Rejection(RejectReason.NOT_AN_OR, f"contract {ctr_id} is not rooted at Or")
    _check_validity(s, c)
    branch = c.prim.first if choice is Choice.FIRST else c.prim.second
    return _run(s, c, branch, caller, cfg)


def tick(s: State, n: int) -> State:
    if n < 0:
        raise ValueError("tick amount must be non-negative")
    if s.time + n >= INF:
        raise Rejection(RejectReason.CLOCK_OVERFLOW, f"{s.time} + {n} reaches INF")
    if n == 0:
        return s
    return replace(s, time=s.time + n)


def apply(s: State, a: Action, cfg: EngineConfig = DEFAULT_ENGINE) -> State:
    if isinstance(a, Issue):
        return issue(s, a.dsc_id, a.issuer, a.proposed_owner)
    if isinstance(a, Join):
        return join(s, a.ctr_id, a.caller, cfg)
    if isinstance(a, JoinOr):
        return join_or(s, a.ctr_id, a.caller, a.choice, cfg)
    if isinstance(a, Tick):
        return tick(s, a.n)
    raise TypeError(f"not an action: {a!r}")


# -- traces -----------------------------------------------------------------


class Outcome(enum.Enum):
    ISSUED = "issued"
    EXECUTED = "executed"
    DELETED = "deleted"
    TICKED = "ticked"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Step:
    action: Action
    outcome: Outcome
    before: State
    after: State
    rejection: Optional[Rejection] = None

    @property
    def reason(self) -> Optional[RejectReason]:
        return self.rejection.reason if self.rejection else None


def _outcome(a: Action, before: State, after: State) -> Outcome:
    if isinstance(a, Issue):
        return Outcome.ISSUED
    if isinstance(a, Tick):
        return Outcome.TICKED
    head = after.events[0]
    return Outcome.EXECUTED if isinstance(head, Executed) else Outcome.DELETED


def run_trace(
    s0: State,
    actions: Iterable[Action],
    cfg: EngineConfig = DEFAULT_ENGINE,
    gateways_at: Optional[Callable[[Time], Sequence[Gateway]]] = None,
    on_step: Optional[Callable[[Step], None]] = None,
) -> tuple[State, list[Step]]:
    """Fold ``actions`` over ``s0``; rejections are logged and leave the state alone.

    ``gateways_at`` refreshes the gateway list from the clock before each
    action. ``on_step`` runs after every step and may raise to abort.
    """
    s = s0
    log: list[Step] = []
    for a in actions:
        if gateways_at is not None:
            gws = tuple(gateways_at(s.time))
            if gws != s.gateways:
                s = replace(s, gateways=gws)
        try:
            nxt = apply(s, a, cfg)
        except Rejection as r:
            step = Step(a, Outcome.REJECTED, s, s, r)
        else:
            step = Step(a, _outcome(a, s, nxt), s, nxt)
        log.append(step)
        if on_step is not None:
            on_step(step)
        s = step.after
    return s, log


@dataclass(frozen=True)
class GatewayTimeline:
    """Scripted gateway values: ``address -> ((time, value), ...)``.

    The gateway in effect at time ``t`` is the latest sample at or before
    ``t``, stamped with that sample's time, so an old sample goes stale.
    An address with no sample yet (or not listed at all) is absent.
    """

    samples: tuple[tuple[Address, tuple[tuple[Time, int], ...]], ...] = ()

    @classmethod
    def of(cls, mapping: dict) -> "GatewayTimeline":
        return cls(tuple(
            (addr, tuple(sorted((int(t), int(v)) for t, v in pts)))
            for addr, pts in sorted(mapping.items())
        ))

    def __call__(self, now: Time) -> tuple[Gateway, ...]:
        out = []
        for addr, pts in self.samples:
            latest = None
            for t, v in pts:
                if t > now:
                    break
                latest = (t, v)
            if latest is not None:
                out.append(Gateway(addr, latest[1], latest[0]))
        return tuple(out)
