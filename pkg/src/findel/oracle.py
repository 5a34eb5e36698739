"""Denotational cash flows, used as an oracle against the operational engine.

``cashflows`` reads the primitive table directly: it never touches
balances, ids or the ledger, and resolves the nondeterminism of ``Or`` and
postponed ``Timebound`` nodes through an explicit ``Env``. Policies are
keyed by node path (see ``findel.syntax.walk``).

``engine_cashflows`` is the other side of the comparison: it drives the
marketplace through issue/join/join-or steps scheduled from the same
``Env`` and returns the transfers that ended up in the ledger.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from findel.engine import DEFAULT_ENGINE, Balance, EngineConfig, Gateway
from findel.marketplace import (
    Choice,
    ContractDescription,
    Executed,
    State,
    issue,
    join,
    join_or,
    tick,
)
from findel.syntax import (
    INF,
    Address,
    And,
    Currency,
    Give,
    If,
    One,
    Or,
    Primitive,
    Scale,
    ScaleObs,
    Time,
    Timebound,
    Zero,
    walk,
)

Transfer = tuple[Address, Address, int, Currency]
CashFlow = Counter  # Counter[Transfer]


@dataclass(frozen=True)
class Env:
    """A fixed world in which to evaluate one contract.

    ``gateways`` is the snapshot read by every query. ``join_policy`` gives
    the time at which the generated contract for a node is joined (missing
    or None: never). ``or_policy`` picks the branch when it is joined.
    """

    gateways: Mapping[Address, int] = field(default_factory=dict)
    now: Time = 0
    or_policy: Mapping[str, Choice] = field(default_factory=dict)
    join_policy: Mapping[str, Optional[Time]] = field(default_factory=dict)

    def gateway(self, addr: Address) -> Optional[int]:
        return self.gateways.get(addr)


class _Failed(Exception):
    pass


def cashflows(
    p: Primitive, scale: int, issuer: Address, owner: Address, env: Env
) -> Optional[CashFlow]:
    """Transfers made when ``owner`` joins ``p`` at ``env.now``; None if the join fails."""
    try:
        return _flows(p, "", scale, issuer, owner, env.now, env)
    except _Failed:
        return None


def _flows(p, path, scale, issuer, owner, now, env) -> CashFlow:
    if isinstance(p, Zero):
        return Counter()
    if isinstance(p, One):
        return Counter({(issuer, owner, scale, p.currency): 1})
    if isinstance(p, Scale):
        return _flows(p.body, path + "L", scale * p.factor, issuer, owner, now, env)
    if isinstance(p, ScaleObs):
        k = env.gateway(p.address)
        if k is None:
            raise _Failed
        return _flows(p.body, path + "L", scale * k, issuer, owner, now, env)
    if isinstance(p, Give):
        return _flows(p.body, path + "L", scale, owner, issuer, now, env)
    if isinstance(p, And):
        left = _flows(p.first, path + "L", scale, issuer, owner, now, env)
        return left + _flows(p.second, path + "R", scale, issuer, owner, now, env)
    if isinstance(p, If):
        b = env.gateway(p.address)
        if b is None:
            raise _Failed
        if b:
            return _flows(p.then, path + "L", scale, issuer, owner, now, env)
        return _flows(p.otherwise, path + "R", scale, issuer, owner, now, env)
    if isinstance(p, Timebound):
        if now > p.upper:
            raise _Failed
        if now > p.lower:
            return _flows(p.body, path + "L", scale, issuer, owner, now, env)
        return _deferred(p, path, scale, issuer, owner, now, env)
    if isinstance(p, Or):
        return _deferred(p, path, scale, issuer, owner, now, env)
    raise TypeError(f"not a primitive: {p!r}")


def _deferred(p, path, scale, issuer, owner, now, env) -> CashFlow:
    """A contract handed to ``owner`` for later; its failure deletes only itself."""
    when = env.join_policy.get(path)
    if when is None:
        return Counter()
    when = max(when, now)
    try:
        if isinstance(p, Or):
            if env.or_policy.get(path, Choice.FIRST) is Choice.FIRST:
                return _flows(p.first, path + "L", scale, issuer, owner, when, env)
            return _flows(p.second, path + "R", scale, issuer, owner, when, env)
        if when > p.upper:
            return Counter()
        if when > p.lower:
            return _flows(p.body, path + "L", scale, issuer, owner, when, env)
        # postponed again; a node is joined at most once
        return Counter()
    except _Failed:
        return Counter()


# -- the engine side --------------------------------------------------------


def _snapshot(env: Env, now: Time) -> tuple[Gateway, ...]:
    return tuple(Gateway(a, v, now) for a, v in sorted(env.gateways.items()))


def engine_cashflows(
    p: Primitive,
    scale: int,
    issuer: Address,
    owner: Address,
    env: Env,
    cfg: EngineConfig = DEFAULT_ENGINE,
) -> Optional[CashFlow]:
    """Run ``p`` through the marketplace under ``env``'s schedule.

    Generated contracts are matched to tree paths by node identity, so the
    ``Or`` and ``Timebound`` nodes of ``p`` must be distinct objects.
    Returns None when the root join is deleted.
    """
    paths: dict[int, str] = {}
    for path, node in walk(p):
        if isinstance(node, (Or, Timebound)):
            if id(node) in paths:
                raise ValueError("Or/Timebound subtrees must not be shared")
            paths[id(node)] = path

    s = State(
        descriptions=(ContractDescription(0, p, scale, (), 0, INF),),
        balance=Balance(),
        time=env.now,
        gateways=_snapshot(env, env.now),
    )
    s = issue(s, 0, issuer, owner)
    root = s.contracts[0]

    queue: list[tuple[Time, int, int, str]] = []
    seq = 0
    joined: set[str] = set()

    def schedule(contracts):
        nonlocal seq
        for c in contracts:
            path = paths[id(c.prim)]
            when = env.join_policy.get(path)
            if when is None or path in joined:
                continue
            joined.add(path)
            heapq.heappush(queue, (max(when, s.time), seq, c.ctr_id, path))
            seq += 1

    if isinstance(p, Or):
        schedule([root])
    else:
        before = len(s.contracts)
        s = join(s, root.ctr_id, owner, cfg)
        if not isinstance(s.events[0], Executed):
            return None
        schedule(s.contracts[before - 1:])

    while queue:
        when, _, ctr_id, path = heapq.heappop(queue)
        if when > s.time:
            s = tick(s, when - s.time)
        s = replace(s, gateways=_snapshot(env, s.time))
        c = s.contract(ctr_id)
        before = len(s.contracts)
        if isinstance(c.prim, Or):
            s = join_or(s, ctr_id, c.proposed_owner, env.or_policy.get(path, Choice.FIRST), cfg)
        else:
            s = join(s, ctr_id, c.proposed_owner, cfg)
        if isinstance(s.events[0], Executed):
            schedule(s.contracts[before - 1:])

    return Counter(tx.transfer() for tx in s.ledger)


def random_env(rng: random.Random, p: Primitive, now: Time = 100,
               addresses=(1, 2, 3), horizon: Time = 400) -> Env:
    """An env covering every choice point of ``p``, with some gaps left in."""
    gateways = {a: rng.randint(0, 3) for a in addresses if rng.random() < 0.8}
    or_policy, join_policy = {}, {}
    for path, node in walk(p):
        if isinstance(node, Or):
            or_policy[path] = rng.choice((Choice.FIRST, Choice.SECOND))
        if isinstance(node, (Or, Timebound)):
            join_policy[path] = None if rng.random() < 0.2 else rng.randint(now, now + horizon)
    return Env(gateways, now, or_policy, join_policy)
