"""Static hazard reports for a primitive.

* ``ownership_report``: who issues and who may join each contract that a
  join would generate, tracking ``Give`` parity from the root.
* ``gateway_sensitivity``: for every gateway query, the effect of that
  gateway failing on the join that evaluates it.
* ``timewindow_report``: every ``Timebound`` window and whether it has
  already closed.

Reports never block execution.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from findel.engine import DEFAULT_ENGINE, EngineConfig, FinContract, Gateway, Transaction, execute
from findel.marketplace import Choice, ContractDescription, Deleted, State, join, join_or
from findel.syntax import (
    INF,
    Address,
    Give,
    If,
    One,
    Or,
    Primitive,
    Scale,
    ScaleObs,
    Time,
    Timebound,
    children,
    parse,
    replace_at,
    to_text,
    walk,
)


class Role(enum.Enum):
    ISSUER = "issuer-side"
    JOINER = "joiner-side"


@dataclass(frozen=True)
class OwnershipEntry:
    path: str
    prim: Primitive
    issuer_role: Role
    owner_role: Role
    issuer: Address
    proposed_owner: Address
    immediate: bool  # generated by the root join itself, not by a later one
    flagged: bool  # the contract pays its own issuer, who cannot join it


@dataclass(frozen=True)
class OwnershipReport:
    entries: tuple[OwnershipEntry, ...] = ()

    @property
    def flagged(self) -> tuple[OwnershipEntry, ...]:
        return tuple(e for e in self.entries if e.flagged)

    def at(self, path: str) -> Optional[OwnershipEntry]:
        for e in self.entries:
            if e.path == path:
                return e
        return None


def _pays_issuer(p: Primitive) -> bool:
    """Does joining ``p`` move anything from its owner to its issuer?

    Nested ``Or`` nodes become contracts of their own and are not entered.
    """
    stack = [(child, False) for _, child in children(p)]
    while stack:
        node, flipped = stack.pop()
        if isinstance(node, One) and flipped:
            return True
        if isinstance(node, Or):
            continue
        if isinstance(node, Give):
            stack.append((node.body, not flipped))
        else:
            stack.extend((child, flipped) for _, child in children(node))
    return False


def ownership_report(
    p: Primitive, issuer: Address, joiner: Address, now: Optional[Time] = None
) -> OwnershipReport:
    """Ownership of contracts generated when ``joiner`` joins ``p`` issued by ``issuer``.

    With ``now``, a ``Timebound`` reached by the root join is reported only
    if it would postpone (``lower >= now``). Nodes inside a postponed
    contract are always reported, with ``immediate=False``. A root ``Or``
    is the joined contract itself and gets no entry.
    """
    entries: list[OwnershipEntry] = []

    def visit(node, path, flipped, deferred):
        generates = False
        if isinstance(node, Or):
            generates = path != ""
        elif isinstance(node, Timebound):
            if deferred or now is None:
                generates = True
            elif node.upper < now:
                return  # the join fails here; nothing below is generated
            else:
                generates = node.lower >= now
        if generates:
            i_role, o_role = (Role.JOINER, Role.ISSUER) if flipped else (Role.ISSUER, Role.JOINER)
            addr = {Role.ISSUER: issuer, Role.JOINER: joiner}
            entries.append(OwnershipEntry(
                path, node, i_role, o_role, addr[i_role], addr[o_role],
                immediate=not deferred, flagged=_pays_issuer(node),
            ))
        inner = deferred or generates
        for step, child in children(node):
            visit(child, path + step, flipped ^ isinstance(node, Give), inner)

    visit(p, "", False, False)
    return OwnershipReport(tuple(entries))


def observed_ownership(
    p: Primitive,
    issuer: Address,
    joiner: Address,
    now: Time,
    gateways: Optional[Mapping[Address, int]] = None,
    cfg: EngineConfig = DEFAULT_ENGINE,
) -> dict[str, set[tuple[Address, Address]]]:
    """Run the joins and record ``(issuer, proposed_owner)`` of each generated contract.

    Every generated contract is joined in turn by its proposed owner, as
    soon as it can execute, exploring both choices of each ``Or``. Gateways
    default to value 1 at every queried address.
    """
    if gateways is None:
        gateways = {n.address: 1 for _, n in walk(p) if isinstance(n, (ScaleObs, If))}
    paths: dict[int, str] = {}
    for path, node in walk(p):
        paths[id(node)] = path
    if len(paths) != sum(1 for _ in walk(p)):
        p = parse(to_text(p))  # shared subtrees: rebuild with distinct nodes
        paths = {id(node): path for path, node in walk(p)}
    seen: dict[str, set[tuple[Address, Address]]] = {}

    def explore(c: FinContract, time: Time) -> None:
        snapshot = tuple(Gateway(a, v, time) for a, v in sorted(gateways.items()) if a != 0)
        s = State(
            contracts=(c,),
            descriptions=(ContractDescription(c.dsc_id, c.prim, c.scale, (), 0, INF),),
            time=time,
            gateways=snapshot,
            fresh_id=c.ctr_id + 1,
        )
        if isinstance(c.prim, Or):
            outcomes = [join_or(s, c.ctr_id, c.proposed_owner, ch, cfg) for ch in Choice]
        else:
            outcomes = [join(s, c.ctr_id, c.proposed_owner, cfg)]
        for s2 in outcomes:
            for g in s2.contracts:
                seen.setdefault(paths[id(g.prim)], set()).add((g.issuer, g.proposed_owner))
                if isinstance(g.prim, Timebound):
                    t = max(time, g.prim.lower + 1)
                    if t <= g.prim.upper:
                        explore(g, t)
                else:
                    explore(g, time)

    explore(FinContract(0, 0, p, issuer, issuer, joiner, 1), now)
    return seen


def ownership_disagreements(
    p: Primitive, issuer: Address, joiner: Address, now: Time, cfg: EngineConfig = DEFAULT_ENGINE
) -> list[str]:
    """Generated contracts that the static report misses or gets wrong.

    The report lists contracts that *may* be generated, so entries under an
    untaken ``If`` branch or a failing join are not disagreements.
    """
    report = ownership_report(p, issuer, joiner, now)
    observed = observed_ownership(p, issuer, joiner, now, cfg=cfg)
    problems = []
    for path, pairs in sorted(observed.items()):
        e = report.at(path)
        if e is None:
            problems.append(f"{path or 'root'}: generated but not reported")
        elif pairs != {(e.issuer, e.proposed_owner)}:
            problems.append(f"{path or 'root'}: reported {(e.issuer, e.proposed_owner)}, observed {sorted(pairs)}")
    return problems


# -- gateway failures -------------------------------------------------------


class GatewayEffect(enum.Enum):
    FULL_DELETION = "FullDeletion"  # the join is deleted and nothing survives
    NOT_REACHED = "NotReached"  # the join succeeds without evaluating this query
    UNREACHABLE = "Unreachable"  # no join can evaluate this query in the scenario
    BASELINE_FAILS = "BaselineFails"  # the join is deleted even with all gateways up
    PARTIAL = "Partial"  # the join fails yet left effects behind


@dataclass(frozen=True)
class GatewayScenario:
    gateways: Mapping[Address, int]
    now: Time = 0
    issuer: Address = 1
    joiner: Address = 2
    scale: int = 1


@dataclass(frozen=True)
class GatewayEntry:
    path: str
    address: Address
    node: str  # "ScaleObs" or "If"
    unit: str  # path of the contract whose join evaluates this query
    join_time: Optional[Time]
    effect: GatewayEffect
    rolled_back: tuple[Transaction, ...] = ()

    @property
    def atomic(self) -> bool:
        return self.effect is not GatewayEffect.PARTIAL


@dataclass(frozen=True)
class GatewayReport:
    entries: tuple[GatewayEntry, ...] = ()


@dataclass(frozen=True)
class _Unit:
    path: str
    node: Primitive
    time: Time
    scale: int
    flipped: bool
    choice: Optional[Choice] = None


def _query_units(p: Primitive, sc: GatewayScenario) -> dict[str, Optional[_Unit]]:
    """Map each query path to the join that would evaluate it (None: none can).

    ``live`` is False below a branch the baseline snapshot does not take:
    queries there still belong to the enclosing join, but contracts that
    would be generated there never exist.
    """
    out: dict[str, Optional[_Unit]] = {}

    def visit(node, path, unit, live, scale, flipped):
        if unit is not None and isinstance(node, Or):
            for choice, (step, child) in zip(Choice, children(node)):
                sub = _Unit(path, node, unit.time, scale, flipped, choice) if live else None
                visit(child, path + step, sub, True, scale, flipped)
            return
        if unit is not None and isinstance(node, Timebound):
            if node.upper < unit.time:
                unit = None
            elif node.lower >= unit.time:
                t = node.lower + 1
                ok = live and t <= node.upper
                unit, live = (_Unit(path, node, t, scale, flipped), True) if ok else (None, live)
        if isinstance(node, (ScaleObs, If)):
            out[path] = unit
        if isinstance(node, If):
            v = sc.gateways.get(node.address)
            for step, child in children(node):
                taken = v is not None and (step == "L") == (v != 0)
                visit(child, path + step, unit, live and taken, scale, flipped)
            return
        if isinstance(node, Scale):
            scale *= node.factor
        elif isinstance(node, ScaleObs):
            v = sc.gateways.get(node.address)
            live = live and v is not None
            scale *= v or 0
        for step, child in children(node):
            visit(child, path + step, unit, live, scale, flipped ^ isinstance(node, Give))

    visit(p, "", _Unit("", p, sc.now, sc.scale, False), True, sc.scale, False)
    return out


def gateway_sensitivity(
    p: Primitive, scenario: GatewayScenario, cfg: EngineConfig = DEFAULT_ENGINE
) -> GatewayReport:
    """Fail each query in turn and inspect the join that evaluates it.

    Only the one query node is made to fail: it is rewritten to read an
    address absent from the snapshot, so other nodes sharing its gateway
    are unaffected. A deleted join must leave balance and ledger exactly
    as they were; ``rolled_back`` lists the transfers executed before the
    failure that atomicity discarded.
    """
    units = _query_units(p, scenario)
    used = [n.address for _, n in walk(p) if isinstance(n, (ScaleObs, If))]
    missing = max([0, *used, *scenario.gateways]) + 1
    entries = []
    for path, node in walk(p):
        if not isinstance(node, (ScaleObs, If)):
            continue
        unit = units.get(path)
        if unit is None:
            entries.append(GatewayEntry(path, node.address, type(node).__name__, "", None,
                                        GatewayEffect.UNREACHABLE))
        else:
            entries.append(_inject(node, path, unit, scenario, missing, cfg))
    return GatewayReport(tuple(entries))


def _unit_state(unit: _Unit, prim: Primitive, sc: GatewayScenario) -> tuple[State, FinContract]:
    issuer, owner = (sc.joiner, sc.issuer) if unit.flipped else (sc.issuer, sc.joiner)
    c = FinContract(0, 0, prim, issuer, issuer, owner, unit.scale)
    gateways = tuple(Gateway(a, v, unit.time) for a, v in sorted(sc.gateways.items()) if a != 0)
    s = State(
        contracts=(c,),
        descriptions=(ContractDescription(0, prim, unit.scale, (), 0, INF),),
        time=unit.time,
        gateways=gateways,
        fresh_id=1,
    )
    return s, c


def _join_unit(unit: _Unit, s: State, c: FinContract, cfg: EngineConfig) -> State:
    if unit.choice is not None:
        return join_or(s, c.ctr_id, c.proposed_owner, unit.choice, cfg)
    return join(s, c.ctr_id, c.proposed_owner, cfg)


def _inject(node, path, unit, sc, missing, cfg) -> GatewayEntry:
    kind = type(node).__name__
    base_s, base_c = _unit_state(unit, unit.node, sc)
    baseline = _join_unit(unit, base_s, base_c, cfg)
    if isinstance(baseline.events[0], Deleted):
        return GatewayEntry(path, node.address, kind, unit.path, unit.time, GatewayEffect.BASELINE_FAILS)

    broken = replace_at(unit.node, path[len(unit.path):], replace(node, address=missing))
    s, c = _unit_state(unit, broken, sc)
    after = _join_unit(unit, s, c, cfg)
    if not isinstance(after.events[0], Deleted):
        return GatewayEntry(path, node.address, kind, unit.path, unit.time, GatewayEffect.NOT_REACHED)

    body = broken
    if unit.choice is not None:
        body = broken.first if unit.choice is Choice.FIRST else broken.second
    seen: list[Transaction] = []
    execute(body, c.scale, c.issuer, c.proposed_owner, s.balance, s.time, s.gateways,
            c.ctr_id, c.dsc_id, s.fresh_id, s.ledger, cfg, on_transfer=seen.append)
    intact = after.balance == s.balance and after.ledger == s.ledger and after.fresh_id == s.fresh_id
    effect = GatewayEffect.FULL_DELETION if intact else GatewayEffect.PARTIAL
    return GatewayEntry(path, node.address, kind, unit.path, unit.time, effect, tuple(seen))


# -- time windows -----------------------------------------------------------


@dataclass(frozen=True)
class WindowEntry:
    path: str
    lower: Time
    upper: Time
    expired: bool
    consequence: str = "Deleted"


@dataclass(frozen=True)
class TimeWindowReport:
    entries: tuple[WindowEntry, ...] = field(default_factory=tuple)


def timewindow_report(p: Primitive, now: Time) -> TimeWindowReport:
    return TimeWindowReport(tuple(
        WindowEntry(path, node.lower, node.upper, node.upper < now)
        for path, node in walk(p)
        if isinstance(node, Timebound)
    ))
