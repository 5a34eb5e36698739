"""Executable consistency checks and the random traces that exercise them.

The checks mirror the marketplace metatheorems: consistency is preserved
by every step, ledger and events only grow, a live contract either stays
live or is closed by exactly one event, and time never runs backwards.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace

from findel.engine import DEFAULT_ENGINE, Balance, EngineConfig, FinContract
from findel.marketplace import (
    Action,
    Choice,
    ContractDescription,
    Deleted,
    Executed,
    GatewayTimeline,
    Issue,
    Join,
    JoinOr,
    Rejection,
    State,
    Step,
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
    Primitive,
    Scale,
    ScaleObs,
    Timebound,
    Zero,
    walk,
)


@dataclass
class ConsistencyReport:
    fresh_dominates_contracts: bool = True
    fresh_dominates_events: bool = True
    live_not_closed: bool = True
    no_double_close: bool = True
    violations: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.fresh_dominates_contracts and self.fresh_dominates_events
                and self.live_not_closed and self.no_double_close)

    def __bool__(self) -> bool:
        return self.ok


def _closed(s: State) -> tuple[set[int], set[int]]:
    executed, deleted = set(), set()
    for e in s.events:
        if isinstance(e, Executed):
            executed.add(e.ctr_id)
        elif isinstance(e, Deleted):
            deleted.add(e.ctr_id)
    return executed, deleted


def check_consistent(s: State) -> ConsistencyReport:
    report = ConsistencyReport()
    executed, deleted = _closed(s)
    for c in s.contracts:
        if not c.ctr_id < s.fresh_id:
            report.fresh_dominates_contracts = False
            report.violations.append((1, c.ctr_id))
    for i in sorted(executed | deleted):
        if not i < s.fresh_id:
            report.fresh_dominates_events = False
            report.violations.append((2, i))
    for c in s.contracts:
        if c.ctr_id in executed or c.ctr_id in deleted:
            report.live_not_closed = False
            report.violations.append((3, c.ctr_id))
    for i in sorted(executed & deleted):
        report.no_double_close = False
        report.violations.append((4, i))
    return report


def check_preservation(s: State, a: Action, cfg: EngineConfig = DEFAULT_ENGINE) -> bool:
    try:
        s2 = apply(s, a, cfg)
    except Rejection:
        s2 = s
    return check_consistent(s2).ok


def _contains(big, small) -> bool:
    have = Counter(big)
    have.subtract(Counter(small))
    return all(v >= 0 for v in have.values())


def check_ledger_monotone(s: State, s2: State) -> bool:
    """Every transaction of ``s`` is still in ``s2``, unmodified."""
    return _contains(s2.ledger, s.ledger)


def check_events_monotone(s: State, s2: State) -> bool:
    return _contains(s2.events, s.events)


def check_trichotomy(s: State, s2: State, c: FinContract) -> bool:
    executed, deleted = _closed(s2)
    live = any(x == c for x in s2.contracts)
    return (live, c.ctr_id in executed, c.ctr_id in deleted).count(True) == 1


# -- random generation ------------------------------------------------------

GATEWAY_ADDRESSES = (7, 8, 9)
PARTIES = (1, 2, 3, 4)
_CURRENCIES = (Currency.USD, Currency.EUR, Currency.GBP, Currency.JPY)

_WEIGHTS = {
    "default": {Zero: 4, One: 8, Scale: 12, ScaleObs: 7, Give: 14, And: 20, Or: 10, If: 7, Timebound: 14},
    "gateway-heavy": {Zero: 3, One: 6, Scale: 8, ScaleObs: 18, Give: 10, And: 16, Or: 8, If: 18, Timebound: 10},
}
PROFILES = tuple(_WEIGHTS)


def random_primitive(
    rng: random.Random,
    max_depth: int = 5,
    profile: str = "default",
    horizon: tuple[int, int] = (0, 400),
) -> Primitive:
    """A random primitive of depth at most ``max_depth``; no subtree is shared."""
    weights = _WEIGHTS[profile]
    if max_depth <= 1:
        return Zero() if rng.random() < 0.2 else One(rng.choice(_CURRENCIES))
    kind = rng.choices(list(weights), list(weights.values()))[0]
    sub = lambda: random_primitive(rng, max_depth - 1, profile, horizon)  # noqa: E731
    if kind is Zero:
        return Zero()
    if kind is One:
        return One(rng.choice(_CURRENCIES))
    if kind is Scale:
        return Scale(rng.randint(0, 4), sub())
    if kind is ScaleObs:
        return ScaleObs(rng.choice(GATEWAY_ADDRESSES), sub())
    if kind is Give:
        return Give(sub())
    if kind is And:
        return And(sub(), sub())
    if kind is Or:
        return Or(sub(), sub())
    if kind is If:
        return If(rng.choice(GATEWAY_ADDRESSES), sub(), sub())
    lo, hi = horizon
    lower = 0 if rng.random() < 0.15 else rng.randint(lo, hi)
    # INF is kept rare so that most windows can actually close
    upper = INF if rng.random() < 0.1 else lower + rng.randint(0, hi - lo)
    return Timebound(lower, upper, sub())


def random_timeline(rng: random.Random, horizon: tuple[int, int] = (0, 1200)) -> GatewayTimeline:
    """Per-address samples; some addresses are missing, and gaps go stale."""
    lo, hi = horizon
    samples = {}
    for addr in GATEWAY_ADDRESSES:
        if rng.random() < 0.2:
            continue
        times = sorted(rng.sample(range(lo, hi), rng.randint(1, 25)))
        samples[addr] = [(t, rng.randint(0, 4)) for t in times]
    return GatewayTimeline.of(samples)


@dataclass(frozen=True)
class TraceCase:
    seed: int
    initial: State
    timeline: GatewayTimeline
    actions: tuple[Action, ...]


def _random_action(rng: random.Random, s: State, dsc_ids: list[int]) -> Action:
    r = rng.random()
    if r < 0.3 or (r < 0.75 and not s.contracts):
        dsc = rng.choice(dsc_ids) if rng.random() < 0.95 else max(dsc_ids) + 1
        po = 0 if rng.random() < 0.3 else rng.choice(PARTIES)
        return Issue(dsc, rng.choice(PARTIES), po)
    if r < 0.75:
        if rng.random() < 0.9:
            c = rng.choice(s.contracts)
            ctr_id, po, is_or = c.ctr_id, c.proposed_owner, isinstance(c.prim, Or)
        else:
            ctr_id, po, is_or = rng.randrange(s.fresh_id + 2), 0, rng.random() < 0.5
        caller = po if po and rng.random() < 0.75 else rng.choice(PARTIES)
        use_or = is_or if rng.random() < 0.9 else not is_or
        if use_or:
            return JoinOr(ctr_id, caller, rng.choice((Choice.FIRST, Choice.SECOND)))
        return Join(ctr_id, caller)
    return Tick(rng.randint(1, 60))


def random_scenario(seed: int, length: int, profile: str = "default",
                    max_depth: int = 5, cfg: EngineConfig = DEFAULT_ENGINE) -> TraceCase:
    """A reproducible marketplace history of exactly ``length`` actions.

    Actions are chosen against a simulated state so that most joins hit
    live contracts; the rest exercise unknown ids, wrong callers, the wrong
    join rule and closed validity windows.
    """
    rng = random.Random(seed)
    start = rng.randint(50, 150)
    descriptions = []
    for dsc_id in range(rng.randint(1, 6)):
        valid_from = 0 if rng.random() < 0.7 else rng.randint(0, 400)
        valid_until = INF if rng.random() < 0.7 else valid_from + rng.randint(0, 600)
        prim = random_primitive(rng, rng.randint(1, max_depth), profile, (start - 50, start + 400))
        descriptions.append(ContractDescription(dsc_id, prim, rng.randint(1, 3), (), valid_from, valid_until))
    balance = Balance({(a, cur): rng.randint(-50, 200) for a in PARTIES for cur in _CURRENCIES[:2]})
    timeline = random_timeline(rng, (0, start + 1200))
    s0 = State(descriptions=tuple(descriptions), balance=balance, time=start,
               fresh_id=rng.randint(0, 5))

    s = s0
    dsc_ids = [d.dsc_id for d in descriptions]
    actions = []
    for _ in range(length):
        s = replace(s, gateways=timeline(s.time))
        a = _random_action(rng, s, dsc_ids)
        actions.append(a)
        try:
            s = apply(s, a, cfg)
        except Rejection:
            pass
    return TraceCase(seed, s0, timeline, tuple(actions))


def random_trace(seed: int, length: int, profile: str = "default") -> list[Action]:
    return list(random_scenario(seed, length, profile).actions)


# -- whole-trace checking ---------------------------------------------------


@dataclass
class TraceCheck:
    """Violations found along one trace, as ``(step index, description)``."""

    violations: list[tuple[int, str]] = field(default_factory=list)
    steps: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def check_trace(case: TraceCase, cfg: EngineConfig = DEFAULT_ENGINE) -> TraceCheck:
    """Replay ``case`` and check every metaproperty after every step."""
    result = TraceCheck()
    seen_contracts: dict[int, FinContract] = {}
    seen_tx: dict[int, object] = {}
    if not check_consistent(case.initial).ok:
        result.violations.append((-1, "initial state inconsistent"))

    def note(i, what):
        result.violations.append((i, what))

    def on_step(step: Step):
        i = result.steps
        result.steps += 1
        s, s2 = step.before, step.after
        report = check_consistent(s2)
        if not report.ok:
            note(i, f"inconsistent: {report.violations}")
        if not check_ledger_monotone(s, s2):
            note(i, "ledger shrank or changed")
        if not check_events_monotone(s, s2):
            note(i, "events retracted")
        if s2.time < s.time:
            note(i, "time went backwards")
        executed, deleted = _closed(s2)
        live = set(s2.contracts)
        for c in s.contracts:
            if (c in live, c.ctr_id in executed, c.ctr_id in deleted).count(True) != 1:
                note(i, f"trichotomy fails for contract {c.ctr_id}")
        for c in s2.contracts:
            prev = seen_contracts.setdefault(c.ctr_id, c)
            if prev != c:
                note(i, f"contract id {c.ctr_id} reused")
        for tx in s2.ledger[len(s.ledger):]:
            if seen_tx.setdefault(tx.id, tx) is not tx:
                note(i, f"transaction id {tx.id} reused")
        if step.rejection is not None and s2 != s:
            note(i, "rejected action changed the state")

    final, _ = run_trace(case.initial, case.actions, cfg, gateways_at=case.timeline, on_step=on_step)
    if not check_ledger_monotone(case.initial, final) or not check_events_monotone(case.initial, final):
        note(result.steps, "final state lost history of the initial state")
    return result


def count_gateway_primitives(seed: int, n: int, profile: str, max_depth: int = 5) -> float:
    """Fraction of ``n`` generated primitives containing ScaleObs or If."""
    rng = random.Random(seed)
    hits = 0
    for _ in range(n):
        p = random_primitive(rng, max_depth, profile)
        hits += any(isinstance(node, (ScaleObs, If)) for _, node in walk(p))
    return hits / n
