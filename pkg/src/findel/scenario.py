"""Scenario files in, trace files out.

Both are JSON. Output is produced with a fixed key order and no clock or
randomness, so the same scenario always yields byte-identical output.
Times may be written as integers or as the string ``"INF"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from findel.derivatives import YEAR, build
from findel.engine import Balance, EngineConfig, FinContract, Transaction
from findel.marketplace import (
    Action,
    Choice,
    ContractDescription,
    Deleted,
    Event,
    Executed,
    GatewayTimeline,
    Issue,
    IssuedFor,
    Join,
    JoinOr,
    State,
    Step,
    Tick,
)
from findel.syntax import INF, Currency, SugarConfig, parse, to_text


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    delta: int = 30
    freshness_threshold: int = 30
    year_length: int = YEAR

    @property
    def sugar(self) -> SugarConfig:
        return SugarConfig(self.delta)

    @property
    def engine(self) -> EngineConfig:
        return EngineConfig(self.freshness_threshold)


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    initial: State
    timeline: GatewayTimeline
    actions: tuple[Action, ...] = field(default_factory=tuple)


def nat(value: Any, what: str = "value") -> int:
    if value == "INF":
        return INF
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ScenarioError(f"{what} must be a natural number or \"INF\", got {value!r}")
    return value


def _currency(value: Any) -> Currency:
    try:
        return Currency[value]
    except (KeyError, TypeError):
        raise ScenarioError(f"unknown currency {value!r}") from None


def _action(raw: dict) -> Action:
    kind = raw.get("type")
    try:
        if kind == "issue":
            return Issue(nat(raw["dsc_id"], "dsc_id"), nat(raw["issuer"], "issuer"),
                         nat(raw.get("proposed_owner", 0), "proposed_owner"))
        if kind == "join":
            return Join(nat(raw["ctr_id"], "ctr_id"), nat(raw["caller"], "caller"))
        if kind == "join_or":
            return JoinOr(nat(raw["ctr_id"], "ctr_id"), nat(raw["caller"], "caller"),
                          Choice(raw["choice"]))
        if kind == "tick":
            return Tick(nat(raw["n"], "n"))
    except KeyError as e:
        raise ScenarioError(f"{kind} action is missing {e}") from None
    except ValueError as e:
        raise ScenarioError(str(e)) from None
    raise ScenarioError(f"unknown action type {kind!r}")


def load_scenario(data: dict) -> Scenario:
    """Build a scenario from parsed JSON; raises ``ScenarioError`` on bad input."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    raw_cfg = data.get("config", {})
    cfg = ScenarioConfig(
        delta=nat(raw_cfg.get("delta", 30), "delta"),
        freshness_threshold=nat(raw_cfg.get("freshness_threshold", 30), "freshness_threshold"),
        year_length=nat(raw_cfg.get("year_length", YEAR), "year_length"),
    )

    descriptions = []
    for raw in data.get("descriptions", []):
        dsc_id = nat(raw.get("dsc_id"), "dsc_id")
        if "contract" in raw:
            prim = parse(raw["contract"], cfg.sugar)
        elif "derivative" in raw:
            params = {k: (INF if v == "INF" else v) for k, v in raw.get("params", {}).items()}
            prim = build(raw["derivative"], params, cfg.sugar, cfg.year_length).prim
        else:
            raise ScenarioError(f"description {dsc_id} needs \"contract\" or \"derivative\"")
        descriptions.append(ContractDescription(
            dsc_id, prim, nat(raw.get("scale", 1), "scale"), (),
            nat(raw.get("valid_from", 0), "valid_from"),
            nat(raw.get("valid_until", "INF"), "valid_until"),
        ))
    ids = [d.dsc_id for d in descriptions]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate dsc_id in descriptions")

    entries: dict = {}
    for raw in data.get("balances", []):
        key = (nat(raw["address"], "address"), _currency(raw["currency"]))
        amount = raw["amount"]
        if isinstance(amount, bool) or not isinstance(amount, int):
            raise ScenarioError(f"balance amount must be an integer, got {amount!r}")
        entries[key] = amount

    samples = {}
    for raw in data.get("gateways", []):
        addr = nat(raw["address"], "gateway address")
        if addr == 0:
            raise ScenarioError("gateway address 0 is reserved")
        samples[addr] = [(nat(p["time"], "sample time"), nat(p["value"], "sample value"))
                         for p in raw.get("samples", [])]

    time = nat(data.get("time", 0), "time")
    if time >= INF:
        raise ScenarioError("the clock cannot start at INF")
    initial = State(
        descriptions=tuple(descriptions),
        balance=Balance(entries),
        time=time,
        fresh_id=nat(data.get("fresh_id", 0), "fresh_id"),
    )
    actions = tuple(_action(a) for a in data.get("actions", []))
    return Scenario(cfg, initial, GatewayTimeline.of(samples), actions)


# -- output -----------------------------------------------------------------


def _time(t: int):
    return "INF" if t == INF else t


def dump_action(a: Action) -> dict:
    if isinstance(a, Issue):
        return {"type": "issue", "dsc_id": a.dsc_id, "issuer": a.issuer, "proposed_owner": a.proposed_owner}
    if isinstance(a, Join):
        return {"type": "join", "ctr_id": a.ctr_id, "caller": a.caller}
    if isinstance(a, JoinOr):
        return {"type": "join_or", "ctr_id": a.ctr_id, "caller": a.caller, "choice": a.choice.value}
    return {"type": "tick", "n": a.n}


def dump_event(e: Event) -> dict:
    if isinstance(e, IssuedFor):
        return {"type": "IssuedFor", "proposed_owner": e.proposed_owner, "ctr_id": e.ctr_id}
    if isinstance(e, Executed):
        return {"type": "Executed", "ctr_id": e.ctr_id}
    if isinstance(e, Deleted):
        return {"type": "Deleted", "ctr_id": e.ctr_id}
    raise TypeError(e)


def dump_transaction(tx: Transaction) -> dict:
    return {
        "id": tx.id,
        "ctr_id": tx.ctr_id,
        "from": tx.from_,
        "to": tx.to,
        "amount": tx.amount,
        "currency": tx.currency.value,
        "timestamp": tx.timestamp,
    }


def dump_contract(c: FinContract) -> dict:
    return {
        "ctr_id": c.ctr_id,
        "dsc_id": c.dsc_id,
        "prim": to_text(c.prim),
        "issuer": c.issuer,
        "owner": c.owner,
        "proposed_owner": c.proposed_owner,
        "scale": c.scale,
    }


def dump_balance(b: Balance) -> list[dict]:
    return [{"address": a, "currency": c.value, "amount": v} for (a, c), v in b.sorted_items()]


def dump_state(s: State) -> dict:
    return {
        "time": _time(s.time),
        "fresh_id": s.fresh_id,
        "balances": dump_balance(s.balance),
        "contracts": [dump_contract(c) for c in s.contracts],
        "ledger": [dump_transaction(tx) for tx in s.ledger],
        "events": [dump_event(e) for e in s.events],
    }


def dump_step(index: int, step: Step) -> dict:
    before, after = step.before, step.after
    new_events = after.events[: len(after.events) - len(before.events)]
    return {
        "index": index,
        "action": dump_action(step.action),
        "outcome": step.outcome.value,
        "reason": step.reason.value if step.reason else None,
        "time": _time(after.time),
        "new_events": [dump_event(e) for e in new_events],
        "new_transactions": [dump_transaction(tx) for tx in after.ledger[len(before.ledger):]],
    }


def dump_trace(log: list[Step], final: State) -> dict:
    return {"steps": [dump_step(i, st) for i, st in enumerate(log)], "final": dump_state(final)}


def to_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=True) + "\n"


def read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
