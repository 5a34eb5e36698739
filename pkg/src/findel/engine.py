"""Recursive execution of a primitive against balances, gateways and a ledger."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from findel.syntax import (
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
)

#: Upper bound on any scale product reaching a ``One`` node.
MAX_AMOUNT = 2**63 - 1


class AmountOverflowError(ArithmeticError):
    """A scale product exceeded ``MAX_AMOUNT``."""


class Balance(Mapping):
    """Total map ``(address, currency) -> int``; missing keys read as 0.

    Instances are never mutated; ``update`` returns a new balance. Zero
    entries are not stored, so equality is equality of total maps.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Optional[Mapping[tuple[Address, Currency], int]] = None):
        self._entries = {k: v for k, v in (entries or {}).items() if v != 0}

    def __getitem__(self, key: tuple[Address, Currency]) -> int:
        return self._entries.get(key, 0)

    def __iter__(self) -> Iterator[tuple[Address, Currency]]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._entries

    def __eq__(self, other) -> bool:
        if isinstance(other, Balance):
            return self._entries == other._entries
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._entries.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"({a}, {c.value}): {v}" for (a, c), v in self.sorted_items())
        return f"Balance({{{body}}})"

    def of(self, address: Address, currency: Currency) -> int:
        return self._entries.get((address, currency), 0)

    def update(self, address: Address, currency: Currency, amount: int) -> "Balance":
        new = Balance.__new__(Balance)
        new._entries = dict(self._entries)
        if amount:
            new._entries[(address, currency)] = amount
        else:
            new._entries.pop((address, currency), None)
        return new

    def sorted_items(self) -> list[tuple[tuple[Address, Currency], int]]:
        return sorted(self._entries.items(), key=lambda kv: (kv[0][0], kv[0][1].value))

    def totals(self) -> dict[Currency, int]:
        out: dict[Currency, int] = {}
        for (_, cur), v in self._entries.items():
            out[cur] = out.get(cur, 0) + v
        return out


def update(b: Balance, a: Address, c: Currency, amount: int) -> Balance:
    return b.update(a, c, amount)


@dataclass(frozen=True)
class Gateway:
    addr: Address
    value: int
    timestamp: Time

    def __post_init__(self):
        if self.addr == 0:
            raise ValueError("gateway address 0 is reserved")


@dataclass(frozen=True)
class Transaction:
    id: int
    ctr_id: int
    from_: Address
    to: Address
    amount: int
    currency: Currency
    timestamp: Time

    def transfer(self) -> tuple[Address, Address, int, Currency]:
        """The ``(from, to, amount, currency)`` shape, without ids or time."""
        return (self.from_, self.to, self.amount, self.currency)


Ledger = tuple  # tuple[Transaction, ...] in append order


@dataclass(frozen=True)
class FinContract:
    ctr_id: int
    dsc_id: int
    prim: Primitive
    issuer: Address
    owner: Address
    proposed_owner: Address
    scale: int


@dataclass(frozen=True)
class Result:
    balance: Balance
    contracts: tuple[FinContract, ...]
    next: int
    ledger: tuple[Transaction, ...]


@dataclass(frozen=True)
class EngineConfig:
    freshness_threshold: Time = 30

    def __post_init__(self):
        if self.freshness_threshold <= 0:
            raise ValueError("freshness_threshold must be positive")


DEFAULT_ENGINE = EngineConfig()


def query(
    gateways: Iterable[Gateway], addr: Address, now: Time, cfg: EngineConfig = DEFAULT_ENGINE
) -> Optional[int]:
    """Value of the first gateway at ``addr``, or None if missing or stale."""
    for g in gateways:
        if g.addr == addr:
            if now - g.timestamp > cfg.freshness_threshold:
                return None
            return g.value
    return None


def _scaled(scale: int, k: int) -> int:
    product = scale * k
    if product > MAX_AMOUNT:
        raise AmountOverflowError(f"scale {scale} * {k} exceeds {MAX_AMOUNT}")
    return product


def execute(
    p: Primitive,
    scale: int,
    issuer: Address,
    owner: Address,
    balance: Balance,
    now: Time,
    gateways: Sequence[Gateway],
    ctr_id: int,
    dsc_id: int,
    fresh: int,
    ledger: tuple[Transaction, ...],
    cfg: EngineConfig = DEFAULT_ENGINE,
    on_transfer: Optional[Callable[[Transaction], None]] = None,
) -> Optional[Result]:
    """Run ``p`` once, returning None on a failed query or expired window.

    ``fresh`` seeds every id produced here: a ``One`` consumes one id for its
    transaction, an ``Or`` or a postponed ``Timebound`` consumes two and gives
    the generated contract the second. ``on_transfer`` sees every transaction
    as it is produced, including those of an execution that later fails.
    """
    if isinstance(p, Zero):
        return Result(balance, (), fresh, ledger)

    if isinstance(p, One):
        cur = p.currency
        # debit first, then credit from the debited map so issuer == owner nets to zero
        debited = balance.update(issuer, cur, balance.of(issuer, cur) - scale)
        credited = debited.update(owner, cur, debited.of(owner, cur) + scale)
        tx = Transaction(fresh, ctr_id, issuer, owner, scale, cur, now)
        if on_transfer is not None:
            on_transfer(tx)
        return Result(credited, (), fresh + 1, ledger + (tx,))

    if isinstance(p, Scale):
        return execute(p.body, _scaled(scale, p.factor), issuer, owner, balance, now,
                       gateways, ctr_id, dsc_id, fresh, ledger, cfg, on_transfer)

    if isinstance(p, ScaleObs):
        k = query(gateways, p.address, now, cfg)
        if k is None:
            return None
        return execute(p.body, _scaled(scale, k), issuer, owner, balance, now,
                       gateways, ctr_id, dsc_id, fresh, ledger, cfg, on_transfer)

    if isinstance(p, Give):
        return execute(p.body, scale, owner, issuer, balance, now,
                       gateways, ctr_id, dsc_id, fresh, ledger, cfg, on_transfer)

    if isinstance(p, And):
        r1 = execute(p.first, scale, issuer, owner, balance, now,
                     gateways, ctr_id, dsc_id, fresh, ledger, cfg, on_transfer)
        if r1 is None:
            return None
        r2 = execute(p.second, scale, issuer, owner, r1.balance, now,
                     gateways, ctr_id, dsc_id, r1.next, r1.ledger, cfg, on_transfer)
        if r2 is None:
            return None
        return Result(r2.balance, r1.contracts + r2.contracts, r2.next, r2.ledger)

    if isinstance(p, If):
        v = query(gateways, p.address, now, cfg)
        if v is None:
            return None
        branch = p.otherwise if v == 0 else p.then
        return execute(branch, scale, issuer, owner, balance, now,
                       gateways, ctr_id, dsc_id, fresh, ledger, cfg, on_transfer)

    if isinstance(p, Timebound):
        if p.upper < now:
            return None
        if p.lower < now:
            return execute(p.body, scale, issuer, owner, balance, now,
                           gateways, ctr_id, dsc_id, fresh, ledger, cfg, on_transfer)
        # the generated contract carries this very node, not a rebuilt copy
        postponed = FinContract(fresh + 1, dsc_id, p, issuer, owner, owner, scale)
        return Result(balance, (postponed,), fresh + 2, ledger)

    if isinstance(p, Or):
        deferred = FinContract(fresh + 1, dsc_id, p, issuer, owner, owner, scale)
        return Result(balance, (deferred,), fresh + 2, ledger)

    raise TypeError(f"not a primitive: {p!r}")
