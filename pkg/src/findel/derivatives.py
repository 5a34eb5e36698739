"""The derivative case studies: FRCE, ERCE, ZCB, OPT (buggy and fixed), CDS.

Builders that use ``At`` take a ``SugarConfig``; every builder returns a
closed primitive. ``DERIVATIVES`` maps names to builders for the CLI.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field
from typing import Any, Callable

from findel.syntax import (
    DEFAULT_SUGAR,
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
    SugarConfig,
    Time,
    Zero,
    after,
    at_,
    before,
)

#: One year in seconds; scenarios may substitute a shorter year.
YEAR = 31_536_000

USD, EUR, GBP = Currency.USD, Currency.EUR, Currency.GBP


@dataclass(frozen=True)
class DerivativeSpec:
    name: str
    prim: Primitive
    params: dict[str, Any] = field(default_factory=dict)


def frce() -> Primitive:
    """Fixed-rate exchange: the owner pays 11 USD and receives 10 EUR."""
    return And(Give(Scale(11, One(USD))), Scale(10, One(EUR)))


def erce(n: int, addr: Address) -> Primitive:
    """External-rate exchange: n USD against n EUR scaled by the rate at ``addr``."""
    if addr == 0:
        raise ValueError("gateway address must be non-zero")
    return And(Give(Scale(n, One(USD))), ScaleObs(addr, Scale(n, One(EUR))))


def zcb(now: Time, t: Time, cfg: SugarConfig = DEFAULT_SUGAR) -> Primitive:
    """Zero-coupon bond: pay 10 USD now, receive 11 USD around ``now + t``."""
    return And(Give(Scale(10, One(USD))), at_(now + t, Scale(11, One(USD)), cfg))


def opt(t: Time) -> Primitive:
    # the Or sits above the Gives, so the joiner ends up owning the option
    return And(
        before(t, Or(Give(One(USD)), Give(One(EUR)))),
        after(t + 2, Scale(1, One(GBP))),
    )


def opt_fixed(t: Time) -> Primitive:
    return And(
        before(t, Give(Or(One(USD), One(EUR)))),
        after(t + 2, Scale(1, One(GBP))),
    )


def pay_at_t(t: Time, addr: Address, sum: int, cfg: SugarConfig = DEFAULT_SUGAR) -> Primitive:
    """Pay ``sum`` USD to the owner at ``t`` if the gateway at ``addr`` reads non-zero."""
    if addr == 0:
        raise ValueError("gateway address must be non-zero")
    return at_(t, If(addr, Scale(sum, One(USD)), Zero()), cfg)


def yearly_check(
    t: Time,
    t_next: Time,
    addr: Address,
    price: int,
    fy: int,
    f: int,
    i: int,
    cfg: SugarConfig = DEFAULT_SUGAR,
) -> Primitive:
    """At ``t``: nothing after a default, otherwise collect fee ``f`` and arm the next payout."""
    if not t < t_next:
        raise ValueError(f"yearly_check needs t < t_next, got {t} >= {t_next}")
    return at_(
        t,
        If(addr, Zero(), And(Give(Scale(f, One(USD))), pay_at_t(t_next, addr, price + i * fy, cfg))),
        cfg,
    )


def cds(
    now: Time,
    addr: Address,
    price: int,
    fy: int,
    f: int,
    year: Time = YEAR,
    cfg: SugarConfig = DEFAULT_SUGAR,
) -> Primitive:
    """Three-year credit default swap; the gateway at ``addr`` reads non-zero once defaulted."""
    y1, y2, y3 = now + year, now + 2 * year, now + 3 * year
    return And(
        And(Give(Scale(f, One(USD))), pay_at_t(y1, addr, price + 2 * fy, cfg)),
        And(
            yearly_check(y1, y2, addr, price, fy, f, 1, cfg),
            yearly_check(y2, y3, addr, price, fy, f, 0, cfg),
        ),
    )


DERIVATIVES: dict[str, Callable[..., Primitive]] = {
    "frce": frce,
    "erce": erce,
    "zcb": zcb,
    "opt": opt,
    "opt_fixed": opt_fixed,
    "pay_at_t": pay_at_t,
    "yearly_check": yearly_check,
    "cds": cds,
}


def build(name: str, params: dict[str, Any], sugar: SugarConfig = DEFAULT_SUGAR,
          year: Time = YEAR) -> DerivativeSpec:
    """Instantiate a named derivative from keyword parameters.

    ``cfg`` and ``year`` are filled in from the arguments when the builder
    accepts them and the caller did not pass them explicitly.
    """
    try:
        fn = DERIVATIVES[name]
    except KeyError:
        raise ValueError(f"unknown derivative {name!r}; choose from {sorted(DERIVATIVES)}") from None
    accepted = inspect.signature(fn).parameters
    unknown = set(params) - set(accepted)
    if unknown:
        raise ValueError(f"{name} does not take {sorted(unknown)}")
    kwargs = dict(params)
    if "cfg" in accepted:
        kwargs.setdefault("cfg", sugar)
    if "year" in accepted:
        kwargs.setdefault("year", year)
    try:
        prim = fn(**kwargs)
    except TypeError as e:
        raise ValueError(f"bad parameters for {name}: {e}") from None
    return DerivativeSpec(name, prim, dict(params))
