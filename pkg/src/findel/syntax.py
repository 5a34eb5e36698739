"""Findel primitives: the contract AST, time sugar, and a textual grammar.

The nine constructors are immutable dataclasses. ``parse`` and ``to_text``
form a round-trip pair over the canonical concrete syntax::

    And(Give(Scale(11, One(USD))), Scale(10, One(EUR)))

``At``, ``Before`` and ``After`` are accepted by the parser but are
desugared into ``Timebound`` immediately, so they never appear in an AST.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Iterator, Union

Address = int
Time = int

#: Largest representable time. Every scenario clock value is strictly below it.
INF: Time = 2**63 - 1


class Currency(enum.Enum):
    USD = "USD"
    EUR = "EUR"
    GBP = "GBP"
    JPY = "JPY"
    CNY = "CNY"
    SGD = "SGD"
    NONE = "NONE"

    def __repr__(self) -> str:
        return f"Currency.{self.name}"


@dataclass(frozen=True, eq=True)
class Zero:
    pass


@dataclass(frozen=True)
class One:
    currency: Currency


@dataclass(frozen=True)
class Scale:
    factor: int
    body: "Primitive"


@dataclass(frozen=True)
class ScaleObs:
    address: Address
    body: "Primitive"


@dataclass(frozen=True)
class Give:
    body: "Primitive"


@dataclass(frozen=True)
class And:
    first: "Primitive"
    second: "Primitive"


@dataclass(frozen=True)
class Or:
    first: "Primitive"
    second: "Primitive"


@dataclass(frozen=True)
class If:
    address: Address
    then: "Primitive"
    otherwise: "Primitive"


@dataclass(frozen=True)
class Timebound:
    lower: Time
    upper: Time
    body: "Primitive"


Primitive = Union[Zero, One, Scale, ScaleObs, Give, And, Or, If, Timebound]
PRIMITIVE_TYPES = (Zero, One, Scale, ScaleObs, Give, And, Or, If, Timebound)


@dataclass(frozen=True)
class SugarConfig:
    """Half-width of the ``At`` acceptance window, in seconds."""

    delta: Time = 30

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")


DEFAULT_SUGAR = SugarConfig()


# -- sugar ------------------------------------------------------------------


def at_(t: Time, p: Primitive, cfg: SugarConfig = DEFAULT_SUGAR) -> Timebound:
    lower = max(t - cfg.delta, 0)
    upper = min(t + cfg.delta, INF)
    return Timebound(lower, upper, p)


def before(t: Time, p: Primitive) -> Timebound:
    return Timebound(0, t, p)


def after(t: Time, p: Primitive) -> Timebound:
    return Timebound(t, INF, p)


# -- traversal --------------------------------------------------------------


def children(p: Primitive) -> tuple[tuple[str, Primitive], ...]:
    """Direct subterms with their path step (``L`` or ``R``).

    Single-child nodes use ``L``; ``If`` uses ``L`` for the then-branch.
    """
    if isinstance(p, (Zero, One)):
        return ()
    if isinstance(p, (Scale, ScaleObs, Give, Timebound)):
        return (("L", p.body),)
    if isinstance(p, (And, Or)):
        return (("L", p.first), ("R", p.second))
    if isinstance(p, If):
        return (("L", p.then), ("R", p.otherwise))
    raise TypeError(f"not a primitive: {p!r}")


def walk(p: Primitive, path: str = "") -> Iterator[tuple[str, Primitive]]:
    """Pre-order traversal yielding ``(path, node)``; the root's path is ``""``."""
    stack = [(path, p)]
    while stack:
        here, node = stack.pop()
        yield here, node
        stack.extend((here + step, child) for step, child in reversed(children(node)))


def subterm(p: Primitive, path: str) -> Primitive:
    node = p
    for step in path:
        node = dict(children(node))[step]
    return node


def size(p: Primitive) -> int:
    return sum(1 for _ in walk(p))


def depth(p: Primitive) -> int:
    kids = children(p)
    return 1 + max((depth(c) for _, c in kids), default=0)


# -- printing ---------------------------------------------------------------


def _nat(n: int) -> str:
    return "INF" if n == INF else str(n)


def to_text(p: Primitive) -> str:
    """Canonical concrete syntax; sugar is never re-introduced."""
    if isinstance(p, Zero):
        return "Zero"
    if isinstance(p, One):
        return f"One({p.currency.value})"
    if isinstance(p, Scale):
        return f"Scale({_nat(p.factor)}, {to_text(p.body)})"
    if isinstance(p, ScaleObs):
        return f"ScaleObs({_nat(p.address)}, {to_text(p.body)})"
    if isinstance(p, Give):
        return f"Give({to_text(p.body)})"
    if isinstance(p, And):
        return f"And({to_text(p.first)}, {to_text(p.second)})"
    if isinstance(p, Or):
        return f"Or({to_text(p.first)}, {to_text(p.second)})"
    if isinstance(p, If):
        return f"If({_nat(p.address)}, {to_text(p.then)}, {to_text(p.otherwise)})"
    if isinstance(p, Timebound):
        return f"Timebound({_nat(p.lower)}, {_nat(p.upper)}, {to_text(p.body)})"
    raise TypeError(f"not a primitive: {p!r}")


# -- parsing ----------------------------------------------------------------


class FindelSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class UnknownCurrencyError(FindelSyntaxError):
    pass


class UnknownIdentifierError(FindelSyntaxError):
    pass


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<punct>[(),])|(?P<bad>\S))")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


# constructor name -> argument kinds ("n" natural, "c" currency, "p" primitive)
_SIGNATURES = {
    "Zero": "",
    "One": "c",
    "Scale": "np",
    "ScaleObs": "np",
    "Give": "p",
    "And": "pp",
    "Or": "pp",
    "If": "npp",
    "Timebound": "nnp",
    "At": "np",
    "Before": "np",
    "After": "np",
}


class _Parser:
    def __init__(self, text: str, cfg: SugarConfig):
        self.text = text
        self.cfg = cfg
        self.tokens = _tokenize(text)
        self.pos = 0

    def _where(self, tok: _Token) -> tuple[int, int]:
        line = self.text.count("\n", 0, tok.offset) + 1
        column = tok.offset - (self.text.rfind("\n", 0, tok.offset) + 1) + 1
        return line, column

    def error(self, message: str, tok: _Token, cls=FindelSyntaxError):
        return cls(message, *self._where(tok))

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.advance()
        if tok.text != text or tok.kind == "eof":
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}", tok)

    def nat(self) -> int:
        tok = self.advance()
        if tok.kind == "num":
            value = int(tok.text)
            if value > INF:
                raise self.error(f"number {tok.text} exceeds INF", tok)
            return value
        if tok.kind == "ident" and tok.text == "INF":
            return INF
        raise self.error(f"expected a natural number, found {tok.text or 'end of input'!r}", tok)

    def currency(self) -> Currency:
        tok = self.advance()
        if tok.kind != "ident":
            raise self.error(f"expected a currency, found {tok.text or 'end of input'!r}", tok)
        try:
            return Currency[tok.text]
        except KeyError:
            raise self.error(f"unknown currency {tok.text!r}", tok, UnknownCurrencyError) from None

    def primitive(self) -> Primitive:
        tok = self.advance()
        if tok.kind != "ident":
            raise self.error(f"expected a primitive, found {tok.text or 'end of input'!r}", tok)
        sig = _SIGNATURES.get(tok.text)
        if sig is None:
            raise self.error(f"unknown identifier {tok.text!r}", tok, UnknownIdentifierError)
        args: list = []
        if sig:
            self.expect("(")
            for i, kind in enumerate(sig):
                if i:
                    self.expect(",")
                if kind == "n":
                    args.append(self.nat())
                elif kind == "c":
                    args.append(self.currency())
                else:
                    args.append(self.primitive())
            self.expect(")")
        return self.build(tok.text, args)

    def build(self, name: str, args: list) -> Primitive:
        if name == "At":
            return at_(args[0], args[1], self.cfg)
        if name == "Before":
            return before(*args)
        if name == "After":
            return after(*args)
        return globals()[name](*args)

    def parse(self) -> Primitive:
        p = self.primitive()
        tok = self.peek()
        if tok.kind != "eof":
            raise self.error(f"unexpected trailing input {tok.text!r}", tok)
        return p


def parse(text: str, cfg: SugarConfig = DEFAULT_SUGAR) -> Primitive:
    """Parse concrete syntax into a primitive, desugaring At/Before/After."""
    return _Parser(text, cfg).parse()


def replace_at(p: Primitive, path: str, new: Primitive) -> Primitive:
    """Copy of ``p`` with the subterm at ``path`` swapped for ``new``."""
    if not path:
        return new
    step, rest = path[0], path[1:]
    if isinstance(p, (Scale, ScaleObs, Give, Timebound)) and step == "L":
        return replace(p, body=replace_at(p.body, rest, new))
    if isinstance(p, (And, Or)):
        if step == "L":
            return replace(p, first=replace_at(p.first, rest, new))
        return replace(p, second=replace_at(p.second, rest, new))
    if isinstance(p, If):
        if step == "L":
            return replace(p, then=replace_at(p.then, rest, new))
        return replace(p, otherwise=replace_at(p.otherwise, rest, new))
    raise ValueError(f"no subterm at step {step!r} of {type(p).__name__}")
