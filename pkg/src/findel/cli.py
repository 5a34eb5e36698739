"""``findel`` command line: parse, run, analyze, predict.

Exit codes: 0 success, 1 input error, 2 consistency violation.
"""

from __future__ import annotations

import argparse
import sys
from typing import Any, Optional, Sequence

from findel.analyzer import (
    GatewayScenario,
    gateway_sensitivity,
    ownership_report,
    timewindow_report,
)
from findel.derivatives import DERIVATIVES, YEAR, build
from findel.marketplace import Choice, run_trace
from findel.metaprops import check_consistent
from findel.oracle import Env, cashflows
from findel.scenario import (
    ScenarioError,
    dump_trace,
    dump_transaction,
    load_scenario,
    nat,
    read_json,
    to_json,
)
from findel.syntax import INF, If, Primitive, ScaleObs, SugarConfig, parse, to_text, walk

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INCONSISTENT = 2


class _Inconsistent(Exception):
    pass


def _read_text(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    with open(source, encoding="utf-8") as f:
        return f.read()


def _write(text: str, dest: Optional[str]) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _param(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ValueError(f"expected key=value, got {item!r}")
    if raw == "INF":
        return key, INF
    try:
        return key, int(raw)
    except ValueError:
        raise ValueError(f"parameter {key} must be an integer or INF, got {raw!r}") from None


def _contract(target: str, params: Sequence[str], sugar: SugarConfig, year: int) -> Primitive:
    """A derivative name with ``key=value`` params, or contract text."""
    if target in DERIVATIVES:
        return build(target, dict(_param(p) for p in params), sugar, year).prim
    if params:
        raise ValueError("parameters are only accepted after a derivative name")
    return parse(target, sugar)


# -- parse ------------------------------------------------------------------


def cmd_parse(args: argparse.Namespace) -> int:
    text = args.expr if args.expr is not None else _read_text(args.file)
    p = parse(text, SugarConfig(args.delta))
    sys.stdout.write(to_text(p) + "\n")
    return EXIT_OK


# -- run --------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(read_json(args.scenario))

    def on_step(step):
        report = check_consistent(step.after)
        if not report.ok:
            raise _Inconsistent(f"after action {step.action}: violated {report.violations}")

    check = on_step if args.check_consistency else None
    if check is not None and not check_consistent(scenario.initial).ok:
        raise _Inconsistent(f"initial state: violated {check_consistent(scenario.initial).violations}")
    final, log = run_trace(scenario.initial, scenario.actions, scenario.config.engine,
                           gateways_at=scenario.timeline, on_step=check)
    _write(to_json(dump_trace(log, final)), args.trace_out)
    return EXIT_OK


# -- analyze ----------------------------------------------------------------


def _gateways(items: Sequence[str]) -> dict[int, int]:
    out = {}
    for item in items:
        key, value = _param(item)
        try:
            addr = int(key)
        except ValueError:
            raise ValueError(f"gateway address must be an integer, got {key!r}") from None
        out[addr] = value
    return out


def analyze_json(p: Primitive, now: int, issuer: int, joiner: int, gateways: dict[int, int]) -> dict:
    baseline = {n.address: 1 for _, n in walk(p) if isinstance(n, (ScaleObs, If))}
    baseline.update(gateways)
    own = ownership_report(p, issuer, joiner, now)
    gw = gateway_sensitivity(p, GatewayScenario(baseline, now, issuer, joiner))
    tw = timewindow_report(p, now)
    return {
        "contract": to_text(p),
        "now": now,
        "issuer": issuer,
        "joiner": joiner,
        "as_flag": bool(own.flagged),
        "ownership": [
            {
                "path": e.path,
                "contract": to_text(e.prim),
                "issuer_role": e.issuer_role.value,
                "owner_role": e.owner_role.value,
                "issuer": e.issuer,
                "proposed_owner": e.proposed_owner,
                "immediate": e.immediate,
                "flagged": e.flagged,
            }
            for e in own.entries
        ],
        "gateways": [
            {
                "path": e.path,
                "address": e.address,
                "node": e.node,
                "unit": e.unit,
                "join_time": e.join_time,
                "effect": e.effect.value,
                "atomic": e.atomic,
                "rolled_back": [dump_transaction(tx) for tx in e.rolled_back],
            }
            for e in gw.entries
        ],
        "time_windows": [
            {
                "path": e.path,
                "lower": e.lower,
                "upper": "INF" if e.upper == INF else e.upper,
                "expired": e.expired,
                "consequence": e.consequence,
            }
            for e in tw.entries
        ],
    }


def cmd_analyze(args: argparse.Namespace) -> int:
    p = _contract(args.target, args.params, SugarConfig(args.delta), args.year_length)
    report = analyze_json(p, args.now, args.issuer, args.joiner, _gateways(args.gateway))
    sys.stdout.write(to_json(report))
    return EXIT_OK


# -- predict ----------------------------------------------------------------


def load_env(data: dict) -> tuple[Env, int, int, int]:
    """Parse an env file into ``(env, scale, issuer, owner)``."""
    if not isinstance(data, dict):
        raise ScenarioError("env must be a JSON object")
    gateways = {nat(g["address"], "gateway address"): nat(g["value"], "gateway value")
                for g in data.get("gateways", [])}
    try:
        or_policy = {path: Choice(v) for path, v in data.get("or_policy", {}).items()}
    except ValueError as e:
        raise ScenarioError(str(e)) from None
    join_policy = {path: (None if v is None else nat(v, "join time"))
                   for path, v in data.get("join_policy", {}).items()}
    env = Env(gateways, nat(data.get("now", 0), "now"), or_policy, join_policy)
    return (env, nat(data.get("scale", 1), "scale"),
            nat(data.get("issuer", 1), "issuer"), nat(data.get("owner", 2), "owner"))


def predict_json(p: Primitive, env: Env, scale: int, issuer: int, owner: int) -> dict:
    flows = cashflows(p, scale, issuer, owner, env)
    if flows is None:
        return {"outcome": "deleted", "transfers": []}
    rows = sorted(flows.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][3].value, kv[0][2]))
    return {
        "outcome": "executed",
        "transfers": [
            {"from": a, "to": b, "amount": n, "currency": cur.value, "count": k}
            for (a, b, n, cur), k in rows
        ],
    }


def cmd_predict(args: argparse.Namespace) -> int:
    p = _contract(args.target, args.params, SugarConfig(args.delta), args.year_length)
    data = read_json(args.env) if args.env else {}
    env, scale, issuer, owner = load_env(data)
    sys.stdout.write(to_json(predict_json(p, env, scale, issuer, owner)))
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="findel", description="Findel contract toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def sugar_opts(sp):
        sp.add_argument("--delta", type=int, default=30, help="At window half-width (default 30)")

    sp = sub.add_parser("parse", help="parse a contract and print its canonical form")
    sp.add_argument("file", nargs="?", default="-", help="contract file, or - for stdin")
    sp.add_argument("-e", "--expr", help="contract text given inline")
    sugar_opts(sp)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("run", help="run a scenario file and emit its trace")
    sp.add_argument("scenario")
    sp.add_argument("--trace-out", help="write the trace here instead of stdout")
    sp.add_argument("--check-consistency", action="store_true",
                    help="check state consistency after every step; exit 2 on violation")
    sp.set_defaults(func=cmd_run)

    for name, func, help_ in (
        ("analyze", cmd_analyze, "ownership, gateway and time-window reports"),
        ("predict", cmd_predict, "predicted cash flows of a single join"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("target", help="derivative name or contract text")
        sp.add_argument("params", nargs="*", help="derivative parameters as key=value")
        sugar_opts(sp)
        sp.add_argument("--year-length", type=int, default=YEAR)
        if name == "analyze":
            sp.add_argument("--now", type=int, default=0)
            sp.add_argument("--issuer", type=int, default=1)
            sp.add_argument("--joiner", type=int, default=2)
            sp.add_argument("--gateway", action="append", default=[], metavar="ADDR=VALUE",
                            help="baseline gateway value (default 1 for every queried address)")
        else:
            sp.add_argument("--env", help="env JSON file: now, scale, issuer, owner, gateways, policies")
        sp.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Inconsistent as e:
        print(f"findel: consistency violation {e}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (ValueError, KeyError, TypeError, AttributeError, OSError) as e:
        # ValueError covers syntax, scenario, parameter and JSON errors
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"findel: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
