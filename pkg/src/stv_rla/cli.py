"""Command-line entry point: ``stv-rla {tabulate,bounds,plan,asn,simulate}``.

Exit status is 0 on success, 1 when no auditable plan exists and 2 on bad
input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from fractions import Fraction

from . import __version__
from . import bounds as bnd
from .assertions import (asn_from_json, asn_to_json, assertion_from_json, assertion_to_json,
                         describe, frac_str, report)
from .audit_engine import AsnQuery, estimate_asn, perturb_records, simulate
from .ballot_model import ElectionError, load_election
from .planner import METHODS, AuditPlan, PlanningError, check_sufficiency, plan_with
from .tabulator import record_to_json, render_table, tabulate

log = logging.getLogger("stv_rla")

EXIT_OK, EXIT_UNAUDITABLE, EXIT_INPUT = 0, 1, 2


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _probability(text: str) -> float:
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1): {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stv-rla", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def ballots_arg(sp):
        sp.add_argument("ballots", help="ballot file (.json or text format)")
        sp.add_argument("--seats", type=int, default=None,
                        help="override the file's seat count")

    t = sub.add_parser("tabulate", help="count an election and print the rounds")
    ballots_arg(t)
    t.add_argument("--format", choices=("text", "json"), default="text")

    b = sub.add_parser("bounds", help="print one tally bound")
    ballots_arg(b)
    b.add_argument("kind", choices=("lower_basic", "upper_basic", "upper_comp",
                                    "lower_elim", "upper_complex"))
    b.add_argument("--c", required=True, help="candidate the bound is about")
    b.add_argument("--other", help="second candidate (upper_comp's c', upper_complex's b)")
    b.add_argument("--O", default="", help="comma-separated excluded set for lower_elim")
    b.add_argument("--W", default="", help="comma-separated seated set for upper_complex")
    b.add_argument("--caps", default="", help="caps as name=value,... for upper_complex")
    b.add_argument("--G", default="", help="comma-separated dominators for upper_complex")

    pl = sub.add_parser("plan", help="generate an assertion-based audit plan")
    ballots_arg(pl)
    pl.add_argument("--method", choices=("auto",) + METHODS, default="auto")
    pl.add_argument("--risk-limit", type=_probability, default=0.10)
    pl.add_argument("--error-rate", type=_probability, default=0.002)
    pl.add_argument("--delta", type=_fraction, default=Fraction(1, 100))
    pl.add_argument("--asn-mode", choices=("montecarlo", "closed"), default="montecarlo")
    pl.add_argument("--winners", help="comma-separated reported winners (default: tabulated)")
    pl.add_argument("--override", action="store_true",
                    help="plan for --winners even if they disagree with the count")
    pl.add_argument("--out", help="write the plan JSON here instead of stdout")
    pl.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; planning is serial")

    a = sub.add_parser("asn", help="estimate the sample size for one assertion margin")
    a.add_argument("--margin", type=_fraction, required=True)
    a.add_argument("--upper-bound", type=_fraction, default=Fraction(1))
    a.add_argument("--risk-limit", type=_probability, default=0.10)
    a.add_argument("--error-rate", type=_probability, default=0.002)
    a.add_argument("--total-ballots", type=int, default=None)
    a.add_argument("--mode", choices=("montecarlo", "closed"), default="montecarlo")
    a.add_argument("--trials", type=int, default=1000)
    a.add_argument("--seed", type=int, default=20210513)

    s = sub.add_parser("simulate", help="simulate ballot-comparison audits of a plan")
    s.add_argument("--plan", required=True, help="plan JSON written by 'plan'")
    s.add_argument("--ballots", required=True, help="ballot file holding the CVRs")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--error-rate", type=_probability, default=0.0,
                   help="rate of random edits applied to the CVRs to make each trial's MVRs")
    s.add_argument("--risk-limit", type=_probability, default=None)
    s.add_argument("--max-draws", type=int, default=None)
    s.add_argument("--jobs", type=int, default=1)
    return p


def _names(text, election):
    return [election.id_of(n.strip()) for n in text.split(",") if n.strip()]


def cmd_tabulate(args) -> int:
    e = load_election(args.ballots, args.seats)
    if any(not r for r, _ in e.ballots):
        log.warning("empty ballots present; they count towards the quota only")
    record = tabulate(e)
    if args.format == "json":
        print(json.dumps(record_to_json(record, e), indent=2))
    else:
        print(render_table(record, e))
        if record.tie_occurred:
            print("note: an elimination tie was broken by candidate order")
    return EXIT_OK


def cmd_bounds(args) -> int:
    e = load_election(args.ballots, args.seats)
    c = e.id_of(args.c)
    B = e.ballots
    if args.kind in ("upper_comp", "upper_complex") and not args.other:
        raise ElectionError(f"{args.kind} needs --other")
    if args.kind == "lower_basic":
        value = bnd.lower_basic(c, B)
    elif args.kind == "upper_basic":
        value = bnd.upper_basic(c, B)
    elif args.kind == "upper_comp":
        value = bnd.upper_comp(c, e.id_of(args.other), B)
    elif args.kind == "lower_elim":
        value = bnd.lower_elim(c, set(_names(args.O, e)), B)
    else:
        caps = {}
        for item in filter(None, args.caps.split(",")):
            name, _, v = item.partition("=")
            caps[e.id_of(name.strip())] = Fraction(v)
        value = bnd.upper_complex(c, e.id_of(args.other), set(_names(args.W, e)), caps,
                                  set(_names(args.G, e)), B)
    value = Fraction(value)
    print(json.dumps({"bound": args.kind, "value": frac_str(value), "float": float(value)}))
    return EXIT_OK


def plan_to_json(plan: AuditPlan) -> dict:
    names = plan.candidates
    params = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in plan.parameters.items()}
    return {
        "method": plan.method,
        "candidates": list(names),
        "seats": plan.seats,
        "reportedWinners": [names[w] for w in plan.reported_winners],
        "overallAsn": asn_to_json(plan.overall_asn),
        "tieSensitive": plan.tie_sensitive,
        "unresolved": [names[c] for c in plan.unresolved] if plan.unresolved else None,
        "parameters": params,
        "comparison": {m: (None if v is None else asn_to_json(v))
                       for m, v in plan.comparison.items()},
        "assertions": [assertion_to_json(r, names) for r in plan.assertions],
    }


def plan_from_json(doc: dict, election) -> AuditPlan:
    """Rebuild a plan against ``election`` (its CVRs); reports are recomputed."""
    names = doc["candidates"]
    if list(names) != list(election.candidates):
        raise ElectionError("plan and ballot file list different candidates")
    params = doc.get("parameters", {})
    alpha = params.get("risk_limit", 0.1)
    eps = params.get("error_rate", 0.002)
    reps = tuple(report(assertion_from_json(a, names), election, alpha, eps, "closed")
                 for a in doc["assertions"])
    winners = tuple(election.id_of(n) for n in doc["reportedWinners"])
    return AuditPlan(doc["method"], reps, asn_from_json(doc["overallAsn"]), winners,
                     election.candidates, election.seats, params, doc.get("tieSensitive", False))


def comparison_row(plan: AuditPlan, label: str) -> str:
    def cell(v):
        if v is None:
            return "--"
        return "+inf" if math.isinf(v) else f"{math.ceil(v):,}"

    cmp = plan.comparison or {plan.method: plan.overall_asn}
    cells = [cell(cmp.get(m)) for m in METHODS]
    return (f"{label}\t2-quota ASN: {cells[0]}\t1-quota ASN: {cells[1]}"
            f"\tGeneral ASN: {cells[2]}\tselected: {plan.method}")


def cmd_plan(args) -> int:
    e = load_election(args.ballots, args.seats)
    if e.seats != 2:
        raise ElectionError("plan requires a 2-seat election")
    kwargs = dict(risk_limit=args.risk_limit, error_rate=args.error_rate,
                  asn_mode=args.asn_mode, override=args.override)
    if args.winners:
        kwargs["reported_winners"] = _names(args.winners, e)
    if args.method in ("auto", "one-quota"):
        kwargs["delta"] = args.delta
    plan = plan_with(args.method, e, **kwargs)
    if plan is None:
        print(f"{args.method}: --  (method not applicable)", file=sys.stderr)
        return EXIT_UNAUDITABLE
    if not plan.comparison:
        plan.comparison = {m: None for m in METHODS}
        plan.comparison[plan.method] = plan.overall_asn
    doc = plan_to_json(plan)
    text = json.dumps(doc, indent=2)
    row = comparison_row(plan, args.ballots)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(row)
    else:
        print(text)
        print(row, file=sys.stderr)
    if plan.auditable and not check_sufficiency(plan, e):
        log.error("internal error: plan does not cover every alternative outcome")
        return EXIT_UNAUDITABLE
    if not plan.auditable:
        if plan.unresolved:
            a, b = (e.name(c) for c in plan.unresolved)
            print(f"no auditable assertions rule out {{{a}, {b}}}", file=sys.stderr)
        return EXIT_UNAUDITABLE
    for r in plan.assertions:
        log.info("%s  margin=%.4f  asn=%s", describe(r.assertion, e.candidates),
                 float(r.margin), r.asn)
    return EXIT_OK


def cmd_asn(args) -> int:
    q = AsnQuery(args.margin, args.upper_bound, args.risk_limit, args.error_rate,
                 args.total_ballots)
    value = estimate_asn(q, mode=args.mode, trials=args.trials, seed=args.seed)
    print(json.dumps({"margin": frac_str(args.margin), "asn": asn_to_json(value)}))
    return EXIT_OK if math.isfinite(value) else EXIT_UNAUDITABLE


def cmd_simulate(args) -> int:
    e = load_election(args.ballots)
    with open(args.plan, encoding="utf-8") as fh:
        doc = json.load(fh)
    plan = plan_from_json(doc, e)
    if not plan.auditable:
        print("plan is not auditable (+inf ASN)", file=sys.stderr)
        return EXIT_UNAUDITABLE
    cvrs = e.expand()
    n = len(e.candidates)
    rate = args.error_rate

    def noisy(rng):
        return perturb_records(cvrs, n, rate, rng)

    mvrs = noisy if rate > 0 else cvrs

    alpha = args.risk_limit if args.risk_limit is not None else plan.parameters.get("risk_limit", 0.1)
    result = simulate(plan, cvrs, mvrs, trials=args.trials, seed=args.seed,
                      risk_limit=alpha, max_draws=args.max_draws, jobs=args.jobs)
    result["planAsn"] = asn_to_json(plan.overall_asn)
    print(json.dumps(result, indent=2))
    return EXIT_OK


COMMANDS = {"tabulate": cmd_tabulate, "bounds": cmd_bounds, "plan": cmd_plan,
            "asn": cmd_asn, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ElectionError, PlanningError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
