"""Choosing assertion sets that certify a reported 2-seat STV outcome.

Three generators are provided: the general method (non-winners plus
never-loses assertions for every remaining alternative pair of winners),
the two-quota method and the one-quota method, whose cap on the first
winner's transfer value is swept upwards in steps of ``delta``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import bounds
from .assertions import AG, IQ, NL, UT, AssertionReport, evaluate, linear_total, report
from .ballot_model import Election
from .tabulator import max_transfer_value, tabulate

GENERAL, ONE_QUOTA, TWO_QUOTA = "general", "one-quota", "two-quota"
METHODS = (TWO_QUOTA, ONE_QUOTA, GENERAL)


class PlanningError(ValueError):
    pass


@dataclass
class AuditPlan:
    method: str
    assertions: tuple[AssertionReport, ...]
    overall_asn: float
    reported_winners: tuple[int, int]
    candidates: tuple[str, ...]
    seats: int
    parameters: dict
    tie_sensitive: bool = False
    unresolved: tuple[int, int] | None = None
    comparison: dict = field(default_factory=dict)

    @property
    def auditable(self) -> bool:
        return math.isfinite(self.overall_asn)

    def assertion_set(self) -> set:
        return {r.assertion for r in self.assertions}


class _Reports:
    """Memoised assertion reports for one election and parameter set."""

    def __init__(self, election, risk_limit, error_rate, asn_mode):
        self.election = election
        self.args = (risk_limit, error_rate, asn_mode)
        self.cache: dict = {}

        self.totals: dict = {}
        self.parts: dict = {}

    def total(self, a) -> Fraction:
        """Linear total of ``a``; NL bounds are cached independently of caps."""
        t = self.totals.get(a)
        if t is None:
            if isinstance(a, NL):
                B = self.election.ballots
                key = (a.w, a.l, a.W, a.G - a.W, a.O)
                parts = self.parts.get(key)
                if parts is None:
                    parts = self.parts[key] = (
                        bounds.lower_elim(a.w, a.O, B),
                        bounds.upper_complex_counts(a.l, a.w, a.W, a.G, B))
                t = parts[0] - bounds.apply_caps(parts[1], a.cap_map)
            else:
                t = linear_total(a, self.election)
            self.totals[a] = t
        return t

    def holds(self, a) -> bool:
        return self.total(a) > 0

    def __call__(self, a) -> AssertionReport:
        rep = self.cache.get(a)
        if rep is None:
            rep = self.cache[a] = report(a, self.election, *self.args, total=self.total(a))
        return rep

    def asn(self, assertions) -> float:
        return max((self(a).asn for a in assertions), default=0.0)


def _check_outcome(election: Election, reported, override: bool):
    if election.seats != 2:
        raise PlanningError(f"audit planning supports 2 seats only, not {election.seats}")
    record = tabulate(election)
    if reported is None:
        reported = tuple(record.seated)
    reported = tuple(reported)
    if len(set(reported)) != 2:
        raise PlanningError("exactly two distinct reported winners are required")
    if set(reported) != record.winners and not override:
        raise PlanningError("reported winners do not match the tabulated outcome")
    return reported, record


def _plan(method, reps: _Reports, assertions, reported, record, params, unresolved=None):
    e = reps.election
    unique = list(dict.fromkeys(assertions))
    reports = tuple(reps(a) for a in unique)
    asn = math.inf if unresolved else max((r.asn for r in reports), default=0.0)
    return AuditPlan(method, reports, asn, tuple(reported), e.candidates, e.seats,
                     dict(params), record.tie_occurred, unresolved)


def _params(risk_limit, error_rate, asn_mode, **extra):
    return {"risk_limit": risk_limit, "error_rate": error_rate, "asn_mode": asn_mode, **extra}


def non_winners(election: Election, risk_limit=0.1, error_rate=0.002, asn_mode="montecarlo",
                _reps=None):
    """Always-greater pairs, the candidates they rule out, and the assertions used.

    Returns ``(ag, nw, nwa)``: the set of ``(w, l)`` with AG(w, l) true, the
    candidates beaten by at least two others, and for each of those the two
    cheapest AG assertions against it.
    """
    reps = _reps or _Reports(election, risk_limit, error_rate, asn_mode)
    ag = {(w, l) for w in election.ids for l in election.ids
          if w != l and reps.holds(AG(w, l))}
    nw, nwa = set(), []
    for c in election.ids:
        doms = [w for w in election.ids if (w, c) in ag]
        if len(doms) >= 2:
            nw.add(c)
            doms.sort(key=lambda w: (reps(AG(w, c)).asn, w))
            nwa.extend(AG(w, c) for w in doms[:2])
    return ag, nw, nwa


def find_auditable_assertions(election: Election, reported_winners=None, risk_limit=0.1,
                              error_rate=0.002, asn_mode="montecarlo",
                              override: bool = False) -> AuditPlan:
    """General method: rule out each alternative pair of winners in turn.

    Every pair not already excluded by a non-winner is ruled out by the
    cheapest NL assertion (with the AG assertions it relies on) found over
    all third candidates ``o`` and both choices of which pair member is
    assumed seated. If some pair cannot be ruled out the returned plan has
    an infinite ASN and ``unresolved`` names that pair.
    """
    reported, record = _check_outcome(election, reported_winners, override)
    reps = _Reports(election, risk_limit, error_rate, asn_mode)
    params = _params(risk_limit, error_rate, asn_mode)
    ag, nw, nwa = non_winners(election, _reps=reps)
    chosen = list(nwa)
    cap = max_transfer_value(election.seats)
    ids = list(election.ids)
    for pair in itertools.combinations(ids, 2):
        if set(pair) == set(reported) or nw & set(pair):
            continue
        best = None
        for o in ids:
            if o in pair:
                continue
            beaten = {x for x in ids if (o, x) in ag}
            for branch, (ci, cj) in enumerate((pair, pair[::-1])):
                G = {g for g in ids if g != ci and (g, cj) in ag}
                O = beaten - {ci}
                nl = NL(o, cj, {ci}, {ci: cap}, G, O)
                if not reps.holds(nl):
                    continue
                la = [nl] + [AG(o, x) for x in sorted(O)] + [AG(g, cj) for g in sorted(G)]
                key = (reps.asn(la), len(la), o, branch)
                if best is None or key < best[0]:
                    best = (key, la)
        if best is None or math.isinf(best[0][0]):
            return _plan(GENERAL, reps, chosen, reported, record, params, unresolved=pair)
        chosen.extend(best[1])
    return _plan(GENERAL, reps, chosen, reported, record, params)


def two_quota_plan(election: Election, reported_winners=None, risk_limit=0.1, error_rate=0.002,
                   asn_mode="montecarlo", override: bool = False) -> AuditPlan | None:
    """``{IQ(w1), IQ(w2)}`` when both reported winners have a quota outright,
    else None."""
    reported, record = _check_outcome(election, reported_winners, override)
    if not all(evaluate(IQ(w), election) for w in reported):
        return None
    reps = _Reports(election, risk_limit, error_rate, asn_mode)
    return _plan(TWO_QUOTA, reps, [IQ(w) for w in reported], reported, record,
                 _params(risk_limit, error_rate, asn_mode))


def cap_schedule(reported_tv: Fraction, delta: Fraction, seats: int = 2) -> list[Fraction]:
    """Caps tried by the one-quota sweep: ``tv + k*delta`` below the maximum
    transfer value, then the maximum itself."""
    top = max_transfer_value(seats)
    caps = []
    k = 1
    while reported_tv + k * delta < top:
        caps.append(reported_tv + k * delta)
        k += 1
    caps.append(top)
    return caps


def _context_dominance(reps: _Reports, w1: int, cap: Fraction):
    """Pairs ``(x, y)`` for which x always leads y once ``w1`` is seated on
    first preferences with transfer value below ``cap``."""
    out = {}
    ids = reps.election.ids
    for x in ids:
        for y in ids:
            if x != y and w1 not in (x, y):
                nl = NL(x, y, {w1}, {w1: cap})
                if reps.holds(nl):
                    out[(x, y)] = nl
    return out


def _nl_bundle(reps: _Reports, w1, w2, c, cap, G, O, dom):
    nl = NL(w2, c, {w1}, {w1: cap}, G, O)
    return [nl] + [dom[(w2, o)] for o in sorted(O)] + [dom[(g, c)] for g in sorted(G)]


def _prune_supports(reps: _Reports, w1, w2, c, cap, G, O, dom):
    """Drop dominance facts, costliest first, that the NL still holds without
    and whose removal does not make the bundle dearer."""
    bundle = _nl_bundle(reps, w1, w2, c, cap, G, O, dom)
    support = [(reps(dom[(g, c)]).asn, 0, g) for g in G]
    support += [(reps(dom[(w2, o)]).asn, 1, o) for o in O]
    for _, side, x in sorted(support, reverse=True):
        G2, O2 = (G - {x}, O) if side == 0 else (G, O - {x})
        trial = _nl_bundle(reps, w1, w2, c, cap, G2, O2, dom)
        if reps.holds(trial[0]) and reps.asn(trial) <= reps.asn(bundle):
            G, O, bundle = G2, O2, trial
    return bundle


def _one_quota_config(election, reps, w1, w2, cap):
    top = max_transfer_value(election.seats)
    dom = _context_dominance(reps, w1, cap)
    assertions = [IQ(w1)] + ([UT(w1, cap)] if cap < top else [])
    O = frozenset(o for (x, o) in dom if x == w2)
    for c in election.ids:
        if c in (w1, w2):
            continue
        G = frozenset(g for (g, y) in dom if y == c)
        if not reps.holds(NL(w2, c, {w1}, {w1: cap}, G, O)):
            return None, math.inf
        assertions.extend(_prune_supports(reps, w1, w2, c, cap, G, O, dom))
    assertions = list(dict.fromkeys(assertions))
    return assertions, reps.asn(assertions)


def one_quota_plan(election: Election, reported_winners=None, risk_limit=0.1, error_rate=0.002,
                   delta=Fraction(1, 100), asn_mode="montecarlo",
                   override: bool = False) -> AuditPlan | None:
    """Plan for an outcome where a reported winner has a quota outright.

    The first winner ``w1`` is the reported winner with a first-preference
    quota (the larger one if both have). The cap on its transfer value
    starts one ``delta`` above the realised value and rises while the
    overall ASN keeps falling; the cap equal to the maximum transfer value
    is always tried as well. Returns None when neither winner has a quota.
    """
    delta = Fraction(delta).limit_denominator(10**6) if not isinstance(delta, Fraction) else delta
    if delta <= 0:
        raise PlanningError("delta must be positive")
    reported, record = _check_outcome(election, reported_winners, override)
    quota_winners = [w for w in reported if evaluate(IQ(w), election)]
    if not quota_winners:
        return None
    first_prefs = {w: bounds.lower_basic(w, election.ballots) for w in reported}
    w1 = max(quota_winners, key=lambda w: (first_prefs[w], -w))
    w2 = reported[1] if reported[0] == w1 else reported[0]
    T, Q = first_prefs[w1], election.quota
    tv = Fraction(T - Q, T)

    reps = _Reports(election, risk_limit, error_rate, asn_mode)
    schedule = cap_schedule(tv, delta, election.seats)
    tried = []
    prev = None
    for cap in schedule[:-1]:
        assertions, asn = _one_quota_config(election, reps, w1, w2, cap)
        tried.append((asn, cap, assertions))
        if prev is not None and asn > prev:
            break
        prev = asn
    assertions, asn = _one_quota_config(election, reps, w1, w2, schedule[-1])
    tried.append((asn, schedule[-1], assertions))

    asn, cap, assertions = min(tried, key=lambda t: (t[0], t[1]))
    params = _params(risk_limit, error_rate, asn_mode, delta=str(delta), cap=str(cap),
                     caps_tried=[str(c) for _, c, _ in tried])
    if assertions is None or math.isinf(asn):
        return _plan(ONE_QUOTA, reps, [IQ(w1)], reported, record, params, unresolved=(w1, w2))
    return _plan(ONE_QUOTA, reps, assertions, reported, record, params)


def auto_plan(election: Election, reported_winners=None, risk_limit=0.1, error_rate=0.002,
              delta=Fraction(1, 100), asn_mode="montecarlo", override: bool = False) -> AuditPlan:
    """Run every applicable method and keep the cheapest plan.

    ``plan.comparison`` maps each method to its overall ASN, or None when
    the method does not apply.
    """
    common = dict(reported_winners=reported_winners, risk_limit=risk_limit,
                  error_rate=error_rate, asn_mode=asn_mode, override=override)
    plans = {
        TWO_QUOTA: two_quota_plan(election, **common),
        ONE_QUOTA: one_quota_plan(election, delta=delta, **common),
        GENERAL: find_auditable_assertions(election, **common),
    }
    comparison = {m: (p.overall_asn if p is not None else None) for m, p in plans.items()}
    best = min((p for p in plans.values() if p is not None),
               key=lambda p: p.overall_asn)
    best.comparison = comparison
    return best


def plan_with(method: str, election: Election, **kwargs) -> AuditPlan | None:
    if method == "auto":
        return auto_plan(election, **kwargs)
    if method == GENERAL:
        kwargs.pop("delta", None)
        return find_auditable_assertions(election, **kwargs)
    if method == TWO_QUOTA:
        kwargs.pop("delta", None)
        return two_quota_plan(election, **kwargs)
    if method == ONE_QUOTA:
        return one_quota_plan(election, **kwargs)
    raise PlanningError(f"unknown method {method!r}")


def check_sufficiency(plan: AuditPlan, election: Election) -> bool:
    """Whether the plan's assertions that hold on ``election`` rule out every
    alternative pair of winners.

    Written independently of the planners: it only looks at the assertion
    set. A pair is ruled out if a candidate outside it has a first-preference
    quota, if a member is dominated by a candidate outside the pair, or if a
    never-loses assertion with all its premises present excludes it.
    """
    S = election.seats
    top = max_transfer_value(S)
    holding = [a for a in plan.assertion_set() if evaluate(a, election)]
    iq = {a.c for a in holding if isinstance(a, IQ)}
    ut: dict[int, Fraction] = {}
    for a in holding:
        if isinstance(a, UT) and a.c in iq:
            ut[a.c] = min(a.cap, ut.get(a.c, a.cap))

    def cap_ok(x, cap):
        return cap >= top or (x in ut and ut[x] <= cap)

    dom = {(a.w, a.l) for a in holding if isinstance(a, AG)}
    for a in holding:
        if isinstance(a, NL) and not a.G and not a.O and len(a.W) == 1:
            (x,) = a.W
            if x in iq and cap_ok(x, a.cap_map[x]):
                dom.add((a.w, a.l))

    nls = [a for a in holding if isinstance(a, NL) and len(a.W) == 1
           and all(cap_ok(x, v) for x, v in a.caps)
           and all((a.w, o) in dom for o in a.O)
           and all((g, a.l) in dom for g in a.G - a.W)]

    winners = set(plan.reported_winners)
    for pair in itertools.combinations(election.ids, 2):
        p = set(pair)
        if p == winners:
            continue
        if iq - p:
            continue
        if any((g, x) in dom for x in p for g in election.ids if g not in p):
            continue
        if any(a.W | {a.l} == p and a.w not in p for a in nls):
            continue
        return False
    return True
