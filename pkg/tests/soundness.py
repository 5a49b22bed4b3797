"""Machinery for the end-to-end soundness and lemma suites.

Every assertion is linear in the ballot counts: it holds on a multiset
``x`` (a count per ranking) iff ``F . x > 0`` for an integer vector ``F``
over all rankings. That lets one plan be checked against every ballot
multiset of a given size at once, and lets random walks track assertion
slack incrementally.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from stv_rla import bounds, planner
from stv_rla.assertions import AG, NL, to_linear
from stv_rla.ballot_model import Election
from stv_rla.tabulator import ActionKind, tabulate

from oracles import all_rankings

METHODS = (planner.TWO_QUOTA, planner.ONE_QUOTA, planner.GENERAL)


def names(k):
    return [f"c{i}" for i in range(k)]


def scope_size(max_k, max_n, min_k=2):
    """Number of elections with ``min_k..max_k`` candidates and 1..max_n ballots."""
    total = 0
    for k in range(min_k, max_k + 1):
        r = len(all_rankings(k))
        total += sum(math.comb(r + n - 1, n) for n in range(1, max_n + 1))
    return total


def coefficient_vector(a, e: Election, rankings) -> np.ndarray:
    """Integer ``F`` with ``F . x > 0`` iff ``a`` holds on counts ``x``."""
    f = to_linear(a, e).f
    values = [Fraction(f(r)) for r in rankings]
    scale = math.lcm(*(v.denominator for v in values))
    ints = [int(v * scale) for v in values]
    if max(map(abs, ints)) * 10**4 > 2**62:
        return np.array(ints, dtype=object)
    return np.array(ints, dtype=np.int64)


def plan_matrix(plan, e, rankings) -> np.ndarray:
    cols = [coefficient_vector(r.assertion, e, rankings) for r in plan.assertions]
    if not cols:
        return np.zeros((len(rankings), 0), dtype=np.int64)
    dtype = object if any(c.dtype == object for c in cols) else np.int64
    return np.stack(cols, axis=1).astype(dtype)


def mask(candidates) -> int:
    return sum(1 << c for c in candidates)


def election_from_counts(k, rankings, counts) -> Election:
    return Election.create(names(k), [(rankings[j], int(c)) for j, c in enumerate(counts) if c])


def produce_plans(e: Election):
    """Every auditable plan any method produces for ``e`` (closed-form ASNs)."""
    out = []
    for method in METHODS:
        plan = planner.plan_with(method, e, asn_mode="closed")
        if plan is not None and plan.auditable:
            out.append(plan)
    return out


@dataclass
class Tally:
    """Running totals for a suite, printed in the acceptance report."""
    elections: int = 0
    plans: int = 0
    checks: int = 0
    counterexamples: list = field(default_factory=list)

    def merge(self, other: "Tally"):
        self.elections += other.elections
        self.plans += other.plans
        self.checks += other.checks
        self.counterexamples += other.counterexamples


# -- end-to-end soundness ----------------------------------------------------------

class Tier:
    """All multisets of ``n`` ballots over ``k`` candidates, with their winners."""

    def __init__(self, k, n):
        self.k, self.n = k, n
        self.rankings = all_rankings(k)
        rows = list(itertools.combinations_with_replacement(range(len(self.rankings)), n))
        self.counts = np.zeros((len(rows), len(self.rankings)), dtype=np.int64)
        for i, row in enumerate(rows):
            for j in row:
                self.counts[i, j] += 1
        self.winners = np.array([mask(tabulate(self.election(i)).winners)
                                 for i in range(len(rows))])

    def __len__(self):
        return len(self.counts)

    def election(self, i) -> Election:
        return election_from_counts(self.k, self.rankings, self.counts[i])


def check_tier(tier: Tier, deadline: float) -> tuple[Tally, bool]:
    """Check every plan of every election in ``tier`` against every ballot
    multiset of the same size. Returns the tally and whether it finished."""
    t = Tally()
    winners = tier.winners
    for i in range(len(tier)):
        if time.monotonic() > deadline:
            return t, False
        e = tier.election(i)
        t.elections += 1
        for plan in produce_plans(e):
            t.plans += 1
            F = plan_matrix(plan, e, tier.rankings)
            ok = np.all(tier.counts.dot(F) > 0, axis=1)
            t.checks += int(ok.sum())
            if not ok[i]:
                t.counterexamples.append(("plan false on its own CVRs", plan.method, e))
            reported = mask(plan.reported_winners)
            for j in np.flatnonzero(ok & (winners != reported)):
                t.counterexamples.append((plan.method, e, tier.election(int(j))))
    return t, True


def adversarial_walk(plan, e: Election, rng: random.Random, steps=30, proposals=24,
                     restarts=2) -> Tally:
    """Search for a ballot multiset of the same size on which every plan
    assertion holds but the outcome differs.

    Each step moves a batch of ballots from one ranking to another. Moves
    that would falsify an assertion are rejected; among the rest the walk
    mostly picks the one that takes ballots away from reported winners and
    leaves the least assertion slack, since any counterexample has to lie
    near the boundary of the region the plan certifies.
    """
    t = Tally()
    k = len(e.candidates)
    rankings = all_rankings(k)
    index = {r: j for j, r in enumerate(rankings)}
    F = plan_matrix(plan, e, rankings)
    scale = np.maximum(np.abs(F).max(axis=0), 1)
    base = np.zeros(len(rankings), dtype=np.int64)
    for r, c in e.ballots:
        base[index[r]] = c
    reported = frozenset(plan.reported_winners)
    toward = [j for j, r in enumerate(rankings) if not r or r[0] not in reported]
    toward = np.array(toward or [0])
    nprng = np.random.default_rng(rng.getrandbits(32))
    for _ in range(restarts):
        x = base.copy()
        slack = x.dot(F)
        for _ in range(steps):
            held = np.flatnonzero(x)
            src = nprng.choice(held, proposals)
            dst = np.where(nprng.random(proposals) < 0.7,
                           nprng.choice(toward, proposals),
                           nprng.integers(0, len(rankings), proposals))
            size = 1 + (nprng.random(proposals) * np.maximum(1, x[src] // 2)).astype(np.int64)
            new = slack[None, :] + size[:, None] * (F[dst] - F[src])
            valid = (src != dst) & np.all(new > 0, axis=1)
            if not valid.any():
                break
            score = (new / scale).min(axis=1) if F.shape[1] else np.zeros(proposals)
            score = np.where(valid, score.astype(float), np.inf)
            # mostly the tightest move, sometimes any valid one
            pick = (int(np.argmin(score)) if nprng.random() < 0.8
                    else int(nprng.choice(np.flatnonzero(valid))))
            x[src[pick]] -= size[pick]
            x[dst[pick]] += size[pick]
            slack = new[pick]
            t.checks += 1
            if frozenset(tabulate(election_from_counts(k, rankings, x)).winners) != reported:
                t.counterexamples.append((plan.method, e, election_from_counts(k, rankings, x)))
                return t
    return t


def check_random(elections, deadline: float, seed=0, steps=30) -> tuple[Tally, bool]:
    rng = random.Random(seed)
    t = Tally()
    for e in elections:
        if time.monotonic() > deadline:
            return t, False
        t.elections += 1
        for plan in produce_plans(e):
            t.plans += 1
            if not all(r.holds for r in plan.assertions):
                t.counterexamples.append(("plan false on its own CVRs", plan.method, e))
            t.merge(adversarial_walk(plan, e, rng, steps=steps))
    return t, True


# -- lemma-level trajectory checks --------------------------------------------------

def _subsets(items):
    items = sorted(items)
    for n in range(len(items) + 1):
        yield from (set(c) for c in combinations(items, n))


def _eligible_rounds(record):
    return [r.tallies for r in record.rounds]


def _seated_caps(record):
    """Tightest valid cap per seated candidate: its transfer value if seated
    on a quota, otherwise 0 (its ballots never move on)."""
    caps = {c: Fraction(0) for c in record.seated}
    caps.update(record.transfer_values())
    return caps


def _elimination_order(record):
    return [a.candidate for r in record.rounds for a in r.actions
            if a.kind is ActionKind.ELIMINATE]


def check_lemmas(e: Election) -> Tally:
    """Check the four lemma-level properties on ``e``'s own count.

    * AG(w,l): w's tally exceeds l's in every round where both are
      eligible, and l is never seated without w.
    * L_elim(w,O), with AG(w,o) for all o in O: a lower bound on w's tally
      in every round where w is eligible and all of O has been eliminated,
      and all of O is gone by the time w is eliminated.
    * U_complex(c,b,W,caps,G), when the actual outcome satisfies its
      assumptions: an upper bound on c's tally while b and c are eligible.
    * NL(w,l,W,caps,G,O) with its premises: false whenever the actual
      outcome seats l and not w (with W the other seat).
    """
    t = Tally(elections=1)
    B, ids = e.ballots, list(e.ids)
    rec = tabulate(e)
    rounds = _eligible_rounds(rec)
    seated = set(rec.seated)
    order = _elimination_order(rec)
    gone = set(order)
    ag = {(w, l) for w in ids for l in ids
          if w != l and bounds.lower_basic(w, B) > bounds.upper_comp(l, w, B)}

    def bad(*what):
        t.counterexamples.append((*what, e))

    for w, l in ag:
        for tallies in rounds:
            if w in tallies and l in tallies:
                t.checks += 1
                if not tallies[w] > tallies[l]:
                    bad("AG trajectory", w, l)
        t.checks += 1
        if l in seated and w not in seated:
            bad("AG seating", w, l)

    for w in ids:
        beaten = {o for o in ids if (w, o) in ag}
        for O in _subsets(beaten):
            low = bounds.lower_elim(w, O, B)
            for tallies in rounds:
                if w in tallies and O <= gone and not any(o in tallies for o in O):
                    t.checks += 1
                    if tallies[w] < low:
                        bad("L_elim", w, O)
            if w in gone:
                t.checks += 1
                if not O <= set(order[:order.index(w)]):
                    bad("L_elim premise", w, O)

    caps_true = _seated_caps(rec)
    top = Fraction(2, 3)
    for c in ids:
        doms = {g for g in ids if (g, c) in ag}
        for b in ids:
            if b == c:
                continue
            # the only seated set meeting the bound's assumptions
            W = seated - {b, c}
            for caps in ({w: caps_true[w] for w in W}, {w: top for w in W}):
                for G in _subsets(doms):
                    up = bounds.upper_complex(c, b, W, caps, G, B)
                    for tallies in rounds:
                        if b in tallies and c in tallies:
                            t.checks += 1
                            if tallies[c] > up:
                                bad("U_complex", c, b, W, caps, G)

    for l in seated:
        W = seated - {l}
        for w in ids:
            if w in seated:
                continue
            O_pool = {o for o in ids if (w, o) in ag}
            G_pool = {g for g in ids if (g, l) in ag}
            for caps in ({x: caps_true[x] for x in W}, {x: top for x in W}):
                for G in _subsets(G_pool):
                    for O in _subsets(O_pool):
                        t.checks += 1
                        if bounds.lower_elim(w, O, B) > bounds.upper_complex(l, w, W, caps, G, B):
                            bad("NL", NL(w, l, W, caps, G, O))
    return t


def lemma_tier(k, n, deadline) -> tuple[Tally, bool]:
    t = Tally()
    for recs in itertools.combinations_with_replacement(all_rankings(k), n):
        if time.monotonic() > deadline:
            return t, False
        t.merge(check_lemmas(Election.from_records(names(k), recs)))
    return t, True
