"""The four assertion types, their truth on a ballot set, and their assorters.

Assertions are checked in their audited form: the quota ``Q`` is replaced
by ``|B|/(S+1)`` so that every assertion is linear in the ballots. For IQ
the two forms agree exactly; for UT the audited form is slightly stricter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Union

from . import bounds
from .ballot_model import Election, Ranking
from .bounds import InvalidParameter


@dataclass(frozen=True)
class IQ:
    """``c`` has a quota on first preferences."""
    c: int


@dataclass(frozen=True)
class UT:
    """``c``'s transfer value is below ``cap`` (``c`` seated on first preferences)."""
    c: int
    cap: Fraction


@dataclass(frozen=True)
class AG:
    """``w``'s tally is always greater than ``l``'s."""
    w: int
    l: int


@dataclass(frozen=True, init=False)
class NL:
    """``w`` never loses to ``l``, given seated set ``W`` with transfer caps,
    candidates ``G`` always ahead of ``l``, and ``O`` always behind ``w``."""
    w: int
    l: int
    W: frozenset
    caps: tuple  # sorted ((candidate, Fraction), ...)
    G: frozenset
    O: frozenset

    def __init__(self, w, l, W, caps: Mapping[int, Fraction], G=(), O=()):
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "W", frozenset(W))
        object.__setattr__(self, "caps", tuple(sorted((k, Fraction(v)) for k, v in caps.items())))
        object.__setattr__(self, "G", frozenset(G))
        object.__setattr__(self, "O", frozenset(O))

    @property
    def cap_map(self) -> dict[int, Fraction]:
        return dict(self.caps)


Assertion = Union[IQ, UT, AG, NL]


def _check(a: Assertion, e: Election):
    n = len(e.candidates)
    refs = {IQ: lambda: [a.c], UT: lambda: [a.c], AG: lambda: [a.w, a.l],
            NL: lambda: [a.w, a.l, *a.W, *a.G, *a.O, *a.cap_map]}[type(a)]()
    if any(not 0 <= x < n for x in refs):
        raise InvalidParameter(f"{a} refers to an unknown candidate")
    if isinstance(a, AG) and a.w == a.l:
        raise InvalidParameter("AG needs two distinct candidates")
    if isinstance(a, UT) and not 0 <= a.cap < 1:
        raise InvalidParameter(f"UT cap must lie in [0, 1), got {a.cap}")
    if isinstance(a, NL):
        if a.w == a.l or a.w in a.W or a.l in a.W:
            raise InvalidParameter("NL needs distinct w, l outside W")
        if a.w in a.O:
            raise InvalidParameter("NL: w cannot be in O")
        if set(a.cap_map) != set(a.W):
            raise InvalidParameter("NL caps must cover exactly W")


def evaluate(a: Assertion, e: Election) -> bool:
    """Whether ``a`` holds on ``e``'s ballots (audited form)."""
    _check(a, e)
    B, S, N = e.ballots, e.seats, e.total_ballots
    if isinstance(a, IQ):
        return bounds.lower_basic(a.c, B) * (S + 1) > N
    if isinstance(a, UT):
        return bounds.lower_basic(a.c, B) * (S + 1) * (1 - a.cap) < N
    if isinstance(a, AG):
        return bounds.lower_basic(a.w, B) > bounds.upper_comp(a.l, a.w, B)
    return (bounds.lower_elim(a.w, a.O, B)
            > bounds.upper_complex(a.l, a.w, a.W, a.cap_map, a.G, B))


def holds_quota_form(a: Assertion, e: Election) -> bool:
    """IQ and UT checked against the quota itself rather than ``|B|/(S+1)``."""
    if isinstance(a, IQ):
        return bounds.lower_basic(a.c, e.ballots) >= e.quota
    if isinstance(a, UT):
        return bounds.lower_basic(a.c, e.ballots) * (1 - a.cap) < e.quota
    return evaluate(a, e)


@dataclass(frozen=True)
class LinearAssertion:
    """Per-ballot coefficient ``f``: the assertion holds iff the sum of ``f``
    over all ballots is positive. ``lo``/``hi`` bound ``f`` over every
    possible ranking, not just the ones cast."""
    f: Callable[[Ranking], Fraction]
    lo: Fraction
    hi: Fraction

    def total(self, e: Election) -> Fraction:
        return sum((k * self.f(r) for r, k in e.ballots), Fraction(0))


def _range(a: Assertion, seats: int) -> tuple[Fraction, Fraction]:
    """Smallest and largest value of the per-ballot coefficient."""
    share = Fraction(1, seats + 1)
    if isinstance(a, IQ):
        return -share, 1 - share
    if isinstance(a, UT):
        top = share / (1 - a.cap)
        return top - 1, top
    return Fraction(-1), Fraction(1)


def to_linear(a: Assertion, e: Election) -> LinearAssertion:
    _check(a, e)
    S = e.seats
    share = Fraction(1, S + 1)
    lo, hi = _range(a, S)
    if isinstance(a, IQ):
        c = a.c
        return LinearAssertion(lambda r: (1 if r and r[0] == c else 0) - share, lo, hi)
    if isinstance(a, UT):
        c, scale = a.c, 1 / (1 - a.cap)
        return LinearAssertion(lambda r: scale * share - (1 if r and r[0] == c else 0), lo, hi)
    if isinstance(a, AG):
        w, l = a.w, a.l

        def f_ag(r):
            return (1 if r and r[0] == w else 0) - (1 if bounds._before(r, l, w) else 0)

        return LinearAssertion(f_ag, lo, hi)

    w, l, W, caps, G, O = a.w, a.l, a.W, a.cap_map, a.G, a.O

    def f_nl(r):
        gain = 0
        for x in r:
            if x not in O:
                gain = 1 if x == w else 0
                break
        return gain - Fraction(bounds.upper_complex_score(l, w, W, caps, G, r))

    return LinearAssertion(f_nl, lo, hi)


class DegenerateAssertion(ValueError):
    """The linear form is never negative, so no assorter can be built."""


@dataclass(frozen=True)
class Assorter:
    """Nonnegative per-ballot score; the assertion holds iff its mean > 1/2."""
    linear: LinearAssertion

    @property
    def upper_bound(self) -> Fraction:
        lo, hi = self.linear.lo, self.linear.hi
        return (hi - lo) / (-2 * lo)

    def score(self, ranking: Ranking) -> Fraction:
        lo = self.linear.lo
        return (self.linear.f(ranking) - lo) / (-2 * lo)

    def mean(self, e: Election) -> Fraction:
        return sum((k * self.score(r) for r, k in e.ballots), Fraction(0)) / e.total_ballots


def to_assorter(linear: LinearAssertion) -> Assorter:
    if linear.lo >= 0:
        raise DegenerateAssertion("coefficient is never negative; nothing to audit")
    return Assorter(linear)


@dataclass(frozen=True)
class AssertionReport:
    assertion: Assertion
    holds: bool
    mean: Fraction
    margin: Fraction
    upper_bound: Fraction
    asn: float

    @property
    def auditable(self) -> bool:
        return self.holds and math.isfinite(self.asn)


def linear_total(a: Assertion, e: Election) -> Fraction:
    """Sum of the linear coefficient over all ballots, computed from the
    tally bounds rather than ballot by ballot."""
    _check(a, e)
    B, N = e.ballots, e.total_ballots
    share = Fraction(1, e.seats + 1)
    if isinstance(a, IQ):
        return bounds.lower_basic(a.c, B) - share * N
    if isinstance(a, UT):
        return share * N / (1 - a.cap) - bounds.lower_basic(a.c, B)
    if isinstance(a, AG):
        return Fraction(bounds.lower_basic(a.w, B) - bounds.upper_comp(a.l, a.w, B))
    return (bounds.lower_elim(a.w, a.O, B)
            - bounds.upper_complex(a.l, a.w, a.W, a.cap_map, a.G, B))


def report(a: Assertion, e: Election, risk_limit: float = 0.1, error_rate: float = 0.002,
           asn_mode: str = "montecarlo", total: Fraction | None = None) -> AssertionReport:
    """Evaluate ``a``, build its assorter and estimate its sample size.

    ``total`` may carry an already computed :func:`linear_total`.
    """
    from .audit_engine import AsnQuery, estimate_asn

    if not 0 < risk_limit < 1:
        raise InvalidParameter(f"risk limit must lie in (0, 1), got {risk_limit}")
    if not 0 <= error_rate < 1:
        raise InvalidParameter(f"error rate must lie in [0, 1), got {error_rate}")
    lo, hi = _range(a, e.seats)
    if lo >= 0:
        raise DegenerateAssertion("coefficient is never negative; nothing to audit")
    upper = (hi - lo) / (-2 * lo)
    if total is None:
        total = linear_total(a, e)
    # mean of (f - lo) / (-2 lo) over N ballots
    mean = Fraction(1, 2) + total / (-2 * lo * e.total_ballots)
    margin = 2 * mean - 1
    holds = total > 0
    if holds:
        asn = estimate_asn(AsnQuery(margin, upper, risk_limit, error_rate, e.total_ballots),
                           mode=asn_mode)
    else:
        asn = math.inf
    return AssertionReport(a, holds, mean, margin, upper, asn)


# -- JSON export ---------------------------------------------------------------

def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s) -> Fraction:
    return Fraction(s) if isinstance(s, str) else Fraction(s).limit_denominator(10**9)


def asn_to_json(asn: float):
    if math.isinf(asn):
        return "+inf"
    return asn


def asn_from_json(value) -> float:
    return math.inf if value in ("+inf", "inf", None) else float(value)


def assertion_to_json(rep: AssertionReport | Assertion, names) -> dict:
    a = rep.assertion if isinstance(rep, AssertionReport) else rep
    doc = {"type": type(a).__name__, "winner": None, "loser": None,
           "W": [], "caps": {}, "G": [], "O": []}
    if isinstance(a, IQ):
        doc["winner"] = names[a.c]
    elif isinstance(a, UT):
        doc["winner"] = names[a.c]
        doc["caps"] = {names[a.c]: frac_str(a.cap)}
    elif isinstance(a, AG):
        doc["winner"], doc["loser"] = names[a.w], names[a.l]
    else:
        doc.update(winner=names[a.w], loser=names[a.l],
                   W=[names[x] for x in sorted(a.W)],
                   caps={names[x]: frac_str(v) for x, v in a.caps},
                   G=[names[x] for x in sorted(a.G)],
                   O=[names[x] for x in sorted(a.O)])
    if isinstance(rep, AssertionReport):
        doc.update(holds=rep.holds, mean=frac_str(rep.mean), margin=frac_str(rep.margin),
                   asn=asn_to_json(rep.asn))
    return doc


def assertion_from_json(doc: dict, names) -> Assertion:
    index = {n: i for i, n in enumerate(names)}

    def cid(n):
        try:
            return index[n]
        except KeyError:
            raise InvalidParameter(f"unknown candidate {n!r} in assertion") from None

    kind = doc["type"]
    if kind == "IQ":
        return IQ(cid(doc["winner"]))
    if kind == "UT":
        (cap,) = doc["caps"].values()
        return UT(cid(doc["winner"]), parse_frac(cap))
    if kind == "AG":
        return AG(cid(doc["winner"]), cid(doc["loser"]))
    if kind == "NL":
        return NL(cid(doc["winner"]), cid(doc["loser"]), [cid(x) for x in doc["W"]],
                  {cid(k): parse_frac(v) for k, v in doc["caps"].items()},
                  [cid(x) for x in doc["G"]], [cid(x) for x in doc["O"]])
    raise InvalidParameter(f"unknown assertion type {kind!r}")


def describe(a: Assertion, names) -> str:
    if isinstance(a, IQ):
        return f"IQ({names[a.c]})"
    if isinstance(a, UT):
        return f"UT({names[a.c]}, {float(a.cap):.4f})"
    if isinstance(a, AG):
        return f"AG({names[a.w]}, {names[a.l]})"

    def s(xs):
        return "{" + ",".join(names[x] for x in sorted(xs)) + "}"

    caps = ",".join(f"{names[k]}:{float(v):.4f}" for k, v in a.caps)
    return f"NL({names[a.w]}, {names[a.l]}, {s(a.W)}, {{{caps}}}, {s(a.G)}, {s(a.O)})"
