"""Lower and upper bounds on candidate tallies over a ballot multiset.

All functions take ``ballots`` as an iterable of ``(ranking, count)``
pairs, e.g. ``Election.ballots``, and return ints or Fractions.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

from .ballot_model import Ranking

Ballots = Iterable[tuple[Ranking, int]]


class InvalidParameter(ValueError):
    pass


def _before(ranking: Ranking, a: int, b: int) -> bool:
    """True if ``a`` is ranked and comes ahead of ``b`` (or ``b`` is unranked)."""
    for x in ranking:
        if x == a:
            return True
        if x == b:
            return False
    return False


def lower_basic(c: int, ballots: Ballots) -> int:
    """First preference count of ``c``."""
    return sum(k for r, k in ballots if r and r[0] == c)


def upper_basic(c: int, ballots: Ballots) -> int:
    """Number of ballots that mention ``c`` at all."""
    return sum(k for r, k in ballots if c in r)


def upper_comp(c: int, other: int, ballots: Ballots) -> int:
    """Ballots on which ``c`` precedes ``other``, counting those without ``other``."""
    if c == other:
        raise InvalidParameter("upper_comp needs two distinct candidates")
    return sum(k for r, k in ballots if _before(r, c, other))


def lower_elim(w: int, excluded, ballots: Ballots) -> int:
    """Ballots whose first preference, once ``excluded`` is struck out, is ``w``.

    Only a lower bound on ``w``'s tally when ``w`` is always ahead of every
    excluded candidate; checking that is up to the caller.
    """
    if w in excluded:
        raise InvalidParameter("w must not be among the excluded candidates")
    total = 0
    for r, k in ballots:
        for x in r:
            if x not in excluded:
                if x == w:
                    total += k
                break
    return total


def _complex_key(c: int, b: int, seated, dominators, ranking: Ranking):
    """Classify one ballot for the ``c`` upper bound.

    Returns None when the ballot contributes nothing, ``()`` when it may
    contribute a full vote, and otherwise the seated candidates ranked ahead
    of ``c`` (the ballot then contributes at most the largest of their caps).
    """
    pos = {x: i for i, x in enumerate(ranking)}
    pc = pos.get(c)
    if pc is None:
        return None
    for g in dominators:
        if g not in seated and pos.get(g, pc) < pc:
            return None
    if pos.get(b, pc) < pc:
        return None
    if ranking[0] in seated:
        return frozenset(w for w in ranking[:pc] if w in seated)
    return ()


def upper_complex_score(c: int, b: int, seated, caps: Mapping[int, Fraction],
                        dominators, ranking: Ranking):
    """Largest value one ballot can contribute to ``c``'s tally.

    Returns 0, 1 or the transfer cap of the highest-capped seated candidate
    ranked ahead of ``c``.
    """
    key = _complex_key(c, b, seated, dominators, ranking)
    if key is None:
        return 0
    if key == ():
        return 1
    return max(caps[w] for w in key)


def upper_complex_counts(c: int, b: int, seated, dominators, ballots: Ballots) -> dict:
    """Ballot counts behind :func:`upper_complex`, before any cap is applied.

    Maps ``()`` to the number of ballots worth a full vote and each nonempty
    frozenset of seated candidates to the number of ballots capped by them.
    """
    counts: dict = {}
    for r, k in ballots:
        key = _complex_key(c, b, seated, dominators, r)
        if key is not None:
            counts[key] = counts.get(key, 0) + k
    return counts


def apply_caps(counts: Mapping, caps: Mapping[int, Fraction]) -> Fraction:
    """Turn :func:`upper_complex_counts` into the bound for given caps."""
    total = Fraction(0)
    for key, k in counts.items():
        total += k if key == () else k * max(Fraction(caps[w]) for w in key)
    return total


def _check_complex(c, b, seated, caps):
    if c in seated or b in seated:
        raise InvalidParameter("c and b must not be in the seated set")
    if b == c:
        raise InvalidParameter("c and b must differ")
    missing = [w for w in seated if w not in caps]
    if missing:
        raise InvalidParameter(f"no transfer cap given for {missing}")


def upper_complex(c: int, b: int, seated, caps: Mapping[int, Fraction], dominators,
                  ballots: Ballots) -> Fraction:
    """Upper bound on ``c``'s tally while ``b`` is still eligible.

    Parameters
    ----------
    c, b : int
        The candidate being bounded, and the candidate it is compared with.
    seated : set of int
        Candidates assumed to end up seated; ``c`` and ``b`` are not in it.
    caps : mapping
        Upper bound on the transfer value of each seated candidate.
    dominators : set of int
        Candidates known to always lead ``c``. Members of ``seated`` are
        ignored.
    ballots : iterable of (ranking, count)
    """
    _check_complex(c, b, seated, caps)
    return apply_caps(upper_complex_counts(c, b, seated, dominators, ballots), caps)
