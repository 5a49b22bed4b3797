"""STV counting with unweighted Gregory surplus transfers, in exact arithmetic."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .ballot_model import Election, Ranking


class ActionKind(enum.Enum):
    ELECT_ON_QUOTA = "elect"
    ELIMINATE = "eliminate"
    ELECT_REMAINING = "elect-remaining"


@dataclass(frozen=True)
class RoundAction:
    kind: ActionKind
    candidate: int
    transfer_value: Fraction | None = None
    surplus_value: Fraction | None = None
    pile_size: int | None = None


@dataclass(frozen=True)
class Round:
    """Tallies of the eligible candidates at the start of a round, and what
    the round then did. ``exhausted`` is the value lost so far."""

    tallies: dict[int, Fraction]
    actions: tuple[RoundAction, ...]
    exhausted: Fraction


@dataclass(frozen=True)
class TabulationRecord:
    rounds: tuple[Round, ...]
    seated: tuple[int, ...]
    exhausted_value: Fraction
    tie_occurred: bool
    quota: int
    seats: int

    @property
    def winners(self) -> frozenset[int]:
        return frozenset(self.seated)

    def transfer_values(self) -> dict[int, Fraction]:
        """Transfer value of every candidate seated on a quota."""
        return {a.candidate: a.transfer_value
                for r in self.rounds for a in r.actions
                if a.kind is ActionKind.ELECT_ON_QUOTA}

    def quota_seated(self) -> list[int]:
        return [a.candidate for r in self.rounds for a in r.actions
                if a.kind is ActionKind.ELECT_ON_QUOTA]


def max_transfer_value(seats: int) -> Fraction:
    """Largest possible unweighted Gregory transfer value, ``S/(S+1)``."""
    if seats < 1:
        raise ValueError(f"seats must be positive, got {seats}")
    return Fraction(seats, seats + 1)


def tabulate(election: Election) -> TabulationRecord:
    """Count an election.

    Every candidate at or above quota is seated in the same round and their
    piles are passed on, largest tally first, at the Gregory transfer value.
    Otherwise the lowest candidate is eliminated (ties go against the lowest
    id) and their pile passes on at current values. Counting stops when the
    seats are filled or the eligible candidates exactly fill what is left.
    """
    quota, seats = election.quota, election.seats
    one = Fraction(1)
    # pile entries: [ranking, count, value]
    piles: dict[int, list[list]] = {c: [] for c in election.ids}
    exhausted = Fraction(0)
    for ranking, count in election.ballots:
        if ranking:
            piles[ranking[0]].append([ranking, count, one])
        else:
            exhausted += count

    eligible = set(election.ids)
    seated: list[int] = []
    rounds: list[Round] = []
    tie = False

    def tally(c):
        return sum((count * value for _, count, value in piles[c]), Fraction(0))

    def distribute(pile, value=None):
        nonlocal exhausted
        for ranking, count, v in pile:
            v = v if value is None else value
            nxt = _next_eligible(ranking, eligible)
            if nxt is None:
                exhausted += count * v
            else:
                piles[nxt].append([ranking, count, v])

    while len(seated) < seats:
        tallies = {c: tally(c) for c in sorted(eligible)}
        start_exhausted = exhausted
        remaining = seats - len(seated)
        if len(eligible) <= remaining:
            order = sorted(eligible, key=lambda c: (-tallies[c], c))
            actions = tuple(RoundAction(ActionKind.ELECT_REMAINING, c) for c in order)
            seated.extend(order)
            eligible.clear()
            rounds.append(Round(tallies, actions, start_exhausted))
            break

        reached = sorted((c for c in eligible if tallies[c] >= quota),
                         key=lambda c: (-tallies[c], c))[:remaining]
        actions = []
        if reached:
            for c in reached:
                eligible.discard(c)
                seated.append(c)
            for c in reached:
                pile = piles[c]
                size = sum(count for _, count, _ in pile)
                surplus = tallies[c] - quota
                tv = surplus / size
                actions.append(RoundAction(ActionKind.ELECT_ON_QUOTA, c, tv, surplus, size))
                if len(seated) < seats:
                    piles[c] = []
                    distribute(pile, tv)
        else:
            low = min(tallies.values())
            lowest = [c for c in sorted(eligible) if tallies[c] == low]
            tie = tie or len(lowest) > 1
            loser = lowest[0]
            eligible.discard(loser)
            actions.append(RoundAction(ActionKind.ELIMINATE, loser))
            pile, piles[loser] = piles[loser], []
            distribute(pile)
        rounds.append(Round(tallies, tuple(actions), start_exhausted))

    return TabulationRecord(tuple(rounds), tuple(seated), exhausted, tie, quota, seats)


def _next_eligible(ranking: Ranking, eligible) -> int | None:
    for c in ranking:
        if c in eligible:
            return c
    return None


def render_table(record: TabulationRecord, election: Election) -> str:
    """Round-by-round table; values rounded to whole votes, transfer values
    to four decimals."""
    names = election.candidates
    header = ["Candidate"] + [f"Round {i + 1}" for i in range(len(record.rounds))]
    acts = [""]
    tvs = [""]
    filled = 0
    for r in record.rounds:
        labels = []
        tv = []
        filled += sum(a.kind is not ActionKind.ELIMINATE for a in r.actions)
        for a in r.actions:
            verb = "Eliminate" if a.kind is ActionKind.ELIMINATE else "Elect"
            labels.append(f"{verb} {names[a.candidate]}")
            # only shown when a surplus was actually passed on
            if a.transfer_value is not None and filled < record.seats:
                tv.append(f"tv={float(a.transfer_value):.4f}")
        acts.append(", ".join(labels))
        tvs.append(", ".join(tv))
    rows = [header, acts, tvs]
    for c in election.ids:
        row = [names[c]]
        for r in record.rounds:
            row.append(f"{round(r.tallies[c]):,}" if c in r.tallies else "---")
        rows.append(row)
    rows.append(["Total"] + [f"{round(sum(r.tallies.values())):,}" for r in record.rounds])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    title = (f"Seats: {election.seats}  Ballots: {election.total_ballots:,}  "
             f"Quota: {election.quota:,}")
    lines = [title]
    for row in rows:
        lines.append("  ".join(cell.rjust(w) if i else cell.ljust(w)
                               for i, (cell, w) in enumerate(zip(row, widths))).rstrip())
    lines.append("Winners: " + ", ".join(names[c] for c in record.seated))
    return "\n".join(lines)


def record_to_json(record: TabulationRecord, election: Election) -> dict:
    names = election.candidates

    def frac(x):
        return None if x is None else {"exact": f"{x.numerator}/{x.denominator}",
                                       "value": round(float(x), 4)}

    return {
        "seats": election.seats,
        "totalBallots": election.total_ballots,
        "quota": election.quota,
        "rounds": [{
            "tallies": {names[c]: frac(v) for c, v in r.tallies.items()},
            "exhausted": frac(r.exhausted),
            "actions": [{
                "kind": a.kind.value,
                "candidate": names[a.candidate],
                "transferValue": frac(a.transfer_value),
                "surplus": frac(a.surplus_value),
                "pileSize": a.pile_size,
            } for a in r.actions],
        } for r in record.rounds],
        "winners": [names[c] for c in record.seated],
        "exhaustedValue": frac(record.exhausted_value),
        "tieOccurred": record.tie_occurred,
    }
