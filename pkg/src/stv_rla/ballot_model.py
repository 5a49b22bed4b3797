"""Candidates, ballots and elections, plus the ballot file formats.

Candidates are referred to by dense integer ids ``0..n-1``; names only
matter at the file boundary. A ballot is a tuple of ids, most preferred
first. Ballots are kept aggregated as ``(ranking, count)`` pairs.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

Ranking = tuple[int, ...]


class ElectionError(ValueError):
    """Raised for elections that violate the model's invariants."""


class ParseError(ElectionError):
    """Raised when a ballot file cannot be parsed.

    ``line`` is the 1-based line number of the offending line, or None when
    the problem is not tied to a single line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def droop_quota(total_ballots: int, seats: int) -> int:
    """Return the Droop quota ``floor(total / (seats + 1)) + 1``."""
    if seats < 1:
        raise ElectionError(f"seats must be positive, got {seats}")
    if total_ballots < 0:
        raise ElectionError(f"total_ballots must be nonnegative, got {total_ballots}")
    return total_ballots // (seats + 1) + 1


def project(prefs: Sequence[int], keep) -> Ranking:
    """Largest subsequence of ``prefs`` made only of members of ``keep``."""
    return tuple(c for c in prefs if c in keep)


def first(prefs: Sequence[int]):
    """First entry of a ranking, or None for an empty one."""
    return prefs[0] if prefs else None


@dataclass(frozen=True)
class Election:
    """An STV election: candidate names, aggregated ballots and seats.

    Use :meth:`create` to build one from possibly repeated rankings; the
    constructor expects already merged, validated data.
    """

    candidates: tuple[str, ...]
    ballots: tuple[tuple[Ranking, int], ...]
    seats: int = 2
    quota: int = field(init=False)
    total_ballots: int = field(init=False)

    def __post_init__(self):
        names = self.candidates
        if not names:
            raise ElectionError("an election needs at least one candidate")
        if any(not n or not n.strip() for n in names):
            raise ElectionError("candidate names must be non-empty")
        if len(set(names)) != len(names):
            raise ElectionError("candidate names must be unique")
        if self.seats < 1:
            raise ElectionError(f"seats must be positive, got {self.seats}")
        if len(names) < self.seats:
            raise ElectionError(
                f"{len(names)} candidates cannot fill {self.seats} seats")
        seen = set()
        total = 0
        for ranking, count in self.ballots:
            if count <= 0:
                raise ElectionError(f"ballot count must be positive, got {count}")
            if len(set(ranking)) != len(ranking):
                raise ElectionError(f"duplicate candidate in ranking {ranking}")
            if any(not 0 <= c < len(names) for c in ranking):
                raise ElectionError(f"unknown candidate id in ranking {ranking}")
            if ranking in seen:
                raise ElectionError(f"ranking {ranking} listed twice; use Election.create")
            seen.add(ranking)
            total += count
        if total < 1:
            raise ElectionError("an election needs at least one ballot")
        object.__setattr__(self, "total_ballots", total)
        object.__setattr__(self, "quota", droop_quota(total, self.seats))

    @classmethod
    def create(cls, candidates: Sequence[str], ballots: Iterable[tuple[Sequence[int], int]],
               seats: int = 2) -> "Election":
        """Build an election, merging repeated rankings by summing counts."""
        merged: dict[Ranking, int] = {}
        for ranking, count in ballots:
            ranking = tuple(ranking)
            if count <= 0:
                raise ElectionError(f"ballot count must be positive, got {count}")
            merged[ranking] = merged.get(ranking, 0) + count
        return cls(tuple(candidates), tuple(merged.items()), seats)

    @classmethod
    def from_names(cls, candidates: Sequence[str],
                   ballots: Iterable[tuple[Sequence[str], int]], seats: int = 2) -> "Election":
        index = {name: i for i, name in enumerate(candidates)}
        return cls.create(candidates, [(tuple(index[n] for n in r), k) for r, k in ballots], seats)

    @classmethod
    def from_records(cls, candidates: Sequence[str], records: Iterable[Sequence[int]],
                     seats: int = 2) -> "Election":
        """Aggregate one-ranking-per-ballot records into an election."""
        counts = Counter(tuple(r) for r in records)
        return cls.create(candidates, counts.items(), seats)

    @property
    def ids(self) -> range:
        return range(len(self.candidates))

    def name(self, c: int) -> str:
        return self.candidates[c]

    def id_of(self, name: str) -> int:
        try:
            return self.candidates.index(name)
        except ValueError:
            raise ElectionError(f"unknown candidate {name!r}") from None

    def expand(self) -> list[Ranking]:
        """One ranking per physical ballot, in aggregate order."""
        out: list[Ranking] = []
        for ranking, count in self.ballots:
            out.extend([ranking] * count)
        return out

    def with_seats(self, seats: int) -> "Election":
        return Election(self.candidates, self.ballots, seats)

    def canonical(self) -> "Election":
        """Same election with its ballots in a fixed order (for comparisons)."""
        return Election(self.candidates, tuple(sorted(self.ballots)), self.seats)

    def __eq__(self, other):
        if not isinstance(other, Election):
            return NotImplemented
        return (self.candidates == other.candidates and self.seats == other.seats
                and dict(self.ballots) == dict(other.ballots))

    def __hash__(self):
        return hash((self.candidates, self.seats, frozenset(self.ballots)))


# -- text format -------------------------------------------------------------

_HEADER = re.compile(r"^\s*(candidates|seats)\s*:(.*)$", re.IGNORECASE)
_BALLOT = re.compile(r"^\s*([^:>]*?)\s*:(.*)$")


def parse_election(contents: str, seats: int | None = None, fmt: str = "text",
                   include_empty: bool = True) -> Election:
    """Parse ballot file contents into an :class:`Election`.

    Parameters
    ----------
    contents : str
        The file contents.
    seats : int, optional
        Seat count. Overrides the file's ``seats:`` header when given.
    fmt : {"text", "json"}
        Which of the two file formats ``contents`` is in.
    include_empty : bool
        Keep empty ballots. They count towards the quota but never towards
        a tally.

    Raises
    ------
    ParseError
        On malformed input, with the offending line number where one exists.
    """
    if fmt == "json":
        return _parse_json(contents, seats, include_empty)
    if fmt != "text":
        raise ValueError(f"unknown ballot format {fmt!r}")

    names: list[str] | None = None
    file_seats: int | None = None
    pending: list[tuple[int, list[str], int]] = []
    for lineno, raw in enumerate(contents.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _HEADER.match(line)
        if header:
            key, value = header.group(1).lower(), header.group(2).strip()
            if key == "candidates":
                if names is not None:
                    raise ParseError("repeated candidates header", lineno)
                names = [n.strip() for n in value.split(",")]
                if any(not n for n in names):
                    raise ParseError("empty candidate name", lineno)
                if len(set(names)) != len(names):
                    raise ParseError("duplicate candidate name in header", lineno)
            else:
                try:
                    file_seats = int(value)
                except ValueError:
                    raise ParseError(f"bad seat count {value!r}", lineno) from None
                if file_seats < 1:
                    raise ParseError(f"seat count must be positive, got {file_seats}", lineno)
            continue
        m = _BALLOT.match(line)
        if not m:
            raise ParseError(f"malformed line {raw.strip()!r}", lineno)
        try:
            count = int(m.group(1))
        except ValueError:
            raise ParseError(f"bad ballot count {m.group(1)!r}", lineno) from None
        body = m.group(2).strip()
        prefs = [p.strip() for p in body.split(">")] if body else []
        if any(not p for p in prefs):
            raise ParseError("empty preference in ranking", lineno)
        pending.append((lineno, prefs, count))

    if names is None:
        raise ParseError("missing 'candidates:' header")
    return _build(names, pending, seats if seats is not None else file_seats, include_empty)


def _parse_json(contents: str, seats: int | None, include_empty: bool) -> Election:
    try:
        doc = json.loads(contents)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict) or "candidates" not in doc or "ballots" not in doc:
        raise ParseError("JSON ballot file needs 'candidates' and 'ballots'")
    names = doc["candidates"]
    if not isinstance(names, list) or not all(isinstance(n, str) and n.strip() for n in names):
        raise ParseError("'candidates' must be a list of non-empty names")
    if len(set(names)) != len(names):
        raise ParseError("duplicate candidate name")
    pending = []
    for i, entry in enumerate(doc["ballots"]):
        try:
            ranking, count = entry["ranking"], entry["count"]
        except (TypeError, KeyError):
            raise ParseError(f"ballot entry {i} needs 'ranking' and 'count'") from None
        if not isinstance(count, int) or isinstance(count, bool):
            raise ParseError(f"ballot entry {i}: count must be an integer")
        if not isinstance(ranking, list):
            raise ParseError(f"ballot entry {i}: ranking must be a list")
        pending.append((None, ranking, count))
    file_seats = doc.get("seats")
    return _build(names, pending, seats if seats is not None else file_seats, include_empty)


def _build(names, pending, seats, include_empty) -> Election:
    if seats is None:
        seats = 2
    index = {n: i for i, n in enumerate(names)}
    rows = []
    for lineno, prefs, count in pending:
        if count <= 0:
            raise ParseError(f"ballot count must be positive, got {count}", lineno)
        ids = []
        for p in prefs:
            if p not in index:
                raise ParseError(f"unknown candidate {p!r}", lineno)
            ids.append(index[p])
        if len(set(ids)) != len(ids):
            raise ParseError(f"duplicate candidate in ranking {prefs}", lineno)
        if not ids and not include_empty:
            continue
        rows.append((ids, count))
    try:
        return Election.create(names, rows, seats)
    except ElectionError as exc:
        raise ParseError(str(exc)) from None


def load_election(path, seats: int | None = None, include_empty: bool = True) -> Election:
    """Read a ballot file, picking the format from its extension."""
    path = Path(path)
    fmt = "json" if path.suffix.lower() == ".json" else "text"
    return parse_election(path.read_text(encoding="utf-8"), seats, fmt, include_empty)


def serialize_election(election: Election, fmt: str = "text") -> str:
    """Inverse of :func:`parse_election`."""
    names = election.candidates
    if fmt == "json":
        return json.dumps({
            "candidates": list(names),
            "seats": election.seats,
            "ballots": [{"ranking": [names[c] for c in r], "count": k}
                        for r, k in election.ballots],
        }, indent=2) + "\n"
    lines = [f"candidates: {','.join(names)}", f"seats: {election.seats}"]
    for ranking, count in election.ballots:
        lines.append(f"{count} : {' > '.join(names[c] for c in ranking)}".rstrip())
    return "\n".join(lines) + "\n"
