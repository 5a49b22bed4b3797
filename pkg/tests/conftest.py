from pathlib import Path

import pytest

from stv_rla.ballot_model import Election, load_election

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def example1() -> Election:
    return load_election(DATA / "example1.ballots")


@pytest.fixture(scope="session")
def example2() -> Election:
    return load_election(DATA / "example2.ballots")


def ids(election, *names):
    return [election.id_of(n) for n in names]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
