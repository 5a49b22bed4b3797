import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from stv_rla.assertions import (AG, IQ, NL, UT, DegenerateAssertion, assertion_from_json,
                                assertion_to_json, describe, evaluate, holds_quota_form,
                                linear_total, report, to_assorter, to_linear)
from stv_rla.audit_engine import AsnQuery, estimate_asn
from stv_rla.ballot_model import Election
from stv_rla.bounds import InvalidParameter

from conftest import ids
from gen import random_assertion, random_election
import oracles


def test_example1_evaluations(example1):
    c1, c2, c3, c4 = ids(example1, "c1", "c2", "c3", "c4")
    assert evaluate(IQ(c1), example1)
    assert not evaluate(IQ(c3), example1)
    assert evaluate(AG(c1, c2), example1)
    assert evaluate(AG(c4, c2), example1)
    assert evaluate(AG(c3, c4), example1)
    assert not evaluate(AG(c1, c4), example1)


def test_example2_evaluations(example2):
    c1, c2, c4 = ids(example2, "c1", "c2", "c4")
    assert evaluate(NL(c4, c2, {c1}, {c1: Fraction(3, 10)}), example2)
    assert not evaluate(AG(c4, c2), example2)
    # the trivial cap is not enough
    assert not evaluate(NL(c4, c2, {c1}, {c1: Fraction(2, 3)}), example2)


def test_linear_sums(example1, example2):
    c1, c2 = ids(example1, "c1", "c2")
    assert to_linear(IQ(c1), example1).total(example1) == 9001 - Fraction(21001, 3)
    assert to_linear(IQ(c1), example1).total(example1) == 2000 + Fraction(2, 3)
    assert to_linear(AG(c1, c2), example1).total(example1) == 9001 - 3000
    e1, e2, e4 = ids(example2, "c1", "c2", "c4")
    nl = NL(e4, e2, {e1}, {e1: Fraction(3, 10)})
    lin = to_linear(nl, example2)
    assert lin.total(example2) == 5
    assert (lin.lo, lin.hi) == (-1, 1)


def test_ag_assorter_example1(example1):
    c1, c2 = ids(example1, "c1", "c2")
    lin = to_linear(AG(c1, c2), example1)
    asr = to_assorter(lin)
    assert {asr.score(r) for r, _ in example1.ballots} == {1, Fraction(1, 2), 0}
    assert asr.mean(example1) == (Fraction(6001, 21001) + 1) / 2


def test_plurality_style_scores():
    e = Election.create(["w", "l", "x"], [((0,), 3), ((1,), 2), ((2,), 1)])
    asr = to_assorter(to_linear(AG(0, 1), e))
    assert [asr.score(r) for r in [(0,), (1,), (2,)]] == [1, 0, Fraction(1, 2)]


def test_neutral_ballots_give_exactly_half():
    e = Election.create(["w", "l", "x"], [((2,), 5)])
    asr = to_assorter(to_linear(AG(0, 1), e))
    assert asr.mean(e) == Fraction(1, 2)
    assert not evaluate(AG(0, 1), e)


def test_ut_at_two_thirds_is_degenerate():
    e = Election.create(["a", "b"], [((0,), 5)])
    with pytest.raises(DegenerateAssertion):
        to_assorter(to_linear(UT(0, Fraction(2, 3)), e))


def test_quota_form_versus_audited_form():
    # 3 ballots, Q = 2: two first preferences is a quota both ways
    e = Election.create(["a", "b"], [((0,), 2), ((1,), 1)])
    assert evaluate(IQ(0), e) and holds_quota_form(IQ(0), e)
    # 12 ballots, Q = 5, T = 8, cap 0.4: 8*0.6 = 4.8 < 5 but 8*3*0.6 = 14.4 > 12
    e = Election.create(["a", "b"], [((0,), 8), ((1,), 4)])
    cap = Fraction(2, 5)
    assert holds_quota_form(UT(0, cap), e)
    assert not evaluate(UT(0, cap), e)


def test_report_false_assertion(example1):
    c1, c4 = ids(example1, "c1", "c4")
    rep = report(AG(c1, c4), example1, error_rate=0)
    assert not rep.holds and math.isinf(rep.asn) and not rep.auditable
    assert rep.margin <= 0


def test_report_matches_estimate(example1):
    c1, c2 = ids(example1, "c1", "c2")
    rep = report(AG(c1, c2), example1, risk_limit=0.1, error_rate=0)
    assert rep.margin == Fraction(6001, 21001)
    assert rep.upper_bound == 1
    assert rep.asn == estimate_asn(AsnQuery(rep.margin, rep.upper_bound, 0.1, 0, 21001))


def test_report_iq_margin_from_ballots(example1):
    (c1,) = ids(example1, "c1")
    rep = report(IQ(c1), example1, error_rate=0)
    # brute force over all 21001 physical ballots
    asr = to_assorter(to_linear(IQ(c1), example1))
    mean = sum((asr.score(r) for r in example1.expand()), Fraction(0)) / 21001
    assert rep.mean == mean
    assert rep.margin == 2 * mean - 1 == Fraction(6002, 21001)
    assert rep.upper_bound == Fraction(3, 2)


@pytest.mark.parametrize("kw", [{"risk_limit": 0}, {"risk_limit": 1}, {"error_rate": 1},
                                {"error_rate": -0.1}])
def test_report_rejects_bad_parameters(example1, kw):
    with pytest.raises(InvalidParameter):
        report(IQ(0), example1, **kw)


@pytest.mark.parametrize("a", [
    IQ(7), AG(1, 1), UT(0, Fraction(1)), NL(0, 0, set(), {}), NL(0, 1, {0}, {0: 0}),
    NL(0, 1, {2}, {}), NL(0, 1, set(), {}, O={0}),
])
def test_malformed_assertions(example1, a):
    with pytest.raises(InvalidParameter):
        evaluate(a, example1)


def test_json_round_trip_and_description(example2):
    names = example2.candidates
    c1, c2, c3, c4 = ids(example2, "c1", "c2", "c3", "c4")
    items = [IQ(c1), UT(c1, Fraction(3, 10)), AG(c4, c3),
             NL(c4, c2, {c1}, {c1: Fraction(3, 10)}, {c3}, {c3})]
    for a in items:
        assert assertion_from_json(assertion_to_json(a, names), names) == a
    doc = assertion_to_json(report(items[3], example2, error_rate=0), names)
    assert doc["holds"] is True and doc["margin"] == "3/20"
    assert describe(items[3], names) == "NL(c4, c2, {c1}, {c1:0.3000}, {c3}, {c3})"
    with pytest.raises(InvalidParameter):
        assertion_from_json({"type": "IQ", "winner": "zz"}, names)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_evaluate_matches_oracle(seed):
    rng = random.Random(seed)
    e = random_election(rng, max_ballots=60)
    a = random_assertion(rng, len(e.candidates))
    assert evaluate(a, e) == oracles.holds(a, len(e.candidates), e.expand())


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bounds_route_matches_ballot_route(seed):
    rng = random.Random(seed)
    e = random_election(rng, max_ballots=60)
    a = random_assertion(rng, len(e.candidates))
    lin = to_linear(a, e)
    assert linear_total(a, e) == lin.total(e)
    assert (lin.total(e) > 0) == evaluate(a, e)
    assert all(lin.lo <= lin.f(r) <= lin.hi for r in oracles.all_rankings(len(e.candidates)))
