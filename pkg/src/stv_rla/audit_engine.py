"""Sample-size estimation and simulated ballot-comparison audits.

The risk-measuring function is a betting supermartingale on the
comparison-audit transform of an assorter::

    X = (1 - omega / u) / (2 - v / u)

where ``omega`` is the overstatement (CVR score minus MVR score), ``u`` the
assorter's upper bound and ``v`` the diluted margin on the CVRs. When the
true assorter mean is at most 1/2, ``E[X] <= 1/2``, so

    T_n = prod(1 + lam * (X_i - 1/2))

is a nonnegative supermartingale under sampling with replacement, and
rejecting once ``T_n >= 1/alpha`` has risk at most ``alpha`` (Ville).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .ballot_model import Election, Ranking

# Bets are capped below 2 so one maximal overstatement (X = 0) does not
# zero the statistic for good.
MAX_BET = 1.9
DEFAULT_TRIALS = 1000
DEFAULT_SEED = 20210513


class AuditDataError(ValueError):
    pass


@dataclass(frozen=True)
class AsnQuery:
    margin: Fraction
    upper_bound: Fraction
    risk_limit: float = 0.1
    error_rate: float = 0.002
    total_ballots: int | None = None

    def __post_init__(self):
        if not 0 < self.risk_limit < 1:
            raise ValueError(f"risk limit must lie in (0, 1), got {self.risk_limit}")
        if not 0 <= self.error_rate < 1:
            raise ValueError(f"error rate must lie in [0, 1), got {self.error_rate}")
        if self.upper_bound <= 0:
            raise ValueError("assorter upper bound must be positive")


def clean_value(margin, upper_bound) -> float:
    """Transformed score of a ballot whose CVR and MVR agree."""
    return 1.0 / (2.0 - float(margin) / float(upper_bound))


def bet_size(margin, upper_bound, error_rate: float) -> float:
    """Kelly bet for a two-point model: clean ballots, and a fraction
    ``error_rate`` carrying an overstatement of half the assorter's range."""
    a = clean_value(margin, upper_bound)
    d1, d2 = a - 0.5, a / 2 - 0.5
    p2 = error_rate
    p1 = 1 - p2
    if d1 <= 0:
        return 0.0
    if p2 == 0 or d2 >= 0:
        return MAX_BET
    lam = -(p1 * d1 + p2 * d2) / (d1 * d2)
    return min(max(lam, 0.0), MAX_BET)


def _steps(q: AsnQuery):
    lam = bet_size(q.margin, q.upper_bound, q.error_rate)
    a = clean_value(q.margin, q.upper_bound)
    up = math.log1p(lam * (a - 0.5))
    down = math.log1p(lam * (a / 2 - 0.5))
    return lam, up, down


def estimate_asn(q: AsnQuery, mode: str = "montecarlo", trials: int = DEFAULT_TRIALS,
                 seed: int = DEFAULT_SEED, max_draws: int | None = None) -> float:
    """Expected number of draws to confirm an assertion.

    Errors are modelled as overstatements of half the assorter range
    occurring independently at ``q.error_rate``. Returns ``inf`` when the
    margin is not positive or the errors leave the test with no drift.

    ``mode="closed"`` uses the Wald approximation ``log(1/alpha) / drift``
    (exact when there are no errors); ``mode="montecarlo"`` averages
    ``trials`` seeded simulations, each truncated at ``max_draws`` (by
    default the number of ballots, i.e. a full hand count).
    """
    if q.margin <= 0:
        return math.inf
    lam, up, down = _steps(q)
    eps = q.error_rate
    drift = (1 - eps) * up + (eps * down if eps else 0.0)
    if lam <= 0 or drift <= 0:
        return math.inf
    target = math.log(1 / q.risk_limit)
    if eps == 0:
        return float(_clean_steps(target, up))
    if mode == "closed":
        return target / drift
    if mode != "montecarlo":
        raise ValueError(f"unknown ASN mode {mode!r}")
    if max_draws is None:
        max_draws = q.total_ballots if q.total_ballots else 10**7
    rng = np.random.default_rng(seed)
    draws = [_simulate_once(rng, eps, up, down, target, max_draws) for _ in range(trials)]
    return float(np.mean(draws))


def _clean_steps(target: float, up: float) -> int:
    n = max(1, math.ceil(target / up))
    while n > 1 and (n - 1) * up >= target:
        n -= 1
    while n * up < target:
        n += 1
    return n


def _simulate_once(rng, eps, up, down, target, max_draws) -> int:
    # Jumps from one error to the next; clean stretches are deterministic.
    log_t, n = 0.0, 0
    while n < max_draws:
        gap = int(rng.geometric(eps))
        need = math.ceil((target - log_t) / up) if up > 0 else math.inf
        if need <= gap - 1:
            return min(n + need, max_draws)
        n += gap - 1
        log_t += (gap - 1) * up
        if n >= max_draws:
            return max_draws
        n += 1
        log_t += down
        if log_t >= target:
            return n
    return max_draws


# -- simulated audits --------------------------------------------------------

@dataclass
class AuditTrial:
    """One simulated audit. ``cvrs[i]`` and ``mvrs[i]`` describe ballot ``i``."""
    seed: int
    cvrs: Sequence[Ranking]
    mvrs: Sequence[Ranking]
    plan: object
    max_draws: int
    result: "AuditResult | None" = field(default=None)


@dataclass(frozen=True)
class AuditResult:
    certified: bool
    draws: int


def _assertion_specs(plan, cvr_election: Election, error_rate: float):
    from .assertions import to_assorter, to_linear

    specs = []
    for rep in plan.assertions:
        a = rep.assertion if hasattr(rep, "assertion") else rep
        assorter = to_assorter(to_linear(a, cvr_election))
        margin = 2 * assorter.mean(cvr_election) - 1
        specs.append((assorter, margin))
    return specs


def run_audit(trial: AuditTrial, risk_limit: float = 0.1, error_rate: float | None = None,
              chunk: int = 256, _specs=None) -> AuditResult:
    """Run a ballot-comparison audit of ``trial.plan``.

    Ballots are drawn uniformly with replacement. Each assertion carries its
    own test; the audit certifies once every test has reached ``1/alpha``
    and escalates to a full count after ``trial.max_draws`` draws.
    """
    if len(trial.cvrs) != len(trial.mvrs):
        raise AuditDataError(
            f"{len(trial.cvrs)} CVRs but {len(trial.mvrs)} MVRs; ballots must pair up")
    if not trial.cvrs:
        raise AuditDataError("no ballots to audit")
    if error_rate is None:
        error_rate = getattr(trial.plan, "parameters", {}).get("error_rate", 0.0)
    target = math.log(1 / risk_limit)
    if _specs is None:
        cvr_election = Election.from_records(trial.plan.candidates, trial.cvrs, trial.plan.seats)
        _specs = _assertion_specs(trial.plan, cvr_election, error_rate)
    increments = _increments(_specs, trial.cvrs, trial.mvrs, error_rate)
    result = _run(increments, target, trial.max_draws, len(trial.cvrs),
                  np.random.default_rng(trial.seed), chunk)
    trial.result = result
    return result


def _increments(specs, cvrs, mvrs, error_rate):
    """Per-ballot log-growth of each assertion's test statistic."""
    rows = []
    for assorter, margin in specs:
        if margin <= 0:
            rows.append(None)
            continue
        u = float(assorter.upper_bound)
        a = clean_value(margin, assorter.upper_bound)
        lam = bet_size(margin, assorter.upper_bound, error_rate)
        cache: dict = {}

        def score(r):
            if r not in cache:
                cache[r] = float(assorter.score(r))
            return cache[r]

        omega = np.array([score(c) - score(m) for c, m in zip(cvrs, mvrs)])
        factor = 1 + lam * (a * (1 - omega / u) - 0.5)
        with np.errstate(divide="ignore"):
            rows.append(np.log(np.maximum(factor, 0.0)))
    return rows


def _run(increments, target, max_draws, n_ballots, rng, chunk) -> AuditResult:
    if any(row is None for row in increments):
        return AuditResult(False, max_draws)
    if not increments:
        return AuditResult(True, 0)
    log_t = np.zeros(len(increments))
    done = np.zeros(len(increments), dtype=bool)
    drawn = 0
    while drawn < max_draws:
        size = min(chunk, max_draws - drawn)
        idx = rng.integers(0, n_ballots, size=size)
        finish = 0
        for j, row in enumerate(increments):
            if done[j]:
                continue
            path = log_t[j] + np.cumsum(row[idx])
            hit = np.flatnonzero(path >= target)
            if hit.size:
                done[j] = True
                finish = max(finish, int(hit[0]) + 1)
            else:
                log_t[j] = path[-1]
        if done.all():
            return AuditResult(True, drawn + finish)
        drawn += size
    return AuditResult(False, max_draws)


def simulate(plan, cvrs: Sequence[Ranking], mvr_source, trials: int, seed: int,
             risk_limit: float = 0.1, error_rate: float | None = None,
             max_draws: int | None = None, jobs: int = 1) -> dict:
    """Run ``trials`` seeded audits and summarise them.

    ``mvr_source`` is either a fixed sequence of MVRs or a callable
    ``(rng) -> mvrs`` producing fresh ground truth for each trial. Trial
    seeds are spawned from ``seed``, so results do not depend on ``jobs``.
    """
    cvrs = list(cvrs)
    if max_draws is None:
        max_draws = len(cvrs)
    if error_rate is None:
        error_rate = plan.parameters.get("error_rate", 0.0)
    cvr_election = Election.from_records(plan.candidates, cvrs, plan.seats)
    specs = _assertion_specs(plan, cvr_election, error_rate)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    target = math.log(1 / risk_limit)

    fixed = None
    if not callable(mvr_source):
        if len(mvr_source) != len(cvrs):
            raise AuditDataError("CVRs and MVRs must pair up ballot for ballot")
        fixed = _increments(specs, cvrs, list(mvr_source), error_rate)

    def one(ss):
        rng = np.random.default_rng(ss)
        inc = fixed
        if inc is None:
            mvrs = mvr_source(rng)
            if len(mvrs) != len(cvrs):
                raise AuditDataError("CVRs and MVRs must pair up ballot for ballot")
            inc = _increments(specs, cvrs, mvrs, error_rate)
        return _run(inc, target, max_draws, len(cvrs), rng, 256)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(ss) for ss in seeds]

    cert = [r for r in results if r.certified]
    draws = np.array([r.draws for r in results], dtype=float)
    cert_draws = np.array([r.draws for r in cert], dtype=float)
    qs = [0.25, 0.5, 0.75, 0.9, 0.99]
    return {
        "trials": trials,
        "certRate": len(cert) / trials,
        "meanDraws": float(draws.mean()),
        "meanDrawsCertified": float(cert_draws.mean()) if len(cert) else None,
        "quantiles": {str(q): float(np.quantile(draws, q)) for q in qs},
    }


# -- error injection ---------------------------------------------------------

EDITS = ("swap", "truncate", "substitute")


def perturb_records(records: Sequence[Ranking], n_candidates: int, rate: float, rng,
                    policy: Sequence[str] = EDITS) -> list[Ranking]:
    """Copy of ``records`` with a Binomial(n, rate) number of ballots edited.

    Each chosen ballot gets one edit drawn from ``policy`` among those that
    apply to it: swapping two adjacent preferences, truncating the ranking,
    or replacing it with a random ranking.
    """
    if not 0 <= rate <= 1:
        raise ValueError(f"error rate must lie in [0, 1], got {rate}")
    out = list(records)
    if rate == 0 or not out:
        return out
    k = int(rng.binomial(len(out), rate))
    for i in rng.choice(len(out), size=k, replace=False):
        out[i] = _edit(out[i], n_candidates, rng, policy)
    return out


def _edit(r: Ranking, n_candidates: int, rng, policy) -> Ranking:
    options = [p for p in policy
               if (p == "swap" and len(r) >= 2) or (p == "truncate" and r) or p == "substitute"]
    if not options:
        return r
    kind = options[int(rng.integers(len(options)))]
    if kind == "swap":
        i = int(rng.integers(len(r) - 1))
        r = list(r)
        r[i], r[i + 1] = r[i + 1], r[i]
        return tuple(r)
    if kind == "truncate":
        return r[:int(rng.integers(len(r)))]
    length = int(rng.integers(0, n_candidates + 1))
    return tuple(int(x) for x in rng.permutation(n_candidates)[:length])


def inject_errors(election: Election, rate: float, seed: int,
                  policy: Sequence[str] = EDITS) -> Election:
    """Election with about ``rate * |B|`` randomly edited ballots."""
    rng = np.random.default_rng(seed)
    records = perturb_records(election.expand(), len(election.candidates), rate, rng, policy)
    return Election.from_records(election.candidates, records, election.seats)
