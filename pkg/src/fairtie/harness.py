"""Incentive audits, ex-post certification, instance corpora and weight statistics."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .mechanisms import (
    general_weight_mechanism,
    harmonic,
    loglog_alpha,
    loglog_threshold,
    mechanism_logn,
    mechanism_public_deficiency,
    mechanism_two_agents,
    uniform_baseline,
    weight_report,
    deficiencies,
)
from .model import AgentOrdering, Allocation, Distribution, Instance, induced_fractional
from .shares import mms_oracle, tps

MAX_AUDIT_GOODS = 5
MAX_AUDIT_AGENTS_WITH_DEFICIENCY = 3


class SpaceTooLarge(ValueError):
    pass


# A mechanism as seen by the audit: reported valuations, reported orders and
# (possibly ignored) reported deficiencies in, lottery out.
AuditedMechanism = Callable[[Instance, tuple, tuple | None], Distribution]


@dataclass(frozen=True)
class AuditReport:
    mechanism: str
    agent: int
    deviation_space: str
    deviations: int
    truthful_value: Fraction
    best_deviation_value: Fraction
    verdict: str
    witness: dict | None = None
    epsilon: Fraction = Fraction(0)

    @property
    def holds(self) -> bool:
        return self.verdict != "violated"


def report_for_order(values: Sequence[Fraction], order: Sequence[int]) -> tuple[Fraction, ...]:
    """A valuation with the same multiset of values, sorted along ``order``.

    Its derived order may differ from ``order`` only among equal values, so
    callers pass ``order`` explicitly alongside it.
    """
    ranked = sorted(values, reverse=True)
    out = [Fraction(0)] * len(values)
    for v, x in zip(ranked, order):
        out[x] = v
    return tuple(out)


def audit_tie(
    name: str,
    mechanism: AuditedMechanism,
    instance: Instance,
    agent: int,
    deficiency_reports: Sequence[int] | None = None,
    truthful_deficiencies: tuple[int, ...] | None = None,
    epsilon: Fraction = Fraction(0),
) -> AuditReport:
    """Compare the agent's expected true value under truthful reporting with
    every misreport in the discrete space, holding the other reports fixed.

    Misreports are all strict orders over the goods, paired with each value of
    ``deficiency_reports`` when given. The reported valuation is the agent's
    own values re-sorted along the reported order.
    """
    m, n = instance.m, instance.n
    if m > MAX_AUDIT_GOODS:
        raise SpaceTooLarge(f"audits enumerate all orders, limited to m<={MAX_AUDIT_GOODS}")
    if deficiency_reports is not None and n > MAX_AUDIT_AGENTS_WITH_DEFICIENCY:
        raise SpaceTooLarge(f"deficiency audits limited to n<={MAX_AUDIT_AGENTS_WITH_DEFICIENCY}")
    truth = instance.valuations[agent]
    orders = instance.orders()

    def value(reported: Instance, reported_orders: tuple, d: tuple | None) -> Fraction:
        f = induced_fractional(mechanism(reported, reported_orders, d))
        return sum((f[agent][x] * truth[x] for x in range(m)), Fraction(0))

    honest = value(instance, orders, truthful_deficiencies)
    best, witness, count = honest, None, 0
    d_space = [None] if deficiency_reports is None else list(deficiency_reports)
    for order in itertools.permutations(range(m)):
        reported = instance.with_valuation(agent, report_for_order(truth, order))
        rep_orders = orders[:agent] + (tuple(order),) + orders[agent + 1 :]
        for d_agent in d_space:
            d = truthful_deficiencies
            if d_agent is not None and d is not None:
                d = d[:agent] + (d_agent,) + d[agent + 1 :]
            count += 1
            got = value(reported, rep_orders, d)
            if got > best:
                best, witness = got, {"order": list(order), "deficiency": d_agent}
    if best <= honest:
        verdict = "TIE-holds"
    elif best * (1 - epsilon) <= honest:
        verdict = "within-epsilon"
    else:
        verdict = "violated"
    space = "all strict orders" + (" x deficiency reports" if deficiency_reports is not None else "")
    return AuditReport(name, agent, space, count, honest, best, verdict, witness, epsilon)


def _loglog_expected(instance: Instance, orders: tuple, d: tuple | None) -> Distribution:
    """The randomized mechanism's lottery averaged exactly over every draw of the ordering."""
    n = instance.n
    alpha = loglog_alpha(n)
    d = deficiencies(instance, alpha) if d is None else d
    parts = []
    for perm in itertools.permutations(range(n)):
        pi = AgentOrdering(perm)
        if weight_report(pi, d).cyclic_weight <= loglog_threshold(n):
            parts.append(general_weight_mechanism(instance, pi, alpha, d, orders).distribution)
        else:
            parts.append(mechanism_public_deficiency(instance, alpha, d, orders).distribution)
    return Distribution.mixture(parts)


def audited(name: str, pi: AgentOrdering | None = None, alpha: Fraction | None = None) -> AuditedMechanism:
    """Adapt a named mechanism to the audit calling convention."""
    if name == "logn":
        return lambda inst, orders, d: mechanism_logn(inst, pi, orders).distribution
    if name == "general-weight":
        if pi is None or alpha is None:
            raise ValueError("general-weight audits need a fixed ordering and alpha")
        return lambda inst, orders, d: general_weight_mechanism(inst, pi, alpha, d, orders).distribution
    if name == "public-deficiency":
        a = Fraction(1, 4) if alpha is None else alpha
        return lambda inst, orders, d: mechanism_public_deficiency(inst, a, d, orders).distribution
    if name == "loglog":
        return _loglog_expected
    if name == "two-agent":
        return lambda inst, orders, d: mechanism_two_agents(inst, orders).distribution
    if name == "uniform":
        return lambda inst, orders, d: uniform_baseline(inst, orders).distribution
    raise ValueError(f"unknown mechanism {name!r}")


@dataclass(frozen=True)
class Witness:
    allocation: int
    agent: int
    value: Fraction
    share: Fraction


@dataclass(frozen=True)
class Certification:
    passed: bool
    rho: Fraction
    basis: str
    shares: tuple[Fraction, ...]
    values: tuple[tuple[Fraction, ...], ...]
    failures: tuple[Witness, ...] = field(default=())

    def min_ratio(self) -> Fraction | None:
        """Smallest value/share over every bundle with a positive share."""
        ratios = [
            v / s for row in self.values for v, s in zip(row, self.shares) if s > 0
        ]
        return min(ratios) if ratios else None


def agent_shares(instance: Instance, basis: str) -> tuple[Fraction, ...]:
    basis = basis.upper()
    if basis == "TPS":
        return tuple(tps(v, instance.n) for v in instance.valuations)
    if basis == "MMS":
        return tuple(mms_oracle(v, instance.n) for v in instance.valuations)
    raise ValueError(f"unknown share basis {basis!r}")


def certify_expost(dist: Distribution, instance: Instance, rho: Fraction, basis: str = "TPS") -> Certification:
    """Check ``v_i(A_i) >= rho * share_i`` for every support allocation and agent."""
    shares = agent_shares(instance, basis)
    values = tuple(
        tuple(instance.value(i, alloc.bundles[i]) for i in range(instance.n)) for alloc in dist.support
    )
    failures = tuple(
        Witness(k, i, row[i], shares[i])
        for k, row in enumerate(values)
        for i in range(instance.n)
        if row[i] < rho * shares[i]
    )
    return Certification(not failures, Fraction(rho), basis.upper(), shares, values, failures)


def impossibility_instance(n: int, m: int | None = None, agent: int = 0) -> Instance:
    """One agent likes ``n - 1`` goods fully and ``n`` goods at ``1/n``; everyone
    else likes only those ``n`` goods. Every agent's maximin share is 1, yet a
    lottery giving each good to each agent with probability ``1/n`` cannot give
    the first agent more than ``1/n`` of it in every outcome.
    """
    m = 2 * n - 1 if m is None else m
    if m < 2 * n - 1:
        raise ValueError("needs at least 2n - 1 goods")
    special = [Fraction(1)] * (n - 1) + [Fraction(1, n)] * n + [Fraction(0)] * (m - 2 * n + 1)
    other = [Fraction(0)] * (n - 1) + [Fraction(1)] * n + [Fraction(0)] * (m - 2 * n + 1)
    return Instance(tuple(tuple(special) if i == agent else tuple(other) for i in range(n)))


def tight_two_agent_instance() -> Instance:
    third, half = Fraction(1, 3), Fraction(1, 2)
    return Instance(((Fraction(1), third, third, third), (half, half, half, half)))


def three_agent_example() -> Instance:
    """Three agents, six goods; the agents' orders are
    ``0,3,1,2,4,5``, ``0,1,2,3,4,5`` and ``0,2,1,3,4,5``.
    """
    orders = [(0, 3, 1, 2, 4, 5), (0, 1, 2, 3, 4, 5), (0, 2, 1, 3, 4, 5)]
    rows = []
    for order in orders:
        row = [Fraction(0)] * 6
        for r, x in enumerate(order):
            row[x] = Fraction(6 - r)
        rows.append(tuple(row))
    return Instance(tuple(rows), good_names=tuple(f"x{k + 1}" for k in range(6)))


def adversarial_corpus() -> list[tuple[str, Instance]]:
    corpus: list[tuple[str, Instance]] = []
    for n in (2, 3, 4):
        for m in (2 * n - 1, 2 * n + 1):
            corpus.append((f"impossibility-n{n}-m{m}", impossibility_instance(n, m)))
    corpus.append(("tight-two-agent", tight_two_agent_instance()))
    corpus.append(("three-agent-six-goods", three_agent_example()))
    corpus.append(("all-zero", Instance.from_values([[0, 0, 0], [0, 0, 0]])))
    corpus.append(("fewer-goods-than-agents", Instance.from_values([[3, 1], [1, 3], [2, 2]])))
    corpus.append(("single-good", Instance.from_values([[1], [1]])))
    return corpus


def random_instance(rng: random.Random, n: int, m: int, max_numerator: int = 20, max_denominator: int = 5) -> Instance:
    return Instance(
        tuple(
            tuple(Fraction(rng.randint(0, max_numerator), rng.randint(1, max_denominator)) for _ in range(m))
            for _ in range(n)
        )
    )


def random_distribution(rng: random.Random, n: int, m: int, k: int) -> Distribution:
    entries = []
    for _ in range(k):
        bundles: list[set[int]] = [set() for _ in range(n)]
        for x in range(m):
            bundles[rng.randrange(n)].add(x)
        entries.append((Fraction(rng.randint(1, 30)), Allocation(tuple(frozenset(b) for b in bundles))))
    total = sum((p for p, _ in entries), Fraction(0))
    return Distribution(tuple((p / total, a) for p, a in entries), m)


@dataclass(frozen=True)
class WeightStatistics:
    """Monte-Carlo summary. ``sample_*`` fields are floats; the rest are exact."""

    n: int
    trials: int
    seed: int
    exact_mean: Fraction
    sample_mean: float
    sample_std_error: float
    max_cyclic_weight: Fraction
    threshold: Fraction
    exceed_fraction: float
    harmonic_bound: Fraction


def weight_statistics(n: int, d: Sequence[int], trials: int, seed: int) -> WeightStatistics:
    """Weight of uniformly random agent orderings for a fixed deficiency vector.

    Agent ``i`` lands in its last ``d_i`` positions with probability ``d_i/n``
    and then demands ``1/d_i``, so it contributes exactly ``1/n`` to the mean
    weight when ``d_i > 0`` and nothing otherwise.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if len(d) != n or any(not 0 <= x <= n for x in d):
        raise ValueError("need one deficiency in 0..n per agent")
    exact = Fraction(sum(1 for x in d if x > 0), n)
    # demands scaled by lcm(1..n) are integers, so every weight below is exact
    scale = math.lcm(*range(1, n + 1))
    d_arr = np.asarray(d, dtype=np.int64)
    demand = np.where(d_arr > 0, scale // np.maximum(d_arr, 1), 0)
    rng = np.random.default_rng(seed)
    orders = rng.permuted(np.tile(np.arange(n), (trials, 1)), axis=1)
    pos = np.argsort(orders, axis=1)
    weights = np.where(pos + 1 > n - d_arr, demand, 0).sum(axis=1)
    # shift s moves an agent from position p to (p - s) mod n
    shifted = (pos[:, None, :] - np.arange(n)[None, :, None]) % n
    cyclic = np.where(shifted + 1 > n - d_arr, demand, 0).sum(axis=2).max(axis=1)
    cyclic = np.maximum(cyclic, scale)
    threshold = loglog_threshold(n)
    sample = weights / scale
    se = float(sample.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    return WeightStatistics(
        n,
        trials,
        seed,
        exact,
        float(sample.mean()),
        se,
        Fraction(int(cyclic.max()), scale),
        threshold,
        float(np.mean(cyclic > threshold * scale)),
        harmonic(n),
    )


__all__ = [
    "AuditReport",
    "Certification",
    "SpaceTooLarge",
    "WeightStatistics",
    "adversarial_corpus",
    "audit_tie",
    "audited",
    "certify_expost",
    "impossibility_instance",
    "random_distribution",
    "random_instance",
    "three_agent_example",
    "tight_two_agent_instance",
    "weight_statistics",
]
