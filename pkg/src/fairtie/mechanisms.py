"""End-to-end allocation mechanisms.

Every mechanism returns a lottery whose marginals are the cyclic unit-quota
matrix of some agent ordering, which makes truthful reporting optimal in
expectation, together with the share ratio every ex-post bundle is
guaranteed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .model import AgentOrdering, Allocation, Distribution, Instance, freeze
from .picking import cuq_fractional, cyclic_shift
from .rounding import faithful_implement, implement_export
from .shares import tps

TWO_THIRDS = Fraction(2, 3)


class AlphaTooLarge(ValueError):
    pass


class WrongAgentCount(ValueError):
    pass


@dataclass(frozen=True)
class MechanismResult:
    distribution: Distribution
    rho: Fraction
    basis: str = "TPS"
    branch: str | None = None
    ordering: AgentOrdering | None = None
    seed: int | None = None
    epsilon_bound: Fraction | None = None
    alpha: Fraction | None = None
    deficiencies: tuple[int, ...] | None = None
    case: str | None = None


@lru_cache(maxsize=None)
def harmonic(n: int) -> Fraction:
    """``1 + 1/2 + ... + 1/n``; zero for ``n = 0``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0))


def logn_ratio(n: int) -> Fraction:
    return 1 / (harmonic(n - 1) + 2)


def logn_portion_matrix(pi: AgentOrdering, n: int | None = None) -> tuple[tuple[Fraction, ...], ...]:
    """Agent at 0-based position ``p`` of shift ``j`` gets ``1 / ((n - p) * H_n)``.

    Each row and column is a permutation of ``1/(k H_n)`` for ``k = 1..n`` and so
    sums to exactly 1.
    """
    n = pi.n if n is None else n
    h = harmonic(n)
    return tuple(
        tuple(1 / ((n - (pi.position(i) - j) % n) * h) for j in range(n)) for i in range(n)
    )


def _orders(instance: Instance, orders: Sequence[Sequence[int]] | None) -> tuple[tuple[int, ...], ...]:
    return instance.orders() if orders is None else tuple(tuple(o) for o in orders)


def mechanism_logn(
    instance: Instance,
    pi: AgentOrdering | None = None,
    orders: Sequence[Sequence[int]] | None = None,
) -> MechanismResult:
    """Ordinal mechanism giving every agent ``TPS / (H_{n-1} + 2)`` ex post."""
    n = instance.n
    pi = AgentOrdering.identity(n) if pi is None else pi
    beta = logn_portion_matrix(pi)
    out = implement_export(pi, _orders(instance, orders), beta)
    return MechanismResult(out.distribution, logn_ratio(n), ordering=pi)


def deficiency(values: Sequence[Fraction], n: int, alpha: Fraction) -> int:
    """How many of the agent's top ``n`` goods fall short of ``alpha * TPS``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    bar = alpha * tps(values, n)
    good = sum(1 for v in values if v >= bar)
    return max(n - good, 0)


def deficiencies(instance: Instance, alpha: Fraction) -> tuple[int, ...]:
    return tuple(deficiency(v, instance.n, alpha) for v in instance.valuations)


@dataclass(frozen=True)
class WeightReport:
    demand: tuple[Fraction, ...]
    weight: Fraction
    cyclic_weight: Fraction


def demands(pi: AgentOrdering, d: Sequence[int]) -> tuple[Fraction, ...]:
    """``1/d_i`` for agents among the last ``d_i`` positions, else 0."""
    n = pi.n
    return tuple(
        Fraction(1, d[i]) if d[i] > 0 and pi.position(i) + 1 > n - d[i] else Fraction(0)
        for i in range(n)
    )


def weight(pi: AgentOrdering, d: Sequence[int]) -> Fraction:
    return sum(demands(pi, d), Fraction(0))


def weight_report(pi: AgentOrdering, d: Sequence[int]) -> WeightReport:
    dem = demands(pi, d)
    shifts = (weight(cyclic_shift(pi, j), d) for j in range(pi.n))
    return WeightReport(dem, sum(dem, Fraction(0)), max(max(shifts), Fraction(1)))


def sorted_by_deficiency(d: Sequence[int]) -> AgentOrdering:
    return AgentOrdering(tuple(sorted(range(len(d)), key=lambda i: (d[i], i))))


def weight_portion_matrix(pi: AgentOrdering, d: Sequence[int]) -> tuple[tuple[Fraction, ...], ...]:
    n = pi.n
    big_w = weight_report(pi, d).cyclic_weight
    cols = [demands(cyclic_shift(pi, j), d) for j in range(n)]
    return tuple(tuple(cols[j][i] / big_w for j in range(n)) for i in range(n))


def general_weight_mechanism(
    instance: Instance,
    pi: AgentOrdering,
    alpha: Fraction,
    d: Sequence[int] | None = None,
    orders: Sequence[Sequence[int]] | None = None,
) -> MechanismResult:
    """Agents with large deficiency get a larger portion of the leftover goods
    in shifts where they pick late.

    ``d`` defaults to the deficiencies computed from ``instance``.
    """
    n = instance.n
    alpha = Fraction(alpha)
    d = deficiencies(instance, alpha) if d is None else tuple(d)
    big_w = weight_report(pi, d).cyclic_weight
    if alpha > 1 / (2 + big_w - Fraction(1, n)):
        raise AlphaTooLarge(f"alpha={alpha} exceeds 1/(2 + W - 1/n) with W={big_w}")
    beta = weight_portion_matrix(pi, d)
    out = implement_export(pi, _orders(instance, orders), beta)
    return MechanismResult(out.distribution, alpha, ordering=pi, alpha=alpha, deficiencies=d)


def mechanism_public_deficiency(
    instance: Instance,
    alpha: Fraction = Fraction(1, 4),
    d: Sequence[int] | None = None,
    orders: Sequence[Sequence[int]] | None = None,
) -> MechanismResult:
    """Order agents by non-decreasing deficiency (ties by index) and run the
    weighted mechanism; ``alpha <= 1/4`` always fits.
    """
    alpha = Fraction(alpha)
    if not 0 < alpha <= Fraction(1, 4):
        raise AlphaTooLarge(f"alpha must lie in (0, 1/4], got {alpha}")
    d = deficiencies(instance, alpha) if d is None else tuple(d)
    return general_weight_mechanism(instance, sorted_by_deficiency(d), alpha, d, orders)


def loglog_steps(n: int) -> int:
    """Smallest ``t >= 0`` with ``log2 log2 n <= t``, i.e. ``n <= 2 ** 2 ** t``."""
    t = 0
    while n > 2 ** (2**t):
        t += 1
    return t


def loglog_alpha(n: int) -> Fraction:
    return Fraction(1, 25 + 2 * loglog_steps(n))


def loglog_threshold(n: int) -> Fraction:
    return Fraction(23 + 2 * loglog_steps(n))


def loglog_epsilon_bound(n: int) -> Fraction:
    """An exact upper bound on ``n ** -log2(n)``, namely ``2 ** -floor(log2 n) ** 2``."""
    k = n.bit_length() - 1
    return Fraction(1, 2 ** (k * k))


def mechanism_loglog(
    instance: Instance,
    seed: int,
    threshold_override: Fraction | None = None,
    d: Sequence[int] | None = None,
    orders: Sequence[Sequence[int]] | None = None,
) -> MechanismResult:
    """Draw a uniform agent ordering; run the weighted mechanism on it when its
    cyclic weight is small enough, otherwise fall back to the sorted order.
    """
    n = instance.n
    alpha = loglog_alpha(n)
    threshold = loglog_threshold(n) if threshold_override is None else Fraction(threshold_override)
    d = deficiencies(instance, alpha) if d is None else tuple(d)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    pi = AgentOrdering(tuple(order))
    if weight_report(pi, d).cyclic_weight <= threshold:
        res = general_weight_mechanism(instance, pi, alpha, d, orders)
        branch = "good"
    else:
        res = mechanism_public_deficiency(instance, alpha, d, orders)
        branch = "fallback"
    return MechanismResult(
        res.distribution,
        alpha,
        branch=branch,
        ordering=res.ordering,
        seed=seed,
        epsilon_bound=loglog_epsilon_bound(n),
        alpha=alpha,
        deficiencies=d,
    )


def _coin_flip(a: frozenset[int], b: frozenset[int], m: int) -> Distribution:
    half = Fraction(1, 2)
    return Distribution(((half, Allocation((a, b))), (half, Allocation((b, a)))), m)


def triple_split(high: Sequence[int], low_values: Sequence[Fraction], low_order: Sequence[int], low_share: Fraction) -> tuple[frozenset[int], frozenset[int]]:
    """Split the goods for two agents who share a favourite that only one of
    them (``high``, given by her order) values highly.

    Goods are taken in triples along the high agent's order, after padding with
    dummies to a multiple of three. The first bundle starts with the favourite
    and the second with the next two goods; from each later triple the low
    agent's best good joins the first bundle and the others the second, until
    the low agent values the first bundle at ``low_share`` or more.
    """
    m = len(high)
    padded = list(high) + list(range(m, m + (-m) % 3))
    rank = {x: r for r, x in enumerate(low_order)}
    first = {padded[0]}
    second = set(padded[1:3])
    value = lambda goods: sum((low_values[x] for x in goods if x < m), Fraction(0))  # noqa: E731
    k = 3
    while k < len(padded) and value(first) < low_share:
        triple = padded[k : k + 3]
        best = min(triple, key=lambda x: rank.get(x, m + x))
        first.add(best)
        second.update(x for x in triple if x != best)
        k += 3
    second.update(padded[k:])
    strip = lambda goods: frozenset(x for x in goods if x < m)  # noqa: E731
    return strip(first), strip(second)


def mechanism_two_agents(
    instance: Instance,
    orders: Sequence[Sequence[int]] | None = None,
) -> MechanismResult:
    """Two-agent lottery over at most two allocations, each giving both agents
    at least two thirds of their TPS.
    """
    if instance.n != 2:
        raise WrongAgentCount(f"needs exactly 2 agents, got {instance.n}")
    m = instance.m
    ords = _orders(instance, orders)
    vals = instance.valuations
    if m == 0:
        return MechanismResult(Distribution.point(Allocation((frozenset(), frozenset())), 0), TWO_THIRDS, case="empty")
    shares = [tps(v, 2) for v in vals]
    fav = [ords[0][0], ords[1][0]]
    if fav[0] != fav[1]:
        dist = faithful_implement(cuq_fractional(ords), ords)
        case = "distinct-favourites"
    else:
        y = fav[0]
        high = [vals[i][y] >= TWO_THIRDS * shares[i] for i in range(2)]
        low = [vals[i][y] <= TWO_THIRDS * shares[i] for i in range(2)]
        if low[0] and low[1]:
            half = Fraction(1, 2)
            dist = faithful_implement(freeze([[half] * m, [half] * m]), ords)
            case = "both-low"
        elif high[0] and high[1]:
            dist = _coin_flip(frozenset({y}), frozenset(range(m)) - {y}, m)
            case = "both-high"
        else:
            h = 0 if high[0] else 1
            lo = 1 - h
            a, b = triple_split(ords[h], vals[lo], ords[lo], TWO_THIRDS * shares[lo])
            dist = _coin_flip(a, b, m)
            case = "split"
    return MechanismResult(dist, TWO_THIRDS, case=case)


def uniform_baseline(instance: Instance, orders: Sequence[Sequence[int]] | None = None) -> MechanismResult:
    """Every agent gets every good with probability ``1/n``, rounded faithfully.

    No positive share ratio is promised; it exists to show what the cyclic
    construction improves on.
    """
    n, m = instance.n, instance.m
    frac = freeze([[Fraction(1, n)] * m for _ in range(n)])
    if m == 0:
        dist = Distribution.point(Allocation(tuple(frozenset() for _ in range(n))), 0)
    else:
        dist = faithful_implement(frac, _orders(instance, orders))
    return MechanismResult(dist, Fraction(0))
