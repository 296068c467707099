"""Proportional, truncated proportional and maximin shares."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

MMS_LIMIT_GENERAL = (4, 12)
MMS_LIMIT_TWO_AGENTS = 24


class SizeExceeded(ValueError):
    pass


@dataclass(frozen=True)
class ShareReport:
    prop: Fraction
    tps: Fraction
    mms: Fraction | None
    n: int
    m: int


def prop_share(values: Sequence[Fraction], n: int) -> Fraction:
    if n < 1:
        raise ValueError("n must be positive")
    return sum(values, Fraction(0)) / n


def tps(values: Iterable[Fraction], n: int) -> Fraction:
    """Truncated proportional share.

    Removing the agent's best good together with one agent can only lower the
    share, so the recursion unrolls to a minimum over prefixes of the sorted
    values:

    >>> tps([10, 1, 1], 2)
    Fraction(2, 1)
    """
    if n < 1:
        raise ValueError("n must be positive")
    vals = sorted((Fraction(v) for v in values), reverse=True)
    rest = sum(vals, Fraction(0))
    best = rest / n
    for k in range(1, n):
        rest -= vals[k - 1] if k - 1 < len(vals) else 0
        best = min(best, rest / (n - k))
    return best


def tps_remainder_bound_check(values: Sequence[Fraction], n: int, subset: Iterable[int]) -> bool:
    """Whether removing ``r <= n`` goods leaves at least ``(n - r)`` times the TPS."""
    subset = set(subset)
    if len(subset) > n:
        raise ValueError("subset larger than n")
    rest = sum((v for x, v in enumerate(values) if x not in subset), Fraction(0))
    return rest >= (n - len(subset)) * tps(values, n)


def _scaled(values: Sequence[Fraction]) -> tuple[list[int], int]:
    scale = lcm(*(Fraction(v).denominator for v in values)) if values else 1
    return [int(Fraction(v) * scale) for v in values], scale


def _mms_two(ints: list[int]) -> int:
    total = sum(ints)
    reachable = 1
    for v in ints:
        reachable |= reachable << v
    half = total // 2
    mask = reachable & ((1 << (half + 1)) - 1)
    return mask.bit_length() - 1


def _mms_search(ints: list[int], n: int) -> int:
    """Branch and bound over partitions into ``n`` bundles.

    Goods are placed in index order; a good may open only the first empty
    bundle, so bundles are ordered by their first good. Callers pass the
    values sorted from largest to smallest, which makes the pruning bite early.
    """
    m = len(ints)
    total = sum(ints)
    upper = total // n
    suffix = [0] * (m + 1)
    for x in range(m - 1, -1, -1):
        suffix[x] = suffix[x + 1] + ints[x]
    loads = [0] * n

    # greedy lower bound: largest good into the lightest bundle
    greedy = [0] * n
    for v in sorted(ints, reverse=True):
        greedy[greedy.index(min(greedy))] += v
    best = min(greedy)

    def go(x: int, opened: int) -> None:
        nonlocal best
        if best >= upper:
            return
        if x == m:
            best = max(best, min(loads))
            return
        need = sum(best + 1 - load for load in loads if load <= best)
        if need > suffix[x]:
            return
        tried: set[int] = set()
        for b in range(min(opened + 1, n)):
            if loads[b] in tried:
                continue
            tried.add(loads[b])
            loads[b] += ints[x]
            go(x + 1, max(opened, b + 1))
            loads[b] -= ints[x]

    go(0, 0)
    return best


def mms_oracle(values: Sequence[Fraction], n: int) -> Fraction:
    """Exact maximin share by exhaustive search at small scale."""
    m = len(values)
    if n < 1:
        raise ValueError("n must be positive")
    max_n, max_m = MMS_LIMIT_GENERAL
    if not ((n <= max_n and m <= max_m) or (n == 2 and m <= MMS_LIMIT_TWO_AGENTS)):
        raise SizeExceeded(f"MMS search limited to n<={max_n}, m<={max_m} or n=2, m<=24; got n={n}, m={m}")
    if n == 1:
        return sum(values, Fraction(0))
    if m < n:
        return Fraction(0)
    ints, scale = _scaled(values)
    best = _mms_two(ints) if n == 2 else _mms_search(sorted(ints, reverse=True), n)
    return Fraction(best, scale)


def share_report(values: Sequence[Fraction], n: int, with_mms: bool = False) -> ShareReport:
    mms = mms_oracle(values, n) if with_mms else None
    return ShareReport(prop_share(values, n), tps(values, n), mms, n, len(values))
