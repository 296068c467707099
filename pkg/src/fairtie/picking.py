"""Unit-quota picking sequences and their cyclic shifts.

In a unit-quota sequence every agent but the last picks her favourite
remaining good and the last agent keeps whatever is left. Shifts are
0-based: shift ``j`` starts at the agent in position ``j``.

When there are fewer goods than agents the constructions run on an instance
padded with worthless dummy goods ``m..n-1``, which every agent ranks last,
and the dummies are stripped from the outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import AgentOrdering, Allocation, Distribution, Matrix, freeze, zeros

Orders = Sequence[Sequence[int]]


def pad_orders(orders: Orders, n: int) -> tuple[tuple[int, ...], ...]:
    """Append dummy goods so that there are at least ``n`` goods."""
    m = len(orders[0])
    extra = tuple(range(m, max(m, n)))
    return tuple(tuple(o) + extra for o in orders)


def cyclic_shift(pi: AgentOrdering, j: int) -> AgentOrdering:
    """The ordering that starts at the agent in position ``j`` and wraps around."""
    if not 0 <= j < pi.n:
        raise ValueError(f"shift index {j} outside 0..{pi.n - 1}")
    return AgentOrdering(pi.order[j:] + pi.order[:j])


def pick_sequence(sequence: Sequence[int], orders: Orders, available: Sequence[int] | None = None) -> list[int]:
    """Each listed agent in turn takes her best available good; returns the picks."""
    left = set(range(len(orders[0])) if available is None else available)
    picks = []
    for agent in sequence:
        good = next(x for x in orders[agent] if x in left)
        left.discard(good)
        picks.append(good)
    return picks


def _unit_quota_padded(pi: AgentOrdering, orders: Orders) -> tuple[list[int], list[set[int]]]:
    n = pi.n
    picks = pick_sequence(pi.order, orders)
    bundles: list[set[int]] = [set() for _ in range(n)]
    for agent, good in zip(pi.order, picks):
        bundles[agent].add(good)
    last = pi.order[-1]
    bundles[last] |= set(range(len(orders[0]))) - set(picks)
    return picks, bundles


def unit_quota(pi: AgentOrdering, orders: Orders) -> Allocation:
    m = len(orders[0])
    _, bundles = _unit_quota_padded(pi, pad_orders(orders, pi.n))
    return Allocation(tuple(frozenset(x for x in b if x < m) for b in bundles))


def unit_quota_mixture(pi: AgentOrdering, orders: Orders) -> Distribution:
    """Uniform lottery over the unit-quota allocations of all cyclic shifts."""
    m = len(orders[0])
    n = pi.n
    return Distribution(
        tuple((Fraction(1, n), unit_quota(cyclic_shift(pi, j), orders)) for j in range(n)), m
    )


@dataclass(frozen=True)
class CyclicContext:
    """Everything the cyclic constructions need about one ordering and profile.

    ``pick[j][i]`` is the good agent ``i`` picks in shift ``j`` (the last agent
    of a shift is counted as picking her best remaining good), ``rank[j][i]`` is
    its 0-based rank in her order, ``picked[j]`` is the set of the ``n`` picks
    and ``last_shift[i]`` is the shift in which agent ``i`` picks last. Orders
    are padded to at least ``n`` goods; ``m`` is the real number of goods.
    """

    pi: AgentOrdering
    orders: tuple[tuple[int, ...], ...]
    m: int
    pick: tuple[tuple[int, ...], ...]
    rank: tuple[tuple[int, ...], ...]
    picked: tuple[frozenset[int], ...]
    last_shift: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.pi.n

    @property
    def padded_m(self) -> int:
        return len(self.orders[0])

    def shift_position(self, agent: int, j: int) -> int:
        """0-based position of ``agent`` in shift ``j``."""
        return (self.pi.position(agent) - j) % self.n


def build_cyclic_context(pi: AgentOrdering, orders: Orders) -> CyclicContext:
    n = pi.n
    if len(orders) != n:
        raise ValueError(f"{len(orders)} orders for {n} agents")
    padded = pad_orders(orders, n)
    index = [{x: r for r, x in enumerate(o)} for o in padded]
    picks, ranks, sets = [], [], []
    for j in range(n):
        shifted = cyclic_shift(pi, j)
        seq = pick_sequence(shifted.order, padded)
        row = [0] * n
        for agent, good in zip(shifted.order, seq):
            row[agent] = good
        picks.append(tuple(row))
        ranks.append(tuple(index[i][row[i]] for i in range(n)))
        sets.append(frozenset(seq))
    last = tuple((pi.position(i) + 1) % n for i in range(n))
    return CyclicContext(pi, padded, len(orders[0]), tuple(picks), tuple(ranks), tuple(sets), last)


@dataclass(frozen=True)
class ZFSets:
    """``zeroed[j][i]`` and ``fractional[j][i]`` for every shift and agent."""

    zeroed: tuple[tuple[frozenset[int], ...], ...]
    fractional: tuple[tuple[frozenset[int], ...], ...]


def zf_sets(ctx: CyclicContext) -> ZFSets:
    everything = frozenset(range(ctx.padded_m))
    zeroed, fractional = [], []
    for j in range(ctx.n):
        zrow, frow = [], []
        for i in range(ctx.n):
            seen = ctx.picked[j] | ctx.picked[ctx.last_shift[i]]
            zrow.append(seen - {ctx.pick[j][i]})
            frow.append(everything - seen)
        zeroed.append(tuple(zrow))
        fractional.append(tuple(frow))
    return ZFSets(tuple(zeroed), tuple(fractional))


def cuq_from_context(ctx: CyclicContext) -> list[list[Fraction]]:
    """The cyclic unit-quota matrix over the padded goods."""
    n = ctx.n
    f = zeros(n, ctx.padded_m)
    share = Fraction(1, n)
    for i in range(n):
        home = ctx.picked[ctx.last_shift[i]]
        for x in range(ctx.padded_m):
            if x not in home:
                f[i][x] += share
        for j in range(n):
            f[i][ctx.pick[j][i]] += share
    return f


def cuq_fractional(orders: Orders, pi: AgentOrdering | None = None) -> Matrix:
    """Each agent's marginal probability for each good under the cyclic
    unit-quota lottery, from the closed form rather than the lottery itself.
    """
    if pi is None:
        pi = AgentOrdering.identity(len(orders))
    ctx = build_cyclic_context(pi, orders)
    return freeze(row[: ctx.m] for row in cuq_from_context(ctx))
