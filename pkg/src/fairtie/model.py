"""Exact-rational domain types for allocating indivisible goods.

Agents and goods are identified by 0-based indices. Every number is a
``fractions.Fraction``; ties are always broken by ascending index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

Matrix = tuple[tuple[Fraction, ...], ...]


class InvalidInstance(ValueError):
    pass


class InvalidAllocation(ValueError):
    pass


class InvalidDistribution(ValueError):
    pass


class InvalidPortionMatrix(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    """Additive valuations of ``n`` agents over ``m`` goods.

    ``valuations[i][x]`` is agent ``i``'s value for good ``x``.
    """

    valuations: tuple[tuple[Fraction, ...], ...]
    agent_names: tuple[str, ...] | None = None
    good_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.valuations)
        object.__setattr__(self, "valuations", rows)
        if not rows:
            raise InvalidInstance("an instance needs at least one agent")
        m = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != m:
                raise InvalidInstance(f"agent {i} values {len(row)} goods, expected {m}")
            for x, v in enumerate(row):
                if v < 0:
                    raise InvalidInstance(f"agent {i} has negative value {v} for good {x}")
        if self.agent_names is not None and len(self.agent_names) != len(rows):
            raise InvalidInstance("agent_names length does not match the number of agents")
        if self.good_names is not None and len(self.good_names) != m:
            raise InvalidInstance("good_names length does not match the number of goods")

    @classmethod
    def from_values(cls, rows: Iterable[Iterable[object]]) -> Instance:
        """Build from anything ``Fraction`` accepts, e.g. ``"1/3"`` or ``2``."""
        return cls(tuple(tuple(Fraction(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.valuations)

    @property
    def m(self) -> int:
        return len(self.valuations[0])

    def value(self, agent: int, bundle: Iterable[int]) -> Fraction:
        row = self.valuations[agent]
        return sum((row[x] for x in bundle), Fraction(0))

    def total(self, agent: int) -> Fraction:
        return sum(self.valuations[agent], Fraction(0))

    def orders(self) -> tuple[tuple[int, ...], ...]:
        return tuple(strict_order(row) for row in self.valuations)

    def with_valuation(self, agent: int, values: Sequence[Fraction]) -> Instance:
        rows = list(self.valuations)
        rows[agent] = tuple(values)
        return Instance(tuple(rows), self.agent_names, self.good_names)


def strict_order(values: Sequence[Fraction]) -> tuple[int, ...]:
    """Goods from best to worst; equal values keep ascending index order.

    >>> strict_order([1, 3, 3, 0])
    (1, 2, 0, 3)
    """
    return tuple(sorted(range(len(values)), key=lambda x: (-values[x], x)))


def is_consistent_order(order: Sequence[int], values: Sequence[Fraction]) -> bool:
    """True when ``order`` never ranks a good above a strictly better one."""
    if sorted(order) != list(range(len(values))):
        return False
    return all(values[a] >= values[b] for a, b in zip(order, order[1:]))


@dataclass(frozen=True)
class AgentOrdering:
    """A permutation of agents. ``order[p]`` is the agent at position ``p``."""

    order: tuple[int, ...]
    _position: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        order = tuple(int(a) for a in self.order)
        if sorted(order) != list(range(len(order))) or not order:
            raise ValueError(f"not a permutation of agents: {order}")
        object.__setattr__(self, "order", order)
        pos = [0] * len(order)
        for p, a in enumerate(order):
            pos[a] = p
        object.__setattr__(self, "_position", tuple(pos))

    @classmethod
    def identity(cls, n: int) -> AgentOrdering:
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.order)

    def position(self, agent: int) -> int:
        """0-based position of ``agent``."""
        return self._position[agent]

    def agent_at(self, position: int) -> int:
        return self.order[position]


@dataclass(frozen=True)
class Allocation:
    """One bundle per agent. Bundles are disjoint and cover every good."""

    bundles: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bundles", tuple(frozenset(b) for b in self.bundles))

    @classmethod
    def of(cls, bundles: Iterable[Iterable[int]], m: int) -> Allocation:
        alloc = cls(tuple(frozenset(b) for b in bundles))
        alloc.validate(m)
        return alloc

    @property
    def n(self) -> int:
        return len(self.bundles)

    def validate(self, m: int) -> None:
        seen: set[int] = set()
        for i, bundle in enumerate(self.bundles):
            if seen & bundle:
                raise InvalidAllocation(f"bundle of agent {i} overlaps an earlier bundle")
            seen |= bundle
        if seen != set(range(m)):
            raise InvalidAllocation(f"bundles cover {sorted(seen)}, expected goods 0..{m - 1}")

    def owner(self, good: int) -> int:
        for i, bundle in enumerate(self.bundles):
            if good in bundle:
                return i
        raise KeyError(good)

    def restricted(self, m: int) -> Allocation:
        """Drop every good with index ``>= m``."""
        return Allocation(tuple(frozenset(x for x in b if x < m) for b in self.bundles))

    def as_lists(self) -> list[list[int]]:
        return [sorted(b) for b in self.bundles]


@dataclass(frozen=True)
class Distribution:
    """A lottery over allocations with exact probabilities.

    Equal allocations are merged and first-occurrence order is kept, so the
    support size is meaningful.
    """

    entries: tuple[tuple[Fraction, Allocation], ...]
    m: int

    def __post_init__(self) -> None:
        merged: dict[Allocation, Fraction] = {}
        for prob, alloc in self.entries:
            prob = Fraction(prob)
            if prob < 0:
                raise InvalidDistribution(f"negative probability {prob}")
            if prob == 0:
                continue
            alloc.validate(self.m)
            merged[alloc] = merged.get(alloc, Fraction(0)) + prob
        if not merged:
            raise InvalidDistribution("empty support")
        total = sum(merged.values(), Fraction(0))
        if total != 1:
            raise InvalidDistribution(f"probabilities sum to {total}, not 1")
        ns = {a.n for a in merged}
        if len(ns) != 1:
            raise InvalidDistribution("allocations disagree on the number of agents")
        object.__setattr__(self, "entries", tuple((p, a) for a, p in merged.items()))

    @classmethod
    def point(cls, alloc: Allocation, m: int) -> Distribution:
        return cls(((Fraction(1), alloc),), m)

    @classmethod
    def mixture(cls, parts: Sequence[Distribution], weights: Sequence[Fraction] | None = None) -> Distribution:
        if weights is None:
            weights = [Fraction(1, len(parts))] * len(parts)
        m = parts[0].m
        return cls(tuple((w * p, a) for w, d in zip(weights, parts) for p, a in d.entries), m)

    @property
    def n(self) -> int:
        return self.entries[0][1].n

    @property
    def support(self) -> tuple[Allocation, ...]:
        return tuple(a for _, a in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def restricted(self, m: int) -> Distribution:
        return Distribution(tuple((p, a.restricted(m)) for p, a in self.entries), m)


def zeros(n: int, m: int) -> list[list[Fraction]]:
    return [[Fraction(0)] * m for _ in range(n)]


def freeze(rows: Iterable[Iterable[Fraction]]) -> Matrix:
    return tuple(tuple(Fraction(v) for v in row) for row in rows)


def column_sums(f: Sequence[Sequence[Fraction]]) -> list[Fraction]:
    if not f:
        return []
    return [sum((row[x] for row in f), Fraction(0)) for x in range(len(f[0]))]


def row_values(f: Sequence[Sequence[Fraction]], values: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(f, values)), Fraction(0))


def is_full(f: Sequence[Sequence[Fraction]]) -> bool:
    return all(s == 1 for s in column_sums(f)) and all(0 <= v <= 1 for row in f for v in row)


def is_partial(f: Sequence[Sequence[Fraction]]) -> bool:
    return all(s <= 1 for s in column_sums(f)) and all(0 <= v <= 1 for row in f for v in row)


def check_portion_matrix(beta: Sequence[Sequence[Fraction]], n: int) -> Matrix:
    """Validate an ``n x n`` matrix with entries in [0, 1] and row/column sums at most 1."""
    b = freeze(beta)
    if len(b) != n or any(len(row) != n for row in b):
        raise InvalidPortionMatrix(f"portion matrix must be {n}x{n}")
    if any(not 0 <= v <= 1 for row in b for v in row):
        raise InvalidPortionMatrix("portion matrix entries must lie in [0, 1]")
    for i, row in enumerate(b):
        if sum(row, Fraction(0)) > 1:
            raise InvalidPortionMatrix(f"row {i} sums to more than 1")
    for j, s in enumerate(column_sums(b)):
        if s > 1:
            raise InvalidPortionMatrix(f"column {j} sums to more than 1")
    return b


def induced_fractional(dist: Distribution) -> Matrix:
    """Probability that each agent receives each good."""
    f = zeros(dist.n, dist.m)
    for prob, alloc in dist.entries:
        for i, bundle in enumerate(alloc.bundles):
            for x in bundle:
                f[i][x] += prob
    return freeze(f)


def expected_value(dist: Distribution, agent: int, values: Sequence[Fraction]) -> Fraction:
    """Expected bundle value of ``agent`` under ``values``."""
    total = Fraction(0)
    for prob, alloc in dist.entries:
        total += prob * sum((values[x] for x in alloc.bundles[agent]), Fraction(0))
    return total
