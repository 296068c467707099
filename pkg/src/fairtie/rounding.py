"""Turn fractional allocations into lotteries over allocations.

``faithful_implement`` rounds a full fractional allocation so that every
ex-post bundle is within one strictly fractional good of the agent's expected
value. ``reduce_support`` re-weights a lottery onto a linearly independent
subset of its allocations without changing any marginal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Sequence

from .decomposition import CompletionTargets, complete_to_cuq, greedy_complete
from .model import AgentOrdering, Allocation, Distribution, Matrix, column_sums, freeze, zeros
from .picking import CyclicContext, build_cyclic_context, zf_sets

ZERO = Fraction(0)
ONE = Fraction(1)


class NotFullyAllocated(ValueError):
    pass


def _slots(f: Sequence[Sequence[Fraction]], orders: Sequence[Sequence[int]]) -> tuple[list[int], list[dict[int, Fraction]]]:
    """Cut each agent's strictly fractional mass into unit slots.

    Sweeping an agent's goods from best to worst, slot ``t`` receives the part
    of her cumulative mass lying in ``[t, t + 1)``. Returns the owner of each
    slot and the pieces of goods it holds.
    """
    owners: list[int] = []
    pieces: list[dict[int, Fraction]] = []
    for i, order in enumerate(orders):
        mass = ZERO
        start = len(pieces)
        for x in order:
            q = f[i][x]
            if not 0 < q < 1:
                continue
            while q > 0:
                t = int(mass)
                if t + start >= len(pieces):
                    owners.append(i)
                    pieces.append({})
                room = t + 1 - mass
                piece = min(q, room)
                slot = pieces[start + t]
                slot[x] = slot.get(x, ZERO) + piece
                mass += piece
                q -= piece
    return owners, pieces


def _perfect_matching(size: int, adj: list[list[int]]) -> list[int] | None:
    """Kuhn's augmenting paths; rows and candidate columns in ascending order."""
    match_col = [-1] * size

    def augment(r: int, seen: list[bool]) -> bool:
        for c in adj[r]:
            if seen[c]:
                continue
            seen[c] = True
            if match_col[c] == -1 or augment(match_col[c], seen):
                match_col[c] = r
                return True
        return False

    for r in range(size):
        if not augment(r, [False] * size):
            return None
    match_row = [-1] * size
    for c, r in enumerate(match_col):
        match_row[r] = c
    return match_row


def _bottleneck_matching(mat: list[list[Fraction]]) -> list[int]:
    """A perfect matching on positive entries whose smallest entry is as large as possible."""
    size = len(mat)
    values = sorted({v for row in mat for v in row if v > 0}, reverse=True)
    lo, hi = 0, len(values) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        threshold = values[mid]
        adj = [[c for c in range(size) if mat[r][c] >= threshold] for r in range(size)]
        found = _perfect_matching(size, adj)
        if found is None:
            lo = mid + 1
        else:
            best = found
            hi = mid - 1
    if best is None:
        raise AssertionError("no perfect matching in a doubly stochastic matrix")
    return best


def birkhoff(mat: Sequence[Sequence[Fraction]]) -> list[tuple[Fraction, list[int]]]:
    """Decompose a doubly stochastic matrix into weighted permutations.

    Always peels the matching with the largest possible weight. Each returned
    permutation maps row to column.
    """
    work = [list(row) for row in mat]
    size = len(work)
    out: list[tuple[Fraction, list[int]]] = []
    remaining = ONE
    while remaining > 0:
        perm = _bottleneck_matching(work)
        weight = min(work[r][perm[r]] for r in range(size))
        for r in range(size):
            work[r][perm[r]] -= weight
        remaining -= weight
        out.append((weight, perm))
    return out


def faithful_implement(f: Sequence[Sequence[Fraction]], orders: Sequence[Sequence[int]]) -> Distribution:
    """A lottery whose marginals are exactly ``f`` and whose bundles are each
    within one strictly fractional good of the expected value.

    Integral entries are handed out directly. The strictly fractional mass of
    each agent is cut into unit slots along her order, slots and goods form a
    bipartite fractional matching, and partial slots are padded with dummy
    goods to make it doubly stochastic. Every permutation of the decomposition
    gives an agent exactly one good per full slot and at most one from her
    last slot, and goods in a slot are never better than those in the slot
    before, which bounds the spread of her ex-post values.

    >>> half = Fraction(1, 2)
    >>> len(faithful_implement([[half, half], [half, half]], [(0, 1), (0, 1)]))
    2
    """
    n = len(f)
    m = len(f[0]) if n else 0
    for x, s in enumerate(column_sums(f)):
        if s != 1:
            raise NotFullyAllocated(f"good {x} is allocated with total probability {s}")
    if any(not 0 <= v <= 1 for row in f for v in row):
        raise NotFullyAllocated("entries must lie in [0, 1]")

    fixed: list[set[int]] = [{x for x in range(m) if f[i][x] == 1} for i in range(n)]
    owners, pieces = _slots(f, orders)
    if not owners:
        alloc = Allocation(tuple(frozenset(b) for b in fixed))
        return Distribution.point(alloc, m)

    goods = sorted({x for slot in pieces for x in slot})
    col = {x: k for k, x in enumerate(goods)}
    size = len(owners)
    dummies = size - len(goods)
    mat = [[ZERO] * size for _ in range(size)]
    for s, slot in enumerate(pieces):
        for x, q in slot.items():
            mat[s][col[x]] = q
    if dummies:
        deficits = tuple(ONE - sum(slot.values(), ZERO) for slot in pieces)
        fill = greedy_complete(CompletionTargets(freeze(zeros(size, dummies)), deficits))
        for s in range(size):
            mat[s][len(goods):] = fill[s]

    entries = []
    for weight, perm in birkhoff(mat):
        bundles = [set(b) for b in fixed]
        for s, c in enumerate(perm):
            if c < len(goods):
                bundles[owners[s]].add(goods[c])
        entries.append((weight, Allocation(tuple(frozenset(b) for b in bundles))))
    return Distribution(tuple(entries), m)


class _Row:
    """A sparse row of rationals stored as integers over one positive denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: dict[int, int], den: int = 1) -> None:
        self.num = num
        self.den = den

    def get(self, c: int) -> Fraction | None:
        v = self.num.get(c)
        return None if v is None else Fraction(v, self.den)

    def normalize(self) -> None:
        g = self.den
        for v in self.num.values():
            g = gcd(g, v)
            if g == 1:
                return
        self.num = {k: v // g for k, v in self.num.items()}
        self.den //= g


def _constraint_rows(allocs: Sequence[Allocation], n: int, m: int) -> list[_Row]:
    """One row per (agent < n - 1, good) marginal, then total probability."""
    rows = [_Row({}) for _ in range((n - 1) * m + 1)]
    for c, alloc in enumerate(allocs):
        for i in range(n - 1):
            for x in alloc.bundles[i]:
                rows[i * m + x].num[c] = 1
        rows[-1].num[c] = 1
    return rows


def reduce_support(dist: Distribution) -> Distribution:
    """Re-weight ``dist`` onto at most ``(n - 1) * m + 1`` of its allocations
    with the same marginals.

    The marginals of the first ``n - 1`` agents and the total probability are
    linear in the probabilities; the last agent's marginals follow. While the
    support columns of that system are dependent, walk along a null-space
    direction until a probability reaches zero and drop it. The system is kept
    in reduced row echelon form and updated by pivot exchanges.
    """
    n, m = dist.n, dist.m
    allocs = [a for _, a in dist.entries]
    probs = [p for p, _ in dist.entries]
    tab = _constraint_rows(allocs, n, m)
    active = set(range(len(allocs)))
    pivot_row: dict[int, int] = {}
    row_pivot: dict[int, int] = {}

    def pivot(r: int, c: int) -> None:
        src = tab[r]
        lead = src.num[c]
        if lead < 0:
            src.num = {k: -v for k, v in src.num.items()}
            lead = -lead
        src.den = lead
        src.normalize()
        lead, snum = src.num[c], src.num
        for r2, row in enumerate(tab):
            factor = row.num.get(c)
            if r2 == r or factor is None:
                continue
            num = {k: v * lead for k, v in row.num.items()}
            for k, v in snum.items():
                val = num.get(k, 0) - factor * v
                if val:
                    num[k] = val
                else:
                    num.pop(k, None)
            row.num = num
            row.den *= lead
            row.normalize()
        old = row_pivot.get(r)
        if old is not None:
            del pivot_row[old]
        pivot_row[c] = r
        row_pivot[r] = c

    for c in range(len(allocs)):
        r = next((r for r, row in enumerate(tab) if r not in row_pivot and c in row.num), None)
        if r is not None:
            pivot(r, c)

    def drop(c: int) -> None:
        active.discard(c)
        r = pivot_row.get(c)
        if r is not None:
            swap = min((g for g in tab[r].num if g in active and g not in pivot_row), default=None)
            if swap is not None:
                pivot(r, swap)
            else:
                del pivot_row[c]
                del row_pivot[r]
        for row in tab:
            row.num.pop(c, None)

    while True:
        free = [c for c in sorted(active) if c not in pivot_row]
        if not free:
            break
        g = free[0]
        direction = {g: ONE}
        for c, r in pivot_row.items():
            coef = tab[r].get(g)
            if coef:
                direction[c] = -coef

        best = None
        for sign in (1, -1):
            step = None
            blocked: list[int] = []
            for c, d in direction.items():
                d = sign * d
                if d < 0:
                    ratio = probs[c] / -d
                    if step is None or ratio < step:
                        step, blocked = ratio, [c]
                    elif ratio == step:
                        blocked.append(c)
            if step is None:
                continue
            key = min(blocked)
            if best is None or key < best[0]:
                best = (key, sign, step)
        assert best is not None, "null-space direction without a decreasing coordinate"
        _, sign, step = best
        for c, d in direction.items():
            probs[c] += sign * step * d
        for c in sorted(c for c in direction if probs[c] == 0):
            drop(c)

    return Distribution(tuple((probs[c], allocs[c]) for c in sorted(active)), m)


@dataclass(frozen=True)
class ExportResult:
    """The reduced mixture plus the per-shift pieces it was built from."""

    distribution: Distribution
    parts: tuple[Distribution, ...]
    fractional: tuple[Matrix, ...]
    context: CyclicContext


def implement_export(
    pi: AgentOrdering,
    orders: Sequence[Sequence[int]],
    beta: Sequence[Sequence[Fraction]],
) -> ExportResult:
    """Implement the cyclic unit-quota matrix of ``(orders, pi)`` as a lottery
    in which each agent's bundle, in the part coming from shift ``j``, is worth
    at least her pick there and at least ``beta[i][j]`` of the goods nobody
    claimed in shift ``j`` or in her own last shift.
    """
    ctx = build_cyclic_context(pi, orders)
    full = complete_to_cuq(ctx, beta)
    parts = tuple(faithful_implement(fj, ctx.orders).restricted(ctx.m) for fj in full)
    mixed = reduce_support(Distribution.mixture(parts))
    return ExportResult(mixed, parts, tuple(freeze(fj) for fj in full), ctx)


def export_bound_holds(result: ExportResult, beta: Sequence[Sequence[Fraction]], valuations: Sequence[Sequence[Fraction]]) -> bool:
    """Check the per-shift guarantee of ``implement_export`` for every bundle.

    For shift ``j`` and agent ``i`` with pick of 1-based rank ``r``, every
    bundle of that shift's part must be worth at least the pick, at least
    ``beta[i][j]`` times her unclaimed goods, and at least ``beta[i][j]`` times
    everything outside her top ``2n - r`` goods.
    """
    ctx = result.context
    n, m = ctx.n, ctx.m
    sets = zf_sets(ctx)
    for j, part in enumerate(result.parts):
        for i in range(n):
            v = valuations[i]
            val = lambda goods: sum((v[x] for x in goods if x < m), ZERO)  # noqa: E731
            r = ctx.rank[j][i] + 1
            if r > ctx.shift_position(i, j) + 1:
                return False
            pick = ctx.pick[j][i]
            pick_value = v[pick] if pick < m else ZERO
            tail = val(ctx.orders[i][2 * n - r:])
            needed = max(pick_value, beta[i][j] * val(sets.fractional[j][i]), beta[i][j] * tail)
            for alloc in part.support:
                if val(alloc.bundles[i]) < needed:
                    return False
    return True
