"""Split the cyclic unit-quota matrix into one full fractional allocation per shift.

Each shift ``j`` first gets a partial allocation: agent ``i`` keeps her pick
``pick[j][i]`` outright, gets nothing of the goods already claimed in shift
``j`` or in her own last shift, and a portion ``beta[i][j]`` of everything
else. Greedy matrix completion then tops the partial allocations up so that
they sum to ``n`` times the cyclic unit-quota matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import Matrix, check_portion_matrix, freeze, zeros
from .picking import CyclicContext, cuq_from_context, zf_sets


class InfeasibleTargets(ValueError):
    pass


@dataclass(frozen=True)
class CompletionTargets:
    """A partial matrix ``base`` and row targets; every column must reach 1."""

    base: Matrix
    targets: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", freeze(self.base))
        object.__setattr__(self, "targets", tuple(Fraction(s) for s in self.targets))


def greedy_complete(t: CompletionTargets) -> list[list[Fraction]]:
    """Raise entries of ``t.base`` until row ``u`` sums to ``t.targets[u]``
    and every column sums to 1.

    Each step takes the lowest unsatisfied row and the lowest unsatisfied
    column and adds as much as both allow, so one of them becomes satisfied.
    """
    rows = len(t.targets)
    cols = len(t.base[0]) if t.base else 0
    if len(t.base) != rows:
        raise InfeasibleTargets("base has a different number of rows than targets")
    b = [list(row) for row in t.base]
    if any(not 0 <= v <= 1 for row in b for v in row):
        raise InfeasibleTargets("base entries must lie in [0, 1]")
    if any(not 0 <= s <= cols for s in t.targets):
        raise InfeasibleTargets("row targets must lie in [0, number of columns]")
    row_sum = [sum(row, Fraction(0)) for row in b]
    col_sum = [sum((b[u][v] for u in range(rows)), Fraction(0)) for v in range(cols)]
    if any(r > s for r, s in zip(row_sum, t.targets)):
        raise InfeasibleTargets("a row already exceeds its target")
    if any(c > 1 for c in col_sum):
        raise InfeasibleTargets("a column already exceeds 1")
    if sum(t.targets, Fraction(0)) != cols:
        raise InfeasibleTargets("row targets must sum to the number of columns")

    steps = 0
    u = v = 0
    while True:
        while u < rows and row_sum[u] == t.targets[u]:
            u += 1
        while v < cols and col_sum[v] == 1:
            v += 1
        if u == rows or v == cols:
            break
        delta = min(t.targets[u] - row_sum[u], 1 - col_sum[v])
        b[u][v] += delta
        row_sum[u] += delta
        col_sum[v] += delta
        steps += 1
        assert steps <= rows + cols, "greedy completion failed to terminate"
    if u != rows or v != cols:
        raise InfeasibleTargets("targets could not be met")
    return b


def partial_allocations(ctx: CyclicContext, beta: Sequence[Sequence[Fraction]]) -> list[list[list[Fraction]]]:
    """One partial allocation per shift, over the padded goods."""
    beta = check_portion_matrix(beta, ctx.n)
    sets = zf_sets(ctx)
    out = []
    for j in range(ctx.n):
        g = zeros(ctx.n, ctx.padded_m)
        for i in range(ctx.n):
            g[i][ctx.pick[j][i]] = Fraction(1)
            for x in sets.fractional[j][i]:
                g[i][x] = beta[i][j]
        out.append(g)
    return out


def complete_to_cuq(
    ctx: CyclicContext,
    beta: Sequence[Sequence[Fraction]],
    cuq: Sequence[Sequence[Fraction]] | None = None,
) -> list[list[list[Fraction]]]:
    """Full allocations, one per shift, completing the partial ones and summing
    to ``n`` times the cyclic unit-quota matrix (padded goods included).
    """
    n = ctx.n
    if cuq is None:
        cuq = cuq_from_context(ctx)
    partial = partial_allocations(ctx, beta)
    full = [[list(row) for row in g] for g in partial]
    for x in range(ctx.padded_m):
        base = [[partial[j][i][x] for j in range(n)] for i in range(n)]
        targets = [n * cuq[i][x] for i in range(n)]
        done = greedy_complete(CompletionTargets(freeze(base), tuple(targets)))
        for i in range(n):
            for j in range(n):
                full[j][i][x] = done[i][j]
    return full
