from __future__ import annotations

import random
from fractions import Fraction

import pytest
from conftest import instances, orderings
from hypothesis import given
from hypothesis import strategies as st

from fairtie.decomposition import CompletionTargets, InfeasibleTargets, complete_to_cuq, greedy_complete, partial_allocations
from fairtie.harness import three_agent_example
from fairtie.mechanisms import logn_portion_matrix
from fairtie.model import AgentOrdering, InvalidPortionMatrix, column_sums
from fairtie.picking import build_cyclic_context, cuq_fractional, cuq_from_context, zf_sets

EXAMPLE = three_agent_example()
# distinct symbolic stand-ins: beta[i][j] = B[i][j]
B = [[Fraction(1, 10 * (i + 1) + j + 1) for j in range(3)] for i in range(3)]


def _expected_partials():
    """The three partial allocations of the six-good example, with ``b`` for beta."""
    P, Z = "1", "0"
    rows = {
        0: [[P, Z, Z, Z, "b", "b"], [Z, P, Z, Z, "b", "b"], [Z, Z, P, "b", "b", "b"]],
        1: [[Z, "b", Z, P, "b", "b"], [P, Z, Z, Z, "b", "b"], [Z, Z, P, Z, "b", "b"]],
        2: [[Z, Z, Z, P, "b", "b"], [Z, P, "b", Z, "b", "b"], [P, Z, Z, Z, "b", "b"]],
    }
    return {
        j: [[B[i][j] if c == "b" else Fraction(int(c)) for c in row] for i, row in enumerate(g)]
        for j, g in rows.items()
    }


def test_example_partial_allocations():
    ctx = build_cyclic_context(AgentOrdering.identity(3), EXAMPLE.orders())
    got = partial_allocations(ctx, B)
    want = _expected_partials()
    for j in range(3):
        assert got[j] == want[j]


def test_zero_portions_give_pick_indicators():
    ctx = build_cyclic_context(AgentOrdering.identity(3), EXAMPLE.orders())
    zero = [[Fraction(0)] * 3 for _ in range(3)]
    for j, g in enumerate(partial_allocations(ctx, zero)):
        for i in range(3):
            assert [x for x in range(6) if g[i][x]] == [ctx.pick[j][i]]
            assert g[i][ctx.pick[j][i]] == 1


def test_invalid_portion_matrix_rejected():
    ctx = build_cyclic_context(AgentOrdering.identity(2), [(0, 1), (1, 0)])
    with pytest.raises(InvalidPortionMatrix):
        partial_allocations(ctx, [[1, 1], [0, 0]])


def test_two_agents_half_portions_stay_partial():
    ctx = build_cyclic_context(AgentOrdering.identity(2), [(0, 1, 2, 3), (1, 0, 3, 2)])
    half = Fraction(1, 2)
    for g in partial_allocations(ctx, [[half, half], [half, half]]):
        assert all(s <= 1 for s in column_sums(g))


def test_greedy_keeps_complete_matrix():
    base = ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))
    assert greedy_complete(CompletionTargets(base, (1, 1))) == [list(r) for r in base]


def test_greedy_first_fit_gives_identity():
    out = greedy_complete(CompletionTargets(((0, 0), (0, 0)), (1, 1)))
    assert out == [[1, 0], [0, 1]]


@pytest.mark.parametrize(
    "base, targets",
    [
        (((1, 0), (0, 0)), (Fraction(1, 2), Fraction(3, 2))),  # row over target
        (((1, 0), (1, 0)), (1, 1)),  # column over 1
        (((0, 0), (0, 0)), (1, 2)),  # targets do not sum to the column count
        (((0, 0), (0, 0)), (-1, 3)),
    ],
)
def test_greedy_detects_infeasible(base, targets):
    with pytest.raises(InfeasibleTargets):
        greedy_complete(CompletionTargets(base, targets))


def _random_feasible(rng, r, c):
    """Random base with row sums within random targets summing to ``c``."""
    full = [[Fraction(0)] * c for _ in range(r)]
    for v in range(c):
        cuts = sorted(Fraction(rng.randint(0, 12), 12) for _ in range(r - 1))
        parts = [b - a for a, b in zip([Fraction(0)] + cuts, cuts + [Fraction(1)])]
        for u in range(r):
            full[u][v] = parts[u]
    targets = [sum(row, Fraction(0)) for row in full]
    base = [[x * Fraction(rng.randint(0, 4), 4) for x in row] for row in full]
    return base, targets


@given(st.integers(0, 10**6))
def test_greedy_hits_targets(seed):
    rng = random.Random(seed)
    base, targets = _random_feasible(rng, 5, 7)
    out = greedy_complete(CompletionTargets(base, targets))
    assert [sum(row, Fraction(0)) for row in out] == targets
    assert all(s == 1 for s in column_sums(out))
    assert all(base[u][v] <= out[u][v] <= 1 for u in range(5) for v in range(7))


def test_single_agent_completion_is_cuq():
    ctx = build_cyclic_context(AgentOrdering.identity(1), [(1, 0, 2)])
    (f,) = complete_to_cuq(ctx, [[Fraction(1)]])
    assert f == [[1, 1, 1]]


def test_example_completion_sums_to_three_cuq():
    pi = AgentOrdering.identity(3)
    ctx = build_cyclic_context(pi, EXAMPLE.orders())
    full = complete_to_cuq(ctx, logn_portion_matrix(pi))
    cuq = cuq_fractional(EXAMPLE.orders(), pi)
    for i in range(3):
        for x in range(6):
            assert sum(f[i][x] for f in full) == 3 * cuq[i][x]


def test_shared_favourite_completion_sums_to_uniform():
    pi = AgentOrdering.identity(2)
    ctx = build_cyclic_context(pi, [(0, 1, 2, 3), (0, 2, 1, 3)])
    full = complete_to_cuq(ctx, logn_portion_matrix(pi))
    assert all(sum(f[i][x] for f in full) == 1 for i in range(2) for x in range(4))


def check_completion(ctx, beta):
    """Completion, exact sum, and fractional entries only on unclaimed goods;
    where the portion is strictly between 0 and 1 that means only where the
    partial allocation is itself strictly fractional.
    """
    n = ctx.n
    partial = partial_allocations(ctx, beta)
    full = complete_to_cuq(ctx, beta)
    sets = zf_sets(ctx)
    cuq = cuq_from_context(ctx)
    for j in range(n):
        assert all(s == 1 for s in column_sums(full[j]))
        for i in range(n):
            for x in range(ctx.padded_m):
                g, f = partial[j][i][x], full[j][i][x]
                assert g <= f <= 1
                if 0 < f < 1:
                    assert x in sets.fractional[j][i]
                    if 0 < beta[i][j] < 1:
                        assert 0 < g < 1
    for i in range(n):
        for x in range(ctx.padded_m):
            assert sum(full[j][i][x] for j in range(n)) == n * cuq[i][x]
    for g in partial:
        assert all(s <= 1 for s in column_sums(g))


@given(instances(min_n=1, max_n=6, min_m=0, max_m=10), st.data())
def test_completion_properties_with_harmonic_portions(inst, data):
    pi = AgentOrdering(data.draw(orderings(inst.n)))
    check_completion(build_cyclic_context(pi, inst.orders()), logn_portion_matrix(pi))


@given(instances(min_n=1, max_n=5, min_m=0, max_m=9), st.data())
def test_completion_properties_with_random_portions(inst, data):
    n = inst.n
    pi = AgentOrdering(data.draw(orderings(n)))
    # a random doubly sub-stochastic matrix: a scaled permutation mixture
    beta = [[Fraction(0)] * n for _ in range(n)]
    for _ in range(data.draw(st.integers(0, 3))):
        perm = data.draw(st.permutations(list(range(n))))
        w = Fraction(1, 4)
        for i, j in enumerate(perm):
            beta[i][j] += w
    check_completion(build_cyclic_context(pi, inst.orders()), beta)


def test_zero_portion_can_leave_fractions_on_unclaimed_goods():
    # with a zero portion the partial allocation is 0 on unclaimed goods, yet
    # the completion may still put fractional mass there
    ctx = build_cyclic_context(AgentOrdering.identity(2), [(0, 1, 2), (0, 1, 2)])
    beta = [[Fraction(0), Fraction(1, 2)], [Fraction(0), Fraction(0)]]
    check_completion(ctx, beta)
    g = partial_allocations(ctx, beta)[0]
    f = complete_to_cuq(ctx, beta)[0]
    assert g[0][2] == 0 and 0 < f[0][2] < 1


def test_completion_is_deterministic():
    pi = AgentOrdering.identity(3)
    ctx = build_cyclic_context(pi, EXAMPLE.orders())
    beta = logn_portion_matrix(pi)
    assert complete_to_cuq(ctx, beta) == complete_to_cuq(ctx, beta)
