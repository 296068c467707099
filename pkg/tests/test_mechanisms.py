from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from conftest import instances, orderings
from hypothesis import given
from hypothesis import strategies as st
from oracles import harmonic_sum

from fairtie.harness import certify_expost, random_instance, tight_two_agent_instance
from fairtie.mechanisms import (
    AlphaTooLarge,
    WrongAgentCount,
    deficiencies,
    deficiency,
    general_weight_mechanism,
    harmonic,
    logn_ratio,
    loglog_alpha,
    loglog_epsilon_bound,
    loglog_steps,
    loglog_threshold,
    mechanism_logn,
    mechanism_loglog,
    mechanism_public_deficiency,
    mechanism_two_agents,
    sorted_by_deficiency,
    logn_portion_matrix,
    triple_split,
    weight,
    weight_report,
)
from fairtie.model import AgentOrdering, Instance, column_sums, induced_fractional
from fairtie.picking import cuq_fractional
from fairtie.shares import tps

THIRD, HALF = Fraction(1, 3), Fraction(1, 2)


def test_harmonic_values():
    assert harmonic(1) == 1
    assert harmonic(2) == Fraction(3, 2)
    assert harmonic(4) == Fraction(25, 12) == harmonic_sum(4)
    assert harmonic(12) == Fraction(86021, 27720)


def test_portion_matrix_small_cases():
    assert logn_portion_matrix(AgentOrdering.identity(1)) == ((1,),)
    b2 = logn_portion_matrix(AgentOrdering.identity(2))
    assert {v for row in b2 for v in row} == {THIRD, 2 * THIRD}


@given(st.integers(1, 9).flatmap(orderings))
def test_portion_matrix_sums_to_one(order):
    pi = AgentOrdering(order)
    b = logn_portion_matrix(pi)
    assert all(sum(row) == 1 for row in b)
    assert all(s == 1 for s in column_sums(b))


def test_logn_ratios():
    assert logn_ratio(2) == THIRD
    assert logn_ratio(4) == Fraction(6, 23) > Fraction(1, 4)
    assert all(logn_ratio(n) > Fraction(1, n) for n in (4, 5, 6))


def test_logn_single_agent():
    res = mechanism_logn(Instance.from_values([[1, 2, 3]]))
    assert len(res.distribution) == 1
    assert res.distribution.support[0].bundles == (frozenset({0, 1, 2}),)


@given(instances(min_n=2, max_n=4, min_m=0, max_m=8))
def test_logn_certifies(inst):
    res = mechanism_logn(inst)
    assert certify_expost(res.distribution, inst, res.rho, "TPS").passed
    assert induced_fractional(res.distribution) == cuq_fractional(inst.orders())
    assert len(res.distribution) <= max(inst.n * inst.m, 1)


def test_deficiency_examples():
    assert deficiency([HALF] * 4, 2, Fraction(2, 3)) == 2
    assert deficiency([5, 5, 1], 2, Fraction(1, 4)) == 0
    assert all(v == 0 for v in weight_report(AgentOrdering.identity(3), (0, 0, 0)).demand)


def test_demand_definition():
    pi = AgentOrdering((2, 3, 1, 0))
    rep = weight_report(pi, (1, 2, 4, 4))
    assert rep.demand == (1, HALF, Fraction(1, 4), Fraction(1, 4))
    assert rep.weight == 2 and rep.cyclic_weight == 2


@given(st.integers(2, 12).flatmap(lambda n: st.lists(st.integers(0, n), min_size=n, max_size=n)))
def test_sorted_deficiency_weights(d):
    pi = sorted_by_deficiency(d)
    rep = weight_report(pi, d)
    assert rep.weight <= 1 and rep.cyclic_weight <= 2


@given(st.integers(1, 9).flatmap(lambda n: st.tuples(orderings(n), st.lists(st.integers(0, n), min_size=n, max_size=n))))
def test_weight_at_most_harmonic(args):
    order, d = args
    pi = AgentOrdering(order)
    assert weight(pi, d) <= harmonic(len(d))
    assert weight_report(pi, d).cyclic_weight <= max(harmonic(len(d)), 1)


def test_general_weight_rejects_large_alpha():
    inst = Instance.from_values([[1, 1, 1], [1, 1, 1]])
    with pytest.raises(AlphaTooLarge):
        general_weight_mechanism(inst, AgentOrdering.identity(2), Fraction(1, 2))


def test_general_weight_zero_deficiency():
    inst = Instance.from_values([[4, 3, 2, 1], [1, 2, 3, 4], [2, 2, 2, 2]])
    alpha = Fraction(1, 4)
    assert deficiencies(inst, alpha) == (0, 0, 0)
    res = general_weight_mechanism(inst, AgentOrdering((1, 2, 0)), alpha)
    assert certify_expost(res.distribution, inst, alpha).passed


def test_general_weight_post_hoc_alpha():
    rng = random.Random(8)
    for _ in range(20):
        inst = random_instance(rng, 4, rng.randint(1, 8))
        pi = AgentOrdering(tuple(rng.sample(range(4), 4)))
        safe = 1 / (2 + harmonic(4) - Fraction(1, 4))
        big_w = weight_report(pi, deficiencies(inst, safe)).cyclic_weight
        alpha = 1 / (2 + big_w - Fraction(1, 4))
        if alpha > 1 / (2 + weight_report(pi, deficiencies(inst, alpha)).cyclic_weight - Fraction(1, 4)):
            alpha = safe
        res = general_weight_mechanism(inst, pi, alpha)
        assert certify_expost(res.distribution, inst, alpha).passed
        assert induced_fractional(res.distribution) == cuq_fractional(inst.orders(), pi)


def test_public_deficiency_two_agent_trace():
    inst = tight_two_agent_instance()
    res = mechanism_public_deficiency(inst, Fraction(1, 4))
    assert res.deficiencies == (0, 0)
    assert res.ordering.order == (0, 1)
    assert certify_expost(res.distribution, inst, Fraction(1, 4)).passed


def test_public_deficiency_identical_agents_deterministic():
    inst = Instance.from_values([[3, 1, 1, 1]] * 3)
    a = mechanism_public_deficiency(inst)
    assert a.ordering.order == (0, 1, 2)
    assert a.distribution == mechanism_public_deficiency(inst).distribution


def test_public_deficiency_alpha_range():
    with pytest.raises(AlphaTooLarge):
        mechanism_public_deficiency(tight_two_agent_instance(), Fraction(1, 3))


def test_loglog_constants():
    assert [loglog_steps(n) for n in (1, 2, 3, 4, 5, 16, 17)] == [0, 0, 1, 1, 2, 2, 3]
    assert loglog_alpha(4) == Fraction(1, 27) and loglog_threshold(4) == 25
    # 2 ** -floor(log2 n) ** 2 bounds n ** -log2 n from above
    for n in range(2, 40):
        assert float(loglog_epsilon_bound(n)) >= n ** -math.log2(n) - 1e-15


def test_harmonic_stays_below_threshold_at_desk_scale():
    # H_n <= 1 + ln n, far below 23 for any n a desk can handle
    for n in (10, 100, 10**4, 10**9):
        assert 1 + math.log(n) < float(loglog_threshold(n))


def test_loglog_all_zero_deficiency_is_good():
    inst = Instance.from_values([[2, 2, 2], [2, 2, 2], [1, 1, 1]])
    res = mechanism_loglog(inst, seed=4)
    assert res.branch == "good" and res.deficiencies == (0, 0, 0)


def test_loglog_override_with_weight_two():
    inst = Instance.from_values([[4, 3, 2, 1, 1]] * 4)
    d = (1, 2, 4, 4)
    seed = next(s for s in range(200) if _drawn_weight(4, s, d) == 2)
    res = mechanism_loglog(inst, seed, threshold_override=Fraction(11, 10), d=d)
    assert res.branch == "fallback"
    assert res.ordering == sorted_by_deficiency(d)
    assert induced_fractional(res.distribution) == cuq_fractional(inst.orders(), sorted_by_deficiency(d))


def _drawn_weight(n, seed, d):
    order = list(range(n))
    random.Random(seed).shuffle(order)
    return weight_report(AgentOrdering(tuple(order)), d).cyclic_weight


def test_loglog_reproducible():
    inst = random_instance(random.Random(3), 5, 7)
    assert mechanism_loglog(inst, 9) == mechanism_loglog(inst, 9)


def test_two_agents_tight_instance():
    inst = tight_two_agent_instance()
    res = mechanism_two_agents(inst)
    assert res.case == "split"
    bundles = {a.bundles for a in res.distribution.support}
    assert bundles == {
        (frozenset({0, 3}), frozenset({1, 2})),
        (frozenset({1, 2}), frozenset({0, 3})),
    }
    assert inst.value(0, {1, 2}) == Fraction(2, 3)
    assert inst.value(1, {0, 3}) == 1 and inst.value(1, {1, 2}) == 1


def test_two_agents_distinct_favourites():
    inst = Instance.from_values([[5, 1, 2, 3], [1, 5, 3, 2]])
    res = mechanism_two_agents(inst)
    for a in res.distribution.support:
        assert 0 in a.bundles[0] and 1 in a.bundles[1]


def test_two_agents_single_good():
    inst = Instance.from_values([[1], [1]])
    res = mechanism_two_agents(inst)
    assert res.case == "both-high" and len(res.distribution) == 2
    assert certify_expost(res.distribution, inst, res.rho).passed


def test_two_agents_wrong_count():
    with pytest.raises(WrongAgentCount):
        mechanism_two_agents(Instance.from_values([[1], [1], [1]]))


def test_triple_split_swaps_roles_when_second_agent_is_high():
    inst = Instance(tuple(reversed(tight_two_agent_instance().valuations)))
    res = mechanism_two_agents(inst)
    assert {a.bundles for a in res.distribution.support} == {
        (frozenset({0, 3}), frozenset({1, 2})),
        (frozenset({1, 2}), frozenset({0, 3})),
    }


def test_triple_split_stops_once_low_agent_is_served():
    high = [0, 1, 2, 3, 4, 5, 6]
    low_vals = [Fraction(v) for v in (1, 0, 0, 5, 0, 0, 9)]
    low_order = tuple(sorted(range(7), key=lambda x: (-low_vals[x], x)))
    first, second = triple_split(high, low_vals, low_order, Fraction(4))
    assert first == {0, 3} and second == {1, 2, 4, 5, 6}


@given(instances(min_n=2, max_n=2, min_m=0, max_m=9))
def test_two_agents_properties(inst):
    res = mechanism_two_agents(inst)
    d = res.distribution
    f = induced_fractional(d)
    if inst.m:
        assert f == cuq_fractional(inst.orders())
    integral = all(v in (0, 1) for row in f for v in row)
    assert len(d) == (1 if integral else 2)
    for a in d.support:
        for i in range(2):
            assert inst.value(i, a.bundles[i]) >= Fraction(2, 3) * tps(inst.valuations[i], 2)
