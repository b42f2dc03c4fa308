import math

import pytest
from hypothesis import given, strategies as st

from bracketrank.core import TokenBudget
from bracketrank.grouping import (
    BudgetTooSmall,
    SizeMismatch,
    derive_g_max,
    plan_groups,
    resolve_g_max,
    split_into_groups,
)
from conftest import make_candidates


def check_plan(plan, n, g_max):
    assert plan.g_num == math.ceil(n / g_max)
    assert sum(plan.sizes) == n
    assert max(plan.sizes) - min(plan.sizes) <= 1
    assert max(plan.sizes) <= g_max
    # groups of size s+1 exist only when r > 0; with r == 0 every group has s == g_max or less
    if plan.remainder_r > 0:
        assert plan.base_size_s + 1 <= g_max
    else:
        assert plan.base_size_s <= g_max
    for i, m in enumerate(plan.sizes, start=1):
        assert m == (plan.base_size_s + 1 if i <= plan.remainder_r else plan.base_size_s)
    assert plan.ranges[0][0] == 1
    assert plan.ranges[-1][1] == n
    for (a, b), m in zip(plan.ranges, plan.sizes):
        assert b - a + 1 == m
    for (_, b), (a_next, _) in zip(plan.ranges, plan.ranges[1:]):
        assert a_next == b + 1


def test_plan_hundred_by_twenty():
    plan = plan_groups(100, 20)
    assert plan.g_num == 5
    assert plan.sizes == (20, 20, 20, 20, 20)
    assert plan.ranges == ((1, 20), (21, 40), (41, 60), (61, 80), (81, 100))


def test_plan_single_group():
    plan = plan_groups(7, 7)
    assert plan.g_num == 1 and plan.sizes == (7,) and plan.ranges == ((1, 7),)


def test_plan_uneven_split():
    plan = plan_groups(10, 4)
    assert (plan.g_num, plan.base_size_s, plan.remainder_r) == (3, 3, 1)
    assert plan.sizes == (4, 3, 3)
    assert plan.ranges == ((1, 4), (5, 7), (8, 10))


@pytest.mark.parametrize("n,g_max", [(0, 5), (5, 1), (-3, 4)])
def test_plan_rejects_bad_arguments(n, g_max):
    with pytest.raises(ValueError):
        plan_groups(n, g_max)


@given(st.integers(1, 2000), st.integers(2, 64))
def test_plan_invariants(n, g_max):
    check_plan(plan_groups(n, g_max), n, g_max)


def test_split_hundred():
    cands = make_candidates(100)
    groups = split_into_groups(cands, plan_groups(100, 20))
    assert [c.first_stage_rank for c in groups[0]] == list(range(1, 21))
    assert [c.first_stage_rank for c in groups[4]] == list(range(81, 101))


def test_split_single_candidate():
    groups = split_into_groups(make_candidates(1), plan_groups(1, 2))
    assert [len(g) for g in groups] == [1]


def test_split_preserves_order_within_groups():
    cands = make_candidates(10)
    groups = split_into_groups(cands, plan_groups(10, 4))
    assert [len(g) for g in groups] == [4, 3, 3]
    assert [c.doc_id for c in groups[1]] == ["d5", "d6", "d7"]


def test_split_size_mismatch():
    with pytest.raises(SizeMismatch):
        split_into_groups(make_candidates(9), plan_groups(10, 4))


@given(st.integers(1, 300), st.integers(2, 40))
def test_split_is_lossless(n, g_max):
    cands = make_candidates(n)
    groups = split_into_groups(cands, plan_groups(n, g_max))
    assert [c for g in groups for c in g] == cands


@pytest.mark.parametrize(
    "b,t,l,h,expected",
    [(8192, 500, 350, 10, 21), (4096, 96, 190, 10, 20)],
)
def test_derive_g_max(b, t, l, h, expected):
    assert derive_g_max(TokenBudget(b, t, l, h)) == expected


def test_derive_g_max_budget_too_small():
    with pytest.raises(BudgetTooSmall):
        derive_g_max(TokenBudget(600, 500, 350, 10))
    with pytest.raises(BudgetTooSmall):
        derive_g_max(TokenBudget(400, 500, 350, 10))


def test_direct_g_max_wins_over_budget():
    assert resolve_g_max(15, TokenBudget(8192, 500, 350, 10)) == 15
    assert resolve_g_max(None, TokenBudget(8192, 500, 350, 10)) == 21
    with pytest.raises(ValueError):
        resolve_g_max()


def test_s_plus_one_bound_is_vacuous_for_exact_division():
    plan = plan_groups(100, 20)
    assert plan.remainder_r == 0 and plan.base_size_s == 20
    assert max(plan.sizes) == 20
