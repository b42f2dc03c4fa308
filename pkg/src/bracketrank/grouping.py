"""Adaptive group formation.

Candidates are cut into ``ceil(N / g_max)`` contiguous slices in retriever
order, with sizes differing by at most one. The first ``N mod g_num`` groups
take the extra document.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import BracketRankError, Candidate, TokenBudget


class BudgetTooSmall(BracketRankError, ValueError):
    pass


class SizeMismatch(BracketRankError, ValueError):
    pass


@dataclass(frozen=True)
class GroupPlan:
    n: int
    g_max: int
    g_num: int
    base_size_s: int
    remainder_r: int
    sizes: tuple[int, ...]
    ranges: tuple[tuple[int, int], ...]  # 1-based, inclusive


def plan_groups(n: int, g_max: int) -> GroupPlan:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if g_max < 2:
        raise ValueError(f"g_max must be >= 2, got {g_max}")

    g_num = -(-n // g_max)
    s, r = divmod(n, g_num)
    sizes = tuple(s + 1 if i < r else s for i in range(g_num))

    ranges = []
    a = 1
    for m in sizes:
        ranges.append((a, a + m - 1))
        a += m
    return GroupPlan(
        n=n,
        g_max=g_max,
        g_num=g_num,
        base_size_s=s,
        remainder_r=r,
        sizes=sizes,
        ranges=tuple(ranges),
    )


def split_into_groups(candidates: Sequence[Candidate], plan: GroupPlan) -> list[list[Candidate]]:
    """Slice ``candidates`` (already in retriever order) along ``plan.ranges``."""
    if len(candidates) != sum(plan.sizes):
        raise SizeMismatch(
            f"{len(candidates)} candidates do not match plan total {sum(plan.sizes)}"
        )
    return [list(candidates[a - 1:b]) for a, b in plan.ranges]


def derive_g_max(budget: TokenBudget) -> int:
    """Largest group size that fits one call: floor((B - T) / (L + H))."""
    usable = budget.budget_b - budget.overhead_t
    g_max = max(usable, 0) // (budget.avg_passage_len + budget.per_doc_framing_h)
    if g_max < 2:
        raise BudgetTooSmall(
            f"budget admits {g_max} passages per prompt; a listwise prompt needs at least 2"
        )
    return g_max


def resolve_g_max(g_max: int | None = None, budget: TokenBudget | None = None) -> int:
    """An explicit ``g_max`` wins over one derived from a token budget."""
    if g_max is not None:
        if g_max < 2:
            raise ValueError(f"g_max must be >= 2, got {g_max}")
        return g_max
    if budget is not None:
        return derive_g_max(budget)
    raise ValueError("either g_max or a token budget is required")
