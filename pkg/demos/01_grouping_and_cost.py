"""How candidate lists are cut into groups, and what a tournament costs.

Run: python demos/01_grouping_and_cost.py
"""

from bracketrank import Strategy, TokenBudget, derive_g_max, estimate_cost, plan_groups

# 100 BM25 candidates with groups of at most 15 gives 7 groups of 15/14.
plan = plan_groups(100, 15)
print(f"N=100 g_max=15 -> {plan.g_num} groups, sizes {plan.sizes}")
print(f"  ranges {plan.ranges}")

# The group cap can come from a token budget instead of being set directly.
budget = TokenBudget(budget_b=8192, overhead_t=600, avg_passage_len=300, per_doc_framing_h=8)
print(f"8k-token context, 300-token passages -> g_max={derive_g_max(budget)}")

print("\nexact cost for N=100 (calls / docs placed in prompts / rounds):")
for g_max in (10, 15, 20):
    for strategy in Strategy:
        est = estimate_cost(100, g_max, strategy)
        print(f"  g_max={g_max:<3} {strategy.value:<12} calls={est.calls:<4} "
              f"docs={est.docs_processed:<5} rounds={est.rounds}")
