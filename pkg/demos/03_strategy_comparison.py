"""Compare the three bracket strategies on a noisy simulated ranker.

A perfect ranker makes every strategy look the same, so here the ranker
sees each document's true score plus Gaussian noise on every call. Extra
matches (double elimination, round robin) buy robustness to that noise.

Run: python demos/03_strategy_comparison.py
"""

import random
import statistics

from bracketrank import Candidate, Query, Strategy, TournamentConfig, ndcg_at_k, run_tournament
from bracketrank.core import RankedGroup


class NoisyRanker:
    def __init__(self, truth, noise, seed):
        self.truth, self.noise = truth, noise
        self.rng = random.Random(seed)

    def rank(self, query, group):
        noisy = {c.doc_id: self.truth[c.doc_id] + self.rng.gauss(0, self.noise) for c in group}
        return RankedGroup(tuple(sorted(group, key=lambda c: -noisy[c.doc_id])))


rng = random.Random(0)
rows = {s: [] for s in Strategy}
calls = {s: [] for s in Strategy}
for qi in range(30):
    cands = [Candidate(f"d{i}", "text", 0.0, i) for i in range(1, 101)]
    truth = {c.doc_id: rng.random() * 3 for c in cands}
    grades = {d: round(v) for d, v in truth.items() if v > 2.2}
    query = Query(f"q{qi}", "simulated query")
    for strategy in Strategy:
        ranker = NoisyRanker(truth, noise=0.6, seed=qi)
        res = run_tournament(query, cands, TournamentConfig(g_max=20, strategy=strategy), ranker)
        rows[strategy].append(ndcg_at_k(res.doc_ids, grades, 10))
        calls[strategy].append(res.trace.llm_calls)

for strategy in Strategy:
    print(f"{strategy.value:<12} nDCG@10={statistics.mean(rows[strategy]):.4f} "
          f"calls/query={statistics.mean(calls[strategy]):.1f}")
