"""Walk through one single-elimination tournament with a perfect ranker.

The oracle ranker knows the true score of every document, so the result
shows what the bracket structure does on its own: the winner track keeps
the top half of every initial group, and everything it holds lands above
the loser track.

Run: python demos/02_oracle_tournament.py
"""

import random

from bracketrank import Candidate, OracleRanker, Query, TournamentConfig, run_tournament
from bracketrank.core import Bracket

rng = random.Random(3)
query = Query("demo", "effects of caffeine on sleep")
cands = [Candidate(f"d{i:02d}", f"passage {i}", 0.0, i) for i in range(1, 41)]
scores = {c.doc_id: rng.random() for c in cands}

result = run_tournament(query, cands, TournamentConfig(g_max=10), OracleRanker(scores))
trace = result.trace

print("initial groups (ranked):")
for g in trace.initial_rankings:
    print("  " + " ".join(g.doc_ids))

for bracket in (Bracket.WINNER, Bracket.LOSER):
    print(f"\n{bracket.value} track, {trace.rounds_per_bracket.get(bracket, 0)} rounds")
    for m in trace.matches_in(bracket, include_byes=True):
        tag = " (bye)" if m.bye else ""
        print(f"  round {m.round_index} match {m.match_index}{tag}: "
              f"advance {[c.doc_id for c in m.split.winner_half]}")

truth = sorted(scores, key=scores.get, reverse=True)
print(f"\nfinal top 10: {result.doc_ids[:10]}")
print(f"true  top 10: {truth[:10]}")
print(f"llm calls={trace.llm_calls} docs processed={trace.docs_processed}")
