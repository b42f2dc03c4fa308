"""Deterministic toy datasets with planted relevance.

Each query gets ``n_docs`` candidates of which ``n_relevant`` carry graded
relevance 1..3. The first-stage order is a seeded shuffle, so it is a weak
but non-trivial baseline. Uses :mod:`random` (not numpy) so that generated
files are byte-stable across library versions.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

_WORDS = (
    "river stone cloud signal engine garden lattice harbor copper meadow "
    "prism ledger falcon quartz timber vessel orbit canyon ember summit"
).split()


@dataclass(frozen=True)
class ToyPaths:
    run: Path
    corpus: Path
    queries: Path
    qrels: Path
    oracle: Path


def make_toy_dataset(
    out_dir: str | Path,
    n_queries: int = 5,
    n_docs: int = 100,
    n_relevant: int = 10,
    seed: int = 13,
) -> ToyPaths:
    if not 0 <= n_relevant <= n_docs:
        raise ValueError("n_relevant must lie in [0, n_docs]")
    rng = random.Random(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = ToyPaths(
        run=out / "bm25.run",
        corpus=out / "corpus.jsonl",
        queries=out / "queries.jsonl",
        qrels=out / "qrels.txt",
        oracle=out / "oracle.tsv",
    )

    run_lines, corpus_lines, query_lines, qrel_lines, oracle_lines = [], [], [], [], []
    for qi in range(1, n_queries + 1):
        qid = f"q{qi}"
        topic = rng.sample(_WORDS, 3)
        query_lines.append(json.dumps({"id": qid, "text": " ".join(topic)}))

        doc_ids = [f"{qid}-d{j:03d}" for j in range(n_docs)]
        grades = {d: 0 for d in doc_ids}
        for d in rng.sample(doc_ids, n_relevant):
            grades[d] = rng.randint(1, 3)

        for d in doc_ids:
            filler = rng.choices(_WORDS, k=12)
            if grades[d]:
                filler[: grades[d]] = topic[: grades[d]]
            corpus_lines.append(json.dumps({"id": d, "contents": " ".join(filler)}))
            oracle_lines.append(f"{d}\t{grades[d]}")
            if grades[d]:
                qrel_lines.append(f"{qid} 0 {d} {grades[d]}")

        order = doc_ids[:]
        rng.shuffle(order)
        for rank, d in enumerate(order, start=1):
            run_lines.append(f"{qid} Q0 {d} {rank} {n_docs - rank + 1} bm25")

    for path, lines in (
        (paths.run, run_lines),
        (paths.corpus, corpus_lines),
        (paths.queries, query_lines),
        (paths.qrels, qrel_lines),
        (paths.oracle, oracle_lines),
    ):
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return paths
