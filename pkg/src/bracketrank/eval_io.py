"""TREC-style file I/O and nDCG evaluation.

Formats:
    run      ``qid Q0 docid rank score tag`` (whitespace separated)
    qrels    ``qid 0 docid rel``
    corpus   JSON lines ``{"id": ..., "contents": ...}``
    queries  JSON lines ``{"id": ..., "text": ...}``
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .core import AssembledRanking, BracketRankError, Candidate, Query

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class MalformedLine(BracketRankError, ValueError):
    def __init__(self, line_no: int, detail: str = "", path: PathLike | None = None):
        where = f"{path}:{line_no}" if path else f"line {line_no}"
        super().__init__(f"{where}: {detail}" if detail else where)
        self.line_no = line_no


class MissingDocument(BracketRankError, KeyError):
    def __init__(self, ids: Sequence[str], detail: str = ""):
        super().__init__(list(ids)[:10])
        self.ids = list(ids)
        self.detail = detail

    def __str__(self) -> str:
        extra = f" ({self.detail})" if self.detail else ""
        return f"{len(self.ids)} document(s) missing from corpus, first: {self.ids[:10]}{extra}"


class MissingQuery(BracketRankError, KeyError):
    def __str__(self) -> str:
        return f"query text missing for qid(s): {self.args[0]}"


@dataclass(frozen=True)
class RunRecord:
    qid: str
    doc_id: str
    rank: int
    score: float
    tag: str


@dataclass(frozen=True)
class Qrel:
    qid: str
    doc_id: str
    relevance: int


def read_run(path: PathLike, strict: bool = True) -> dict[str, list[RunRecord]]:
    """Parse a run file into per-query records sorted by rank.

    With ``strict`` set, ranks within a query must be exactly ``1..N`` and
    doc ids must not repeat; the first offending line is reported.
    """
    by_qid: dict[str, list[tuple[int, RunRecord]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise MalformedLine(line_no, f"expected 6 columns, got {len(parts)}", path)
            qid, _q0, doc_id, rank, score, tag = parts
            try:
                record = RunRecord(qid, doc_id, int(rank), float(score), tag)
            except ValueError as exc:
                raise MalformedLine(line_no, str(exc), path) from exc
            by_qid[qid].append((line_no, record))

    out: dict[str, list[RunRecord]] = {}
    for qid, rows in by_qid.items():
        rows.sort(key=lambda row: row[1].rank)
        if strict:
            seen: set[str] = set()
            for expected, (line_no, rec) in enumerate(rows, start=1):
                if rec.rank != expected:
                    raise MalformedLine(
                        line_no, f"qid {qid}: expected rank {expected}, found {rec.rank}", path
                    )
                if rec.doc_id in seen:
                    raise MalformedLine(line_no, f"qid {qid}: duplicate doc {rec.doc_id}", path)
                seen.add(rec.doc_id)
        out[qid] = [rec for _, rec in rows]
    return out


def read_jsonl(path: PathLike, id_key: str, text_key: str) -> Iterable[tuple[str, str]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield str(obj[id_key]), str(obj[text_key])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MalformedLine(line_no, f"bad JSON record: {exc}", path) from exc


def load_queries(path: PathLike) -> dict[str, Query]:
    return {qid: Query(qid, text) for qid, text in read_jsonl(path, "id", "text")}


def load_candidates(
    run_path: PathLike,
    corpus_path: PathLike,
    queries_path: PathLike,
) -> dict[str, tuple[Query, list[Candidate]]]:
    """Join a first-stage run with document and query texts.

    Only the documents referenced by the run are kept in memory.
    """
    run = read_run(run_path)
    if not run:
        logger.warning("run file %s holds no records", run_path)
        return {}

    needed = {rec.doc_id for records in run.values() for rec in records}
    if not Path(corpus_path).exists():
        raise MissingDocument(sorted(needed), f"corpus file not found: {corpus_path}")
    texts = {
        doc_id: text for doc_id, text in read_jsonl(corpus_path, "id", "contents")
        if doc_id in needed
    }
    missing = [
        rec.doc_id for records in run.values() for rec in records if rec.doc_id not in texts
    ]
    if missing:
        raise MissingDocument(list(dict.fromkeys(missing)))

    queries = load_queries(queries_path)
    absent = [qid for qid in run if qid not in queries]
    if absent:
        raise MissingQuery(absent[:10])

    return {
        qid: (
            queries[qid],
            [Candidate(r.doc_id, texts[r.doc_id], r.score, r.rank) for r in records],
        )
        for qid, records in run.items()
    }


def _ordered_ids(ranking: AssembledRanking | Sequence[Candidate] | Sequence[str]) -> list[str]:
    items = ranking.ordered if isinstance(ranking, AssembledRanking) else ranking
    return [c if isinstance(c, str) else c.doc_id for c in items]


def format_run(rankings: Mapping[str, AssembledRanking | Sequence[Candidate] | Sequence[str]], tag: str) -> str:
    """Render run lines; the score column is ``N - rank + 1``."""
    lines = []
    for qid in sorted(rankings):
        ids = _ordered_ids(rankings[qid])
        n = len(ids)
        for rank, doc_id in enumerate(ids, start=1):
            lines.append(f"{qid} Q0 {doc_id} {rank} {n - rank + 1} {tag}\n")
    return "".join(lines)


def write_run(rankings: Mapping[str, AssembledRanking | Sequence[Candidate] | Sequence[str]], tag: str, path: PathLike) -> None:
    if any(ch.isspace() for ch in tag) or not tag:
        raise ValueError(f"run tag must be a single non-empty token: {tag!r}")
    Path(path).write_text(format_run(rankings, tag), encoding="utf-8")


def read_qrels(path: PathLike) -> dict[str, dict[str, int]]:
    """Parse ``qid 0 docid rel`` lines; negative grades are read as 0."""
    qrels: dict[str, dict[str, int]] = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise MalformedLine(line_no, f"expected 4 columns, got {len(parts)}", path)
            qid, _iter, doc_id, rel = parts
            try:
                grade = int(rel)
            except ValueError as exc:
                raise MalformedLine(line_no, str(exc), path) from exc
            if doc_id in qrels[qid]:
                raise MalformedLine(line_no, f"duplicate judgment for ({qid}, {doc_id})", path)
            qrels[qid][doc_id] = max(grade, 0)
    return dict(qrels)


def _as_grades(qrels: Mapping[str, int] | Iterable[Qrel]) -> dict[str, int]:
    if isinstance(qrels, Mapping):
        return dict(qrels)
    return {q.doc_id: q.relevance for q in qrels}


def _dcg(grades: Iterable[int]) -> float:
    return sum((2 ** rel - 1) / math.log2(i + 1) for i, rel in enumerate(grades, start=1))


def ndcg_at_k(
    ranking: Sequence[str],
    qrels: Mapping[str, int] | Iterable[Qrel],
    k: int,
) -> float:
    """nDCG@k with gain ``2**rel - 1`` and discount ``log2(i + 1)``.

    Unjudged documents have relevance 0. Returns 0.0 when no judged document
    is relevant.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    grades = _as_grades(qrels)
    ideal = _dcg(sorted(grades.values(), reverse=True)[:k])
    if ideal == 0:
        return 0.0
    return _dcg(grades.get(doc_id, 0) for doc_id in ranking[:k]) / ideal


@dataclass
class EvalReport:
    cutoffs: tuple[int, ...]
    per_query: dict[str, dict[int, float]]
    mean: dict[int, float]
    excluded: list[str]

    @property
    def n_evaluated(self) -> int:
        return len(self.per_query)


def evaluate_rankings(
    rankings: Mapping[str, Sequence[str]],
    qrels: Mapping[str, Mapping[str, int]],
    cutoffs: Sequence[int] = (1, 5, 10),
) -> EvalReport:
    per_query: dict[str, dict[int, float]] = {}
    excluded = []
    for qid in sorted(rankings):
        judged = qrels.get(qid)
        if not judged:
            excluded.append(qid)
            continue
        per_query[qid] = {k: ndcg_at_k(rankings[qid], judged, k) for k in cutoffs}
    mean = {
        k: (sum(scores[k] for scores in per_query.values()) / len(per_query) if per_query else 0.0)
        for k in cutoffs
    }
    return EvalReport(tuple(cutoffs), per_query, mean, excluded)


def evaluate_run(
    run_path: PathLike,
    qrels_path: PathLike,
    cutoffs: Sequence[int] = (1, 5, 10),
) -> EvalReport:
    """Per-query and mean nDCG; queries without judgments are excluded."""
    run = read_run(run_path, strict=False)
    rankings = {qid: [r.doc_id for r in records] for qid, records in run.items()}
    report = evaluate_rankings(rankings, read_qrels(qrels_path), cutoffs)
    if report.excluded:
        logger.info("%d run queries have no judgments and were excluded", len(report.excluded))
    return report
