"""Listwise rankers: one call orders one group of candidates.

Three kinds share the same ``rank(query, group)`` surface:

* :class:`LlmRanker` prompts a chat model and parses its ranking line.
* :class:`OracleRanker` sorts by a known score table (tests, upper bounds).
* :class:`IdentityRanker` returns the group unchanged (dry runs, cost counts).
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .core import FALLBACK_HEADER, BracketRankError, Candidate, Query, RankedGroup
from .llm_client import AuthError, MalformedResponse, RequestTooLarge, TransportError
from .prompting import PromptTemplate, Unparseable, build_prompt, parse_ranking

logger = logging.getLogger(__name__)


class MissingOracleScore(BracketRankError, KeyError):
    def __init__(self, doc_id: str):
        super().__init__(doc_id)
        self.doc_id = doc_id

    def __str__(self) -> str:
        return f"oracle has no score for doc_id {self.doc_id!r}"


class Completer(Protocol):
    def complete(self, system_message: str, user_message: str) -> str: ...


class Ranker(Protocol):
    def rank(self, query: Query, group: Sequence[Candidate]) -> RankedGroup: ...


class IdentityRanker:
    def rank(self, query: Query, group: Sequence[Candidate]) -> RankedGroup:
        return RankedGroup(tuple(group))


class OracleRanker:
    """Sort by score descending; ties go to the better first-stage rank."""

    def __init__(self, scores: Mapping[str, float]):
        for doc_id, score in scores.items():
            if not math.isfinite(score):
                raise ValueError(f"oracle score for {doc_id!r} is not finite")
        self.scores = dict(scores)

    @classmethod
    def from_file(cls, path: str | Path) -> "OracleRanker":
        return cls(load_oracle_scores(path))

    def rank(self, query: Query, group: Sequence[Candidate]) -> RankedGroup:
        for c in group:
            if c.doc_id not in self.scores:
                raise MissingOracleScore(c.doc_id)
        ordered = sorted(group, key=lambda c: (-self.scores[c.doc_id], c.first_stage_rank))
        return RankedGroup(tuple(ordered))


class LlmRanker:
    """Reasoning-enhanced listwise ranking through a chat endpoint.

    Any unrecoverable failure (no parseable identifier after
    ``retry_limit`` extra attempts, or transport errors once the client has
    exhausted its own retries) falls back to the input order; the returned
    group's ``reasoning_text`` then starts with ``[FallbackUsed]``.
    Authentication errors are never swallowed.
    """

    def __init__(
        self,
        client: Completer,
        template: PromptTemplate | None = None,
        reasoning: bool = True,
        retry_limit: int = 0,
        max_passage_chars: int = 4000,
    ):
        self.client = client
        self.template = template or PromptTemplate()
        self.reasoning = reasoning
        self.retry_limit = retry_limit
        self.max_passage_chars = max_passage_chars

    def rank(self, query: Query, group: Sequence[Candidate]) -> RankedGroup:
        group = tuple(group)
        system, user = build_prompt(
            query, group, self.template, self.reasoning, self.max_passage_chars
        )
        failure = ""
        for _ in range(self.retry_limit + 1):
            try:
                raw = self.client.complete(system, user)
                parsed = parse_ranking(raw, len(group))
            except AuthError:
                raise
            except (Unparseable, TransportError, MalformedResponse, RequestTooLarge) as exc:
                failure = f"{type(exc).__name__}: {exc}"
                logger.warning("ranking call failed for query %s: %s", query.id, failure)
                continue
            members = tuple(group[i - 1] for i in parsed.order)
            return RankedGroup(members, parsed.reasoning_text)
        return RankedGroup(group, f"{FALLBACK_HEADER} {failure}")


def rank_group(query: Query, group: Sequence[Candidate], ranker: Ranker) -> RankedGroup:
    if not group:
        raise ValueError("cannot rank an empty group")
    return ranker.rank(query, group)


def load_oracle_scores(path: str | Path) -> dict[str, float]:
    """Read ``doc_id<TAB>score`` lines; blank lines and ``#`` comments are skipped."""
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'doc_id<TAB>score'")
            scores[parts[0]] = float(parts[1])
    return scores
