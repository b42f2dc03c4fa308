"""Domain types shared across the reranking pipeline.

Everything here is an immutable value object. Sequences are stored as tuples
so that instances can be shared freely between worker threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class BracketRankError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateDocId(BracketRankError, ValueError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate doc_id: {doc_id!r}")
        self.doc_id = doc_id


class RankGapOrDuplicate(BracketRankError, ValueError):
    def __init__(self, detail: str):
        super().__init__(f"first-stage ranks are not a permutation of 1..N: {detail}")
        self.detail = detail


class Strategy(str, enum.Enum):
    SINGLE_ELIM = "single"
    DOUBLE_ELIM = "double"
    ROUND_ROBIN = "round_robin"


class Bracket(str, enum.Enum):
    WINNER = "winner"
    LOSER = "loser"
    INITIAL = "initial"
    ROUND_ROBIN = "round_robin"
    DOUBLE_ELIM_LOSERS = "double_elim_losers"


class GroupSource(str, enum.Enum):
    INITIAL_GROUP = "initial_group"
    MATCH_RESULT = "match_result"


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id or not self.text:
            raise ValueError("query id and text must be non-empty")
        if any(ch.isspace() for ch in self.id):
            raise ValueError(f"query id must not contain whitespace: {self.id!r}")


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    text: str
    first_stage_score: float
    first_stage_rank: int

    def __post_init__(self) -> None:
        if not self.doc_id or any(ch.isspace() for ch in self.doc_id):
            raise ValueError(f"invalid doc_id: {self.doc_id!r}")
        if self.first_stage_rank < 1:
            raise ValueError(f"first_stage_rank must be positive, got {self.first_stage_rank}")


@dataclass(frozen=True)
class TournamentConfig:
    g_max: int = 20
    strategy: Strategy = Strategy.SINGLE_ELIM
    max_parallel_matches: int = 1
    ranker_retry_limit: int = 0
    tag: str = "bracketrank"

    def __post_init__(self) -> None:
        if self.g_max < 2:
            raise ValueError(f"g_max must be >= 2, got {self.g_max}")
        if self.max_parallel_matches < 1:
            raise ValueError("max_parallel_matches must be >= 1")
        if self.ranker_retry_limit < 0:
            raise ValueError("ranker_retry_limit must be >= 0")
        object.__setattr__(self, "strategy", Strategy(self.strategy))


@dataclass(frozen=True)
class TokenBudget:
    """Per-call token budget used to derive the maximum group size.

    Attributes:
        budget_b: Tokens available to one call.
        overhead_t: Fixed prompt overhead (instructions, delimiters).
        avg_passage_len: Average passage length in tokens.
        per_doc_framing_h: Per-passage framing cost (identifier, separators).
    """

    budget_b: int
    overhead_t: int
    avg_passage_len: int
    per_doc_framing_h: int = 0

    def __post_init__(self) -> None:
        if self.budget_b < 1 or self.avg_passage_len < 1:
            raise ValueError("budget_b and avg_passage_len must be positive")
        if self.overhead_t < 0 or self.per_doc_framing_h < 0:
            raise ValueError("overhead_t and per_doc_framing_h must be non-negative")


@dataclass(frozen=True)
class RankedGroup:
    members: tuple[Candidate, ...]
    reasoning_text: str = ""
    source: GroupSource = GroupSource.INITIAL_GROUP

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        ids = [c.doc_id for c in self.members]
        if len(set(ids)) != len(ids):
            seen: set[str] = set()
            for doc_id in ids:
                if doc_id in seen:
                    raise DuplicateDocId(doc_id)
                seen.add(doc_id)

    @property
    def doc_ids(self) -> list[str]:
        return [c.doc_id for c in self.members]

    @property
    def fallback_used(self) -> bool:
        return self.reasoning_text.startswith(FALLBACK_HEADER)


FALLBACK_HEADER = "[FallbackUsed]"


@dataclass(frozen=True)
class BracketSplit:
    winner_half: tuple[Candidate, ...]
    loser_half: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "winner_half", tuple(self.winner_half))
        object.__setattr__(self, "loser_half", tuple(self.loser_half))

    @property
    def is_midpoint(self) -> bool:
        """True for a regular split; byes put every member in the winner half."""
        k = len(self.winner_half) + len(self.loser_half)
        return len(self.winner_half) == math.ceil(k / 2)


@dataclass(frozen=True)
class Group:
    """A labelled group travelling through a bracket."""

    gid: str
    members: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class MatchRecord:
    round_index: int
    bracket: Bracket
    input_group_ids: tuple[str, ...]
    combined_ranking: RankedGroup
    split: BracketSplit
    bye: bool = False
    match_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_group_ids", tuple(self.input_group_ids))
        if self.bye and self.split.loser_half:
            raise ValueError("a bye cannot produce a loser half")


@dataclass
class TournamentTrace:
    """Mutable accumulator for everything that happened in one tournament.

    ``llm_calls`` counts ranker invocations (initial groups plus non-bye
    matches); ``docs_processed`` counts documents placed into those prompts.
    """

    initial_rankings: list[RankedGroup] = field(default_factory=list)
    matches: list[MatchRecord] = field(default_factory=list)
    llm_calls: int = 0
    docs_processed: int = 0
    rounds_per_bracket: dict[Bracket, int] = field(default_factory=dict)
    standings: dict[str, tuple[int, float]] = field(default_factory=dict)

    def record_call(self, n_docs: int) -> None:
        self.llm_calls += 1
        self.docs_processed += n_docs

    def merge(self, other: "TournamentTrace") -> None:
        self.initial_rankings.extend(other.initial_rankings)
        self.matches.extend(other.matches)
        self.llm_calls += other.llm_calls
        self.docs_processed += other.docs_processed
        self.rounds_per_bracket.update(other.rounds_per_bracket)
        self.standings.update(other.standings)

    def matches_in(self, bracket: Bracket, *, include_byes: bool = False) -> list[MatchRecord]:
        return [
            m for m in self.matches
            if m.bracket == bracket and (include_byes or not m.bye)
        ]


@dataclass(frozen=True)
class AssembledRanking:
    ordered: tuple[Candidate, ...]
    trace: TournamentTrace = field(compare=False, default_factory=TournamentTrace)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ordered", tuple(self.ordered))

    @property
    def doc_ids(self) -> list[str]:
        return [c.doc_id for c in self.ordered]


def validate_candidates(candidates: Sequence[Candidate]) -> None:
    """Raise if doc ids repeat or first-stage ranks are not exactly 1..N."""
    seen: set[str] = set()
    for c in candidates:
        if c.doc_id in seen:
            raise DuplicateDocId(c.doc_id)
        seen.add(c.doc_id)
    ranks = sorted(c.first_stage_rank for c in candidates)
    for expected, got in enumerate(ranks, start=1):
        if got != expected:
            raise RankGapOrDuplicate(f"expected rank {expected}, found {got}")


def sort_by_first_stage(candidates: Iterable[Candidate]) -> list[Candidate]:
    return sorted(candidates, key=lambda c: c.first_stage_rank)
