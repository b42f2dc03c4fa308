"""Listwise prompt rendering and ranking-output parsing.

Passages are numbered locally ``[1]..[k]`` inside every prompt; callers map
identifiers back to documents by position.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import BracketRankError, Candidate, Query

DEFAULT_MAX_PASSAGE_CHARS = 4000

SYSTEM_TEXT = (
    "You are BracketRank, an intelligent assistant that can rank passages "
    "based on their relevancy to the query."
)

INSTRUCTION_PREAMBLE = (
    "I will provide you with {K} passages, each indicated by number identifier []. \n"
    "Rank the passages based on their relevance to query: {QUERY}."
)

THINK_SCAFFOLD = (
    "First, analyse and compare the content of the passages. Think step-by-step about "
    "how each passage relates to the search query in terms of specificity, coverage, "
    "and relevance. Summarise your thoughts within the following tags:\n"
    "<think>\n"
    "1. Analyse query requirements and key concepts\n"
    "2. Evaluate how well each document addresses these requirements\n"
    "3. Provide explicit reasoning for relevance judgments\n"
    "4. Generate a ranked list based on this reasoning\n"
    "</think>\n\n"
    "Then, based on your reasoning, provide the final ranking. "
)

OUTPUT_FORMAT_REASONING = (
    "The passages should be listed in descending order using their identifiers. "
    "The most relevant passages should be listed first. "
    "The output format should be [1] > [2] > [3]. Only output the ranking result "
    "in this format after the <think> section. Do not say any other words."
)

OUTPUT_FORMAT_PLAIN = (
    "The passages should be listed in descending order using their identifiers. "
    "The most relevant passages should be listed first. "
    "The output format should be [1] > [2] > [3]. Only output the ranking result "
    "in this format. Do not say any other words."
)

_IDENT = re.compile(r"\[(\d+)\]")


class EmptyGroup(BracketRankError, ValueError):
    pass


class Unparseable(BracketRankError, ValueError):
    pass


class Repair(str, enum.Enum):
    DEDUPED_KEPT_FIRST = "deduped_kept_first"
    APPENDED_MISSING_IN_ORIGINAL_ORDER = "appended_missing_in_original_order"
    DROPPED_OUT_OF_RANGE = "dropped_out_of_range"


@dataclass(frozen=True)
class PromptTemplate:
    """Pieces of the listwise ranking prompt.

    ``user_template`` replaces the built-in user message body when set; it may
    use the placeholders ``{QUERY}``, ``{PASSAGES}`` and ``{K}``.
    """

    system_text: str = SYSTEM_TEXT
    instruction_preamble: str = INSTRUCTION_PREAMBLE
    think_block_enabled: bool = True
    output_format_suffix: str = OUTPUT_FORMAT_REASONING
    plain_output_format_suffix: str = OUTPUT_FORMAT_PLAIN
    user_template: str | None = None

    @classmethod
    def from_file(cls, path: str | Path, system_text: str = SYSTEM_TEXT) -> "PromptTemplate":
        body = Path(path).read_text(encoding="utf-8")
        if "{PASSAGES}" not in body:
            raise ValueError(f"template {path} lacks the {{PASSAGES}} placeholder")
        return cls(
            system_text=system_text,
            think_block_enabled="<think>" in body,
            user_template=body,
        )


@dataclass(frozen=True)
class ParsedRanking:
    order: tuple[int, ...]
    repairs_applied: frozenset[Repair] = field(default_factory=frozenset)
    reasoning_text: str = ""


def _fill(text: str, query: str, k: int, passages: str = "") -> str:
    # str.replace, not str.format: passages may contain braces
    return text.replace("{QUERY}", query).replace("{K}", str(k)).replace("{PASSAGES}", passages)


def format_passage(text: str, max_chars: int = DEFAULT_MAX_PASSAGE_CHARS) -> str:
    flat = " ".join(text.split())
    return flat[:max_chars]


def build_prompt(
    query: Query,
    group: Sequence[Candidate],
    template: PromptTemplate | None = None,
    reasoning: bool = True,
    max_passage_chars: int = DEFAULT_MAX_PASSAGE_CHARS,
) -> tuple[str, str]:
    """Render ``(system_message, user_message)`` for one listwise call."""
    if not group:
        raise EmptyGroup("cannot build a ranking prompt for an empty group")
    template = template or PromptTemplate()
    k = len(group)
    passages = "\n".join(
        f"[{i}] {format_passage(c.text, max_passage_chars)}" for i, c in enumerate(group, start=1)
    )

    if template.user_template is not None:
        return template.system_text, _fill(template.user_template, query.text, k, passages)

    parts = [
        _fill(template.instruction_preamble, query.text, k),
        "",
        passages,
        "",
        f"Search Query: {query.text}",
        f"Rank the {k} passages above based on their relevance to the search query.",
        "",
    ]
    if reasoning and template.think_block_enabled:
        parts.append(THINK_SCAFFOLD + template.output_format_suffix)
    else:
        parts.append(template.plain_output_format_suffix)
    return template.system_text, "\n".join(parts)


def split_reasoning(raw: str) -> tuple[str, str]:
    """Return ``(reasoning_text, ranking_region)`` of a model response."""
    close = raw.rfind("</think>")
    if close == -1:
        return "", raw
    region = raw[close + len("</think>"):]
    head = raw[:close]
    opening = head.find("<think>")
    reasoning = head[opening + len("<think>"):] if opening != -1 else head
    return reasoning.strip(), region


def parse_ranking(raw_response: str, k: int) -> ParsedRanking:
    """Extract a full permutation of ``1..k`` from a model response.

    Out-of-range identifiers are dropped, duplicates keep their first
    occurrence, and identifiers never mentioned are appended in ascending
    order. Raises :class:`Unparseable` if no valid identifier is present.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    reasoning, region = split_reasoning(raw_response)

    repairs: set[Repair] = set()
    order: list[int] = []
    seen: set[int] = set()
    for match in _IDENT.finditer(region):
        ident = int(match.group(1))
        if not 1 <= ident <= k:
            repairs.add(Repair.DROPPED_OUT_OF_RANGE)
            continue
        if ident in seen:
            repairs.add(Repair.DEDUPED_KEPT_FIRST)
            continue
        seen.add(ident)
        order.append(ident)

    if not order:
        raise Unparseable(f"no valid passage identifier in response: {raw_response[:200]!r}")
    if len(order) < k:
        repairs.add(Repair.APPENDED_MISSING_IN_ORIGINAL_ORDER)
        order.extend(i for i in range(1, k + 1) if i not in seen)
    return ParsedRanking(tuple(order), frozenset(repairs), reasoning)


def serialize_ranking(order: Sequence[int]) -> str:
    return " > ".join(f"[{i}]" for i in order)
