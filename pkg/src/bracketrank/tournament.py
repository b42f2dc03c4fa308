"""Bracket tournament engine.

Initial groups are ranked once, split at the midpoint into a winner track and
a loser track, and each track is reduced by head-to-head matches: two groups
are concatenated, re-ranked listwise, and the top half advances. The final
order places each track's champion first, then the halves it eliminated,
latest round first; the winner track precedes the loser track.

Double elimination and round robin are provided as alternative strategies.

Matches of one round may run concurrently, but results are always consumed
in match order, so deterministic rankers give identical output for any
degree of parallelism.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from functools import partial
from itertools import combinations
from typing import IO, Callable, Iterator, Sequence, TypeVar

from .core import (
    AssembledRanking,
    Bracket,
    BracketSplit,
    Candidate,
    Group,
    GroupSource,
    MatchRecord,
    Query,
    RankedGroup,
    Strategy,
    TournamentConfig,
    TournamentTrace,
    sort_by_first_stage,
    validate_candidates,
)
from .grouping import plan_groups, split_into_groups
from .rankers import IdentityRanker, Ranker, rank_group

T = TypeVar("T")

Eliminated = list[tuple[int, tuple[Candidate, ...]]]


def split_group(ranked: RankedGroup | Sequence[Candidate]) -> BracketSplit:
    members = tuple(ranked.members if isinstance(ranked, RankedGroup) else ranked)
    cut = math.ceil(len(members) / 2)
    return BracketSplit(members[:cut], members[cut:])


def _members(group: Group | Sequence[Candidate]) -> tuple[Candidate, ...]:
    return group.members if isinstance(group, Group) else tuple(group)


def _gid(group: Group | Sequence[Candidate], fallback: str) -> str:
    return group.gid if isinstance(group, Group) else fallback


def run_match(
    query: Query,
    group_a: Group | Sequence[Candidate],
    group_b: Group | Sequence[Candidate] | None,
    ranker: Ranker,
    *,
    round_index: int = 0,
    bracket: Bracket = Bracket.WINNER,
    match_index: int = 0,
    max_combined: int | None = None,
) -> MatchRecord:
    """Play one head-to-head match; ``group_b=None`` records a bye."""
    a = _members(group_a)
    if not a:
        raise ValueError("match groups must be non-empty")
    if group_b is None:
        return MatchRecord(
            round_index=round_index,
            bracket=bracket,
            input_group_ids=(_gid(group_a, "a"),),
            combined_ranking=RankedGroup(a, source=GroupSource.MATCH_RESULT),
            split=BracketSplit(a, ()),
            bye=True,
            match_index=match_index,
        )
    b = _members(group_b)
    if not b:
        raise ValueError("match groups must be non-empty")
    combined = a + b
    if max_combined is not None and len(combined) > max_combined:
        raise AssertionError(
            f"match of {len(combined)} documents exceeds the cap of {max_combined}"
        )
    ranked = replace(rank_group(query, combined, ranker), source=GroupSource.MATCH_RESULT)
    _check_permutation(combined, ranked.members)
    return MatchRecord(
        round_index=round_index,
        bracket=bracket,
        input_group_ids=(_gid(group_a, "a"), _gid(group_b, "b")),
        combined_ranking=ranked,
        split=split_group(ranked),
        bye=False,
        match_index=match_index,
    )


def _check_permutation(before: Sequence[Candidate], after: Sequence[Candidate]) -> None:
    if sorted(c.doc_id for c in before) != sorted(c.doc_id for c in after):
        raise AssertionError("ranker returned a group that is not a permutation of its input")


class _Runner:
    """Runs a batch of thunks inline or on a thread pool; results keep input order."""

    def __init__(self, pool: ThreadPoolExecutor | None = None):
        self.pool = pool

    def map(self, thunks: Sequence[Callable[[], T]]) -> list[T]:
        if self.pool is None or len(thunks) <= 1:
            return [fn() for fn in thunks]
        futures = [self.pool.submit(fn) for fn in thunks]
        return [f.result() for f in futures]


@contextmanager
def _runner(config: TournamentConfig) -> Iterator[_Runner]:
    if config.max_parallel_matches <= 1:
        yield _Runner()
        return
    with ThreadPoolExecutor(max_workers=config.max_parallel_matches) as pool:
        yield _Runner(pool)


def _run_round(
    query: Query,
    groups: Sequence[Group],
    ranker: Ranker,
    round_index: int,
    bracket: Bracket,
    runner: _Runner,
    max_combined: int | None,
) -> list[MatchRecord]:
    """Pair adjacent groups (0-1, 2-3, ...); an odd trailing group gets a bye."""
    thunks = [
        partial(
            run_match, query, groups[i], groups[i + 1], ranker,
            round_index=round_index, bracket=bracket, match_index=i // 2,
            max_combined=max_combined,
        )
        for i in range(0, len(groups) - 1, 2)
    ]
    records = runner.map(thunks)
    if len(groups) % 2 == 1:
        records.append(run_match(
            query, groups[-1], None, ranker,
            round_index=round_index, bracket=bracket, match_index=len(groups) // 2,
        ))
    return records


def _log_match(trace: TournamentTrace, record: MatchRecord) -> None:
    trace.matches.append(record)
    if not record.bye:
        trace.record_call(len(record.combined_ranking.members))


def _advance(record: MatchRecord, prefix: str) -> Group:
    if record.bye:
        return Group(record.input_group_ids[0], record.split.winner_half)
    return Group(f"{prefix}-r{record.round_index}-m{record.match_index}", record.split.winner_half)


def run_iterative_bracket(
    query: Query,
    bracket: Sequence[Group | Sequence[Candidate]],
    ranker: Ranker,
    trace: TournamentTrace,
    *,
    bracket_kind: Bracket = Bracket.WINNER,
    max_combined: int | None = None,
    runner: _Runner | None = None,
) -> tuple[Group, Eliminated]:
    """Reduce a bracket to one group by single-elimination rounds.

    Returns the surviving group and every eliminated loser half tagged with
    the round it lost in, in (round, match) order.
    """
    if not bracket:
        raise ValueError("bracket must hold at least one group")
    runner = runner or _Runner()
    prefix = bracket_kind.value
    groups = [
        g if isinstance(g, Group) else Group(f"{prefix}{i}", tuple(g))
        for i, g in enumerate(bracket)
    ]
    eliminated: Eliminated = []
    round_index = 0
    while len(groups) > 1:
        records = _run_round(query, groups, ranker, round_index, bracket_kind, runner, max_combined)
        groups = []
        for rec in records:
            _log_match(trace, rec)
            groups.append(_advance(rec, prefix))
            if not rec.bye:
                eliminated.append((round_index, rec.split.loser_half))
        round_index += 1
    trace.rounds_per_bracket[bracket_kind] = round_index
    return groups[0], eliminated


def assemble_track(final_group: Group | None, eliminated: Eliminated) -> list[Candidate]:
    """Champion first, then eliminated halves by descending elimination round."""
    out = list(final_group.members) if final_group is not None else []
    # stable sort keeps match order, then within-half order, inside a round
    for _, half in sorted(eliminated, key=lambda item: -item[0]):
        out.extend(half)
    return out


def _prepare(candidates: Sequence[Candidate]) -> list[Candidate]:
    ordered = sort_by_first_stage(candidates)
    validate_candidates(ordered)
    return ordered


def _rank_initial(
    query: Query,
    candidates: Sequence[Candidate],
    g_max: int,
    ranker: Ranker,
    trace: TournamentTrace,
    runner: _Runner,
) -> list[RankedGroup]:
    groups = split_into_groups(candidates, plan_groups(len(candidates), g_max))
    ranked = runner.map([partial(rank_group, query, g, ranker) for g in groups])
    out = []
    for group, result in zip(groups, ranked):
        _check_permutation(group, result.members)
        result = replace(result, source=GroupSource.INITIAL_GROUP)
        trace.initial_rankings.append(result)
        trace.record_call(len(group))
        out.append(result)
    return out


def _initial_tracks(ranked: Sequence[RankedGroup]) -> tuple[list[Group], list[Group]]:
    winners, losers = [], []
    for i, group in enumerate(ranked):
        split = split_group(group)
        winners.append(Group(f"g{i}.W", split.winner_half))
        if split.loser_half:
            losers.append(Group(f"g{i}.L", split.loser_half))
    return winners, losers


def _match_cap(g_max: int) -> int:
    return 2 * math.ceil(g_max / 2)


def run_single_elimination(
    query: Query,
    candidates: Sequence[Candidate],
    config: TournamentConfig,
    ranker: Ranker,
) -> AssembledRanking:
    cands = _prepare(candidates)
    trace = TournamentTrace()
    if not cands:
        return AssembledRanking((), trace)

    with _runner(config) as runner:
        ranked = _rank_initial(query, cands, config.g_max, ranker, trace, runner)
        winners, losers = _initial_tracks(ranked)
        cap = _match_cap(config.g_max)

        def track(groups: list[Group], kind: Bracket):
            sub = TournamentTrace()
            if not groups:
                sub.rounds_per_bracket[kind] = 0
                return sub, None, []
            final, eliminated = run_iterative_bracket(
                query, groups, ranker, sub,
                bracket_kind=kind, max_combined=cap, runner=runner,
            )
            return sub, final, eliminated

        if runner.pool is not None:
            with ThreadPoolExecutor(max_workers=2) as tracks:
                w_future = tracks.submit(track, winners, Bracket.WINNER)
                l_future = tracks.submit(track, losers, Bracket.LOSER)
                w_result, l_result = w_future.result(), l_future.result()
        else:
            w_result = track(winners, Bracket.WINNER)
            l_result = track(losers, Bracket.LOSER)

    ordered: list[Candidate] = []
    for sub, final, eliminated in (w_result, l_result):
        trace.merge(sub)
        ordered.extend(assemble_track(final, eliminated))
    return AssembledRanking(tuple(ordered), trace)


def run_double_elimination(
    query: Query,
    candidates: Sequence[Candidate],
    config: TournamentConfig,
    ranker: Ranker,
) -> AssembledRanking:
    """Losers of winner-track matches drop into the loser track.

    Initial loser halves count as having lost once (at the initial split),
    as do groups dropping down from the winner track; losing a loser-track
    match is the second loss and eliminates the half for good. Drop-downs
    from round ``r`` join the loser track in round ``r + 1``, after the
    loser-track survivors, in match order.
    """
    cands = _prepare(candidates)
    trace = TournamentTrace()
    if not cands:
        return AssembledRanking((), trace)

    cap = _match_cap(config.g_max)
    prefix_w, prefix_l = Bracket.WINNER.value, Bracket.DOUBLE_ELIM_LOSERS.value
    with _runner(config) as runner:
        ranked = _rank_initial(query, cands, config.g_max, ranker, trace, runner)
        winners, losers = _initial_tracks(ranked)
        eliminated: Eliminated = []
        w_rounds = l_rounds = 0
        round_index = 0
        while len(winners) > 1 or len(losers) > 1:
            w_pairs = len(winners) // 2 if len(winners) > 1 else 0
            batch = []
            if len(winners) > 1:
                batch += [
                    partial(run_match, query, winners[i], winners[i + 1], ranker,
                            round_index=round_index, bracket=Bracket.WINNER,
                            match_index=i // 2, max_combined=cap)
                    for i in range(0, len(winners) - 1, 2)
                ]
            if len(losers) > 1:
                batch += [
                    partial(run_match, query, losers[i], losers[i + 1], ranker,
                            round_index=round_index, bracket=Bracket.DOUBLE_ELIM_LOSERS,
                            match_index=i // 2, max_combined=cap)
                    for i in range(0, len(losers) - 1, 2)
                ]
            records = runner.map(batch)
            w_records, l_records = records[:w_pairs], records[w_pairs:]

            dropped: list[Group] = []
            if len(winners) > 1:
                w_rounds += 1
                if len(winners) % 2 == 1:
                    w_records.append(run_match(
                        query, winners[-1], None, ranker, round_index=round_index,
                        bracket=Bracket.WINNER, match_index=len(winners) // 2,
                    ))
                winners = []
                for rec in w_records:
                    _log_match(trace, rec)
                    winners.append(_advance(rec, prefix_w))
                    if not rec.bye:
                        dropped.append(Group(
                            f"{prefix_w}-r{round_index}-m{rec.match_index}.drop",
                            rec.split.loser_half,
                        ))
            if len(losers) > 1:
                l_rounds += 1
                if len(losers) % 2 == 1:
                    l_records.append(run_match(
                        query, losers[-1], None, ranker, round_index=round_index,
                        bracket=Bracket.DOUBLE_ELIM_LOSERS, match_index=len(losers) // 2,
                    ))
                losers = []
                for rec in l_records:
                    _log_match(trace, rec)
                    losers.append(_advance(rec, prefix_l))
                    if not rec.bye:
                        eliminated.append((round_index, rec.split.loser_half))
            losers = losers + dropped
            round_index += 1

    trace.rounds_per_bracket[Bracket.WINNER] = w_rounds
    trace.rounds_per_bracket[Bracket.DOUBLE_ELIM_LOSERS] = l_rounds
    ordered = list(winners[0].members)
    ordered.extend(assemble_track(losers[0] if losers else None, eliminated))
    return AssembledRanking(tuple(ordered), trace)


def run_round_robin(
    query: Query,
    candidates: Sequence[Candidate],
    config: TournamentConfig,
    ranker: Ranker,
) -> AssembledRanking:
    """Every pair of initial ranked groups plays one match; nobody is eliminated.

    A group wins a match when it places strictly more documents in the top
    half, ties going to the lower mean position. Group standings are kept in
    ``trace.standings``. Documents are ordered by their own record: matches
    won (in the top half) descending, then mean normalised position, then
    their group's standing, then their position in the initial ranking.
    """
    cands = _prepare(candidates)
    trace = TournamentTrace()
    if not cands:
        return AssembledRanking((), trace)

    with _runner(config) as runner:
        ranked = _rank_initial(query, cands, config.g_max, ranker, trace, runner)
        groups = [Group(f"g{i}", r.members) for i, r in enumerate(ranked)]
        pairs = list(combinations(range(len(groups)), 2))
        records = runner.map([
            partial(run_match, query, groups[i], groups[j], ranker,
                    round_index=0, bracket=Bracket.ROUND_ROBIN, match_index=m,
                    max_combined=2 * config.g_max)
            for m, (i, j) in enumerate(pairs)
        ])

    home = {c.doc_id: gi for gi, g in enumerate(groups) for c in g.members}
    seat = {c.doc_id: pos for g in groups for pos, c in enumerate(g.members)}
    doc_wins = {c.doc_id: 0 for c in cands}
    doc_pos: dict[str, list[float]] = {c.doc_id: [] for c in cands}
    group_wins = [0] * len(groups)
    group_pos: list[list[float]] = [[] for _ in groups]

    for (i, j), rec in zip(pairs, records):
        _log_match(trace, rec)
        members = rec.combined_ranking.members
        span = max(len(members) - 1, 1)
        top = {c.doc_id for c in rec.split.winner_half}
        share = {i: 0, j: 0}
        positions: dict[int, list[float]] = {i: [], j: []}
        for pos, c in enumerate(members):
            g = home[c.doc_id]
            norm = pos / span
            positions[g].append(norm)
            doc_pos[c.doc_id].append(norm)
            if c.doc_id in top:
                share[g] += 1
                doc_wins[c.doc_id] += 1
        mean_i = sum(positions[i]) / len(positions[i])
        mean_j = sum(positions[j]) / len(positions[j])
        if share[i] != share[j]:
            winner = i if share[i] > share[j] else j
        else:
            winner = i if mean_i <= mean_j else j
        group_wins[winner] += 1
        group_pos[i].extend(positions[i])
        group_pos[j].extend(positions[j])

    def _mean(xs: list[float]) -> float:
        return sum(xs) / len(xs) if xs else 0.0

    standing_order = sorted(
        range(len(groups)), key=lambda g: (-group_wins[g], _mean(group_pos[g]), g)
    )
    standing = {g: place for place, g in enumerate(standing_order)}
    for g in range(len(groups)):
        trace.standings[groups[g].gid] = (group_wins[g], _mean(group_pos[g]))
    trace.rounds_per_bracket[Bracket.ROUND_ROBIN] = 1 if pairs else 0

    ordered = sorted(
        (c for g in groups for c in g.members),
        key=lambda c: (
            -doc_wins[c.doc_id],
            _mean(doc_pos[c.doc_id]),
            standing[home[c.doc_id]],
            seat[c.doc_id],
        ),
    )
    return AssembledRanking(tuple(ordered), trace)


STRATEGIES = {
    Strategy.SINGLE_ELIM: run_single_elimination,
    Strategy.DOUBLE_ELIM: run_double_elimination,
    Strategy.ROUND_ROBIN: run_round_robin,
}


def run_tournament(
    query: Query,
    candidates: Sequence[Candidate],
    config: TournamentConfig,
    ranker: Ranker,
) -> AssembledRanking:
    return STRATEGIES[Strategy(config.strategy)](query, candidates, config, ranker)


@dataclass(frozen=True)
class CostEstimate:
    calls: int
    docs_processed: int
    rounds: int


def estimate_cost(n: int, g_max: int, strategy: Strategy | str = Strategy.SINGLE_ELIM) -> CostEstimate:
    """Exact call and document counts, obtained by dry-running the engine.

    Group contents never change the schedule, so an identity ranker over
    placeholder documents yields the same counts as a live run.
    """
    plan_groups(n, g_max)  # argument validation
    query = Query("cost", "cost")
    cands = [Candidate(f"d{i}", "", 0.0, i) for i in range(1, n + 1)]
    config = TournamentConfig(g_max=g_max, strategy=Strategy(strategy))
    trace = run_tournament(query, cands, config, IdentityRanker()).trace
    rounds = max(trace.rounds_per_bracket.values(), default=0)
    return CostEstimate(trace.llm_calls, trace.docs_processed, rounds)


def trace_lines(qid: str, trace: TournamentTrace) -> list[str]:
    """One JSON object per initial ranking and per match, in execution order."""
    lines = []
    for i, group in enumerate(trace.initial_rankings):
        lines.append(json.dumps({
            "qid": qid,
            "bracket": Bracket.INITIAL.value,
            "round": 0,
            "match": i,
            "bye": False,
            "inputs": [f"g{i}"],
            "ranking": group.doc_ids,
            "winner": None,
            "loser": None,
            "fallback": group.fallback_used,
            "reasoning": group.reasoning_text,
        }))
    for rec in trace.matches:
        lines.append(json.dumps({
            "qid": qid,
            "bracket": rec.bracket.value,
            "round": rec.round_index,
            "match": rec.match_index,
            "bye": rec.bye,
            "inputs": list(rec.input_group_ids),
            "ranking": rec.combined_ranking.doc_ids,
            "winner": [c.doc_id for c in rec.split.winner_half],
            "loser": [c.doc_id for c in rec.split.loser_half],
            "fallback": rec.combined_ranking.fallback_used,
            "reasoning": rec.combined_ranking.reasoning_text,
        }))
    return lines


def write_trace(fh: IO[str], qid: str, trace: TournamentTrace) -> None:
    for line in trace_lines(qid, trace):
        fh.write(line + "\n")
