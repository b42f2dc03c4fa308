"""Zero-shot listwise reranking with winner/loser bracket elimination."""

from .core import (
    AssembledRanking,
    Bracket,
    BracketSplit,
    Candidate,
    MatchRecord,
    Query,
    RankedGroup,
    Strategy,
    TokenBudget,
    TournamentConfig,
    TournamentTrace,
    validate_candidates,
)
from .eval_io import evaluate_run, load_candidates, ndcg_at_k, write_run
from .grouping import derive_g_max, plan_groups, split_into_groups
from .llm_client import ChatClient, EndpointConfig
from .prompting import PromptTemplate, build_prompt, parse_ranking
from .rankers import IdentityRanker, LlmRanker, OracleRanker, rank_group
from .tournament import (
    estimate_cost,
    run_double_elimination,
    run_round_robin,
    run_single_elimination,
    run_tournament,
)

__version__ = "0.1.0"
