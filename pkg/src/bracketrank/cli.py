"""Command-line front end: ``bracketrank {rerank,evaluate,cost}``.

Settings are layered: built-in defaults, then an optional ``key = value``
config file (``--config``), then command-line flags. The API key is only ever
read from the environment variable named by ``api_key_env``.

Exit codes: 0 success, 1 some queries failed (they fall back to first-stage
order in the output), 2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .core import AssembledRanking, BracketRankError, Strategy, TournamentConfig, TournamentTrace
from .eval_io import evaluate_run, load_candidates, write_run
from .llm_client import ChatClient, EndpointConfig
from .prompting import PromptTemplate
from .rankers import IdentityRanker, LlmRanker, OracleRanker, Ranker
from .tournament import estimate_cost, run_tournament, trace_lines

logger = logging.getLogger("bracketrank")

DEFAULTS: dict[str, Any] = {
    "run": None,
    "corpus": None,
    "queries": None,
    "qrels": None,
    "out": None,
    "trace": None,
    "g_max": 20,
    "strategy": "single",
    "ranker": "llm",
    "oracle_scores": None,
    "reasoning": "on",
    "template": None,
    "model": "gpt-4",
    "base_url": "https://api.openai.com/v1",
    "api_key_env": "OPENAI_API_KEY",
    "temperature": 0.0,
    "timeout": 120.0,
    "max_retries": 3,
    "retry_limit": 1,
    "max_parallel_matches": 4,
    "jobs": 1,
    "tag": "bracketrank",
    "cutoffs": "1,5,10",
    "per_query_csv": None,
    "n": 100,
    "dry_run": False,
}

_INT_KEYS = {"g_max", "max_retries", "retry_limit", "max_parallel_matches", "jobs", "n"}
_FLOAT_KEYS = {"temperature", "timeout"}
_BOOL_KEYS = {"dry_run"}


class UsageError(BracketRankError):
    pass


def read_config_file(path: str | Path) -> dict[str, Any]:
    parser = configparser.ConfigParser()
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[bracketrank]\n" + text)
    out: dict[str, Any] = {}
    for key, value in parser["bracketrank"].items():
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r} in {path}")
        if key in _INT_KEYS:
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        elif key in _BOOL_KEYS:
            out[key] = parser["bracketrank"].getboolean(key)
        else:
            out[key] = value
    return out


def resolve_settings(args: argparse.Namespace) -> dict[str, Any]:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if key in settings and value is not None and value is not False:
            settings[key] = value
    return settings


def _require(settings: dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if not settings.get(k)]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _fail(exc: BaseException, code: int = 2) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def build_ranker(settings: dict[str, Any]) -> tuple[Ranker, ChatClient | None]:
    if settings["dry_run"]:
        return IdentityRanker(), None
    kind = settings["ranker"]
    if kind == "identity":
        return IdentityRanker(), None
    if kind == "oracle":
        _require(settings, "oracle_scores")
        return OracleRanker.from_file(settings["oracle_scores"]), None
    if kind == "llm":
        endpoint = EndpointConfig(
            base_url=settings["base_url"],
            model_name=settings["model"],
            api_key_env_var=settings["api_key_env"],
            timeout_seconds=settings["timeout"],
            max_retries=settings["max_retries"],
            temperature=settings["temperature"],
        )
        template = PromptTemplate.from_file(settings["template"]) if settings["template"] else None
        client = ChatClient(endpoint)
        ranker = LlmRanker(
            client,
            template=template,
            reasoning=settings["reasoning"] == "on",
            retry_limit=settings["retry_limit"],
        )
        return ranker, client
    raise UsageError(f"unknown ranker {kind!r}")


def cmd_rerank(settings: dict[str, Any]) -> int:
    try:
        _require(settings, "run", "corpus", "queries", "out")
        config = TournamentConfig(
            g_max=settings["g_max"],
            strategy=Strategy(settings["strategy"]),
            max_parallel_matches=settings["max_parallel_matches"],
            ranker_retry_limit=settings["retry_limit"],
            tag=settings["tag"],
        )
        data = load_candidates(settings["run"], settings["corpus"], settings["queries"])
        ranker, client = build_ranker(settings)
    except (BracketRankError, OSError, ValueError) as exc:
        return _fail(exc)

    def work(qid: str) -> tuple[str, AssembledRanking, str | None]:
        query, candidates = data[qid]
        try:
            return qid, run_tournament(query, candidates, config, ranker), None
        except Exception as exc:  # one bad query must not sink the batch
            logger.error("query %s failed: %s", qid, exc)
            fallback = AssembledRanking(tuple(candidates), TournamentTrace())
            return qid, fallback, f"{type(exc).__name__}: {exc}"

    qids = sorted(data)
    try:
        with ThreadPoolExecutor(max_workers=max(1, settings["jobs"])) as pool:
            results = list(pool.map(work, qids))
    finally:
        if client is not None:
            client.close()

    rankings = {qid: ranking for qid, ranking, _ in results}
    failed = {qid: err for qid, _, err in results if err}
    try:
        write_run(rankings, config.tag, settings["out"])
        if settings["trace"]:
            with open(settings["trace"], "w", encoding="utf-8") as fh:
                for qid in qids:
                    for line in trace_lines(qid, rankings[qid].trace):
                        fh.write(line + "\n")
    except (OSError, ValueError) as exc:
        return _fail(exc)

    total_calls = total_docs = 0
    for qid in qids:
        trace = rankings[qid].trace
        total_calls += trace.llm_calls
        total_docs += trace.docs_processed
        print(f"{qid} calls={trace.llm_calls} docs_processed={trace.docs_processed}")
    print(f"TOTAL queries={len(qids)} calls={total_calls} docs_processed={total_docs}")
    if client is not None:
        s = client.stats
        print(f"HTTP requests_sent={s.requests_sent} requests_failed={s.requests_failed} "
              f"prompt_tokens_est={s.prompt_tokens_est}")
    if failed:
        print(json.dumps({"error": "QueryFailures", "failed_qids": sorted(failed),
                          "details": failed}), file=sys.stderr)
        return 1
    return 0


def _cutoffs(raw: str | Sequence[int]) -> list[int]:
    if isinstance(raw, str):
        return [int(x) for x in raw.split(",") if x.strip()]
    return list(raw)


def cmd_evaluate(settings: dict[str, Any]) -> int:
    try:
        _require(settings, "run", "qrels")
        cutoffs = _cutoffs(settings["cutoffs"])
        report = evaluate_run(settings["run"], settings["qrels"], cutoffs)
    except (BracketRankError, OSError, ValueError) as exc:
        return _fail(exc)

    print(f"{'metric':<10}{'mean':>10}")
    for k in cutoffs:
        print(f"{'nDCG@' + str(k):<10}{report.mean[k]:>10.4f}")
    print(f"queries evaluated={report.n_evaluated} excluded={len(report.excluded)}")
    if settings["per_query_csv"]:
        with open(settings["per_query_csv"], "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["qid"] + [f"ndcg@{k}" for k in cutoffs])
            for qid, scores in report.per_query.items():
                writer.writerow([qid] + [f"{scores[k]:.6f}" for k in cutoffs])
    return 0


def cmd_cost(settings: dict[str, Any]) -> int:
    try:
        est = estimate_cost(settings["n"], settings["g_max"], Strategy(settings["strategy"]))
    except (BracketRankError, ValueError) as exc:
        return _fail(exc)
    print(f"calls={est.calls} docs_processed={est.docs_processed} rounds={est.rounds}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bracketrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--g-max", dest="g_max", type=int)
    common.add_argument("--strategy", choices=[s.value for s in Strategy])

    rerank = sub.add_parser("rerank", parents=[common], help="rerank a first-stage run")
    rerank.add_argument("--run")
    rerank.add_argument("--corpus")
    rerank.add_argument("--queries")
    rerank.add_argument("--out")
    rerank.add_argument("--trace", help="write a JSON-lines match audit here")
    rerank.add_argument("--ranker", choices=["llm", "oracle", "identity"])
    rerank.add_argument("--oracle-scores", dest="oracle_scores")
    rerank.add_argument("--reasoning", choices=["on", "off"])
    rerank.add_argument("--template", help="user-message template with {QUERY} {PASSAGES} {K}")
    rerank.add_argument("--model")
    rerank.add_argument("--base-url", dest="base_url")
    rerank.add_argument("--api-key-env", dest="api_key_env")
    rerank.add_argument("--max-parallel-matches", dest="max_parallel_matches", type=int)
    rerank.add_argument("--jobs", type=int)
    rerank.add_argument("--tag")
    rerank.add_argument("--dry-run", dest="dry_run", action="store_true",
                        help="count calls with an identity ranker; no network")

    evaluate = sub.add_parser("evaluate", parents=[common], help="nDCG of a run against qrels")
    evaluate.add_argument("--run")
    evaluate.add_argument("--qrels")
    evaluate.add_argument("--cutoffs", help="comma-separated, default 1,5,10")
    evaluate.add_argument("--per-query-csv", dest="per_query_csv")

    cost = sub.add_parser("cost", parents=[common], help="exact call/document counts")
    cost.add_argument("--n", type=int, help="candidates per query (default 100)")
    return parser


COMMANDS = {"rerank": cmd_rerank, "evaluate": cmd_evaluate, "cost": cmd_cost}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = resolve_settings(args)
    except (BracketRankError, OSError, ValueError) as exc:
        return _fail(exc)
    return COMMANDS[args.command](settings)


if __name__ == "__main__":
    sys.exit(main())
