"""End to end: toy dataset, an LLM reranker over HTTP, and nDCG evaluation.

With OPENAI_API_KEY set (and optionally BRACKETRANK_BASE_URL / _MODEL) this
talks to a real OpenAI-compatible endpoint. Without it, a tiny local stub
server stands in; it answers every prompt by sorting passages by how many
query words they contain, which is enough to show the full pipeline.

Run: python demos/04_llm_and_evaluation.py
"""

import json
import os
import re
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from bracketrank import ChatClient, EndpointConfig, LlmRanker, TournamentConfig
from bracketrank import evaluate_run, load_candidates, run_tournament, write_run
from bracketrank.synthetic import make_toy_dataset


class StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        user = body["messages"][-1]["content"]
        words = set(re.search(r"Search Query: (.*)", user).group(1).split())
        passages = re.findall(r"^\[(\d+)\] (.*)$", user, flags=re.M)
        order = sorted(passages, key=lambda p: -len(words & set(p[1].split())))
        answer = "<think>count query words</think>" + " > ".join(f"[{i}]" for i, _ in order)
        payload = json.dumps({"choices": [{"message": {"content": answer}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


def main():
    work = tempfile.mkdtemp(prefix="bracketrank-demo-")
    paths = make_toy_dataset(work, n_queries=3, n_docs=60, n_relevant=8)

    server = None
    if os.environ.get("OPENAI_API_KEY"):
        endpoint = EndpointConfig(
            base_url=os.environ.get("BRACKETRANK_BASE_URL", "https://api.openai.com/v1"),
            model_name=os.environ.get("BRACKETRANK_MODEL", "gpt-4"),
        )
    else:
        server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        host, port = server.server_address
        endpoint = EndpointConfig(base_url=f"http://{host}:{port}/v1", model_name="stub", api_key_env_var="")
        print(f"no OPENAI_API_KEY, using local stub at {endpoint.base_url}")

    data = load_candidates(paths.run, paths.corpus, paths.queries)
    config = TournamentConfig(g_max=12, max_parallel_matches=4)
    with ChatClient(endpoint) as client:
        ranker = LlmRanker(client)
        rankings = {qid: run_tournament(q, c, config, ranker) for qid, (q, c) in data.items()}
        print(f"HTTP requests sent: {client.stats.requests_sent}")
    if server:
        server.shutdown()

    out = os.path.join(work, "reranked.run")
    write_run(rankings, "demo", out)
    before = evaluate_run(paths.run, paths.qrels)
    after = evaluate_run(out, paths.qrels)
    for k in (1, 5, 10):
        print(f"nDCG@{k:<3} first stage {before.mean[k]:.4f}  reranked {after.mean[k]:.4f}")
    print(f"files in {work}")


if __name__ == "__main__":
    main()
