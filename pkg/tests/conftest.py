import json
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from bracketrank.core import Candidate, Query


def make_candidates(n, prefix="d"):
    return [Candidate(f"{prefix}{i}", f"passage number {i}", float(n - i), i) for i in range(1, n + 1)]


@pytest.fixture
def query():
    return Query("q1", "what causes migraines")


def chat_body(content):
    return json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})


class ScriptedEndpoint:
    """Local OpenAI-style endpoint replaying scripted ``(status, body)`` replies.

    When the script runs dry the last reply is repeated.
    """

    def __init__(self):
        self.replies = deque()
        self.last = (200, chat_body("[1]"))
        self.requests = []
        self.headers = []
        endpoint = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                endpoint.requests.append((self.path, json.loads(raw)))
                endpoint.headers.append(dict(self.headers))
                if endpoint.replies:
                    endpoint.last = endpoint.replies.popleft()
                status, body = endpoint.last
                payload = body.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, args=(0.01,), daemon=True)
        self.thread.start()

    @property
    def base_url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1"

    def script(self, *replies):
        for reply in replies:
            if isinstance(reply, str):
                reply = (200, chat_body(reply))
            self.replies.append(reply)

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def endpoint():
    ep = ScriptedEndpoint()
    yield ep
    ep.close()


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_c" in nodeid and report.when == "call" or (
                "test_acceptance.py::test_c" in nodeid and outcome == "error"
            ):
                name = nodeid.split("::")[-1]
                rows.append((int(name[6:8]), name, "PASS" if outcome == "passed" else "FAIL"))
    if rows:
        terminalreporter.section("acceptance criteria")
        for _, name, verdict in sorted(rows):
            terminalreporter.write_line(f"{verdict}  {name}")
