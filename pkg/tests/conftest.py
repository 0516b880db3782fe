import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from carpetguard.telemetry import CounterDelta, compute_features

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def golden():
    return json.loads((DATA / "golden_renderings.json").read_text())


def features_from_counts(rx, tx, elapsed=10.0):
    return compute_features(CounterDelta("p", elapsed, rx[0], rx[1], tx[0], tx[1]))


class StubServer:
    """Tiny HTTP server whose replies are set per test.

    ``handler(body) -> (status, payload, delay_s)`` decides each response;
    every request body is recorded in ``requests``.
    """

    def __init__(self):
        self.requests = []
        self.handler = lambda body: (200, {}, 0.0)
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                stub.requests.append({"path": self.path, "body": body,
                                      "auth": self.headers.get("Authorization")})
                status, payload, delay = stub.handler(body)
                if delay:
                    time.sleep(delay)
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()


def chat_reply(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """A 2,000-record mixed dataset shared by the slower integration tests."""
    from carpetguard.orchestrator import cmd_generate_dataset, load_config

    root = tmp_path_factory.mktemp("desk")
    cfg = load_config(seed=1, dataset_path=str(root / "dataset.jsonl"))
    cmd_generate_dataset(cfg)
    return root / "dataset.jsonl"


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record and assert one acceptance verdict; a summary prints at session end."""

    def verdict(number, title, ok, detail=""):
        _CRITERIA.append((number, title, bool(ok), detail))
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return verdict


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
