"""Minimal OpenAI-style chat-completions stub server for offline tests."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class StubChatServer:
    """Serves POST /chat/completions with canned or computed replies.

    ``reply`` is either a fixed string or a callable taking the request
    body dict and returning the completion text. ``fail_times`` makes the
    first n requests return HTTP 500 (for retry tests). Request bodies
    are kept for inspection.
    """

    def __init__(self, reply="Option: A", fail_times: int = 0, status: int = 200):
        self.reply = reply
        self.fail_times = fail_times
        self.status = status
        self.requests: list[dict] = []
        self.request_count = 0
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.request_count += 1
                    outer.requests.append(
                        {"path": self.path, "body": body,
                         "auth": self.headers.get("Authorization")}
                    )
                    count = outer.request_count
                if count <= outer.fail_times or outer.status != 200:
                    code = 500 if count <= outer.fail_times else outer.status
                    self.send_response(code)
                    self.end_headers()
                    self.wfile.write(b"stub failure")
                    return
                text = outer.reply(body) if callable(outer.reply) else outer.reply
                payload = json.dumps(
                    {
                        "choices": [{"message": {"role": "assistant", "content": text}}],
                        "usage": {"prompt_tokens": 1, "completion_tokens": 1},
                    }
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self) -> "StubChatServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
