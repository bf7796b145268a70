"""Offline stand-in model server for tests, benchmarks, and demos.

Serves the three wire protocols the clients in this package speak:

* ``POST /v1/chat/completions`` — echoes the user message back (or applies a
  custom responder), optionally after a fixed injected delay;
* ``POST /v1/embeddings``      — reference hashed bag-of-words embeddings;
* ``POST /v1/rerank``          — reference token-overlap F1 scores.

Requests are logged on the server object so tests can assert on raw bodies.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .encoders import reference_embed, token_overlap_f1


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass

    def do_POST(self):
        server: StubServer = self.server  # type: ignore[assignment]
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        with server.lock:
            server.requests.append((self.path, raw))
        if server.status_override is not None:
            self.send_response(server.status_override)
            self.end_headers()
            self.wfile.write(b"injected failure")
            return
        try:
            payload = json.loads(raw) if raw else {}
        except ValueError:
            self.send_response(400)
            self.end_headers()
            return

        if self.path == "/v1/chat/completions":
            if server.delay > 0:
                time.sleep(server.delay)
            content = ""
            for message in payload.get("messages", []):
                if message.get("role") == "user":
                    content = message.get("content", "")
            answer = server.responder(content) if server.responder else content
            body = {
                "model": payload.get("model", ""),
                "choices": [{"index": 0, "message": {"role": "assistant", "content": answer}}],
            }
        elif self.path == "/v1/embeddings":
            inputs = payload.get("input", [])
            if isinstance(inputs, str):
                inputs = [inputs]
            data = []
            for i, t in enumerate(inputs):
                emb = reference_embed(t).tolist()
                if server.embed_dim_override is not None:
                    emb = emb[: server.embed_dim_override]
                data.append({"index": i, "embedding": emb})
            body = {"data": data, "model": payload.get("model", "")}
        elif self.path == "/v1/rerank":
            query = payload.get("query", "")
            docs = payload.get("documents", [])
            body = {"scores": [token_overlap_f1(query, d) for d in docs]}
        else:
            self.send_response(404)
            self.end_headers()
            return

        encoded = json.dumps(body).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(encoded)))
        self.end_headers()
        self.wfile.write(encoded)


class StubServer(ThreadingHTTPServer):
    """In-process model server; use as a context manager or call serve/stop."""

    def __init__(self, port: int = 0, delay: float = 0.0, responder=None):
        super().__init__(("127.0.0.1", port), _Handler)
        self.delay = delay
        self.responder = responder
        self.status_override: int | None = None
        self.embed_dim_override: int | None = None
        self.requests: list[tuple[str, bytes]] = []
        self.lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "StubServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def main(argv=None) -> int:
    """Run the stub server from the command line (for manual demos)."""
    import argparse

    parser = argparse.ArgumentParser(description="offline stand-in model server")
    parser.add_argument("--port", type=int, default=8090)
    parser.add_argument("--delay", type=float, default=0.0, help="per-completion delay, seconds")
    args = parser.parse_args(argv)
    server = StubServer(port=args.port, delay=args.delay)
    print(f"stub model server listening on {server.base_url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
