"""Per-service HTTP health endpoint."""

from __future__ import annotations

import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

logger = logging.getLogger(__name__)


class HealthServer:
    """Answers GET /healthz with a small JSON status document.

    Binds on start (port 0 picks a free port) and serves from a daemon
    thread until stopped.
    """

    def __init__(self, service_name: str, host: str = "127.0.0.1", port: int = 0, extra=None):
        """``extra``: optional zero-arg callable returning fields to merge
        into the status document (e.g. processed/error counters)."""
        self.service_name = service_name
        self._host = host
        self._port = port
        self._extra = extra
        self._started_monotonic = 0.0
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        if self._httpd is None:
            raise RuntimeError("health server not started")
        return self._httpd.server_address[1]

    def start(self) -> int:
        if self._httpd is not None:
            raise RuntimeError("health server already started")
        health = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                if self.path != "/healthz":
                    self.send_error(404)
                    return
                doc = {
                    "status": "ok",
                    "service": health.service_name,
                    "uptime_s": round(time.monotonic() - health._started_monotonic, 3),
                }
                if health._extra is not None:
                    doc.update(health._extra())
                body = json.dumps(doc).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, fmt, *args):
                logger.debug("health %s: " + fmt, health.service_name, *args)

        self._started_monotonic = time.monotonic()
        self._httpd = ThreadingHTTPServer((self._host, self._port), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="health-" + self.service_name, daemon=True)
        self._thread.start()
        logger.info("health endpoint for %s on port %d", self.service_name, self.port)
        return self.port

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
