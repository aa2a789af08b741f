"""
Provides :class:`FixtureServer`, which serves a
:class:`~apifuzz.fixtures.suite.FixtureSuite` over HTTP on localhost.
"""

import http.server
import threading
from urllib.parse import parse_qsl, urlsplit

from .suite import FixtureSuite


def _make_handler(app):
    class Handler(http.server.BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, _format, *args):
            return

        def _dispatch(self):
            url = urlsplit(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length).decode("utf-8") if length else None
            status, headers, text = app.handle(
                self.command,
                url.path,
                parse_qsl(url.query, keep_blank_values=True),
                dict(self.headers.items()),
                body,
            )
            payload = (text or "").encode("utf-8")
            self.send_response(status)
            for k, v in headers.items():
                self.send_header(k, v)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            if self.command != "HEAD":
                self.wfile.write(payload)
            return

        do_GET = do_POST = do_PUT = do_PATCH = do_DELETE = _dispatch
        do_HEAD = do_OPTIONS = _dispatch

    return Handler


class FixtureServer(object):
    """
    Threaded localhost HTTP server in front of an in-process application.

    Requests are handled concurrently; each fixture API serialises access to its
    own state.

    Parameters
    ----------
    app : object, optional
        Application with a ``handle`` method. (Default: a new
        :class:`~apifuzz.fixtures.suite.FixtureSuite`)

    host : str, optional
        Interface to bind. (Default: ``"127.0.0.1"``)

    port : int, optional
        Port to bind, ``0`` for any free port. (Default: ``0``)

    Examples
    --------
    ::

        with FixtureServer() as server:
            requests.get(server.url + "/api/ping")
    """

    def __init__(self, app=None, host="127.0.0.1", port=0):
        self.app = FixtureSuite() if app is None else app
        self.host = host
        self.port = port
        self._httpd = None
        self._thread = None
        return

    @property
    def url(self):
        """
        Base URL of the running server.
        """
        if self._httpd is None:
            raise RuntimeError("FixtureServer: not started.")
        return f"http://{self.host}:{self._httpd.server_port}"

    def start(self):
        """
        Bind and serve in a background thread.
        """
        if self._httpd is not None:
            return self
        self._httpd = http.server.ThreadingHTTPServer(
            (self.host, self.port), _make_handler(self.app)
        )
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def join(self, timeout=None):
        """
        Block until the server stops or ``timeout`` seconds pass.
        """
        if self._thread is not None:
            self._thread.join(timeout)
        return

    def stop(self):
        if self._httpd is None:
            return
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join()
        self._httpd, self._thread = None, None
        return

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
        return
