"""
Provides the base class of the bundled fixture APIs.

A fixture API is a small in-memory web application together with its OpenAPI
document. It answers ``handle(method, path, query, headers, body)`` calls with
``(status, headers, body_text)`` tuples, which lets the same implementation serve
both the in-process :class:`~apifuzz.transport.SimulatedTransport` and the
localhost :class:`~apifuzz.fixtures.server.FixtureServer`.
"""

import json
import re
import threading
from abc import ABCMeta, abstractmethod
from copy import deepcopy
from urllib.parse import unquote

from ..transport import WallClock
from ..values import try_loads

_PATH_PARAM = re.compile(r"{([^{}/]+)}")


class FixtureRequest(object):
    """
    A request as seen by a fixture API.

    Parameters
    ----------
    method : str
        Upper-case method.

    path : str
        Request path, without query string.

    query : list
        ``(name, value)`` pairs.

    headers : dict
        Header mapping; lookups through :meth:`header` ignore case.

    body : str
        Raw body, ``None`` when absent.
    """

    def __init__(self, method, path, query=(), headers=None, body=None):
        self.method = method.upper()
        self.path = path
        self.query = list(query)
        self.headers = dict(headers or dict())
        self.body = body
        return

    def header(self, name, default=None):
        for k, v in self.headers.items():
            if k.lower() == name.lower():
                return v
        return default

    def arg(self, name, default=None):
        """
        First value of query parameter ``name``.
        """
        for k, v in self.query:
            if k == name:
                return v
        return default

    @property
    def json(self):
        """
        Parsed JSON body (:data:`~apifuzz.values.UNDEFINED` if absent or invalid).
        """
        return try_loads(self.body)


def json_response(status, payload, headers=None):
    """
    A JSON response tuple.
    """
    out = {"Content-Type": "application/json"}
    out.update(headers or dict())
    return status, out, json.dumps(payload, separators=(",", ":"), default=str)


def text_response(status, text):
    """
    A ``text/plain`` response tuple.
    """
    return status, {"Content-Type": "text/plain"}, text


def error_response(status, message):
    return json_response(status, dict(error=message))


def _template_regex(template):
    parts = _PATH_PARAM.split(template)
    pattern = ""
    for i, part in enumerate(parts):
        if i % 2 == 0:
            pattern += re.escape(part)
        else:
            pattern += f"(?P<{part}>[^/]+)"
    return re.compile(f"^{pattern}$")


class _BaseFixtureApi(object):
    """
    Abstract base class for fixture APIs.

    Classes inheriting from :class:`~apifuzz.fixtures.fixture_api._BaseFixtureApi`
    must set :attr:`name` (the document name) and :attr:`root` (the path prefix
    they own) and implement :meth:`routes`, returning ``(method, path template,
    handler)`` triples whose handlers take a
    :class:`~apifuzz.fixtures.fixture_api.FixtureRequest` plus the path
    parameters as keyword arguments, and :meth:`openapi`, returning the API's
    OpenAPI document. State is (re)initialised by :meth:`reset`.

    Parameters
    ----------
    clock : object, optional
        Clock with ``now()``; replaced by the transport's clock in simulation.
        (Default: :class:`~apifuzz.transport.WallClock`)
    """

    __metaclass__ = ABCMeta

    name = None
    root = ""

    def __init__(self, clock=None):
        self.clock = WallClock() if clock is None else clock
        self._lock = threading.RLock()
        self._table = [
            (method, _template_regex(template), fn)
            for method, template, fn in self.routes()
        ]
        self.reset()
        return

    def reset(self):
        """
        Forget all state and counters.
        """
        self.request_count = 0
        self.log = []
        return

    def owns(self, path):
        """
        Whether ``path`` falls under this API's root.
        """
        return path == self.root or path.startswith(self.root.rstrip("/") + "/")

    def handle(self, method, path, query=(), headers=None, body=None):
        """
        Answer one request.

        Parameters
        ----------
        method : str
            HTTP method.

        path : str
            Request path.

        query : list, optional
            ``(name, value)`` pairs. (Default: ``()``)

        headers : dict, optional
            Request headers. (Default: ``None``)

        body : str, optional
            Raw body. (Default: ``None``)

        Returns
        -------
        out : tuple
            ``(status, headers, body_text)``.
        """
        request = FixtureRequest(method, path, query, headers, body)
        with self._lock:
            self.request_count += 1
            self.log.append((self.clock.now(), request.method, request.path))
            allowed = False
            for verb, regex, fn in self._table:
                match = regex.match(path)
                if match is None:
                    continue
                allowed = True
                if verb != request.method:
                    continue
                params = {k: unquote(v) for k, v in match.groupdict().items()}
                try:
                    return fn(request, **params)
                except (KeyError, TypeError, ValueError) as e:
                    return error_response(500, f"{type(e).__name__}: {e}")
            if allowed:
                return error_response(405, "method not allowed")
            return error_response(404, "not found")

    @abstractmethod
    def routes(self):
        """
        Abstract method; the API's routes.

        Returns
        -------
        out : list
            ``(method, path template, handler)`` triples.
        """
        pass

    @abstractmethod
    def openapi(self):
        """
        Abstract method; the API's OpenAPI document.

        Returns
        -------
        out : dict
            OpenAPI 3 document.
        """
        pass

    def documents(self):
        """
        Named OpenAPI documents of this API (variants included).

        Returns
        -------
        out : dict
            Document name to OpenAPI document.
        """
        return {self.name: deepcopy(self.openapi())}


def openapi_document(title, paths, schemas=None):
    """
    Assemble an OpenAPI 3.0 document.
    """
    doc = {
        "openapi": "3.0.3",
        "info": {"title": title, "version": "1.0.0"},
        "paths": paths,
    }
    if schemas:
        doc["components"] = {"schemas": schemas}
    return doc


def json_content(schema, media_type="application/json"):
    """
    A ``content`` mapping with a single media type.
    """
    return {media_type: {"schema": schema}}
