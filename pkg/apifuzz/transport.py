"""
Provides clocks and transports used to send HTTP requests to the API under test.

The fuzzing engine never talks to the network directly: it hands
:class:`HttpRequest` objects to a transport. :class:`RequestsTransport` sends them
over HTTP; :class:`SimulatedTransport` passes them to an in-process fixture API
(see :mod:`apifuzz.fixtures`) and advances a :class:`VirtualClock` instead of
waiting, so that time-dependent behaviour (token expiry, rate limiting, premature
stop) can be tested quickly and deterministically.
"""

import time
import threading
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from urllib.parse import urlencode, quote

import requests

from .errors import TransportError
from .values import try_loads


@dataclass(frozen=True)
class HttpRequest(object):
    """
    A concrete HTTP request, all values rendered to text.

    Parameters
    ----------
    method : str
        Upper-case HTTP method.

    path : str
        Request path with path parameters substituted, relative to the base URL.

    query : tuple
        ``(name, value)`` pairs, in order.

    headers : tuple
        ``(name, value)`` pairs, in order.

    body : str
        Request body text, ``None`` for no body.
    """

    method: str
    path: str
    query: tuple = tuple()
    headers: tuple = tuple()
    body: str = None

    def header(self, name):
        """
        Case-insensitive header lookup; ``None`` if absent.
        """
        for k, v in self.headers:
            if k.lower() == name.lower():
                return v
        return None

    def url(self, base_url):
        """
        Full URL of the request against a base URL.
        """
        out = base_url.rstrip("/") + self.path
        if self.query:
            out += "?" + urlencode(list(self.query))
        return out


@dataclass(frozen=True)
class HttpResponse(object):
    """
    A received HTTP response.

    Parameters
    ----------
    status : int
        Status code.

    headers : tuple
        ``(name, value)`` pairs.

    text : str
        Body text (``""`` when empty).

    elapsed_ms : float
        Time between sending the request and receiving the response.
    """

    status: int
    headers: tuple = tuple()
    text: str = ""
    elapsed_ms: float = 0.0

    @property
    def json(self):
        """
        Body parsed as JSON, :data:`~apifuzz.values.UNDEFINED` if not JSON.
        """
        return try_loads(self.text)

    def header(self, name):
        for k, v in self.headers:
            if k.lower() == name.lower():
                return v
        return None

    @property
    def is_success(self):
        return 200 <= self.status <= 299


class WallClock(object):
    """
    Real time: :func:`time.monotonic` and :func:`time.sleep`.
    """

    def now(self):
        """
        Current time in seconds.
        """
        return time.monotonic()

    def sleep(self, seconds):
        """
        Block for ``seconds``.
        """
        if seconds > 0:
            time.sleep(seconds)
        return


class VirtualClock(object):
    """
    Simulated time that only moves when told to.

    :meth:`sleep` returns immediately after advancing the clock, so a session with a
    one hour budget finishes in well under a second of real time.

    Parameters
    ----------
    start : float, optional
        Initial time in seconds. (Default: ``0.0``)
    """

    def __init__(self, start=0.0):
        self._now = float(start)
        self._lock = threading.Lock()
        return

    def now(self):
        """
        Current simulated time in seconds.
        """
        with self._lock:
            return self._now

    def sleep(self, seconds):
        """
        Advance the clock by ``seconds``.
        """
        self.advance(seconds)
        return

    def advance(self, seconds):
        """
        Advance the clock by ``seconds`` (negative values are ignored).
        """
        with self._lock:
            self._now += max(0.0, float(seconds))
        return


class _BaseTransport(object):
    """
    Abstract base class for transports.

    Classes inheriting from :class:`~apifuzz.transport._BaseTransport` must implement
    :meth:`~apifuzz.transport._BaseTransport._send`, which receives an
    :class:`~apifuzz.transport.HttpRequest` and returns an
    :class:`~apifuzz.transport.HttpResponse`, raising
    :class:`~apifuzz.errors.TransportError` when no response is obtained. Every
    request is appended to :attr:`sent`.

    Parameters
    ----------
    clock : object, optional
        Object with ``now()`` and ``sleep(seconds)``. (Default:
        :class:`~apifuzz.transport.WallClock`)
    """

    __metaclass__ = ABCMeta

    def __init__(self, clock=None):
        self.clock = WallClock() if clock is None else clock
        self.sent = []
        return

    def send(self, request):
        """
        Send a request and record its timestamp.

        Parameters
        ----------
        request : ~apifuzz.transport.HttpRequest
            Request to send.

        Returns
        -------
        out : ~apifuzz.transport.HttpResponse
            The response.
        """
        self.sent.append((self.clock.now(), request))
        return self._send(request)

    @abstractmethod
    def _send(self, request):
        """
        Abstract method; deliver ``request`` and return the response.

        Parameters
        ----------
        request : ~apifuzz.transport.HttpRequest
            Request to send.

        Returns
        -------
        out : ~apifuzz.transport.HttpResponse
            The response.
        """
        pass


class RequestsTransport(_BaseTransport):
    """
    Send requests over HTTP with :mod:`requests`.

    Redirects are not followed, so that their status codes are observed.

    Parameters
    ----------
    base_url : str
        Scheme, host, port and optional path prefix, e.g.
        ``"http://localhost:8080"``.

    timeout : float, optional
        Per-request timeout in seconds. (Default: ``60.0``)

    clock : object, optional
        Clock for timestamps. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    def __init__(self, base_url, timeout=60.0, clock=None):
        super().__init__(clock=clock)
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.session = requests.Session()
        return

    def _send(self, request):
        start = time.monotonic()
        try:
            r = self.session.request(
                request.method,
                self.base_url + request.path,
                params=list(request.query),
                headers=dict(request.headers),
                data=None if request.body is None else request.body.encode("utf-8"),
                timeout=self.timeout,
                allow_redirects=False,
            )
        except requests.RequestException as e:
            raise TransportError(f"{request.method} {request.path}: {e}") from e
        return HttpResponse(
            status=r.status_code,
            headers=tuple(r.headers.items()),
            text=r.text,
            elapsed_ms=(time.monotonic() - start) * 1000.0,
        )


class SimulatedTransport(_BaseTransport):
    """
    Deliver requests to an in-process application.

    Parameters
    ----------
    app : object
        Object with a ``handle(method, path, query, headers, body)`` method
        returning ``(status, headers, body_text)``, such as a
        :class:`~apifuzz.fixtures.FixtureSuite`.

    clock : ~apifuzz.transport.VirtualClock, optional
        Clock advanced by ``latency_ms`` per request. (Default: a new
        :class:`~apifuzz.transport.VirtualClock`)

    latency_ms : float, optional
        Simulated time each request takes. (Default: ``5.0``)

    base_path : str, optional
        Path prefix added to every request path before dispatch, mirroring a
        base URL such as ``sim://fixtures/api``. (Default: ``""``)
    """

    def __init__(self, app, clock=None, latency_ms=5.0, base_path=""):
        super().__init__(clock=VirtualClock() if clock is None else clock)
        self.app = app
        self.latency_ms = latency_ms
        self.base_path = base_path.rstrip("/")
        if hasattr(app, "clock"):
            app.clock = self.clock
        return

    def _send(self, request):
        self.clock.advance(self.latency_ms / 1000.0)
        status, headers, text = self.app.handle(
            request.method,
            self.base_path + request.path,
            list(request.query),
            dict(request.headers),
            request.body,
        )
        return HttpResponse(
            status=int(status),
            headers=tuple(dict(headers).items()),
            text=text or "",
            elapsed_ms=self.latency_ms,
        )


def render_path(template, values):
    """
    Substitute path parameters into a path template.

    Parameters
    ----------
    template : str
        Path template, e.g. ``/users/{id}``.

    values : dict
        Mapping from parameter name to text value; values are percent-encoded.

    Returns
    -------
    out : str
        Concrete path.
    """
    out = template
    for name, value in values.items():
        out = out.replace("{" + name + "}", quote(str(value), safe=""))
    return out


def make_transport(base_url, app=None, clock=None, timeout=60.0):
    """
    Build the transport that matches a base URL.

    ``sim://`` URLs select a :class:`SimulatedTransport` over ``app`` (the bundled
    fixtures when ``app`` is ``None``); anything else a :class:`RequestsTransport`.

    Parameters
    ----------
    base_url : str
        Target base URL.

    app : object, optional
        In-process application for ``sim://`` URLs. (Default: ``None``)

    clock : object, optional
        Clock to use. (Default: ``None``, transport default)

    timeout : float, optional
        HTTP timeout in seconds. (Default: ``60.0``)

    Returns
    -------
    out : ~apifuzz.transport._BaseTransport
        The transport.
    """
    if base_url.startswith("sim://"):
        if app is None:
            from .fixtures import FixtureSuite

            app = FixtureSuite()
        rest = base_url[len("sim://") :]
        base_path = "/" + rest.partition("/")[2] if "/" in rest else ""
        return SimulatedTransport(app, clock=clock, base_path=base_path)
    return RequestsTransport(base_url, timeout=timeout, clock=clock)
