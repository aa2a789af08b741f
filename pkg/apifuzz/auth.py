"""
Provides authentication configuration and credential handling.

Two mechanisms are supported: fixed headers sent with every request
(:class:`StaticHeaders`) and a login endpoint returning a token that is then sent in
a header (:class:`LoginFlow`). Tokens are cached per configuration by
:class:`TokenCache` and refreshed when they expire. In emitted test plans a token is
never written literally: :func:`bind_login` adds a login step whose response feeds
the authentication header of later steps.

The configuration file is YAML or TOML, for example::

    [[auth]]
    name = "logintoken"

    [auth.loginEndpointAuth]
    endpoint = "/api/logintoken/login"
    payloadRaw = '''{"userId": "foo", "password":"123"}'''
    verb = "POST"
    contentType = "application/json"

    [auth.loginEndpointAuth.token]
    headerPrefix = "Bearer "
    extractFromField = "/token/authToken"
    httpHeaderName = "Authorization"
"""

import os
import threading
import tomllib
from dataclasses import dataclass, replace

import yaml

from ._durations import parse_duration
from .actions import Binding, HttpAction
from .errors import AuthError, BindingError, ConfigurationError
from .transport import HttpRequest, WallClock
from .values import get_pointer, parse_pointer, render_scalar

TOKEN_VARIABLE = "auth_token"


@dataclass(frozen=True)
class StaticHeaders(object):
    """
    Headers sent verbatim with every request.

    Parameters
    ----------
    headers : tuple
        ``(name, value)`` pairs.
    """

    headers: tuple = tuple()


@dataclass(frozen=True)
class LoginFlow(object):
    """
    A login call whose response body contains a token.

    Parameters
    ----------
    endpoint : str
        Login path, e.g. ``/api/logintoken/login``.

    verb : str
        HTTP method. (Default: ``"POST"``)

    payload : str
        Raw request body, sent byte-for-byte. (Default: ``""``)

    content_type : str
        Media type of the payload. (Default: ``"application/json"``)

    token_pointer : str
        Slash path to the token in the response body, e.g. ``/token/authToken``.

    header_name : str
        Header carrying the token. (Default: ``"Authorization"``)

    header_prefix : str
        Text placed before the token, e.g. ``"Bearer "``. (Default: ``""``)

    lifetime : float
        Token lifetime in seconds; ``None`` means reuse until a 401 is received.
        (Default: ``None``)
    """

    endpoint: str
    token_pointer: str
    verb: str = "POST"
    payload: str = ""
    content_type: str = "application/json"
    header_name: str = "Authorization"
    header_prefix: str = ""
    lifetime: float = None

    def __post_init__(self):
        if not self.token_pointer or not parse_pointer(self.token_pointer):
            raise ConfigurationError(
                "extractFromField must be a non-empty slash path, e.g. "
                "'/token/authToken'."
            )
        if self.lifetime is not None and self.lifetime <= 0:
            raise ConfigurationError("Token lifetime must be positive.")
        return


@dataclass(frozen=True)
class AuthSpec(object):
    """
    A named authentication configuration.

    Parameters
    ----------
    name : str
        Name, unique within a configuration file.

    mechanism : object
        :class:`~apifuzz.auth.StaticHeaders` or :class:`~apifuzz.auth.LoginFlow`.
    """

    name: str
    mechanism: object

    @property
    def is_login(self):
        return isinstance(self.mechanism, LoginFlow)


@dataclass(frozen=True)
class TokenState(object):
    """
    A token obtained from a login call, without its header prefix.

    Parameters
    ----------
    value : str
        The token.

    obtained_at : float
        Clock time of the login.

    expires_at : float
        ``obtained_at + lifetime``, or ``None`` without a lifetime.
    """

    value: str
    obtained_at: float
    expires_at: float = None

    def is_valid(self, now):
        """
        Check whether the token is still usable at time ``now``.
        """
        return self.expires_at is None or now < self.expires_at


def _parse_entry(entry, index):
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigurationError(f"auth entry {index} must be a table with a 'name'.")
    name = str(entry["name"])
    if "loginEndpointAuth" in entry:
        login = entry["loginEndpointAuth"] or dict()
        token = login.get("token") or dict()
        send_in = str(token.get("sendIn", "header")).lower()
        if send_in != "header":
            raise ConfigurationError(
                f"auth '{name}': sending the token in '{send_in}' is unsupported; "
                "only 'header' is implemented."
            )
        if "endpoint" not in login or "extractFromField" not in token:
            raise ConfigurationError(
                f"auth '{name}': loginEndpointAuth needs 'endpoint' and "
                "'token.extractFromField'."
            )
        mechanism = LoginFlow(
            endpoint=str(login["endpoint"]),
            verb=str(login.get("verb", "POST")).upper(),
            payload=str(login.get("payloadRaw", "")),
            content_type=str(login.get("contentType", "application/json")),
            token_pointer=str(token["extractFromField"]),
            header_name=str(token.get("httpHeaderName", "Authorization")),
            header_prefix=str(token.get("headerPrefix", "")),
            lifetime=parse_duration(token.get("lifetime")),
        )
    else:
        headers = []
        for h in entry.get("fixedHeaders") or []:
            if not isinstance(h, dict) or "name" not in h or "value" not in h:
                raise ConfigurationError(
                    f"auth '{name}': fixedHeaders entries need 'name' and 'value'."
                )
            headers.append((str(h["name"]), str(h["value"])))
        mechanism = StaticHeaders(tuple(headers))
    return AuthSpec(name, mechanism)


def parse_auth_config(path):
    """
    Read an authentication configuration file.

    Parameters
    ----------
    path : str
        Path to a ``.yaml``/``.yml`` or ``.toml`` file.

    Returns
    -------
    out : list
        :class:`~apifuzz.auth.AuthSpec` entries in file order (empty for an empty
        file).

    Raises
    ------
    ConfigurationError
        For JSON files ("JSON not supported for config files"), parse errors (with
        line and column) and invalid or duplicate entries.
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    extension = os.path.splitext(path)[1].lower()
    if extension == ".json" or text.lstrip().startswith(("{", "[")):
        raise ConfigurationError("JSON not supported for config files")
    if not text.strip():
        return []
    if extension == ".toml":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{path}: {e}") from e
    else:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
            raise ConfigurationError(f"{path}{where}: {e}") from e
    if data is None:
        return []
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping with an 'auth' list.")
    specs = [_parse_entry(e, i) for i, e in enumerate(data.get("auth") or [])]
    names = [s.name for s in specs]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigurationError(f"{path}: duplicate auth names {duplicates}.")
    return specs


def select_auth(specs, name=None):
    """
    Pick the auth configuration used for a session.

    Parameters
    ----------
    specs : list
        Parsed :class:`~apifuzz.auth.AuthSpec` entries.

    name : str, optional
        Name to select; the first entry when ``None``. (Default: ``None``)

    Returns
    -------
    out : ~apifuzz.auth.AuthSpec or None
        Selected entry, ``None`` if ``specs`` is empty.
    """
    if not specs:
        if name is not None:
            raise ConfigurationError(f"No auth entry named '{name}'.")
        return None
    if name is None:
        return specs[0]
    for s in specs:
        if s.name == name:
            return s
    raise ConfigurationError(
        f"No auth entry named '{name}' (known: {[s.name for s in specs]})."
    )


def login_request(flow):
    """
    The HTTP request performing a login.
    """
    return HttpRequest(
        method=flow.verb,
        path=flow.endpoint,
        headers=(("Content-Type", flow.content_type),),
        body=flow.payload if flow.payload != "" else None,
    )


def acquire_token(flow, client, clock=None):
    """
    Perform a login call and extract the token.

    Parameters
    ----------
    flow : ~apifuzz.auth.LoginFlow
        Login configuration.

    client : object
        Object with a ``send(HttpRequest)`` method returning an
        :class:`~apifuzz.transport.HttpResponse`.

    clock : object, optional
        Clock for timestamps. (Default: :class:`~apifuzz.transport.WallClock`)

    Returns
    -------
    out : ~apifuzz.auth.TokenState
        The token, without header prefix.

    Raises
    ------
    AuthError
        If the login does not return 2xx or the token is not found.
    """
    clock = WallClock() if clock is None else clock
    response = client.send(login_request(flow))
    if not response.is_success:
        raise AuthError(
            f"Login {flow.verb} {flow.endpoint} returned status {response.status}."
        )
    try:
        value = get_pointer(response.json, parse_pointer(flow.token_pointer))
    except BindingError as e:
        raise AuthError(
            f"Login response has no token at '{flow.token_pointer}'."
        ) from e
    if isinstance(value, (dict, list)) or value is None:
        raise AuthError(f"Value at '{flow.token_pointer}' is not a token.")
    now = clock.now()
    expires = None if flow.lifetime is None else now + flow.lifetime
    return TokenState(render_scalar(value), now, expires)


class TokenCache(object):
    """
    Shared store of login tokens, one per :class:`AuthSpec` name.

    A token is reused while valid; within a lifetime window at most one login
    request is made per configuration.

    Parameters
    ----------
    clock : object, optional
        Clock used for expiry. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    def __init__(self, clock=None):
        self.clock = WallClock() if clock is None else clock
        self.login_count = dict()
        self._states = dict()
        self._lock = threading.RLock()
        return

    def get(self, spec, client):
        """
        Return a valid token, logging in if needed.

        Parameters
        ----------
        spec : ~apifuzz.auth.AuthSpec
            Login configuration.

        client : object
            Object with ``send(HttpRequest)``.

        Returns
        -------
        out : ~apifuzz.auth.TokenState
            A token valid now.
        """
        with self._lock:
            state = self._states.get(spec.name)
            if state is None or not state.is_valid(self.clock.now()):
                state = acquire_token(spec.mechanism, client, clock=self.clock)
                self._states[spec.name] = state
                self.login_count[spec.name] = self.login_count.get(spec.name, 0) + 1
            return state

    def peek(self, spec):
        """
        The cached token, or ``None``, without logging in.
        """
        with self._lock:
            return self._states.get(spec.name)

    def invalidate(self, spec):
        """
        Forget the token of ``spec`` so the next request logs in again.
        """
        with self._lock:
            self._states.pop(spec.name, None)
        return


def attach_auth(action, spec, cache=None, client=None):
    """
    Add authentication headers to an action.

    Parameters
    ----------
    action : ~apifuzz.actions.HttpAction
        Action to authenticate.

    spec : ~apifuzz.auth.AuthSpec
        Auth configuration (``None`` leaves the action unchanged).

    cache : ~apifuzz.auth.TokenCache, optional
        Token store, required for login flows. (Default: ``None``)

    client : object, optional
        Sender used if a login is needed. (Default: ``None``)

    Returns
    -------
    out : ~apifuzz.actions.HttpAction
        Copy of ``action`` with the headers set.
    """
    if spec is None or not action.authenticated:
        return action
    headers = dict(action.headers)
    if isinstance(spec.mechanism, StaticHeaders):
        headers.update(dict(spec.mechanism.headers))
    else:
        if cache is None or client is None:
            raise ValueError("A TokenCache and a client are needed for login auth.")
        flow = spec.mechanism
        state = cache.get(spec, client)
        headers[flow.header_name] = flow.header_prefix + state.value
    return replace(action, headers=headers)


def login_action(spec):
    """
    The login step representing ``spec`` in a test case.
    """
    flow = spec.mechanism
    return HttpAction(
        verb=flow.verb,
        path=flow.endpoint,
        headers={"Content-Type": flow.content_type},
        body=flow.payload,
        content_type=flow.content_type,
        role="login",
        authenticated=False,
    )


def bind_login(test, spec):
    """
    Make the token of a test case dynamic.

    For login flows, a login action is prepended and every authenticated action
    receives its header through a :class:`~apifuzz.actions.Binding` on the login
    response. Static headers are written directly into the actions.

    Parameters
    ----------
    test : ~apifuzz.actions.TestCase
        Test without authentication.

    spec : ~apifuzz.auth.AuthSpec
        Auth configuration, or ``None``.

    Returns
    -------
    out : ~apifuzz.actions.TestCase
        Authenticated test.
    """
    if spec is None or not any(a.authenticated for a in test.actions):
        return test
    if isinstance(spec.mechanism, StaticHeaders):
        actions = tuple(
            attach_auth(a, spec) if a.authenticated else a for a in test.actions
        )
        return replace(test, actions=actions)
    flow = spec.mechanism
    shifted = test.shift(1, (login_action(spec),))
    bindings = tuple(
        Binding(
            id=TOKEN_VARIABLE,
            source=0,
            pointer=parse_pointer(flow.token_pointer),
            target=i,
            slot_kind="header",
            slot_name=flow.header_name,
            prefix=flow.header_prefix,
        )
        for i, a in enumerate(shifted.actions)
        if a.authenticated and a.role != "login"
    )
    return replace(shifted, bindings=shifted.bindings + bindings)
