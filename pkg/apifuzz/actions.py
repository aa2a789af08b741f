"""
Provides the data structures for test cases: HTTP actions, dynamic bindings between
them, and the exchanges recorded when they are executed.
"""

import json
from dataclasses import dataclass, field, replace

from .transport import HttpRequest, render_path
from .values import (
    UNDEFINED,
    dumps,
    format_pointer,
    is_undefined,
    render_scalar,
    strip_undefined,
)

ROLES = ("call", "login", "cleanup")
SLOT_KINDS = ("path", "query", "header", "body")


@dataclass(frozen=True)
class Expectation(object):
    """
    What a replayed action is expected to return.

    Parameters
    ----------
    statuses : tuple
        Accepted statuses: exact codes (``200``) or families (``"2xx"``). Empty
        means "the status recorded during fuzzing".

    fault : int
        Fault code the action is expected to re-trigger, if any.
    """

    statuses: tuple = tuple()
    fault: int = None

    def accepts(self, status):
        """
        Check a status code against the expectation.

        Parameters
        ----------
        status : int
            Observed status.

        Returns
        -------
        out : bool
            ``True`` if accepted (always ``True`` for an empty expectation).
        """
        if not self.statuses:
            return True
        for s in self.statuses:
            if isinstance(s, str) and s.endswith("xx") and str(status)[0] == s[0]:
                return True
            if str(s) == str(status):
                return True
        return False


CLEANUP_EXPECTATION = Expectation(statuses=("2xx", 404))


@dataclass(frozen=True)
class Origin(object):
    """
    How an action's inputs were chosen, used to evidence coverage targets.

    Parameters
    ----------
    presence : int
        Bitmask over the endpoint's optional parameters (bit ``i`` set when the
        ``i``-th optional parameter is sent), ``None`` if not tracked.

    enum_values : tuple
        ``(param designator, value)`` pairs for enum-typed parameters.

    examples_used : tuple
        ``(slot, example index)`` pairs; slots are parameter designators or
        ``"body"``.

    dictionary_slots : tuple
        Designators of slots filled from the response dictionary.

    followed_link : tuple
        ``(source action index, status key, link name)`` when the action was
        appended by following a link.
    """

    presence: int = None
    enum_values: tuple = tuple()
    examples_used: tuple = tuple()
    dictionary_slots: tuple = tuple()
    followed_link: tuple = None

    @property
    def from_dictionary(self):
        return len(self.dictionary_slots) > 0


@dataclass(frozen=True)
class HttpAction(object):
    """
    One HTTP call of a test case, with JSON values not yet rendered to text.

    Parameters
    ----------
    verb : str
        Upper-case method.

    path : str
        Path template of the endpoint.

    path_params : dict
        Name to value.

    query : dict
        Name to value; :data:`~apifuzz.values.UNDEFINED` values are not sent.

    headers : dict
        Name to value.

    body : object
        JSON body, :data:`~apifuzz.values.UNDEFINED` for none, or raw text for
        login actions.

    content_type : str
        Media type of the body.

    role : str
        ``"call"``, ``"login"`` or ``"cleanup"``.

    authenticated : bool
        Whether session authentication is attached when sending.

    origin : ~apifuzz.actions.Origin
        Provenance of the inputs.

    expectation : ~apifuzz.actions.Expectation
        Replay expectation.

    derive : tuple
        Body fields recomputed by derived-parameter rules when sending.
    """

    verb: str
    path: str
    path_params: dict = field(default_factory=dict)
    query: dict = field(default_factory=dict)
    headers: dict = field(default_factory=dict)
    body: object = UNDEFINED
    content_type: str = None
    role: str = "call"
    authenticated: bool = True
    origin: Origin = field(default_factory=Origin)
    expectation: Expectation = field(default_factory=Expectation)
    derive: tuple = tuple()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got '{self.role}'.")
        return

    @property
    def key(self):
        """
        ``VERB:/path`` of the endpoint.
        """
        return f"{self.verb}:{self.path}"

    def body_text(self):
        """
        Serialized body, ``None`` when there is no body.
        """
        if isinstance(self.body, str) and self.role == "login":
            return self.body
        return dumps(self.body)

    def canonical(self):
        """
        Plain-data form used for fingerprints and action logs.
        """
        return dict(
            verb=self.verb,
            path=self.path,
            role=self.role,
            path_params={k: strip_undefined(v) for k, v in self.path_params.items()},
            query={
                k: strip_undefined(v)
                for k, v in self.query.items()
                if not is_undefined(v)
            },
            headers=dict(self.headers),
            body=None if is_undefined(self.body) else strip_undefined(self.body),
            has_body=not is_undefined(self.body),
        )


@dataclass(frozen=True)
class Binding(object):
    """
    A value extracted from one action's response and substituted into a later
    action.

    Parameters
    ----------
    id : str
        Variable name, unique within the test case (e.g. ``link_0__data_id``).

    source : int
        Index of the action whose response body is read.

    pointer : tuple
        Extraction path segments into the response body.

    target : int
        Index of the action receiving the value.

    slot_kind : str
        ``"path"``, ``"query"``, ``"header"`` or ``"body"``.

    slot_name : str
        Parameter or header name; for ``"body"``, a JSON pointer into the body.

    prefix : str
        Text prepended to the value (e.g. ``"Bearer "``).
    """

    id: str
    source: int
    pointer: tuple
    target: int
    slot_kind: str
    slot_name: str
    prefix: str = ""

    def __post_init__(self):
        if self.slot_kind not in SLOT_KINDS:
            raise ValueError(f"slot_kind must be one of {SLOT_KINDS}.")
        return

    @property
    def extraction(self):
        """
        Extraction path as a JSON pointer string.
        """
        return format_pointer(self.pointer)


@dataclass(frozen=True)
class TestCase(object):
    """
    An ordered list of actions with the bindings between them.

    Parameters
    ----------
    actions : tuple
        :class:`~apifuzz.actions.HttpAction` entries.

    bindings : tuple
        :class:`~apifuzz.actions.Binding` entries.
    """

    __test__ = False

    actions: tuple = tuple()
    bindings: tuple = tuple()

    def __post_init__(self):
        self.check_bindings()
        return

    def __len__(self):
        return len(self.actions)

    def check_bindings(self):
        """
        Verify that every binding reads from an earlier action.

        Raises
        ------
        ValueError
            If a binding references a later (or the same) action, or an index out
            of range.
        """
        n = len(self.actions)
        seen = set()
        for b in self.bindings:
            if not (0 <= b.source < b.target < n):
                raise ValueError(
                    f"Binding {b.id} reads action {b.source} for action {b.target}; "
                    f"sources must precede targets within {n} actions."
                )
            if (b.id, b.target) in seen:
                raise ValueError(f"Duplicate binding {b.id} on action {b.target}.")
            seen.add((b.id, b.target))
        return

    def append(self, action, bindings=()):
        """
        Return a new test case with an action (and its bindings) appended.
        """
        return TestCase(self.actions + (action,), self.bindings + tuple(bindings))

    def prefix(self, n):
        """
        The first ``n`` actions and the bindings among them.
        """
        bindings = tuple(b for b in self.bindings if b.target < n)
        return TestCase(self.actions[:n], bindings)

    def bindings_for(self, index):
        """
        Bindings whose target is action ``index``.
        """
        return tuple(b for b in self.bindings if b.target == index)

    def replace_action(self, index, action):
        actions = list(self.actions)
        actions[index] = action
        return replace(self, actions=tuple(actions))

    def shift(self, offset, actions_before=()):
        """
        Prepend actions, renumbering existing bindings.
        """
        bindings = tuple(
            replace(b, source=b.source + offset, target=b.target + offset)
            for b in self.bindings
        )
        return TestCase(tuple(actions_before) + self.actions, bindings)

    def fingerprint(self):
        """
        Stable text identifying the test content.
        """
        return json.dumps(
            dict(
                actions=[a.canonical() for a in self.actions],
                bindings=[
                    [
                        b.id,
                        b.source,
                        list(b.pointer),
                        b.target,
                        b.slot_kind,
                        b.slot_name,
                    ]
                    for b in self.bindings
                ],
            ),
            sort_keys=True,
            default=str,
        )


@dataclass(frozen=True)
class Exchange(object):
    """
    The record of one executed action.

    Parameters
    ----------
    request : ~apifuzz.transport.HttpRequest
        Request actually sent, ``None`` if it could not be built.

    response : ~apifuzz.transport.HttpResponse
        Response, ``None`` on transport error or broken binding.

    error : str
        Description of the failure when ``response`` is ``None``.

    started_at : float
        Clock time the request was sent.
    """

    request: object = None
    response: object = None
    error: str = None
    started_at: float = 0.0

    @property
    def status(self):
        """
        Response status, ``None`` if there was no response.
        """
        return None if self.response is None else self.response.status

    @property
    def link_broken(self):
        return self.response is None and (self.error or "").startswith("binding")

    @property
    def body(self):
        """
        Parsed response body (:data:`~apifuzz.values.UNDEFINED` if none).
        """
        return UNDEFINED if self.response is None else self.response.json


def to_request(action, base_path=""):
    """
    Render an action into a concrete :class:`~apifuzz.transport.HttpRequest`.

    Path parameters are substituted, undefined query parameters dropped, array
    query values sent as repeated parameters and the body serialized.

    Parameters
    ----------
    action : ~apifuzz.actions.HttpAction
        Action whose bindings are already resolved.

    base_path : str, optional
        Prefix of every path (the API's server path); not applied to login
        actions, whose path is configured in full. (Default: ``""``)

    Returns
    -------
    out : ~apifuzz.transport.HttpRequest
        The request.
    """
    path = render_path(
        action.path,
        {k: render_scalar(v) for k, v in action.path_params.items()},
    )
    query = []
    for name, value in action.query.items():
        if is_undefined(value):
            continue
        if isinstance(value, list):
            query.extend((name, render_scalar(v)) for v in value if not is_undefined(v))
        else:
            query.append((name, render_scalar(value)))
    headers = [
        (k, render_scalar(v)) for k, v in action.headers.items() if not is_undefined(v)
    ]
    body = action.body_text()
    if body is not None and action.content_type is not None:
        if not any(k.lower() == "content-type" for k, _ in headers):
            headers.append(("Content-Type", action.content_type))
    return HttpRequest(
        method=action.verb,
        path=(base_path if action.role != "login" else "") + path,
        query=tuple(query),
        headers=tuple(headers),
        body=body,
    )
