"""
Provides the fuzzing session: the loop that generates test cases aimed at pending
coverage targets, executes them against the API and records what they cover.

Around that loop sit the session's practical concerns: a time budget with an
optional premature stop, a request rate limiter, a dictionary of identifiers
harvested from collection responses (used for read operations only), automatic
cleanup of resources created by a test, and derived body parameters recomputed
just before sending.
"""

import re
from dataclasses import dataclass, replace

import numpy as np
import tqdm

from ._durations import format_duration, parse_duration
from .actions import (
    CLEANUP_EXPECTATION,
    Binding,
    Exchange,
    HttpAction,
    Origin,
    TestCase,
    to_request,
)
from .api_model import plural, singular
from .auth import TokenCache, attach_auth
from .coverage import (
    Archive,
    derive_targets,
    record_execution,
    value_key,
)
from .derived import TransformRegistry, apply_derived_params, derived_fields
from .emitter import find_faults
from .errors import (
    AuthError,
    BindingError,
    ConfigurationError,
    SessionAbort,
    TransportError,
)
from .input_gen import GenConfig, complete_example_object, gen_value, sweep_candidates
from .links import expand_link, resolve_action
from .transport import make_transport
from .values import UNDEFINED, is_undefined

STOP_REASONS = ("budget", "premature", "all-covered")
_PATH_PARAM = re.compile(r"{([^{}/]+)}")


@dataclass(frozen=True)
class SessionConfig(object):
    """
    Settings of a fuzzing session.

    Parameters
    ----------
    max_time : float or str, optional
        Time budget, in seconds or as ``"30s"``, ``"10m"``, ``"1h"``.
        (Default: ``60.0``)

    premature_stop : float or str, optional
        Stop when no new target has been covered for this long. ``None`` disables
        the premature stop. (Default: ``None``)

    rate_per_minute : int, optional
        Maximum number of requests per minute, ``None`` for no limit.
        (Default: ``None``)

    seed : int, optional
        Seed of the generation random stream. (Default: ``None``)

    base_url : str, optional
        Target API; ``sim://`` URLs select the in-process fixtures.
        (Default: ``"sim://fixtures"``)

    cleanup : bool, optional
        Whether resources created by a test are deleted at its end.
        (Default: ``True``)

    dictionary : bool, optional
        Whether identifiers from collection responses are reused in read
        operations. (Default: ``True``)

    follow_link_probability : float, optional
        Probability of following each declared link of a called endpoint.
        (Default: ``0.5``)

    max_consecutive_errors : int, optional
        Number of consecutive transport failures after which the session aborts.
        (Default: ``30``)

    quiet : bool, optional
        Suppress printed output. (Default: ``False``)

    progressbar : bool, optional
        Whether to display a :mod:`tqdm` progress bar; ``None`` means
        ``not quiet``. (Default: ``None``)
    """

    max_time: object = 60.0
    premature_stop: object = None
    rate_per_minute: int = None
    seed: int = None
    base_url: str = "sim://fixtures"
    cleanup: bool = True
    dictionary: bool = True
    follow_link_probability: float = 0.5
    max_consecutive_errors: int = 30
    quiet: bool = False
    progressbar: bool = None

    def __post_init__(self):
        object.__setattr__(self, "max_time", parse_duration(self.max_time))
        object.__setattr__(self, "premature_stop", parse_duration(self.premature_stop))
        if self.max_time <= 0:
            raise ConfigurationError("max_time must be positive.")
        if self.premature_stop is not None and self.premature_stop > self.max_time:
            raise ConfigurationError("premature_stop must not exceed max_time.")
        if self.rate_per_minute is not None and self.rate_per_minute < 1:
            raise ConfigurationError("rate_per_minute must be at least 1.")
        if not 0 <= self.follow_link_probability <= 1:
            raise ConfigurationError("follow_link_probability must be in [0, 1].")
        return


@dataclass
class SessionStats(object):
    """
    Counters of a finished session.
    """

    stop_reason: str = None
    elapsed: float = 0.0
    tests: int = 0
    actions: int = 0
    requests: int = 0
    logins: int = 0
    cleanup_calls: int = 0
    transport_errors: int = 0
    faults: int = 0
    covered: int = 0
    total_targets: int = 0

    def to_dict(self):
        return dict(self.__dict__)

    def __str__(self):
        return (
            f"Stopped ({self.stop_reason}) after {format_duration(self.elapsed)}: "
            f"{self.tests} tests, {self.requests} requests "
            f"({self.logins} logins, {self.cleanup_calls} cleanup calls), "
            f"{self.covered}/{self.total_targets} targets covered, "
            f"{self.faults} potential faults."
        )


def throttle(rate_per_minute, last_ms):
    """
    Wait before the next request so that at most ``rate_per_minute`` requests are
    sent per minute.

    Parameters
    ----------
    rate_per_minute : int
        Request budget per minute, at least 1.

    last_ms : float
        Duration of the previous request, in milliseconds.

    Returns
    -------
    out : float
        Milliseconds to wait: ``max(0, 60000 / rate_per_minute - last_ms)``.
    """
    if rate_per_minute < 1:
        raise ValueError("rate_per_minute must be at least 1.")
    return max(0.0, 60000.0 / rate_per_minute - last_ms)


class RateLimiter(object):
    """
    Space requests according to :func:`throttle`.

    Parameters
    ----------
    rate_per_minute : int, optional
        Request budget per minute; ``None`` disables limiting. (Default: ``None``)

    clock : object
        Clock whose ``sleep`` is used to wait.
    """

    def __init__(self, rate_per_minute=None, clock=None):
        self.rate_per_minute = rate_per_minute
        self.clock = clock
        self.log = []
        self._last_ms = None
        return

    def before_request(self):
        """
        Sleep as long as the previous request requires; the pair
        ``(last duration, wait)`` is appended to :attr:`log`.
        """
        if self.rate_per_minute is None or self._last_ms is None:
            return
        wait = throttle(self.rate_per_minute, self._last_ms)
        self.log.append((self._last_ms, wait))
        if wait > 0:
            self.clock.sleep(wait / 1000.0)
        return

    def pending_wait(self):
        """
        Seconds the next request would wait, without waiting.
        """
        if self.rate_per_minute is None or self._last_ms is None:
            return 0.0
        return throttle(self.rate_per_minute, self._last_ms) / 1000.0

    def after_request(self, elapsed_ms):
        self._last_ms = elapsed_ms
        return


class SessionClient(object):
    """
    Sends every request of a session (calls, logins and cleanup) through the rate
    limiter and counts them.

    Parameters
    ----------
    transport : ~apifuzz.transport._BaseTransport
        Transport to the API.

    limiter : ~apifuzz.engine.RateLimiter, optional
        Rate limiter. (Default: no limiting)
    """

    def __init__(self, transport, limiter=None):
        self.transport = transport
        self.clock = transport.clock
        self.limiter = RateLimiter(clock=self.clock) if limiter is None else limiter
        self.requests = 0
        return

    def send(self, request):
        self.limiter.before_request()
        start = self.clock.now()
        try:
            self.requests += 1
            return self.transport.send(request)
        finally:
            self.limiter.after_request((self.clock.now() - start) * 1000.0)


def _split_last(path):
    head, _, last = path.rstrip("/").rpartition("/")
    return head, last


def item_templates(collection_path, model, verb=None):
    """
    Paths of the form ``<collection>/{param}`` matching a collection path.

    The exact path is tried first, then the singular and plural variants of its
    last segment (``/users`` also matches ``/user/{id}``).

    Parameters
    ----------
    collection_path : str
        Path without a trailing parameter, e.g. ``/users``.

    model : ~apifuzz.api_model.ApiModel
        Model to search.

    verb : str, optional
        Only endpoints with this method. (Default: ``None``, any)

    Returns
    -------
    out : list
        Matching endpoints, best match first.
    """
    head, last = _split_last(collection_path)
    prefixes = list(
        dict.fromkeys(
            [collection_path.rstrip("/")]
            + [f"{head}/{w}" for w in (singular(last), plural(last))]
        )
    )
    out = []
    for prefix in prefixes:
        for e in model.endpoints:
            if verb is not None and e.verb != verb:
                continue
            p_head, p_last = _split_last(e.path)
            if p_head == prefix and _PATH_PARAM.fullmatch(p_last) and e not in out:
                out.append(e)
    return out


class ResponseDictionary(object):
    """
    Identifiers harvested from collection responses, keyed by item path template.

    Values are offered only to read (``GET``) actions.
    """

    def __init__(self):
        self.entries = dict()
        self.provenance = dict()
        return

    def add(self, template, value, endpoint, pointer, timestamp):
        values = self.entries.setdefault(template, [])
        if value not in values:
            values.append(value)
        self.provenance.setdefault(value, (endpoint, pointer, timestamp))
        return

    def candidates(self, template):
        """
        Harvested values for a path template, in harvest order.
        """
        return list(self.entries.get(template, []))

    def __len__(self):
        return sum(len(v) for v in self.entries.values())


def _collection_items(body):
    if isinstance(body, list):
        return body, ()
    if isinstance(body, dict):
        arrays = [(k, v) for k, v in body.items() if isinstance(v, list)]
        if len(arrays) == 1:
            return arrays[0][1], (arrays[0][0],)
    return None, ()


def _id_field(items, resource):
    objects = [i for i in items if isinstance(i, dict)]
    if not objects:
        return None
    for name in ("id", f"{singular(resource)}Id", f"{singular(resource)}_id"):
        if all(name in o for o in objects):
            return name
    primitives = [
        k
        for k, v in objects[0].items()
        if isinstance(v, (str, int)) and not isinstance(v, bool)
    ]
    if len(primitives) == 1:
        name = primitives[0]
        values = [o.get(name) for o in objects]
        if None not in values and len(set(map(str, values))) == len(values):
            return name
    return None


def harvest_dictionary(dictionary, action, exchange, model, now=0.0):
    """
    Store the identifiers listed by a successful collection read.

    Only 2xx ``GET`` calls on paths without parameters whose body is an array of
    objects (or an object wrapping exactly one array) are harvested. The
    identifier field is ``id``, ``<singular>Id``, or the single primitive field
    whose values are all distinct. Values are stored under every matching
    ``<collection>/{param}`` template.

    Parameters
    ----------
    dictionary : ~apifuzz.engine.ResponseDictionary
        Dictionary, updated in place.

    action : ~apifuzz.actions.HttpAction
        Executed action.

    exchange : ~apifuzz.actions.Exchange
        Its recorded exchange.

    model : ~apifuzz.api_model.ApiModel
        Model of the API.

    now : float, optional
        Harvest time. (Default: ``0.0``)

    Returns
    -------
    out : ~apifuzz.engine.ResponseDictionary
        The dictionary.
    """
    if (
        action.verb != "GET"
        or exchange.response is None
        or not exchange.response.is_success
        or _PATH_PARAM.search(action.path)
    ):
        return dictionary
    items, wrapper = _collection_items(exchange.body)
    if not items:
        return dictionary
    _, resource = _split_last(action.path)
    name = _id_field(items, resource)
    if name is None:
        return dictionary
    templates = [e.path for e in item_templates(action.path, model)]
    for item in items:
        if not isinstance(item, dict) or item.get(name) is None:
            continue
        value = item[name]
        for template in dict.fromkeys(templates):
            dictionary.add(template, value, action.key, wrapper + (name,), now)
    return dictionary


def _created_id_pointer(body, resource):
    candidates = ("id", f"{singular(resource)}Id")
    if isinstance(body, dict):
        for name in candidates:
            if body.get(name) is not None and not isinstance(body[name], (dict, list)):
                return (name,)
        data = body.get("data")
        if isinstance(data, dict):
            for name in candidates:
                if data.get(name) is not None:
                    return ("data", name)
    return None


def _client_chosen_id(action, resource):
    if not isinstance(action.body, dict):
        return UNDEFINED
    for name in ("id", f"{singular(resource)}Id"):
        value = action.body.get(name)
        if value is not None and not isinstance(value, (dict, list)):
            return value
    return UNDEFINED


def _same_target(a, x, b, y):
    if x.request is not None and y.request is not None:
        return x.request.path == y.request.path
    return a.path == b.path and a.path_params == b.path_params


def _proven_absent(action, exchange, earlier):
    for before, seen in earlier:
        if before.verb != "GET" or before.role != "call" or seen.status != 404:
            continue
        if _same_target(before, seen, action, exchange):
            return True
    return False


def _is_creation(action, exchange, earlier=()):
    if action.role != "call" or exchange.response is None:
        return False
    if not exchange.response.is_success:
        return False
    if action.verb == "POST":
        return True
    if action.verb == "PUT":
        if exchange.status == 201:
            return True
        # 200 or 204 is an update unless this test saw the id missing
        return _proven_absent(action, exchange, earlier)
    return False


def plan_cleanup(test, exchanges, model):
    """
    Append ``DELETE`` actions removing what a test created.

    Every 2xx ``POST`` and every ``PUT`` that created its resource gets, at the
    end of the test and in reverse creation order, a ``DELETE`` on the best
    matching item endpoint (see :func:`item_templates`). The identifier is bound
    from the creation response when it carries one, else taken from the
    client-chosen identifier in the request. Cleanup actions accept 2xx or 404.

    Parameters
    ----------
    test : ~apifuzz.actions.TestCase
        Executed test.

    exchanges : list
        Its exchanges, one per action.

    model : ~apifuzz.api_model.ApiModel
        Model of the API.

    Returns
    -------
    out : ~apifuzz.actions.TestCase
        Test with cleanup actions appended (unchanged if nothing was created).
    """
    planned = []
    pairs = list(zip(test.actions, exchanges))
    for i, (action, exchange) in enumerate(pairs):
        if not _is_creation(action, exchange, pairs[:i]):
            continue
        if action.verb == "PUT":
            deletes = [
                e
                for e in model.endpoints
                if e.verb == "DELETE" and e.path == action.path
            ]
            if not deletes:
                continue
            planned.append((i, deletes[0], None, dict(action.path_params), True))
            continue
        _, resource = _split_last(action.path)
        deletes = item_templates(action.path, model, verb="DELETE")
        if not deletes:
            continue
        endpoint = deletes[0]
        slot = _PATH_PARAM.findall(endpoint.path)[-1]
        pointer = _created_id_pointer(exchange.body, resource)
        if pointer is not None:
            planned.append((i, endpoint, (slot, pointer), dict(), False))
            continue
        chosen = _client_chosen_id(action, resource)
        if not is_undefined(chosen):
            planned.append((i, endpoint, None, {slot: chosen}, False))
    for i, endpoint, extraction, path_params, same_path in reversed(planned):
        target = len(test.actions)
        bindings = []
        if extraction is not None:
            slot, pointer = extraction
            variable = f"created_{i}__{'_'.join(str(s) for s in pointer)}"
            bindings.append(Binding(variable, i, pointer, target, "path", slot))
            path_params[slot] = "${" + variable + "}"
        elif same_path:
            for b in test.bindings_for(i):
                if b.slot_kind == "path" and b.slot_name in path_params:
                    bindings.append(replace(b, target=target))
        cleanup = HttpAction(
            verb="DELETE",
            path=endpoint.path,
            path_params=path_params,
            role="cleanup",
            expectation=CLEANUP_EXPECTATION,
        )
        test = test.append(cleanup, bindings)
    return test


class ActionSampler(object):
    """
    Builds actions and test cases for an API model.

    Parameters
    ----------
    model : ~apifuzz.api_model.ApiModel
        Model of the API.

    gen_config : ~apifuzz.input_gen.GenConfig, optional
        Value generation settings. (Default: ``GenConfig()``)

    seed : int, optional
        Seed of the random stream. (Default: ``None``)

    dictionary : ~apifuzz.engine.ResponseDictionary, optional
        Harvested identifiers offered to ``GET`` path parameters.
        (Default: ``None``)

    rules : list, optional
        Derived-parameter rules, recorded on the actions they affect.
        (Default: ``()``)

    follow_link_probability : float, optional
        Probability of following each declared link. (Default: ``0.5``)
    """

    def __init__(
        self,
        model,
        gen_config=None,
        seed=None,
        dictionary=None,
        rules=(),
        follow_link_probability=0.5,
    ):
        self.model = model
        self.gen_config = GenConfig() if gen_config is None else gen_config
        self.seed = seed
        self.dictionary = dictionary
        self.rules = tuple(rules)
        self.follow_link_probability = follow_link_probability
        self.reset_rng()
        return

    def reset_rng(self):
        """
        Reset the random number generator to its initial state.
        """
        self.rng = np.random.default_rng(seed=self.seed)
        return

    def action(self, endpoint, presence=None, fixed=None, example=None):
        """
        Build a call to ``endpoint``.

        Parameters
        ----------
        endpoint : ~apifuzz.api_model.EndpointSpec
            Endpoint to call.

        presence : int, optional
            Bitmask over the optional parameters; random when ``None``.
            (Default: ``None``)

        fixed : dict, optional
            Designator to value for parameters whose value is imposed.
            (Default: ``None``)

        example : tuple, optional
            ``(slot, example index)`` to use: a parameter designator or
            ``"body"``. (Default: ``None``)

        Returns
        -------
        out : ~apifuzz.actions.HttpAction
            The action.
        """
        cfg, rng = self.gen_config, self.rng
        fixed = dict() if fixed is None else fixed
        optional = endpoint.optional_params
        if presence is None:
            presence = 0
            for i in range(len(optional)):
                if rng.random() < cfg.optional_field_probability:
                    presence |= 1 << i
        for designator in fixed:
            param = endpoint.param(designator)
            if param is not None and param in optional:
                presence |= 1 << optional.index(param)
        if example is not None and example[0] != "body":
            param = endpoint.param(example[0])
            if param is not None and param in optional:
                presence |= 1 << optional.index(param)
        slots = dict(path=dict(), query=dict(), header=dict())
        enum_values, examples_used, dictionary_slots = [], [], []
        for param in endpoint.params:
            if not param.required and not presence >> optional.index(param) & 1:
                continue
            if param.designator in fixed:
                value = fixed[param.designator]
            elif example is not None and example[0] == param.designator:
                value = param.examples[example[1]]
                examples_used.append(example)
            elif self._use_dictionary(endpoint, param):
                values = self.dictionary.candidates(endpoint.path)
                value = values[int(rng.integers(len(values)))]
                dictionary_slots.append(param.designator)
            else:
                trace = []
                value = gen_value(
                    param.schema, cfg, rng, examples=param.examples, trace=trace
                )
                if trace:
                    examples_used.append((param.designator, trace[0]))
            if param.schema.constraints.enum:
                enum_values.append((param.designator, value))
            slots[param.location][param.name] = value
        body = UNDEFINED
        schema = endpoint.body_schema
        if schema is not None:
            if example is not None and example[0] == "body":
                body = schema.examples[example[1]]
                if isinstance(body, dict):
                    body = complete_example_object(schema, body, cfg, rng)
                examples_used.append(example)
            elif endpoint.body_required or rng.random() < 0.8:
                trace = []
                body = gen_value(schema, cfg, rng, trace=trace)
                if trace:
                    examples_used.append(("body", trace[0]))
        return HttpAction(
            verb=endpoint.verb,
            path=endpoint.path,
            path_params=slots["path"],
            query=slots["query"],
            headers=slots["header"],
            body=body,
            content_type=endpoint.body_media_type,
            origin=Origin(
                presence=presence,
                enum_values=tuple(enum_values),
                examples_used=tuple(examples_used),
                dictionary_slots=tuple(dictionary_slots),
            ),
            derive=derived_fields(body, self.rules, endpoint.verb, endpoint.path),
        )

    def _use_dictionary(self, endpoint, param):
        return (
            self.dictionary is not None
            and endpoint.verb == "GET"
            and param.location == "path"
            and len(self.dictionary.candidates(endpoint.path)) > 0
            and self.rng.random() < 0.5
        )

    def follow_links(self, test, index, force=None):
        """
        Append the actions of links declared on a call's 2xx responses.

        Each link is followed with probability ``follow_link_probability``; the
        link ``force`` (``(status key, name)``) always is.
        """
        action = test.actions[index]
        endpoint = self.model.find(action.verb, action.path)
        if endpoint is None:
            return test
        for response in endpoint.responses:
            if not str(response.status).startswith("2"):
                continue
            for link in response.links:
                forced = force == (str(response.status), link.name)
                if forced or self.rng.random() < self.follow_link_probability:
                    test = self._expand(test, index, link, response.status)
        return test

    def _expand(self, test, index, link, status):
        test = expand_link(
            test, index, link, self.model, status, cfg=self.gen_config, rng=self.rng
        )
        target = self.model.by_operation_id(link.target_operation_id)
        appended = test.actions[-1]
        if appended.body is not UNDEFINED and target is not None:
            derive = derived_fields(appended.body, self.rules, target.verb, target.path)
            test = test.replace_action(len(test) - 1, replace(appended, derive=derive))
        return test

    def test_for(self, target):
        """
        Build a test case aimed at a coverage target.

        Parameters
        ----------
        target : ~apifuzz.coverage.CoverageTarget
            Pending target.

        Returns
        -------
        out : ~apifuzz.actions.TestCase
            A test whose first action calls the target's endpoint, followed by
            link actions.
        """
        endpoint = self.model.by_key(target.endpoint)
        presence, fixed, example, force = None, None, None, None
        if target.kind == "combo":
            presence = int(target.detail[0], 2)
        elif target.kind == "enum":
            designator, key = target.detail
            param = endpoint.param(designator)
            for value, _ in sweep_candidates(param):
                if value_key(value) == key:
                    fixed = {designator: value}
        elif target.kind == "example":
            example = (target.detail[0], int(target.detail[1]))
        elif target.kind == "link":
            force = tuple(target.detail)
        test = TestCase((self.action(endpoint, presence, fixed, example),))
        return self.follow_links(test, 0, force=force)


class FuzzSession(object):
    """
    One fuzzing session against an API.

    Parameters
    ----------
    model : ~apifuzz.api_model.ApiModel
        Filtered model of the API.

    config : ~apifuzz.engine.SessionConfig, optional
        Session settings. (Default: ``SessionConfig()``)

    auth : ~apifuzz.auth.AuthSpec, optional
        Authentication applied to every call. (Default: ``None``)

    targets : set, optional
        Coverage targets; derived from the model when ``None``.
        (Default: ``None``)

    transport : ~apifuzz.transport._BaseTransport, optional
        Transport; built from ``config.base_url`` when ``None``.
        (Default: ``None``)

    rules : list, optional
        Derived-parameter rules. (Default: ``()``)

    registry : ~apifuzz.derived.TransformRegistry, optional
        Transforms used by ``rules``. (Default: ``TransformRegistry()``)

    gen_config : ~apifuzz.input_gen.GenConfig, optional
        Value generation settings. (Default: ``GenConfig()``)

    extra_headers : dict, optional
        Headers added to every call. (Default: ``None``)
    """

    def __init__(
        self,
        model,
        config=None,
        auth=None,
        targets=None,
        transport=None,
        rules=(),
        registry=None,
        gen_config=None,
        extra_headers=None,
    ):
        if not model.endpoints:
            raise ConfigurationError("The API model has no endpoints to fuzz.")
        self.model = model
        self.config = SessionConfig() if config is None else config
        self.auth = auth
        self.targets = derive_targets(model) if targets is None else set(targets)
        self.transport = (
            make_transport(self.config.base_url) if transport is None else transport
        )
        self.rules = tuple(rules)
        self.registry = TransformRegistry() if registry is None else registry
        self.registry.check(self.rules)
        self.extra_headers = dict(extra_headers or dict())
        self.clock = self.transport.clock
        self.limiter = RateLimiter(self.config.rate_per_minute, self.clock)
        self.client = SessionClient(self.transport, self.limiter)
        self.tokens = TokenCache(self.clock)
        self.dictionary = ResponseDictionary() if self.config.dictionary else None
        self.sampler = ActionSampler(
            model,
            gen_config=gen_config,
            seed=self.config.seed,
            dictionary=self.dictionary,
            rules=self.rules,
            follow_link_probability=self.config.follow_link_probability,
        )
        self.archive = Archive(self.targets)
        self.stats = SessionStats(total_targets=len(self.targets))
        self.action_log = []
        self._consecutive_errors = 0
        self._deadline = None
        self._stopped = None
        return

    def _out_of_time(self):
        if self._deadline is None:
            return False
        deadline, reason = self._deadline
        if self.clock.now() + self.limiter.pending_wait() < deadline:
            return False
        self._stopped = reason
        return True

    def _prepare(self, test, index, exchanges):
        action = resolve_action(test, index, exchanges)
        if self.extra_headers and action.role != "login":
            headers = dict(self.extra_headers)
            headers.update(action.headers)
            action = replace(action, headers=headers)
        if self.auth is not None and action.authenticated:
            action = attach_auth(action, self.auth, self.tokens, self.client)
        if action.derive:
            body = apply_derived_params(
                action.body, self.rules, self.registry, action.path, action.verb
            )
            action = replace(action, body=body)
        return action

    def execute(self, test, start=0, exchanges=None):
        """
        Execute the actions of a test from index ``start``.

        Parameters
        ----------
        test : ~apifuzz.actions.TestCase
            Test to run.

        start : int, optional
            First action to execute. (Default: ``0``)

        exchanges : list, optional
            Exchanges of the actions before ``start``. (Default: ``None``)

        Returns
        -------
        out : list
            One :class:`~apifuzz.actions.Exchange` per executed action.
        """
        exchanges = [] if exchanges is None else list(exchanges)
        for i in range(start, len(test.actions)):
            if test.actions[i].role == "call" and self._out_of_time():
                break
            started = self.clock.now()
            request = None
            try:
                action = self._prepare(test, i, exchanges)
                request = to_request(action, self.model.base_path)
                response = self.client.send(request)
            except BindingError as e:
                exchanges.append(Exchange(request, None, str(e), started))
            except TransportError as e:
                self.stats.transport_errors += 1
                self._consecutive_errors += 1
                exchanges.append(Exchange(request, None, f"transport: {e}", started))
                if self._consecutive_errors >= self.config.max_consecutive_errors:
                    raise SessionAbort(
                        f"{self._consecutive_errors} consecutive requests failed; "
                        f"last error: {e}"
                    ) from e
            else:
                self._consecutive_errors = 0
                if response.status == 401 and self.auth is not None:
                    if self.auth.is_login:
                        self.tokens.invalidate(self.auth)
                exchanges.append(Exchange(request, response, None, started))
            self._log(test, i, exchanges[-1])
        return exchanges

    def _log(self, test, index, exchange):
        action = test.actions[index]
        self.stats.actions += 1
        if action.role == "cleanup":
            self.stats.cleanup_calls += 1
        self.action_log.append(
            dict(
                seq=len(self.action_log),
                time=round(exchange.started_at, 6),
                test=self.stats.tests,
                index=index,
                role=action.role,
                verb=action.verb,
                path=action.path,
                url=None if exchange.request is None else exchange.request.path,
                status=exchange.status,
                dictionary_slots=list(action.origin.dictionary_slots),
                error=exchange.error,
            )
        )
        return

    def run_test(self, test):
        """
        Execute a test, harvest identifiers, run its cleanup and record coverage.

        Parameters
        ----------
        test : ~apifuzz.actions.TestCase
            Test to run.

        Returns
        -------
        out : set
            Targets newly covered by the test.
        """
        exchanges = self.execute(test)
        if len(exchanges) < len(test.actions):
            if not exchanges:
                return set()
            test = test.prefix(len(exchanges))
        if self.dictionary is not None:
            for action, exchange in zip(test.actions, exchanges):
                if action.role == "call":
                    harvest_dictionary(
                        self.dictionary, action, exchange, self.model, self.clock.now()
                    )
        if self.config.cleanup:
            n = len(test.actions)
            test = plan_cleanup(test, exchanges, self.model)
            if len(test.actions) > n:
                exchanges = self.execute(test, start=n, exchanges=exchanges)
        faults = find_faults(test, exchanges, self.model)
        self.stats.tests += 1
        self.stats.faults += len(faults)
        _, newly = record_execution(
            self.archive, test, exchanges, self.model, faults, now=self.clock.now()
        )
        return newly

    def run(self):
        """
        Run the session until the budget is spent, coverage stalls for
        ``premature_stop`` or every target is covered.

        Returns
        -------
        out : tuple
            ``(Archive, SessionStats)``.

        Raises
        ------
        SessionAbort
            After too many consecutive transport failures, or when login fails.
        """
        cfg = self.config
        progressbar = not cfg.quiet if cfg.progressbar is None else cfg.progressbar
        start = self.clock.now()
        last_new = start
        bar = tqdm.tqdm(
            total=round(cfg.max_time, 3), unit="s", disable=not progressbar, leave=False
        )
        shown = 0.0
        self._stopped = None
        try:
            while True:
                now = self.clock.now()
                elapsed = now - start
                bar.update(round(min(elapsed, cfg.max_time) - shown, 3))
                shown = min(elapsed, cfg.max_time)
                if elapsed >= cfg.max_time:
                    self.stats.stop_reason = "budget"
                    break
                stalled = now - last_new
                if cfg.premature_stop is not None and stalled >= cfg.premature_stop:
                    self.stats.stop_reason = "premature"
                    break
                pending = sorted(self.archive.pending)
                if not pending:
                    self.stats.stop_reason = "all-covered"
                    break
                target = pending[int(self.sampler.rng.integers(len(pending)))]
                self._deadline = (start + cfg.max_time, "budget")
                if cfg.premature_stop is not None:
                    window = (last_new + cfg.premature_stop, "premature")
                    self._deadline = min(self._deadline, window)
                try:
                    newly = self.run_test(self.sampler.test_for(target))
                except AuthError as e:
                    raise SessionAbort(f"Authentication failed: {e}") from e
                if newly:
                    last_new = self.clock.now()
                if self._stopped is not None:
                    self.stats.stop_reason = self._stopped
                    break
        finally:
            self._deadline = None
            bar.close()
        self.stats.elapsed = self.clock.now() - start
        self.stats.requests = self.client.requests
        self.stats.logins = sum(self.tokens.login_count.values())
        self.stats.covered = len(self.archive.covered)
        self.stats.total_targets = len(self.archive.targets)
        if not cfg.quiet:
            print(self.stats)
        return self.archive, self.stats


def run_session(model, auth=None, targets=None, cfg=None, **kwargs):
    """
    Run a fuzzing session.

    Parameters
    ----------
    model : ~apifuzz.api_model.ApiModel
        Filtered model of the API.

    auth : ~apifuzz.auth.AuthSpec, optional
        Authentication. (Default: ``None``)

    targets : set, optional
        Coverage targets. (Default: derived from the model)

    cfg : ~apifuzz.engine.SessionConfig, optional
        Session settings. (Default: ``SessionConfig()``)

    **kwargs
        Further arguments of :class:`~apifuzz.engine.FuzzSession`.

    Returns
    -------
    out : tuple
        ``(Archive, SessionStats)``.

    See Also
    --------
    ~apifuzz.engine.FuzzSession
    """
    session = FuzzSession(model, config=cfg, auth=auth, targets=targets, **kwargs)
    return session.run()


def dictionary_reads_only(action_log):
    """
    Whether every logged action that used a harvested identifier was a ``GET``.
    """
    return all(e["verb"] == "GET" for e in action_log if e["dictionary_slots"])
