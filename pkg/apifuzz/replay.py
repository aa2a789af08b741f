"""
Provides the replay of plan-yaml suites against a running API.

Variables extracted from earlier responses (``extract``) are substituted wherever
``${var}`` appears in later steps. Steps listing ``derive`` fields have those
fields recomputed with the same derived-parameter rules used while fuzzing, and
steps expecting a fault are re-classified against the schema when one is given.
A step refused with 401 while carrying the login token is retried once after the
test's login step runs again.
"""

import re
from dataclasses import dataclass, field
from urllib.parse import quote

import yaml

from .actions import Exchange, Expectation, HttpAction
from .auth import TOKEN_VARIABLE
from .derived import TransformRegistry, apply_derived_params
from .emitter import classify_fault
from .errors import BindingError, ReplayError, TransportError
from .transport import HttpRequest
from .values import dumps, get_pointer, parse_pointer, render_scalar

_PLACEHOLDER = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def load_suite(path):
    """
    Read a plan-yaml file.

    Parameters
    ----------
    path : str
        File written by :func:`~apifuzz.emitter.emit_suite`.

    Returns
    -------
    out : dict
        Parsed suite with ``suite`` and ``tests`` entries.

    Raises
    ------
    ReplayError
        If the file is not a plan-yaml suite.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ReplayError(f"Cannot read suite {path}: {e}") from e
    if not isinstance(data, dict) or "suite" not in data or "tests" not in data:
        raise ReplayError(f"{path} is not a plan-yaml suite.")
    for test in data["tests"] or []:
        if not isinstance(test, dict) or "name" not in test or "steps" not in test:
            raise ReplayError(f"{path}: every test needs 'name' and 'steps'.")
    return data


def substitute(value, variables, encode=False):
    """
    Replace ``${var}`` placeholders in strings, recursively.

    Parameters
    ----------
    value : object
        String, list or mapping.

    variables : dict
        Known variable values (text).

    encode : bool, optional
        Percent-encode substituted values, for paths. (Default: ``False``)

    Returns
    -------
    out : object
        ``value`` with placeholders replaced.

    Raises
    ------
    ReplayError
        For a placeholder with no extracted value.
    """
    if isinstance(value, dict):
        return {k: substitute(v, variables, encode) for k, v in value.items()}
    if isinstance(value, list):
        return [substitute(v, variables, encode) for v in value]
    if not isinstance(value, str):
        return value

    def sub(match):
        name = match.group(1)
        if name not in variables:
            raise ReplayError(f"Variable '{name}' was never extracted.")
        text = variables[name]
        return quote(text, safe="") if encode else text

    return _PLACEHOLDER.sub(sub, value)


@dataclass(frozen=True)
class StepResult(object):
    """
    Outcome of one replayed step.
    """

    test: str
    step: int
    endpoint: str
    status: int = None
    expected: dict = field(default_factory=dict)
    fault: int = None
    ok: bool = True
    error: str = None

    def __str__(self):
        mark = "PASS" if self.ok else "FAIL"
        status = "---" if self.status is None else self.status
        tail = f" ({self.error})" if self.error else ""
        return f"{mark} {self.test} #{self.step} ({status}) {self.endpoint}{tail}"


@dataclass
class ReplayReport(object):
    """
    Results of a replay.
    """

    results: list = field(default_factory=list)

    @property
    def ok(self):
        return all(r.ok for r in self.results)

    @property
    def mismatches(self):
        return [r for r in self.results if not r.ok]

    def statuses(self, test):
        """
        Observed statuses of a test's steps, in order.
        """
        return [r.status for r in self.results if r.test == test]

    def format(self):
        """
        One line per step followed by a total.
        """
        lines = [str(r) for r in self.results]
        lines.append(f"{len(self.results)} steps, {len(self.mismatches)} mismatches.")
        return "\n".join(lines)


def _expectation(expect):
    if "status-in" in expect:
        return Expectation(tuple(expect["status-in"]))
    if "status" in expect:
        return Expectation((expect["status"],))
    return Expectation()


def _check_fault(step, exchange, model, expected):
    endpoint = None if model is None else model.by_key(step.get("endpoint", ""))
    if endpoint is None:
        return None, None
    response = endpoint.response(exchange.status)
    declared = response is not None or not endpoint.responses
    action = HttpAction(verb=endpoint.verb, path=endpoint.path)
    found = classify_fault(
        action, exchange, None if response is None else response.schema, declared
    )
    code = None if found is None else found[0]
    if expected is not None and code != expected:
        return code, f"expected fault {expected}, found {code}"
    return code, None


def replay_suite(
    suite,
    transport,
    model=None,
    rules=(),
    registry=None,
    headers=None,
    quiet=True,
):
    """
    Execute a plan-yaml suite.

    Parameters
    ----------
    suite : dict
        Output of :func:`load_suite`.

    transport : ~apifuzz.transport._BaseTransport
        Transport to the API.

    model : ~apifuzz.api_model.ApiModel, optional
        Model used to re-check expected faults; without it fault expectations are
        not checked. (Default: ``None``)

    rules : list, optional
        Derived-parameter rules for steps listing ``derive`` fields.
        (Default: ``()``)

    registry : ~apifuzz.derived.TransformRegistry, optional
        Transforms of ``rules``. (Default: ``TransformRegistry()``)

    headers : dict, optional
        Headers added to every step but logins. (Default: ``None``)

    quiet : bool, optional
        If ``False``, print each result. (Default: ``True``)

    Returns
    -------
    out : ~apifuzz.replay.ReplayReport
        Per-step results.
    """
    registry = TransformRegistry() if registry is None else registry
    base_path = (suite.get("suite") or dict()).get("base-path") or ""
    report = ReplayReport()
    for test in suite.get("tests") or []:
        variables = dict()
        login = None
        for i, step in enumerate(test["steps"]):
            args = (variables, transport, model, rules, registry, headers or dict())
            result = _replay_step(test["name"], i, step, *args, base_path)
            if step.get("role") == "login":
                login = (i, step)
            elif login is not None and _token_expired(step, result):
                # log in again and retry once
                _replay_step(test["name"], login[0], login[1], *args, base_path)
                result = _replay_step(test["name"], i, step, *args, base_path)
            report.results.append(result)
            if not quiet:
                print(result)
    return report


def _token_expired(step, result):
    if result.ok or result.status != 401:
        return False
    return "${" + TOKEN_VARIABLE + "}" in str(step.get("headers") or dict())


def _replay_step(
    name, i, step, variables, transport, model, rules, registry, headers, base_path
):
    expect = step.get("expect") or dict()
    endpoint = step.get("endpoint", f"{step.get('verb')}:{step.get('path')}")
    try:
        path = substitute(step["path"], variables, encode=True)
        query = substitute(step.get("query") or dict(), variables)
        step_headers = dict() if step.get("role") == "login" else dict(headers)
        step_headers.update(substitute(step.get("headers") or dict(), variables))
        body = None
        if "body" in step:
            payload = substitute(step["body"], variables)
            if step.get("derive"):
                wanted = set(step["derive"])
                verb, _, template = endpoint.partition(":")
                payload = apply_derived_params(
                    payload,
                    [r for r in rules if r.name in wanted],
                    registry,
                    template,
                    verb,
                )
            if isinstance(payload, str) and step.get("role") == "login":
                body = payload
            else:
                body = dumps(payload) if payload is not None else "null"
            step_headers.setdefault(
                "Content-Type", step.get("content-type", "application/json")
            )
    except ReplayError as e:
        return StepResult(name, i, endpoint, expected=expect, ok=False, error=str(e))
    pairs = []
    for k, v in query.items():
        for item in v if isinstance(v, list) else [v]:
            pairs.append((k, render_scalar(item)))
    prefix = "" if step.get("role") == "login" else base_path
    request = HttpRequest(
        method=step["verb"],
        path=prefix + path,
        query=tuple(pairs),
        headers=tuple((k, render_scalar(v)) for k, v in step_headers.items()),
        body=body,
    )
    try:
        response = transport.send(request)
    except TransportError as e:
        return StepResult(name, i, endpoint, expected=expect, ok=False, error=str(e))
    exchange = Exchange(request, response)
    ok = _expectation(expect).accepts(response.status)
    error = None if ok else "unexpected status"
    for entry in step.get("extract") or []:
        try:
            value = get_pointer(exchange.body, parse_pointer(entry["from"]))
        except BindingError as e:
            ok, error = False, f"cannot extract {entry['var']}: {e}"
            continue
        variables[entry["var"]] = render_scalar(value)
    fault = None
    if "fault" in expect or model is not None:
        fault, problem = _check_fault(step, exchange, model, expect.get("fault"))
        if problem is not None and ok:
            ok, error = False, problem
    return StepResult(name, i, endpoint, response.status, expect, fault, ok, error)
