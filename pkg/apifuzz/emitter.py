"""
Provides fault classification and the serialization of minimized archives into
named, summarized test plans.

Two output formats are supported: ``plan-yaml``, a replayable description of each
test (see :mod:`apifuzz.replay`), and ``curl-script``, a shell script for human
inspection. Both are byte-deterministic for identical input.
"""

import json
import os
import re
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal
from urllib.parse import quote

import yaml

from .__version__ import __version__
from .api_model import singular
from .auth import bind_login
from .values import (
    JsonValidator,
    dumps,
    is_undefined,
    json_type,
    render_scalar,
    strip_undefined,
)

FORMATS = ("plan-yaml", "curl-script")
STEP_TIMEOUT_MS = 60000
SERVER_ERROR = 100
SCHEMA_MISMATCH = 101
_PLACEHOLDER = re.compile(r"\$\{[A-Za-z_][A-Za-z0-9_]*\}")
_PATH_PARAM = re.compile(r"{([^{}/]+)}")
_MISMATCH = (
    "Fault101. Received A Response From API With A Structure/Data That Is Not "
    "Matching Its Schema."
)


def _describe(error):
    path = "/" + "/".join(str(p) for p in error.absolute_path)
    if error.validator == "type":
        allowed = error.validator_value
        allowed = [allowed] if isinstance(allowed, str) else list(allowed)
        detail = (
            f"Instance type ({json_type(error.instance)}) does not match any allowed "
            f"primitive type (allowed: {json.dumps(allowed)})"
        )
    else:
        detail = error.message
    return (
        f"{_MISMATCH} Type: validation.response.body.schema.{error.validator}. "
        f"[Path '{path}'] {detail}"
    )


def classify_fault(action, exchange, response_schema=None, declared=True):
    """
    Decide whether an executed action revealed a potential fault.

    Parameters
    ----------
    action : ~apifuzz.actions.HttpAction
        Executed action.

    exchange : ~apifuzz.actions.Exchange
        Its exchange.

    response_schema : ~apifuzz.api_model.ValueSchema, optional
        Declared body schema of the returned status. (Default: ``None``)

    declared : bool, optional
        Whether the returned status is declared by the endpoint.
        (Default: ``True``)

    Returns
    -------
    out : tuple or None
        ``(code, message)``: code 100 for a 5xx status, 101 for a 2xx response
        whose body violates its schema or whose status is undeclared; ``None``
        when nothing is wrong.
    """
    status = exchange.status
    if status is None:
        return None
    if status >= 500:
        return (
            SERVER_ERROR,
            f"Fault100. HTTP Status {status}. The API failed while handling "
            f"{action.verb}:{action.path}.",
        )
    if not 200 <= status <= 299:
        return None
    if not declared:
        return (
            SCHEMA_MISMATCH,
            f"{_MISMATCH} Type: validation.response.status. [Status {status}] "
            "The returned status is not declared for this endpoint.",
        )
    if response_schema is None:
        return None
    body = exchange.body
    if is_undefined(body):
        return None
    validator = JsonValidator(response_schema.to_jsonschema())
    errors = sorted(
        validator.iter_errors(strip_undefined(body)),
        key=lambda e: [str(p) for p in e.absolute_path],
    )
    if not errors:
        return None
    return SCHEMA_MISMATCH, _describe(errors[0])


def find_faults(test, exchanges, model):
    """
    Classify every call of an executed test.

    Returns
    -------
    out : list
        ``(action index, code, message)`` triples.
    """
    out = []
    for i, (action, exchange) in enumerate(zip(test.actions, exchanges)):
        if action.role != "call" or exchange.status is None:
            continue
        endpoint = model.find(action.verb, action.path)
        if endpoint is None:
            continue
        response = endpoint.response(exchange.status)
        declared = response is not None or not endpoint.responses
        fault = classify_fault(
            action,
            exchange,
            None if response is None else response.schema,
            declared=declared,
        )
        if fault is not None:
            out.append((i, fault[0], fault[1]))
    return out


def _camel(word):
    parts = re.split(r"[^0-9A-Za-z]+", word)
    return "".join(p[:1].upper() + p[1:] for p in parts if p)


def resource_noun(path):
    """
    Resource named by a path: the last literal segment, singular when the path
    ends with a parameter (``/users/{id}`` gives ``User``, ``/items`` gives
    ``Items``).
    """
    segments = [s for s in path.split("/") if s]
    if not segments:
        return "Root"
    ends_with_param = bool(_PATH_PARAM.fullmatch(segments[-1]))
    literals = [s for s in segments if not _PATH_PARAM.fullmatch(s)]
    if not literals:
        return "Root"
    noun = singular(literals[-1]) if ends_with_param else literals[-1]
    return _camel(noun) or "Root"


def name_test(index, test, exchanges, faults=()):
    """
    Deterministic name of a test.

    The name is ``test_<index>_<verb>On<Resource><Outcome>``, taken from the last
    call of the test; the outcome is ``CausesServerError`` or
    ``ReturnsMismatchResponseWithSchema`` when the test holds such a fault,
    otherwise ``Returns<status>``.

    Parameters
    ----------
    index : int
        Position in the suite.

    test : ~apifuzz.actions.TestCase
        Executed test.

    exchanges : list
        Its exchanges.

    faults : iterable, optional
        ``(index, code, message)`` triples. (Default: ``()``)

    Returns
    -------
    out : str
        Name such as ``test_1_getOnUserReturnsMismatchResponseWithSchema``.
    """
    pairs = list(zip(test.actions, exchanges))
    calls = [p for p in pairs if p[0].role == "call"] or pairs
    if not calls:
        return f"test_{index}"
    action, exchange = calls[-1]
    codes = {code for _, code, _ in faults}
    if SERVER_ERROR in codes:
        outcome = "CausesServerError"
    elif SCHEMA_MISMATCH in codes:
        outcome = "ReturnsMismatchResponseWithSchema"
    elif exchange.status is None:
        outcome = "GetsNoResponse"
    else:
        outcome = f"Returns{exchange.status}"
    return f"test_{index}_{action.verb.lower()}On{resource_noun(action.path)}{outcome}"


def summary_data(test, exchanges, faults=()):
    """
    Structured summary of an executed test.

    Returns
    -------
    out : dict
        ``calls`` (``"(status) VERB:path"`` strings), ``faults``
        (``{step, code, message}``), ``links`` (``"status:name"``) and
        ``examples`` (``"VERB:path slot #index"``).
    """
    calls, links, examples = [], [], []
    for action, exchange in zip(test.actions, exchanges):
        if action.role == "login":
            continue
        status = "---" if exchange.status is None else exchange.status
        calls.append(f"({status}) {action.key}")
        if action.origin.followed_link is not None:
            _, status_key, name = action.origin.followed_link
            links.append(f"{status_key}:{name}")
        for slot, i in action.origin.examples_used:
            examples.append(f"{action.key} {slot} #{i}")
    return dict(
        calls=calls,
        faults=[dict(step=i, code=code, message=msg) for i, code, msg in faults],
        links=links,
        examples=examples,
    )


def summarize(test, exchanges, faults=()):
    """
    Human-readable summary of an executed test.

    Lists the calls with their statuses, the potential faults per type code, the
    links followed and the examples used; empty sections are omitted.

    Returns
    -------
    out : str
        Summary lines joined with newlines.
    """
    data = summary_data(test, exchanges, faults)
    lines = ["Calls:"]
    lines += [f"{i} - {c}" for i, c in enumerate(data["calls"], start=1)]
    for code, n in sorted(Counter(f["code"] for f in data["faults"]).items()):
        plural = "s" if n > 1 else ""
        lines.append(f"Found {n} potential fault{plural} of type-code {code}")
    if data["links"]:
        n = len(data["links"])
        lines.append(f"Followed {n} link{'s' if n > 1 else ''}:")
        lines += [f"  {link}" for link in data["links"]]
    if data["examples"]:
        n = len(data["examples"])
        lines.append(f"Used {n} example{'s' if n > 1 else ''}:")
        lines += [f"  {e}" for e in data["examples"]]
    return "\n".join(lines)


@dataclass(frozen=True)
class TestPlan(object):
    """
    A named, summarized test ready to be written.

    Parameters
    ----------
    name : str
        Unique name within the suite.

    summary : dict
        Output of :func:`summary_data`.

    summary_text : str
        Output of :func:`summarize`.

    test : ~apifuzz.actions.TestCase
        Actions and bindings, with the login step when authentication uses one.

    statuses : tuple
        Recorded status of each action of ``test`` (``None`` when unknown).

    faults : tuple
        ``(index into test, code, message)`` triples.
    """

    __test__ = False

    name: str
    summary: dict
    summary_text: str
    test: object
    statuses: tuple
    faults: tuple = tuple()


def make_plans(records, auth=None):
    """
    Turn archived records into test plans.

    Parameters
    ----------
    records : list
        :class:`~apifuzz.coverage.TestRecord` entries, e.g. from
        :func:`~apifuzz.coverage.minimized_records`.

    auth : ~apifuzz.auth.AuthSpec, optional
        Authentication; login flows add a login step whose token is extracted
        rather than written. (Default: ``None``)

    Returns
    -------
    out : list
        :class:`~apifuzz.emitter.TestPlan` entries.
    """
    plans = []
    for index, record in enumerate(records):
        test, exchanges, faults = record.test, record.exchanges, record.faults
        statuses = tuple(x.status for x in exchanges)
        bound = bind_login(test, auth)
        offset = len(bound.actions) - len(test.actions)
        if offset:
            statuses = (None,) * offset + statuses
            faults = tuple((i + offset, c, m) for i, c, m in faults)
        plans.append(
            TestPlan(
                name=name_test(index, test, exchanges, record.faults),
                summary=summary_data(test, exchanges, record.faults),
                summary_text=summarize(test, exchanges, record.faults),
                test=bound,
                statuses=statuses,
                faults=tuple(faults),
            )
        )
    return plans


def _plan_path(action):
    def sub(match):
        name = match.group(1)
        if name not in action.path_params:
            return match.group(0)
        value = render_scalar(action.path_params[name])
        if _PLACEHOLDER.fullmatch(value):
            return value
        return quote(value, safe="")

    return _PATH_PARAM.sub(sub, action.path)


def _plan_query(action):
    out = dict()
    for name, value in action.query.items():
        if is_undefined(value):
            continue
        if isinstance(value, list):
            out[name] = [render_scalar(v) for v in value if not is_undefined(v)]
        else:
            out[name] = render_scalar(value)
    return out


def _expectation(action, status, fault):
    expect = dict()
    if action.expectation.statuses:
        expect["status-in"] = [
            s if isinstance(s, str) else int(s) for s in action.expectation.statuses
        ]
    elif action.role == "login":
        expect["status-in"] = ["2xx"]
    elif status is not None:
        expect["status"] = int(status)
    if fault is not None:
        expect["fault"] = int(fault)
    return expect


def plan_steps(plan):
    """
    Plan-yaml steps of a test plan.

    Returns
    -------
    out : list
        One mapping per action with ``endpoint``, ``verb``, ``path``, ``role``
        (login and cleanup steps only),
        ``query``, ``headers``, ``body`` (absent when undefined), ``derive``,
        ``extract``, ``expect`` and ``timeout``.
    """
    faults = {i: (code, msg) for i, code, msg in plan.faults}
    steps = []
    for i, action in enumerate(plan.test.actions):
        step = dict(endpoint=action.key, verb=action.verb, path=_plan_path(action))
        if action.role != "call":
            step["role"] = action.role
        query = _plan_query(action)
        if query:
            step["query"] = query
        headers = {
            k: render_scalar(v)
            for k, v in action.headers.items()
            if not is_undefined(v)
        }
        for b in plan.test.bindings_for(i):
            if b.slot_kind == "header":
                headers[b.slot_name] = b.prefix + "${" + b.id + "}"
        if headers:
            step["headers"] = headers
        if not is_undefined(action.body):
            step["body"] = strip_undefined(action.body)
            if action.content_type is not None:
                step["content-type"] = action.content_type
        if action.derive:
            step["derive"] = list(action.derive)
        extract = dict()
        for b in plan.test.bindings:
            if b.source == i:
                extract.setdefault(b.id, b.extraction)
        if extract:
            step["extract"] = [dict(var=k, **{"from": v}) for k, v in extract.items()]
        code, message = faults.get(i, (None, None))
        step["expect"] = _expectation(action, plan.statuses[i], code)
        if message is not None:
            step["note"] = message
        step["timeout"] = STEP_TIMEOUT_MS
        steps.append(step)
    return steps


class _PlanDumper(yaml.SafeDumper):
    pass


def _represent_decimal(dumper, value):
    return dumper.represent_scalar("tag:yaml.org,2002:float", str(value))


_PlanDumper.add_representer(Decimal, _represent_decimal)


def _yaml(data):
    return yaml.dump(
        data,
        Dumper=_PlanDumper,
        sort_keys=False,
        allow_unicode=True,
        default_flow_style=False,
        width=1000,
    )


def _indent(text, prefix):
    lines = text.splitlines(True)
    return "".join(prefix + line if line.strip() else line for line in lines)


def render_plan_yaml(
    plans, name="apifuzz-suite", base_url_var="BASE_URL", base_path=""
):
    """
    Render test plans as a plan-yaml document.

    Each test is preceded by its summary as a comment block.

    Parameters
    ----------
    plans : list
        :class:`~apifuzz.emitter.TestPlan` entries.

    name : str, optional
        Suite name. (Default: ``"apifuzz-suite"``)

    base_url_var : str, optional
        Variable holding the base URL at replay time. (Default: ``"BASE_URL"``)

    base_path : str, optional
        Server path of the API, prefixed to every step but logins.
        (Default: ``""``)

    Returns
    -------
    out : str
        YAML text.
    """
    header = dict(
        suite={
            "name": name,
            "created-with": f"apifuzz {__version__}",
            "base-url-var": base_url_var,
            "base-path": base_path,
        }
    )
    out = [_yaml(header)]
    if not plans:
        out.append("tests: []\n")
        return "".join(out)
    out.append("tests:\n")
    for plan in plans:
        comment = "".join(
            f"# {line}".rstrip() + "\n" for line in plan.summary_text.splitlines()
        )
        body = _yaml(
            [dict(name=plan.name, summary=plan.summary, steps=plan_steps(plan))]
        )
        out.append(_indent(comment, "  "))
        out.append(_indent(body, "  "))
    return "".join(out)


def _sh_double(text):
    out, last = [], 0
    for match in _PLACEHOLDER.finditer(text):
        out.append(_sh_escape(text[last : match.start()]))
        out.append(match.group(0))
        last = match.end()
    out.append(_sh_escape(text[last:]))
    return '"' + "".join(out) + '"'


def _sh_escape(text):
    for ch in ("\\", '"', "`", "$"):
        text = text.replace(ch, "\\" + ch)
    return text


def _sh_single(text):
    return "'" + text.replace("'", "'\\''") + "'"


def _jq_path(pointer):
    parts = [
        f"[{s}]" if str(s).isdigit() else f"[{json.dumps(str(s))}]" for s in pointer
    ]
    return "." + "".join(parts) if parts else "."


def render_curl_script(plans, base_url_var="BASE_URL", base_path=""):
    """
    Render test plans as a POSIX shell script of ``curl`` calls.

    Extracted values are read with ``jq`` into shell variables named like the
    plan-yaml variables, so ``${var}`` placeholders expand in later calls.

    Returns
    -------
    out : str
        Script text.
    """
    lines = [
        "#!/bin/sh",
        f"# Generated by apifuzz {__version__}",
        f': "${{{base_url_var}:?set {base_url_var} to the API base URL}}"',
        "",
    ]
    for plan in plans:
        lines.append(f"# {plan.name}")
        lines += [f"# {line}".rstrip() for line in plan.summary_text.splitlines()]
        extracted = set()
        for i, step in enumerate(plan_steps(plan)):
            prefix = "" if step.get("role") == "login" else base_path
            url = "${" + base_url_var + "}" + prefix + step["path"]
            query = step.get("query", dict())
            pairs = []
            for k, v in query.items():
                for item in v if isinstance(v, list) else [v]:
                    pairs.append(f"{quote(k, safe='')}={item}")
            if pairs:
                url += "?" + "&".join(pairs)
            cmd = [f"resp_{i}=$(curl -s -X {step['verb']} {_sh_double(url)}"]
            for k, v in step.get("headers", dict()).items():
                cmd.append(f"-H {_sh_double(f'{k}: {v}')}")
            if "body" in step:
                content_type = step.get("content-type", "application/json")
                cmd.append(f"-H {_sh_single('Content-Type: ' + content_type)}")
                data = step["body"]
                if not (isinstance(data, str) and step.get("role") == "login"):
                    data = dumps(data) or "null"
                cmd.append(f"--data {_sh_single(data)}")
            lines.append(" \\\n    ".join(cmd) + ")")
            for b in plan.test.bindings:
                if b.source == i and b.id not in extracted:
                    extracted.add(b.id)
                    lines.append(
                        f"{b.id}=$(printf '%s' \"$resp_{i}\" | jq -r "
                        f"{_sh_single(_jq_path(b.pointer))})"
                    )
        lines.append("")
    return "\n".join(lines) + "\n"


def fault_report(plans):
    """
    Every fault of the suite, in plan order.

    Returns
    -------
    out : list
        ``{test, step, endpoint, code, message}`` mappings.
    """
    out = []
    for plan in plans:
        for i, code, message in plan.faults:
            out.append(
                dict(
                    test=plan.name,
                    step=i,
                    endpoint=plan.test.actions[i].key,
                    code=code,
                    message=message,
                )
            )
    return out


def write_action_log(path, action_log):
    """
    Write an action log as JSON lines.
    """
    with open(path, "w", encoding="utf-8") as f:
        for entry in action_log:
            f.write(json.dumps(entry, sort_keys=True, default=str) + "\n")
    return


def emit_suite(
    plans,
    out_dir,
    fmt="plan-yaml",
    coverage=None,
    action_log=None,
    name="apifuzz-suite",
    base_path="",
    quiet=True,
):
    """
    Write a suite and its reports to a directory.

    Files written: ``suite.yaml`` (``plan-yaml``) or ``suite.sh``
    (``curl-script``), ``fault-report.json``, and, when given, ``coverage.json``
    and ``actions.jsonl``.

    Parameters
    ----------
    plans : list
        :class:`~apifuzz.emitter.TestPlan` entries.

    out_dir : str
        Output directory, created if needed.

    fmt : str, optional
        ``"plan-yaml"`` or ``"curl-script"``. (Default: ``"plan-yaml"``)

    coverage : dict, optional
        Coverage report (and session statistics) to store. (Default: ``None``)

    action_log : list, optional
        Logged actions to store. (Default: ``None``)

    name : str, optional
        Suite name. (Default: ``"apifuzz-suite"``)

    base_path : str, optional
        Server path of the API. (Default: ``""``)

    quiet : bool, optional
        If ``False``, print the written paths. (Default: ``True``)

    Returns
    -------
    out : list
        Paths of the written files.
    """
    if fmt not in FORMATS:
        raise ValueError(f"fmt must be one of {FORMATS}.")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def write(filename, text):
        path = os.path.join(out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        written.append(path)
        return

    if fmt == "plan-yaml":
        write("suite.yaml", render_plan_yaml(plans, name=name, base_path=base_path))
    else:
        write("suite.sh", render_curl_script(plans, base_path=base_path))
    write(
        "fault-report.json",
        json.dumps(fault_report(plans), indent=2, sort_keys=True) + "\n",
    )
    if coverage is not None:
        text = json.dumps(coverage, indent=2, sort_keys=True, default=str)
        write("coverage.json", text + "\n")
    if action_log is not None:
        path = os.path.join(out_dir, "actions.jsonl")
        write_action_log(path, action_log)
        written.append(path)
    if not quiet:
        for path in written:
            print(f"Wrote {path}")
    return written
