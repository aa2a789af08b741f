"""
Provides link following: chaining actions whose inputs come from earlier
responses.

An OpenAPI link such as::

    LinkToGetUser:
      operationId: getUser
      parameters:
        path.name: "$response.body#/data/id"
        query.name: BAR

is turned by :func:`expand_link` into a new action on the ``getUser`` endpoint,
with ``query.name`` set to the constant ``BAR`` and ``path.name`` carried by a
:class:`~apifuzz.actions.Binding` that is evaluated against the recorded response
each time the test runs. Extracted values are never frozen into the test.
"""

import re
import warnings
from dataclasses import replace

from .actions import Binding, HttpAction, Origin
from .api_model import Constant, ResponseExtraction
from .errors import BindingError, LinkWarning
from .input_gen import gen_value
from .values import UNDEFINED, get_pointer, render_scalar, set_pointer, parse_pointer

_UNSAFE = re.compile(r"[^0-9A-Za-z]+")


def binding_variable(source, pointer):
    """
    Variable name of a link extraction, e.g. ``link_0__data_id``.

    Parameters
    ----------
    source : int
        Index of the source action.

    pointer : tuple
        Extraction path segments.

    Returns
    -------
    out : str
        Identifier usable in plan files and shell scripts.
    """
    suffix = "_".join(_UNSAFE.sub("_", str(s)).strip("_") for s in pointer) or "body"
    return f"link_{source}__{suffix}"


def _placeholder(variable):
    return "${" + variable + "}"


def expand_link(test, index, link, model, status="200", cfg=None, rng=None):
    """
    Append the action a link leads to.

    Constant bindings are inlined; ``$response.body#/...`` bindings become
    :class:`~apifuzz.actions.Binding` entries reading the response of action
    ``index``. Other runtime expressions are skipped with a
    :class:`~apifuzz.errors.LinkWarning`. Required parameters of the target left
    unbound are generated (when ``cfg`` and ``rng`` are given), as is the request
    body.

    Parameters
    ----------
    test : ~apifuzz.actions.TestCase
        Test containing the source action.

    index : int
        Index of the source action.

    link : ~apifuzz.api_model.LinkSpec
        Link declared on the source action's response.

    model : ~apifuzz.api_model.ApiModel
        Model holding the target operation.

    status : str, optional
        Response key the link is declared under. (Default: ``"200"``)

    cfg : ~apifuzz.input_gen.GenConfig, optional
        Generation settings for unbound parameters. (Default: ``None``)

    rng : ~numpy.random.Generator, optional
        Random stream for unbound parameters. (Default: ``None``)

    Returns
    -------
    out : ~apifuzz.actions.TestCase
        Test with the linked action appended.
    """
    endpoint = model.by_operation_id(link.target_operation_id)
    if endpoint is None:
        raise ValueError(f"Unknown operationId '{link.target_operation_id}'.")
    if not 0 <= index < len(test.actions):
        raise IndexError(f"No action {index} in a test of {len(test.actions)}.")
    target = len(test.actions)
    slots = dict(path=dict(), query=dict(), header=dict())
    bindings = []
    if link.has_request_body:
        warnings.warn(LinkWarning(f"Link '{link.name}': requestBody is not followed."))
    for designator, binding in link.bindings:
        param = endpoint.param(designator)
        if param is None:
            warnings.warn(
                LinkWarning(
                    f"Link '{link.name}': {endpoint.key} has no parameter "
                    f"'{designator}'; binding skipped."
                )
            )
            continue
        if isinstance(binding, Constant):
            slots[param.location][param.name] = binding.value
        elif isinstance(binding, ResponseExtraction):
            variable = binding_variable(index, binding.pointer)
            bindings.append(
                Binding(
                    id=variable,
                    source=index,
                    pointer=binding.pointer,
                    target=target,
                    slot_kind=param.location,
                    slot_name=param.name,
                )
            )
            slots[param.location][param.name] = _placeholder(variable)
        else:
            warnings.warn(
                LinkWarning(
                    f"Link '{link.name}': expression '{binding.expression}' is not "
                    "supported; binding skipped."
                )
            )

    for param in endpoint.params:
        if param.name in slots[param.location] or not param.required:
            continue
        if cfg is None or rng is None:
            continue
        slots[param.location][param.name] = gen_value(
            param.schema, cfg, rng, examples=param.examples
        )

    body = UNDEFINED
    if endpoint.body_schema is not None and cfg is not None and rng is not None:
        body = gen_value(endpoint.body_schema, cfg, rng)

    presence = 0
    for i, p in enumerate(endpoint.optional_params):
        if p.name in slots[p.location]:
            presence |= 1 << i
    action = HttpAction(
        verb=endpoint.verb,
        path=endpoint.path,
        path_params=slots["path"],
        query=slots["query"],
        headers=slots["header"],
        body=body,
        content_type=endpoint.body_media_type,
        origin=Origin(
            presence=presence,
            enum_values=tuple(
                (p.designator, slots[p.location][p.name])
                for p in endpoint.params
                if p.schema.constraints.enum and p.name in slots[p.location]
            ),
            followed_link=(index, str(status), link.name),
        ),
    )
    return test.append(action, bindings)


def evaluate_binding(binding, body):
    """
    Extract a binding's value from a recorded response body.

    Parameters
    ----------
    binding : ~apifuzz.actions.Binding
        Binding to evaluate.

    body : object
        Parsed response body of the source action.

    Returns
    -------
    out : str
        Value rendered as text (``true``/``false``/``null`` for literals), without
        the binding's prefix.

    Raises
    ------
    BindingError
        If the path does not exist in ``body``.
    """
    return render_scalar(get_pointer(body, binding.pointer))


def resolve_action(test, index, exchanges):
    """
    Substitute the values of all bindings targeting action ``index``.

    Parameters
    ----------
    test : ~apifuzz.actions.TestCase
        The test.

    index : int
        Action to resolve.

    exchanges : list
        Recorded :class:`~apifuzz.actions.Exchange` entries of earlier actions.

    Returns
    -------
    out : ~apifuzz.actions.HttpAction
        Action with concrete values.

    Raises
    ------
    BindingError
        If a source has no response or lacks the extraction path.
    """
    action = test.actions[index]
    path_params = dict(action.path_params)
    query = dict(action.query)
    headers = dict(action.headers)
    body = action.body
    for b in test.bindings_for(index):
        exchange = exchanges[b.source] if b.source < len(exchanges) else None
        if exchange is None or exchange.response is None:
            raise BindingError(f"binding {b.id}: action {b.source} has no response")
        try:
            raw = get_pointer(exchange.body, b.pointer)
        except BindingError as e:
            raise BindingError(f"binding {b.id}: {e}", b.pointer) from e
        if b.slot_kind == "path":
            path_params[b.slot_name] = render_scalar(raw)
        elif b.slot_kind == "query":
            query[b.slot_name] = render_scalar(raw)
        elif b.slot_kind == "header":
            headers[b.slot_name] = b.prefix + render_scalar(raw)
        else:
            body = set_pointer(body, parse_pointer(b.slot_name), raw)
    return replace(
        action, path_params=path_params, query=query, headers=headers, body=body
    )
