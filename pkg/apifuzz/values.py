"""
Provides the tri-state JSON value model used throughout :mod:`apifuzz`.

A JSON value is held as plain Python data: ``None`` is JSON ``null``, ``bool``,
``int`` and :class:`~decimal.Decimal` are booleans and numbers, ``str`` is a string,
``list`` an array and ``dict`` an (ordered) object. The extra singleton
:data:`UNDEFINED` marks a value that is absent altogether. Inside an object an
undefined field is dropped on serialization, whereas a ``None`` field is written as
an explicit ``null``:

>>> dumps({"x": UNDEFINED})
'{}'
>>> dumps({"x": None})
'{"x":null}'

Non-integral numbers are kept as :class:`~decimal.Decimal` so that no precision is
lost between generation, execution and emitted plans.
"""

import json
from decimal import Decimal

from jsonschema import Draft7Validator, validators

from .errors import BindingError


class _Undefined(object):
    """
    Type of the :data:`UNDEFINED` singleton.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __reduce__(self):
        return (_Undefined, ())


UNDEFINED = _Undefined()

JSON_TYPES = ("null", "boolean", "integer", "number", "string", "array", "object")


def is_undefined(value):
    """
    Check whether a value is the :data:`UNDEFINED` marker.

    Parameters
    ----------
    value : object
        Any JSON value.

    Returns
    -------
    out : bool
        ``True`` if ``value`` is :data:`UNDEFINED`.
    """
    return value is UNDEFINED


def json_type(value):
    """
    Name the JSON type of a value.

    Parameters
    ----------
    value : object
        A JSON value (not :data:`UNDEFINED`).

    Returns
    -------
    out : str
        One of ``"null"``, ``"boolean"``, ``"integer"``, ``"number"``, ``"string"``,
        ``"array"``, ``"object"``.
    """
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, (Decimal, float)):
        if isinstance(value, Decimal) and value == value.to_integral_value():
            return "integer"
        if isinstance(value, float) and value.is_integer():
            return "integer"
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (list, tuple)):
        return "array"
    if isinstance(value, dict):
        return "object"
    raise TypeError(f"Not a JSON value: {value!r}")


def conforms_to_type(value, type_name):
    """
    Check a value against a JSON-schema primitive type name.

    Integers conform to ``"number"``; ``None`` conforms to nothing but ``"null"``.

    Parameters
    ----------
    value : object
        A JSON value.

    type_name : str
        Schema type name, e.g. ``"integer"``.

    Returns
    -------
    out : bool
        ``True`` when the value has the given type.
    """
    if is_undefined(value):
        return False
    actual = json_type(value)
    if type_name == "number":
        return actual in ("integer", "number")
    return actual == type_name


def _numeric_type(name):
    def check(checker, instance):
        return conforms_to_type(instance, name)

    return check


#: Draft 7 validator whose ``integer`` and ``number`` checks accept
#: :class:`~decimal.Decimal` values the way :func:`json_type` names them.
JsonValidator = validators.extend(
    Draft7Validator,
    type_checker=Draft7Validator.TYPE_CHECKER.redefine_many(
        {name: _numeric_type(name) for name in ("integer", "number")}
    ),
)


def type_errors(document, value):
    """
    Type errors of a value against a JSON-schema mapping.

    Only failures of the ``type`` keyword are reported, at any depth reached
    through ``properties`` and ``items``; bounds, patterns and required fields are
    not checked.

    Parameters
    ----------
    document : dict
        JSON-schema (draft 7) mapping.

    value : object
        A JSON value.

    Returns
    -------
    out : list
        :class:`jsonschema.exceptions.ValidationError` instances sorted by the path
        of the offending value.
    """
    errors = JsonValidator(document).iter_errors(value)
    return sorted(
        (e for e in errors if e.validator == "type"),
        key=lambda e: [str(p) for p in e.absolute_path],
    )


def describe_type_error(error):
    """
    One-line description of a type error from :func:`type_errors`.
    """
    path = format_pointer(tuple(error.absolute_path)) or "/"
    expected = error.validator_value
    if not isinstance(expected, str):
        expected = " or ".join(expected)
    found = json_type(error.instance)
    return f"value at '{path}' is {found}, expected {expected}"


def strip_undefined(value):
    """
    Return a copy with every :data:`UNDEFINED` object field removed.

    Undefined array elements become ``None``, following JavaScript
    ``JSON.stringify``.

    Parameters
    ----------
    value : object
        A JSON value, possibly containing :data:`UNDEFINED`.

    Returns
    -------
    out : object
        Plain JSON data; :data:`UNDEFINED` if ``value`` itself is undefined.
    """
    if is_undefined(value):
        return UNDEFINED
    if isinstance(value, dict):
        return {k: strip_undefined(v) for k, v in value.items() if not is_undefined(v)}
    if isinstance(value, (list, tuple)):
        return [None if is_undefined(v) else strip_undefined(v) for v in value]
    return value


def _encode_number(value):
    if isinstance(value, Decimal):
        if value == value.to_integral_value() and abs(value.adjusted()) < 28:
            return str(int(value))
        text = format(value.normalize(), "f")
        return text
    return json.dumps(value)


def _encode(value, out):
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, (int, float, Decimal)):
        out.append(_encode_number(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(None if is_undefined(item) else item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        first = True
        for k, v in value.items():
            if is_undefined(v):
                continue
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(str(k), ensure_ascii=False))
            out.append(":")
            _encode(v, out)
        out.append("}")
    else:
        raise TypeError(f"Not a JSON value: {value!r}")


def dumps(value):
    """
    Serialize a JSON value to compact text.

    Object fields holding :data:`UNDEFINED` are omitted; ``None`` fields are written
    as ``null``. Field order is preserved.

    Parameters
    ----------
    value : object
        A JSON value.

    Returns
    -------
    out : str or None
        Compact JSON text, or ``None`` if ``value`` is :data:`UNDEFINED` (no body).
    """
    if is_undefined(value):
        return None
    out = []
    _encode(value, out)
    return "".join(out)


def _parse_number(text):
    number = Decimal(text)
    if number == number.to_integral_value() and "e" not in text.lower():
        return int(number)
    return number


def loads(text):
    """
    Parse JSON text into a JSON value.

    Numbers with a fraction or exponent become :class:`~decimal.Decimal`.

    Parameters
    ----------
    text : str or bytes
        JSON document.

    Returns
    -------
    out : object
        Parsed value.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return json.loads(text, parse_float=_parse_number)


def try_loads(text):
    """
    Parse JSON text, returning :data:`UNDEFINED` if it is empty or not JSON.

    Parameters
    ----------
    text : str or bytes
        Candidate JSON document.

    Returns
    -------
    out : object
        Parsed value or :data:`UNDEFINED`.
    """
    if text is None:
        return UNDEFINED
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            return UNDEFINED
    if not text.strip():
        return UNDEFINED
    try:
        return loads(text)
    except ValueError:
        return UNDEFINED


def render_scalar(value):
    """
    Render a value as the string substituted into a path, query or header slot.

    Parameters
    ----------
    value : object
        A JSON value. Arrays and objects are rendered as compact JSON.

    Returns
    -------
    out : str
        Canonical text form (``true``/``false``/``null`` for literals).
    """
    if isinstance(value, str):
        return value
    return dumps(value)


def parse_pointer(text):
    """
    Normalize an extraction path into a tuple of segments.

    Accepts JSON pointers (``/data/id``, ``#/data/id``), runtime-expression bodies
    (``$response.body#/data/id``), slash paths without leading slash (``data/id``)
    and dot paths (``data.id``). ``~1`` and ``~0`` escapes are decoded for slash
    forms.

    Parameters
    ----------
    text : str
        Extraction path. Empty string, ``"/"`` and ``"#"`` denote the root.

    Returns
    -------
    out : tuple
        Path segments (strings).
    """
    if text.startswith("$response.body"):
        text = text[len("$response.body") :]
    if text.startswith("#"):
        text = text[1:]
    if text in ("", "/"):
        return tuple()
    if "/" in text:
        parts = text.strip("/").split("/")
        return tuple(p.replace("~1", "/").replace("~0", "~") for p in parts)
    return tuple(p for p in text.split(".") if p != "")


def format_pointer(segments):
    """
    Format path segments as a JSON pointer.

    Parameters
    ----------
    segments : tuple
        Path segments.

    Returns
    -------
    out : str
        JSON pointer, ``""`` for the root.
    """
    return "".join(
        "/" + str(s).replace("~", "~0").replace("/", "~1") for s in segments
    )


def get_pointer(value, segments):
    """
    Walk a JSON value along path segments.

    Numeric segments index arrays.

    Parameters
    ----------
    value : object
        A JSON value.

    segments : tuple
        Path segments, e.g. from :func:`parse_pointer`.

    Returns
    -------
    out : object
        The value found.

    Raises
    ------
    BindingError
        If a segment cannot be followed.
    """
    current = value
    for i, segment in enumerate(segments):
        if isinstance(current, dict) and segment in current:
            current = current[segment]
        elif isinstance(current, list) and str(segment).isdigit():
            index = int(segment)
            if index >= len(current):
                raise BindingError(
                    f"Index {index} out of range at {format_pointer(segments[:i])}",
                    segments,
                )
            current = current[index]
        else:
            raise BindingError(
                f"No value at {format_pointer(segments[: i + 1])}", segments
            )
        if is_undefined(current):
            raise BindingError(
                f"No value at {format_pointer(segments[: i + 1])}", segments
            )
    return current


def set_pointer(value, segments, new):
    """
    Return a copy of ``value`` with the item at ``segments`` replaced.

    Missing intermediate objects are created.

    Parameters
    ----------
    value : object
        A JSON object or array.

    segments : tuple
        Path segments, non-empty.

    new : object
        Replacement value.

    Returns
    -------
    out : object
        Updated copy (containers on the path are copied, the rest is shared).
    """
    if not segments:
        return new
    head, rest = segments[0], segments[1:]
    if isinstance(value, list) and str(head).isdigit():
        copy = list(value)
        copy[int(head)] = set_pointer(copy[int(head)], rest, new)
        return copy
    copy = dict(value) if isinstance(value, dict) else dict()
    copy[head] = set_pointer(copy.get(head, dict()), rest, new)
    return copy
