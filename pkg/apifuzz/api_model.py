"""
Provides the typed, immutable model of a REST API built from a schema graph.

:func:`build_model` turns the raw documents held by a
:class:`~apifuzz.schema_loader.SchemaGraph` into an :class:`ApiModel`: one
:class:`EndpointSpec` per operation, with every ``$ref`` inlined. Reference cycles
(e.g. a ``Node`` schema with a ``children: [Node]`` field) are cut where they
recur; the cut point becomes an untyped, ``truncated`` :class:`ValueSchema`.
"""

import re
from dataclasses import dataclass, field, replace
from urllib.parse import urlparse

from .errors import ConfigurationError
from .schema_loader import HTTP_VERBS, SchemaWarning, _STATUS_KEY, _PATH_PARAM
from .values import JSON_TYPES, UNDEFINED, parse_pointer, type_errors

SCHEMA_TYPES = (
    "string",
    "integer",
    "number",
    "boolean",
    "array",
    "object",
    "composite",
    "any",
)
PARAM_LOCATIONS = ("path", "query", "header")
_SUPPORTED_MEDIA = re.compile(r"json|^\*/\*$|^text/plain$")


@dataclass(frozen=True)
class Constraints(object):
    """
    Value constraints declared on a schema; ``None`` means unconstrained.
    """

    pattern: str = None
    minimum: object = None
    maximum: object = None
    exclusive_minimum: bool = False
    exclusive_maximum: bool = False
    min_length: int = None
    max_length: int = None
    min_items: int = None
    max_items: int = None
    enum: tuple = None


@dataclass(frozen=True)
class FieldSpec(object):
    """
    A named object field and whether it is required.
    """

    name: str
    schema: "ValueSchema"
    required: bool = False


@dataclass(frozen=True)
class ValueSchema(object):
    """
    Description of the values a slot (parameter, body, field) accepts.

    Parameters
    ----------
    type : str
        One of ``string``, ``integer``, ``number``, ``boolean``, ``array``,
        ``object``, ``composite`` or ``any`` (untyped, or a cut reference cycle).

    constraints : ~apifuzz.api_model.Constraints
        Declared bounds, pattern and enumeration.

    fields : tuple
        For objects, ordered :class:`~apifuzz.api_model.FieldSpec` entries.

    item : ~apifuzz.api_model.ValueSchema
        For arrays, the item schema.

    composite_kind : str
        For composites, ``oneOf``, ``anyOf`` or ``allOf``.

    branches : tuple
        For composites, the branch schemas.

    nullable : bool
        Whether ``null`` is an accepted value.

    format : str
        The declared ``format`` (e.g. ``int32``, ``date-time``), if any.

    examples : tuple
        Example values that conform to the schema type.

    name : str
        Component name when the schema came from a named ``$ref``.

    truncated : bool
        ``True`` where a reference cycle was cut.
    """

    type: str = "any"
    constraints: Constraints = field(default_factory=Constraints)
    fields: tuple = tuple()
    item: "ValueSchema" = None
    composite_kind: str = None
    branches: tuple = tuple()
    nullable: bool = False
    format: str = None
    examples: tuple = tuple()
    name: str = None
    truncated: bool = False

    def __post_init__(self):
        if self.type not in SCHEMA_TYPES:
            raise ValueError(f"Unknown schema type '{self.type}'.")
        if self.constraints.enum is not None and len(self.constraints.enum) == 0:
            raise ValueError("enum must be non-empty when present.")
        return

    @property
    def field_map(self):
        """
        Mapping from field name to :class:`~apifuzz.api_model.FieldSpec`.
        """
        return {f.name: f for f in self.fields}

    @property
    def required_fields(self):
        """
        Names of required fields, in declaration order.
        """
        return tuple(f.name for f in self.fields if f.required)

    def to_jsonschema(self, types_only=False):
        """
        Express this schema as a JSON-schema (draft 7) mapping.

        Used to check response bodies and examples with :mod:`jsonschema`.
        ``additionalProperties`` is left open.

        Parameters
        ----------
        types_only : bool, optional
            Leave out bounds, patterns, enumerations and required fields.
            (Default: ``False``)

        Returns
        -------
        out : dict
            JSON-schema document.
        """
        if self.type == "any":
            out = dict()
        elif self.type == "composite":
            branches = [b.to_jsonschema(types_only) for b in self.branches]
            out = {self.composite_kind: branches}
        else:
            out = dict(type=self.type)
        c = Constraints() if types_only else self.constraints
        if c.pattern is not None:
            out["pattern"] = c.pattern
        if c.minimum is not None:
            key = "exclusiveMinimum" if c.exclusive_minimum else "minimum"
            out[key] = c.minimum
        if c.maximum is not None:
            key = "exclusiveMaximum" if c.exclusive_maximum else "maximum"
            out[key] = c.maximum
        for key, value in (
            ("minLength", c.min_length),
            ("maxLength", c.max_length),
            ("minItems", c.min_items),
            ("maxItems", c.max_items),
        ):
            if value is not None:
                out[key] = value
        if c.enum is not None:
            out["enum"] = list(c.enum) + ([None] if self.nullable else [])
        if self.type == "object":
            if self.fields:
                out["properties"] = {
                    f.name: f.schema.to_jsonschema(types_only) for f in self.fields
                }
            if self.required_fields and not types_only:
                out["required"] = list(self.required_fields)
        if self.type == "array" and self.item is not None:
            out["items"] = self.item.to_jsonschema(types_only)
        if self.nullable and self.type not in ("any", "composite"):
            out["type"] = [self.type, "null"]
        elif self.nullable and self.type == "composite":
            out = {"anyOf": [out, {"type": "null"}]}
        return out


@dataclass(frozen=True)
class ParamSpec(object):
    """
    A path, query or header parameter of an endpoint.
    """

    name: str
    location: str
    required: bool
    schema: ValueSchema
    examples: tuple = tuple()

    @property
    def designator(self):
        """
        ``location.name``, the form used by link parameter bindings.
        """
        return f"{self.location}.{self.name}"


@dataclass(frozen=True)
class Constant(object):
    """
    A link binding to a literal value.
    """

    value: object


@dataclass(frozen=True)
class ResponseExtraction(object):
    """
    A link binding to a value extracted from the source response body.
    """

    pointer: tuple
    expression: str


@dataclass(frozen=True)
class UnsupportedExpression(object):
    """
    A link binding using a runtime expression that is not followed
    (``$request.*``, ``$response.header.*``, ...).
    """

    expression: str


@dataclass(frozen=True)
class LinkSpec(object):
    """
    A declared link from a response to another operation.

    ``bindings`` holds ``(designator, binding)`` pairs in declaration order;
    designators are either bare parameter names or ``location.name``.
    """

    name: str
    target_operation_id: str
    bindings: tuple = tuple()
    has_request_body: bool = False


@dataclass(frozen=True)
class ResponseSpec(object):
    """
    A declared response: status key, body schema and links.
    """

    status: str
    schema: ValueSchema = None
    media_type: str = None
    links: tuple = tuple()


@dataclass(frozen=True)
class EndpointSpec(object):
    """
    One operation of the API.

    Parameters
    ----------
    verb : str
        Upper-case HTTP method.

    path : str
        Path template, e.g. ``/api/links/users/{name}/{code}``.

    params : tuple
        :class:`~apifuzz.api_model.ParamSpec` entries; each template variable has
        exactly one required ``path`` entry.

    request_bodies : tuple
        ``(media_type, ValueSchema)`` pairs.

    responses : tuple
        :class:`~apifuzz.api_model.ResponseSpec` entries in declaration order.

    tags : frozenset
        Tags of the operation.

    operation_id : str
        ``operationId``, if declared.

    body_required : bool
        Whether the request body is required.
    """

    verb: str
    path: str
    params: tuple = tuple()
    request_bodies: tuple = tuple()
    responses: tuple = tuple()
    tags: frozenset = frozenset()
    operation_id: str = None
    body_required: bool = False

    @property
    def key(self):
        """
        ``VERB:/path``, the identifier used in reports and coverage targets.
        """
        return f"{self.verb}:{self.path}"

    @property
    def path_params(self):
        return tuple(p for p in self.params if p.location == "path")

    @property
    def optional_params(self):
        """
        Non-required parameters, in declaration order.
        """
        return tuple(p for p in self.params if not p.required)

    @property
    def body_schema(self):
        """
        The first request-body schema, or ``None``.
        """
        return self.request_bodies[0][1] if self.request_bodies else None

    @property
    def body_media_type(self):
        return self.request_bodies[0][0] if self.request_bodies else None

    def param(self, designator):
        """
        Find the parameter a link designator refers to.

        Parameters
        ----------
        designator : str
            ``location.name`` or a bare name (path parameters first, then query,
            then header).

        Returns
        -------
        out : ~apifuzz.api_model.ParamSpec or None
            Matching parameter, ``None`` if there is none.
        """
        location, _, name = designator.partition(".")
        if location in PARAM_LOCATIONS and name:
            for p in self.params:
                if p.location == location and p.name == name:
                    return p
            return None
        for location in PARAM_LOCATIONS:
            for p in self.params:
                if p.location == location and p.name == designator:
                    return p
        return None

    def response(self, status):
        """
        Find the response declaration that applies to a status code.

        Exact codes win over ``NXX`` ranges, which win over ``default``.

        Parameters
        ----------
        status : int
            HTTP status code.

        Returns
        -------
        out : ~apifuzz.api_model.ResponseSpec or None
            Matching response, ``None`` if the status is undeclared.
        """
        by_key = {r.status: r for r in self.responses}
        for key in (str(status), f"{str(status)[0]}XX", "default"):
            if key in by_key:
                return by_key[key]
        return None

    def declares_status(self, status):
        """
        Check whether a status code matches a declared response other than
        ``default``.
        """
        by_key = {r.status for r in self.responses}
        return str(status) in by_key or f"{str(status)[0]}XX" in by_key


@dataclass(frozen=True)
class ApiModel(object):
    """
    Immutable model of a REST API.

    Parameters
    ----------
    endpoints : tuple
        :class:`~apifuzz.api_model.EndpointSpec` entries in schema order.

    title : str
        ``info.title``.

    version : str
        ``info.version``.

    base_path : str
        Path prefix from ``servers[0].url`` (OpenAPI 3) or ``basePath`` (2.0), with
        no trailing slash.
    """

    endpoints: tuple = tuple()
    title: str = ""
    version: str = ""
    base_path: str = ""

    def by_operation_id(self, operation_id):
        """
        Look up an endpoint by ``operationId``.

        Returns
        -------
        out : ~apifuzz.api_model.EndpointSpec or None
            The endpoint, ``None`` if no endpoint declares that id.
        """
        for e in self.endpoints:
            if e.operation_id == operation_id:
                return e
        return None

    def find(self, verb, path):
        """
        Look up an endpoint by method and path template.

        Returns
        -------
        out : ~apifuzz.api_model.EndpointSpec or None
            The endpoint, ``None`` if absent.
        """
        for e in self.endpoints:
            if e.verb == verb.upper() and e.path == path:
                return e
        return None

    def by_key(self, key):
        """
        Look up an endpoint by its ``VERB:/path`` key.
        """
        verb, _, path = key.partition(":")
        return self.find(verb, path)


def parse_binding(value):
    """
    Classify a link parameter value.

    Parameters
    ----------
    value : object
        The value from the link's ``parameters`` map.

    Returns
    -------
    out : object
        :class:`Constant`, :class:`ResponseExtraction` or
        :class:`UnsupportedExpression`.
    """
    if not isinstance(value, str):
        return Constant(value)
    expression = value.strip()
    if expression.startswith("{") and expression.endswith("}"):
        expression = expression[1:-1].strip()
    if not expression.startswith("$"):
        return Constant(value)
    if expression == "$response.body" or expression.startswith("$response.body#"):
        return ResponseExtraction(parse_pointer(expression), expression)
    return UnsupportedExpression(expression)


def merge_all_of(schema):
    """
    Merge the branches of an ``allOf`` composite into one object schema.

    Fields of later branches win over earlier ones; a field is required if any
    branch requires it. Non-object branches contribute only their constraints.

    Parameters
    ----------
    schema : ~apifuzz.api_model.ValueSchema
        Composite schema with ``composite_kind == "allOf"``.

    Returns
    -------
    out : ~apifuzz.api_model.ValueSchema
        Merged schema.
    """
    fields = dict()
    required = set()
    merged_type = None
    constraints = Constraints()
    examples = list(schema.examples)
    for branch in schema.branches:
        if branch.type == "composite" and branch.composite_kind == "allOf":
            branch = merge_all_of(branch)
        for f in branch.fields:
            fields[f.name] = f
            if f.required:
                required.add(f.name)
        if branch.type not in ("any", "composite"):
            merged_type = merged_type or branch.type
        updates = {
            k: v
            for k, v in branch.constraints.__dict__.items()
            if v is not None and v is not False
        }
        constraints = replace(constraints, **updates)
        examples.extend(branch.examples)
    if fields:
        merged_type = "object"
    return ValueSchema(
        type=merged_type or "any",
        constraints=constraints,
        fields=tuple(
            FieldSpec(f.name, f.schema, f.name in required) for f in fields.values()
        ),
        nullable=schema.nullable,
        format=schema.format,
        examples=tuple(examples),
        name=schema.name,
    )


def _conforms(schema, value):
    if value is UNDEFINED:
        return False
    if value is None:
        return schema.nullable or schema.type == "any"
    return not type_errors(schema.to_jsonschema(types_only=True), value)


class _ModelBuilder(object):
    """
    Stateful helper behind :func:`build_model`.
    """

    def __init__(self, graph, max_ref_depth=32):
        self.graph = graph
        self.max_ref_depth = max_ref_depth
        self.warnings = []
        self._active = []
        self._memo = dict()
        return

    def warn(self, code, pointer, message, severity="warn"):
        where = self.graph.root + "#" + "".join("/" + str(p) for p in pointer)
        self.warnings.append(SchemaWarning(code, where, message, severity))
        return

    def deref(self, location, node):
        return self.graph.deref(location, node)

    def schema(self, location, node, name=None):
        if not isinstance(node, dict):
            return ValueSchema()
        ref = node.get("$ref")
        if isinstance(ref, str):
            key = (location, ref)
            if key in self._active or len(self._active) >= self.max_ref_depth:
                return ValueSchema(truncated=True, name=ref.rsplit("/", 1)[-1])
            if key in self._memo:
                return self._memo[key]
            target_location, target = self.deref(location, node)
            if target is None:
                return ValueSchema(name=ref.rsplit("/", 1)[-1])
            self._active.append(key)
            try:
                out = self.schema(target_location, target, ref.rsplit("/", 1)[-1])
            finally:
                self._active.pop()
            self._memo[key] = out
            return out
        return self._inline_schema(location, node, name)

    def _inline_schema(self, location, node, name):
        declared = node.get("type")
        nullable = node.get("nullable") is True
        if isinstance(declared, list):
            types = [t for t in declared if t != "null"]
            nullable = nullable or "null" in declared
            declared = types[0] if types else None
        enum = node.get("enum")
        if "const" in node:
            enum = [node["const"]]
        examples = []
        if "example" in node:
            examples.append(node["example"])
        if isinstance(node.get("examples"), list):
            examples.extend(node["examples"])

        composite_keys = ("allOf", "oneOf", "anyOf")
        composite = [k for k in composite_keys if k in node]
        if composite:
            kind = composite[0]
            branches = [self.schema(location, b) for b in node[kind] or []]
            own = {k: v for k, v in node.items() if k not in composite_keys}
            if kind == "allOf" and ("properties" in own or "required" in own):
                branches.insert(0, self._inline_schema(location, own, None))
            out = ValueSchema(
                type="composite",
                composite_kind=kind,
                branches=tuple(branches),
                nullable=nullable,
                name=name,
            )
            examples = tuple(e for e in examples if _conforms(out, e))
            return replace(out, examples=examples)

        if declared is None:
            if "properties" in node:
                declared = "object"
            elif "items" in node:
                declared = "array"
            elif enum:
                declared = _infer_type(enum[0])
            else:
                declared = "any"
        if declared not in JSON_TYPES or declared == "null":
            declared = "any"

        fields = tuple()
        if declared == "object":
            required = set(node.get("required") or [])
            props = node.get("properties") or dict()
            fields = tuple(
                FieldSpec(k, self.schema(location, v), k in required)
                for k, v in props.items()
            )
        item = None
        if declared == "array":
            item = self.schema(location, node.get("items") or dict())

        constraints = Constraints(
            pattern=node.get("pattern"),
            minimum=node.get("minimum"),
            maximum=node.get("maximum"),
            exclusive_minimum=node.get("exclusiveMinimum") is True,
            exclusive_maximum=node.get("exclusiveMaximum") is True,
            min_length=node.get("minLength"),
            max_length=node.get("maxLength"),
            min_items=node.get("minItems"),
            max_items=node.get("maxItems"),
            enum=None,
        )
        # OpenAPI 3.1 numeric exclusive bounds
        if not isinstance(node.get("exclusiveMinimum"), (bool, type(None))):
            constraints = replace(
                constraints, minimum=node["exclusiveMinimum"], exclusive_minimum=True
            )
        if not isinstance(node.get("exclusiveMaximum"), (bool, type(None))):
            constraints = replace(
                constraints, maximum=node["exclusiveMaximum"], exclusive_maximum=True
            )
        out = ValueSchema(
            type=declared,
            constraints=constraints,
            fields=fields,
            item=item,
            nullable=nullable,
            format=node.get("format"),
            name=name,
        )
        if enum:
            values = tuple(v for v in enum if _conforms(out, v))
            if values:
                out = replace(out, constraints=replace(constraints, enum=values))
        return replace(out, examples=tuple(e for e in examples if _conforms(out, e)))

    def parameter(self, location, node, pointer):
        location, node = self.deref(location, node)
        if not isinstance(node, dict) or "name" not in node or "in" not in node:
            self.warn(
                "invalid-parameter", pointer, "Parameter ignored: missing name/in."
            )
            return None
        where = node["in"]
        if where not in PARAM_LOCATIONS:
            if where not in ("body", "formData"):
                self.warn(
                    "unsupported-parameter",
                    pointer,
                    f"Parameter '{node['name']}' in '{where}' is not supported.",
                    severity="info",
                )
            return None
        if "schema" in node:
            schema = self.schema(location, node["schema"])
        else:
            schema = self._inline_schema(location, node, None)
        examples = []
        if "example" in node:
            examples.append(node["example"])
        if isinstance(node.get("examples"), dict):
            for entry in node["examples"].values():
                _, entry = self.deref(location, entry)
                if isinstance(entry, dict) and "value" in entry:
                    examples.append(entry["value"])
        examples.extend(schema.examples)
        return ParamSpec(
            name=str(node["name"]),
            location=where,
            required=bool(node.get("required", False)) or where == "path",
            schema=schema,
            examples=tuple(e for e in _unique(examples) if _conforms(schema, e)),
        )

    def media_schema(self, location, content):
        for media_type, media in (content or dict()).items():
            if not _SUPPORTED_MEDIA.search(media_type):
                continue
            media_location, media = self.deref(location, media)
            if not isinstance(media, dict):
                continue
            schema = self.schema(media_location, media.get("schema") or dict())
            examples = list(schema.examples)
            if "example" in media:
                examples.insert(0, media["example"])
            if isinstance(media.get("examples"), dict):
                for entry in media["examples"].values():
                    _, entry = self.deref(media_location, entry)
                    if isinstance(entry, dict) and "value" in entry:
                        examples.append(entry["value"])
            examples = tuple(e for e in _unique(examples) if _conforms(schema, e))
            return media_type, replace(schema, examples=examples)
        return None, None

    def link(self, location, name, node, pointer, operation_ids):
        _, node = self.deref(location, node)
        if not isinstance(node, dict):
            return None
        target = node.get("operationId")
        if target is None:
            self.warn(
                "unsupported-link",
                pointer,
                f"Link '{name}' has no operationId (operationRef is not supported); "
                "dropped.",
            )
            return None
        if target not in operation_ids:
            self.warn(
                "unknown-link-operation",
                pointer,
                f"Link '{name}' targets unknown operationId '{target}'; dropped.",
            )
            return None
        bindings = tuple(
            (str(k), parse_binding(v))
            for k, v in (node.get("parameters") or dict()).items()
        )
        return LinkSpec(
            name=str(name),
            target_operation_id=target,
            bindings=bindings,
            has_request_body="requestBody" in node,
        )

    def build(self):
        document = self.graph.root_document
        root = self.graph.root
        swagger = str(document.get("swagger", "")).startswith("2")
        paths = document.get("paths") or dict()

        operations = []
        for path in paths:
            item_location, item = self.deref(root, paths[path])
            if not isinstance(item, dict):
                continue
            for verb in HTTP_VERBS:
                if isinstance(item.get(verb), dict):
                    operations.append((path, verb, item_location, item, item[verb]))
        operation_ids = {
            op.get("operationId") for *_, op in operations if op.get("operationId")
        }

        endpoints = []
        for path, verb, location, item, op in operations:
            pointer = ("paths", path, verb)
            params = dict()
            bodies = []
            body_required = False
            raw = list(item.get("parameters") or []) + list(op.get("parameters") or [])
            for i, node in enumerate(raw):
                p = self.parameter(location, node, pointer + ("parameters", i))
                if p is not None:
                    params[(p.location, p.name)] = p
                elif swagger:
                    _, node = self.deref(location, node)
                    if isinstance(node, dict) and node.get("in") == "body":
                        consumes = op.get("consumes") or document.get("consumes")
                        media = (consumes or ["application/json"])[0]
                        schema = self.schema(location, node.get("schema") or dict())
                        bodies.append((media, schema))
                        body_required = bool(node.get("required", False))
            names = _PATH_PARAM.findall(path)
            for name in names:
                if ("path", name) not in params:
                    params[("path", name)] = ParamSpec(
                        name, "path", True, ValueSchema("string")
                    )
            # path params in template order, undeclared-in-template ones dropped
            ordered = [params[("path", n)] for n in dict.fromkeys(names)]
            ordered += [p for p in params.values() if p.location != "path"]

            if "requestBody" in op:
                body_location, body = self.deref(location, op["requestBody"])
                if isinstance(body, dict):
                    media_type, schema = self.media_schema(
                        body_location, body.get("content")
                    )
                    if schema is not None:
                        bodies.append((media_type, schema))
                    elif body.get("content"):
                        self.warn(
                            "unsupported-media-type",
                            pointer + ("requestBody",),
                            "No JSON or text request body media type; body omitted.",
                            severity="info",
                        )
                    body_required = bool(body.get("required", False))

            responses = []
            for status, node in (op.get("responses") or dict()).items():
                if not _STATUS_KEY.match(str(status)):
                    continue
                response_location, response = self.deref(location, node)
                if not isinstance(response, dict):
                    continue
                if swagger:
                    media_type = "application/json"
                    schema = (
                        self.schema(response_location, response["schema"])
                        if "schema" in response
                        else None
                    )
                else:
                    media_type, schema = self.media_schema(
                        response_location, response.get("content")
                    )
                links = []
                for name, link in (response.get("links") or dict()).items():
                    spec = self.link(
                        response_location,
                        name,
                        link,
                        pointer + ("responses", status, "links", name),
                        operation_ids,
                    )
                    if spec is not None:
                        links.append(spec)
                responses.append(
                    ResponseSpec(str(status), schema, media_type, tuple(links))
                )

            endpoints.append(
                EndpointSpec(
                    verb=verb.upper(),
                    path=path,
                    params=tuple(ordered),
                    request_bodies=tuple(bodies),
                    responses=tuple(responses),
                    tags=frozenset(str(t) for t in op.get("tags") or []),
                    operation_id=op.get("operationId"),
                    body_required=body_required,
                )
            )

        info = document.get("info") or dict()
        if swagger:
            base_path = document.get("basePath") or ""
        else:
            servers = document.get("servers") or []
            url = ""
            if servers and isinstance(servers[0], dict):
                url = str(servers[0].get("url", ""))
            base_path = urlparse(url).path if "{" not in url else ""
        return ApiModel(
            endpoints=tuple(endpoints),
            title=str(info.get("title", "")),
            version=str(info.get("version", "")),
            base_path=base_path.rstrip("/"),
        )


def _infer_type(value):
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (list, tuple)):
        return "array"
    if isinstance(value, dict):
        return "object"
    return "number"


def _unique(values):
    out = []
    for v in values:
        if not any(v == u and type(v) is type(u) for u in out):
            out.append(v)
    return out


def build_model(graph):
    """
    Build the typed API model from a loaded schema graph.

    Every operation under ``paths`` of the root document becomes an
    :class:`EndpointSpec`. References are inlined; links to unknown operation ids
    and unsupported parameter locations are dropped with a warning. Examples are
    attached at field level (schema ``example``) and at object level (media-type
    ``example``/``examples``); examples whose type does not match are dropped.
    Swagger 2.0 documents are read best-effort.

    Parameters
    ----------
    graph : ~apifuzz.schema_loader.SchemaGraph
        Graph from :func:`~apifuzz.schema_loader.load_schema`.

    Returns
    -------
    out : tuple
        ``(ApiModel, list of SchemaWarning)``.
    """
    builder = _ModelBuilder(graph)
    model = builder.build()
    return model, builder.warnings


def filter_endpoints(model, prefix=None, tags=None):
    """
    Restrict a model to endpoints matching a path prefix and/or tag set.

    Parameters
    ----------
    model : ~apifuzz.api_model.ApiModel
        Model to filter.

    prefix : str, optional
        Keep endpoints whose path starts with this prefix. A trailing ``*`` is
        accepted and ignored. (Default: ``None``)

    tags : iterable, optional
        Keep endpoints declaring at least one of these tags. (Default: ``None``)

    Returns
    -------
    out : ~apifuzz.api_model.ApiModel
        Filtered model (``model`` itself when both filters are absent).

    Raises
    ------
    ConfigurationError
        If the filters eliminate every endpoint.
    """
    if prefix is None and not tags:
        return model
    endpoints = model.endpoints
    if prefix is not None:
        prefix = prefix.rstrip("*")
        endpoints = tuple(e for e in endpoints if e.path.startswith(prefix))
    if tags:
        wanted = set(tags)
        endpoints = tuple(e for e in endpoints if e.tags & wanted)
    if not endpoints:
        raise ConfigurationError(
            f"No endpoint matches prefix={prefix!r} tags={sorted(tags or [])}; "
            "nothing to fuzz."
        )
    return replace(model, endpoints=endpoints)


def singular(word):
    """
    Crude singular form of an English resource name (``users`` gives ``user``,
    ``categories`` gives ``category``).
    """
    if word.endswith("ies") and len(word) > 3:
        return word[:-3] + "y"
    if word.endswith("s") and not word.endswith("ss") and len(word) > 1:
        return word[:-1]
    return word


def plural(word):
    """
    Crude plural form of an English resource name.
    """
    if word.endswith("y") and len(word) > 1 and word[-2] not in "aeiou":
        return word[:-1] + "ies"
    if word.endswith("s"):
        return word
    return word + "s"
