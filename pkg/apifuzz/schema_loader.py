"""
Provides tools to fetch, resolve and validate OpenAPI schema documents.

A schema may be spread across several documents linked by ``$ref``. Starting from a
root :class:`SchemaSource`, :func:`load_schema` fetches every transitively referenced
document exactly once and returns an immutable :class:`SchemaGraph`. Problems with
referenced documents or with the schema content never abort loading: they are
reported as :class:`SchemaWarning` records, by :func:`load_schema` (unreadable
documents) and by :func:`validate_schema` (content problems).
"""

import json
import os
import re
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field
from decimal import Decimal
from types import MappingProxyType
from urllib.parse import unquote, urldefrag, urljoin, urlparse
from urllib.request import url2pathname

import requests
import yaml

from .errors import SchemaLoadError, BindingError
from .values import (
    JSON_TYPES,
    describe_type_error,
    format_pointer,
    get_pointer,
    parse_pointer,
    type_errors,
)

HTTP_VERBS = ("get", "put", "post", "delete", "options", "head", "patch", "trace")
_PATH_ITEM_KEYS = set(HTTP_VERBS) | {
    "parameters",
    "summary",
    "description",
    "servers",
    "$ref",
}
_RESPONSE_KEYS = {"description", "headers", "content", "links", "schema", "examples"}
_STATUS_KEY = re.compile(r"^([1-5][0-9][0-9]|[1-5]XX|default)$")
_PATH_PARAM = re.compile(r"{([^{}/]+)}")


@dataclass(frozen=True)
class SchemaSource(object):
    """
    Location of a schema document.

    Parameters
    ----------
    location : str
        Filesystem path, ``file://`` URL or ``http(s)://`` URL. A protocol-less
        ``//host/path`` location is only meaningful for referenced documents.

    protocol : str, optional
        One of ``"file"``, ``"http"``, ``"https"``, ``"inherited"``. Inferred from
        ``location`` if not given. (Default: ``None``)
    """

    location: str
    protocol: str = None

    def __post_init__(self):
        if self.protocol is None:
            object.__setattr__(self, "protocol", infer_protocol(self.location))
        if self.protocol not in ("file", "http", "https", "inherited"):
            raise ValueError(f"Unsupported schema protocol: {self.protocol}")
        return

    def canonical(self, base=None):
        """
        Absolute URL of the document, fragment stripped.

        Parameters
        ----------
        base : str, optional
            Canonical location of the referencing document, required when the
            protocol is ``"inherited"``. (Default: ``None``)

        Returns
        -------
        out : str
            Canonical location.
        """
        if self.protocol == "inherited":
            if base is None:
                raise ValueError(
                    "A protocol-less location can only be used for a referenced "
                    "document, not the root."
                )
            return urldefrag(urljoin(base, self.location))[0]
        return canonical_location(self.location)


def infer_protocol(location):
    """
    Guess the protocol of a location string.

    Parameters
    ----------
    location : str
        Path or URL.

    Returns
    -------
    out : str
        ``"http"``, ``"https"``, ``"file"`` or ``"inherited"`` (``//host/...``).
    """
    if location.startswith("//"):
        return "inherited"
    scheme = urlparse(location).scheme.lower()
    if scheme in ("http", "https"):
        return scheme
    return "file"


def canonical_location(location):
    """
    Normalize a path or URL to an absolute URL without fragment.

    Parameters
    ----------
    location : str
        Filesystem path or URL.

    Returns
    -------
    out : str
        ``file:///abs/path`` or ``http(s)://...`` URL.
    """
    parsed = urlparse(location)
    if parsed.scheme.lower() in ("http", "https", "file"):
        return urldefrag(location)[0]
    path = urldefrag(location)[0]
    return "file://" + os.path.abspath(os.path.expanduser(path)).replace(os.sep, "/")


@dataclass(frozen=True)
class SchemaWarning(object):
    """
    A non-fatal problem found while loading or validating a schema.

    Parameters
    ----------
    code : str
        Warning identifier, e.g. ``"misplaced-key"``.

    location : str
        Document location and JSON pointer within it, ``<document>#<pointer>``.

    message : str
        Human-readable description.

    severity : str, optional
        ``"info"`` or ``"warn"``. (Default: ``"warn"``)
    """

    code: str
    location: str
    message: str
    severity: str = "warn"

    def __str__(self):
        return f"[{self.severity}] {self.code} at {self.location}: {self.message}"

    def to_dict(self):
        """
        Mapping form of the warning, for JSON reports.

        Returns
        -------
        out : dict
            Keys ``code``, ``location``, ``message``, ``severity``.
        """
        return dict(
            code=self.code,
            location=self.location,
            message=self.message,
            severity=self.severity,
        )


def format_warnings(warnings, fmt="text"):
    """
    Render a list of warnings for display.

    Parameters
    ----------
    warnings : list
        List of :class:`SchemaWarning`.

    fmt : str, optional
        ``"text"`` (one line per warning) or ``"json"`` (a JSON list).
        (Default: ``"text"``)

    Returns
    -------
    out : str
        Rendered report.
    """
    if fmt == "json":
        return json.dumps([w.to_dict() for w in warnings], indent=2)
    if fmt == "text":
        return "\n".join(str(w) for w in warnings)
    raise ValueError("fmt must be 'text' or 'json'.")


class _BaseFetcher(object):
    """
    Abstract base class for classes that read schema documents.

    Classes inheriting from :class:`~apifuzz.schema_loader._BaseFetcher` must
    implement :meth:`~apifuzz.schema_loader._BaseFetcher.read`, which receives a
    canonical location and returns the document text. Every call through
    :meth:`~apifuzz.schema_loader._BaseFetcher.fetch` is counted in
    :attr:`fetch_count`.
    """

    __metaclass__ = ABCMeta

    def __init__(self):
        self.fetch_count = 0
        self.fetched = []
        return

    def fetch(self, location):
        """
        Read a document and count the fetch.

        Parameters
        ----------
        location : str
            Canonical location.

        Returns
        -------
        out : str
            Document text.
        """
        self.fetch_count += 1
        self.fetched.append(location)
        return self.read(location)

    @abstractmethod
    def read(self, location):
        """
        Abstract method; return the text of the document at ``location``.

        Parameters
        ----------
        location : str
            Canonical location.

        Returns
        -------
        out : str
            Document text. Raise :exc:`OSError` if it cannot be read.
        """
        pass


class FileFetcher(_BaseFetcher):
    """
    Read schema documents from the local filesystem (``file://`` locations).
    """

    def read(self, location):
        """
        Read a local file.

        Parameters
        ----------
        location : str
            ``file://`` URL.

        Returns
        -------
        out : str
            File contents.
        """
        parsed = urlparse(location)
        path = url2pathname(unquote(parsed.path))
        with open(path, "r", encoding="utf-8") as f:
            return f.read()


class HttpFetcher(_BaseFetcher):
    """
    Download schema documents over HTTP(S).

    Parameters
    ----------
    timeout : float, optional
        Per-request timeout in seconds. (Default: ``10.0``)

    retries : int, optional
        Retries after a failed request. (Default: ``2``)

    headers : dict, optional
        Extra request headers, e.g. for authenticated schema endpoints.
        (Default: ``None``)
    """

    def __init__(self, timeout=10.0, retries=2, headers=None):
        super().__init__()
        self.timeout = timeout
        self.retries = retries
        self.headers = dict() if headers is None else dict(headers)
        return

    def read(self, location):
        """
        GET the document, retrying on connection errors and 5xx responses.

        Parameters
        ----------
        location : str
            ``http(s)://`` URL.

        Returns
        -------
        out : str
            Response text.
        """
        last_error = None
        for _ in range(self.retries + 1):
            try:
                r = requests.get(location, headers=self.headers, timeout=self.timeout)
            except requests.RequestException as e:
                last_error = e
                continue
            if r.status_code >= 500:
                last_error = OSError(f"HTTP {r.status_code} fetching {location}")
                continue
            if r.status_code != 200:
                raise OSError(f"HTTP {r.status_code} fetching {location}")
            return r.text
        raise OSError(f"Could not fetch {location}: {last_error}")


class InMemoryFetcher(_BaseFetcher):
    """
    Serve schema documents from a mapping, e.g. bundled fixtures or tests.

    Parameters
    ----------
    documents : dict
        Mapping from canonical location to document text or parsed document.
    """

    def __init__(self, documents):
        super().__init__()
        self.documents = dict(documents)
        return

    def read(self, location):
        """
        Look up a document.

        Parameters
        ----------
        location : str
            Canonical location.

        Returns
        -------
        out : str
            Document text.
        """
        if location not in self.documents:
            raise OSError(f"No document at {location}")
        document = self.documents[location]
        if isinstance(document, str):
            return document
        return json.dumps(document)


class CompositeFetcher(_BaseFetcher):
    """
    Dispatch to a fetcher by URL scheme.

    Parameters
    ----------
    fetchers : dict, optional
        Mapping from scheme to fetcher. (Default: ``file`` and ``http(s)``)
    """

    def __init__(self, fetchers=None):
        super().__init__()
        if fetchers is None:
            http = HttpFetcher()
            fetchers = dict(file=FileFetcher(), http=http, https=http)
        self.fetchers = dict(fetchers)
        return

    def read(self, location):
        """
        Read through the fetcher registered for the location's scheme.

        Parameters
        ----------
        location : str
            Canonical location.

        Returns
        -------
        out : str
            Document text.
        """
        scheme = urlparse(location).scheme.lower()
        if scheme not in self.fetchers:
            raise OSError(f"No fetcher for scheme '{scheme}' ({location})")
        return self.fetchers[scheme].read(location)


def parse_document(text):
    """
    Parse YAML or JSON schema text.

    Mapping keys are converted to strings (YAML reads ``200:`` as an integer) and
    non-integral numbers to :class:`~decimal.Decimal`.

    Parameters
    ----------
    text : str
        Document text.

    Returns
    -------
    out : object
        Parsed document.
    """
    return _normalize(yaml.safe_load(text))


def _normalize(node):
    if isinstance(node, dict):
        return {str(k): _normalize(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_normalize(v) for v in node]
    if isinstance(node, float):
        return Decimal(repr(node))
    if hasattr(node, "isoformat"):
        return node.isoformat()
    return node


def iter_refs(node, pointer=()):
    """
    Yield every ``$ref`` in a parsed document.

    Parameters
    ----------
    node : object
        Parsed document or subtree.

    pointer : tuple, optional
        Segments leading to ``node``. (Default: ``()``)

    Yields
    ------
    out : tuple
        ``(pointer_segments, ref_string)`` pairs, in document order.
    """
    if isinstance(node, dict):
        ref = node.get("$ref")
        if isinstance(ref, str):
            yield pointer, ref
        for k, v in node.items():
            if k != "$ref":
                yield from iter_refs(v, pointer + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from iter_refs(v, pointer + (str(i),))


def _split_ref(base, ref):
    document, fragment = urldefrag(ref)
    target = base if document == "" else urldefrag(urljoin(base, document))[0]
    return target, parse_pointer(unquote(fragment))


@dataclass(frozen=True)
class SchemaGraph(object):
    """
    The set of documents making up one schema and the references between them.

    Parameters
    ----------
    nodes : ~types.MappingProxyType
        Read-only mapping from canonical location to parsed document.

    edges : frozenset
        ``(from_location, ref_string, to_location)`` triples for external refs.

    root : str
        Canonical location of the root document.

    dangling : frozenset
        ``(from_location, ref_string)`` pairs whose document could not be read.

    fetch_count : int
        Number of fetch operations performed while loading.
    """

    nodes: MappingProxyType
    edges: frozenset
    root: str
    dangling: frozenset = field(default_factory=frozenset)
    fetch_count: int = 0

    @property
    def root_document(self):
        """
        The parsed root document.
        """
        return self.nodes[self.root]

    def has_cycles(self):
        """
        Check whether documents reference each other cyclically.

        Returns
        -------
        out : bool
            ``True`` if following external refs can return to a document.
        """
        adjacency = {n: set() for n in self.nodes}
        for src, _, dst in self.edges:
            if dst in adjacency:
                adjacency[src].add(dst)
        state = dict()

        def visit(n):
            state[n] = 1
            for m in sorted(adjacency[n]):
                if state.get(m) == 1:
                    return True
                if m not in state and visit(m):
                    return True
            state[n] = 2
            return False

        return any(n not in state and visit(n) for n in sorted(adjacency))

    def resolve_ref(self, base, ref):
        """
        Find the node a ``$ref`` points to.

        Parameters
        ----------
        base : str
            Canonical location of the document containing the ref.

        ref : str
            The ``$ref`` string.

        Returns
        -------
        out : tuple
            ``(location, node)`` of the target.

        Raises
        ------
        BindingError
            If the target document or pointer does not exist.
        """
        target, pointer = _split_ref(base, ref)
        if target not in self.nodes:
            raise BindingError(f"Document {target} not loaded", pointer)
        return target, get_pointer(self.nodes[target], pointer)

    def deref(self, base, node, max_hops=64):
        """
        Follow ``$ref`` chains until a non-reference node is reached.

        Parameters
        ----------
        base : str
            Canonical location of the document containing ``node``.

        node : object
            Possibly a ``{"$ref": ...}`` mapping.

        max_hops : int, optional
            Give up after this many hops (reference loop). (Default: ``64``)

        Returns
        -------
        out : tuple
            ``(location, node)``; ``node`` is ``None`` if a ref cannot be followed.
        """
        hops = 0
        while isinstance(node, dict) and isinstance(node.get("$ref"), str):
            if hops >= max_hops:
                return base, None
            try:
                base, node = self.resolve_ref(base, node["$ref"])
            except BindingError:
                return base, None
            hops += 1
        return base, node


def load_schema(root, fetcher=None):
    """
    Fetch a root schema document and every document it references.

    Each distinct canonical location is fetched once. Relative refs resolve against
    the referencing document and protocol-less refs (``//host/x.yaml``) inherit its
    protocol. A referenced document that cannot be read becomes a dangling-ref
    warning; loading continues.

    Parameters
    ----------
    root : ~apifuzz.schema_loader.SchemaSource or str
        Root document location.

    fetcher : ~apifuzz.schema_loader._BaseFetcher, optional
        Document reader. (Default: a
        :class:`~apifuzz.schema_loader.CompositeFetcher` for files and HTTP)

    Returns
    -------
    out : tuple
        ``(SchemaGraph, list of SchemaWarning)``.

    Raises
    ------
    SchemaLoadError
        If the root document cannot be read or parsed.
    """
    if isinstance(root, str):
        root = SchemaSource(root)
    if fetcher is None:
        fetcher = CompositeFetcher()
    root_location = root.canonical()
    warnings = []
    nodes = dict()
    edges = set()
    dangling = set()
    unreadable = set()
    start_count = fetcher.fetch_count

    try:
        nodes[root_location] = parse_document(fetcher.fetch(root_location))
    except (OSError, yaml.YAMLError, UnicodeDecodeError) as e:
        raise SchemaLoadError(f"Cannot load schema {root_location}: {e}") from e
    if not isinstance(nodes[root_location], dict):
        raise SchemaLoadError(f"Schema {root_location} is not a mapping.")

    queue = [root_location]
    while queue:
        location = queue.pop(0)
        for pointer, ref in iter_refs(nodes[location]):
            target, _ = _split_ref(location, ref)
            if target == location:
                continue
            edges.add((location, ref, target))
            if target in nodes:
                continue
            if target in unreadable:
                dangling.add((location, ref))
                continue
            try:
                document = parse_document(fetcher.fetch(target))
            except (OSError, yaml.YAMLError, UnicodeDecodeError) as e:
                unreadable.add(target)
                dangling.add((location, ref))
                warnings.append(
                    SchemaWarning(
                        "unreadable-document",
                        f"{location}#{format_pointer(pointer)}",
                        f"Referenced document {target} could not be read ({e}); "
                        f"'$ref: {ref}' is left dangling.",
                    )
                )
                continue
            nodes[target] = document
            queue.append(target)

    graph = SchemaGraph(
        nodes=MappingProxyType(nodes),
        edges=frozenset(edges),
        root=root_location,
        dangling=frozenset(dangling),
        fetch_count=fetcher.fetch_count - start_count,
    )
    return graph, warnings


def _where(location, pointer):
    return f"{location}#{format_pointer(pointer)}"


def _example_values(node):
    values = []
    if "example" in node:
        values.append(("example", node["example"]))
    examples = node.get("examples")
    if isinstance(examples, list):
        values.extend((f"examples/{i}", v) for i, v in enumerate(examples))
    elif isinstance(examples, dict):
        for key, entry in examples.items():
            if isinstance(entry, dict) and "value" in entry:
                values.append((f"examples/{key}/value", entry["value"]))
    return values


def _type_schema(graph, location, schema, depth=0):
    """
    Reduce a raw schema node to its ``type``, ``properties`` and ``items``, with
    ``$ref`` inlined and ``nullable`` folded into the type list.
    """
    location, schema = graph.deref(location, schema)
    if not isinstance(schema, dict) or depth > 8:
        return dict()
    out = dict()
    declared = schema.get("type")
    if isinstance(declared, (str, list)):
        allowed = [declared] if isinstance(declared, str) else list(declared)
        if schema.get("nullable") is True:
            allowed.append("null")
        allowed = [t for t in allowed if t in JSON_TYPES]
        if allowed:
            out["type"] = allowed
    properties = schema.get("properties")
    if isinstance(properties, dict):
        out["properties"] = {
            k: _type_schema(graph, location, v, depth + 1)
            for k, v in properties.items()
        }
    if isinstance(schema.get("items"), dict):
        out["items"] = _type_schema(graph, location, schema["items"], depth + 1)
    return out


def _walk(node, pointer=()):
    if isinstance(node, dict):
        yield pointer, node
        for k, v in node.items():
            yield from _walk(v, pointer + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from _walk(v, pointer + (str(i),))


def validate_schema(graph):
    """
    Look for schema content that a tool would silently misread.

    Checks for structural keys at an invalid level (e.g. ``links`` directly under
    ``responses``), ``example``/``examples`` values whose type does not match the
    annotated schema, links naming an unknown ``operationId``, duplicate operation
    ids, undeclared path parameters, dangling ``$ref`` and unknown OpenAPI versions.
    The function is total and deterministic.

    Parameters
    ----------
    graph : ~apifuzz.schema_loader.SchemaGraph
        Graph from :func:`~apifuzz.schema_loader.load_schema`.

    Returns
    -------
    out : list
        List of :class:`~apifuzz.schema_loader.SchemaWarning`.
    """
    warnings = []
    root = graph.root
    document = graph.root_document

    version = str(document.get("openapi", document.get("swagger", "")))
    if not (version.startswith("3.") or version == "2.0"):
        warnings.append(
            SchemaWarning(
                "unsupported-version",
                _where(root, ("openapi",)),
                f"Unknown OpenAPI version '{version}'; parsing best-effort.",
                severity="info",
            )
        )

    for location in sorted(graph.nodes):
        for pointer, ref in iter_refs(graph.nodes[location]):
            target, fragment = _split_ref(location, ref)
            if (location, ref) in graph.dangling or target not in graph.nodes:
                warnings.append(
                    SchemaWarning(
                        "dangling-ref",
                        _where(location, pointer),
                        f"'$ref: {ref}' points to a document that was not loaded.",
                    )
                )
                continue
            try:
                get_pointer(graph.nodes[target], fragment)
            except BindingError:
                warnings.append(
                    SchemaWarning(
                        "dangling-ref",
                        _where(location, pointer),
                        f"'$ref: {ref}' does not resolve to a node.",
                    )
                )

    for location in sorted(graph.nodes):
        for pointer, node in _walk(graph.nodes[location]):
            if "example" not in node and "examples" not in node:
                continue
            if "schema" in node and isinstance(node.get("schema"), dict):
                schema = node["schema"]
            elif "type" in node or "properties" in node or "items" in node:
                schema = node
            else:
                continue
            checked = _type_schema(graph, location, schema)
            for suffix, value in _example_values(node):
                errors = type_errors(checked, value)
                if errors:
                    problem = describe_type_error(errors[0])
                    warnings.append(
                        SchemaWarning(
                            "example-type-mismatch",
                            _where(location, pointer + tuple(suffix.split("/"))),
                            f"Example ignored: {problem}.",
                        )
                    )

    operation_ids = dict()
    operations = []
    paths = document.get("paths") or dict()
    for path in paths:
        loc, item = graph.deref(root, paths[path])
        if not isinstance(item, dict):
            continue
        for key in item:
            if key not in _PATH_ITEM_KEYS and not key.startswith("x-"):
                warnings.append(
                    SchemaWarning(
                        "misplaced-key",
                        _where(root, ("paths", path, key)),
                        f"'{key}' is not valid in a path item and is ignored.",
                    )
                )
        for verb in HTTP_VERBS:
            if isinstance(item.get(verb), dict):
                operations.append((path, verb, item, item[verb]))

    for path, verb, item, operation in operations:
        op_id = operation.get("operationId")
        if op_id is None:
            continue
        if op_id in operation_ids:
            warnings.append(
                SchemaWarning(
                    "duplicate-operation-id",
                    _where(root, ("paths", path, verb, "operationId")),
                    f"operationId '{op_id}' is also used by {operation_ids[op_id]}.",
                )
            )
        else:
            operation_ids[op_id] = f"{verb.upper()}:{path}"

    for path, verb, item, operation in operations:
        base = ("paths", path, verb)
        if "links" in operation:
            warnings.append(
                SchemaWarning(
                    "misplaced-key",
                    _where(root, base + ("links",)),
                    "'links' placed directly in the operation is ignored; it must be "
                    "nested under a response status code.",
                )
            )
        responses = operation.get("responses") or dict()
        for status, response in responses.items():
            if not _STATUS_KEY.match(str(status)):
                if str(status).startswith("x-"):
                    continue
                hint = (
                    "; it must be nested under a status code"
                    if status in _RESPONSE_KEYS
                    else ""
                )
                warnings.append(
                    SchemaWarning(
                        "misplaced-key",
                        _where(root, base + ("responses", status)),
                        f"'{status}' placed directly under 'responses' is not a "
                        f"status code and is ignored{hint}.",
                    )
                )
                continue
            _, response = graph.deref(root, response)
            if not isinstance(response, dict):
                continue
            for name, link in (response.get("links") or dict()).items():
                _, link = graph.deref(root, link)
                if not isinstance(link, dict):
                    continue
                target = link.get("operationId")
                if target is not None and target not in operation_ids:
                    warnings.append(
                        SchemaWarning(
                            "unknown-link-operation",
                            _where(
                                root, base + ("responses", status, "links", name)
                            ),
                            f"Link '{name}' targets unknown operationId '{target}'.",
                        )
                    )

        declared = set()
        for params in (item.get("parameters"), operation.get("parameters")):
            for param in params or []:
                _, param = graph.deref(root, param)
                if isinstance(param, dict) and param.get("in") == "path":
                    declared.add(param.get("name"))
        for name in _PATH_PARAM.findall(path):
            if name not in declared:
                warnings.append(
                    SchemaWarning(
                        "missing-path-parameter",
                        _where(root, base),
                        f"Path parameter '{name}' of {path} is not declared.",
                    )
                )
    return warnings
