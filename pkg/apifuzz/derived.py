"""
Provides derived parameters: body fields recomputed from the rest of the payload
just before a request is sent.

Some APIs require fields such as signatures or encrypted envelopes that a fuzzer
cannot guess. Each :class:`DerivedParamRule` names a field, a transform and an
order. Rules of the same order see the same snapshot of the payload; rules of a
higher order see the outputs of lower orders, so that for instance a signature is
computed over already-encrypted fields.

Transforms are callables ``(param_name, payload_json, endpoint_path) -> str`` held
in a :class:`TransformRegistry`. Bundled transforms cover identity, base64, a keyed
HMAC-SHA256 digest and a reversible XOR cipher; others can be plugged in as
``package.module:callable``.
"""

import base64
import hashlib
import hmac
import importlib
import json
import os
import tomllib
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import yaml

from .errors import ConfigurationError
from .values import dumps, loads, render_scalar


@dataclass(frozen=True)
class DerivedParamRule(object):
    """
    How to recompute one body field.

    Parameters
    ----------
    name : str
        Body field name.

    transform : str
        Name of a transform in the registry.

    order : int, optional
        Application level, ascending. (Default: ``0``)

    endpoints : frozenset, optional
        Endpoint paths (or ``VERB:/path`` keys) the rule is limited to; ``None``
        means every endpoint whose body has the field. (Default: ``None``)

    context : str, optional
        Where the field lives; only ``"body-payload"`` is supported.
        (Default: ``"body-payload"``)
    """

    name: str
    transform: str
    order: int = 0
    endpoints: frozenset = None
    context: str = "body-payload"

    def __post_init__(self):
        if self.order < 0:
            raise ConfigurationError(f"Rule '{self.name}': order must be >= 0.")
        if self.context != "body-payload":
            raise ConfigurationError(
                f"Rule '{self.name}': context '{self.context}' is not supported."
            )
        return

    def applies_to(self, verb, path):
        """
        Whether the rule is in scope for an endpoint.
        """
        if self.endpoints is None:
            return True
        return path in self.endpoints or f"{verb}:{path}" in self.endpoints


def _field_text(param_name, payload_json):
    value = loads(payload_json).get(param_name)
    return "" if value is None else render_scalar(value)


class _BaseTransform(object):
    """
    Abstract base class for derived-parameter transforms.

    Classes inheriting from :class:`~apifuzz.derived._BaseTransform` must implement
    :meth:`~apifuzz.derived._BaseTransform.__call__`, which receives the field
    name, the whole current payload as JSON text and the endpoint path, and
    returns the replacement value as a string. Transforms must be pure given their
    inputs and their own key material.
    """

    __metaclass__ = ABCMeta

    @abstractmethod
    def __call__(self, param_name, payload_json, endpoint_path):
        """
        Abstract method; compute the new value of ``param_name``.

        Parameters
        ----------
        param_name : str
            Field being derived.

        payload_json : str
            Whole payload, serialized, as seen by this order level.

        endpoint_path : str
            Path template of the endpoint.

        Returns
        -------
        out : str
            Replacement value.
        """
        pass


class IdentityTransform(_BaseTransform):
    """
    Keep the field's current value (rendered as text).
    """

    def __call__(self, param_name, payload_json, endpoint_path):
        return _field_text(param_name, payload_json)


class Base64Transform(_BaseTransform):
    """
    Base64-encode the field's current value.
    """

    def __call__(self, param_name, payload_json, endpoint_path):
        text = _field_text(param_name, payload_json)
        return base64.b64encode(text.encode("utf-8")).decode("ascii")


class HmacDigestTransform(_BaseTransform):
    """
    Hex HMAC-SHA256 over the concatenated values of other fields.

    Parameters
    ----------
    secret : str
        HMAC key.

    fields : tuple, optional
        Fields whose text values are concatenated, in order. ``None`` means every
        other field of the payload in payload order. (Default: ``None``)
    """

    def __init__(self, secret, fields=None):
        self.secret = secret.encode("utf-8")
        self.fields = None if fields is None else tuple(fields)
        return

    def __call__(self, param_name, payload_json, endpoint_path):
        payload = loads(payload_json)
        names = self.fields
        if names is None:
            names = [k for k in payload if k != param_name]
        message = "".join(
            render_scalar(payload[n]) if n in payload else "" for n in names
        )
        digest = hmac.new(self.secret, message.encode("utf-8"), hashlib.sha256)
        return digest.hexdigest()


def xor_bytes(data, key):
    """
    XOR ``data`` with ``key`` repeated to its length.
    """
    if not key:
        raise ValueError("XOR key must not be empty.")
    return bytes(b ^ key[i % len(key)] for i, b in enumerate(data))


class XorWrapTransform(_BaseTransform):
    """
    Wrap the field's value with a fixed secret: ``base64(value XOR secret)``.

    Stands in for encrypting a session key with the server's public key.

    Parameters
    ----------
    secret : str
        Wrapping secret shared with the server.
    """

    def __init__(self, secret):
        self.secret = secret.encode("utf-8")
        return

    def __call__(self, param_name, payload_json, endpoint_path):
        text = _field_text(param_name, payload_json)
        return base64.b64encode(xor_bytes(text.encode("utf-8"), self.secret)).decode(
            "ascii"
        )


class XorEncryptTransform(_BaseTransform):
    """
    Encrypt another field with the payload's session key:
    ``base64(json(source) XOR key)``.

    Stands in for symmetric encryption of the business data.

    Parameters
    ----------
    source : str
        Field holding the plaintext (serialized as JSON).

    key_field : str
        Field holding the plaintext session key at this order level.
    """

    def __init__(self, source, key_field):
        self.source = source
        self.key_field = key_field
        return

    def __call__(self, param_name, payload_json, endpoint_path):
        payload = loads(payload_json)
        key = render_scalar(payload.get(self.key_field, "")).encode("utf-8")
        plaintext = (dumps(payload.get(self.source)) or "null").encode("utf-8")
        return base64.b64encode(xor_bytes(plaintext, key)).decode("ascii")


_BUILTIN_TYPES = {
    "identity": IdentityTransform,
    "base64": Base64Transform,
    "hmac-sha256": HmacDigestTransform,
    "xor-wrap": XorWrapTransform,
    "xor-encrypt": XorEncryptTransform,
}


def load_plugin(spec):
    """
    Import a transform given as ``package.module:callable``.

    Classes are instantiated without arguments; other callables are used as is.

    Parameters
    ----------
    spec : str
        Import path.

    Returns
    -------
    out : callable
        The transform.
    """
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ConfigurationError(f"Plugin '{spec}' must look like 'module:callable'.")
    try:
        obj = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as e:
        raise ConfigurationError(f"Cannot load transform plugin '{spec}': {e}") from e
    if isinstance(obj, type):
        obj = obj()
    if not callable(obj):
        raise ConfigurationError(f"Plugin '{spec}' is not callable.")
    return obj


class TransformRegistry(object):
    """
    Named transforms available to derived-parameter rules.

    ``identity`` and ``base64`` are always registered.

    Parameters
    ----------
    transforms : dict, optional
        Extra name to callable mapping. (Default: ``None``)
    """

    def __init__(self, transforms=None):
        self._transforms = dict(identity=IdentityTransform(), base64=Base64Transform())
        for name, fn in (transforms or dict()).items():
            self.register(name, fn)
        return

    def register(self, name, fn):
        """
        Add or replace a transform.
        """
        if not callable(fn):
            raise ConfigurationError(f"Transform '{name}' is not callable.")
        self._transforms[name] = fn
        return

    def __contains__(self, name):
        return name in self._transforms

    def get(self, name):
        """
        Look up a transform by name.

        Raises
        ------
        ConfigurationError
            If no transform has that name.
        """
        if name not in self._transforms:
            raise ConfigurationError(
                f"Unregistered transform '{name}' "
                f"(known: {sorted(self._transforms)})."
            )
        return self._transforms[name]

    def check(self, rules):
        """
        Verify that every rule's transform is registered.

        Raises
        ------
        ConfigurationError
            For the first unknown transform.
        """
        for rule in rules:
            self.get(rule.transform)
        return


def build_transform(definition):
    """
    Build a transform from a configuration mapping.

    Parameters
    ----------
    definition : dict or str
        ``{"type": <builtin or module:callable>, ...options}`` or a bare
        ``module:callable`` string. Options of bundled types: ``secret`` and
        ``fields`` (``hmac-sha256``), ``secret`` (``xor-wrap``), ``source`` and
        ``keyField`` (``xor-encrypt``).

    Returns
    -------
    out : callable
        The transform.
    """
    if isinstance(definition, str):
        definition = dict(type=definition)
    kind = str(definition.get("type", ""))
    options = {k: v for k, v in definition.items() if k != "type"}
    if kind == "hmac-sha256":
        secret = str(options.get("secret", ""))
        return HmacDigestTransform(secret, options.get("fields"))
    if kind == "xor-wrap":
        return XorWrapTransform(str(options.get("secret", "")))
    if kind == "xor-encrypt":
        if "source" not in options or "keyField" not in options:
            raise ConfigurationError("xor-encrypt needs 'source' and 'keyField'.")
        return XorEncryptTransform(str(options["source"]), str(options["keyField"]))
    if kind in _BUILTIN_TYPES:
        return _BUILTIN_TYPES[kind]()
    return load_plugin(kind)


def load_derived_rules(path, registry=None):
    """
    Read derived-parameter rules (and transform definitions) from a file.

    The YAML or TOML file holds a ``derivedParams`` list of
    ``{name, transform, order, endpoints?, context?}`` and an optional
    ``transforms`` mapping from name to definition (see :func:`build_transform`).

    Parameters
    ----------
    path : str
        ``.yaml``/``.yml`` or ``.toml`` file.

    registry : ~apifuzz.derived.TransformRegistry, optional
        Registry to extend. (Default: a new registry)

    Returns
    -------
    out : tuple
        ``(list of DerivedParamRule, TransformRegistry)``.

    Raises
    ------
    ConfigurationError
        For JSON or malformed files and unregistered transforms.
    """
    registry = TransformRegistry() if registry is None else registry
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if path.lower().endswith(".json") or text.lstrip().startswith(("{", "[")):
        raise ConfigurationError("JSON not supported for config files")
    try:
        if os.path.splitext(path)[1].lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = yaml.safe_load(text)
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigurationError(f"{path}: {e}") from e
    data = data or dict()
    for name, definition in (data.get("transforms") or dict()).items():
        registry.register(str(name), build_transform(definition))
    rules = []
    for i, entry in enumerate(data.get("derivedParams") or []):
        if not isinstance(entry, dict) or not {"name", "transform"} <= set(entry):
            raise ConfigurationError(
                f"derivedParams entry {i} needs 'name' and 'transform'."
            )
        endpoints = entry.get("endpoints")
        rules.append(
            DerivedParamRule(
                name=str(entry["name"]),
                transform=str(entry["transform"]),
                order=int(entry.get("order", 0)),
                endpoints=None if endpoints is None else frozenset(endpoints),
                context=str(entry.get("context", "body-payload")),
            )
        )
    registry.check(rules)
    return rules, registry


def apply_derived_params(payload, rules, registry, endpoint_path, verb=None):
    """
    Recompute derived fields of a payload, level by level.

    Within one order level every rule reads the same snapshot of the payload;
    the outputs of a level are written before the next level is computed.

    Parameters
    ----------
    payload : object
        Request body; only objects are transformed.

    rules : list
        :class:`~apifuzz.derived.DerivedParamRule` entries.

    registry : ~apifuzz.derived.TransformRegistry
        Transforms.

    endpoint_path : str
        Path template of the endpoint.

    verb : str, optional
        Method, for rules scoped by ``VERB:/path``. (Default: ``None``)

    Returns
    -------
    out : object
        New payload (``payload`` itself when no rule applies).
    """
    if not isinstance(payload, dict) or not rules:
        return payload
    active = [
        r for r in rules if r.name in payload and r.applies_to(verb, endpoint_path)
    ]
    if not active:
        return payload
    current = dict(payload)
    for order in sorted({r.order for r in active}):
        snapshot = dumps(current)
        outputs = {
            r.name: registry.get(r.transform)(r.name, snapshot, endpoint_path)
            for r in active
            if r.order == order
        }
        current.update(outputs)
    return current


def derived_fields(payload, rules, verb, endpoint_path):
    """
    Names of the payload fields that rules would recompute, in rule order.
    """
    if not isinstance(payload, dict):
        return tuple()
    ordered = sorted(rules, key=lambda r: r.order)
    return tuple(
        r.name
        for r in ordered
        if r.name in payload and r.applies_to(verb, endpoint_path)
    )
