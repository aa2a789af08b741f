"""
Provides generation of input values for parameters and request bodies.

Values are produced from a :class:`~apifuzz.api_model.ValueSchema` with an explicit
:class:`numpy.random.Generator`, so that a fixed seed gives a fixed sequence of
inputs. Examples declared in the schema are preferred with probability
:attr:`GenConfig.example_probability`; otherwise values are sampled at random
within the declared constraints.
"""

import itertools
import math
import uuid
import warnings
from copy import deepcopy
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from ._regex import sample_matching
from .api_model import merge_all_of
from .errors import GenerationWarning

_ALPHANUMERIC = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


@dataclass(frozen=True)
class GenConfig(object):
    """
    Settings of input generation.

    Parameters
    ----------
    seed : int, optional
        Seed of the random stream. (Default: ``None``)

    example_probability : float, optional
        Probability of using a declared example for a slot that has one.
        (Default: ``0.5``)

    max_string_length : int, optional
        Upper length of unconstrained strings. (Default: ``16``)

    max_array_items : int, optional
        Upper size of unconstrained arrays. (Default: ``3``)

    max_object_depth : int, optional
        Nesting beyond which optional content is no longer generated.
        (Default: ``6``)

    integer_min : int, optional
        Lower bound of unconstrained integers. (Default: ``-1000``)

    integer_max : int, optional
        Upper bound of unconstrained integers. (Default: ``1000``)

    optional_field_probability : float, optional
        Probability of including an optional object field. (Default: ``0.5``)

    null_probability : float, optional
        Probability of ``null`` for a nullable slot. (Default: ``0.05``)

    strict_examples : bool, optional
        Drop example-object fields not declared in the schema instead of keeping
        them. (Default: ``False``)
    """

    seed: int = None
    example_probability: float = 0.5
    max_string_length: int = 16
    max_array_items: int = 3
    max_object_depth: int = 6
    integer_min: int = -1000
    integer_max: int = 1000
    optional_field_probability: float = 0.5
    null_probability: float = 0.05
    strict_examples: bool = False

    def __post_init__(self):
        for name in (
            "example_probability",
            "optional_field_probability",
            "null_probability",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}.")
        if self.integer_min > self.integer_max:
            raise ValueError("integer_min must not exceed integer_max.")
        if self.max_string_length < 0 or self.max_array_items < 0:
            raise ValueError("Length bounds must be non-negative.")
        return

    def make_rng(self):
        """
        A new random stream seeded with :attr:`seed`.
        """
        return np.random.default_rng(seed=self.seed)


def _unsatisfiable(message):
    warnings.warn(GenerationWarning(message))
    return


def _random_text(rng, lo, hi):
    n = int(rng.integers(lo, hi + 1))
    picks = rng.integers(0, len(_ALPHANUMERIC), n)
    return "".join(_ALPHANUMERIC[int(i)] for i in picks)


def _gen_string(schema, cfg, rng):
    c = schema.constraints
    lo = c.min_length or 0
    hi = c.max_length if c.max_length is not None else max(lo, cfg.max_string_length)
    if hi < lo:
        _unsatisfiable(f"maxLength {hi} < minLength {lo}; using minLength.")
        hi = lo
    if c.pattern is not None:
        return sample_matching(c.pattern, rng, c.min_length, c.max_length)
    fmt = schema.format
    if fmt in ("date-time", "date", "time"):
        seconds = int(rng.integers(0, 2**31))
        stamp = np.datetime64(seconds, "s").astype(str)
        if fmt == "date":
            return stamp[:10]
        if fmt == "time":
            return stamp[11:] + "Z"
        return stamp + "Z"
    if fmt == "uuid":
        return str(uuid.UUID(bytes=bytes(int(b) for b in rng.integers(0, 256, 16))))
    if fmt == "email":
        return _random_text(rng, 1, 8) + "@" + _random_text(rng, 1, 8) + ".com"
    if fmt in ("uri", "url"):
        return "http://" + _random_text(rng, 1, 8).lower() + ".org/" + _random_text(
            rng, 0, 8
        )
    if fmt == "ipv4":
        return ".".join(str(int(b)) for b in rng.integers(0, 256, 4))
    return _random_text(rng, lo, hi)


def _integer_bounds(schema, cfg):
    c = schema.constraints
    lo = None
    hi = None
    if c.minimum is not None:
        lo = math.floor(c.minimum) + 1 if c.exclusive_minimum else math.ceil(c.minimum)
    if c.maximum is not None:
        hi = math.ceil(c.maximum) - 1 if c.exclusive_maximum else math.floor(c.maximum)
    span = cfg.integer_max - cfg.integer_min
    if lo is None and hi is None:
        lo, hi = cfg.integer_min, cfg.integer_max
    elif lo is None:
        lo = hi - span
    elif hi is None:
        hi = lo + span
    if schema.format == "int32":
        lo, hi = max(lo, -(2**31)), min(hi, 2**31 - 1)
    return lo, hi


def _gen_integer(schema, cfg, rng):
    lo, hi = _integer_bounds(schema, cfg)
    if hi < lo:
        _unsatisfiable(f"No integer in [{lo}, {hi}]; using {lo}.")
        return int(lo)
    return int(rng.integers(lo, hi + 1))


def _gen_number(schema, cfg, rng):
    c = schema.constraints
    lo = Decimal(str(c.minimum)) if c.minimum is not None else None
    hi = Decimal(str(c.maximum)) if c.maximum is not None else None
    span = Decimal(cfg.integer_max - cfg.integer_min)
    if lo is None and hi is None:
        lo, hi = Decimal(cfg.integer_min), Decimal(cfg.integer_max)
    elif lo is None:
        lo = hi - span
    elif hi is None:
        hi = lo + span
    if hi < lo:
        _unsatisfiable(f"No number in [{lo}, {hi}]; using {lo}.")
        return lo
    for _ in range(16):
        fraction = Decimal(str(round(float(rng.random()), 3)))
        value = (lo + (hi - lo) * fraction).quantize(Decimal("0.001"))
        if c.exclusive_minimum and value <= lo:
            continue
        if c.exclusive_maximum and value >= hi:
            continue
        if lo <= value <= hi:
            return value.normalize() if value != value.to_integral_value() else value
    return (lo + hi) / 2


def _gen_any(cfg, rng):
    kind = int(rng.integers(3))
    if kind == 0:
        return _random_text(rng, 1, cfg.max_string_length)
    if kind == 1:
        return int(rng.integers(cfg.integer_min, cfg.integer_max + 1))
    return bool(rng.integers(2))


def gen_value(schema, cfg, rng, examples=None, trace=None, depth=0):
    """
    Generate a value for a slot.

    With probability ``cfg.example_probability`` one of the slot's examples is
    returned (object examples are completed with
    :func:`~apifuzz.input_gen.complete_example_object`); otherwise a random value
    satisfying the schema's type, enum, bounds, lengths and pattern is sampled.
    Required object fields are always present; optional fields are included at
    random and otherwise left out (undefined).

    Parameters
    ----------
    schema : ~apifuzz.api_model.ValueSchema
        Schema of the slot.

    cfg : ~apifuzz.input_gen.GenConfig
        Generation settings.

    rng : ~numpy.random.Generator
        Random stream.

    examples : tuple, optional
        Candidate examples of the slot. (Default: ``schema.examples``)

    trace : list, optional
        If given, the index of a used example is appended. (Default: ``None``)

    depth : int, optional
        Current nesting depth. (Default: ``0``)

    Returns
    -------
    out : object
        Generated JSON value.
    """
    candidates = schema.examples if examples is None else tuple(examples)
    if candidates and rng.random() < cfg.example_probability:
        index = int(rng.integers(len(candidates)))
        if trace is not None:
            trace.append(index)
        value = deepcopy(candidates[index])
        if isinstance(value, dict):
            return complete_example_object(schema, value, cfg, rng, depth=depth)
        return value
    if schema.nullable and rng.random() < cfg.null_probability:
        return None
    if schema.constraints.enum:
        enum = schema.constraints.enum
        return deepcopy(enum[int(rng.integers(len(enum)))])
    if schema.type == "composite":
        if schema.composite_kind == "allOf":
            return gen_value(merge_all_of(schema), cfg, rng, depth=depth)
        if not schema.branches:
            return _gen_any(cfg, rng)
        branch = schema.branches[int(rng.integers(len(schema.branches)))]
        return gen_value(branch, cfg, rng, depth=depth)
    if schema.type == "string":
        return _gen_string(schema, cfg, rng)
    if schema.type == "integer":
        return _gen_integer(schema, cfg, rng)
    if schema.type == "number":
        return _gen_number(schema, cfg, rng)
    if schema.type == "boolean":
        return bool(rng.integers(2))
    if schema.type == "array":
        c = schema.constraints
        lo = c.min_items or 0
        hi = c.max_items if c.max_items is not None else max(lo, cfg.max_array_items)
        if depth >= cfg.max_object_depth:
            hi = lo
        if hi < lo:
            _unsatisfiable(f"maxItems {hi} < minItems {lo}; using minItems.")
            hi = lo
        n = int(rng.integers(lo, hi + 1))
        if schema.item is None:
            return [_gen_any(cfg, rng) for _ in range(n)]
        return [gen_value(schema.item, cfg, rng, depth=depth + 1) for _ in range(n)]
    if schema.type == "object":
        return _gen_object(schema, cfg, rng, depth)
    if schema.truncated:
        return dict()
    return _gen_any(cfg, rng)


def _gen_object(schema, cfg, rng, depth, given=None):
    out = dict() if given is None else given
    for f in schema.fields:
        if f.name in out:
            continue
        if f.required:
            out[f.name] = gen_value(f.schema, cfg, rng, depth=depth + 1)
        elif (
            depth < cfg.max_object_depth
            and rng.random() < cfg.optional_field_probability
        ):
            out[f.name] = gen_value(f.schema, cfg, rng, depth=depth + 1)
    return out


def complete_example_object(schema, partial, cfg, rng, depth=0):
    """
    Fill in the required fields an object example leaves out.

    Fields present in ``partial`` are kept verbatim, so values that co-occur in the
    example stay together. Missing required fields are generated within the
    schema's constraints; missing optional fields stay undefined (absent).

    Parameters
    ----------
    schema : ~apifuzz.api_model.ValueSchema
        Object (or ``allOf``) schema.

    partial : dict
        Example covering a subset of the fields.

    cfg : ~apifuzz.input_gen.GenConfig
        Generation settings; ``cfg.strict_examples`` drops undeclared fields.

    rng : ~numpy.random.Generator
        Random stream.

    depth : int, optional
        Current nesting depth. (Default: ``0``)

    Returns
    -------
    out : dict
        Completed object.
    """
    if schema.type == "composite" and schema.composite_kind == "allOf":
        schema = merge_all_of(schema)
    if schema.type != "object" or not isinstance(partial, dict):
        return partial
    known = schema.field_map
    out = dict()
    unknown = []
    for k, v in partial.items():
        if k in known:
            out[k] = v
        else:
            unknown.append(k)
            if not cfg.strict_examples:
                out[k] = v
    if unknown:
        action = "dropped" if cfg.strict_examples else "kept"
        warnings.warn(
            GenerationWarning(
                f"Example fields {unknown} are not in the schema; {action}."
            )
        )
    for f in schema.fields:
        if f.required and f.name not in out:
            out[f.name] = gen_value(f.schema, cfg, rng, depth=depth + 1)
    return out


@dataclass(frozen=True)
class Assignment(object):
    """
    One combination of optional-parameter presence and enum values.

    Parameters
    ----------
    presence : int
        Bitmask over the endpoint's optional parameters.

    values : tuple
        ``(designator, value, example_index)`` triples; ``example_index`` is set
        when the value is one of the parameter's examples rather than an enum
        member.
    """

    presence: int
    values: tuple = tuple()

    def present(self, endpoint, param):
        """
        Whether ``param`` of ``endpoint`` is sent under this assignment.
        """
        if param.required:
            return True
        return bool(self.presence >> endpoint.optional_params.index(param) & 1)


def presence_masks(n, cap_bits=8):
    """
    Presence bitmasks explored for ``n`` optional parameters.

    All ``2**n`` combinations up to ``cap_bits`` parameters; beyond that, all-off,
    all-on, and each parameter alone on and alone off.

    Parameters
    ----------
    n : int
        Number of optional parameters.

    cap_bits : int, optional
        Largest ``n`` enumerated exhaustively. (Default: ``8``)

    Returns
    -------
    out : list
        Bitmasks in a fixed order.
    """
    if n <= cap_bits:
        return list(range(2**n))
    full = 2**n - 1
    masks = [0, full]
    masks += [1 << i for i in range(n)]
    masks += [full ^ (1 << i) for i in range(n)]
    return list(dict.fromkeys(masks))


def sweep_candidates(param):
    """
    Values swept for an enum parameter: enum members, then examples not in the
    enum.

    Returns
    -------
    out : list
        ``(value, example_index)`` pairs.
    """
    enum = list(param.schema.constraints.enum or [])
    out = [(v, None) for v in enum]
    for i, e in enumerate(param.examples):
        if e not in enum:
            out.append((e, i))
    return out


def enum_and_optional_combinations(endpoint, cap=256):
    """
    Enumerate optional-parameter presence combinations crossed with enum values.

    Presence masks (see :func:`presence_masks`) are the outer loop; for each mask,
    the cross-product of the sweep candidates of the enum parameters that are
    sent is the inner loop. The list is truncated at ``cap``; the order does not
    depend on any random state.

    Parameters
    ----------
    endpoint : ~apifuzz.api_model.EndpointSpec
        Endpoint to enumerate.

    cap : int, optional
        Maximum number of assignments. (Default: ``256``)

    Returns
    -------
    out : list
        :class:`~apifuzz.input_gen.Assignment` entries.
    """
    optional = endpoint.optional_params
    enum_params = [p for p in endpoint.params if p.schema.constraints.enum]
    out = []
    for mask in presence_masks(len(optional)):
        assignment = Assignment(mask)
        sent = [p for p in enum_params if assignment.present(endpoint, p)]
        grids = [sweep_candidates(p) for p in sent]
        for combo in itertools.product(*grids):
            out.append(
                Assignment(
                    mask,
                    tuple(
                        (p.designator, value, example)
                        for p, (value, example) in zip(sent, combo)
                    ),
                )
            )
            if len(out) >= cap:
                return out
    return out
