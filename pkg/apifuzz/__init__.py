from .schema_loader import SchemaSource, SchemaWarning, load_schema, validate_schema
from .api_model import ApiModel, build_model, filter_endpoints
from .auth import AuthSpec, parse_auth_config, select_auth
from .input_gen import GenConfig
from .coverage import Archive, derive_targets, minimized_suite
from .derived import DerivedParamRule, TransformRegistry, load_derived_rules
from .engine import FuzzSession, SessionConfig, run_session
from .emitter import emit_suite, make_plans
from .replay import load_suite, replay_suite
from ._demo import demo, demo_model
from .__version__ import __version__

__doc__ = """
    Black-box fuzzing of REST APIs described by OpenAPI schemas.

    apifuzz reads an OpenAPI schema (possibly split over several local or remote
    documents), reports schema content that would be silently misread, and then
    generates sequences of HTTP calls against the running API. Calls are chained
    through the schema's links, authenticated through a configurable login flow,
    and completed with derived parameters such as signatures. The session keeps
    the tests that cover new coverage targets, and the minimized suite is written
    as a replayable plan file or a curl script, with potential faults (server
    errors, responses not matching their schema) named and summarized. Each
    stage is a module providing a class or function that can be used on its own;
    base classes allow customization of transports, fetchers and parameter
    transforms.
"""
