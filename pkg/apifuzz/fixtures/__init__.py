"""
Bundled fixture APIs: small web applications with known behaviour, served
in-process through :class:`~apifuzz.transport.SimulatedTransport` or over HTTP
through :class:`~apifuzz.fixtures.server.FixtureServer`.
"""

from .crud_api import CrudApi
from .derived_params_api import (
    DERIVED_PARAMS_YAML,
    DerivedParamsApi,
    mock_cipher_registry,
)
from .enum_api import EnumApi, PingApi
from .fixture_api import FixtureRequest
from .links_api import LinksApi
from .server import FixtureServer
from .suite import FixtureSuite, default_apis, load_fixture_schema
from .token_auth_api import LOGIN_TOML, TokenAuthApi

__all__ = [
    "CrudApi",
    "DERIVED_PARAMS_YAML",
    "DerivedParamsApi",
    "EnumApi",
    "FixtureRequest",
    "FixtureServer",
    "FixtureSuite",
    "LOGIN_TOML",
    "LinksApi",
    "PingApi",
    "TokenAuthApi",
    "default_apis",
    "load_fixture_schema",
    "mock_cipher_registry",
]
