"""
Provides :class:`FixtureSuite`, the collection of fixture APIs served together
under distinct path roots.
"""

from ..schema_loader import InMemoryFetcher, load_schema
from .crud_api import CrudApi
from .derived_params_api import DerivedParamsApi
from .enum_api import EnumApi, PingApi
from .fixture_api import error_response
from .links_api import LinksApi
from .token_auth_api import TokenAuthApi


def default_apis(clock=None, token_lifetime=None):
    """
    One instance of every bundled fixture API.

    Parameters
    ----------
    clock : object, optional
        Clock shared by the APIs. (Default: ``None``, wall clock)

    token_lifetime : float, optional
        Token lifetime of the token-auth API in seconds. (Default: ``None``)

    Returns
    -------
    out : list
        Fixture APIs.
    """
    return [
        LinksApi(clock=clock),
        TokenAuthApi(token_lifetime=token_lifetime, clock=clock),
        DerivedParamsApi(clock=clock),
        CrudApi(clock=clock),
        EnumApi(clock=clock),
        PingApi(clock=clock),
    ]


class FixtureSuite(object):
    """
    Dispatch requests to the fixture API owning the request path.

    Parameters
    ----------
    apis : list, optional
        Fixture APIs, roots must not overlap. (Default: ``None``, all bundled
        APIs)

    clock : object, optional
        Clock propagated to every API. (Default: ``None``)

    See Also
    --------
    apifuzz.fixtures.server.FixtureServer
    apifuzz.transport.SimulatedTransport
    """

    def __init__(self, apis=None, clock=None):
        self.apis = default_apis(clock=clock) if apis is None else list(apis)
        roots = [api.root for api in self.apis]
        if len(set(roots)) != len(roots):
            raise ValueError(f"FixtureSuite: duplicate API roots in {roots}.")
        if clock is not None:
            self.clock = clock
        return

    @property
    def clock(self):
        return self.apis[0].clock if self.apis else None

    @clock.setter
    def clock(self, value):
        for api in self.apis:
            api.clock = value
        return

    def __getitem__(self, name):
        for api in self.apis:
            if api.name == name:
                return api
        raise KeyError(name)

    @property
    def request_count(self):
        """
        Requests answered by all APIs.
        """
        return sum(api.request_count for api in self.apis)

    def reset(self):
        for api in self.apis:
            api.reset()
        return

    def handle(self, method, path, query=(), headers=None, body=None):
        """
        Answer one request, 404 if no API owns the path.

        Parameters
        ----------
        method : str
            HTTP method.

        path : str
            Request path.

        query : list, optional
            ``(name, value)`` pairs. (Default: ``()``)

        headers : dict, optional
            Request headers. (Default: ``None``)

        body : str, optional
            Raw body. (Default: ``None``)

        Returns
        -------
        out : tuple
            ``(status, headers, body_text)``.
        """
        for api in self.apis:
            if api.owns(path):
                return api.handle(method, path, query, headers, body)
        return error_response(404, "not found")

    def documents(self):
        """
        Every API's named OpenAPI documents.

        Returns
        -------
        out : dict
            Document name to OpenAPI document.
        """
        out = dict()
        for api in self.apis:
            out.update(api.documents())
        return out


FIXTURE_HOST = "http://fixtures.local"


def load_fixture_schema(name, suite=None):
    """
    Load a fixture API's OpenAPI document through the schema loader.

    Parameters
    ----------
    name : str
        Document name, e.g. ``"links"`` or ``"links-faulty"``.

    suite : ~apifuzz.fixtures.suite.FixtureSuite, optional
        Suite providing the documents. (Default: a new
        :class:`~apifuzz.fixtures.suite.FixtureSuite`)

    Returns
    -------
    out : tuple
        ``(SchemaGraph, list of SchemaWarning)``.
    """
    documents = (FixtureSuite() if suite is None else suite).documents()
    if name not in documents:
        raise KeyError(f"No fixture document named {name}; have {sorted(documents)}.")
    location = f"{FIXTURE_HOST}/{name}.json"
    return load_schema(location, fetcher=InMemoryFetcher({location: documents[name]}))
