import os

import pytest
import yaml

from apifuzz.actions import Exchange, HttpAction, TestCase, to_request
from apifuzz.api_model import build_model
from apifuzz.auth import AuthSpec, LoginFlow
from apifuzz.coverage import TestRecord
from apifuzz.emitter import find_faults
from apifuzz.fixtures import FixtureSuite, load_fixture_schema
from apifuzz.links import expand_link, resolve_action
from apifuzz.schema_loader import InMemoryFetcher, load_schema
from apifuzz.transport import HttpResponse, SimulatedTransport, VirtualClock

TOKEN_AUTH = AuthSpec(
    "logintoken",
    LoginFlow(
        "/api/logintoken/login",
        token_pointer="/token/authToken",
        payload='{"userId": "foo", "password": "123"}',
        header_prefix="Bearer ",
    ),
)


def model_from_document(document, location="http://schemas.test/api.yaml"):
    """
    Builds the model of a single in-memory OpenAPI document.

    The document is served by an in-memory fetcher at ``location``, so refs
    between documents behave as they would for a remote schema. Returns the model
    alone; builder warnings are discarded.
    """
    graph, _ = load_schema(location, fetcher=InMemoryFetcher({location: document}))
    model, _ = build_model(graph)
    return model


def fixture_model(name):
    """
    Builds the model of a bundled fixture API from its OpenAPI document.
    """
    graph, _ = load_fixture_schema(name)
    model, _ = build_model(graph)
    return model


def write_documents(directory, documents):
    """
    Writes ``{filename: document}`` to ``directory`` as YAML and returns the paths.
    """
    paths = dict()
    for filename, document in documents.items():
        path = os.path.join(directory, filename)
        with open(path, "w") as f:
            if isinstance(document, str):
                f.write(document)
            else:
                yaml.safe_dump(document, f, sort_keys=False)
        paths[filename] = path
    return paths


def minimal_document(paths, schemas=None, **extra):
    """
    Creates a minimal OpenAPI 3 document around a ``paths`` mapping.
    """
    document = {
        "openapi": "3.0.3",
        "info": {"title": "test api", "version": "1.0"},
        "paths": paths,
    }
    if schemas:
        document["components"] = {"schemas": schemas}
    document.update(extra)
    return document


@pytest.fixture(scope="function")
def clock():
    return VirtualClock()


@pytest.fixture(scope="function")
def suite(clock):
    """
    All bundled fixture APIs on a virtual clock.
    """
    return FixtureSuite(clock=clock)


@pytest.fixture(scope="function")
def transport(suite, clock):
    """
    In-process transport to the bundled fixture APIs.
    """
    return SimulatedTransport(suite, clock=clock)


@pytest.fixture(scope="function")
def links_model():
    return fixture_model("links")


@pytest.fixture(scope="function")
def crud_model():
    return fixture_model("crud")


@pytest.fixture(scope="function")
def enum_model():
    return fixture_model("enum")


@pytest.fixture(scope="function")
def token_model():
    return fixture_model("token-auth")


@pytest.fixture(scope="function")
def derived_model():
    return fixture_model("derived-params")


@pytest.fixture(scope="function")
def ping_model():
    return fixture_model("ping")


def execute_test(test, transport):
    """
    Sends the actions of a test in order, resolving bindings, and returns the
    exchanges.
    """
    exchanges = []
    for i in range(len(test)):
        request = to_request(resolve_action(test, i, exchanges))
        exchanges.append(Exchange(request, transport.send(request)))
    return exchanges


def links_record(links_model, transport):
    """
    Executes create followed by the linked lookup and records it with its faults.
    """
    create = links_model.by_operation_id("postCreate")
    (link,) = create.response(200).links
    test = expand_link(
        TestCase((HttpAction("POST", "/api/links/create"),)), 0, link, links_model
    )
    exchanges = execute_test(test, transport)
    faults = find_faults(test, exchanges, links_model)
    return TestRecord(test, tuple(exchanges), frozenset(), 0.0, tuple(faults))


def token_record():
    """
    A recorded call of the protected check endpoint, without its login.
    """
    test = TestCase((HttpAction("GET", "/api/logintoken/check"),))
    response = HttpResponse(200, text='"ok"')
    return TestRecord(test, (Exchange(response=response),), frozenset())
