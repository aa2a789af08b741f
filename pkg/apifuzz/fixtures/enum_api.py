"""
Provides two small fixtures: an endpoint with a ten-value enum parameter and a
hidden constraint on its sibling, and a single always-successful endpoint.
"""

from .fixture_api import (
    _BaseFixtureApi,
    error_response,
    json_content,
    json_response,
    openapi_document,
)

Y_VALUES = tuple("ABCDEFGHIJ")


class EnumApi(_BaseFixtureApi):
    """
    ``GET /api/enum/items?y=<A..J>&x=<int>``.

    Answers 400 when ``x`` is negative (a constraint the schema does not state)
    and 200 otherwise.

    Parameters
    ----------
    clock : object, optional
        Clock. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    name = "enum"
    root = "/api/enum"

    def routes(self):
        return [("GET", "/api/enum/items", self.items)]

    def items(self, request):
        y, x = request.arg("y"), request.arg("x")
        if y not in Y_VALUES:
            return error_response(400, "y must be one of A..J")
        try:
            x = int(x)
        except (TypeError, ValueError):
            return error_response(400, "x must be an integer")
        if x < 0:
            return error_response(400, "x must not be negative")
        return json_response(200, {"y": y, "x": x})

    def openapi(self):
        paths = {
            "/api/enum/items": {
                "get": {
                    "operationId": "getItems",
                    "parameters": [
                        {
                            "name": "y",
                            "in": "query",
                            "required": True,
                            "schema": {"type": "string", "enum": list(Y_VALUES)},
                        },
                        {
                            "name": "x",
                            "in": "query",
                            "required": True,
                            "schema": {"type": "integer"},
                        },
                    ],
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(
                                {
                                    "type": "object",
                                    "properties": {
                                        "y": {"type": "string"},
                                        "x": {"type": "integer"},
                                    },
                                }
                            ),
                        },
                        "400": {"description": "Invalid"},
                    },
                }
            }
        }
        return openapi_document("enum fixture", paths)


class PingApi(_BaseFixtureApi):
    """
    ``GET /api/ping``, always 200.
    """

    name = "ping"
    root = "/api/ping"

    def routes(self):
        return [("GET", "/api/ping", self.ping)]

    def ping(self, request):
        return json_response(200, {"status": "ok"})

    def openapi(self):
        paths = {
            "/api/ping": {
                "get": {
                    "operationId": "ping",
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(
                                {
                                    "type": "object",
                                    "properties": {"status": {"type": "string"}},
                                }
                            ),
                        }
                    },
                }
            }
        }
        return openapi_document("ping fixture", paths)
