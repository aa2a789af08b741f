"""
Provides the links fixture: a create operation whose response feeds a lookup
through an OpenAPI link.

The create response carries ``"errors": null`` while its schema declares a
string, a deliberate schema mismatch for fault detection.
"""

from copy import deepcopy

from .fixture_api import (
    _BaseFixtureApi,
    json_content,
    json_response,
    error_response,
    openapi_document,
)

LINK_PARAMETERS = {
    "path.name": "$response.body#/data/id",
    "query.name": "BAR",
    "code": "$response.body#/data/code",
}


class LinksApi(_BaseFixtureApi):
    """
    ``POST /api/links/create`` and ``GET /api/links/users/{name}/{code}``.

    The lookup answers 200 only for a ``name``/``code`` pair returned by a
    previous create, so a 2xx lookup needs the declared link to be followed.

    Parameters
    ----------
    clock : object, optional
        Clock. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    name = "links"
    root = "/api/links"

    def reset(self):
        super().reset()
        self.users = dict()
        return

    def routes(self):
        return [
            ("POST", "/api/links/create", self.create),
            ("GET", "/api/links/users/{name}/{code}", self.get_user),
        ]

    def create(self, request):
        n = len(self.users) + 1
        user_id, code = f"u{n}", 100 + n
        self.users[user_id] = code
        return json_response(
            200, {"data": {"id": user_id, "code": code}, "errors": None}
        )

    def get_user(self, request, name, code):
        if self.users.get(name) is None or str(self.users[name]) != code:
            return error_response(404, f"no user {name}/{code}")
        return json_response(
            200, {"name": name, "code": self.users[name], "tag": request.arg("name")}
        )

    def openapi(self, faulty=False):
        """
        The API's OpenAPI document.

        Parameters
        ----------
        faulty : bool, optional
            If ``True``, ``links`` is misplaced next to the status codes rather
            than inside the ``200`` response. (Default: ``False``)

        Returns
        -------
        out : dict
            OpenAPI document.
        """
        links = {
            "LinkToGetUser": {
                "operationId": "getUser",
                "parameters": dict(LINK_PARAMETERS),
            }
        }
        ok = {
            "description": "OK",
            "content": json_content(
                {"$ref": "#/components/schemas/BBLinksDto"}, media_type="*/*"
            ),
        }
        responses = {"200": ok}
        if faulty:
            responses["links"] = links
        else:
            ok["links"] = links
        paths = {
            "/api/links/create": {
                "post": {
                    "tags": ["bb-links-application"],
                    "operationId": "postCreate",
                    "responses": responses,
                }
            },
            "/api/links/users/{name}/{code}": {
                "get": {
                    "tags": ["bb-links-application"],
                    "operationId": "getUser",
                    "parameters": [
                        {
                            "name": "name",
                            "in": "path",
                            "required": True,
                            "schema": {"type": "string"},
                        },
                        {
                            "name": "name",
                            "in": "query",
                            "required": False,
                            "schema": {"type": "string"},
                        },
                        {
                            "name": "code",
                            "in": "path",
                            "required": True,
                            "schema": {"type": "integer", "format": "int32"},
                        },
                    ],
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(
                                {"$ref": "#/components/schemas/UserDto"},
                                media_type="*/*",
                            ),
                        },
                        "404": {"description": "Not found"},
                    },
                }
            },
        }
        schemas = {
            "BBLinksDto": {
                "type": "object",
                "properties": {
                    "data": {
                        "type": "object",
                        "properties": {
                            "id": {"type": "string"},
                            "code": {"type": "integer", "format": "int32"},
                        },
                    },
                    "errors": {"type": "string"},
                },
            },
            "UserDto": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "code": {"type": "integer"},
                    "tag": {"type": "string", "nullable": True},
                },
            },
        }
        return openapi_document("links fixture", paths, schemas)

    def documents(self):
        return {
            self.name: deepcopy(self.openapi()),
            f"{self.name}-faulty": deepcopy(self.openapi(faulty=True)),
        }
