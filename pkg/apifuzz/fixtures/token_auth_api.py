"""
Provides the token-authentication fixture: a login endpoint issuing bearer
tokens with an optional lifetime, and a protected check endpoint.
"""

from .fixture_api import (
    _BaseFixtureApi,
    error_response,
    json_response,
    openapi_document,
    text_response,
)

USER_ID = "foo"
PASSWORD = "123"

LOGIN_TOML = '''\
[[auth]]
name="logintoken"
[auth.loginEndpointAuth]
endpoint="/api/logintoken/login"
payloadRaw= """
{"userId": "foo", "password":"123"}
"""
verb="POST"
contentType="application/json"
[auth.loginEndpointAuth.token]
headerPrefix="Bearer "
extractFromField = "/token/authToken"
httpHeaderName="Authorization"
'''


class TokenAuthApi(_BaseFixtureApi):
    """
    ``POST /api/logintoken/login`` and ``GET /api/logintoken/check``.

    The login endpoint is deliberately absent from the OpenAPI document: it is
    reached only through authentication configuration.

    Parameters
    ----------
    token_lifetime : float, optional
        Seconds after which a token is rejected, ``None`` for never.
        (Default: ``None``)

    clock : object, optional
        Clock. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    name = "token-auth"
    root = "/api/logintoken"

    def __init__(self, token_lifetime=None, clock=None):
        self.token_lifetime = token_lifetime
        super().__init__(clock=clock)
        return

    def reset(self):
        super().reset()
        self.tokens = dict()
        self.login_count = 0
        return

    def routes(self):
        return [
            ("POST", "/api/logintoken/login", self.login),
            ("GET", "/api/logintoken/check", self.check),
        ]

    def login(self, request):
        self.login_count += 1
        payload = request.json
        if (
            not isinstance(payload, dict)
            or payload.get("userId") != USER_ID
            or payload.get("password") != PASSWORD
        ):
            return error_response(401, "bad credentials")
        token = f"token-{self.login_count}"
        self.tokens[token] = self.clock.now()
        return json_response(200, {"token": {"authToken": token}})

    def valid(self, header):
        """
        Whether an ``Authorization`` header carries a live token.
        """
        if header is None or not header.startswith("Bearer "):
            return False
        issued = self.tokens.get(header[len("Bearer ") :])
        if issued is None:
            return False
        if self.token_lifetime is None:
            return True
        return self.clock.now() - issued < self.token_lifetime

    def check(self, request):
        if not self.valid(request.header("Authorization")):
            return error_response(401, "unauthorized")
        return text_response(200, "OK")

    def openapi(self):
        paths = {
            "/api/logintoken/check": {
                "get": {
                    "operationId": "check",
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": {"text/plain": {"schema": {"type": "string"}}},
                        },
                        "401": {"description": "Unauthorized"},
                    },
                }
            }
        }
        return openapi_document("token auth fixture", paths)
