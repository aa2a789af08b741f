"""
Provides the derived-parameters fixture: an endpoint whose request must carry a
wrapped session key, business data encrypted with that key, and a signature over
both.

The cryptography is a reversible stand-in (XOR and HMAC-SHA256, see
:mod:`apifuzz.derived`); the secrets below are shared with
:func:`mock_cipher_registry`.
"""

import base64
import binascii
import hashlib
import hmac
import json

from ..derived import (
    HmacDigestTransform,
    TransformRegistry,
    XorEncryptTransform,
    XorWrapTransform,
    xor_bytes,
)
from .fixture_api import (
    _BaseFixtureApi,
    error_response,
    json_content,
    json_response,
    openapi_document,
)

WRAP_SECRET = "fixture-wrap-secret"
SIGN_SECRET = "fixture-sign-secret"

DERIVED_PARAMS_YAML = f"""\
transforms:
  wrap-key: {{type: xor-wrap, secret: {WRAP_SECRET}}}
  encrypt-data: {{type: xor-encrypt, source: bizData, keyField: key}}
  sign-payload: {{type: hmac-sha256, secret: {SIGN_SECRET}, fields: [key, data]}}
derivedParams:
  - {{name: key, transform: wrap-key, order: 0}}
  - {{name: data, transform: encrypt-data, order: 0}}
  - {{name: sign, transform: sign-payload, order: 1}}
"""


def mock_cipher_registry():
    """
    Transforms matching the fixture's secrets: ``wrap-key``, ``encrypt-data`` and
    ``sign-payload``.

    Returns
    -------
    out : ~apifuzz.derived.TransformRegistry
        The registry.
    """
    return TransformRegistry(
        {
            "wrap-key": XorWrapTransform(WRAP_SECRET),
            "encrypt-data": XorEncryptTransform("bizData", "key"),
            "sign-payload": HmacDigestTransform(SIGN_SECRET, ("key", "data")),
        }
    )


def _b64decode(text):
    return base64.b64decode(text.encode("ascii"), validate=True)


class DerivedParamsApi(_BaseFixtureApi):
    """
    ``POST /api/derived/bind``.

    The handler checks the signature over ``key`` and ``data``, unwraps the
    session key, decrypts ``data`` and echoes the decrypted business data along
    with whether it equals the plain ``bizData`` field.

    Parameters
    ----------
    clock : object, optional
        Clock. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    name = "derived-params"
    root = "/api/derived"

    def reset(self):
        super().reset()
        self.accepted = 0
        return

    def routes(self):
        return [("POST", "/api/derived/bind", self.bind)]

    def bind(self, request):
        payload = request.json
        if not isinstance(payload, dict):
            return error_response(400, "expected a JSON object")
        key, data, sign = (payload.get(k) for k in ("key", "data", "sign"))
        if not all(isinstance(v, str) for v in (key, data, sign)):
            return error_response(400, "key, data and sign must be strings")
        expected = hmac.new(
            SIGN_SECRET.encode("utf-8"), (key + data).encode("utf-8"), hashlib.sha256
        ).hexdigest()
        if not hmac.compare_digest(expected, sign):
            return error_response(400, "bad signature")
        try:
            session_key = xor_bytes(_b64decode(key), WRAP_SECRET.encode("utf-8"))
            plaintext = xor_bytes(_b64decode(data), session_key)
            biz = json.loads(plaintext.decode("utf-8"))
        except (binascii.Error, UnicodeDecodeError, ValueError):
            return error_response(400, "cannot decrypt data")
        self.accepted += 1
        return json_response(
            200, {"bizData": biz, "matches": biz == payload.get("bizData")}
        )

    def openapi(self):
        paths = {
            "/api/derived/bind": {
                "post": {
                    "operationId": "bindCard",
                    "requestBody": {
                        "required": True,
                        "content": json_content(
                            {"$ref": "#/components/schemas/CommonReq"}
                        ),
                    },
                    "responses": {
                        "200": {
                            "description": "Accepted",
                            "content": json_content(
                                {"$ref": "#/components/schemas/BindResult"}
                            ),
                        },
                        "400": {"description": "Rejected"},
                    },
                }
            }
        }
        schemas = {
            "CommonReq": {
                "type": "object",
                "required": ["key", "data", "sign", "bizData"],
                "properties": {
                    "key": {
                        "type": "string",
                        "minLength": 8,
                        "maxLength": 16,
                        "pattern": "^[A-Za-z0-9]+$",
                    },
                    "data": {"type": "string"},
                    "sign": {"type": "string"},
                    "bizData": {"$ref": "#/components/schemas/BindCardReq"},
                },
            },
            "BindCardReq": {
                "type": "object",
                "required": ["cardNo", "holder"],
                "properties": {
                    "cardNo": {"type": "string", "pattern": "^[0-9]{16}$"},
                    "holder": {"type": "string", "minLength": 1, "maxLength": 12},
                },
            },
            "BindResult": {
                "type": "object",
                "properties": {
                    "bizData": {"$ref": "#/components/schemas/BindCardReq"},
                    "matches": {"type": "boolean"},
                },
            },
        }
        return openapi_document("derived params fixture", paths, schemas)
