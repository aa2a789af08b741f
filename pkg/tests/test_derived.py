import base64
import hashlib
import hmac
import json

import pytest

from apifuzz.derived import (
    Base64Transform,
    DerivedParamRule,
    HmacDigestTransform,
    IdentityTransform,
    TransformRegistry,
    apply_derived_params,
    build_transform,
    derived_fields,
    load_derived_rules,
    load_plugin,
    xor_bytes,
)
from apifuzz.errors import ConfigurationError
from apifuzz.fixtures import DERIVED_PARAMS_YAML, mock_cipher_registry
from apifuzz.fixtures.derived_params_api import SIGN_SECRET, WRAP_SECRET
from apifuzz.transport import HttpRequest
from conftest import write_documents

BIND = "/api/derived/bind"
BIZ = {"cardNo": "4000123412341234", "holder": "Ada"}


def _payload(key="sessionKey01"):
    return {"key": key, "data": "", "sign": "", "bizData": dict(BIZ)}


@pytest.fixture(scope="function")
def rules(tmp_path):
    paths = write_documents(str(tmp_path), {"derived.yaml": DERIVED_PARAMS_YAML})
    return load_derived_rules(paths["derived.yaml"])


def _bind(transport, payload):
    request = HttpRequest(
        method="POST",
        path=BIND,
        headers=(("Content-Type", "application/json"),),
        body=json.dumps(payload),
    )
    return transport.send(request)


class TestLoadRules:
    def test_fixture_rules(self, rules):
        """
        Check the rules and transforms read from a configuration file.
        """
        loaded, registry = rules
        assert [(r.name, r.transform, r.order) for r in loaded] == [
            ("key", "wrap-key", 0),
            ("data", "encrypt-data", 0),
            ("sign", "sign-payload", 1),
        ]
        for name in ("wrap-key", "encrypt-data", "sign-payload", "identity"):
            assert name in registry

    def test_toml(self, tmp_path):
        """
        Check that rules can be written in TOML with endpoint scopes.
        """
        text = (
            "[[derivedParams]]\n"
            'name = "token"\n'
            'transform = "base64"\n'
            'endpoints = ["POST:/a"]\n'
        )
        paths = write_documents(str(tmp_path), {"derived.toml": text})
        (rule,), _ = load_derived_rules(paths["derived.toml"])
        assert rule.endpoints == frozenset({"POST:/a"})
        assert rule.applies_to("POST", "/a")
        assert not rule.applies_to("PUT", "/a")

    def test_unregistered_transform(self, tmp_path):
        """
        Check that a rule naming an unknown transform is rejected.
        """
        text = "derivedParams:\n  - {name: sign, transform: rsa}\n"
        paths = write_documents(str(tmp_path), {"derived.yaml": text})
        with pytest.raises(ConfigurationError, match="Unregistered transform 'rsa'"):
            load_derived_rules(paths["derived.yaml"])

    def test_json_rejected(self, tmp_path):
        """
        Check that JSON configuration files are refused.
        """
        text = '{"derivedParams": []}'
        paths = write_documents(str(tmp_path), {"derived.json": text})
        with pytest.raises(ConfigurationError, match="JSON not supported"):
            load_derived_rules(paths["derived.json"])

    def test_entry_fields(self, tmp_path):
        """
        Check that every rule needs a name and a transform.
        """
        paths = write_documents(
            str(tmp_path), {"derived.yaml": "derivedParams:\n  - {name: sign}\n"}
        )
        with pytest.raises(ConfigurationError):
            load_derived_rules(paths["derived.yaml"])

    @pytest.mark.parametrize("kwargs", [dict(order=-1), dict(context="header")])
    def test_invalid_rule(self, kwargs):
        """
        Check the order and context checks of rules.
        """
        with pytest.raises(ConfigurationError):
            DerivedParamRule("sign", "identity", **kwargs)


class TestTransforms:
    def test_builtins(self):
        """
        Check the identity and base64 transforms.
        """
        payload = json.dumps({"a": "hi", "n": 3})
        assert IdentityTransform()("n", payload, "/x") == "3"
        assert Base64Transform()("a", payload, "/x") == "aGk="

    def test_hmac_default_fields(self):
        """
        Check that the digest covers every other field in payload order.
        """
        payload = json.dumps({"a": "1", "sign": "", "b": True})
        expected = hmac.new(b"k", b"1true", hashlib.sha256).hexdigest()
        assert HmacDigestTransform("k")("sign", payload, "/x") == expected

    def test_xor_reversible(self):
        """
        Check that XOR with the same key restores the input.
        """
        data = b"business data"
        assert xor_bytes(xor_bytes(data, b"key"), b"key") == data
        with pytest.raises(ValueError):
            xor_bytes(data, b"")

    def test_plugin(self):
        """
        Check loading a transform from an import path.
        """
        transform = load_plugin("apifuzz.derived:Base64Transform")
        assert isinstance(transform, Base64Transform)
        identity = build_transform("apifuzz.derived:IdentityTransform")
        assert isinstance(identity, IdentityTransform)

    @pytest.mark.parametrize(
        "spec", ["no_colon", "apifuzz.derived:Missing", "nope.module:thing"]
    )
    def test_bad_plugin(self, spec):
        """
        Check that unloadable plugins are configuration errors.
        """
        with pytest.raises(ConfigurationError):
            load_plugin(spec)

    def test_registry(self):
        """
        Check registration and lookup.
        """
        registry = TransformRegistry()
        with pytest.raises(ConfigurationError):
            registry.register("x", "not callable")
        with pytest.raises(ConfigurationError):
            registry.get("x")
        registry.register("x", IdentityTransform())
        assert "x" in registry


class TestApply:
    def test_levels(self, rules):
        """
        Check that one level sees one snapshot and the next sees its outputs.
        """
        loaded, registry = rules
        out = apply_derived_params(_payload(), loaded, registry, BIND, "POST")
        session_key = xor_bytes(
            base64.b64decode(out["key"]), WRAP_SECRET.encode("utf-8")
        )
        assert session_key == b"sessionKey01"
        plaintext = xor_bytes(base64.b64decode(out["data"]), b"sessionKey01")
        assert json.loads(plaintext) == BIZ
        expected = hmac.new(
            SIGN_SECRET.encode("utf-8"),
            (out["key"] + out["data"]).encode("utf-8"),
            hashlib.sha256,
        ).hexdigest()
        assert out["sign"] == expected

    def test_input_untouched(self, rules):
        """
        Check that the input payload is not modified.
        """
        loaded, registry = rules
        payload = _payload()
        apply_derived_params(payload, loaded, registry, BIND, "POST")
        assert payload == _payload()

    def test_server_accepts(self, rules, transport, suite):
        """
        Check that derived fields satisfy the server while raw ones do not.
        """
        loaded, registry = rules
        assert _bind(transport, _payload()).status == 400
        response = _bind(
            transport, apply_derived_params(_payload(), loaded, registry, BIND, "POST")
        )
        assert response.status == 200
        assert response.json == {"bizData": BIZ, "matches": True}
        assert suite["derived-params"].accepted == 1

    def test_mock_registry(self, rules, transport):
        """
        Check that the bundled registry matches the fixture's secrets.
        """
        loaded, _ = rules
        body = apply_derived_params(
            _payload("otherKey99"), loaded, mock_cipher_registry(), BIND, "POST"
        )
        assert _bind(transport, body).status == 200

    def test_absent_fields_skipped(self, rules):
        """
        Check that rules only touch fields present in the payload.
        """
        loaded, registry = rules
        payload = {"bizData": {}}
        assert apply_derived_params(payload, loaded, registry, BIND) is payload
        assert apply_derived_params([1], loaded, registry, BIND) == [1]

    def test_derived_fields(self, rules):
        """
        Check the recorded derived field names, in level order.
        """
        loaded, _ = rules
        assert derived_fields(_payload(), loaded, "POST", BIND) == (
            "key",
            "data",
            "sign",
        )
        assert derived_fields({"sign": ""}, loaded, "POST", BIND) == ("sign",)
        assert derived_fields(None, loaded, "POST", BIND) == ()
