import json
import os
from decimal import Decimal

import pytest
import yaml

from apifuzz.actions import (
    CLEANUP_EXPECTATION,
    Exchange,
    HttpAction,
    TestCase,
)
from apifuzz.coverage import TestRecord
from apifuzz.emitter import (
    SCHEMA_MISMATCH,
    SERVER_ERROR,
    TestPlan,
    classify_fault,
    emit_suite,
    fault_report,
    find_faults,
    make_plans,
    name_test,
    plan_steps,
    render_curl_script,
    render_plan_yaml,
    resource_noun,
    summarize,
)
from apifuzz.transport import HttpResponse
from conftest import TOKEN_AUTH, links_record, token_record

MISMATCH = (
    "Fault101. Received A Response From API With A Structure/Data That Is Not "
    "Matching Its Schema. Type: validation.response.body.schema.type. "
    "[Path '/errors'] Instance type (null) does not match any allowed primitive "
    'type (allowed: ["string"])'
)


def _exchange(status, body=None):
    text = "" if body is None else json.dumps(body)
    return Exchange(response=HttpResponse(status, text=text))


class TestClassifyFault:
    def test_server_error(self):
        """
        Check that a 5xx status is fault 100.
        """
        code, message = classify_fault(HttpAction("GET", "/a"), _exchange(503))
        assert code == SERVER_ERROR
        assert message.startswith("Fault100. HTTP Status 503.")

    def test_schema_violation(self, links_model):
        """
        Check the message of a body that violates its schema.
        """
        schema = links_model.by_operation_id("postCreate").response(200).schema
        exchange = _exchange(200, {"data": {"id": "u1", "code": 101}, "errors": None})
        action = HttpAction("POST", "/api/links/create")
        fault = classify_fault(action, exchange, schema)
        assert fault == (SCHEMA_MISMATCH, MISMATCH)

    def test_undeclared_success(self):
        """
        Check that an undeclared 2xx status is fault 101.
        """
        fault = classify_fault(HttpAction("GET", "/a"), _exchange(202), declared=False)
        assert fault[0] == SCHEMA_MISMATCH
        assert "validation.response.status" in fault[1]

    @pytest.mark.parametrize(
        "exchange",
        [
            _exchange(404),
            _exchange(200),
            Exchange(error="timeout"),
            _exchange(400, {"errors": None}),
        ],
    )
    def test_no_fault(self, links_model, exchange):
        """
        Check the responses that reveal nothing.
        """
        schema = links_model.by_operation_id("postCreate").response(200).schema
        action = HttpAction("POST", "/api/links/create")
        assert classify_fault(action, exchange, schema) is None

    def test_find_faults_roles(self, links_model):
        """
        Check that only calls are classified.
        """
        cleanup = HttpAction("POST", "/api/links/create", role="cleanup")
        call = HttpAction("POST", "/api/links/create")
        test = TestCase((cleanup, call))
        exchanges = [_exchange(500), _exchange(500)]
        assert [i for i, _, _ in find_faults(test, exchanges, links_model)] == [1]


class TestNaming:
    @pytest.mark.parametrize(
        "path,noun",
        [
            ("/users/{id}", "User"),
            ("/items", "Items"),
            ("/", "Root"),
            ("/api/crud/order/{orderId}", "Order"),
            ("/api/categories/{id}/owners/{ownerId}", "Owner"),
            ("/api/bank-accounts/{id}", "BankAccount"),
        ],
    )
    def test_resource_noun(self, path, noun):
        """
        Check the resource named by a path.
        """
        assert resource_noun(path) == noun

    def test_fault_outcome(self, links_model, transport):
        """
        Check that a schema mismatch names the test.
        """
        record = links_record(links_model, transport)
        name = name_test(0, record.test, record.exchanges, record.faults)
        assert name == "test_0_getOnUserReturnsMismatchResponseWithSchema"

    @pytest.mark.parametrize(
        "exchange,faults,suffix",
        [
            (_exchange(404), (), "Returns404"),
            (_exchange(500), ((0, SERVER_ERROR, ""),), "CausesServerError"),
            (Exchange(error="refused"), (), "GetsNoResponse"),
        ],
    )
    def test_outcomes(self, exchange, faults, suffix):
        """
        Check the outcome part of test names.
        """
        test = TestCase((HttpAction("DELETE", "/api/crud/user/{id}"),))
        name = name_test(3, test, [exchange], faults)
        assert name == f"test_3_deleteOnUser{suffix}"

    def test_cleanup_not_named(self):
        """
        Check that the name comes from the last call, not from cleanup.
        """
        test = TestCase(
            (
                HttpAction("POST", "/api/crud/orders"),
                HttpAction("DELETE", "/api/crud/order/{orderId}", role="cleanup"),
            )
        )
        name = name_test(0, test, [_exchange(201), _exchange(204)])
        assert name == "test_0_postOnOrdersReturns201"

    def test_summary(self, links_model, transport):
        """
        Check the summary of an executed test.
        """
        record = links_record(links_model, transport)
        text = summarize(record.test, record.exchanges, record.faults)
        assert text.splitlines() == [
            "Calls:",
            "1 - (200) POST:/api/links/create",
            "2 - (200) GET:/api/links/users/{name}/{code}",
            "Found 1 potential fault of type-code 101",
            "Followed 1 link:",
            "  200:LinkToGetUser",
        ]


class TestPlans:
    def test_link_steps(self, links_model, transport):
        """
        Check the steps of a test that follows a link.
        """
        (plan,) = make_plans([links_record(links_model, transport)])
        first, second = plan_steps(plan)
        assert first["endpoint"] == "POST:/api/links/create"
        assert first["extract"] == [
            {"var": "link_0__data_id", "from": "/data/id"},
            {"var": "link_0__data_code", "from": "/data/code"},
        ]
        assert first["expect"] == {"status": 200, "fault": 101}
        assert first["note"] == MISMATCH
        assert second["path"] == (
            "/api/links/users/${link_0__data_id}/${link_0__data_code}"
        )
        assert second["query"] == {"name": "BAR"}
        assert second["expect"] == {"status": 200}
        assert second["timeout"] == 60000

    def test_login_step(self):
        """
        Check that a login step is prepended and its token referenced.
        """
        (plan,) = make_plans([token_record()], auth=TOKEN_AUTH)
        assert plan.statuses == (None, 200)
        login, check = plan_steps(plan)
        assert login["role"] == "login"
        assert login["expect"] == {"status-in": ["2xx"]}
        assert login["extract"] == [{"var": "auth_token", "from": "/token/authToken"}]
        assert check["headers"] == {"Authorization": "Bearer ${auth_token}"}
        assert "role" not in check

    def test_faults_offset(self):
        """
        Check that fault indices follow the prepended login step.
        """
        test = TestCase((HttpAction("GET", "/api/logintoken/check"),))
        record = TestRecord(
            test, (_exchange(500),), frozenset(), faults=((0, SERVER_ERROR, "x"),)
        )
        (plan,) = make_plans([record], auth=TOKEN_AUTH)
        assert plan.faults == ((1, SERVER_ERROR, "x"),)
        (entry,) = fault_report([plan])
        assert entry["endpoint"] == "GET:/api/logintoken/check"
        assert entry["step"] == 1

    def test_cleanup_expectation(self):
        """
        Check that cleanup steps accept 2xx or 404.
        """
        action = HttpAction(
            "DELETE",
            "/api/crud/user/{id}",
            path_params={"id": "abcd"},
            role="cleanup",
            expectation=CLEANUP_EXPECTATION,
        )
        plan = TestPlan("t", dict(), "", TestCase((action,)), (204,))
        (step,) = plan_steps(plan)
        assert step["role"] == "cleanup"
        assert step["path"] == "/api/crud/user/abcd"
        assert step["expect"] == {"status-in": ["2xx", 404]}


class TestRender:
    def test_plan_yaml(self, links_model, transport):
        """
        Check the header, comments and tests of a plan-yaml document.
        """
        plans = make_plans([links_record(links_model, transport)])
        text = render_plan_yaml(plans, name="links", base_path="/srv")
        data = yaml.safe_load(text)
        assert data["suite"]["name"] == "links"
        assert data["suite"]["base-path"] == "/srv"
        assert data["suite"]["created-with"].startswith("apifuzz ")
        (test,) = data["tests"]
        assert test["name"] == plans[0].name
        assert len(test["steps"]) == 2
        assert "  # Calls:\n" in text
        assert "  # Found 1 potential fault of type-code 101\n" in text

    def test_deterministic(self, links_model, transport):
        """
        Check that identical plans render to identical text.
        """
        plans = make_plans([links_record(links_model, transport)])
        assert render_plan_yaml(plans) == render_plan_yaml(plans)
        assert render_curl_script(plans) == render_curl_script(plans)

    def test_empty(self):
        """
        Check the document of an empty suite.
        """
        assert yaml.safe_load(render_plan_yaml([]))["tests"] == []

    def test_decimal_body(self):
        """
        Check that decimals are written as YAML numbers.
        """
        action = HttpAction(
            "POST",
            "/p",
            body={"price": Decimal("1.50")},
            content_type="application/json",
        )
        plan = TestPlan("t", dict(), "", TestCase((action,)), (200,))
        text = render_plan_yaml([plan])
        assert "price: 1.50" in text
        assert yaml.safe_load(text)["tests"][0]["steps"][0]["body"] == {"price": 1.5}

    def test_curl_script(self, links_model, transport):
        """
        Check the calls and extractions of a curl script.
        """
        plans = make_plans([links_record(links_model, transport)])
        script = render_curl_script(plans)
        assert script.startswith("#!/bin/sh\n")
        assert 'resp_0=$(curl -s -X POST "${BASE_URL}/api/links/create")' in script
        assert (
            "link_0__data_id=$(printf '%s' \"$resp_0\" | jq -r '.[\"data\"][\"id\"]')"
            in script
        )
        assert (
            '"${BASE_URL}/api/links/users/${link_0__data_id}/${link_0__data_code}'
            '?name=BAR"' in script
        )

    def test_curl_login(self):
        """
        Check that login steps send the raw payload without the base path.
        """
        (plan,) = make_plans([token_record()], auth=TOKEN_AUTH)
        script = render_curl_script([plan], base_path="/srv")
        assert '"${BASE_URL}/api/logintoken/login"' in script
        assert "--data '{\"userId\": \"foo\", \"password\": \"123\"}'" in script
        assert '"${BASE_URL}/srv/api/logintoken/check"' in script
        assert '-H "Authorization: Bearer ${auth_token}"' in script


class TestEmitSuite:
    def test_files(self, links_model, transport, tmp_path):
        """
        Check the files written for a suite.
        """
        plans = make_plans([links_record(links_model, transport)])
        log = [dict(seq=0, verb="POST"), dict(seq=1, verb="GET")]
        written = emit_suite(
            plans, str(tmp_path), coverage={"total": 12}, action_log=log
        )
        assert [os.path.basename(p) for p in written] == [
            "suite.yaml",
            "fault-report.json",
            "coverage.json",
            "actions.jsonl",
        ]
        with open(tmp_path / "fault-report.json") as f:
            (entry,) = json.load(f)
        assert entry["code"] == 101
        with open(tmp_path / "actions.jsonl") as f:
            assert [json.loads(line)["seq"] for line in f] == [0, 1]

    def test_curl_format(self, tmp_path):
        """
        Check that the curl format writes a shell script.
        """
        written = emit_suite([], str(tmp_path), fmt="curl-script")
        assert os.path.basename(written[0]) == "suite.sh"

    def test_byte_identical(self, links_model, transport, tmp_path):
        """
        Check that emitting the same plans twice gives identical files.
        """
        plans = make_plans([links_record(links_model, transport)])
        texts = []
        for sub in ("a", "b"):
            (path, _) = emit_suite(plans, str(tmp_path / sub))
            with open(path, "rb") as f:
                texts.append(f.read())
        assert texts[0] == texts[1]

    def test_bad_format(self, tmp_path):
        """
        Check that unknown formats are refused.
        """
        with pytest.raises(ValueError):
            emit_suite([], str(tmp_path), fmt="junit")
