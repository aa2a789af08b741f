import json

import pytest

from apifuzz.actions import CLEANUP_EXPECTATION, Exchange, HttpAction, Origin, TestCase
from apifuzz.api_model import ApiModel
from apifuzz.auth import AuthSpec, LoginFlow
from apifuzz.coverage import CoverageTarget
from apifuzz.engine import (
    ActionSampler,
    FuzzSession,
    ResponseDictionary,
    SessionConfig,
    dictionary_reads_only,
    harvest_dictionary,
    item_templates,
    plan_cleanup,
    run_session,
    throttle,
)
from apifuzz.errors import ConfigurationError, SessionAbort, TransportError
from apifuzz.transport import HttpResponse, VirtualClock, _BaseTransport

QUIET = dict(quiet=True, seed=0)


def _exchange(status, body=None):
    text = "" if body is None else json.dumps(body)
    return Exchange(response=HttpResponse(status, text=text))


class _FailingTransport(_BaseTransport):
    def _send(self, request):
        self.clock.advance(0.01)
        raise TransportError("connection refused")


class TestThrottle:
    @pytest.mark.parametrize(
        "rate,last_ms,wait", [(60, 0.0, 1000.0), (60, 400.0, 600.0), (60, 1500.0, 0.0)]
    )
    def test_throttle(self, rate, last_ms, wait):
        """
        Check the wait before the next request.
        """
        assert throttle(rate, last_ms) == pytest.approx(wait)

    def test_invalid_rate(self):
        """
        Check that a rate below one is refused.
        """
        with pytest.raises(ValueError):
            throttle(0, 0.0)

    def test_session_spacing(self, ping_model, transport):
        """
        Check that a rate-limited session spaces its requests.
        """
        config = SessionConfig(max_time="10s", rate_per_minute=60, **QUIET)
        FuzzSession(ping_model, config=config, transport=transport).run()
        times = [t for t, _ in transport.sent]
        assert 5 <= len(times) <= 11
        assert all(b - a >= 0.999 for a, b in zip(times, times[1:]))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(max_time=0),
            dict(max_time="1m", premature_stop="2m"),
            dict(rate_per_minute=0),
            dict(follow_link_probability=2.0),
            dict(max_time="ten minutes"),
        ],
    )
    def test_invalid(self, kwargs):
        """
        Check the validation of session settings.
        """
        with pytest.raises(ConfigurationError):
            SessionConfig(**kwargs)

    def test_durations(self):
        """
        Check that durations are normalized to seconds.
        """
        config = SessionConfig(max_time="1h", premature_stop="90s")
        assert (config.max_time, config.premature_stop) == (3600.0, 90.0)


class TestDictionary:
    def test_item_templates(self, crud_model):
        """
        Check the matching of collection paths to item paths.
        """
        paths = [e.path for e in item_templates("/api/crud/users", crud_model)]
        assert set(paths) == {"/api/crud/user/{id}"}
        deletes = item_templates("/api/crud/products", crud_model, verb="DELETE")
        assert [e.key for e in deletes] == ["DELETE:/api/crud/products/{id}"]

    def test_harvest(self, crud_model):
        """
        Check that identifiers listed by a collection read are stored.
        """
        dictionary = ResponseDictionary()
        action = HttpAction("GET", "/api/crud/products")
        body = [{"id": "p1", "name": "kettle"}, {"id": "p2", "name": "toaster"}]
        harvest_dictionary(dictionary, action, _exchange(200, body), crud_model)
        assert dictionary.candidates("/api/crud/products/{id}") == ["p1", "p2"]
        assert dictionary.provenance["p1"][0] == "GET:/api/crud/products"

    @pytest.mark.parametrize(
        "verb,path,status",
        [
            ("POST", "/api/crud/users", 200),
            ("GET", "/api/crud/products/{id}", 200),
            ("GET", "/api/crud/products", 500),
        ],
    )
    def test_not_harvested(self, crud_model, verb, path, status):
        """
        Check that only successful collection reads are harvested.
        """
        dictionary = ResponseDictionary()
        body = [{"id": "p1"}]
        action = HttpAction(verb, path)
        harvest_dictionary(dictionary, action, _exchange(status, body), crud_model)
        assert len(dictionary) == 0

    def test_wrapped_collection(self, crud_model):
        """
        Check that an object wrapping a single array is harvested.
        """
        dictionary = ResponseDictionary()
        action = HttpAction("GET", "/api/crud/users")
        body = {"items": [{"userId": "abcd"}, {"userId": "efgh"}], "total": 2}
        harvest_dictionary(dictionary, action, _exchange(200, body), crud_model)
        assert dictionary.candidates("/api/crud/user/{id}") == ["abcd", "efgh"]

    def test_get_only(self, crud_model):
        """
        Check that harvested values are offered to reads and never to writes.
        """
        dictionary = ResponseDictionary()
        dictionary.add("/api/crud/products/{id}", "p1", "GET:/api/crud/products", (), 0)
        sampler = ActionSampler(crud_model, seed=1, dictionary=dictionary)
        get = crud_model.by_key("GET:/api/crud/products/{id}")
        delete = crud_model.by_key("DELETE:/api/crud/products/{id}")
        reads = [sampler.action(get) for _ in range(40)]
        writes = [sampler.action(delete) for _ in range(40)]
        used = [a for a in reads if a.origin.from_dictionary]
        assert used and all(a.path_params["id"] == "p1" for a in used)
        assert not any(a.origin.from_dictionary for a in writes)


class TestCleanup:
    def test_post_bound_to_response(self, crud_model):
        """
        Check that a created resource is deleted through its returned id.
        """
        create = HttpAction("POST", "/api/crud/orders", body={"product": "p1"})
        test = plan_cleanup(
            TestCase((create,)),
            [_exchange(201, {"orderId": "o1", "product": "p1"})],
            crud_model,
        )
        assert len(test) == 2
        cleanup = test.actions[1]
        assert cleanup.key == "DELETE:/api/crud/order/{orderId}"
        assert cleanup.role == "cleanup"
        assert cleanup.expectation == CLEANUP_EXPECTATION
        (binding,) = test.bindings
        assert (binding.source, binding.pointer, binding.slot_name) == (
            0,
            ("orderId",),
            "orderId",
        )

    def test_put_created(self, crud_model):
        """
        Check that a PUT answered with 201 is deleted at the same path.
        """
        put = HttpAction(
            "PUT", "/api/crud/products/{id}", path_params={"id": "zz"}, body={}
        )
        test = plan_cleanup(
            TestCase((put,)), [_exchange(201, {"id": "zz"})], crud_model
        )
        assert test.actions[1].key == "DELETE:/api/crud/products/{id}"
        assert test.actions[1].path_params == {"id": "zz"}

    def test_put_update_kept(self, crud_model):
        """
        Check that updating an existing resource plans no deletion.
        """
        put = HttpAction(
            "PUT", "/api/crud/products/{id}", path_params={"id": "p1"}, body={}
        )
        test = TestCase((put,))
        assert plan_cleanup(test, [_exchange(200, {"id": "p1"})], crud_model) is test

    @pytest.mark.parametrize("status", [200, 204])
    def test_put_on_generated_id_kept(self, crud_model, status):
        """
        Check that a successful PUT other than 201 deletes nothing, whatever the id.
        """
        put = HttpAction(
            "PUT", "/api/crud/products/{id}", path_params={"id": "p1"}, body={}
        )
        test = TestCase((put,))
        assert len(plan_cleanup(test, [_exchange(status)], crud_model)) == 1

    @pytest.mark.parametrize("seen,planned", [(404, 3), (200, 2)])
    def test_put_after_lookup(self, crud_model, seen, planned):
        """
        Check that a PUT answered with 200 is deleted only after a lookup of the
        same id found nothing.
        """
        get = HttpAction("GET", "/api/crud/products/{id}", path_params={"id": "zz"})
        put = HttpAction(
            "PUT", "/api/crud/products/{id}", path_params={"id": "zz"}, body={}
        )
        test = plan_cleanup(
            TestCase((get, put)), [_exchange(seen), _exchange(200)], crud_model
        )
        assert len(test) == planned
        if planned == 3:
            assert test.actions[2].key == "DELETE:/api/crud/products/{id}"
            assert test.actions[2].path_params == {"id": "zz"}

    def test_put_after_other_lookup(self, crud_model):
        """
        Check that a missing id elsewhere does not make an update a creation.
        """
        get = HttpAction("GET", "/api/crud/products/{id}", path_params={"id": "zz"})
        put = HttpAction(
            "PUT", "/api/crud/products/{id}", path_params={"id": "p1"}, body={}
        )
        test = plan_cleanup(
            TestCase((get, put)), [_exchange(404), _exchange(200)], crud_model
        )
        assert len(test) == 2

    def test_reverse_order(self, crud_model):
        """
        Check that resources are deleted in reverse creation order.
        """
        user = HttpAction("POST", "/api/crud/users", body={"id": "abcd", "name": "A"})
        order = HttpAction("POST", "/api/crud/orders", body={"product": "p1"})
        exchanges = [
            _exchange(201, {"id": "abcd", "name": "A"}),
            _exchange(201, {"orderId": "o1", "product": "p1"}),
        ]
        test = plan_cleanup(TestCase((user, order)), exchanges, crud_model)
        assert [a.path for a in test.actions[2:]] == [
            "/api/crud/order/{orderId}",
            "/api/crud/user/{id}",
        ]

    def test_failed_creation_ignored(self, crud_model):
        """
        Check that a rejected creation needs no cleanup.
        """
        user = HttpAction("POST", "/api/crud/users", body={})
        test = TestCase((user,))
        assert plan_cleanup(test, [_exchange(400, {"error": "x"})], crud_model) is test


class TestSampler:
    def test_reproducible(self, links_model):
        """
        Check that a seed fixes the generated tests.
        """
        key = "GET:/api/links/users/{name}/{code}"
        target = CoverageTarget("combo", key, ("1",), "any")
        first = ActionSampler(links_model, seed=3).test_for(target)
        second = ActionSampler(links_model, seed=3).test_for(target)
        assert first.fingerprint() == second.fingerprint()

    def test_combo_target(self, links_model):
        """
        Check that a combination target sets the optional parameters it names.
        """
        sampler = ActionSampler(links_model, seed=0)
        key = "GET:/api/links/users/{name}/{code}"
        on = sampler.test_for(CoverageTarget("combo", key, ("1",), "any"))
        off = sampler.test_for(CoverageTarget("combo", key, ("0",), "any"))
        assert "name" in on.actions[0].query
        assert "name" not in off.actions[0].query

    def test_enum_target(self, enum_model):
        """
        Check that an enum target fixes the parameter value.
        """
        sampler = ActionSampler(enum_model, seed=0)
        target = CoverageTarget(
            "enum", "GET:/api/enum/items", ("query.y", '"G"'), "2xx"
        )
        action = sampler.test_for(target).actions[0]
        assert action.query["y"] == "G"
        assert action.origin.enum_values == (("query.y", "G"),)

    def test_link_target(self, links_model):
        """
        Check that a link target always follows its link.
        """
        sampler = ActionSampler(links_model, seed=0, follow_link_probability=0.0)
        target = CoverageTarget(
            "link", "POST:/api/links/create", ("200", "LinkToGetUser"), "2xx"
        )
        test = sampler.test_for(target)
        assert [a.key for a in test.actions] == [
            "POST:/api/links/create",
            "GET:/api/links/users/{name}/{code}",
        ]


class TestSession:
    def test_empty_model(self):
        """
        Check that a model without endpoints cannot be fuzzed.
        """
        with pytest.raises(ConfigurationError):
            FuzzSession(ApiModel())

    def test_links_session(self, links_model, transport):
        """
        Check that a session follows the link and finds the schema mismatch.
        """
        config = SessionConfig(max_time="30s", premature_stop="10s", **QUIET)
        session = FuzzSession(links_model, config=config, transport=transport)
        archive, stats = session.run()
        link = CoverageTarget(
            "link", "POST:/api/links/create", ("200", "LinkToGetUser"), "2xx"
        )
        assert link in archive.covered
        assert CoverageTarget("fault", "POST:/api/links/create", ("101",)) in (
            archive.covered
        )
        assert stats.stop_reason in ("premature", "budget")
        assert stats.requests == len(transport.sent)
        assert len(session.action_log) == stats.actions
        assert str(stats).startswith(f"Stopped ({stats.stop_reason}) after ")

    def test_crud_cleanup(self, crud_model, transport, suite):
        """
        Check that created resources are deleted and harvested ids only read.
        """
        config = SessionConfig(max_time="20s", **QUIET)
        session = FuzzSession(crud_model, config=config, transport=transport)
        _, stats = session.run()
        assert stats.cleanup_calls > 0
        assert suite["crud"].orders == {}
        assert suite["crud"].users == {}
        assert dictionary_reads_only(session.action_log)

    def test_premature_stop(self, ping_model, transport):
        """
        Check that a session stops once coverage stalls.
        """
        config = SessionConfig(max_time="1m", premature_stop="5s", **QUIET)
        _, stats = run_session(ping_model, cfg=config, transport=transport)
        assert stats.stop_reason == "premature"
        assert stats.elapsed < 60

    def test_budget_checked_per_action(self, links_model, transport):
        """
        Check that no call of a slow chained test starts after the budget.
        """
        config = SessionConfig(max_time="2m", rate_per_minute=2, **QUIET)
        session = FuzzSession(links_model, config=config, transport=transport)
        _, stats = session.run()
        assert stats.stop_reason == "budget"
        assert transport.sent
        assert all(t < 120.0 for t, _ in transport.sent)

    def test_premature_stop_per_action(self, links_model, transport):
        """
        Check that no call starts once coverage has stalled for the window.
        """
        config = SessionConfig(
            max_time="1h", premature_stop="45s", rate_per_minute=2, **QUIET
        )
        session = FuzzSession(links_model, config=config, transport=transport)
        archive, stats = session.run()
        assert stats.stop_reason == "premature"
        last_new = max(r.covered_at for r in archive.covered.values())
        assert all(t < last_new + 45.0 for t, _ in transport.sent)

    def test_all_covered(self, ping_model, transport):
        """
        Check that a session stops when every target is covered.
        """
        target = CoverageTarget("status", "GET:/api/ping", ("2xx",))
        config = SessionConfig(max_time="1m", **QUIET)
        archive, stats = run_session(
            ping_model, targets={target}, cfg=config, transport=transport
        )
        assert stats.stop_reason == "all-covered"
        assert stats.tests == 1
        assert archive.pending == set()

    def test_extra_headers(self, ping_model, transport):
        """
        Check that static headers reach every call.
        """
        config = SessionConfig(max_time="1s", **QUIET)
        FuzzSession(
            ping_model,
            config=config,
            transport=transport,
            extra_headers={"X-Trace": "1"},
        ).run()
        assert all(request.header("X-Trace") == "1" for _, request in transport.sent)

    def test_transport_failures_abort(self, ping_model):
        """
        Check that repeated transport failures abort the session.
        """
        config = SessionConfig(max_consecutive_errors=3, **QUIET)
        transport = _FailingTransport(clock=VirtualClock())
        with pytest.raises(SessionAbort, match="3 consecutive"):
            FuzzSession(ping_model, config=config, transport=transport).run()

    def test_login_failure_aborts(self, token_model, transport):
        """
        Check that a failing login aborts the session.
        """
        auth = AuthSpec(
            "bad",
            LoginFlow(
                "/api/logintoken/login",
                token_pointer="/token/authToken",
                payload='{"userId": "foo", "password": "wrong"}',
            ),
        )
        session = FuzzSession(
            token_model, config=SessionConfig(**QUIET), auth=auth, transport=transport
        )
        with pytest.raises(SessionAbort, match="Authentication failed"):
            session.run()

    def test_action_log(self, links_model, transport):
        """
        Check the fields recorded for every sent action.
        """
        config = SessionConfig(max_time="2s", **QUIET)
        session = FuzzSession(links_model, config=config, transport=transport)
        session.run()
        entry = session.action_log[0]
        assert entry["seq"] == 0
        assert entry["role"] == "call"
        assert set(entry) >= {"time", "verb", "path", "url", "status", "error"}
        times = [e["time"] for e in session.action_log]
        assert times == sorted(times)

    def test_origin_survives(self, links_model):
        """
        Check that sampler actions carry their provenance.
        """
        sampler = ActionSampler(links_model, seed=0)
        action = sampler.action(links_model.by_operation_id("postCreate"))
        assert isinstance(action.origin, Origin)
        assert action.origin.presence == 0
