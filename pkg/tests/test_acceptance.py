"""
End-to-end checks of complete sessions against the bundled fixtures, all on a
virtual clock.
"""

import re
from dataclasses import replace

import pytest
from click.testing import CliRunner

from apifuzz.auth import parse_auth_config
from apifuzz.cli import EXIT_OK, cli
from apifuzz.coverage import minimized_records
from apifuzz.derived import apply_derived_params, load_derived_rules
from apifuzz.emitter import emit_suite, make_plans, plan_steps
from apifuzz.engine import FuzzSession, SessionConfig, dictionary_reads_only
from apifuzz.fixtures import (
    DERIVED_PARAMS_YAML,
    LOGIN_TOML,
    FixtureSuite,
    default_apis,
)
from apifuzz.replay import load_suite, replay_suite
from apifuzz.transport import HttpRequest, SimulatedTransport, VirtualClock
from apifuzz.values import dumps
from conftest import write_documents

QUIET = dict(quiet=True, seed=3)


def _fresh_transport():
    clock = VirtualClock()
    return SimulatedTransport(FixtureSuite(clock=clock), clock=clock)


def _session(model, transport, **kwargs):
    config = SessionConfig(**dict(QUIET, **kwargs))
    return FuzzSession(model, config=config, transport=transport)


def _written(plans, directory):
    path, *_ = emit_suite(plans, str(directory))
    return load_suite(path)


class TestLinkChaining:
    def test_chained_plan_replays(self, links_model, transport, tmp_path):
        """
        Check that a followed link is emitted with extractions and replays.
        """
        session = _session(links_model, transport, max_time="30s")
        archive, _ = session.run()
        plans = make_plans(minimized_records(archive))
        chained = []
        for plan in plans:
            steps = plan_steps(plan)
            if len(steps) == 2 and "extract" in steps[0]:
                chained.append(plan)
        assert chained
        first, second = plan_steps(chained[0])
        assert {e["from"] for e in first["extract"]} == {"/data/id", "/data/code"}
        assert re.fullmatch(
            r"/api/links/users/\$\{\w+_data_id\}/\$\{\w+_data_code\}", second["path"]
        )
        assert second["query"] == {"name": "BAR"}
        suite = _written(chained[:1], tmp_path)
        report = replay_suite(suite, _fresh_transport())
        assert report.statuses(chained[0].name) == [200, 200]


class TestTokenLifetime:
    def test_two_logins_in_six_minutes(self, token_model, tmp_path):
        """
        Check that a five minute token is fetched twice in a six minute session.
        """
        clock = VirtualClock()
        suite = FixtureSuite(apis=default_apis(clock, token_lifetime=300), clock=clock)
        transport = SimulatedTransport(suite, clock=clock)
        paths = write_documents(
            str(tmp_path), {"auth.toml": LOGIN_TOML + 'lifetime = "5m"\n'}
        )
        (auth,) = parse_auth_config(paths["auth.toml"])
        config = SessionConfig(max_time="6m", rate_per_minute=120, **QUIET)
        session = FuzzSession(
            token_model, config=config, auth=auth, transport=transport
        )
        _, stats = session.run()
        assert stats.stop_reason == "budget"
        assert suite["token-auth"].login_count == 2
        checks = [r for _, r in transport.sent if r.path == "/api/logintoken/check"]
        assert checks
        assert {r.header("Authorization") for r in checks} <= {
            "Bearer token-1",
            "Bearer token-2",
        }

    def test_no_literal_tokens_emitted(self, token_model, transport, tmp_path):
        """
        Check that emitted suites log in instead of carrying tokens.
        """
        paths = write_documents(str(tmp_path), {"auth.toml": LOGIN_TOML})
        (auth,) = parse_auth_config(paths["auth.toml"])
        config = SessionConfig(max_time="20s", premature_stop="5s", **QUIET)
        session = FuzzSession(
            token_model, config=config, auth=auth, transport=transport
        )
        archive, _ = session.run()
        plans = make_plans(minimized_records(archive), auth=auth)
        path, *_ = emit_suite(plans, str(tmp_path / "out"))
        with open(path) as f:
            text = f.read()
        assert "token-1" not in text
        assert "Bearer ${auth_token}" in text
        assert replay_suite(load_suite(path), _fresh_transport()).ok


class TestRateLimit:
    def test_sliding_window(self, ping_model, transport):
        """
        Check that no minute holds more requests than the rate allows.
        """
        session = _session(ping_model, transport, max_time="5m", rate_per_minute=30)
        session.run()
        times = [t for t, _ in transport.sent]
        assert len(times) > 30
        for i, start in enumerate(times):
            in_window = [t for t in times[i:] if t - start < 60.0 - 1e-6]
            assert len(in_window) <= 30
        for last_ms, wait in session.limiter.log:
            assert wait == max(0.0, 60000.0 / 30 - last_ms)


class TestPrematureStop:
    def test_stops_after_window(self, ping_model, transport):
        """
        Check that a stalled session ends one window after its last new target.
        """
        session = _session(ping_model, transport, max_time="60s", premature_stop="5s")
        archive, stats = session.run()
        assert stats.stop_reason == "premature"
        last_new = max(r.covered_at for r in archive.covered.values())
        assert stats.elapsed <= last_new + 5.0 + transport.latency_ms / 1000.0 + 1e-6


class TestEnumCoverage:
    def test_every_value_covered(self, enum_model, transport):
        """
        Check that all enum values are covered with any status and with 2xx.
        """
        session = _session(enum_model, transport, max_time="10m", premature_stop="30s")
        archive, _ = session.run()
        enums = [t for t in archive.targets if t.kind == "enum"]
        assert len(enums) == 20
        assert set(enums) <= set(archive.covered)
        union = set()
        for record in minimized_records(archive):
            union |= record.evidenced
        assert set(archive.covered) <= union


class TestCleanup:
    def test_suite_reruns_identically(self, crud_model, transport, tmp_path):
        """
        Check that created users are deleted and a suite replays identically twice.
        """
        session = _session(crud_model, transport, max_time="20s")
        archive, _ = session.run()
        assert dictionary_reads_only(session.action_log)
        plans = make_plans(minimized_records(archive))
        for plan in plans:
            steps = plan_steps(plan)
            for i, step in enumerate(steps):
                created = plan.statuses[i] == 201
                if created and step["endpoint"] == "POST:/api/crud/users":
                    assert any(
                        s.get("role") == "cleanup"
                        and s["endpoint"] == "DELETE:/api/crud/user/{id}"
                        for s in steps[i + 1 :]
                    )
        suite = _written(plans, tmp_path)
        fresh = _fresh_transport()
        first = replay_suite(suite, fresh)
        second = replay_suite(suite, fresh)
        assert [r.status for r in first.results] == [r.status for r in second.results]

    def test_updates_not_deleted(self, crud_model, transport):
        """
        Check that product deletions in a suite only follow a PUT that created.
        """
        session = _session(crud_model, transport, max_time="20s")
        archive, _ = session.run()
        for plan in make_plans(minimized_records(archive)):
            steps = plan_steps(plan)
            for i, step in enumerate(steps):
                if step.get("role") != "cleanup":
                    continue
                if step["endpoint"] != "DELETE:/api/crud/products/{id}":
                    continue
                earlier = [
                    (s["verb"], plan.statuses[j])
                    for j, s in enumerate(steps[:i])
                    if s["path"] == step["path"]
                ]
                assert ("PUT", 201) in earlier or ("GET", 404) in earlier

    def test_seeded_products_survive(self, crud_model, transport):
        """
        Check that updating seeded products plans no deletion of them.
        """
        session = _session(crud_model, transport, max_time="20s")
        session.run()
        seeded = ("/api/crud/products/p1", "/api/crud/products/p2")
        assert not [
            e
            for e in session.action_log
            if e["role"] == "cleanup" and e["url"] in seeded
        ]


class TestDerivedOrdering:
    def _bind(self, rules, registry):
        payload = {
            "key": "sessionKey01",
            "data": "",
            "sign": "",
            "bizData": {"cardNo": "4000123412341234", "holder": "Ada"},
        }
        body = apply_derived_params(
            payload, rules, registry, "/api/derived/bind", "POST"
        )
        request = HttpRequest(
            "POST",
            "/api/derived/bind",
            headers=(("Content-Type", "application/json"),),
            body=dumps(body),
        )
        return _fresh_transport().send(request)

    def test_orders(self, tmp_path):
        """
        Check that signing last verifies and signing first is rejected.
        """
        paths = write_documents(str(tmp_path), {"derived.yaml": DERIVED_PARAMS_YAML})
        rules, registry = load_derived_rules(paths["derived.yaml"])
        assert self._bind(rules, registry).status == 200
        swapped = [replace(r, order=0 if r.name == "sign" else 1) for r in rules]
        assert 400 <= self._bind(swapped, registry).status < 500


class TestDeterminism:
    @pytest.mark.parametrize("fmt", ["plan-yaml", "curl-script"])
    def test_same_seed_same_bytes(self, tmp_path, fmt):
        """
        Check that two runs with one seed write identical suites.
        """
        schemas = tmp_path / "schemas"
        runner = CliRunner()
        result = runner.invoke(cli, ["fixtures", "--writeSchemas", str(schemas)])
        assert result.exit_code == EXIT_OK
        outputs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            args = [
                "fuzz",
                "--schema",
                str(schemas / "links.yaml"),
                "--baseUrl",
                "sim://fixtures",
                "--maxTime",
                "20s",
                "--seed",
                "7",
                "--format",
                fmt,
                "--outputDir",
                str(out),
                "--quiet",
            ]
            assert runner.invoke(cli, args).exit_code == EXIT_OK
            name = "suite.yaml" if fmt == "plan-yaml" else "suite.sh"
            outputs.append((out / name).read_bytes())
        assert outputs[0] == outputs[1]
