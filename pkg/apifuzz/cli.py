"""
Provides the ``apifuzz`` command line: ``fuzz``, ``validate``, ``replay`` and
``fixtures``.

Every option can also be set through an ``APIFUZZ_<NAME>`` environment variable,
e.g. ``APIFUZZ_MAX_TIME=10m``.

Exit codes: ``0`` success, ``1`` completed with findings (schema warnings, replay
mismatches), ``2`` configuration or usage error, ``3`` fatal environment error.
"""

import os
from contextlib import contextmanager

import click
import yaml

from .__version__ import __version__
from .api_model import build_model, filter_endpoints
from .auth import parse_auth_config, select_auth
from .coverage import coverage_report, format_coverage_table, minimized_records
from .derived import load_derived_rules
from .emitter import FORMATS, emit_suite, make_plans
from .engine import FuzzSession, SessionConfig
from .errors import (
    AuthError,
    ConfigurationError,
    ReplayError,
    SchemaLoadError,
    SessionAbort,
    TransportError,
)
from .fixtures import FixtureServer, FixtureSuite, default_apis
from .replay import load_suite, replay_suite
from .schema_loader import format_warnings, load_schema, validate_schema
from .transport import make_transport

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_CONFIG = 2
EXIT_FATAL = 3


def _envvar(name):
    return f"APIFUZZ_{name}"


@contextmanager
def _exit_codes(ctx):
    try:
        yield
    except (SessionAbort, AuthError, TransportError) as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_FATAL)
    except (ConfigurationError, SchemaLoadError, ReplayError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    return


def parse_headers(values):
    """
    Parse repeated ``NAME:VALUE`` options into a mapping.

    Parameters
    ----------
    values : iterable
        Option values.

    Returns
    -------
    out : dict
        Header name to value.
    """
    headers = dict()
    for value in values:
        name, sep, text = value.partition(":")
        if not sep or not name.strip():
            raise click.BadParameter(
                f"'{value}' is not of the form NAME:VALUE.", param_hint="--header"
            )
        headers[name.strip()] = text.strip()
    return headers


def _load_model(schema, prefix=None, tags=None, quiet=False):
    graph, warnings = load_schema(schema)
    model, model_warnings = build_model(graph)
    warnings = list(warnings) + list(validate_schema(graph)) + list(model_warnings)
    if warnings and not quiet:
        click.echo(f"{len(warnings)} schema warning(s):")
        click.echo(format_warnings(warnings))
    if prefix or tags:
        model = filter_endpoints(model, prefix=prefix, tags=tags)
    return model


def _load_rules(path):
    if path is None:
        return (), None
    return load_derived_rules(path)


header_option = click.option(
    "--header",
    "header",
    multiple=True,
    envvar=_envvar("HEADER"),
    help="Static header NAME:VALUE added to every call (repeatable).",
)
derived_option = click.option(
    "--derivedParams",
    "derived_params",
    type=click.Path(dir_okay=False),
    envvar=_envvar("DERIVED_PARAMS"),
    help="YAML/TOML file of derived-parameter rules and transforms.",
)
quiet_option = click.option(
    "--quiet",
    "quiet",
    is_flag=True,
    envvar=_envvar("QUIET"),
    help="Suppress progress and summaries.",
)


@click.group()
@click.version_option(__version__, prog_name="apifuzz")
def cli():
    """
    Black-box fuzzing of REST APIs described by OpenAPI schemas.
    """
    pass


@cli.command()
@click.pass_context
@click.option(
    "--schema",
    "schema",
    required=True,
    envvar=_envvar("SCHEMA"),
    help="Path or URL of the root OpenAPI document.",
)
@click.option(
    "--baseUrl",
    "base_url",
    required=True,
    envvar=_envvar("BASE_URL"),
    help="Server root of the API; sim://fixtures targets the bundled fixtures.",
)
@click.option(
    "--maxTime",
    "max_time",
    default="60s",
    show_default=True,
    envvar=_envvar("MAX_TIME"),
    help="Time budget, e.g. 30s, 10m, 1h.",
)
@click.option(
    "--prematureStop",
    "premature_stop",
    default=None,
    envvar=_envvar("PREMATURE_STOP"),
    help="Stop after this long without new coverage.",
)
@click.option(
    "--ratePerMinute",
    "rate_per_minute",
    type=click.IntRange(min=1),
    default=None,
    envvar=_envvar("RATE_PER_MINUTE"),
    help="Maximum requests per minute.",
)
@click.option(
    "--endpointPrefix",
    "endpoint_prefix",
    default=None,
    envvar=_envvar("ENDPOINT_PREFIX"),
    help="Only fuzz endpoints whose path starts with this prefix.",
)
@click.option(
    "--endpointTagFilter",
    "endpoint_tag_filter",
    default=None,
    envvar=_envvar("ENDPOINT_TAG_FILTER"),
    help="Comma-separated tags; only fuzz endpoints with one of them.",
)
@header_option
@click.option(
    "--authConfig",
    "auth_config",
    type=click.Path(dir_okay=False),
    envvar=_envvar("AUTH_CONFIG"),
    help="YAML/TOML authentication configuration.",
)
@click.option(
    "--auth",
    "auth_name",
    default=None,
    envvar=_envvar("AUTH"),
    help="Name of the auth entry to use (default: the first).",
)
@derived_option
@click.option(
    "--outputDir",
    "output_dir",
    default="apifuzz-output",
    show_default=True,
    type=click.Path(file_okay=False),
    envvar=_envvar("OUTPUT_DIR"),
    help="Directory receiving the suite and reports.",
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(FORMATS),
    default="plan-yaml",
    show_default=True,
    envvar=_envvar("FORMAT"),
    help="Format of the emitted suite.",
)
@click.option(
    "--seed",
    "seed",
    type=int,
    default=None,
    envvar=_envvar("SEED"),
    help="Random seed.",
)
@quiet_option
def fuzz(
    ctx,
    schema,
    base_url,
    max_time,
    premature_stop,
    rate_per_minute,
    endpoint_prefix,
    endpoint_tag_filter,
    header,
    auth_config,
    auth_name,
    derived_params,
    output_dir,
    fmt,
    seed,
    quiet,
):
    """
    Fuzz an API and write a minimized test suite.
    """
    headers = parse_headers(header)
    tags = None
    if endpoint_tag_filter:
        tags = [t.strip() for t in endpoint_tag_filter.split(",") if t.strip()]
    with _exit_codes(ctx):
        model = _load_model(schema, endpoint_prefix, tags, quiet=quiet)
        auth = None
        if auth_config is not None:
            auth = select_auth(parse_auth_config(auth_config), auth_name)
        rules, registry = _load_rules(derived_params)
        config = SessionConfig(
            max_time=max_time,
            premature_stop=premature_stop,
            rate_per_minute=rate_per_minute,
            seed=seed,
            base_url=base_url,
            quiet=quiet,
        )
        session = FuzzSession(
            model,
            config=config,
            auth=auth,
            rules=rules,
            registry=registry,
            extra_headers=headers,
        )
        archive, stats = session.run()
        plans = make_plans(minimized_records(archive), auth=auth)
        report = coverage_report(archive, model)
        report["session"] = stats.to_dict()
        emit_suite(
            plans,
            output_dir,
            fmt=fmt,
            coverage=report,
            action_log=session.action_log,
            base_path=model.base_path,
            quiet=quiet,
        )
        if not quiet:
            click.echo(format_coverage_table(report))
            faults = sum(len(p.faults) for p in plans)
            click.echo(f"{len(plans)} test(s) written, {faults} potential fault(s).")
    ctx.exit(EXIT_OK)


@cli.command()
@click.pass_context
@click.option(
    "--schema",
    "schema",
    required=True,
    envvar=_envvar("SCHEMA"),
    help="Path or URL of the root OpenAPI document.",
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["text", "json"]),
    default="text",
    show_default=True,
    help="Warning report format.",
)
def validate(ctx, schema, fmt):
    """
    Report schema content that would be silently misread.
    """
    with _exit_codes(ctx):
        graph, warnings = load_schema(schema)
        warnings = list(warnings) + list(validate_schema(graph))
    if warnings or fmt == "json":
        click.echo(format_warnings(warnings, fmt=fmt))
    ctx.exit(EXIT_FINDINGS if warnings else EXIT_OK)


@cli.command()
@click.pass_context
@click.argument("suite", type=click.Path(dir_okay=False))
@click.option(
    "--baseUrl",
    "base_url",
    required=True,
    envvar=_envvar("BASE_URL"),
    help="Server root of the API.",
)
@click.option(
    "--schema",
    "schema",
    default=None,
    envvar=_envvar("SCHEMA"),
    help="Schema used to re-check expected faults.",
)
@header_option
@derived_option
@quiet_option
def replay(ctx, suite, base_url, schema, header, derived_params, quiet):
    """
    Execute a plan-yaml suite and compare statuses with its expectations.
    """
    headers = parse_headers(header)
    with _exit_codes(ctx):
        plans = load_suite(suite)
        model = _load_model(schema, quiet=True) if schema else None
        rules, registry = _load_rules(derived_params)
        report = replay_suite(
            plans,
            make_transport(base_url),
            model=model,
            rules=rules,
            registry=registry,
            headers=headers,
        )
    if not quiet or not report.ok:
        click.echo(report.format())
    ctx.exit(EXIT_OK if report.ok else EXIT_FINDINGS)


@cli.command()
@click.pass_context
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--port",
    type=click.IntRange(min=0, max=65535),
    default=8080,
    show_default=True,
    envvar=_envvar("PORT"),
)
@click.option(
    "--tokenLifetime",
    "token_lifetime",
    type=float,
    default=None,
    help="Seconds after which issued tokens expire.",
)
@click.option(
    "--writeSchemas",
    "write_schemas",
    type=click.Path(file_okay=False),
    default=None,
    help="Write the fixture OpenAPI documents to this directory and exit.",
)
def fixtures(ctx, host, port, token_lifetime, write_schemas):
    """
    Serve the bundled fixture APIs on localhost.
    """
    suite = FixtureSuite(apis=default_apis(token_lifetime=token_lifetime))
    if write_schemas is not None:
        os.makedirs(write_schemas, exist_ok=True)
        for name, document in suite.documents().items():
            path = os.path.join(write_schemas, f"{name}.yaml")
            with open(path, "w", encoding="utf-8") as f:
                yaml.safe_dump(document, f, sort_keys=False)
            click.echo(path)
        ctx.exit(EXIT_OK)
    with _exit_codes(ctx):
        server = FixtureServer(suite, host=host, port=port).start()
    click.echo(f"Serving fixture APIs at {server.url} (Ctrl-C to stop)")
    for api in suite.apis:
        click.echo(f"  {api.name}: {server.url}{api.root}")
    try:
        server.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    ctx.exit(EXIT_OK)


def main():
    """
    Console entry point.
    """
    cli(prog_name="apifuzz")
    return
