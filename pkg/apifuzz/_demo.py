"""
Provides the :func:`~apifuzz._demo.demo_model` and :func:`~apifuzz._demo.demo`
functions that demonstrate basic usage of :mod:`apifuzz`.
"""

from .api_model import build_model
from .coverage import coverage_report, format_coverage_table, minimized_records
from .emitter import emit_suite, make_plans
from .engine import FuzzSession, SessionConfig
from .fixtures import FixtureSuite, load_fixture_schema
from .transport import SimulatedTransport, VirtualClock


def demo_model(name="links"):
    """
    Build the model of a bundled fixture API.

    Parameters
    ----------
    name : str, optional
        Fixture document name. (Default: ``"links"``)

    Returns
    -------
    out : ~apifuzz.api_model.ApiModel
        Model of the fixture API.
    """
    graph, _ = load_fixture_schema(name)
    model, _ = build_model(graph)
    return model


def demo(out_dir="apifuzz-demo", max_time="2m", seed=0):
    """
    Demonstrates basic usage of :mod:`apifuzz`.

    Fuzzes the links fixture in-process on a virtual clock, so the session takes a
    fraction of a second of real time, then writes the minimized suite, its fault
    report and the coverage summary.

    Parameters
    ----------
    out_dir : str, optional
        Directory to write the suite to. (Default: ``"apifuzz-demo"``)

    max_time : str or float, optional
        Virtual time budget. (Default: ``"2m"``)

    seed : int, optional
        Random seed. (Default: ``0``)

    Returns
    -------
    out : list
        Paths of the written files.
    """
    model = demo_model("links")
    clock = VirtualClock()
    transport = SimulatedTransport(FixtureSuite(clock=clock), clock=clock)
    config = SessionConfig(
        max_time=max_time, premature_stop="30s", seed=seed, quiet=True
    )
    session = FuzzSession(model, config=config, transport=transport)
    archive, stats = session.run()
    plans = make_plans(minimized_records(archive))
    report = coverage_report(archive, model)
    report["session"] = stats.to_dict()
    written = emit_suite(
        plans,
        out_dir,
        coverage=report,
        action_log=session.action_log,
        name="apifuzz-demo",
        base_path=model.base_path,
    )
    print(stats)
    print(format_coverage_table(report))
    for plan in plans:
        print(f"{plan.name}\n{plan.summary_text}")
    print(f"Wrote demo suite to {out_dir}.")
    return written
