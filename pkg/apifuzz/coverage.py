"""
Provides black-box coverage targets, the archive of covering tests, and suite
minimization.

No code is instrumented: a target is a goal observable from requests and responses
alone, such as "``GET:/items`` returned a 4xx", "enum value ``B`` of query parameter
``y`` was sent" or "link ``LinkToGetUser`` was followed". Apart from status
families and faults, every target exists twice: once satisfied by any response
(``qualified="any"``) and once only by a 2xx response (``qualified="2xx"``).
"""

import json
from dataclasses import dataclass

from .input_gen import presence_masks

KINDS = ("status", "combo", "enum", "example", "link", "fault")
QUALIFICATIONS = ("any", "2xx")
STATUS_FAMILIES = ("2xx", "4xx", "5xx")


@dataclass(frozen=True, order=True)
class CoverageTarget(object):
    """
    Identifier of a coverage goal.

    Parameters
    ----------
    kind : str
        ``status``, ``combo``, ``enum``, ``example``, ``link`` or ``fault``.

    endpoint : str
        ``VERB:/path`` key of the endpoint.

    detail : tuple
        Kind-specific strings: status family; presence bitmask in binary;
        parameter designator and JSON value; slot and example index; status key
        and link name; fault code.

    qualified : str
        ``"any"`` or ``"2xx"``; ``None`` for ``status`` and ``fault`` targets.
    """

    kind: str
    endpoint: str
    detail: tuple = tuple()
    qualified: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}.")
        if self.kind in ("status", "fault") and self.qualified is not None:
            raise ValueError(f"{self.kind} targets are not qualified.")
        unqualified = self.kind in ("status", "fault")
        if not unqualified and self.qualified not in QUALIFICATIONS:
            raise ValueError(f"qualified must be one of {QUALIFICATIONS}.")
        return

    def __str__(self):
        tail = "" if self.qualified is None else f" [{self.qualified}]"
        return f"{self.kind} {self.endpoint} {' '.join(self.detail)}".rstrip() + tail


def _qualified(kind, endpoint, detail):
    return [CoverageTarget(kind, endpoint, tuple(detail), q) for q in QUALIFICATIONS]


def value_key(value):
    return json.dumps(value, sort_keys=True, default=str)


def combo_detail(mask, n):
    """
    Text form of a presence bitmask over ``n`` optional parameters.
    """
    return format(mask, f"0{max(n, 1)}b")


def derive_targets(model):
    """
    List the coverage targets of a model.

    Per endpoint: status families 2xx/4xx/5xx; presence combinations of optional
    parameters (see :func:`~apifuzz.input_gen.presence_masks`); every enum value;
    every declared example; every declared link. All but status families come in
    both qualifications. Fault targets are added when faults are found.

    Parameters
    ----------
    model : ~apifuzz.api_model.ApiModel
        Filtered model.

    Returns
    -------
    out : set
        :class:`~apifuzz.coverage.CoverageTarget` entries.
    """
    targets = set()
    for e in model.endpoints:
        for family in STATUS_FAMILIES:
            targets.add(CoverageTarget("status", e.key, (family,)))
        n = len(e.optional_params)
        if n > 0:
            for mask in presence_masks(n):
                targets.update(_qualified("combo", e.key, (combo_detail(mask, n),)))
        for p in e.params:
            for value in p.schema.constraints.enum or ():
                detail = (p.designator, value_key(value))
                targets.update(_qualified("enum", e.key, detail))
            for i in range(len(p.examples)):
                targets.update(_qualified("example", e.key, (p.designator, str(i))))
        if e.body_schema is not None:
            for i in range(len(e.body_schema.examples)):
                targets.update(_qualified("example", e.key, ("body", str(i))))
        for r in e.responses:
            for link in r.links:
                targets.update(_qualified("link", e.key, (r.status, link.name)))
    return targets


def evidenced_targets(test, exchanges, model, faults=()):
    """
    Targets demonstrated by one executed test.

    Login and cleanup actions do not count. ``any`` targets need only the input
    condition; ``2xx`` targets also need a 2xx response on that action.

    Parameters
    ----------
    test : ~apifuzz.actions.TestCase
        Executed test.

    exchanges : list
        :class:`~apifuzz.actions.Exchange` per action.

    model : ~apifuzz.api_model.ApiModel
        Model of the API.

    faults : iterable, optional
        ``(action index, fault code, message)`` triples. (Default: ``()``)

    Returns
    -------
    out : set
        Evidenced :class:`~apifuzz.coverage.CoverageTarget` entries.
    """
    out = set()
    for i, (action, exchange) in enumerate(zip(test.actions, exchanges)):
        if action.role != "call" or exchange.response is None:
            continue
        endpoint = model.find(action.verb, action.path)
        if endpoint is None:
            continue
        status = exchange.status
        out.add(CoverageTarget("status", endpoint.key, (f"{str(status)[0]}xx",)))
        quals = ("any", "2xx") if 200 <= status <= 299 else ("any",)
        o = action.origin
        n = len(endpoint.optional_params)
        for q in quals:
            if o.presence is not None and n > 0:
                detail = (combo_detail(o.presence, n),)
                out.add(CoverageTarget("combo", endpoint.key, detail, q))
            for designator, value in o.enum_values:
                detail = (designator, value_key(value))
                out.add(CoverageTarget("enum", endpoint.key, detail, q))
            for slot, index in o.examples_used:
                out.add(CoverageTarget("example", endpoint.key, (slot, str(index)), q))
            if o.followed_link is not None:
                source, status_key, name = o.followed_link
                if 0 <= source < len(test.actions):
                    src = test.actions[source]
                    out.add(
                        CoverageTarget("link", src.key, (str(status_key), name), q)
                    )
    for index, code, _ in faults:
        action = test.actions[index]
        out.add(CoverageTarget("fault", action.key, (str(code),)))
    return out


@dataclass(frozen=True)
class TestRecord(object):
    """
    An executed test kept by the archive.

    Parameters
    ----------
    test : ~apifuzz.actions.TestCase
        The test.

    exchanges : tuple
        Its recorded exchanges.

    evidenced : frozenset
        Every target it demonstrates.

    covered_at : float
        Clock time of its execution.

    faults : tuple
        ``(action index, code, message)`` triples found in it.
    """

    __test__ = False

    test: object
    exchanges: tuple
    evidenced: frozenset
    covered_at: float = 0.0
    faults: tuple = tuple()

    @property
    def fingerprint(self):
        return self.test.fingerprint()


class Archive(object):
    """
    Tracks, for each coverage target, the test that first covered it.

    A target's test is replaced only by a strictly shorter test covering it. The
    covered set never shrinks.

    Parameters
    ----------
    targets : iterable, optional
        Targets to pursue, e.g. from :func:`derive_targets`. (Default: ``()``)
    """

    def __init__(self, targets=()):
        self.targets = set(targets)
        self.covered = dict()
        return

    @property
    def pending(self):
        """
        Targets not yet covered.
        """
        return self.targets - set(self.covered)

    @property
    def records(self):
        """
        Distinct archived records, in order of first coverage.
        """
        seen = dict()
        for record in sorted(self.covered.values(), key=lambda r: r.covered_at):
            seen.setdefault(id(record), record)
        return list(seen.values())

    def covered_targets(self, qualified=None):
        """
        Covered targets, optionally only those with a given qualification.
        """
        return {
            t for t in self.covered if qualified is None or t.qualified == qualified
        }


def record_execution(archive, test, exchanges, model, faults=(), now=0.0):
    """
    Update the archive with an executed test.

    Parameters
    ----------
    archive : ~apifuzz.coverage.Archive
        Archive, updated in place.

    test : ~apifuzz.actions.TestCase
        Executed test.

    exchanges : list
        One :class:`~apifuzz.actions.Exchange` per action.

    model : ~apifuzz.api_model.ApiModel
        Model of the API.

    faults : iterable, optional
        ``(action index, code, message)`` triples. (Default: ``()``)

    now : float, optional
        Clock time of the execution. (Default: ``0.0``)

    Returns
    -------
    out : tuple
        ``(archive, newly covered targets)``.
    """
    if len(exchanges) != len(test.actions):
        raise ValueError("exchanges must align 1:1 with the test actions.")
    evidenced = evidenced_targets(test, exchanges, model, faults)
    archive.targets.update(t for t in evidenced if t.kind == "fault")
    evidenced = frozenset(t for t in evidenced if t in archive.targets)
    record = TestRecord(test, tuple(exchanges), evidenced, now, tuple(faults))
    newly = set()
    for target in sorted(evidenced):
        current = archive.covered.get(target)
        if current is None:
            archive.covered[target] = record
            newly.add(target)
        elif len(test.actions) < len(current.test.actions):
            archive.covered[target] = record
    return archive, newly


def _sort_key(record):
    calls = [a for a in record.test.actions if a.role == "call"] or list(
        record.test.actions
    )
    last = calls[-1] if calls else None
    kinds = sorted(KINDS.index(t.kind) for t in record.evidenced) or [len(KINDS)]
    return (
        "" if last is None else last.path,
        "" if last is None else last.verb,
        kinds[0],
        record.fingerprint,
    )


def minimized_records(archive):
    """
    Greedily minimized set of archived records.

    Records are visited from the one demonstrating the fewest targets; a record is
    dropped when every covered target it demonstrates is demonstrated by a
    remaining record. The result is sorted by path, verb and target kind.

    Parameters
    ----------
    archive : ~apifuzz.coverage.Archive
        Archive.

    Returns
    -------
    out : list
        :class:`~apifuzz.coverage.TestRecord` entries.
    """
    covered = set(archive.covered)
    unique = dict()
    for record in archive.records:
        unique.setdefault(record.fingerprint, record)
    remaining = sorted(
        unique.values(), key=lambda r: (len(r.evidenced & covered),) + _sort_key(r)
    )
    kept = list(remaining)
    for record in remaining:
        others = set()
        for r in kept:
            if r is not record:
                others |= r.evidenced
        if (record.evidenced & covered) <= others:
            kept = [r for r in kept if r is not record]
    return sorted(kept, key=_sort_key)


def minimized_suite(archive):
    """
    Minimized list of covering tests.

    Parameters
    ----------
    archive : ~apifuzz.coverage.Archive
        Archive.

    Returns
    -------
    out : list
        :class:`~apifuzz.actions.TestCase` entries whose covered-target union equals
        the archive's.
    """
    return [r.test for r in minimized_records(archive)]


def coverage_report(archive, model):
    """
    Summary of coverage per endpoint.

    Parameters
    ----------
    archive : ~apifuzz.coverage.Archive
        Archive.

    model : ~apifuzz.api_model.ApiModel
        Model, for endpoint ordering.

    Returns
    -------
    out : dict
        ``total``, ``covered``, ``covered_2xx`` counts, an ``endpoints`` mapping
        with the same counts per endpoint, and the ``uncovered`` target list.
    """

    def counts(targets):
        return dict(
            total=len(targets),
            covered=len([t for t in targets if t in archive.covered]),
            covered_2xx=len(
                [t for t in targets if t in archive.covered and t.qualified == "2xx"]
            ),
        )

    endpoints = dict()
    for e in model.endpoints:
        endpoints[e.key] = counts([t for t in archive.targets if t.endpoint == e.key])
    report = counts(archive.targets)
    report["endpoints"] = endpoints
    report["uncovered"] = [str(t) for t in sorted(archive.pending)]
    return report


def format_coverage_table(report):
    """
    Render :func:`coverage_report` output as a text table.
    """
    rows = [("endpoint", "targets", "covered", "2xx-covered")]
    for key, c in report["endpoints"].items():
        rows.append((key, str(c["total"]), str(c["covered"]), str(c["covered_2xx"])))
    rows.append(
        (
            "TOTAL",
            str(report["total"]),
            str(report["covered"]),
            str(report["covered_2xx"]),
        )
    )
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = []
    for j, r in enumerate(rows):
        lines.append(
            "  ".join(
                cell.ljust(w) if i == 0 else cell.rjust(w)
                for i, (cell, w) in enumerate(zip(r, widths))
            )
        )
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
