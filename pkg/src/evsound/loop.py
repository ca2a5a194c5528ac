"""Counterexample-driven refinement.

Run the program under the current monitoring scheme, map reported objects to
abstract objects, turn observations the points-to set does not explain into
missing edges, recompute, repeat until nothing new is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .dynexec import Report, execute, format_schedule
from .ir.model import Bundle, callback_slot, defined_var, qualify
from .monitor import MonitoringScheme, make_scheme, scheme_diff
from .pta import MissingEdgeSet, PointsToSet, Proxy, Site, compute_pointsto, edge_line


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class ReportInfo:
    """What a report site means statically."""

    kind: str  # alloc | call | value | param | reach
    var: Optional[str]  # qualified program variable it binds
    footprint: Optional[str]  # footprint element contributed, if any


def classify_report(b: Bundle, specs, site: str) -> ReportInfo:
    if site.startswith("reach:"):
        return ReportInfo("reach", None, None)
    if site.startswith("cb:"):
        _, fn_name, idx = site.split(":")
        fn = b.function(fn_name)
        i = int(idx)
        slot = callback_slot(fn_name, i) if fn.is_callback else None
        return ReportInfo("param", qualify(fn_name, fn.params[i]), slot)
    fn, stmt = b.program_stmt_map[site]
    kind = type(stmt).__name__.lower()
    var = defined_var(stmt)
    qvar = qualify(fn.name, var) if var else None
    if kind == "alloc":
        return ReportInfo("alloc", qvar, None)
    if kind == "call":
        elem = stmt.callee if b.is_missing(stmt.callee, specs) else None
        return ReportInfo("call", qvar, elem)
    return ReportInfo("value", qvar, None)


def build_object_mapping(b: Bundle, specs, reports: Sequence[Report]) -> dict:
    """oid -> abstract object for one execution's reports.

    An oid whose allocation was reported maps to that site.  Any other oid
    maps to ``Proxy(class, F)`` where ``F`` collects every missing function
    and callback slot that delivered it during the execution.  Oids with no
    such delivery stay unmapped.
    """
    classes: dict[int, str] = {}
    sites: dict[int, str] = {}
    footprints: dict[int, set] = {}
    for r in reports:
        if r.oid is None:
            continue
        prev = classes.setdefault(r.oid, r.cls)
        if prev != r.cls:
            raise MappingError(f"object {r.oid} reported as {prev} and {r.cls}")
        info = classify_report(b, specs, r.site)
        if info.kind == "alloc":
            sites[r.oid] = r.site
        elif info.footprint:
            footprints.setdefault(r.oid, set()).add(info.footprint)
    mapping = {}
    for oid, cls in classes.items():
        if oid in sites:
            mapping[oid] = Site(sites[oid], cls)
        elif footprints.get(oid):
            mapping[oid] = Proxy(cls, frozenset(footprints[oid]))
    return mapping


@dataclass
class Counterexamples:
    edges: frozenset
    reached: frozenset
    deferred: frozenset  # proxy edges held back until re-execution


def derive_counterexamples(
    b: Bundle,
    specs,
    reports: Sequence[Report],
    mapping: dict,
    pi: PointsToSet,
    trust_filter: bool = True,
) -> Counterexamples:
    """Observed edges missing from ``pi``.

    With ``trust_filter`` a proxy edge is only emitted when its object was
    first reported no later than the first unexplained report of the run;
    later proxies may be program objects whose allocation went unmonitored
    because the points-to set was still incomplete.  They reappear on the
    next execution under the refined scheme.
    """
    first_seen: dict[int, int] = {}
    found = []
    reached = set()
    for i, r in enumerate(reports):
        if r.oid is not None:
            first_seen.setdefault(r.oid, i)
        info = classify_report(b, specs, r.site)
        if info.kind == "reach":
            reached.add(r.site.split(":", 1)[1])
            continue
        if info.kind == "alloc" or info.var is None:
            continue
        obj = mapping.get(r.oid)
        if obj is None:
            continue
        edge = (info.var, obj)
        if edge not in pi.edges:
            found.append((i, r.oid, edge))
    if not found:
        return Counterexamples(frozenset(), frozenset(reached), frozenset())
    first_ce = found[0][0]
    keep, defer = set(), set()
    for _, oid, edge in found:
        if trust_filter and isinstance(edge[1], Proxy) and first_seen[oid] > first_ce:
            defer.add(edge)
        else:
            keep.add(edge)
    return Counterexamples(frozenset(keep), frozenset(reached), frozenset(defer - keep))


def ce_line(edge) -> str:
    return f"CE {edge[0]} {edge[1].token()}"


@dataclass
class LoopState:
    pi_miss: MissingEdgeSet
    pi: PointsToSet
    scheme: MonitoringScheme
    iteration: int = 0
    archive: list = field(default_factory=list)  # (schedule, reports, mapping)

    @property
    def observed_proxies(self) -> frozenset:
        out = set()
        for _, _, mapping in self.archive:
            out.update(o for o in mapping.values() if isinstance(o, Proxy))
        return frozenset(out)


@dataclass
class LoopResult:
    state: LoopState
    history: list  # distinct points-to sets, in order of appearance
    transcript: list  # lines
    passes: int
    executions: int
    reported: list  # every counterexample edge emitted, in order

    @property
    def pi(self) -> PointsToSet:
        return self.state.pi

    def transcript_text(self) -> str:
        return "".join(line + "\n" for line in self.transcript)


def history_bound(b: Bundle, specs=frozenset()) -> int:
    """Largest number of distinct points-to sets a run can go through.

    One initial set plus at most one new set per possible missing edge:
    program variables times (program sites + proxies), where proxies range
    over classes times subsets of missing functions and callback slots.
    """
    variables = len(b.visible_variables())
    sites = len(b.program_sites())
    elements = sum(1 for fn in b.library_functions if fn.name not in specs)
    elements += sum(len(fn.params) for fn in b.callbacks)
    return 1 + variables * (sites + len(b.classes) * 2**elements)


def run_loop(
    b: Bundle,
    specs=frozenset(),
    schedules: Iterable[Sequence[bool]] = ((),),
    scheme: str = "opt",
    max_passes: Optional[int] = None,
    pi_miss: Optional[MissingEdgeSet] = None,
    trust_filter: bool = True,
) -> LoopResult:
    specs = frozenset(specs)
    schedules = [tuple(s) for s in schedules]
    miss = pi_miss or MissingEdgeSet()
    pi = compute_pointsto(b, specs, miss)
    state = LoopState(miss, pi, make_scheme(scheme, b, specs, pi))
    history = [pi]
    seen = {pi.edges}
    transcript = [f"PI {pi.digest()}"]
    reported = []
    passes = executions = 0
    while max_passes is None or passes < max_passes:
        passes += 1
        silent = True
        for sched in schedules:
            while True:
                reports = execute(b, state.scheme, sched)
                executions += 1
                mapping = build_object_mapping(b, specs, reports)
                state.archive.append((sched, reports, mapping))
                ces = derive_counterexamples(b, specs, reports, mapping, state.pi, trust_filter)
                new_edges = ces.edges - state.pi_miss.edges
                new_reached = ces.reached - state.pi_miss.reached
                if not new_edges and not new_reached:
                    break
                silent = False
                state.iteration += 1
                transcript.append(f"ITER {state.iteration} {format_schedule(sched)}")
                for e in sorted(new_edges, key=lambda e: edge_line(*e)):
                    transcript.append(ce_line(e))
                    reported.append(e)
                for fn in sorted(new_reached):
                    transcript.append(f"REACH {fn}")
                state.pi_miss = state.pi_miss.union(new_edges, new_reached)
                state.pi = compute_pointsto(b, specs, state.pi_miss)
                new_scheme = make_scheme(scheme, b, specs, state.pi)
                diff = scheme_diff(state.scheme, new_scheme)
                for sign, part in (("+", diff["added"]), ("-", diff["removed"])):
                    for kind in MonitoringScheme.KINDS:
                        for item in sorted(part[kind], key=str):
                            transcript.append(f"MON {sign} {kind} {_item_text(item)}")
                state.scheme = new_scheme
                transcript.append(f"PI {state.pi.digest()}")
                if state.pi.edges not in seen:
                    seen.add(state.pi.edges)
                    history.append(state.pi)
        if silent:
            transcript.append(f"QUIESCENT {passes}")
            break
    return LoopResult(state, history, transcript, passes, executions, reported)


def _item_text(item) -> str:
    if isinstance(item, tuple):
        return " ".join(str(x) for x in item)
    return str(item)
