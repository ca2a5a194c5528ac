"""Library constructions showing that each monitor of the optimized scheme matters.

Dropping a call monitor: the called function returns a fresh object (only
when the schedule says so) and every other library function does nothing, so
that return is the only place the object is ever seen.

Dropping an allocation monitor: a library function receiving the object
returns its parameter; without the allocation report the returned object can
only be mistaken for a library object.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..dynexec import LibraryCallEvent, ScheduleExhausted, execute_traced, run
from ..ir.model import Alloc, Branch, Bundle, Call, Function, Return, qualify
from ..loop import build_object_mapping, derive_counterexamples
from ..monitor import MonitoringScheme, monitoring_opt
from ..pta import PointsToSet, Site, compute_pointsto
from .dynamic import abstract_edges, dynamic_pointsto_oracle

SEARCH_LIMIT = 4096


class AdversaryNotFound(RuntimeError):
    pass


@dataclass
class Adversary:
    bundle: Bundle
    schedule: tuple
    dropped: tuple  # (kind, item)
    oracle_ces: frozenset
    reduced_reports: list
    genuine_reported: frozenset
    full_scheme_caught: bool


def _noop_library(b: Bundle) -> dict:
    return {fn.name: () for fn in b.library_functions}


def _install(b: Bundle, bodies: dict) -> Bundle:
    out = b
    for name, body in bodies.items():
        fn = b.function(name)
        out = out.with_function(Function(fn.name, fn.kind, fn.params, tuple(body), fn.spec, fn.overrides))
    return out


def fresh_return_body(fn: Function, cls: str) -> tuple:
    """``branch { r = new cls; return r }`` with an empty else arm."""
    r = "adv_r"
    return (
        Branch(
            f"{fn.name}#0",
            (Alloc(f"adv_{fn.name}", r, cls), Return(f"{fn.name}#2", r)),
            (),
        ),
    )


def param_return_body(fn: Function, index: int) -> tuple:
    return (Branch(f"{fn.name}#0", (Return(f"{fn.name}#1", fn.params[index]),), ()),)


def _reachable_program_calls(b: Bundle, pi: PointsToSet):
    for fn, s in b.program_statements():
        if fn.name in pi.reachable and isinstance(s, Call):
            yield fn, s


def observed_leaks(b: Bundle, limit: int = SEARCH_LIMIT) -> set:
    """(call site, argument index, allocation site) seen with a do-nothing library."""
    lib = _install(b, _noop_library(b))
    out = set()
    for sched in guided_schedules(lib, "", "", limit):
        ex = execute_traced(lib, sched)
        origin = {oid: o.origin for oid, o in ex.heap.items()}
        for ev in ex.trace:
            if isinstance(ev, LibraryCallEvent):
                for i, a in enumerate(ev.args):
                    if a is not None:
                        out.add((ev.site, i, origin[a]))
    return out


def candidate_libraries(b: Bundle, specs, pi: PointsToSet, dropped, leaks=None):
    """Library variants built for one dropped monitor, most direct first.

    Yields ``(bundle, call site, branch id)``.  For allocation monitors only
    call sites where the object was actually seen crossing into the library
    are used (``leaks``, computed with a do-nothing library when omitted).
    """
    kind, item = dropped
    if kind == "call":
        fn, stmt = b.program_stmt_map[item]
        callee = b.function(stmt.callee)
        for cls in b.classes:
            bodies = _noop_library(b)
            bodies[callee.name] = fresh_return_body(callee, cls)
            yield _install(b, bodies), item, f"{callee.name}#0"
    elif kind == "alloc":
        leaks = observed_leaks(b) if leaks is None else leaks
        for fn, stmt in _reachable_program_calls(b, pi):
            callee = b.function(stmt.callee)
            if not stmt.target or not b.is_missing(stmt.callee, specs):
                continue
            known = any(isinstance(o, Site) and o.id == item for o in pi.pts(qualify(fn.name, stmt.target)))
            for i, a in enumerate(stmt.args):
                if (stmt.id, i, item) in leaks and not known:
                    bodies = _noop_library(b)
                    bodies[callee.name] = param_return_body(callee, i)
                    yield _install(b, bodies), stmt.id, f"{callee.name}#0"
    else:
        raise AdversaryNotFound(f"no construction for {kind} monitors")


def guided_schedules(lib: Bundle, branch: str, site: str, limit: int = SEARCH_LIMIT):
    """Schedules taking the library branch exactly at call ``site``.

    Program branches are explored both ways; the constructed library branch
    is taken only when its innermost caller is ``site``.
    """
    empty = MonitoringScheme()
    stack = [()]
    seen = 0
    while stack and seen < limit:
        prefix = stack.pop()
        try:
            run(lib, empty, prefix)
        except ScheduleExhausted as e:
            if e.branch == branch:
                stack.append(prefix + (bool(e.call_sites) and e.call_sites[-1] == site,))
            else:
                stack.append(prefix + (True,))
                stack.append(prefix + (False,))
            continue
        seen += 1
        yield prefix


def genuine_reports(b, specs, reports, pi, facts) -> frozenset:
    """Counterexamples derivable from the reports that the trace confirms."""
    mapping = build_object_mapping(b, specs, reports)
    ces = derive_counterexamples(b, specs, reports, mapping, pi, trust_filter=False)
    truth = abstract_edges(b, specs, facts)
    return frozenset(e for e in ces.edges | ces.deferred if e in truth)


def adversarial_drop_library(b: Bundle, dropped, specs=frozenset()) -> Adversary:
    """A library and schedule on which the scheme minus ``dropped`` sees nothing.

    Both schemes are taken against the optimistic points-to set of ``b`` with
    no observed edges.  The returned run has at least one oracle
    counterexample, while the reduced scheme yields no report that confirms
    any of them.
    """
    specs = frozenset(specs)
    pi = compute_pointsto(b, specs)
    scheme = monitoring_opt(b, specs, pi)
    kind, item = dropped
    if item not in getattr(scheme, kind, ()):
        raise ValueError(f"{dropped!r} is not in the optimized scheme")
    reduced = scheme.without(kind, item)
    for lib, site, branch in candidate_libraries(b, specs, pi, dropped):
        for sched in guided_schedules(lib, branch, site):
            facts = dynamic_pointsto_oracle(lib, sched, specs)
            truth = abstract_edges(lib, specs, facts)
            oracle_ces = frozenset(e for e in truth if e not in pi.edges)
            if not oracle_ces:
                continue
            reports = run(lib, reduced, sched).reports
            genuine = genuine_reports(lib, specs, reports, pi, facts)
            if genuine:
                continue
            full = run(lib, scheme, sched).reports
            caught = bool(genuine_reports(lib, specs, full, pi, facts))
            return Adversary(lib, sched, dropped, oracle_ces, reports, genuine, caught)
    raise AdversaryNotFound(f"no library defeats the scheme without {dropped!r}")


def droppable_monitors(b: Bundle, specs=frozenset(), excluded=None) -> list:
    """Monitors of the optimized scheme a construction applies to.

    Call monitors on reachable calls that bind a result.  Allocation
    monitors whose object is seen, in some execution, crossing into a
    missing function at a call that binds a result to a variable not
    already pointing to the site.  Monitors left out are appended to
    ``excluded`` as ``(monitor, reason)``.
    """
    specs = frozenset(specs)
    pi = compute_pointsto(b, specs)
    scheme = monitoring_opt(b, specs, pi)
    leaks = observed_leaks(b) if scheme.alloc else set()
    out = []
    for c in sorted(scheme.call):
        fn, stmt = b.program_stmt_map[c]
        if stmt.target and fn.name in pi.reachable:
            out.append(("call", c))
        elif excluded is not None:
            excluded.append((("call", c), "unreachable or result unused"))
    for o in sorted(scheme.alloc):
        fn, _ = b.program_stmt_map[o]
        if fn.name not in pi.reachable:
            reason = "unreachable"
        elif not any(l[2] == o for l in leaks):
            reason = "never passed to missing code in any execution"
        elif any(True for _ in candidate_libraries(b, specs, pi, ("alloc", o), leaks)):
            out.append(("alloc", o))
            continue
        else:
            reason = "every receiving call binds a variable already pointing to it"
        if excluded is not None:
            excluded.append((("alloc", o), reason))
    return out

