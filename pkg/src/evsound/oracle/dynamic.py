"""Ground truth read off full execution traces."""

from __future__ import annotations

from dataclasses import dataclass

from ..dynexec import AllocEvent, BindEvent, EnterEvent, ExitEvent, execute_traced
from ..ir.model import Alloc, Bundle, callback_slot, walk
from ..pta import PointsToSet, Proxy, Site, visible_blocks


@dataclass(frozen=True)
class IdealProxy:
    """Abstract stand-in named by the program variables that held the object."""

    cls: str
    footprint: frozenset

    def token(self) -> str:
        return f"ideal:{self.cls}:{{{','.join(sorted(self.footprint))}}}"


@dataclass
class DynamicFacts:
    edges: set  # (qualified var, oid)
    origins: dict  # oid -> allocating statement id
    classes: dict  # oid -> class
    delivered: set  # (qualified var, oid) bound by a missing return or callback slot
    footprint: dict  # oid -> set of functions / callback slots that delivered it
    dyn_footprint: dict  # oid -> set of variables that ever held it
    trace: list


def _stmt_callees(b: Bundle) -> dict:
    from ..ir.model import Call

    return {s.id: s.callee for _, s in b.program_statements() if isinstance(s, Call)}


def dynamic_pointsto_oracle(b: Bundle, sched, specs=frozenset()) -> DynamicFacts:
    """Every program-variable binding of one execution, with origins.

    ``delivered`` and ``footprint`` only count deliveries across the boundary
    to missing code: results of calls to library functions without an active
    specification, and parameters of callbacks invoked by library code.
    """
    ex = execute_traced(b, sched)
    callees = _stmt_callees(b)
    edges, delivered = set(), set()
    origins, classes = {}, {}
    footprint: dict = {}
    dyn: dict = {}
    stack: list = []
    for ev in ex.trace:
        if isinstance(ev, AllocEvent):
            origins[ev.oid] = ev.origin
            classes[ev.oid] = ex.heap[ev.oid].cls
        elif isinstance(ev, EnterEvent):
            stack.append(ev.fn)
        elif isinstance(ev, ExitEvent):
            stack.pop()
        elif isinstance(ev, BindEvent):
            edges.add((ev.var, ev.oid))
            dyn.setdefault(ev.oid, set()).add(ev.var)
            elem = None
            if ev.site.startswith("cb:"):
                _, fn, idx = ev.site.split(":")
                caller = stack[-2] if len(stack) > 1 else None
                if (
                    b.function(fn).is_callback
                    and caller is not None
                    and b.function(caller).is_library
                ):
                    elem = callback_slot(fn, int(idx))
            elif ev.site in callees:
                callee = callees[ev.site]
                if b.is_missing(callee, specs):
                    elem = callee
            if elem:
                delivered.add((ev.var, ev.oid))
                footprint.setdefault(ev.oid, set()).add(elem)
    return DynamicFacts(edges, origins, classes, delivered, footprint, dyn, ex.trace)


def visible_sites(b: Bundle, specs=frozenset()) -> set:
    return {
        s.id for _, blk in visible_blocks(b, specs) for s in walk(blk) if isinstance(s, Alloc)
    }


def abstract_object(b: Bundle, specs, facts: DynamicFacts, oid: int, ideal: bool = False):
    """Abstract object of a concrete one, by its recorded origin.

    Visible allocations map to their site; anything else maps to its
    function-footprint proxy (or, with ``ideal``, to its dynamic footprint).
    Returns ``None`` when no proxy can be formed.
    """
    origin = facts.origins[oid]
    cls = facts.classes[oid]
    if origin in visible_sites(b, specs):
        return Site(origin, cls)
    if ideal:
        fp = facts.dyn_footprint.get(oid)
        return IdealProxy(cls, frozenset(fp)) if fp else None
    fp = facts.footprint.get(oid)
    return Proxy(cls, frozenset(fp)) if fp else None


def abstract_edges(b: Bundle, specs, facts: DynamicFacts, ideal: bool = False, only_delivered=False):
    out = set()
    source = facts.delivered if only_delivered else facts.edges
    for var, oid in source:
        a = abstract_object(b, specs, facts, oid, ideal)
        if a is not None:
            out.add((var, a))
    return out


def library_allocated(b: Bundle, specs, facts: DynamicFacts) -> set:
    sites = visible_sites(b, specs)
    return {oid for oid, origin in facts.origins.items() if origin not in sites}


def ideal_proxy_mapping(b: Bundle, sched, specs=frozenset()) -> dict:
    """oid -> variables that ever held it, for objects allocated out of sight."""
    facts = dynamic_pointsto_oracle(b, sched, specs)
    return {
        oid: frozenset(facts.dyn_footprint.get(oid, ()))
        for oid in library_allocated(b, specs, facts)
        if facts.dyn_footprint.get(oid)
    }


def function_footprints(b: Bundle, sched, specs=frozenset()) -> dict:
    facts = dynamic_pointsto_oracle(b, sched, specs)
    return {
        oid: frozenset(fp)
        for oid, fp in facts.footprint.items()
        if oid in library_allocated(b, specs, facts)
    }


def oracle_counterexamples(b: Bundle, specs, pi: PointsToSet, sched, facts=None) -> set:
    """Dynamic edges of one execution whose abstraction is absent from ``pi``."""
    facts = facts or dynamic_pointsto_oracle(b, sched, specs)
    return {e for e in abstract_edges(b, specs, facts) if e not in pi.edges}
