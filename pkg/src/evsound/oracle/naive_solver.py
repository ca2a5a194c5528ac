"""Whole-program reference analysis.

Deliberately written as plain rule iteration over sets (recompute every rule
until nothing changes), sharing no code with the worklist solver it checks.
The load/store rule is applied in its literal form: ``x = y.f`` and
``z.f = w`` with ``y`` and ``z`` sharing an object give ``x`` every object of
``w``.
"""

from __future__ import annotations

from ..ir.model import Alloc, Assign, Bundle, Call, Load, Return, Store, walk
from ..pta import PointsToSet, Site


def _blocks(b: Bundle, use_specs=frozenset()):
    for fn in b.functions:
        if fn.is_program:
            yield fn, fn.body or ()
        elif fn.name in use_specs:
            yield fn, fn.spec or ()
        else:
            yield fn, fn.body or ()


def naive_fixpoint(b: Bundle, blocks, seeds=()) -> dict:
    blocks = list(blocks)
    rets = {fn.name: [s.var for s in walk(blk) if isinstance(s, Return)] for fn, blk in blocks}
    allocs, copies, loads, stores = [], [], [], []
    for fn, blk in blocks:
        n = fn.name
        for s in walk(blk):
            if isinstance(s, Alloc):
                allocs.append((f"{n}.{s.target}", Site(s.id, s.cls)))
            elif isinstance(s, Assign):
                copies.append((f"{n}.{s.target}", f"{n}.{s.source}"))
            elif isinstance(s, Load):
                loads.append((f"{n}.{s.target}", f"{n}.{s.base}", s.field))
            elif isinstance(s, Store):
                stores.append((f"{n}.{s.base}", s.field, f"{n}.{s.source}"))
            elif isinstance(s, Call) and s.callee in rets:
                callee = b.function(s.callee)
                for a, p in zip(s.args, callee.params):
                    copies.append((f"{s.callee}.{p}", f"{n}.{a}"))
                if s.target:
                    for r in rets[s.callee]:
                        copies.append((f"{n}.{s.target}", f"{s.callee}.{r}"))
    facts = set(allocs) | set(seeds)
    while True:
        pts: dict = {}
        for v, o in facts:
            pts.setdefault(v, set()).add(o)
        new = set(facts)
        for dst, src in copies:
            for o in pts.get(src, ()):
                new.add((dst, o))
        for x, y, f in loads:
            for z, g, w in stores:
                if f == g and pts.get(y, set()) & pts.get(z, set()):
                    for o in pts.get(w, ()):
                        new.add((x, o))
        if new == facts:
            return pts
        facts = new


def whole_program_pta(b: Bundle) -> PointsToSet:
    """Points-to set of program variables with every library body visible."""
    pts = naive_fixpoint(b, _blocks(b))
    program_vars = frozenset(b.visible_variables())
    all_edges = frozenset((v, o) for v, objs in pts.items() for o in objs)
    return PointsToSet(
        edges=frozenset(e for e in all_edges if e[0] in program_vars),
        all_edges=all_edges,
        program_vars=program_vars,
    )


def reference_pointsto(b: Bundle, specs=frozenset(), seeds=()) -> frozenset:
    """Program-variable edges of the optimistic analysis, recomputed naively."""
    blocks = [
        (fn, fn.body or ()) if fn.is_program else (fn, fn.spec)
        for fn in b.functions
        if fn.is_program or (fn.name in specs and fn.spec is not None)
    ]
    pts = naive_fixpoint(b, blocks, seeds)
    program_vars = b.visible_variables()
    return frozenset((v, o) for v, objs in pts.items() for o in objs if v in program_vars)
