"""Flow- and context-insensitive inclusion-based points-to analysis.

Only code the analysis can see is analysed: program functions and the
specification bodies of *active* library functions.  Calls into visible code
are parameter/return assignments, calls into anything else are ignored; the
gaps are filled by externally supplied edges (``pi_miss``) that are injected
verbatim.
"""

from __future__ import annotations

import hashlib
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .ir.model import (
    Alloc,
    Assign,
    Bundle,
    Call,
    Function,
    Load,
    Return,
    Store,
    qualify,
    split_var,
    walk,
)


@dataclass(frozen=True)
class Site:
    id: str
    cls: str

    def token(self) -> str:
        return f"site:{self.id}"

    def __str__(self) -> str:
        return self.token()


@dataclass(frozen=True)
class Proxy:
    cls: str
    footprint: frozenset

    def __post_init__(self):
        if not self.footprint:
            raise ValueError("proxy footprint must be nonempty")
        object.__setattr__(self, "footprint", frozenset(self.footprint))

    def token(self) -> str:
        return f"proxy:{self.cls}:{{{','.join(sorted(self.footprint))}}}"

    def __str__(self) -> str:
        return self.token()

    def __lt__(self, other):
        return obj_key(self) < obj_key(other)


AbstractObject = Union[Site, Proxy]
Edge = tuple  # (qualified var, AbstractObject)


def obj_key(o) -> str:
    return o.token()


def object_class(o) -> str:
    return o.cls


@dataclass(frozen=True)
class MissingEdgeSet:
    """Externally observed edges plus callbacks known to be reached."""

    edges: frozenset = frozenset()
    reached: frozenset = frozenset()

    def union(self, edges: Iterable = (), reached: Iterable = ()) -> "MissingEdgeSet":
        return MissingEdgeSet(self.edges | frozenset(edges), self.reached | frozenset(reached))

    def __len__(self) -> int:
        return len(self.edges)

    def __le__(self, other: "MissingEdgeSet") -> bool:
        return self.edges <= other.edges and self.reached <= other.reached


def as_missing(pi_miss) -> MissingEdgeSet:
    if pi_miss is None:
        return MissingEdgeSet()
    if isinstance(pi_miss, MissingEdgeSet):
        return pi_miss
    return MissingEdgeSet(frozenset(pi_miss))


@dataclass(frozen=True)
class PointsToSet:
    """Fixpoint result.

    ``edges`` holds program-variable facts only (what clients may query);
    ``all_edges`` also carries the specification-local variables.
    """

    edges: frozenset
    all_edges: frozenset = frozenset()
    specs: frozenset = frozenset()
    reachable: frozenset = frozenset()
    program_vars: frozenset = frozenset()
    _index: dict = field(default=None, compare=False, hash=False, repr=False)

    def pts(self, var: str) -> frozenset:
        idx = self._index
        if idx is None:
            idx = defaultdict(set)
            for v, o in self.edges:
                idx[v].add(o)
            idx = {k: frozenset(s) for k, s in idx.items()}
            object.__setattr__(self, "_index", idx)
        return idx.get(var, frozenset())

    def objects(self) -> frozenset:
        return frozenset(o for _, o in self.edges)

    def __contains__(self, edge) -> bool:
        return edge in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(sorted(self.edges, key=lambda e: (e[0], obj_key(e[1]))))

    def digest(self) -> str:
        return hashlib.sha256(serialize_pointsto(self).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# constraint extraction


def visible_blocks(b: Bundle, specs) -> list[tuple[Function, tuple]]:
    """(function, block) pairs the analysis can read."""
    out = []
    for fn in b.functions:
        if fn.is_program:
            out.append((fn, fn.body or ()))
        elif fn.name in specs and fn.spec is not None:
            out.append((fn, fn.spec))
    return out


def return_vars(block) -> list[str]:
    return [s.var for s in walk(block) if isinstance(s, Return)]


@dataclass
class Constraints:
    allocs: list = field(default_factory=list)  # (var, obj)
    copies: list = field(default_factory=list)  # (dst, src)
    loads: list = field(default_factory=list)  # (dst, base, field)
    stores: list = field(default_factory=list)  # (base, field, src)
    calls: dict = field(default_factory=lambda: defaultdict(set))  # caller -> callees


def extract_constraints(b: Bundle, specs) -> Constraints:
    specs = frozenset(specs)
    visible = {fn.name: block for fn, block in visible_blocks(b, specs)}
    rets = {name: return_vars(block) for name, block in visible.items()}
    c = Constraints()
    for fn, block in visible_blocks(b, specs):
        q = lambda v, _n=fn.name: qualify(_n, v)  # noqa: E731
        for s in walk(block):
            if isinstance(s, Alloc):
                c.allocs.append((q(s.target), Site(s.id, s.cls)))
            elif isinstance(s, Assign):
                c.copies.append((q(s.target), q(s.source)))
            elif isinstance(s, Load):
                c.loads.append((q(s.target), q(s.base), s.field))
            elif isinstance(s, Store):
                c.stores.append((q(s.base), s.field, q(s.source)))
            elif isinstance(s, Call) and s.callee in visible:
                callee = b.function(s.callee)
                c.calls[fn.name].add(s.callee)
                for arg, param in zip(s.args, callee.params):
                    c.copies.append((qualify(s.callee, param), q(arg)))
                if s.target:
                    for r in rets[s.callee]:
                        c.copies.append((q(s.target), qualify(s.callee, r)))
    return c


def solve(c: Constraints, seeds: Iterable = ()) -> dict[str, set]:
    """Worklist propagation; returns var -> set of objects."""
    pts: dict[str, set] = defaultdict(set)
    heap: dict[tuple, set] = defaultdict(set)
    succ: dict[str, set] = defaultdict(set)
    loads_on: dict[str, list] = defaultdict(list)
    stores_on: dict[str, list] = defaultdict(list)
    for dst, src in c.copies:
        succ[src].add(dst)
    for dst, base, f in c.loads:
        loads_on[base].append((dst, f))
    for base, f, src in c.stores:
        stores_on[base].append((f, src))
        stores_on[src].append((f, None, base))

    work: list[tuple[str, object]] = []

    def add(var, obj):
        if obj not in pts[var]:
            pts[var].add(obj)
            work.append((var, obj))

    for var, obj in c.allocs:
        add(var, obj)
    for var, obj in seeds:
        add(var, obj)

    heap_readers: dict[tuple, set] = defaultdict(set)  # (obj, field) -> dst vars

    while work:
        var, obj = work.pop()
        for dst in succ[var]:
            add(dst, obj)
        # var used as base of loads: read the object's field
        for dst, f in loads_on[var]:
            if dst not in heap_readers[(obj, f)]:
                heap_readers[(obj, f)].add(dst)
                for o2 in list(heap[(obj, f)]):
                    add(dst, o2)
        for entry in stores_on[var]:
            if len(entry) == 2:
                # var is the base of a store: existing sources flow in
                f, src = entry
                targets = [obj]
                values = list(pts[src])
            else:
                # var is the source of a store: push into each base object
                f, _, base = entry
                targets = list(pts[base])
                values = [obj]
            for t in targets:
                for v in values:
                    if v not in heap[(t, f)]:
                        heap[(t, f)].add(v)
                        for dst in heap_readers[(t, f)]:
                            add(dst, v)
    return pts


def _reachable(b: Bundle, calls: dict, reached: Iterable) -> frozenset:
    seen = set()
    todo = [b.entry, *reached]
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        todo.extend(calls.get(n, ()))
    return frozenset(seen)


def compute_pointsto(b: Bundle, specs=frozenset(), pi_miss=None) -> PointsToSet:
    specs = frozenset(specs)
    miss = as_missing(pi_miss)
    c = extract_constraints(b, specs)
    pts = solve(c, miss.edges)
    program_vars = frozenset(b.visible_variables())
    all_edges = frozenset((v, o) for v, objs in pts.items() for o in objs)
    edges = frozenset(e for e in all_edges if e[0] in program_vars)
    return PointsToSet(
        edges=edges,
        all_edges=all_edges,
        specs=specs,
        reachable=_reachable(b, c.calls, miss.reached),
        program_vars=program_vars,
    )


# ---------------------------------------------------------------------------
# clients


def resolve_var(pi: PointsToSet, name: str) -> str:
    """Accept ``fn.var`` or a bare variable name if it is unambiguous."""
    if name in pi.program_vars:
        return name
    if "." not in name:
        hits = sorted(v for v in pi.program_vars if split_var(v)[1] == name)
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise KeyError(f"ambiguous variable {name!r}: {', '.join(hits)}")
    raise KeyError(f"unknown variable {name!r}")


def points_to(pi: PointsToSet, x: str) -> frozenset:
    return pi.pts(resolve_var(pi, x))


def may_alias(pi: PointsToSet, x: str, y: str) -> bool:
    return bool(points_to(pi, x) & points_to(pi, y))


def points_to_classes(pi: PointsToSet, x: str) -> set[str]:
    return {object_class(o) for o in points_to(pi, x)}


def taint_flows(b: Bundle, pi: PointsToSet, specs=None) -> set[tuple[str, str]]:
    """(source, sink) pairs such that a source's result may reach a sink argument."""
    specs = pi.specs if specs is None else frozenset(specs)
    blocks = visible_blocks(b, specs)
    visible = {fn.name for fn, _ in blocks}
    rets = {fn.name: return_vars(block) for fn, block in blocks}
    by_obj: dict = defaultdict(set)
    for v, o in pi.all_edges:
        by_obj[o].add(v)
    pts: dict = defaultdict(set)
    for v, o in pi.all_edges:
        pts[v].add(o)

    copies = defaultdict(set)
    stores = []  # (base, field, src)
    loads = []  # (dst, base, field)
    for fn, block in blocks:
        for s in walk(block):
            q = lambda v, _n=fn.name: qualify(_n, v)  # noqa: E731
            if isinstance(s, Assign):
                copies[q(s.source)].add(q(s.target))
            elif isinstance(s, Load):
                loads.append((q(s.target), q(s.base), s.field))
            elif isinstance(s, Store):
                stores.append((q(s.base), s.field, q(s.source)))
            elif isinstance(s, Call) and s.callee in visible:
                callee = b.function(s.callee)
                for arg, param in zip(s.args, callee.params):
                    copies[q(arg)].add(qualify(s.callee, param))
                if s.target:
                    for r in rets[s.callee]:
                        copies[qualify(s.callee, r)].add(q(s.target))

    flows = set()
    for source in sorted(b.sources):
        tainted = set()
        for fn, block in blocks:
            for s in walk(block):
                if isinstance(s, Call) and s.callee == source and s.target:
                    tainted.add(qualify(fn.name, s.target))
        work = list(tainted)
        while work:
            v = work.pop()
            nxt = set(copies[v])
            for o in pts[v]:
                nxt |= by_obj[o]
            for base, f, src in stores:
                if src == v:
                    for dst, lbase, lf in loads:
                        if lf == f and pts[base] & pts[lbase]:
                            nxt.add(dst)
            for n in nxt - tainted:
                tainted.add(n)
                work.append(n)
        for fn, block in blocks:
            for s in walk(block):
                if isinstance(s, Call) and s.callee in b.sinks:
                    if any(qualify(fn.name, a) in tainted for a in s.args):
                        flows.add((source, s.callee))
    return flows


# ---------------------------------------------------------------------------
# serialization

_PROXY_RE = re.compile(r"^proxy:(?P<cls>[^:]+):\{(?P<fp>[^}]*)\}$")


def edge_line(var: str, obj) -> str:
    return f"{var} -> {obj.token()}"


def serialize_edges(edges: Iterable) -> str:
    lines = sorted(edge_line(v, o) for v, o in edges)
    return "".join(line + "\n" for line in lines)


def serialize_pointsto(pi: PointsToSet) -> str:
    return serialize_edges(pi.edges)


def parse_object(token: str, classes: Optional[dict] = None):
    """Inverse of ``token()``; Site classes come from ``classes`` (id -> class)."""
    if token.startswith("site:"):
        sid = token[5:]
        cls = (classes or {}).get(sid, "?")
        return Site(sid, cls)
    m = _PROXY_RE.match(token)
    if not m:
        raise ValueError(f"bad abstract object {token!r}")
    fp = frozenset(x for x in m.group("fp").split(",") if x)
    return Proxy(m.group("cls"), fp)


def parse_edges(text: str, classes: Optional[dict] = None) -> frozenset:
    edges = set()
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        var, sep, tok = line.partition(" -> ")
        if not sep:
            raise ValueError(f"line {n}: expected 'var -> object'")
        edges.add((var.strip(), parse_object(tok.strip(), classes)))
    return frozenset(edges)


def pointsto_from_text(
    text: str, classes: Optional[dict] = None, program_vars: Iterable = ()
) -> PointsToSet:
    """Rebuild a query-only points-to set from its serialized form."""
    edges = parse_edges(text, classes)
    return PointsToSet(
        edges=edges,
        all_edges=edges,
        program_vars=frozenset(program_vars) | frozenset(v for v, _ in edges),
    )
