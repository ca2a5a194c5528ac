"""Specification inference from a single missing points-to edge.

Every missing library function is replaced by a *pessimistic* body; the
analysis then searches for a cheapest set of pessimistic statements that
still derives the target edge.  The chosen statements, grouped by function,
are the candidate specifications.

Two pessimistic bodies are available:

restricted
    receiver-field only::

        this.g = ob      (one per non-receiver parameter)
        r = ob           (one per non-receiver parameter)
        r = this
        r = this.g
        return r         (free)

general
    every argument is copied into a single local ``ob`` (free), then::

        ob.f = ob
        ob = ob.f
        return ob
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .ir.model import (
    LIBRARY,
    Alloc,
    Assign,
    Bundle,
    Call,
    FieldDecl,
    Function,
    Load,
    Return,
    Store,
    qualify,
    walk,
)
from .ir.printer import print_spec
from .pta import MissingEdgeSet, Proxy, Site, as_missing, compute_pointsto, visible_blocks

RESTRICTED = "restricted"
GENERAL = "general"
MODES = (RESTRICTED, GENERAL)


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class PessStmt:
    """One statement of a pessimistic body."""

    fn: str
    index: int
    op: str  # store | copy | load | return | bind
    args: tuple  # op-specific, unqualified variable names and field
    cost: int

    def text(self) -> str:
        a = self.args
        if self.op == "store":
            return f"{a[0]}.{a[1]} = {a[2]}"
        if self.op in ("copy", "bind"):
            return f"{a[0]} = {a[1]}"
        if self.op == "load":
            return f"{a[0]} = {a[1]}.{a[2]}"
        return f"return {a[0]}"

    def key(self):
        return (self.fn, self.index)


@dataclass(frozen=True)
class InferredSpec:
    function: str
    statements: tuple  # PessStmt, in body order
    cost: int

    def texts(self) -> tuple[str, ...]:
        return tuple(s.text() for s in self.statements)


@dataclass(frozen=True)
class InferenceResult:
    specs: tuple  # InferredSpec per function, sorted by name
    cost: int
    fields: tuple  # pessimistic field names used

    def by_function(self) -> dict:
        return {s.function: s.texts() for s in self.specs}


def _fresh(name: str, taken) -> str:
    if name not in taken:
        return name
    for k in itertools.count(1):
        cand = f"{name}{k}"
        if cand not in taken:
            return cand
    raise AssertionError  # pragma: no cover


def pessimistic_field(b: Bundle, mode: str) -> str:
    return _fresh("g" if mode == RESTRICTED else "f", set(b.field_owner))


def pessimistic_body(fn: Function, mode: str, fld: str) -> list[PessStmt]:
    params = list(fn.params)
    out: list[PessStmt] = []

    def add(op, args, cost=1):
        out.append(PessStmt(fn.name, len(out), op, tuple(args), cost))

    if mode == RESTRICTED:
        if not params:
            return out
        this, obs = params[0], params[1:]
        r = _fresh("r", set(params))
        for ob in obs:
            add("store", (this, fld, ob))
        for ob in obs:
            add("copy", (r, ob))
        add("copy", (r, this))
        add("load", (r, this, fld))
        add("return", (r,), 0)
    elif mode == GENERAL:
        ob = _fresh("ob", set(params))
        for p in params:
            add("bind", (ob, p), 0)
        add("store", (ob, fld, ob))
        add("load", (ob, ob, fld))
        add("return", (ob,), 1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out


def pessimistic_statements(b: Bundle, specs, mode: str) -> list[PessStmt]:
    fld = pessimistic_field(b, mode)
    out = []
    for fn in b.library_functions:
        if fn.name not in specs:
            out.extend(pessimistic_body(fn, mode, fld))
    return out


# ---------------------------------------------------------------------------
# labelled derivation


class _Rules:
    """Ground rules of the analysis over a program with pessimistic bodies.

    ``copies``: (dst, src, stmt|None); ``loads``: (dst, base, field, stmt|None);
    ``stores``: (base, field, src, stmt|None).  ``stmt`` is the pessimistic
    statement the rule instance depends on, if any.
    """

    def __init__(self, b: Bundle, specs, pess: list[PessStmt], mode: str):
        self.allocs = []
        self.copies = []
        self.loads = []
        self.stores = []
        by_fn: dict[str, list[PessStmt]] = {}
        for s in pess:
            by_fn.setdefault(s.fn, []).append(s)
        blocks = visible_blocks(b, specs)
        visible_rets = {
            fn.name: [qualify(fn.name, s.var) for s in walk(block) if isinstance(s, Return)]
            for fn, block in blocks
        }
        for fn, block in blocks:
            q = lambda v, _n=fn.name: qualify(_n, v)  # noqa: E731
            for s in walk(block):
                if isinstance(s, Alloc):
                    self.allocs.append((q(s.target), Site(s.id, s.cls)))
                elif isinstance(s, Assign):
                    self.copies.append((q(s.target), q(s.source), None))
                elif isinstance(s, Load):
                    self.loads.append((q(s.target), q(s.base), s.field, None))
                elif isinstance(s, Store):
                    self.stores.append((q(s.base), s.field, q(s.source), None))
                elif isinstance(s, Call):
                    callee = b.function(s.callee)
                    if s.callee in visible_rets:
                        for a, p in zip(s.args, callee.params):
                            self.copies.append((qualify(s.callee, p), q(a), None))
                        if s.target:
                            for r in visible_rets[s.callee]:
                                self.copies.append((q(s.target), r, None))
                    elif s.callee in by_fn:
                        for a, p in zip(s.args, callee.params):
                            self.copies.append((qualify(s.callee, p), q(a), None))
                        if s.target:
                            for ps in by_fn[s.callee]:
                                if ps.op == "return":
                                    self.copies.append(
                                        (q(s.target), qualify(s.callee, ps.args[0]), ps)
                                    )
        for ps in pess:
            q = lambda v, _n=ps.fn: qualify(_n, v)  # noqa: E731
            a = ps.args
            if ps.op == "store":
                self.stores.append((q(a[0]), a[1], q(a[2]), ps))
            elif ps.op == "load":
                self.loads.append((q(a[0]), q(a[1]), a[2], ps))
            elif ps.op == "copy":
                self.copies.append((q(a[0]), q(a[1]), ps))
            elif ps.op == "bind":
                self.copies.append((q(a[0]), q(a[1]), ps))


def _label_key(label: frozenset):
    return (sum(s.cost for s in label), len(label), tuple(sorted(s.key() for s in label)))


def derive_labels(rules: _Rules, seeds: Iterable = ()) -> dict:
    """Best label per fact.

    Facts are ``("pt", var, obj)`` and ``("hp", obj, field, obj)``.  A label
    is the set of pessimistic statements used; facts are settled cheapest
    first and re-opened whenever a cheaper label turns up.
    """
    best: dict = {}
    heap: list = []
    tick = itertools.count()

    def offer(fact, label):
        key = _label_key(label)
        old = best.get(fact)
        if old is None or key < _label_key(old):
            best[fact] = label
            heapq.heappush(heap, (key, next(tick), fact))

    copies_from: dict = {}
    for dst, src, ps in rules.copies:
        copies_from.setdefault(src, []).append((dst, ps))
    loads_on: dict = {}
    for dst, base, f, ps in rules.loads:
        loads_on.setdefault(base, []).append((dst, f, ps))
    stores_base: dict = {}
    stores_src: dict = {}
    for base, f, src, ps in rules.stores:
        stores_base.setdefault(base, []).append((f, src, ps))
        stores_src.setdefault(src, []).append((base, f, ps))
    pts: dict = {}  # var -> set of objs with some label
    hp: dict = {}  # (obj, field) -> set of objs
    readers: dict = {}  # (obj, field) -> list of (dst, ps)

    def ps_set(ps):
        return frozenset() if ps is None else frozenset((ps,))

    for var, obj in rules.allocs:
        offer(("pt", var, obj), frozenset())
    for var, obj in seeds:
        offer(("pt", var, obj), frozenset())

    while heap:
        key, _, fact = heapq.heappop(heap)
        label = best[fact]
        if _label_key(label) != key:
            continue
        if fact[0] == "pt":
            _, var, obj = fact
            pts.setdefault(var, set()).add(obj)
            for dst, ps in copies_from.get(var, ()):
                offer(("pt", dst, obj), label | ps_set(ps))
            for dst, f, ps in loads_on.get(var, ()):
                readers.setdefault((obj, f), []).append((dst, ps, var))
                for o2 in hp.get((obj, f), ()):
                    offer(("pt", dst, o2), label | best[("hp", obj, f, o2)] | ps_set(ps))
            for f, src, ps in stores_base.get(var, ()):
                for o2 in pts.get(src, ()):
                    offer(("hp", obj, f, o2), label | best[("pt", src, o2)] | ps_set(ps))
            for base, f, ps in stores_src.get(var, ()):
                for o1 in pts.get(base, ()):
                    offer(("hp", o1, f, obj), best[("pt", base, o1)] | label | ps_set(ps))
        else:
            _, o1, f, o2 = fact
            hp.setdefault((o1, f), set()).add(o2)
            for dst, ps, base in readers.get((o1, f), ()):
                offer(("pt", dst, o2), best[("pt", base, o1)] | label | ps_set(ps))
    return best


# ---------------------------------------------------------------------------


def _check_target(b: Bundle, specs, target):
    var, obj = target
    if isinstance(obj, Proxy):
        raise InferenceError("proxy objects are not allocated by code; use infer_proxy_specs")
    if var not in b.visible_variables():
        raise InferenceError(f"unknown program variable {var!r}")
    ids = {s.id for fn, blk in visible_blocks(b, specs) for s in walk(blk) if isinstance(s, Alloc)}
    if obj.id not in ids:
        raise InferenceError(f"site {obj.id!r} is not allocated by visible code")


def infer_min_spec(
    b: Bundle,
    target,
    mode: str = RESTRICTED,
    specs=frozenset(),
    pi_miss=None,
    prune: bool = True,
) -> InferenceResult:
    """Cheapest set of pessimistic statements that derives ``target``."""
    specs = frozenset(specs)
    _check_target(b, specs, target)
    var, obj = target
    seeds = [e for e in as_missing(pi_miss).edges if e != (var, obj)]
    pess = pessimistic_statements(b, specs, mode)
    rules = _Rules(b, specs, pess, mode)
    best = derive_labels(rules, seeds)
    fact = ("pt", var, obj)
    if fact not in best:
        raise InferenceError(
            f"{var} -> {obj.token()} is not derivable even with {mode} pessimistic bodies"
        )
    chosen = set(best[fact])
    if prune:
        chosen = _prune(b, specs, mode, chosen, target, seeds)
    return _result(b, mode, chosen)


def _derives(b, specs, mode, chosen, target, seeds) -> bool:
    rules = _Rules(b, specs, list(chosen), mode)
    return ("pt",) + tuple(target) in derive_labels(rules, seeds)


def _prune(b, specs, mode, chosen: set, target, seeds) -> set:
    """Drop statements the derivation turns out not to need."""
    for s in sorted(chosen, key=lambda s: s.key(), reverse=True):
        if s.cost == 0 and s.op == "bind":
            continue
        trial = chosen - {s}
        if _derives(b, specs, mode, trial, target, seeds):
            chosen = trial
    return chosen


def _result(b: Bundle, mode: str, chosen) -> InferenceResult:
    by_fn: dict[str, list] = {}
    for s in chosen:
        by_fn.setdefault(s.fn, []).append(s)
    out = []
    for fn in sorted(by_fn):
        stmts = sorted(by_fn[fn], key=lambda s: s.index)
        out.append(InferredSpec(fn, tuple(stmts), sum(s.cost for s in stmts)))
    used = {s.args[1] for s in chosen if s.op == "store"} | {
        s.args[2] for s in chosen if s.op == "load"
    }
    return InferenceResult(tuple(out), sum(s.cost for s in chosen), tuple(sorted(used)))


# ---------------------------------------------------------------------------
# turning inferred statements into specification bodies


def spec_block(fn: Function, stmts) -> tuple:
    block = []
    for k, s in enumerate(stmts):
        sid = f"{fn.name}.spec#{k}"
        a = s.args
        if s.op == "store":
            block.append(Store(sid, a[0], a[1], a[2]))
        elif s.op in ("copy", "bind"):
            block.append(Assign(sid, a[0], a[1]))
        elif s.op == "load":
            block.append(Load(sid, a[0], a[1], a[2]))
        else:
            block.append(Return(sid, a[0]))
    return tuple(block)


def install_specs(b: Bundle, result: InferenceResult, specs=frozenset()):
    """Bundle with the inferred bodies attached, and the enlarged active set."""
    out = b
    fields = list(b.fields)
    for name in result.fields:
        if name not in b.field_owner:
            fields.append(FieldDecl(name, LIBRARY))
    out = out.replace(fields=tuple(fields))
    for spec in result.specs:
        fn = out.function(spec.function)
        out = out.with_function(
            Function(fn.name, fn.kind, fn.params, fn.body, spec_block(fn, spec.statements), fn.overrides)
        )
    return out, frozenset(specs) | {s.function for s in result.specs}


def validate_spec(b: Bundle, specs, candidate, target) -> bool:
    """Does the target follow with the candidate active and no observed edges?

    ``candidate`` is an :class:`InferenceResult` or a mapping from function
    name to a specification block.
    """
    if isinstance(candidate, InferenceResult):
        bundle, active = install_specs(b, candidate, specs)
    else:
        bundle, active = b, frozenset(specs)
        for name, block in dict(candidate).items():
            fn = bundle.function(name)
            bundle = bundle.with_function(
                Function(fn.name, fn.kind, fn.params, fn.body, tuple(block), fn.overrides)
            )
            active = active | {name}
        bundle = _declare_fields(bundle)
    pi = compute_pointsto(bundle, active, MissingEdgeSet())
    return tuple(target) in pi.edges


def _declare_fields(b: Bundle) -> Bundle:
    fields = list(b.fields)
    known = set(b.field_owner)
    for fn in b.library_functions:
        for s in walk(fn.spec or ()):
            if isinstance(s, (Load, Store)) and s.field not in known:
                fields.append(FieldDecl(s.field, LIBRARY))
                known.add(s.field)
    return b.replace(fields=tuple(fields))


def spec_files(b: Bundle, result: InferenceResult) -> dict[str, str]:
    """Text of one re-parseable spec file per function."""
    files = {}
    fields = [f for f in result.fields if f not in b.field_owner]
    for spec in result.specs:
        fn = b.function(spec.function)
        body = spec_block(fn, spec.statements)
        text = "".join(f"field {f} library\n" for f in fields)
        text += print_spec(Function(fn.name, fn.kind, fn.params, None, body))
        files[spec.function] = text
    return files


def restricted_as_general(b: Bundle, result: InferenceResult, specs=frozenset()) -> InferenceResult:
    """Re-express a restricted solution with general pessimistic statements.

    ``this.g = ob`` becomes ``ob.f = ob``; ``r = this.g`` becomes
    ``ob = ob.f``; any use of ``return r`` becomes ``return ob``.  The merged
    ``ob`` local makes each general statement cover its restricted
    counterpart.
    """
    fld = pessimistic_field(b, GENERAL)
    chosen = set()
    for spec in result.specs:
        body = {s.op: s for s in pessimistic_body(b.function(spec.function), GENERAL, fld)}
        binds = [s for s in pessimistic_body(b.function(spec.function), GENERAL, fld) if s.op == "bind"]
        chosen.update(binds)
        for s in spec.statements:
            if s.op == "store":
                chosen.add(body["store"])
            elif s.op == "load":
                chosen.add(body["load"])
                chosen.add(body["return"])
            elif s.op in ("copy", "return"):
                chosen.add(body["return"])
    return _result(b, GENERAL, chosen)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class ProxySpec:
    cls: str
    function: str

    def line(self) -> str:
        return f"proxyspec {self.cls} {self.function}"


def infer_proxy_specs(proxies: Iterable, b: Optional[Bundle] = None) -> set:
    """One spec per observed proxy whose footprint is a single library function."""
    out = set()
    for p in proxies:
        if not isinstance(p, Proxy) or len(p.footprint) != 1:
            continue
        (m,) = p.footprint
        if "/" in m:  # callback slot, not a function
            continue
        if b is not None and not b.function(m).is_library:
            continue
        out.add(ProxySpec(p.cls, m))
    return out


def exhaustive_min_cost(b: Bundle, target, mode: str, specs=frozenset(), limit: int = 16):
    """Minimum cost over every subset of pessimistic statements (brute force).

    Uses the ordinary solver on bundles with the subset installed as
    specifications, so it shares nothing with the labelled search.
    Returns ``None`` when no subset derives the target.
    """
    specs = frozenset(specs)
    pess = pessimistic_statements(b, specs, mode)
    free = [s for s in pess if s.cost == 0]
    costly = [s for s in pess if s.cost > 0]
    if len(costly) > limit:
        raise ValueError(f"{len(costly)} pessimistic statements exceed the limit {limit}")
    best = None
    for k in range(len(costly) + 1):
        for combo in itertools.combinations(costly, k):
            cost = sum(s.cost for s in combo)
            if best is not None and cost >= best:
                continue
            res = _result(b, mode, set(combo) | set(free))
            if validate_spec(b, specs, res, target):
                best = cost
        if best is not None and best <= k:
            break
    return best
