"""Which program statements to instrument.

Three schemes of decreasing size:

``naive``
    every statement that writes a program variable.
``min``
    program allocations, calls to missing functions and callback parameters.
``opt``
    like ``min`` but only allocations whose objects may be handed to the
    library according to the current points-to set.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir.model import Alloc, Assign, Bundle, Call, Load, Return, qualify, walk
from .pta import PointsToSet, extract_constraints, _reachable


@dataclass(frozen=True)
class MonitoringScheme:
    alloc: frozenset = frozenset()
    call: frozenset = frozenset()
    value: frozenset = frozenset()  # assign/load ids, naive only
    params: frozenset = frozenset()  # (fn, idx) reported on every entry
    callbacks: frozenset = frozenset()  # (fn, idx) reported when invoked by the library
    reach: frozenset = frozenset()  # callbacks reporting their first entry

    KINDS = ("alloc", "call", "value", "params", "callbacks", "reach")

    def __len__(self) -> int:
        return sum(len(getattr(self, k)) for k in self.KINDS)

    def is_empty(self) -> bool:
        return len(self) == 0

    def without(self, kind: str, item) -> "MonitoringScheme":
        return self._with(kind, getattr(self, kind) - {item})

    def _with(self, kind, values) -> "MonitoringScheme":
        data = {k: getattr(self, k) for k in self.KINDS}
        data[kind] = frozenset(values)
        return MonitoringScheme(**data)

    def items(self):
        """(kind, item) for every monitor."""
        for k in self.KINDS:
            for item in getattr(self, k):
                yield k, item


EMPTY = MonitoringScheme()


def _callback_slots(b: Bundle) -> frozenset:
    return frozenset(
        (fn.name, i) for fn in b.callbacks for i in range(len(fn.params))
    )


def _missing_calls(b: Bundle, specs) -> frozenset:
    out = set()
    for _, s in b.program_statements():
        if isinstance(s, Call) and b.is_missing(s.callee, specs):
            out.add(s.id)
    return frozenset(out)


def _unreached_callbacks(b: Bundle, reachable) -> frozenset:
    return frozenset(fn.name for fn in b.callbacks if fn.name not in reachable)


def monitoring_naive(b: Bundle) -> MonitoringScheme:
    alloc, call, value = set(), set(), set()
    for _, s in b.program_statements():
        if isinstance(s, Alloc):
            alloc.add(s.id)
        elif isinstance(s, Call):
            call.add(s.id)
        elif isinstance(s, (Assign, Load)):
            value.add(s.id)
    params = frozenset(
        (fn.name, i) for fn in b.program_functions for i in range(len(fn.params))
    )
    return MonitoringScheme(
        alloc=frozenset(alloc),
        call=frozenset(call),
        value=frozenset(value),
        params=params,
        reach=frozenset(fn.name for fn in b.callbacks),
    )


def potential_callbacks(b: Bundle, pi: PointsToSet | None = None, specs=frozenset()):
    """Callback parameter monitors and reach flags.

    Returns ``(slots, reach)``.  Reach flags are kept for callbacks that the
    visible call graph (plus already reported entries) does not reach.
    """
    if pi is None:
        reachable = _reachable(b, extract_constraints(b, specs).calls, ())
    else:
        reachable = pi.reachable
    return _callback_slots(b), _unreached_callbacks(b, reachable)


def monitoring_min(b: Bundle, specs=frozenset(), pi: PointsToSet | None = None):
    specs = frozenset(specs)
    slots, reach = potential_callbacks(b, pi, specs)
    return MonitoringScheme(
        alloc=frozenset(b.program_sites()),
        call=_missing_calls(b, specs),
        callbacks=slots,
        reach=reach,
    )


def leaking_sites(b: Bundle, pi: PointsToSet) -> frozenset:
    """Program sites whose objects may be handed to library code.

    An object leaks if some argument of a library call in program code may
    point to it, or a callback may return it to its library caller.
    """
    out = set()
    program_sites = b.program_sites()

    def take(var):
        for o in pi.pts(var):
            if getattr(o, "id", None) in program_sites:
                out.add(o.id)

    for fn, s in b.program_statements():
        if isinstance(s, Call) and b.function(s.callee).is_library:
            for a in s.args:
                take(qualify(fn.name, a))
    for fn in b.callbacks:
        for s in walk(fn.body or ()):
            if isinstance(s, Return):
                take(qualify(fn.name, s.var))
    return frozenset(out)


def monitoring_opt(b: Bundle, specs, pi: PointsToSet) -> MonitoringScheme:
    base = monitoring_min(b, specs, pi)
    return MonitoringScheme(
        alloc=leaking_sites(b, pi),
        call=base.call,
        callbacks=base.callbacks,
        reach=base.reach,
    )


SCHEMES = ("naive", "min", "opt")


def make_scheme(kind: str, b: Bundle, specs, pi: PointsToSet) -> MonitoringScheme:
    if kind == "naive":
        return monitoring_naive(b)
    if kind == "min":
        return monitoring_min(b, specs, pi)
    if kind == "opt":
        return monitoring_opt(b, specs, pi)
    raise ValueError(f"unknown scheme {kind!r}")


def scheme_diff(old: MonitoringScheme, new: MonitoringScheme) -> dict:
    """Per-kind ``{"added": ..., "removed": ...}`` sets."""
    added = {k: getattr(new, k) - getattr(old, k) for k in MonitoringScheme.KINDS}
    removed = {k: getattr(old, k) - getattr(new, k) for k in MonitoringScheme.KINDS}
    return {"added": added, "removed": removed}


def diff_is_empty(diff: dict) -> bool:
    return not any(diff["added"].values()) and not any(diff["removed"].values())


_LINE = {
    "alloc": lambda x: f"alloc {x}",
    "call": lambda x: f"call {x}",
    "value": lambda x: f"stmt {x}",
    "params": lambda x: f"param {x[0]} {x[1]}",
    "callbacks": lambda x: f"cb {x[0]} {x[1]}",
    "reach": lambda x: f"cb-reach {x}",
}


def serialize_scheme(m: MonitoringScheme) -> str:
    lines = sorted(_LINE[k](item) for k, item in m.items())
    return "".join(line + "\n" for line in lines)


def parse_scheme(text: str) -> MonitoringScheme:
    data: dict[str, set] = {k: set() for k in MonitoringScheme.KINDS}
    for n, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        head = parts[0]
        if head in ("alloc", "call", "stmt") and len(parts) == 2:
            data[{"stmt": "value"}.get(head, head)].add(parts[1])
        elif head in ("param", "cb") and len(parts) == 3:
            data["params" if head == "param" else "callbacks"].add((parts[1], int(parts[2])))
        elif head == "cb-reach" and len(parts) == 2:
            data["reach"].add(parts[1])
        else:
            raise ValueError(f"line {n}: bad monitor {line!r}")
    return MonitoringScheme(**{k: frozenset(v) for k, v in data.items()})
