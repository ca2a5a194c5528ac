"""Concrete interpreter.

Library calls run their ground-truth bodies.  Statements selected by a
:class:`~evsound.monitor.MonitoringScheme` emit :class:`Report` records; with
``trace=True`` every object allocation and every write of a program variable
is also logged, which is what the oracles consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .ir.model import (
    Alloc,
    Assign,
    Branch,
    Bundle,
    Call,
    Function,
    Load,
    Return,
    Store,
    param_site,
    qualify,
    reach_site,
)
from .monitor import MonitoringScheme


class ScheduleExhausted(RuntimeError):
    """Raised when a branch needs a bit the schedule does not have.

    ``branch`` is the branch statement and ``call_sites`` the ids of the
    call statements on the stack, innermost last.
    """

    def __init__(self, position: int, branch: str = "", call_sites: tuple = ()):
        self.position = position
        self.branch = branch
        self.call_sites = call_sites
        super().__init__(f"schedule exhausted at branch {position}")


class MissingGroundTruth(RuntimeError):
    pass


@dataclass
class ConcreteObject:
    oid: int
    cls: str
    origin: str
    fields: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Report:
    site: str
    oid: Optional[int]
    cls: Optional[str]

    def line(self) -> str:
        oid = "-" if self.oid is None else str(self.oid)
        return f"R {self.site} {oid} {self.cls or '-'}"

    @property
    def is_reach(self) -> bool:
        return self.site.startswith("reach:")


# trace events
@dataclass(frozen=True)
class AllocEvent:
    oid: int
    origin: str

    def line(self) -> str:
        return f"A {self.oid} {self.origin}"


@dataclass(frozen=True)
class BindEvent:
    var: str  # qualified program variable
    oid: int
    site: str  # statement id, or param marker

    def line(self) -> str:
        return f"B {self.var} {self.oid} {self.site}"


@dataclass(frozen=True)
class LibraryCallEvent:
    """A program statement handing arguments to a library function."""

    site: str
    callee: str
    args: tuple  # oid or None per argument

    def line(self) -> str:
        args = ",".join("-" if a is None else str(a) for a in self.args)
        return f"C {self.site} {self.callee} {args or '-'}"


@dataclass(frozen=True)
class EnterEvent:
    fn: str

    def line(self) -> str:
        return f"E {self.fn}"


@dataclass(frozen=True)
class ExitEvent:
    fn: str

    def line(self) -> str:
        return f"X {self.fn}"


@dataclass
class Execution:
    reports: list
    trace: list
    heap: dict
    bits_used: int
    entry_frame: dict

    def report_log(self) -> str:
        return "".join(r.line() + "\n" for r in self.reports)

    def trace_log(self) -> str:
        return "".join(e.line() + "\n" for e in self.trace)

    def final_state(self):
        """Heap and entry bindings, for observation-only comparisons."""
        heap = tuple(
            (o.oid, o.cls, o.origin, tuple(sorted(o.fields.items())))
            for o in sorted(self.heap.values(), key=lambda o: o.oid)
        )
        return heap, tuple(sorted(self.entry_frame.items()))


class _Returned(Exception):
    def __init__(self, value):
        self.value = value


class Interpreter:
    def __init__(self, b: Bundle, scheme: MonitoringScheme, sched: Sequence[bool], trace: bool):
        self.b = b
        self.scheme = scheme
        self.sched = list(sched)
        self.pos = 0
        self.record = trace
        self.heap: dict[int, ConcreteObject] = {}
        self.reports: list[Report] = []
        self.trace: list = []
        self.reached: set[str] = set()
        self.entry_frame: dict = {}
        self.call_sites: list[str] = []

    def report(self, site, oid):
        self.reports.append(Report(site, oid, self.heap[oid].cls))

    def bind(self, fn: Function, frame, var, oid, site):
        frame[var] = oid
        if oid is not None and fn.is_program and self.record:
            self.trace.append(BindEvent(qualify(fn.name, var), oid, site))

    def run(self) -> Execution:
        entry = self.b.function(self.b.entry)
        frame = {}
        self.invoke(entry, [None] * len(entry.params), from_library=False, frame_out=frame)
        self.entry_frame = {k: v for k, v in frame.items() if v is not None}
        return Execution(self.reports, self.trace, self.heap, self.pos, self.entry_frame)

    def invoke(self, fn: Function, args, from_library: bool, frame_out=None):
        if fn.is_library:
            body = fn.body
            if body is None:
                raise MissingGroundTruth(f"library function {fn.name!r} has no ground truth")
        else:
            body = fn.body or ()
        if self.record:
            self.trace.append(EnterEvent(fn.name))
        if fn.name in self.scheme.reach and fn.name not in self.reached:
            self.reached.add(fn.name)
            self.reports.append(Report(reach_site(fn.name), None, None))
        frame = {} if frame_out is None else frame_out
        for i, (p, a) in enumerate(zip(fn.params, args)):
            site = param_site(fn.name, i)
            self.bind(fn, frame, p, a, site)
            if a is None or not fn.is_program:
                continue
            if (fn.name, i) in self.scheme.params or (
                from_library and (fn.name, i) in self.scheme.callbacks
            ):
                self.report(site, a)
        result = None
        try:
            self.block(fn, body, frame)
        except _Returned as r:
            result = r.value
        if self.record:
            self.trace.append(ExitEvent(fn.name))
        return result

    def block(self, fn: Function, block, frame):
        for s in block:
            self.stmt(fn, s, frame)

    def stmt(self, fn: Function, s, frame):
        watched = fn.is_program
        if isinstance(s, Alloc):
            oid = len(self.heap)
            self.heap[oid] = ConcreteObject(oid, s.cls, s.id)
            if self.record:
                self.trace.append(AllocEvent(oid, s.id))
            self.bind(fn, frame, s.target, oid, s.id)
            if watched and s.id in self.scheme.alloc:
                self.report(s.id, oid)
        elif isinstance(s, (Assign, Load)):
            if isinstance(s, Assign):
                val = frame.get(s.source)
            else:
                base = frame.get(s.base)
                val = None if base is None else self.heap[base].fields.get(s.field)
            self.bind(fn, frame, s.target, val, s.id)
            if watched and val is not None and s.id in self.scheme.value:
                self.report(s.id, val)
        elif isinstance(s, Store):
            base = frame.get(s.base)
            if base is not None:
                val = frame.get(s.source)
                if val is None:
                    self.heap[base].fields.pop(s.field, None)
                else:
                    self.heap[base].fields[s.field] = val
        elif isinstance(s, Call):
            callee = self.b.function(s.callee)
            args = [frame.get(a) for a in s.args]
            if self.record and fn.is_program and callee.is_library:
                self.trace.append(LibraryCallEvent(s.id, callee.name, tuple(args)))
            self.call_sites.append(s.id)
            val = self.invoke(callee, args, from_library=fn.is_library)
            self.call_sites.pop()
            if s.target:
                self.bind(fn, frame, s.target, val, s.id)
                if watched and val is not None and s.id in self.scheme.call:
                    self.report(s.id, val)
        elif isinstance(s, Return):
            raise _Returned(frame.get(s.var))
        elif isinstance(s, Branch):
            if self.pos >= len(self.sched):
                raise ScheduleExhausted(self.pos, s.id, tuple(self.call_sites))
            bit = self.sched[self.pos]
            self.pos += 1
            self.block(fn, s.then if bit else s.orelse, frame)
        else:  # pragma: no cover
            raise TypeError(f"unknown statement {s!r}")


def run(b: Bundle, scheme: MonitoringScheme, sched: Sequence[bool] = (), trace: bool = False):
    """Execute ``b`` from its entry; returns the full :class:`Execution`."""
    return Interpreter(b, scheme, sched, trace).run()


def execute(b: Bundle, scheme: MonitoringScheme, sched: Sequence[bool] = ()) -> list[Report]:
    return run(b, scheme, sched).reports


def execute_traced(b: Bundle, sched: Sequence[bool] = ()) -> Execution:
    return run(b, MonitoringScheme(), sched, trace=True)


def format_schedule(sched: Sequence[bool]) -> str:
    return "[" + ",".join("true" if x else "false" for x in sched) + "]"


def parse_schedule(text: str) -> tuple[bool, ...]:
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    out = []
    for tok in text.replace(",", " ").split():
        t = tok.lower()
        if t in ("true", "t", "1"):
            out.append(True)
        elif t in ("false", "f", "0"):
            out.append(False)
        else:
            raise ValueError(f"bad schedule bit {tok!r}")
    return tuple(out)
