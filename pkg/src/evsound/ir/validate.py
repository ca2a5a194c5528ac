"""Structural checks that the analysis relies on."""

from __future__ import annotations

from dataclasses import dataclass

from .model import LIBRARY, PROGRAM, Bundle, Call, Load, Store, walk


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}({self.detail}) in {self.where}"


SHARED_FIELD = "SharedFieldViolation"
LIBRARY_TOUCHES_PROGRAM_FIELD = "LibraryTouchesProgramField"
RECURSION = "Recursion"
LIBRARY_CALLS_PROGRAM = "LibraryCallsProgram"


def _field_accesses(block):
    for stmt in walk(block or ()):
        if isinstance(stmt, (Load, Store)):
            yield stmt


def call_graph(b: Bundle, include_ground_truth: bool = True) -> dict[str, set[str]]:
    graph: dict[str, set[str]] = {}
    for fn in b.functions:
        edges = set()
        blocks = [fn.spec]
        if include_ground_truth or fn.is_program:
            blocks.append(fn.body)
        for block in blocks:
            for stmt in walk(block or ()):
                if isinstance(stmt, Call):
                    edges.add(stmt.callee)
        graph[fn.name] = edges
    return graph


def _find_cycle(graph: dict[str, set[str]]):
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(n):
        state[n] = 1
        stack.append(n)
        for m in sorted(graph.get(n, ())):
            if state.get(m) == 1:
                return stack[stack.index(m):] + [m]
            if m not in state:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        state[n] = 2
        return None

    for n in sorted(graph):
        if n not in state:
            found = visit(n)
            if found:
                return found
    return None


def validate_program(b: Bundle) -> list[Violation]:
    out: list[Violation] = []
    owner = b.field_owner
    for fn in b.program_functions:
        for stmt in _field_accesses(fn.body):
            if owner.get(stmt.field) == LIBRARY:
                out.append(Violation(SHARED_FIELD, stmt.id, stmt.field))
    for fn in b.library_functions:
        for block in (fn.body, fn.spec):
            for stmt in _field_accesses(block):
                if owner.get(stmt.field) == PROGRAM:
                    out.append(Violation(LIBRARY_TOUCHES_PROGRAM_FIELD, stmt.id, stmt.field))
        for stmt in walk(fn.body or ()):
            if isinstance(stmt, Call):
                callee = b.function_map.get(stmt.callee)
                if callee is not None and callee.is_program and not callee.is_callback:
                    out.append(Violation(LIBRARY_CALLS_PROGRAM, stmt.id, stmt.callee))
    cycle = _find_cycle(call_graph(b))
    if cycle:
        out.append(Violation(RECURSION, cycle[0], " -> ".join(cycle)))
    return out
