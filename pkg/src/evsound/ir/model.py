"""Core data types of the toy object language.

A :class:`Bundle` holds a program (the code we can see and instrument) together
with a library whose functions carry an optional ground-truth body (executed by
the interpreter, invisible to the static analysis) and an optional
specification body (analysed in place of the ground truth when activated).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Union

PROGRAM = "program"
LIBRARY = "library"


@dataclass(frozen=True)
class Alloc:
    id: str
    target: str
    cls: str


@dataclass(frozen=True)
class Assign:
    id: str
    target: str
    source: str


@dataclass(frozen=True)
class Load:
    id: str
    target: str
    base: str
    field: str


@dataclass(frozen=True)
class Store:
    id: str
    base: str
    field: str
    source: str


@dataclass(frozen=True)
class Call:
    id: str
    target: Optional[str]
    callee: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Return:
    id: str
    var: str


@dataclass(frozen=True)
class Branch:
    id: str
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...]


Stmt = Union[Alloc, Assign, Load, Store, Call, Return, Branch]
Block = tuple[Stmt, ...]


def walk(block: Block) -> Iterator[Stmt]:
    """Pre-order traversal, descending into branch arms."""
    for stmt in block:
        yield stmt
        if isinstance(stmt, Branch):
            yield from walk(stmt.then)
            yield from walk(stmt.orelse)


def defined_var(stmt: Stmt) -> Optional[str]:
    """The variable a statement writes, if any."""
    if isinstance(stmt, (Alloc, Assign, Load)):
        return stmt.target
    if isinstance(stmt, Call):
        return stmt.target
    return None


def used_vars(stmt: Stmt) -> tuple[str, ...]:
    if isinstance(stmt, Assign):
        return (stmt.source,)
    if isinstance(stmt, Load):
        return (stmt.base,)
    if isinstance(stmt, Store):
        return (stmt.base, stmt.source)
    if isinstance(stmt, Call):
        return stmt.args
    if isinstance(stmt, Return):
        return (stmt.var,)
    return ()


@dataclass(frozen=True)
class FieldDecl:
    name: str
    owner: str  # PROGRAM or LIBRARY


@dataclass(frozen=True)
class Function:
    name: str
    kind: str  # PROGRAM or LIBRARY
    params: tuple[str, ...] = ()
    body: Optional[Block] = None
    spec: Optional[Block] = None
    overrides: Optional[str] = None

    @property
    def is_program(self) -> bool:
        return self.kind == PROGRAM

    @property
    def is_library(self) -> bool:
        return self.kind == LIBRARY

    @property
    def is_callback(self) -> bool:
        return self.is_program and self.overrides is not None

    def variables(self, block: Optional[Block] = None) -> set[str]:
        block = self.body if block is None else block
        names = set(self.params)
        for stmt in walk(block or ()):
            d = defined_var(stmt)
            if d:
                names.add(d)
            names.update(used_vars(stmt))
        return names


@dataclass(frozen=True)
class Bundle:
    classes: tuple[str, ...]
    fields: tuple[FieldDecl, ...]
    functions: tuple[Function, ...]
    entry: str
    sources: frozenset[str] = frozenset()
    sinks: frozenset[str] = frozenset()

    @cached_property
    def function_map(self) -> dict[str, Function]:
        return {f.name: f for f in self.functions}

    @cached_property
    def field_owner(self) -> dict[str, str]:
        return {f.name: f.owner for f in self.fields}

    def function(self, name: str) -> Function:
        try:
            return self.function_map[name]
        except KeyError:
            raise KeyError(f"unknown function {name!r}") from None

    @property
    def program_functions(self) -> list[Function]:
        return [f for f in self.functions if f.is_program]

    @property
    def library_functions(self) -> list[Function]:
        return [f for f in self.functions if f.is_library]

    @property
    def callbacks(self) -> list[Function]:
        return [f for f in self.functions if f.is_callback]

    def spec_names(self) -> frozenset[str]:
        """Library functions that carry a specification body."""
        return frozenset(f.name for f in self.library_functions if f.spec is not None)

    def is_missing(self, name: str, specs) -> bool:
        fn = self.function(name)
        return fn.is_library and name not in specs

    def program_statements(self) -> Iterator[tuple[Function, Stmt]]:
        for fn in self.program_functions:
            for stmt in walk(fn.body or ()):
                yield fn, stmt

    @cached_property
    def program_stmt_map(self) -> dict[str, tuple[Function, Stmt]]:
        return {stmt.id: (fn, stmt) for fn, stmt in self.program_statements()}

    def program_sites(self) -> dict[str, str]:
        """Allocation sites in program code, mapped to their class."""
        return {
            stmt.id: stmt.cls
            for _, stmt in self.program_statements()
            if isinstance(stmt, Alloc)
        }

    def visible_variables(self) -> set[str]:
        """Qualified names of every program variable."""
        out = set()
        for fn in self.program_functions:
            out.update(qualify(fn.name, v) for v in fn.variables())
        return out

    def replace(self, **changes) -> "Bundle":
        values = {
            "classes": self.classes,
            "fields": self.fields,
            "functions": self.functions,
            "entry": self.entry,
            "sources": self.sources,
            "sinks": self.sinks,
        }
        values.update(changes)
        return Bundle(**values)

    def with_function(self, fn: Function) -> "Bundle":
        funcs = list(self.functions)
        for i, old in enumerate(funcs):
            if old.name == fn.name:
                funcs[i] = fn
                break
        else:
            funcs.append(fn)
        return self.replace(functions=tuple(funcs))


def qualify(func: str, var: str) -> str:
    return f"{func}.{var}"


def split_var(qualified: str) -> tuple[str, str]:
    func, _, var = qualified.rpartition(".")
    return func, var


def callback_slot(func: str, index: int) -> str:
    """Footprint element for a callback parameter."""
    return f"{func}/{index}"


def param_site(func: str, index: int) -> str:
    """Report token for a parameter monitor."""
    return f"cb:{func}:{index}"


def reach_site(func: str) -> str:
    return f"reach:{func}"
