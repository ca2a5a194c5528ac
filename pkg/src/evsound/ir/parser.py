"""Line-oriented text format for bundles.

See ``docs/grammar.md`` for the full grammar. Statement ids not given
explicitly with ``@id`` are assigned as ``<scope>#<k>`` where ``k`` is the
pre-order position of the statement inside its body and ``scope`` is the
function name (``<name>.spec`` for specification bodies).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    LIBRARY,
    PROGRAM,
    Alloc,
    Assign,
    Branch,
    Bundle,
    Call,
    FieldDecl,
    Function,
    Load,
    Return,
    Store,
    walk,
)

KEYWORDS = frozenset(
    {"new", "call", "return", "branch", "else", "spec", "func", "class", "field"}
)

_ID = r"[A-Za-z_][\w#.]*"
_NAME = r"[A-Za-z_]\w*"
_SITE = rf"(?:\s*@(?P<id>{_ID}))?"

_STMT_PATTERNS = [
    ("alloc", re.compile(rf"^(?P<t>{_NAME})\s*=\s*new\s+(?P<cls>{_NAME}){_SITE}$")),
    (
        "call",
        re.compile(
            rf"^(?:(?P<t>{_NAME})\s*=\s*)?call\s+(?P<fn>{_NAME})\s*\((?P<args>[^()]*)\){_SITE}$"
        ),
    ),
    ("return", re.compile(rf"^return\s+(?P<v>{_NAME}){_SITE}$")),
    (
        "load",
        re.compile(rf"^(?P<t>{_NAME})\s*=\s*(?P<b>{_NAME})\.(?P<f>{_NAME}){_SITE}$"),
    ),
    (
        "store",
        re.compile(rf"^(?P<b>{_NAME})\.(?P<f>{_NAME})\s*=\s*(?P<s>{_NAME}){_SITE}$"),
    ),
    ("assign", re.compile(rf"^(?P<t>{_NAME})\s*=\s*(?P<s>{_NAME}){_SITE}$")),
]

_BRANCH = re.compile(rf"^branch{_SITE}\s*\{{$")
_FUNC = re.compile(
    rf"^func\s+(?P<name>{_NAME})\s*\((?P<params>[^()]*)\)\s*"
    rf"(?P<kind>program|library)"
    rf"(?:\s+overrides\s+(?P<ov>{_NAME}))?"
    rf"(?P<rest>(?:\s*\{{|\s+spec\s*\{{)?)$"
)
_SPEC = re.compile(rf"^spec\s+(?P<name>{_NAME})\s*\((?P<params>[^()]*)\)\s*\{{$")


class IRSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)


@dataclass
class SpecFile:
    """Specifications parsed from text: spec bodies, proxy specs, field decls."""

    fields: list[FieldDecl] = field(default_factory=list)
    specs: dict[str, tuple[tuple[str, ...], tuple]] = field(default_factory=dict)
    proxy_specs: list[tuple[str, str]] = field(default_factory=list)


def _split_names(text: str, lineno: int, col: int) -> tuple[str, ...]:
    text = text.strip()
    if not text:
        return ()
    names = tuple(p.strip() for p in text.split(","))
    for n in names:
        if not re.fullmatch(_NAME, n):
            raise IRSyntaxError(f"bad name {n!r} in list", lineno, col)
        if n in KEYWORDS:
            raise IRSyntaxError(f"keyword {n!r} used as a name", lineno, col)
    return names


class _Scope:
    """Statement-id counter for one body."""

    def __init__(self, name: str):
        self.name = name
        self.k = 0

    def next_id(self, explicit: Optional[str]) -> str:
        auto = f"{self.name}#{self.k}"
        self.k += 1
        return explicit or auto


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    # -- line helpers -------------------------------------------------
    def _next(self) -> Optional[tuple[int, int, str]]:
        while self.pos < len(self.lines):
            raw = self.lines[self.pos]
            self.pos += 1
            line = raw.split("//", 1)[0].rstrip()
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            col = len(line) - len(line.lstrip()) + 1
            return self.pos, col, stripped
        return None

    # -- blocks -------------------------------------------------------
    def parse_block(self, scope: _Scope, opener: int):
        """Parse statements up to a closing line; return (stmts, closer)."""
        stmts = []
        while True:
            item = self._next()
            if item is None:
                raise IRSyntaxError("unterminated block", opener, 1)
            lineno, col, line = item
            if line.startswith("}"):
                return tuple(stmts), (lineno, col, line)
            m = _BRANCH.match(line)
            if m:
                sid = scope.next_id(m.group("id"))
                then, closer = self.parse_block(scope, lineno)
                orelse: tuple = ()
                c_line = closer[2]
                if re.fullmatch(r"\}\s*else\s*\{", c_line):
                    orelse, closer = self.parse_block(scope, closer[0])
                    c_line = closer[2]
                if c_line != "}":
                    raise IRSyntaxError(f"unexpected {c_line!r}", closer[0], closer[1])
                stmts.append(Branch(sid, then, orelse))
                continue
            stmts.append(self.parse_stmt(scope, lineno, col, line))

    def parse_stmt(self, scope: _Scope, lineno: int, col: int, line: str):
        for kind, pat in _STMT_PATTERNS:
            m = pat.match(line)
            if not m:
                continue
            g = m.groupdict()
            for key in ("t", "b", "s", "v"):
                if g.get(key) in KEYWORDS:
                    raise IRSyntaxError(f"keyword {g[key]!r} used as a variable", lineno, col)
            sid = scope.next_id(g.get("id"))
            if kind == "alloc":
                return Alloc(sid, g["t"], g["cls"])
            if kind == "call":
                args = _split_names(g["args"], lineno, col)
                return Call(sid, g["t"], g["fn"], args)
            if kind == "return":
                return Return(sid, g["v"])
            if kind == "load":
                return Load(sid, g["t"], g["b"], g["f"])
            if kind == "store":
                return Store(sid, g["b"], g["f"], g["s"])
            return Assign(sid, g["t"], g["s"])
        raise IRSyntaxError(f"cannot parse statement {line!r}", lineno, col)

    # -- top level ----------------------------------------------------
    def parse(self):
        classes: list[str] = []
        fields: list[FieldDecl] = []
        functions: list[Function] = []
        entries: list[tuple[str, int]] = []
        sources: list[tuple[str, int]] = []
        sinks: list[tuple[str, int]] = []
        specfile = SpecFile()
        spec_lines: dict[str, int] = {}
        lines_of: dict[str, int] = {}

        while True:
            item = self._next()
            if item is None:
                break
            lineno, col, line = item
            word = line.split()[0]
            if word == "class":
                parts = line.split()
                if len(parts) != 2 or not re.fullmatch(_NAME, parts[1]):
                    raise IRSyntaxError("expected 'class NAME'", lineno, col)
                if parts[1] in classes:
                    raise IRSyntaxError(f"duplicate class {parts[1]!r}", lineno, col)
                classes.append(parts[1])
            elif word == "field":
                parts = line.split()
                if (
                    len(parts) != 3
                    or not re.fullmatch(_NAME, parts[1])
                    or parts[2] not in (PROGRAM, LIBRARY)
                ):
                    raise IRSyntaxError("expected 'field NAME program|library'", lineno, col)
                if any(f.name == parts[1] for f in fields):
                    raise IRSyntaxError(f"duplicate field {parts[1]!r}", lineno, col)
                fields.append(FieldDecl(parts[1], parts[2]))
            elif word in ("entry", "source", "sink"):
                parts = line.split()
                if len(parts) != 2 or not re.fullmatch(_NAME, parts[1]):
                    raise IRSyntaxError(f"expected '{word} NAME'", lineno, col)
                {"entry": entries, "source": sources, "sink": sinks}[word].append(
                    (parts[1], lineno)
                )
            elif word == "proxyspec":
                parts = line.split()
                if len(parts) != 3:
                    raise IRSyntaxError("expected 'proxyspec CLASS FUNC'", lineno, col)
                specfile.proxy_specs.append((parts[1], parts[2]))
                lines_of[f"proxyspec:{parts[2]}"] = lineno
            elif word == "spec":
                m = _SPEC.match(line)
                if not m:
                    raise IRSyntaxError("expected 'spec NAME(params) {'", lineno, col)
                name = m.group("name")
                if name in specfile.specs:
                    raise IRSyntaxError(f"duplicate spec for {name!r}", lineno, col)
                params = _split_names(m.group("params"), lineno, col)
                body, closer = self.parse_block(_Scope(f"{name}.spec"), lineno)
                if closer[2] != "}":
                    raise IRSyntaxError(f"unexpected {closer[2]!r}", closer[0], closer[1])
                specfile.specs[name] = (params, body)
                spec_lines[name] = lineno
            elif word == "func":
                fn = self.parse_func(lineno, col, line)
                if any(f.name == fn.name for f in functions):
                    raise IRSyntaxError(f"duplicate function {fn.name!r}", lineno, col)
                functions.append(fn)
                lines_of[fn.name] = lineno
            else:
                raise IRSyntaxError(f"unknown directive {word!r}", lineno, col)

        return (
            classes,
            fields,
            functions,
            entries,
            sources,
            sinks,
            specfile,
            spec_lines,
            lines_of,
        )

    def parse_func(self, lineno: int, col: int, line: str) -> Function:
        m = _FUNC.match(line)
        if not m:
            raise IRSyntaxError(f"malformed function header {line!r}", lineno, col)
        name = m.group("name")
        if name in KEYWORDS:
            raise IRSyntaxError(f"keyword {name!r} used as a function name", lineno, col)
        params = _split_names(m.group("params"), lineno, col)
        if len(set(params)) != len(params):
            raise IRSyntaxError(f"duplicate parameter in {name!r}", lineno, col)
        kind = m.group("kind")
        rest = m.group("rest").strip()
        overrides = m.group("ov")
        if overrides and kind != PROGRAM:
            raise IRSyntaxError("only program functions may override", lineno, col)
        body = spec = None
        if kind == PROGRAM:
            if rest != "{":
                raise IRSyntaxError("program function needs a body", lineno, col)
            body, closer = self.parse_block(_Scope(name), lineno)
            if closer[2] != "}":
                raise IRSyntaxError(f"unexpected {closer[2]!r}", closer[0], closer[1])
        elif rest == "{":
            body, closer = self.parse_block(_Scope(name), lineno)
            if re.fullmatch(r"\}\s*spec\s*\{", closer[2]):
                spec, closer = self.parse_block(_Scope(f"{name}.spec"), closer[0])
            if closer[2] != "}":
                raise IRSyntaxError(f"unexpected {closer[2]!r}", closer[0], closer[1])
        elif rest:
            spec, closer = self.parse_block(_Scope(f"{name}.spec"), lineno)
            if closer[2] != "}":
                raise IRSyntaxError(f"unexpected {closer[2]!r}", closer[0], closer[1])
        return Function(name, kind, params, body, spec, overrides)


# ---------------------------------------------------------------------------


def proxy_site_id(cls: str, func: str) -> str:
    return f"proxy_{cls}_{func}"


PROXY_RET = "proxy_ret"


def with_proxy_spec(fn: Function, cls: str) -> Function:
    """Extend ``fn``'s specification so it returns a fresh ``cls`` object."""
    body = tuple(fn.spec or ())
    k = sum(1 for _ in walk(body))
    alloc = Alloc(proxy_site_id(cls, fn.name), PROXY_RET, cls)
    ret = Return(f"{fn.name}.spec#{k + 1}", PROXY_RET)
    return Function(fn.name, fn.kind, fn.params, fn.body, body + (alloc, ret), fn.overrides)


def parse_spec_file(text: str) -> SpecFile:
    """Parse text holding only ``field``, ``spec`` and ``proxyspec`` lines."""
    p = _Parser(text)
    classes, fields, functions, entries, sources, sinks, specfile, _, _ = p.parse()
    if classes or functions or entries or sources or sinks:
        raise IRSyntaxError("spec files may only contain field, spec and proxyspec lines")
    specfile.fields = fields
    return specfile


def apply_spec_file(bundle: Bundle, specfile: SpecFile) -> tuple[Bundle, frozenset[str]]:
    """Install the specs of ``specfile`` in ``bundle``; return it with their names."""
    fields = list(bundle.fields)
    for fd in specfile.fields:
        owner = bundle.field_owner.get(fd.name)
        if owner is None:
            fields.append(fd)
        elif owner != fd.owner:
            raise IRSyntaxError(f"field {fd.name!r} redeclared with another owner")
    out = bundle.replace(fields=tuple(fields))
    names = set()
    for name, (params, body) in specfile.specs.items():
        fn = out.function_map.get(name)
        if fn is None or not fn.is_library:
            raise IRSyntaxError(f"spec for unknown library function {name!r}")
        if params != fn.params:
            raise IRSyntaxError(f"spec parameters of {name!r} do not match declaration")
        out = out.with_function(Function(fn.name, fn.kind, fn.params, fn.body, body, fn.overrides))
        names.add(name)
    for cls, name in specfile.proxy_specs:
        fn = out.function_map.get(name)
        if fn is None or not fn.is_library:
            raise IRSyntaxError(f"proxyspec for unknown library function {name!r}")
        if cls not in out.classes:
            raise IRSyntaxError(f"proxyspec uses undeclared class {cls!r}")
        out = out.with_function(with_proxy_spec(fn, cls))
        names.add(name)
    _check_references(out)
    return out, frozenset(names)


def parse_program(text: str) -> Bundle:
    """Parse IR source text into a validated-structure :class:`Bundle`."""
    p = _Parser(text)
    (
        classes,
        fields,
        functions,
        entries,
        sources,
        sinks,
        specfile,
        spec_lines,
        lines_of,
    ) = p.parse()

    if len(entries) > 1:
        raise IRSyntaxError("more than one entry directive", entries[1][1], 1)
    fmap = {f.name: f for f in functions}
    if entries:
        entry, line = entries[0]
        if entry not in fmap or not fmap[entry].is_program:
            raise IRSyntaxError(f"entry {entry!r} is not a program function", line, 1)
    elif "main" in fmap and fmap["main"].is_program:
        entry = "main"
    else:
        raise IRSyntaxError("no entry function")

    for name, line in sources + sinks:
        if name not in fmap or not fmap[name].is_library:
            raise IRSyntaxError(f"annotation on unknown library function {name!r}", line, 1)

    bundle = Bundle(
        classes=tuple(classes),
        fields=tuple(fields),
        functions=tuple(functions),
        entry=entry,
        sources=frozenset(n for n, _ in sources),
        sinks=frozenset(n for n, _ in sinks),
    )
    for name, (params, body) in specfile.specs.items():
        fn = bundle.function_map.get(name)
        line = spec_lines[name]
        if fn is None or not fn.is_library:
            raise IRSyntaxError(f"spec for unknown library function {name!r}", line, 1)
        if fn.spec is not None:
            raise IRSyntaxError(f"second spec for {name!r}", line, 1)
        if params != fn.params:
            raise IRSyntaxError(f"spec parameters of {name!r} do not match", line, 1)
        bundle = bundle.with_function(
            Function(fn.name, fn.kind, fn.params, fn.body, body, fn.overrides)
        )
    for cls, name in specfile.proxy_specs:
        fn = bundle.function_map.get(name)
        line = lines_of.get(f"proxyspec:{name}", 0)
        if fn is None or not fn.is_library:
            raise IRSyntaxError(f"proxyspec for unknown library function {name!r}", line, 1)
        bundle = bundle.with_function(with_proxy_spec(fn, cls))
    _check_references(bundle, lines_of)
    return bundle


def _check_references(bundle: Bundle, lines_of: Optional[dict] = None) -> None:
    lines_of = lines_of or {}
    classes = set(bundle.classes)
    fields = bundle.field_owner
    seen_ids: dict[str, tuple[str, object]] = {}

    def check_block(fn: Function, block, is_spec: bool) -> None:
        line = lines_of.get(fn.name, 0)
        gt_allocs = {
            s.id: s.cls for s in walk(fn.body or ()) if isinstance(s, Alloc)
        }
        for stmt in walk(block):
            prev = seen_ids.get(stmt.id)
            if prev is not None:
                shadow = (
                    is_spec
                    and isinstance(stmt, Alloc)
                    and gt_allocs.get(stmt.id) == stmt.cls
                    and prev[0] == fn.name
                )
                if not shadow:
                    raise IRSyntaxError(f"duplicate statement id {stmt.id!r}", line, 1)
            else:
                seen_ids[stmt.id] = (fn.name, stmt)
            if isinstance(stmt, Alloc) and stmt.cls not in classes:
                raise IRSyntaxError(f"undeclared class {stmt.cls!r}", line, 1)
            if isinstance(stmt, (Load, Store)) and stmt.field not in fields:
                raise IRSyntaxError(f"undeclared field {stmt.field!r}", line, 1)
            if isinstance(stmt, Call):
                callee = bundle.function_map.get(stmt.callee)
                if callee is None:
                    raise IRSyntaxError(f"unresolved callee {stmt.callee!r}", line, 1)
                if len(stmt.args) != len(callee.params):
                    raise IRSyntaxError(
                        f"call to {stmt.callee!r} passes {len(stmt.args)} arguments,"
                        f" expected {len(callee.params)}",
                        line,
                        1,
                    )

    for fn in bundle.functions:
        if fn.body is not None:
            check_block(fn, fn.body, False)
    for fn in bundle.functions:
        if fn.spec is not None:
            check_block(fn, fn.spec, True)
    for fn in bundle.callbacks:
        target = bundle.function_map.get(fn.overrides)
        if target is None or not target.is_library:
            raise IRSyntaxError(
                f"{fn.name!r} overrides unknown library function {fn.overrides!r}",
                lines_of.get(fn.name, 0),
                1,
            )
