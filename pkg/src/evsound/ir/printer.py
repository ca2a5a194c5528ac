"""Render a bundle back into the text format accepted by the parser."""

from __future__ import annotations

from .model import Alloc, Assign, Branch, Bundle, Call, Function, Load, Return, Store


def _site(stmt, auto: str) -> str:
    return "" if stmt.id == auto else f" @{stmt.id}"


def _stmt_line(stmt, auto: str) -> str:
    tag = _site(stmt, auto)
    if isinstance(stmt, Alloc):
        return f"{stmt.target} = new {stmt.cls}{tag}"
    if isinstance(stmt, Assign):
        return f"{stmt.target} = {stmt.source}{tag}"
    if isinstance(stmt, Load):
        return f"{stmt.target} = {stmt.base}.{stmt.field}{tag}"
    if isinstance(stmt, Store):
        return f"{stmt.base}.{stmt.field} = {stmt.source}{tag}"
    if isinstance(stmt, Call):
        call = f"call {stmt.callee}({', '.join(stmt.args)}){tag}"
        return f"{stmt.target} = {call}" if stmt.target else call
    if isinstance(stmt, Return):
        return f"return {stmt.var}{tag}"
    raise TypeError(f"not a statement: {stmt!r}")


def print_block(block, scope: str, indent: int = 1, counter=None) -> list[str]:
    counter = counter if counter is not None else [0]
    pad = "    " * indent
    out = []
    for stmt in block:
        auto = f"{scope}#{counter[0]}"
        counter[0] += 1
        if isinstance(stmt, Branch):
            out.append(f"{pad}branch{_site(stmt, auto)} {{")
            out.extend(print_block(stmt.then, scope, indent + 1, counter))
            if stmt.orelse:
                out.append(f"{pad}}} else {{")
                out.extend(print_block(stmt.orelse, scope, indent + 1, counter))
            out.append(f"{pad}}}")
        else:
            out.append(pad + _stmt_line(stmt, auto))
    return out


def print_function(fn: Function) -> list[str]:
    header = f"func {fn.name}({', '.join(fn.params)}) {fn.kind}"
    if fn.overrides:
        header += f" overrides {fn.overrides}"
    if fn.body is None and fn.spec is None:
        return [header]
    if fn.body is None:
        return [header + " spec {", *print_block(fn.spec, f"{fn.name}.spec"), "}"]
    lines = [header + " {", *print_block(fn.body, fn.name)]
    if fn.spec is not None:
        lines.append("} spec {")
        lines.extend(print_block(fn.spec, f"{fn.name}.spec"))
    lines.append("}")
    return lines


def print_spec(fn: Function) -> str:
    """A standalone ``spec`` block for one library function."""
    lines = [f"spec {fn.name}({', '.join(fn.params)}) {{"]
    lines.extend(print_block(fn.spec or (), f"{fn.name}.spec"))
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_program(b: Bundle) -> str:
    lines = [f"class {c}" for c in b.classes]
    lines += [f"field {f.name} {f.owner}" for f in b.fields]
    lines.append(f"entry {b.entry}")
    lines += [f"source {s}" for s in sorted(b.sources)]
    lines += [f"sink {s}" for s in sorted(b.sinks)]
    for fn in b.functions:
        lines.append("")
        lines.extend(print_function(fn))
    return "\n".join(lines) + "\n"
