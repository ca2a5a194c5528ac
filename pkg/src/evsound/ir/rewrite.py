"""Replace program accesses to library-owned fields with getter/setter calls."""

from __future__ import annotations

from .model import LIBRARY, Branch, Bundle, Call, Function, Load, Return, Store


def getter_name(field: str) -> str:
    return f"get_{field}"


def setter_name(field: str) -> str:
    return f"set_{field}"


def _accessor(name: str, field: str, setter: bool) -> Function:
    if setter:
        body = (Store(f"{name}#0", "this", field, "v"),)
        return Function(name, LIBRARY, ("this", "v"), body, None)
    body = (Load(f"{name}#0", "r", "this", field), Return(f"{name}#1", "r"))
    return Function(name, LIBRARY, ("this",), body, None)


def _rewrite_block(block, owner, used: dict[str, bool]):
    out = []
    for stmt in block:
        if isinstance(stmt, Branch):
            out.append(
                Branch(
                    stmt.id,
                    _rewrite_block(stmt.then, owner, used),
                    _rewrite_block(stmt.orelse, owner, used),
                )
            )
        elif isinstance(stmt, (Load, Store)) and owner.get(stmt.field) == LIBRARY:
            if isinstance(stmt, Load):
                used[stmt.field + "/get"] = True
                out.append(Call(stmt.id, stmt.target, getter_name(stmt.field), (stmt.base,)))
            else:
                used[stmt.field + "/set"] = True
                out.append(
                    Call(stmt.id, None, setter_name(stmt.field), (stmt.base, stmt.source))
                )
        else:
            out.append(stmt)
    return tuple(out)


def rewrite_shared_fields(b: Bundle, fields=None) -> Bundle:
    """Route program loads/stores of library fields through accessor calls.

    ``fields`` restricts the rewrite to the given names; asking for a
    program-owned field raises ``ValueError``.
    """
    owner = dict(b.field_owner)
    if fields is not None:
        for f in fields:
            if owner.get(f) != LIBRARY:
                raise ValueError(f"field {f!r} is not library-owned")
        owner = {k: v for k, v in owner.items() if k in set(fields)}
    used: dict[str, bool] = {}
    funcs = []
    for fn in b.functions:
        if fn.is_program:
            body = _rewrite_block(fn.body or (), owner, used)
            fn = Function(fn.name, fn.kind, fn.params, body, fn.spec, fn.overrides)
        funcs.append(fn)
    if not used:
        return b
    names = {f.name for f in funcs}
    for key in sorted(used):
        field, kind = key.split("/")
        name = setter_name(field) if kind == "set" else getter_name(field)
        if name in names:
            raise ValueError(f"accessor name {name!r} already declared")
        funcs.append(_accessor(name, field, kind == "set"))
        names.add(name)
    return b.replace(functions=tuple(funcs))
