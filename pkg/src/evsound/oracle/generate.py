"""Random bundles for property tests and corpus checks.

Programs are emitted as IR text and parsed, so every generated bundle has
also been through the parser.  Library bodies follow a few fixed shapes:
no-op, return a parameter, return a fresh object, store a parameter into a
receiver field, load a receiver field.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..ir.model import Bundle
from ..ir.parser import parse_program

LIB_SHAPES = ("noop", "return_param", "return_fresh", "store_field", "load_field")


@dataclass(frozen=True)
class Profile:
    min_stmts: int = 3
    max_stmts: int = 20
    max_lib: int = 4
    max_classes: int = 3
    max_fields: int = 3
    max_branches: int = 3
    helper: float = 0.4  # chance of a second program function
    callbacks: float = 0.0  # chance of a callback fixture
    lib_branch: float = 0.15  # chance a library body is guarded by a branch


DEFAULT = Profile()
WITH_CALLBACKS = Profile(callbacks=0.6)


class _Gen:
    def __init__(self, rng: random.Random, prof: Profile):
        self.rng = rng
        self.p = prof
        self.branches = 0

    def pick(self, seq):
        return self.rng.choice(list(seq))

    def build(self) -> str:
        r = self.rng
        n_cls = r.randint(1, self.p.max_classes)
        self.classes = [f"C{i}" for i in range(n_cls)]
        n_fields = r.randint(1, self.p.max_fields)
        n_pf = r.randint(0, n_fields - 1) if n_fields > 1 else 0
        self.pfields = [f"p{i}" for i in range(n_pf)]
        self.lfields = [f"l{i}" for i in range(n_fields - n_pf)]
        n_lib = r.randint(1, self.p.max_lib)
        self.libs = []
        for i in range(n_lib):
            arity = r.randint(0, 2)
            self.libs.append((f"m{i}", arity, self.pick(LIB_SHAPES)))
        self.callback = None
        if r.random() < self.p.callbacks:
            self.callback = ("cb0", f"m{n_lib}")
            self.libs.append((f"m{n_lib}", 1, "invoke"))
        self.helper = r.random() < self.p.helper
        out = [f"class {c}" for c in self.classes]
        out += [f"field {f} program" for f in self.pfields]
        out += [f"field {f} library" for f in self.lfields]
        if r.random() < 0.7:
            out.append(f"source {self.pick(n for n, _, _ in self.libs)}")
            out.append(f"sink {self.pick(n for n, _, _ in self.libs)}")
        out.append("")
        out += self.program_function("main", (), self.pick(range(self.p.min_stmts, self.p.max_stmts + 1)))
        if self.helper:
            out += self.program_function("h", ("a",), r.randint(2, 6), ret=True)
        if self.callback:
            name, lib = self.callback
            out += self.program_function(name, ("x",), r.randint(1, 4), ret=True, overrides=lib)
        for name, arity, shape in self.libs:
            if shape != "invoke":
                out += self.library_function(name, arity, shape)
        if self.callback:
            out += self.callback_invoker()
        return "\n".join(out) + "\n"

    # -- program code ----------------------------------------------------
    def program_function(self, name, params, n, ret=False, overrides=None):
        self.vars = [f"v{i}" for i in range(4)] + list(params)
        self.fn = name
        header = f"func {name}({', '.join(params)}) program"
        if overrides:
            header += f" overrides {overrides}"
        lines = [header + " {"]
        lines += self.stmts(n, 1)
        if ret:
            lines.append(f"    return {self.pick(self.vars)}")
        lines.append("}")
        lines.append("")
        return lines

    def stmts(self, n, depth):
        out = []
        pad = "    " * depth
        while n > 0:
            r = self.rng.random()
            if r < 0.08 and depth < 3 and self.branches < self.p.max_branches and n >= 2:
                self.branches += 1
                k = self.rng.randint(1, min(3, n - 1))
                out.append(pad + "branch {")
                out += self.stmts(k, depth + 1)
                if self.rng.random() < 0.5:
                    out.append(pad + "} else {")
                    out += self.stmts(self.rng.randint(1, 2), depth + 1)
                out.append(pad + "}")
                n -= k + 1
                continue
            out.append(pad + self.simple())
            n -= 1
        return out

    def simple(self):
        r = self.rng.random()
        v = self.pick(self.vars)
        w = self.pick(self.vars)
        if r < 0.22:
            return f"{v} = new {self.pick(self.classes)}"
        if r < 0.36:
            return f"{v} = {w}"
        if r < 0.46 and self.pfields:
            return f"{v} = {w}.{self.pick(self.pfields)}"
        if r < 0.54 and self.pfields:
            return f"{v}.{self.pick(self.pfields)} = {w}"
        if r < 0.6 and self.helper and self.fn == "main":
            return f"{v} = call h({w})"
        choices = [l for l in self.libs if not (l[2] == "invoke" and self.fn == "cb0")]
        name, arity, _ = self.pick(choices)
        args = ", ".join(self.pick(self.vars) for _ in range(arity))
        if self.rng.random() < 0.8:
            return f"{v} = call {name}({args})"
        return f"call {name}({args})"

    # -- library code ----------------------------------------------------
    def library_function(self, name, arity, shape):
        params = ["this", "ob"][:arity]
        body = []
        if shape == "return_param" and params:
            body.append(f"return {self.pick(params)}")
        elif shape == "return_fresh":
            body += [f"t = new {self.pick(self.classes)}", "return t"]
        elif shape == "store_field" and arity == 2:
            body.append(f"this.{self.pick(self.lfields)} = ob")
        elif shape == "load_field" and params:
            body += [f"t = this.{self.pick(self.lfields)}", "return t"]
        if body and self.rng.random() < self.p.lib_branch:
            body = ["branch {", *("    " + s for s in body), "}"]
        lines = [f"func {name}({', '.join(params)}) library {{"]
        lines += ["    " + s for s in body]
        lines += ["}", ""]
        return lines

    def callback_invoker(self):
        name, lib = self.callback
        # the overridden library function hands the callback either its own
        # argument or a fresh library object, and returns the callback's result
        if self.rng.random() < 0.5:
            body = [f"t = new {self.pick(self.classes)}", f"u = call {name}(t)", "return u"]
        else:
            body = [f"u = call {name}(ob)", "return u"]
        return [f"func {lib}(ob) library {{", *("    " + s for s in body), "}", ""]


def generate_text(seed: int, profile: Profile = DEFAULT) -> str:
    return _Gen(random.Random(seed), profile).build()


def generate_bundle(seed: int, profile: Profile = DEFAULT) -> Bundle:
    return parse_program(generate_text(seed, profile))


def corpus(seed: int, n: int, profile: Profile = DEFAULT) -> list[Bundle]:
    rng = random.Random(seed)
    return [generate_bundle(rng.randrange(2**32), profile) for _ in range(n)]
