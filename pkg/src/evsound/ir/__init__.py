"""The object language: data model, text format, validation and rewrites."""

from .model import (
    LIBRARY,
    PROGRAM,
    Alloc,
    Assign,
    Block,
    Branch,
    Bundle,
    Call,
    FieldDecl,
    Function,
    Load,
    Return,
    Stmt,
    Store,
    callback_slot,
    param_site,
    qualify,
    reach_site,
    split_var,
    walk,
)
from .parser import (
    IRSyntaxError,
    SpecFile,
    apply_spec_file,
    parse_program,
    parse_spec_file,
)
from .printer import print_program, print_spec
from .rewrite import rewrite_shared_fields
from .validate import Violation, validate_program

__all__ = [
    "LIBRARY",
    "PROGRAM",
    "Alloc",
    "Assign",
    "Block",
    "Branch",
    "Bundle",
    "Call",
    "FieldDecl",
    "Function",
    "IRSyntaxError",
    "Load",
    "Return",
    "SpecFile",
    "Stmt",
    "Store",
    "Violation",
    "apply_spec_file",
    "callback_slot",
    "param_site",
    "parse_program",
    "parse_spec_file",
    "print_program",
    "print_spec",
    "qualify",
    "reach_site",
    "rewrite_shared_fields",
    "split_var",
    "validate_program",
    "walk",
]
