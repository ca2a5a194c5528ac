import pytest
from hypothesis import given, strategies as st

from conftest import fig1_text
from evsound.dynexec import AllocEvent, BindEvent, execute_traced
from evsound.ir import (
    Call,
    IRSyntaxError,
    apply_spec_file,
    parse_program,
    parse_spec_file,
    print_program,
    rewrite_shared_fields,
    validate_program,
)
from evsound.ir.model import Load, Store, walk
from evsound.oracle.enumerate import enumerate_executions
from evsound.oracle.generate import WITH_CALLBACKS, corpus, generate_text

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_fig1_parses(fig1):
    assert fig1.visible_variables() == {"main.str", "main.list", "main.data", "main.dataCopy"}
    assert set(fig1.program_sites()) == {"o_list"}
    assert fig1.entry == "main"
    assert validate_program(fig1) == []


def test_empty_text_has_no_entry():
    with pytest.raises(IRSyntaxError, match="no entry function"):
        parse_program("")


def test_syntax_error_has_position():
    with pytest.raises(IRSyntaxError) as e:
        parse_program("func main() program {\n    x = = y\n}\n")
    assert e.value.line == 2


def test_unresolved_callee():
    with pytest.raises(IRSyntaxError, match="nope"):
        parse_program("func main() program {\n    x = call nope()\n}\n")


def test_duplicate_ids_rejected():
    text = "class A\nfunc main() program {\n    x = new A @s\n    y = new A @s\n}\n"
    with pytest.raises(IRSyntaxError):
        parse_program(text)


def test_auto_ids_are_file_order():
    b = parse_program("class A\nfunc main() program {\n    x = new A\n    y = x\n}\n")
    assert [s.id for s in b.function("main").body] == ["main#0", "main#1"]


def test_fig1_round_trip(fig1):
    assert parse_program(print_program(fig1)) == fig1


@given(seeds)
def test_round_trip_generated(seed):
    b = parse_program(generate_text(seed))
    assert parse_program(print_program(b)) == b


def test_round_trip_corpus():
    for b in corpus(7, 200) + corpus(3, 30, WITH_CALLBACKS):
        assert parse_program(print_program(b)) == b
        assert validate_program(b) == []


LIB_FIELD = """class A
field g library
func main() program {
    x = new A
    y = x.g
}
func put(this, v) library {
    this.g = v
}
"""


def test_shared_field_violation():
    b = parse_program(LIB_FIELD)
    kinds = [v.kind for v in validate_program(b)]
    assert kinds == ["SharedFieldViolation"]


def test_library_touches_program_field():
    text = LIB_FIELD.replace("field g library", "field g library\nfield p program")
    text = text.replace("    y = x.g\n", "").replace("this.g = v", "this.p = v")
    b = parse_program(text)
    assert [v.kind for v in validate_program(b)] == ["LibraryTouchesProgramField"]


def test_recursion_flagged():
    text = "func main() program {\n    call h()\n}\nfunc h() program {\n    call main()\n}\n"
    assert "Recursion" in [v.kind for v in validate_program(parse_program(text))]


def test_rewrite_shared_fields():
    b = parse_program(LIB_FIELD)
    r = rewrite_shared_fields(b)
    load = r.function("main").body[1]
    assert isinstance(load, Call) and load.callee == "get_g" and load.args == ("x",)
    assert load.id == b.function("main").body[1].id
    assert validate_program(r) == []
    assert parse_program(print_program(r)) == r


def test_rewrite_identity_without_library_fields(fig1):
    assert rewrite_shared_fields(fig1) is fig1


def test_rewrite_program_field_is_misuse():
    b = parse_program(LIB_FIELD.replace("field g library", "field g library\nfield p program"))
    with pytest.raises(ValueError):
        rewrite_shared_fields(b, ["p"])


def _projection(b, sched):
    ex = execute_traced(b, sched)
    return [e.line() for e in ex.trace if isinstance(e, (AllocEvent, BindEvent))]


def test_rewrite_preserves_traces():
    # program fields turned library-owned: the original still runs (the
    # interpreter does not care about owners), the rewrite goes through accessors
    checked = 0
    for text in (generate_text(s) for s in range(400)):
        if "field p0 program" not in text:
            continue
        text = text.replace(" program\n", " library\n")
        b = parse_program(text)
        if not any(isinstance(s, (Load, Store)) for fn in b.program_functions for s in walk(fn.body)):
            continue
        r = rewrite_shared_fields(b)
        assert validate_program(r) == []
        for sched in enumerate_executions(b):
            assert _projection(b, sched) == _projection(r, sched)
        checked += 1
        if checked == 100:
            break
    assert checked == 100


def test_spec_file_applies(fig1):
    sf = parse_spec_file("field h library\nspec get(this) {\n    r = this.h\n    return r\n}\nproxyspec String mkStr\n")
    b, names = apply_spec_file(fig1, sf)
    assert names == {"get", "mkStr"}
    assert any(isinstance(s, Load) and s.field == "h" for s in walk(b.function("get").spec))


def test_spec_file_rejects_program_parts():
    with pytest.raises(IRSyntaxError):
        parse_spec_file(fig1_text())
