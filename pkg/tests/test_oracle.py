import pytest

from evsound.dynexec import execute_traced, run
from evsound.ir import parse_program
from evsound.loop import run_loop
from evsound.monitor import monitoring_naive, monitoring_opt
from evsound.oracle.adversarial import (
    AdversaryNotFound,
    adversarial_drop_library,
    droppable_monitors,
    genuine_reports,
)
from evsound.oracle.dynamic import (
    abstract_edges,
    dynamic_pointsto_oracle,
    ideal_proxy_mapping,
)
from evsound.oracle.enumerate import BranchCapExceeded, enumerate_executions
from evsound.oracle.generate import corpus
from evsound.oracle.naive_solver import whole_program_pta
from evsound.pta import Proxy, Site, compute_pointsto


def test_enumerate_fig1(fig1):
    assert enumerate_executions(fig1) == [(False,), (True,)]


def test_enumerate_branchless():
    assert enumerate_executions(parse_program("func main() program {\n}\n")) == [()]


def test_enumerate_cap():
    body = "".join("    branch {\n    }\n" for _ in range(5))
    b = parse_program(f"func main() program {{\n{body}}}\n")
    assert len(enumerate_executions(b)) == 32
    with pytest.raises(BranchCapExceeded):
        enumerate_executions(b, 4)


def test_schedules_replay_exactly():
    for b in corpus(7, 50):
        for sched in enumerate_executions(b):
            assert run(b, monitoring_naive(b), sched).bits_used == len(sched)


def test_dynamic_oracle_fig1(fig1):
    t = dynamic_pointsto_oracle(fig1, (True,))
    assert ("main.dataCopy", 1) in t.edges and t.origins[1] == "o_str"
    f = dynamic_pointsto_oracle(fig1, (False,))
    assert all(v != "main.dataCopy" for v, _ in f.edges)


def test_dynamic_oracle_equals_naive_reports():
    for b in corpus(7, 50):
        for sched in enumerate_executions(b):
            facts = dynamic_pointsto_oracle(b, sched)
            ex = run(b, monitoring_naive(b), sched)
            from evsound.loop import classify_report

            seen = set()
            for r in ex.reports:
                info = classify_report(b, (), r.site)
                if info.var is not None:
                    seen.add((info.var, r.oid))
            assert seen == facts.edges


def test_ideal_proxies_fig1(fig1):
    assert ideal_proxy_mapping(fig1, (False,)) == {1: frozenset({"main.str", "main.data"})}
    assert ideal_proxy_mapping(fig1, (True,)) == {
        1: frozenset({"main.str", "main.data", "main.dataCopy"})
    }


def test_whole_program_fig1(fig1):
    wp = whole_program_pta(fig1)
    o_str = Site("o_str", "String")
    assert {("main.str", o_str), ("main.data", o_str), ("main.dataCopy", o_str)} <= wp.edges
    assert ("main.list", Site("o_list", "List")) in wp.edges


def test_whole_program_without_library():
    b = parse_program("class A\nfunc main() program {\n    x = new A\n    y = x\n}\n")
    assert whole_program_pta(b).edges == compute_pointsto(b).edges


def test_adversary_drops_get_monitor(fig1):
    adv = adversarial_drop_library(fig1, ("call", "c_get"))
    assert ("main.data", Proxy("List", frozenset({"get"}))) in adv.oracle_ces
    assert not adv.genuine_reported and adv.full_scheme_caught


def test_adversary_drops_alloc_monitor(fig1):
    adv = adversarial_drop_library(fig1, ("alloc", "o_list"))
    assert adv.oracle_ces == {("main.data", Site("o_list", "List"))}
    # without the allocation report the returned list looks like a library object
    assert [r.line() for r in adv.reduced_reports] == ["R c_get 0 List"]
    assert not adv.genuine_reported and adv.full_scheme_caught


def test_adversary_control(fig1):
    """With nothing dropped the same libraries are caught."""
    for m in droppable_monitors(fig1):
        adv = adversarial_drop_library(fig1, m)
        pi = compute_pointsto(fig1)
        full = run(adv.bundle, monitoring_opt(fig1, (), pi), adv.schedule).reports
        facts = dynamic_pointsto_oracle(adv.bundle, adv.schedule)
        assert genuine_reports(adv.bundle, (), full, pi, facts)
        assert run_loop(adv.bundle, (), [adv.schedule]).reported


def test_adversary_rejects_foreign_monitor(fig1):
    with pytest.raises(ValueError):
        adversarial_drop_library(fig1, ("call", "a_copy"))


def test_adversary_not_found_for_harmless_alloc():
    text = """class A
func main() program {
    a = new A @o_a
    a = call m(a) @c_m
}
func m(x) library {
}
"""
    b = parse_program(text)
    excluded = []
    assert ("alloc", "o_a") not in droppable_monitors(b, (), excluded)
    assert [m for m, _ in excluded] == [("alloc", "o_a")]
    with pytest.raises(AdversaryNotFound):
        adversarial_drop_library(b, ("alloc", "o_a"))


def test_abstract_edges_cover_trace(fig1):
    facts = dynamic_pointsto_oracle(fig1, (True,))
    assert abstract_edges(fig1, (), facts) == {
        ("main.list", Site("o_list", "List")),
        ("main.str", Proxy("String", frozenset({"mkStr", "get"}))),
        ("main.data", Proxy("String", frozenset({"mkStr", "get"}))),
        ("main.dataCopy", Proxy("String", frozenset({"mkStr", "get"}))),
    }
    assert len(execute_traced(fig1, (True,)).heap) == 2
