import random

from hypothesis import given, strategies as st

from conftest import golden
from evsound.dynexec import run
from evsound.ir import parse_program
from evsound.loop import build_object_mapping, derive_counterexamples, run_loop
from evsound.monitor import (
    MonitoringScheme,
    diff_is_empty,
    monitoring_min,
    monitoring_naive,
    monitoring_opt,
    parse_scheme,
    potential_callbacks,
    scheme_diff,
    serialize_scheme,
)
from evsound.oracle.dynamic import oracle_counterexamples
from evsound.oracle.enumerate import enumerate_executions
from evsound.oracle.generate import WITH_CALLBACKS, corpus, generate_bundle
from evsound.pta import MissingEdgeSet, Proxy, Site, compute_pointsto

CALLS = {"c_mkStr", "c_add", "c_get", "c_send"}


def test_fig1_naive(fig1):
    m = monitoring_naive(fig1)
    assert m.alloc == {"o_list"} and m.call == CALLS and m.value == {"a_copy"}
    assert serialize_scheme(m) == golden("fig1_scheme_naive.txt")


def test_empty_entry_naive():
    assert monitoring_naive(parse_program("func main() program {\n}\n")).is_empty()


def test_fig1_min(fig1):
    m = monitoring_min(fig1)
    assert m.alloc == {"o_list"} and m.call == CALLS
    assert "c_get" not in monitoring_min(fig1, {"get"}).call


def test_no_library_calls():
    b = parse_program("class A\nfunc main() program {\n    x = new A\n}\n")
    assert monitoring_min(b).call == frozenset()
    # the object never reaches missing code
    assert monitoring_opt(b, (), compute_pointsto(b)).alloc == frozenset()


def test_fig1_opt(fig1):
    m = monitoring_opt(fig1, (), compute_pointsto(fig1))
    assert m.alloc == {"o_list"} and m.call == CALLS
    assert serialize_scheme(m) == golden("fig1_scheme_opt.txt")


GROWS = """class A
func main() program {
    a = new A @o_a
    x = call m() @c_m
    call n(x) @c_n
}
func m() library {
}
func n(p) library {
}
"""


def test_opt_grows_with_missing_edge():
    b = parse_program(GROWS)
    assert monitoring_opt(b, (), compute_pointsto(b)).alloc == frozenset()
    pi = compute_pointsto(b, (), MissingEdgeSet(frozenset({("main.x", Site("o_a", "A"))})))
    assert monitoring_opt(b, (), pi).alloc == {"o_a"}


CALLBACK = """class Location
class Manager
func main() program {
    mgr = new Manager @o_mgr
    call requestUpdates(mgr) @c_req
}
func onLocationChanged(loc) program overrides requestUpdates {
    seen = loc @a_seen
}
func requestUpdates(ob) library {
    l = new Location @o_loc
    call onLocationChanged(l)
}
"""


def test_callback_parameter_monitored():
    b = parse_program(CALLBACK)
    slots, reach = potential_callbacks(b)
    assert slots == {("onLocationChanged", 0)}
    assert reach == {"onLocationChanged"}
    assert potential_callbacks(parse_program(GROWS)) == (frozenset(), frozenset())


def test_callback_monitor_negative_control():
    b = parse_program(CALLBACK)
    pi = compute_pointsto(b)
    full = monitoring_opt(b, (), pi)
    assert oracle_counterexamples(b, (), pi, ())
    assert run_loop(b, (), [()]).reported
    stripped = full._with("callbacks", ())._with("reach", ())
    reports = run(b, stripped, ()).reports
    ces = derive_counterexamples(b, (), reports, build_object_mapping(b, (), reports), pi)
    assert not ces.edges and not ces.reached


def test_scheme_diff(fig1):
    m = monitoring_opt(fig1, (), compute_pointsto(fig1))
    d = scheme_diff(MonitoringScheme(), m)
    assert d["added"]["alloc"] == m.alloc and d["added"]["call"] == m.call
    assert not any(d["removed"].values())
    assert diff_is_empty(scheme_diff(m, m))


def test_no_alloc_monitor_removed_during_loops():
    for b in corpus(7, 60) + corpus(3, 20, WITH_CALLBACKS):
        try:
            schedules = enumerate_executions(b)
        except RuntimeError:
            continue
        res = run_loop(b, (), schedules)
        assert not [l for l in res.transcript if l.startswith("MON - alloc")]


def test_scheme_serialization_round_trip():
    for b in corpus(7, 30) + [parse_program(CALLBACK)]:
        for m in (monitoring_naive(b), monitoring_min(b)):
            assert parse_scheme(serialize_scheme(m)) == m


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(seeds, st.integers(0, 5))
def test_opt_within_min_and_monotone(seed, k):
    b = generate_bundle(seed)
    rng = random.Random(seed)
    vs = sorted(b.visible_variables())
    objs = [Site(i, c) for i, c in sorted(b.program_sites().items())] + [Proxy(b.classes[0], frozenset({"m0"}))]
    pi0 = compute_pointsto(b)
    extra = MissingEdgeSet(frozenset((rng.choice(vs), rng.choice(objs)) for _ in range(k) if vs))
    pi1 = compute_pointsto(b, (), extra)
    o0, o1 = monitoring_opt(b, (), pi0), monitoring_opt(b, (), pi1)
    mmin, naive = monitoring_min(b), monitoring_naive(b)
    assert o0.alloc <= o1.alloc <= mmin.alloc
    assert len(o1) <= len(mmin) <= len(naive)
