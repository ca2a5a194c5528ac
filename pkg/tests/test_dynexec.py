import random

import pytest
from hypothesis import given, strategies as st

from conftest import golden
from evsound.dynexec import (
    AllocEvent,
    BindEvent,
    EnterEvent,
    MissingGroundTruth,
    ScheduleExhausted,
    execute,
    execute_traced,
    format_schedule,
    parse_schedule,
    run,
)
from evsound.ir import parse_program
from evsound.monitor import MonitoringScheme, monitoring_min, monitoring_naive, monitoring_opt
from evsound.oracle.enumerate import random_schedules
from evsound.oracle.generate import WITH_CALLBACKS, corpus, generate_bundle
from evsound.pta import compute_pointsto


def test_fig1_reports(fig1):
    scheme = monitoring_opt(fig1, (), compute_pointsto(fig1))
    ex = run(fig1, scheme, [False])
    assert [r.line() for r in ex.reports] == ["R o_list 0 List", "R c_mkStr 1 String", "R c_get 1 String"]
    assert ex.report_log() == golden("fig1_reports_false.log")


def test_fig1_trace(fig1):
    assert execute_traced(fig1, [True]).trace_log() == golden("fig1_trace_true.log")


def test_empty_scheme_observes_nothing(fig1):
    a = run(fig1, MonitoringScheme(), [True])
    b = run(fig1, monitoring_naive(fig1), [True])
    assert a.reports == [] and a.final_state() == b.final_state()


def test_schedule_too_short(fig1):
    with pytest.raises(ScheduleExhausted):
        execute(fig1, MonitoringScheme(), [])


def test_missing_ground_truth():
    b = parse_program("func main() program {\n    call m()\n}\nfunc m() library spec {\n}\n")
    with pytest.raises(MissingGroundTruth):
        execute(b, MonitoringScheme())


def test_null_load_not_reported():
    text = "class A\nfield p program\nfunc main() program {\n    x = new A\n    y = x.p @l\n}\n"
    b = parse_program(text)
    ex = run(b, monitoring_naive(b), (), trace=True)
    assert [r.site for r in ex.reports] == ["main#0"]
    assert all(e.var != "main.y" for e in ex.trace if isinstance(e, BindEvent))


def test_schedule_format_round_trip():
    s = (True, False, True)
    assert format_schedule(s) == "[true,false,true]"
    assert parse_schedule(format_schedule(s)) == s
    with pytest.raises(ValueError):
        parse_schedule("[maybe]")


def _pairs():
    rng = random.Random(11)
    out = []
    for b in corpus(17, 150) + corpus(19, 40, WITH_CALLBACKS):
        for s in random_schedules(b, 3, rng.randrange(1000)):
            out.append((b, s))
    return out[:300]


def test_reports_project_the_trace():
    pairs = _pairs()
    assert len(pairs) == 300
    for b, sched in pairs:
        pi = compute_pointsto(b)
        for scheme in (monitoring_naive(b), monitoring_min(b, (), pi), monitoring_opt(b, (), pi)):
            ex = run(b, scheme, sched, trace=True)
            binds = {(e.site, e.oid) for e in ex.trace if isinstance(e, BindEvent)}
            allocs = {(e.origin, e.oid) for e in ex.trace if isinstance(e, AllocEvent)}
            entered = {e.fn for e in ex.trace if isinstance(e, EnterEvent)}
            for r in ex.reports:
                if r.is_reach:
                    assert r.site.split(":", 1)[1] in entered
                else:
                    assert (r.site, r.oid) in binds | allocs


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(seeds, st.integers(0, 2**16))
def test_monitoring_is_observation_only(seed, sseed):
    b = generate_bundle(seed)
    (sched,) = random_schedules(b, 1, sseed)
    pi = compute_pointsto(b)
    states = {
        run(b, m, sched).final_state()
        for m in (MonitoringScheme(), monitoring_naive(b), monitoring_min(b), monitoring_opt(b, (), pi))
    }
    assert len(states) == 1


@given(seeds)
def test_deterministic_and_dense_oids(seed):
    b = generate_bundle(seed)
    for sched in random_schedules(b, 8, seed):
        a = run(b, monitoring_naive(b), sched, trace=True)
        c = run(b, monitoring_naive(b), sched, trace=True)
        assert a.reports == c.reports and a.trace == c.trace
        assert sorted(a.heap) == list(range(len(a.heap)))
