import pytest

from conftest import golden
from evsound.ir import apply_spec_file, parse_spec_file
from evsound.loop import run_loop
from evsound.oracle.generate import corpus
from evsound.oracle.naive_solver import whole_program_pta
from evsound.pta import Proxy, Site, compute_pointsto
from evsound.specinfer import (
    GENERAL,
    RESTRICTED,
    InferenceError,
    InferenceResult,
    ProxySpec,
    exhaustive_min_cost,
    infer_min_spec,
    infer_proxy_specs,
    install_specs,
    restricted_as_general,
    spec_block,
    spec_files,
    validate_spec,
)

O_STR = Site("o_str", "String")
TARGET = ("main.data", O_STR)


def test_fig1_restricted(fig1):
    res = infer_min_spec(fig1, TARGET, RESTRICTED, {"mkStr"})
    assert res.cost == 2
    assert res.by_function() == {"add": ("this.g = ob",), "get": ("r = this.g", "return r")}
    assert validate_spec(fig1, {"mkStr"}, res, TARGET)
    assert exhaustive_min_cost(fig1, TARGET, RESTRICTED, {"mkStr"}) == 2
    files = spec_files(fig1, res)
    assert files["add"] == golden("fig1_spec_add.spec")
    assert files["get"] == golden("fig1_spec_get.spec")


def test_fig1_spec_files_reparse(fig1):
    res = infer_min_spec(fig1, TARGET, RESTRICTED, {"mkStr"})
    b, active = fig1, {"mkStr"}
    for text in spec_files(fig1, res).values():
        b, names = apply_spec_file(b, parse_spec_file(text))
        active |= names
    assert TARGET in compute_pointsto(b, active).edges


def test_fig1_general(fig1):
    res = infer_min_spec(fig1, TARGET, GENERAL, {"mkStr"})
    assert res.cost == exhaustive_min_cost(fig1, TARGET, GENERAL, {"mkStr"})
    assert validate_spec(fig1, {"mkStr"}, res, TARGET)
    # the example's own field f is taken, so the general field is renamed
    assert res.fields == ("f1",)


def test_empty_candidate_fails(fig1):
    assert not validate_spec(fig1, {"mkStr"}, {}, TARGET)


def test_already_derivable_costs_nothing(fig1):
    res = infer_min_spec(fig1, TARGET, RESTRICTED, {"mkStr", "add", "get"})
    assert res.cost == 0 and res.specs == ()


def test_underivable_target_is_an_error(fig1):
    with pytest.raises(InferenceError):
        infer_min_spec(fig1, ("main.list", O_STR), RESTRICTED, {"mkStr"})
    with pytest.raises(InferenceError):
        infer_min_spec(fig1, ("main.data", Proxy("String", frozenset({"mkStr"}))), RESTRICTED)


def _drop_one(b, res: InferenceResult):
    for spec in res.specs:
        for s in spec.statements:
            if s.cost == 0:
                continue
            cand = {}
            for other in res.specs:
                keep = [t for t in other.statements if t != s]
                cand[other.function] = spec_block(b.function(other.function), keep)
            yield s, cand


def test_fig1_statements_all_needed(fig1):
    res = infer_min_spec(fig1, TARGET, RESTRICTED, {"mkStr"})
    for s, cand in _drop_one(fig1, res):
        assert not validate_spec(fig1, {"mkStr"}, cand, TARGET), s.text()


def test_proxy_specs():
    single = Proxy("String", frozenset({"mkStr"}))
    assert infer_proxy_specs([single]) == {ProxySpec("String", "mkStr")}
    assert infer_proxy_specs([Proxy("String", frozenset({"mkStr", "get"}))]) == set()
    assert ProxySpec("String", "mkStr").line() == "proxyspec String mkStr"


PROXY_REPLAY = """class S
func main() program {
    s = call mk() @c_mk
    t = s
}
func mk() library {
    v = new S @o_s
    return v
}
"""


def test_proxy_spec_replay():
    from evsound.ir import parse_program

    b = parse_program(PROXY_REPLAY)
    res = run_loop(b, (), [()])
    specs = infer_proxy_specs(res.state.observed_proxies, b)
    assert specs == {ProxySpec("S", "mk")}
    b2, active = apply_spec_file(b, parse_spec_file("".join(p.line() + "\n" for p in specs)))
    replay = run_loop(b2, active, [()])
    assert not replay.reported
    assert all(isinstance(o, Site) for _, o in replay.pi.edges)
    assert {v for v, _ in replay.pi.edges} == {"main.s", "main.t"}


def _targets(b):
    sites = b.program_sites()
    pi0 = compute_pointsto(b)
    return sorted(
        (e for e in whole_program_pta(b).edges if e[1].id in sites and e not in pi0.edges),
        key=lambda e: (e[0], e[1].id),
    )


def test_corpus_inference():
    n = underivable = 0
    for b in corpus(7, 200):
        gt = {fn.name: fn.body for fn in b.library_functions}
        for target in _targets(b)[:3]:
            assert validate_spec(b, (), gt, target)
            if exhaustive_min_cost(b, target, GENERAL) is None:
                # only reachable through a library allocation that merges objects;
                # pessimistic bodies never allocate
                assert exhaustive_min_cost(b, target, RESTRICTED) is None
                with pytest.raises(InferenceError):
                    infer_min_spec(b, target, GENERAL)
                with pytest.raises(InferenceError):
                    infer_min_spec(b, target, RESTRICTED)
                underivable += 1
                continue
            res = infer_min_spec(b, target, RESTRICTED)
            assert validate_spec(b, (), res, target)
            assert res.cost == exhaustive_min_cost(b, target, RESTRICTED)
            assert validate_spec(b, (), restricted_as_general(b, res), target)
            gen = infer_min_spec(b, target, GENERAL)
            assert gen.cost == exhaustive_min_cost(b, target, GENERAL)
            assert gen.cost <= restricted_as_general(b, res).cost
            bundle, active = install_specs(b, res)
            assert target in compute_pointsto(bundle, active).edges
            for s, cand in _drop_one(b, res):
                assert not validate_spec(b, (), cand, target), (target, s.text())
            n += 1
    assert n >= 30 and underivable < n
