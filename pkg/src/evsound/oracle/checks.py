"""Property checks of the analysis against the brute-force oracles.

Each ``check_*`` function looks at one bundle and returns a list of
human-readable problems (empty when the property holds).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from ..loop import history_bound, run_loop
from ..monitor import monitoring_min, monitoring_naive, monitoring_opt
from ..pta import MissingEdgeSet, Proxy, Site, compute_pointsto
from .adversarial import AdversaryNotFound, adversarial_drop_library, droppable_monitors
from .dynamic import (
    abstract_edges,
    abstract_object,
    dynamic_pointsto_oracle,
    library_allocated,
    oracle_counterexamples,
)
from .enumerate import BranchCapExceeded, enumerate_executions
from .generate import DEFAULT, Profile, corpus
from .naive_solver import whole_program_pta


class Subject:
    """A bundle with its schedules and per-schedule oracle facts, computed once."""

    def __init__(self, b, specs=frozenset(), schedules=None, max_branches: int = 12):
        self.b = b
        self.specs = frozenset(specs)
        self.schedules = list(schedules) if schedules is not None else enumerate_executions(b, max_branches)
        self._facts = {}
        self._loop = {}

    def facts(self, sched):
        sched = tuple(sched)
        if sched not in self._facts:
            self._facts[sched] = dynamic_pointsto_oracle(self.b, sched, self.specs)
        return self._facts[sched]

    def truth(self, sched):
        return abstract_edges(self.b, self.specs, self.facts(sched))

    def loop(self, scheme="opt"):
        if scheme not in self._loop:
            self._loop[scheme] = run_loop(self.b, self.specs, self.schedules, scheme)
        return self._loop[scheme]


def _fmt(edge) -> str:
    return f"{edge[0]} -> {edge[1].token()}"


# ---------------------------------------------------------------------------


def check_eventual_soundness(s: Subject, scheme="opt") -> list[str]:
    res = s.loop(scheme)
    problems = []
    for sched in s.schedules:
        ces = oracle_counterexamples(s.b, s.specs, res.pi, sched, s.facts(sched))
        for e in sorted(ces, key=_fmt):
            problems.append(f"after convergence {list(sched)} still misses {_fmt(e)}")
    bound = history_bound(s.b, s.specs)
    if len(res.history) > bound:
        problems.append(f"{len(res.history)} distinct points-to sets exceed the bound {bound}")
    return problems


def check_monitoring_soundness(s: Subject, schemes=("min", "opt")) -> list[str]:
    """Every execution with a missed edge gets reported; nothing false is reported."""
    problems = []
    pi0 = compute_pointsto(s.b, s.specs)
    for sched in s.schedules:
        truth = s.truth(sched)
        missed = {e for e in truth if e not in pi0.edges}
        if not missed:
            continue
        for kind in schemes:
            res = run_loop(s.b, s.specs, [sched], kind)
            if not res.reported:
                problems.append(f"{kind}: {list(sched)} has {len(missed)} missed edges, none reported")
            for e in res.reported:
                if e not in truth:
                    problems.append(f"{kind}: {list(sched)} false report {_fmt(e)}")
            left = oracle_counterexamples(s.b, s.specs, res.pi, sched, s.facts(sched))
            for e in left:
                problems.append(f"{kind}: {list(sched)} re-execution left {_fmt(e)}")
    all_truth = set()
    for sched in s.schedules:
        all_truth |= s.truth(sched)
    for kind in schemes:
        for e in s.loop(kind).reported:
            if e not in all_truth:
                problems.append(f"{kind}: loop reported unconfirmed {_fmt(e)}")
    return problems


def check_precision(s: Subject, scheme="opt") -> list[str]:
    """Converged edges map into the whole-program result."""
    wp = {(v, o.id) for v, o in whole_program_pta(s.b).edges}
    res = s.loop(scheme)
    origins_of: dict = {}
    for sched in s.schedules:
        facts = s.facts(sched)
        for oid in library_allocated(s.b, s.specs, facts):
            p = abstract_object(s.b, s.specs, facts, oid)
            if p is not None:
                origins_of.setdefault(p, set()).add(facts.origins[oid])
    problems = []
    for v, o in res.pi.edges:
        if isinstance(o, Site):
            if (v, o.id) not in wp:
                problems.append(f"{v} -> {o.token()} not in whole-program result")
        else:
            for origin in sorted(origins_of.get(o, ())):
                if (v, origin) not in wp:
                    problems.append(f"{v} -> {o.token()} maps to missing {v} -> site:{origin}")
    return problems


@dataclass
class ProxyComparison:
    pi_function: object
    pi_ideal: object
    site_only_function: set = field(default_factory=set)
    site_only_ideal: set = field(default_factory=set)
    forward: list = field(default_factory=list)  # ideal edge present, function edge absent
    backward: list = field(default_factory=list)  # function edge present, ideal edge absent
    unsound_ideal: list = field(default_factory=list)


def compare_proxies(s: Subject) -> ProxyComparison:
    """Build both fully-observed points-to sets and compare them."""
    miss_f, miss_i = set(), set()
    observed = []  # (facts, oid)
    for sched in s.schedules:
        facts = s.facts(sched)
        miss_f |= abstract_edges(s.b, s.specs, facts, ideal=False, only_delivered=True)
        miss_i |= abstract_edges(s.b, s.specs, facts, ideal=True, only_delivered=True)
        observed += [(facts, oid) for oid in library_allocated(s.b, s.specs, facts)]
    pi_f = compute_pointsto(s.b, s.specs, MissingEdgeSet(frozenset(miss_f)))
    pi_i = compute_pointsto(s.b, s.specs, MissingEdgeSet(frozenset(miss_i)))
    out = ProxyComparison(pi_f, pi_i)
    sites_f = {e for e in pi_f.edges if isinstance(e[1], Site)}
    sites_i = {e for e in pi_i.edges if isinstance(e[1], Site)}
    out.site_only_function = sites_f - sites_i
    out.site_only_ideal = sites_i - sites_f
    for facts, oid in observed:
        p = abstract_object(s.b, s.specs, facts, oid)
        q = abstract_object(s.b, s.specs, facts, oid, ideal=True)
        if p is None or q is None:
            continue
        for x in sorted(pi_f.program_vars):
            has_i = (x, q) in pi_i.edges
            has_f = (x, p) in pi_f.edges
            if has_i and not has_f:
                out.forward.append((x, q, p))
            if has_f and not has_i:
                out.backward.append((x, p, q))
    for sched in s.schedules:
        for e in abstract_edges(s.b, s.specs, s.facts(sched), ideal=True):
            if e not in pi_i.edges:
                out.unsound_ideal.append(e)
    return out


def check_proxy_equivalence(s: Subject) -> list[str]:
    c = compare_proxies(s)
    problems = []
    for e in sorted(c.site_only_function | c.site_only_ideal, key=_fmt):
        problems.append(f"site edge {_fmt(e)} differs between proxy mappings")
    for x, q, p in c.forward:
        problems.append(f"{x} -> {q.token()} without {x} -> {p.token()}")
    for x, p, q in c.backward:
        problems.append(f"{x} -> {p.token()} without {x} -> {q.token()}")
    for e in c.unsound_ideal:
        problems.append(f"ideal-proxy result misses dynamic edge {e[0]} -> {e[1].token()}")
    return problems


def check_proxy_forward(s: Subject) -> list[str]:
    """The direction that does hold: ideal-proxy facts imply footprint-proxy facts."""
    c = compare_proxies(s)
    problems = [f"{x} -> {q.token()} without {x} -> {p.token()}" for x, q, p in c.forward]
    problems += [f"site edge {_fmt(e)} only with ideal proxies" for e in c.site_only_ideal]
    problems += [f"ideal-proxy result misses {e[0]} -> {e[1].token()}" for e in c.unsound_ideal]
    return problems


def check_monitor_reduction(s: Subject) -> tuple[list[str], bool]:
    """Size ordering of the three schemes; second value: alloc monitors strictly fewer."""
    pi0 = compute_pointsto(s.b, s.specs)
    piN = s.loop("opt").pi
    naive = monitoring_naive(s.b)
    mmin = monitoring_min(s.b, s.specs, pi0)
    problems = []
    strict = False
    for pi in (pi0, piN):
        opt = monitoring_opt(s.b, s.specs, pi)
        if not len(opt) <= len(mmin) <= len(naive):
            problems.append(f"sizes opt={len(opt)} min={len(mmin)} naive={len(naive)}")
        if not opt.alloc <= mmin.alloc:
            problems.append("optimized alloc monitors are not a subset")
        strict = strict or len(opt.alloc) < len(mmin.alloc)
    return problems, strict


def minimality_holds(s: Subject, monitor) -> tuple[bool, str]:
    """Is there a library on which dropping ``monitor`` hides every missed edge?"""
    try:
        adv = adversarial_drop_library(s.b, monitor, s.specs)
    except AdversaryNotFound as e:
        return False, str(e)
    ok = bool(adv.oracle_ces) and not adv.genuine_reported and adv.full_scheme_caught
    return ok, f"schedule {list(adv.schedule)}"


# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def line(self) -> str:
        verdict = "PASS" if self.ok else "FAIL"
        return f"{verdict} {self.name}: {self.checked} checked, {len(self.failures)} failing"


SUITES = ("eventual", "monitoring", "precision", "proxy", "minimality", "reduction")


def run_suites(
    seed: int = 7,
    n: int = 200,
    suites=SUITES,
    profile: Profile = DEFAULT,
    minimality_samples: int = 60,
    progress=None,
) -> dict[str, SuiteResult]:
    bundles = corpus(seed, n, profile)
    results = {name: SuiteResult(name) for name in suites}
    rng = random.Random(seed)
    subjects = {}
    skipped = 0
    for i, b in enumerate(bundles):
        try:
            s = Subject(b)
        except BranchCapExceeded:
            skipped += 1
            continue
        subjects[i] = s
        tag = f"#{i}"
        if "eventual" in results:
            _record(results["eventual"], tag, check_eventual_soundness(s))
        if "monitoring" in results:
            _record(results["monitoring"], tag, check_monitoring_soundness(s))
        if "precision" in results:
            _record(results["precision"], tag, check_precision(s))
        if "proxy" in results:
            _record(results["proxy"], tag, check_proxy_equivalence(s))
        if "reduction" in results:
            problems, strict = check_monitor_reduction(s)
            _record(results["reduction"], tag, problems)
            results["reduction"].extra["strict"] = results["reduction"].extra.get("strict", 0) + strict
        if progress:
            progress(i)
    for r in results.values():
        r.extra["skipped"] = skipped
    if "reduction" in results and not results["reduction"].extra.get("strict"):
        results["reduction"].failures.append("no bundle with strictly fewer allocation monitors")
    if "minimality" in results:
        r = results["minimality"]
        excluded: list = []
        pairs = [(i, m) for i, s in subjects.items() for m in droppable_monitors(s.b, s.specs, excluded)]
        r.extra["eligible"] = len(pairs)
        r.extra["excluded"] = len(excluded)
        ok = 0
        for i, m in rng.sample(pairs, min(minimality_samples, len(pairs))):
            r.checked += 1
            good, note = minimality_holds(subjects[i], m)
            if good:
                ok += 1
            else:
                r.failures.append(f"#{i} {m}: {note}")
        r.extra["confirmed"] = ok
        if r.checked < 50:
            r.failures.append(f"only {r.checked} pairs sampled")
    return results


def _record(res: SuiteResult, tag: str, problems: list[str], limit: Optional[int] = 5) -> None:
    res.checked += 1
    for p in problems[:limit]:
        res.failures.append(f"{tag}: {p}")
