"""Batch command line: ``evsound <command> ...``.

Exit status is 0 on success, 1 when a checked invariant is violated (or
the analyzed program fails validation) and 2 on usage or input errors.
Artifacts go to ``--out``, defaulting to ``$EVSOUND_OUT`` or
``./evsound-out``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .dynexec import format_schedule, parse_schedule, run
from .ir import IRSyntaxError, apply_spec_file, parse_program, parse_spec_file, validate_program
from .loop import run_loop
from .monitor import SCHEMES, make_scheme, monitoring_min, monitoring_naive, monitoring_opt, serialize_scheme
from .pta import (
    MissingEdgeSet,
    compute_pointsto,
    may_alias,
    parse_edges,
    parse_object,
    points_to,
    points_to_classes,
    pointsto_from_text,
    serialize_edges,
    serialize_pointsto,
    taint_flows,
)
from .specinfer import MODES, RESTRICTED, InferenceError, infer_min_spec, infer_proxy_specs, spec_files

OUT_ENV = "EVSOUND_OUT"


class UsageError(Exception):
    pass


# -- shared helpers -----------------------------------------------------------


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "evsound-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str) -> Path:
    p = out / name
    p.write_text(text)
    return p


def load_bundle(args):
    """Parse the bundle, apply ``--specs`` files and resolve ``--activate``.

    Inline specifications stay inactive unless named by ``--activate``
    (``all`` activates every specification the bundle carries).
    """
    b = parse_program(_read(args.bundle))
    specs = set()
    if getattr(args, "specs", None):
        d = Path(args.specs)
        if not d.is_dir():
            raise UsageError(f"--specs {d} is not a directory")
        for f in sorted(d.glob("*.spec")):
            b, names = apply_spec_file(b, parse_spec_file(f.read_text()))
            specs |= names
    for name in _names(getattr(args, "activate", None)):
        if name == "all":
            specs |= {fn.name for fn in b.library_functions if fn.spec is not None}
            continue
        fn = b.function_map.get(name)
        if fn is None or not fn.is_library or fn.spec is None:
            raise UsageError(f"--activate {name}: no specification for that function")
        specs.add(name)
    return b, frozenset(specs)


def _names(text):
    return [x for x in (text or "").replace(",", " ").split() if x]


def _site_classes(b) -> dict:
    from .ir import Alloc, walk

    out = {}
    for fn in b.functions:
        for blk in (fn.body, fn.spec):
            for s in walk(blk or ()):
                if isinstance(s, Alloc):
                    out[s.id] = s.cls
    return out


def _pi_miss(args, b):
    if not getattr(args, "pi_miss", None):
        return MissingEdgeSet()
    return MissingEdgeSet(parse_edges(_read(args.pi_miss), _site_classes(b)))


def parse_schedules(spec: str, b) -> list:
    """``exhaustive[:K]``, ``random:N:SEED`` or ``explicit:[..];[..]``."""
    from .oracle.enumerate import DEFAULT_CAP, BranchCapExceeded, enumerate_executions, random_schedules

    kind, _, rest = spec.partition(":")
    try:
        if kind == "exhaustive":
            return enumerate_executions(b, int(rest) if rest else DEFAULT_CAP)
        if kind == "random":
            n, _, seed = rest.partition(":")
            return random_schedules(b, int(n), int(seed or 0))
        if kind == "explicit":
            return [parse_schedule(s) for s in rest.split(";") if s.strip()]
    except BranchCapExceeded as e:
        raise UsageError(str(e)) from None
    except ValueError as e:
        raise UsageError(f"--schedules {spec}: {e}") from None
    raise UsageError(f"--schedules {spec}: expected exhaustive, random:N:SEED or explicit:...")


def _violations(b) -> int:
    vs = validate_program(b)
    for v in vs:
        print(f"violation {v.kind} {v.where}: {v.detail}", file=sys.stderr)
    return 1 if vs else 0


# -- commands -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    b, specs = load_bundle(args)
    pi = compute_pointsto(b, specs, _pi_miss(args, b))
    p = _write(_out_dir(args), "pi.txt", serialize_pointsto(pi))
    print(f"{len(pi)} edges -> {p}")
    return _violations(b)


def cmd_execute(args) -> int:
    b, specs = load_bundle(args)
    pi = compute_pointsto(b, specs, _pi_miss(args, b))
    scheme = make_scheme(args.scheme, b, specs, pi)
    try:
        sched = parse_schedule(args.schedule)
    except ValueError as e:
        raise UsageError(str(e)) from None
    ex = run(b, scheme, sched, trace=args.trace)
    out = _out_dir(args)
    p = _write(out, "reports.log", ex.report_log())
    if args.trace:
        _write(out, "trace.log", ex.trace_log())
    print(f"{len(ex.reports)} reports -> {p}")
    return 0


def cmd_loop(args) -> int:
    b, specs = load_bundle(args)
    schedules = parse_schedules(args.schedules, b)
    res = run_loop(b, specs, schedules, args.scheme, pi_miss=_pi_miss(args, b))
    out = _out_dir(args)
    _write(out, "transcript.txt", res.transcript_text())
    _write(out, "pi.txt", serialize_pointsto(res.pi))
    _write(out, "pi_miss.txt", serialize_edges(res.state.pi_miss.edges))
    _write(out, "scheme.txt", serialize_scheme(res.state.scheme))
    proxies = sorted(p.line() for p in infer_proxy_specs(res.state.observed_proxies, b))
    _write(out, "proxyspecs.spec", "".join(line + "\n" for line in proxies))
    sys.stdout.write(res.transcript_text())
    if args.report_reduction:
        pi0 = compute_pointsto(b, specs)
        sizes = (
            ("naive", len(monitoring_naive(b))),
            ("min", len(monitoring_min(b, specs, pi0))),
            ("opt", len(monitoring_opt(b, specs, pi0))),
            ("opt-final", len(monitoring_opt(b, specs, res.pi))),
        )
        for name, n in sizes:
            print(f"monitors {name} {n}")
    return 0


def cmd_infer(args) -> int:
    b, specs = load_bundle(args)
    var, sep, tok = args.target.partition("->")
    if not sep:
        raise UsageError("--target must look like 'var -> site:id'")
    try:
        obj = parse_object(tok.strip(), _site_classes(b))
    except ValueError as e:
        raise UsageError(str(e)) from None
    try:
        res = infer_min_spec(b, (var.strip(), obj), args.mode, specs, _pi_miss(args, b))
    except InferenceError as e:
        print(f"inference failed: {e}", file=sys.stderr)
        return 1
    out = _out_dir(args) / "specs"
    out.mkdir(exist_ok=True)
    for name, text in sorted(spec_files(b, res).items()):
        _write(out, f"{name}.spec", text)
    print(f"cost {res.cost}")
    for spec in res.specs:
        print(f"{spec.function}: " + "; ".join(s.text() for s in spec.statements))
    return 0


def cmd_query(args) -> int:
    b = parse_program(_read(args.bundle)) if args.bundle else None
    classes = _site_classes(b) if b else None
    pi = pointsto_from_text(_read(args.pi), classes, b.visible_variables() if b else ())
    try:
        if args.alias:
            print("true" if may_alias(pi, *args.alias) else "false")
        elif args.types:
            print(" ".join(sorted(points_to_classes(pi, args.types))))
        elif args.pts:
            for o in sorted(points_to(pi, args.pts), key=lambda o: o.token()):
                print(o.token())
        elif args.flows:
            if b is None:
                raise UsageError("--flows needs --bundle for source and sink markers")
            for src, snk in sorted(taint_flows(b, pi)):
                print(f"{src} -> {snk}")
        else:
            raise UsageError("query needs one of --alias, --types, --pts, --flows")
    except KeyError as e:
        raise UsageError(f"unknown variable {e.args[0]}") from None
    return 0


def cmd_oracle_check(args) -> int:
    from .oracle.checks import SUITES, run_suites
    from .oracle.generate import DEFAULT, WITH_CALLBACKS

    opts = {"seed": 7, "n": 200}
    for item in args.corpus or ():
        k, sep, v = item.partition("=")
        if not sep or k not in opts:
            raise UsageError(f"--corpus {item}: expected seed=N or n=N")
        opts[k] = int(v)
    suites = _names(args.suites) or list(SUITES)
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise UsageError(f"unknown suites {bad}; choose from {list(SUITES)}")
    profile = WITH_CALLBACKS if args.callbacks else DEFAULT
    results = run_suites(opts["seed"], opts["n"], suites, profile, args.samples)
    lines = []
    for r in results.values():
        lines.append(r.line())
        lines += [f"  {f}" for f in r.failures[: args.show]]
    text = "".join(line + "\n" for line in lines)
    _write(_out_dir(args), "oracle-check.txt", text)
    sys.stdout.write(text)
    return 0 if all(r.ok for r in results.values()) else 1


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evsound", description=__doc__.splitlines()[0])
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./evsound-out)")
    sub = ap.add_subparsers(dest="command", required=True)

    def bundle_cmd(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("bundle", help="IR source file")
        p.add_argument("--specs", help="directory of *.spec files to activate")
        p.add_argument("--activate", help="inline specs to activate (comma list, or 'all')")
        p.add_argument("--pi-miss", help="file of already observed edges")
        p.add_argument("--out", default=argparse.SUPPRESS)
        p.set_defaults(func=fn)
        return p

    bundle_cmd("analyze", cmd_analyze, "optimistic points-to set")
    p = bundle_cmd("execute", cmd_execute, "one instrumented execution")
    p.add_argument("--schedule", default="[]")
    p.add_argument("--scheme", choices=SCHEMES, default="opt")
    p.add_argument("--trace", action="store_true", help="also write the full trace")
    p = bundle_cmd("loop", cmd_loop, "observe, add counterexamples, re-analyze")
    p.add_argument("--schedules", default="exhaustive")
    p.add_argument("--scheme", choices=SCHEMES, default="opt")
    p.add_argument("--report-reduction", action="store_true")
    p = bundle_cmd("infer", cmd_infer, "minimal specifications for one edge")
    p.add_argument("--target", required=True, help="'var -> site:id'")
    p.add_argument("--mode", choices=MODES, default=RESTRICTED)

    p = sub.add_parser("query", help="answer questions from a saved points-to file")
    p.add_argument("pi", help="points-to file written by analyze or loop")
    p.add_argument("--bundle", help="IR source, for site classes and flow markers")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alias", nargs=2, metavar=("X", "Y"))
    g.add_argument("--types", metavar="X")
    g.add_argument("--pts", metavar="X")
    g.add_argument("--flows", action="store_true")
    p.add_argument("--out", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("oracle-check", help="property suites on a generated corpus")
    p.add_argument("--corpus", nargs="*", metavar="KEY=N", help="seed=N n=N")
    p.add_argument("--suites", help="comma list (default: all)")
    p.add_argument("--samples", type=int, default=60, help="minimality pairs to sample")
    p.add_argument("--callbacks", action="store_true", help="generate callback fixtures")
    p.add_argument("--show", type=int, default=5, help="failures listed per suite")
    p.add_argument("--out", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"evsound: {e}", file=sys.stderr)
        return 2
    except IRSyntaxError as e:
        print(f"evsound: {args.bundle if hasattr(args, 'bundle') else ''}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
