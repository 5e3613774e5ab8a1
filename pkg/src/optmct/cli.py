"""``optmct`` command line.

Exit codes: 0 everything passed, 1 a property failed, 2 bad input,
3 an internal self-check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import contextmanager

from . import __version__
from .analysis import (ConstructionFailure, DoesNotExclude, Excludes, excludes,
                       excludes_identity, joint_lp, joint_minmax, joint_product, op_norm)
from .circuit import CircuitError, evaluate, is_generator_circuit
from .core import CompositionError, Test, format_label, full_coarse_graining
from .lang import format_source, parse
from .mct import InMCT, NormalizationError, NotInMCT, membership, normalize, semantics, to_circuit
from .suites import SUITES, SuiteConfig, digest, report_lines, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    pass


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return text, parse(text)
    except CircuitError as exc:
        raise InputError(f"{path}: {exc}") from None


def _circuit_test(path: str):
    text, src = _load(path)
    if src.circuit is None:
        raise InputError(f"{path}: no circuit statement")
    return text, src, evaluate(src.circuit)


def _named(src, path, name, kinds):
    if name is None:
        names = [n for n, (k, _) in src.tests.items() if k in kinds]
        if not names:
            raise InputError(f"{path}: no {' or '.join(kinds)} declaration found")
        return names
    if name not in src.tests:
        raise InputError(f"{path}: unknown test {name!r}")
    return [name]


def _fmt_matrix(m) -> list:
    return [" ".join(str(v) for v in row) for row in m.rows()]


def print_test(t: Test, out=None):
    out = out or sys.stdout
    print(f"test {t.input} -> {t.output}, {len(t)} outcome(s)", file=out)
    for label, ev in t:
        print(f"outcome {format_label(label) or '()'}:", file=out)
        for line in _fmt_matrix(ev.matrix):
            print("  " + line, file=out)


def _subject(args):
    """The test a verdict command talks about: a named declaration or the circuit."""
    text, src = _load(args.file)
    if getattr(args, "test", None):
        if args.test not in src.tests:
            raise InputError(f"{args.file}: unknown test {args.test!r}")
        return text, src, src.tests[args.test][1]
    if src.circuit is None:
        names = [n for n, (k, _) in src.tests.items()]
        if not names:
            raise InputError(f"{args.file}: nothing to analyse")
        return text, src, src.tests[names[0]][1]
    return text, src, evaluate(src.circuit)


def _emit(record: dict, out):
    print(json.dumps(record, sort_keys=True, default=str), file=out)


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


# -- commands ------------------------------------------------------------

def cmd_eval(args) -> int:
    _, _, t = _circuit_test(args.file)
    print_test(t)
    return EXIT_OK


def cmd_normalize(args) -> int:
    text, src = _load(args.file)
    if src.circuit is None:
        raise InputError(f"{args.file}: no circuit statement")
    if not is_generator_circuit(src.circuit):
        raise InputError(f"{args.file}: circuit uses apply(); only generator circuits normalise")
    try:
        cf = normalize(src.circuit)
    except NormalizationError as exc:
        raise InputError(f"{args.file}: {exc}") from None
    if semantics(cf) != evaluate(src.circuit):
        print("self-check failed: canonical form does not reproduce the circuit", file=sys.stderr)
        return EXIT_INTERNAL
    emitted = format_source(to_circuit(cf))
    if normalize(parse(emitted).circuit).signature() != cf.signature():
        print("self-check failed: emitted circuit does not re-normalise to the same shape",
              file=sys.stderr)
        return EXIT_INTERNAL
    for key, value in cf.describe().items():
        print(f"{key:3} {value}")
    print(f"outcomes {len(cf.prep)} x {len(cf.obs)}")
    if args.emit_opt:
        with _output(args.out) as fh:
            fh.write(emitted)
    return EXIT_OK


def cmd_compat(args) -> int:
    text, src = _load(args.file)
    names = _named(src, args.file, None, ("otest",))
    a_name = args.a or names[0]
    b_name = args.b or (names[1] if len(names) > 1 else names[0])
    for n in (a_name, b_name):
        if n not in src.tests or src.tests[n][0] != "otest":
            raise InputError(f"{args.file}: {n!r} is not an otest")
    a, b = src.test(a_name), src.test(b_name)
    try:
        prod = joint_product(a, b)
        lp = joint_lp(a, b)
    except CompositionError as exc:
        raise InputError(str(exc)) from None
    mm = joint_minmax(a, b)
    ok = prod.verify(a, b) and lp.verify(a, b)
    with _output(args.out) as out:
        _emit({"operation": "compat", "inputs": digest(text), "a": a_name, "b": b_name,
               "verdict": "compatible" if ok else "fail",
               "witness": {"product": opt_joint(prod), "lp": opt_joint(lp)},
               "minmax": (mm.identity if isinstance(mm, ConstructionFailure)
                          else opt_joint(mm))}, out)
    return EXIT_OK if ok else EXIT_FAIL


def opt_joint(w) -> dict:
    return {format_label(l): [str(v) for v in ev.vector()] for l, ev in w.joint}


def cmd_member(args) -> int:
    text, src, t = _subject(args)
    v = membership(t, ancilla_cap=args.ancilla_cap, outcome_cap=args.outcome_cap)
    rec = {"operation": "member", "inputs": digest(text), "verdict": v.verdict}
    if isinstance(v, InMCT):
        rec["witness"] = {"shape": v.witness.describe(), "opt": format_source(to_circuit(v.witness)),
                          "partition": {format_label(k): [format_label(x) for x in blk]
                                        for k, blk in v.partition.items()}}
    elif isinstance(v, NotInMCT):
        rec["certificate"] = {"kind": v.certificate.kind, "detail": v.certificate.detail}
    else:
        rec["reason"] = v.reason
    with _output(args.out) as out:
        _emit(rec, out)
    return EXIT_OK


def cmd_irrev(args) -> int:
    text, src, t = _subject(args)
    if args.target:
        if args.target not in src.tests:
            raise InputError(f"{args.file}: unknown test {args.target!r}")
        try:
            v = excludes(t, src.test(args.target), within_mct=not args.ct,
                         ancilla_cap=args.ancilla_cap, outcome_cap=args.outcome_cap)
        except CompositionError as exc:
            raise InputError(str(exc)) from None
    else:
        v = excludes_identity(t, within_mct=not args.ct, ancilla_cap=args.ancilla_cap,
                              outcome_cap=args.outcome_cap)
    rec = {"operation": "excludes" if args.target else "excludes_identity",
           "inputs": digest(text), "verdict": v.verdict}
    if isinstance(v, DoesNotExclude):
        w = v.witness
        rec["witness"] = {"route": v.route, "environment": str(w.env),
                          "dilation": format_source(_as_source(w.dilation, "dilation"))}
    elif isinstance(v, Excludes):
        rec["certificate"] = v.certificate
    else:
        rec["reason"] = v.reason
    with _output(args.out) as out:
        _emit(rec, out)
    return EXIT_OK


def _as_source(t, name):
    from .lang import CircuitSource
    return CircuitSource({}, {name: ("test", t)}, None)


def cmd_norm(args) -> int:
    text, src = _load(args.file)
    names = list(src.tests)
    a_name = args.a or (names[0] if names else None)
    b_name = args.b or (names[1] if len(names) > 1 else None)
    if a_name is None or b_name is None:
        raise InputError(f"{args.file}: norm needs two declared tests")
    for n in (a_name, b_name):
        if n not in src.tests:
            raise InputError(f"{args.file}: unknown test {n!r}")
    a = full_coarse_graining(src.test(a_name))
    b = full_coarse_graining(src.test(b_name))
    if a.matrix.shape != b.matrix.shape or (a.input, a.output) != (b.input, b.output):
        raise InputError(f"{args.file}: {a_name} and {b_name} have different types")
    value = op_norm(a.matrix - b.matrix)
    with _output(args.out) as out:
        _emit({"operation": "op_norm", "inputs": digest(text), "a": a_name, "b": b_name,
               "value": str(value)}, out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg = SuiteConfig(args.suite, cases=args.cases, max_dim=args.max_dim,
                          max_factors=args.max_factors, seed=args.seed,
                          ancilla_cap=args.ancilla_cap, outcome_cap=args.outcome_cap)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    start = time.perf_counter()
    summary = None
    table = sys.stderr if args.out is None else sys.stdout
    with _output(args.out) as out:
        for rec, line in _paired(run_suite(cfg, jobs=args.jobs)):
            print(line, file=out)
            if rec["record"] == "summary":
                summary = rec
    elapsed = time.perf_counter() - start
    print(f"suite {cfg.suite:14} pass {summary['pass']:6} fail {summary['fail']:6} "
          f"unknown {summary['unknown']:6}  {elapsed:.1f}s", file=table)
    return EXIT_FAIL if summary["fail"] else EXIT_OK


def _paired(records):
    for rec in records:
        yield rec, next(report_lines([rec]))


# -- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optmct", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"optmct {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def caps(sp):
        sp.add_argument("--ancilla-cap", type=int, default=None)
        sp.add_argument("--outcome-cap", type=int, default=16)

    sp = sub.add_parser("eval", help="evaluate a circuit and print its events")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("normalize", help="canonical form of a generator circuit")
    sp.add_argument("file")
    sp.add_argument("--emit-opt", action="store_true", help="write the canonical circuit as .opt")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("compat", help="joint observation for two otests")
    sp.add_argument("file")
    sp.add_argument("--a")
    sp.add_argument("--b")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_compat)

    sp = sub.add_parser("member", help="decide membership in the minimal classical theory")
    sp.add_argument("file")
    sp.add_argument("--test", help="a declared test instead of the circuit")
    caps(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_member)

    sp = sub.add_parser("irrev", help="does the test exclude the identity (or --target)?")
    sp.add_argument("file")
    sp.add_argument("--test", help="a declared test instead of the circuit")
    sp.add_argument("--target", help="declared test to check exclusion against")
    sp.add_argument("--ct", action="store_true", help="allow every classical test, not only MCT")
    caps(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_irrev)

    sp = sub.add_parser("norm", help="operational distance between two declared tests")
    sp.add_argument("file")
    sp.add_argument("--a")
    sp.add_argument("--b")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("verify", help="run a property suite")
    sp.add_argument("--suite", required=True, help=", ".join(SUITES))
    sp.add_argument("--cases", type=int, default=100)
    sp.add_argument("--max-dim", type=int, default=3)
    sp.add_argument("--max-factors", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1)
    caps(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"optmct: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssertionError as exc:
        print(f"optmct: internal self-check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
