"""Property suites: seeded case generators, per-case checks and reports.

Each case is a pure function of ``(config, index)``, so cases can run in
any order or in parallel and the report is still identical for identical
configs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from itertools import product
from typing import Iterator

from . import __version__
from .analysis import (DoesNotExclude, ExclusionUnknown, induced_observation, excludes,
                       excludes_identity, joint_lp, joint_minmax, joint_product, lift_observation,
                       mct_no_broadcasting_sweep, niwd_check, op_norm)
from .circuit import Identity, Obs, Par, Permutation, evaluate, seq_all
from .core import (SystemType, TRIVIAL, Test, compose_par, compose_seq, full_coarse_graining,
                   identity_event)
from .lang import CircuitSource, format_source, parse
from .linalg import QMatrix
from .mct import (NotInMCT, canonical_par_compose, canonical_seq_compose, is_atomic_identity_refinement,
                  membership, normalize, semantics, to_circuit)
from .permutations import all_permutations, decompose_bipartite
from .sampling import (CircuitBuilder, case_rng, identity_wrapped_circuit, random_circuit,
                       random_deterministic_event, random_observation_test, random_permutation,
                       random_state, random_system, random_test)

__all__ = ["SuiteConfig", "SUITES", "run_case", "run_suite", "report_lines", "opt_for_tests",
           "digest", "ct_refinement_control"]


@dataclass(frozen=True)
class SuiteConfig:
    suite: str
    cases: int = 100
    max_dim: int = 3
    max_factors: int = 4
    seed: int = 0
    ancilla_cap: int | None = None
    outcome_cap: int = 16

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.cases < 0:
            raise ValueError("case count must be non-negative")
        if self.max_dim < 1 or self.max_factors < 1:
            raise ValueError("max-dim and max-factors must be positive")
        if (self.ancilla_cap is not None and self.ancilla_cap < 0) or self.outcome_cap < 0:
            raise ValueError("caps must be non-negative")


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def opt_for_tests(**named) -> str:
    """``.opt`` text declaring the given tests (kind inferred from their shape)."""
    tests = {}
    for name, t in named.items():
        if t.input == TRIVIAL and t.output != TRIVIAL:
            kind = "ptest"
        elif t.output == TRIVIAL and t.input != TRIVIAL:
            kind = "otest"
        else:
            kind = "test"
        tests[name] = (kind, t)
    return format_source(CircuitSource({}, tests, None))


def ct_refinement_control() -> Test:
    """``{|0><0|, |1><1|}`` on a bit: a classical refinement of the identity."""
    a = SystemType((2,))
    return Test(a, a, [("0", [[1, 0], [0, 0]]), ("1", [[0, 0], [0, 1]])])


def _record(cfg, i, operation, text, verdict, detail=None, counterexample=False):
    rec = {"record": "case", "suite": cfg.suite, "case": i, "operation": operation,
           "seed": f"{cfg.seed}:{cfg.suite}:{i}", "inputs": digest(text), "verdict": verdict}
    if detail is not None:
        rec["detail"] = detail
    if verdict == "fail" or counterexample:
        rec["counterexample"] = text
    return rec


# -- suites --------------------------------------------------------------

def _population(cfg, i):
    """Random MCT tests on ``A -> A``; odd cases are built to refine the identity."""
    rng = case_rng(cfg.seed, cfg.suite, i)
    a = random_system(rng, max(1, min(3, cfg.max_factors - 1)), max(2, cfg.max_dim))
    if i % 2:
        src = identity_wrapped_circuit(rng, a, cfg.max_factors, max(2, cfg.max_dim))
    else:
        src = random_circuit(rng, inp=a, out=a, max_factors=cfg.max_factors,
                             max_dim=max(2, cfg.max_dim))
    return a, src, semantics(normalize(src.circuit))


def case_atomicity(cfg, i):
    a, src, t = _population(cfg, i)
    text = format_source(src)
    refines = full_coarse_graining(t).matrix == identity_event(a).matrix
    ok = not refines or is_atomic_identity_refinement(t)
    return _record(cfg, i, "is_atomic_identity_refinement", text,
                   "pass" if ok else "fail", {"identity_refinement": refines})


def case_niwd(cfg, i):
    a, src, t = _population(cfg, i)
    refines = full_coarse_graining(t).matrix == identity_event(a).matrix
    return _record(cfg, i, "niwd_check", format_source(src),
                   "pass" if niwd_check(t) else "fail", {"non_disturbing": refines})


def case_normalize(cfg, i):
    rng = case_rng(cfg.seed, cfg.suite, i)
    src = random_circuit(rng, max_factors=cfg.max_factors, max_dim=max(2, cfg.max_dim))
    cf = normalize(src.circuit)
    ok = semantics(cf) == evaluate(src.circuit)
    again = normalize(parse(format_source(to_circuit(cf))).circuit)
    ok = ok and again.signature() == cf.signature()
    return _record(cfg, i, "normalize", format_source(src), "pass" if ok else "fail",
                   cf.describe())


def case_closure(cfg, i):
    rng = case_rng(cfg.seed, cfg.suite, i)
    dim = max(2, cfg.max_dim)
    s1 = random_circuit(rng, max_factors=cfg.max_factors, max_dim=dim, depth=4, max_leaves=3)
    f = normalize(s1.circuit)
    if i % 2:
        s2 = random_circuit(rng, inp=f.output, max_factors=cfg.max_factors, max_dim=dim,
                            depth=4, max_leaves=3)
        op = "canonical_seq_compose"
    else:
        s2 = random_circuit(rng, max_factors=max(1, cfg.max_factors - len(f.input.factors)),
                            max_dim=dim, depth=4, max_leaves=2)
        op = "canonical_par_compose"
    g = normalize(s2.circuit)
    if op == "canonical_seq_compose":
        ok = semantics(canonical_seq_compose(f, g)) == compose_seq(semantics(f), semantics(g))
    else:
        ok = semantics(canonical_par_compose(f, g)) == compose_par(semantics(f), semantics(g))
    text = format_source(s1) + "# second\n" + format_source(s2)
    return _record(cfg, i, op, text, "pass" if ok else "fail")


def _perm_matrix_product(dec) -> QMatrix:
    return (dec.s4.tensor(dec.s2).matrix() @ dec.middle().matrix()
            @ dec.s3.tensor(dec.s1).matrix())


def _dims_for(n: int, seed: int) -> list:
    """Factor dimensions for the exhaustive sweep over ``n`` slots.

    Up to four factors every assignment from ``{1, 2, 3}`` is used; beyond
    that a fixed mixed set plus seeded samples keeps the sweep bounded.
    """
    if n <= 4:
        return [tuple(d) for d in product((1, 2, 3), repeat=n)]
    fixed = [tuple((k % 3) + 1 for k in range(n)), tuple(3 - (k % 3) for k in range(n)),
             tuple(2 if k % 2 else 3 for k in range(n))]
    rng = case_rng(seed, "permutation-dims", n)
    return fixed + [tuple(rng.choice((1, 2, 3)) for _ in range(n)) for _ in range(2)]


def permutation_cases(cfg) -> list:
    cases = []
    for n in range(0, cfg.max_factors + 1):
        for dims in _dims_for(n, cfg.seed):
            cases.append((n, dims))
    return cases


def case_permutation(cfg, i):
    n, dims = permutation_cases(cfg)[i]
    s = SystemType(dims)
    checked = 0
    failures = []
    for perm in all_permutations(s):
        target = perm.matrix()
        for cut_in in range(n + 1):
            for cut_out in range(n + 1):
                dec = decompose_bipartite(perm, cut_in, cut_out)
                checked += 1
                if _perm_matrix_product(dec) != target:
                    failures.append(f"{perm} cut {cut_in}|{cut_out}")
    text = f"# permutations of {s}\nsystem S = {s}\n"
    return _record(cfg, i, "decompose_bipartite", text, "fail" if failures else "pass",
                   {"system": str(s), "decompositions": checked, "failures": failures[:5]})


def case_compatibility(cfg, i):
    rng = case_rng(cfg.seed, cfg.suite, i)
    a_sys = SystemType((rng.randint(2, max(2, cfg.max_dim)),))
    a = random_observation_test(rng, a_sys, 4)
    b = random_observation_test(rng, a_sys, 4)
    prod_ok = joint_product(a, b).verify(a, b)
    lp_ok = joint_lp(a, b).verify(a, b)
    mm = joint_minmax(a, b)
    detail = {"product": prod_ok, "lp": lp_ok,
              "minmax": "witness" if hasattr(mm, "joint") and hasattr(mm, "partition_a")
              else mm.identity}
    return _record(cfg, i, "joint_product+joint_lp", opt_for_tests(a=a, b=b),
                   "pass" if prod_ok and lp_ok else "fail", detail)


def case_lift(cfg, i):
    rng = case_rng(cfg.seed, cfg.suite, i)
    a_sys = random_system(rng, 2, max(2, cfg.max_dim))
    b_sys = random_system(rng, 2, max(2, cfg.max_dim))
    a = random_observation_test(rng, a_sys, 4)
    rho = random_state(rng, b_sys)
    ok = induced_observation(lift_observation(a, rho)) == a
    rho_t = Test(TRIVIAL, b_sys, [("rho", rho)])
    return _record(cfg, i, "lift_observation", opt_for_tests(a=a, rho=rho_t),
                   "pass" if ok else "fail")


def _non_excluding_test(cfg, rng, i):
    """MCT tests that can be undone: identity refinements, permutation mixtures,
    or destroy-and-reprepare tests."""
    dim = max(2, cfg.max_dim)
    kind = i % 3
    if kind == 0:
        a = random_system(rng, max(1, min(2, cfg.max_factors - 1)), dim)
        return identity_wrapped_circuit(rng, a, cfg.max_factors, dim)
    b = CircuitBuilder(rng, cfg.max_factors, dim, max_leaves=3, max_outcomes=3)
    if kind == 1:
        # a permutation beside a closed scalar circuit
        a = random_system(rng, min(3, cfg.max_factors), dim)
        pi = random_permutation(rng, a)
        aux = SystemType((2,))
        node = seq_all(Par(Identity(a), b.prep(aux)), Par(Permutation(pi), b.obs(aux)))
        return CircuitSource({}, dict(b.tests), node)
    # discard part of the input and reprepare with a random preparation test
    a = random_system(rng, min(3, cfg.max_factors), dim)
    n = len(a.factors)
    k = rng.randint(1, n)
    pi = random_permutation(rng, a)
    gone = SystemType(pi.output.factors[:k])
    kept = SystemType(pi.output.factors[k:])
    fresh = random_system(rng, max(1, min(2, cfg.max_factors - len(kept.factors))), dim)
    u = Test(gone, TRIVIAL, [("u", QMatrix.row([1] * gone.dim))])
    b.tests[f"u{len(b.tests)}"] = ("otest", u)
    discard = Obs(f"u{len(b.tests) - 1}", u)
    node = seq_all(Permutation(pi), Par(discard, Identity(kept)),
                   Par(b.prep(fresh), Identity(kept)))
    return CircuitSource({}, dict(b.tests), node)


def case_exclusion(cfg, i):
    rng = case_rng(cfg.seed, cfg.suite, i)
    src = _non_excluding_test(cfg, rng, i)
    t = semantics(normalize(src.circuit))
    out_sys = random_system(rng, 1, max(2, cfg.max_dim))
    target = random_test(rng, t.input, out_sys, 3)
    text = format_source(src) + opt_for_tests(target=target)
    base = excludes_identity(t, ancilla_cap=cfg.ancilla_cap, outcome_cap=cfg.outcome_cap)
    if not isinstance(base, DoesNotExclude):
        verdict = "unknown" if isinstance(base, ExclusionUnknown) else "fail"
        return _record(cfg, i, "excludes", text, verdict, {"identity": base.verdict})
    v = excludes(t, target, ancilla_cap=cfg.ancilla_cap, outcome_cap=cfg.outcome_cap)
    ok = isinstance(v, DoesNotExclude) and v.witness.replay(t, target)
    return _record(cfg, i, "excludes", text, "pass" if ok else "fail",
                   {"identity_route": base.route, "route": getattr(v, "route", None)})


def case_norm(cfg, i):
    rng = case_rng(cfg.seed, cfg.suite, i)
    dim = max(2, cfg.max_dim)
    a = random_system(rng, 2, dim)
    b = random_system(rng, 2, dim)
    d1 = random_deterministic_event(rng, a, b)
    d2 = random_deterministic_event(rng, a, b)
    delta = d1.matrix - d2.matrix
    if i % 2:
        pre = random_permutation(rng, a).event()
        post = random_permutation(rng, b).event()
        c0, c1 = pre.input, post.output
    else:
        c0 = random_system(rng, 2, dim)
        c1 = random_system(rng, 2, dim)
        pre = random_deterministic_event(rng, c0, a)
        post = random_deterministic_event(rng, b, c1)
    lhs = op_norm(post.matrix @ delta @ pre.matrix)
    rhs = op_norm(delta)
    ok = lhs <= rhs and (lhs == rhs if i % 2 else True)
    text = opt_for_tests(t1=Test(a, b, [("t1", d1)]), t2=Test(a, b, [("t2", d2)]),
                         pre=Test(pre.input, pre.output, [("pre", pre)]),
                         post=Test(post.input, post.output, [("post", post)]))
    return _record(cfg, i, "op_norm", text, "pass" if ok else "fail",
                   {"outer": str(lhs), "inner": str(rhs), "permutations": bool(i % 2)})


def case_broadcast(cfg, i):
    dim = i + 2
    rep = mct_no_broadcasting_sweep(dim, cfg.cases, cfg.seed)
    text = f"# no-broadcasting sweep on [{dim}], {cfg.cases} samples\n"
    return _record(cfg, i, "mct_no_broadcasting_sweep", text, "pass" if rep.ok else "fail",
                   {"dim": dim, "samples": rep.samples, "counts": rep.counts,
                    "broadcasting": list(rep.broadcasting), "copy_flagged": rep.copy_flagged})


# controls run once per suite, before the random cases

def control_atomicity(cfg):
    t = ct_refinement_control()
    v = membership(t)
    ok = isinstance(v, NotInMCT) and v.certificate.kind == "atomicity"
    return _record(cfg, "control", "membership", opt_for_tests(t=t), "pass" if ok else "fail",
                   {"verdict": v.verdict, "certificate": str(getattr(v, "certificate", ""))})


def control_niwd(cfg):
    t = ct_refinement_control()
    ok = niwd_check(t) is False
    return _record(cfg, "control", "niwd_check", opt_for_tests(t=t), "pass" if ok else "fail",
                   {"niwd": not ok})


SUITES: dict = {
    "atomicity": (case_atomicity, control_atomicity),
    "niwd": (case_niwd, control_niwd),
    "broadcast": (case_broadcast, None),
    "closure": (case_closure, None),
    "permutation": (case_permutation, None),
    "compatibility": (case_compatibility, None),
    "exclusion": (case_exclusion, None),
    "normalize": (case_normalize, None),
    "lift": (case_lift, None),
    "norm": (case_norm, None),
}


def case_count(cfg: SuiteConfig) -> int:
    if cfg.suite == "permutation":
        return len(permutation_cases(cfg))
    if cfg.suite == "broadcast":
        return max(0, cfg.max_dim - 1)
    return cfg.cases


def run_case(cfg: SuiteConfig, i: int) -> dict:
    fn = SUITES[cfg.suite][0]
    try:
        return fn(cfg, i)
    except AssertionError as exc:
        # a witness failed to replay: an internal fault, reported as a failure
        return _record(cfg, i, cfg.suite, "", "fail", {"internal": str(exc)})


def _run_pair(args):
    return run_case(*args)


def run_suite(cfg: SuiteConfig, jobs: int = 1) -> Iterator[dict]:
    """Records in case order: config, controls, cases, summary."""
    yield {"record": "config", "version": __version__, **asdict(cfg)}
    counts = {"pass": 0, "fail": 0, "unknown": 0}
    control = SUITES[cfg.suite][1]
    records = []
    if control is not None:
        records.append(control(cfg))
    n = case_count(cfg)
    if jobs > 1 and n > 1:
        from multiprocessing import Pool
        with Pool(jobs) as pool:
            case_iter = pool.imap(_run_pair, [(cfg, i) for i in range(n)], chunksize=8)
            for rec in _chain(records, case_iter):
                counts[rec["verdict"]] += 1
                yield rec
    else:
        for rec in _chain(records, (run_case(cfg, i) for i in range(n))):
            counts[rec["verdict"]] += 1
            yield rec
    yield {"record": "summary", "suite": cfg.suite, **counts}


def _chain(first, rest):
    yield from first
    yield from rest


def report_lines(records) -> Iterator[str]:
    for rec in records:
        yield json.dumps(rec, sort_keys=True, default=str)
