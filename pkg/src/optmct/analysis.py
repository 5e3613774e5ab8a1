"""Verdicts built on the core: joint measurability, exclusion, NIWD,
broadcasting and the operational norm.

Every witness produced here is replayed against the core before it is
returned; a witness that fails to replay raises ``AssertionError``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .core import (ClassicalEvent, CompositionError, SystemType, TRIVIAL, Test,
                   coarse_grain, compose_seq, deterministic_effect, format_label,
                   full_coarse_graining, identity_event, validate)
from .linalg import QMatrix
from .lp import feasible_point
from .mct import (DeterministicForm, InMCT, deterministic_form, membership)
from .permutations import PermutationSpec, identity_perm, invert

__all__ = [
    "CompatibilityWitness", "ConstructionFailure", "SolverError",
    "joint_product", "joint_minmax", "joint_lp",
    "lift_observation", "induced_observation", "is_trivial_observation",
    "Excludes", "DoesNotExclude", "ExclusionUnknown", "ExclusionWitness",
    "excludes_identity", "excludes", "niwd_check",
    "is_broadcasting", "copy_channel", "mct_no_broadcasting_sweep", "BroadcastReport",
    "op_norm",
]


class SolverError(RuntimeError):
    """The exact LP declared a provably feasible problem infeasible."""


def _check_observation(t: Test, name: str):
    if t.output != TRIVIAL:
        raise CompositionError(f"{name} is not an observation test (output {t.output})")


def _same_system(a: Test, b: Test):
    _check_observation(a, "first argument")
    _check_observation(b, "second argument")
    if a.input != b.input:
        raise CompositionError(f"observation tests act on different systems {a.input} and {b.input}")


# -- compatibility -------------------------------------------------------

@dataclass(frozen=True)
class CompatibilityWitness:
    """A joint observation with partitions recovering both marginals."""

    joint: Test
    partition_a: dict
    partition_b: dict

    def verify(self, a: Test, b: Test) -> bool:
        return (validate(self.joint).ok
                and coarse_grain(self.joint, self.partition_a) == a
                and coarse_grain(self.joint, self.partition_b) == b)


@dataclass(frozen=True)
class ConstructionFailure:
    """The candidate family did not pass verification; ``identity`` says why."""

    identity: str
    family: Test | None = None


def _pair_witness(a: Test, b: Test, effects: dict) -> CompatibilityWitness:
    joint = Test(a.input, TRIVIAL, [(x + y, effects[(x, y)]) for x in a.labels for y in b.labels])
    pa = {x: [x + y for y in b.labels] for x in a.labels}
    pb = {y: [x + y for x in a.labels] for y in b.labels}
    w = CompatibilityWitness(joint, pa, pb)
    if not w.verify(a, b):
        raise AssertionError("joint observation failed to reproduce its marginals")
    return w


def joint_product(a: Test, b: Test) -> CompatibilityWitness:
    """Joint observation with vertex coefficients ``a_x(j) b_y(j)``."""
    _same_system(a, b)
    av = {x: ev.vector() for x, ev in a}
    bv = {y: ev.vector() for y, ev in b}
    effects = {(x, y): QMatrix.row([p * q for p, q in zip(av[x], bv[y])])
               for x in a.labels for y in b.labels}
    return _pair_witness(a, b, effects)


def joint_lp(a: Test, b: Test) -> CompatibilityWitness:
    """Joint observation found by exact linear feasibility.

    The constraints decouple over vertices: for each ``j`` the unknowns
    ``c_{xy}(j) >= 0`` must have row sums ``a_x(j)`` and column sums
    ``b_y(j)``.  A simplicial system always admits a solution, so
    infeasibility is a solver fault and raises :class:`SolverError`.
    """
    _same_system(a, b)
    xs, ys = a.labels, b.labels
    nx, ny = len(xs), len(ys)
    coeffs = {(x, y): [] for x in xs for y in ys}
    for j in range(a.input.dim):
        rows, rhs = [], []
        for ix, x in enumerate(xs):
            rows.append([int(k // ny == ix) for k in range(nx * ny)])
            rhs.append(a[x].matrix[0, j])
        for iy, y in enumerate(ys):
            rows.append([int(k % ny == iy) for k in range(nx * ny)])
            rhs.append(b[y].matrix[0, j])
        sol = feasible_point(rows, rhs)
        if sol is None:
            raise SolverError(f"joint measurement LP infeasible at vertex {j}")
        for k, v in enumerate(sol):
            coeffs[(xs[k // ny], ys[k % ny])].append(v)
    effects = {key: QMatrix.row(vals) for key, vals in coeffs.items()}
    return _pair_witness(a, b, effects)


def joint_minmax(a: Test, b: Test, search_budget: int = 200_000):
    """The vertex-wise min/max family, verified before use.

    Outcome ``i`` of both tests is paired by position (missing outcomes
    count as zero): ``r^i_j = min(p^i_j, q^i_j)`` and ``s^i_j = max - min``,
    each a multiple of the vertex effect ``<j|``.  The family must sum to
    ``u``, and then partitions reproducing both marginals are searched for
    vertex by vertex.  Any failure is returned as
    :class:`ConstructionFailure` naming the identity that broke.
    """
    _same_system(a, b)
    d = a.input.dim
    pa = [ev.vector() for _, ev in a]
    qb = [ev.vector() for _, ev in b]
    n = max(len(pa), len(qb))
    zero = [Fraction(0)] * d
    pa += [zero] * (n - len(pa))
    qb += [zero] * (n - len(qb))

    elements = []   # (label, vertex, coefficient)
    for i in range(n):
        for j in range(d):
            lo, hi = min(pa[i][j], qb[i][j]), max(pa[i][j], qb[i][j])
            elements.append((("r", str(i), str(j)), j, lo))
            elements.append((("s", str(i), str(j)), j, hi - lo))
    family = Test(a.input, TRIVIAL, [
        (label, QMatrix.row([v if k == j else 0 for k in range(d)]))
        for label, j, v in elements])
    sums = full_coarse_graining(family).vector()
    for j, s in enumerate(sums):
        if s != 1:
            return ConstructionFailure(
                f"sum_i max(p^i_{j}, q^i_{j}) = {s} != 1, so the family does not sum to u "
                f"at vertex {j}", family)

    parts = []
    for target, name in ((a, "a"), (b, "b")):
        assignment = _vertex_partition(elements, target, d, search_budget)
        if isinstance(assignment, str):
            return ConstructionFailure(f"no partition V/W recovers {name}: {assignment}", family)
        parts.append(assignment)
    w = CompatibilityWitness(family, parts[0], parts[1])
    if not w.verify(a, b):
        raise AssertionError("min/max witness failed to replay")
    return w


def _vertex_partition(elements, target: Test, d: int, budget: int):
    labels = target.labels
    vec = {x: ev.vector() for x, ev in target}
    blocks = {x: [] for x in labels}
    steps = 0
    for j in range(d):
        here = [(label, v) for label, vj, v in elements if vj == j]
        nonzero = [(label, v) for label, v in here if v]
        found = None
        for choice in product(range(len(labels)), repeat=len(nonzero)):
            steps += 1
            if steps > budget:
                return f"search budget of {budget} assignments exhausted"
            acc = [Fraction(0)] * len(labels)
            for (_, v), k in zip(nonzero, choice):
                acc[k] += v
            if all(acc[k] == vec[x][j] for k, x in enumerate(labels)):
                found = choice
                break
        if found is None:
            return f"vertex {j} admits no assignment"
        for (label, _), k in zip(nonzero, found):
            blocks[labels[k]].append(label)
        for label, v in here:
            if not v:
                blocks[labels[0]].append(label)
    if any(not blk for blk in blocks.values()):
        # empty blocks are not allowed by coarse_grain; they can only
        # arise for zero effects, which then take a zero element
        return "an outcome received no element"
    return blocks


# -- lifting and induced observations -----------------------------------

def lift_observation(a: Test, rho: ClassicalEvent) -> Test:
    """Measure-and-prepare test ``{|rho><a_x|}`` whose observation is ``a``."""
    _check_observation(a, "a")
    if not (rho.is_state and rho.is_deterministic):
        raise ValueError("lift_observation needs a deterministic state")
    return Test(a.input, rho.output,
                [(x, ClassicalEvent(a.input, rho.output, rho.matrix @ ev.matrix)) for x, ev in a])


def induced_observation(t: Test) -> Test:
    """``{u_B T_x}``: the test followed by discarding its output."""
    u = deterministic_effect(t.output).matrix
    return Test(t.input, TRIVIAL, [(x, ClassicalEvent(t.input, TRIVIAL, u @ ev.matrix)) for x, ev in t])


def is_trivial_observation(obs: Test) -> dict | None:
    """``{x: p_x}`` when every effect is ``p_x u``."""
    u = deterministic_effect(obs.input).matrix
    weights = {}
    for x, ev in obs:
        p = ev.matrix.is_proportional_to(u)
        if p is None:
            return None
        weights[x] = p
    return weights


# -- exclusion -----------------------------------------------------------

@dataclass(frozen=True)
class ExclusionWitness:
    """Dilation ``C: A -> B E`` with partition ``S_x`` and postprocessings ``P^(z)``.

    ``post[z]`` is a test ``B E -> C`` whose outcomes are the target's.
    """

    dilation: Test
    env: SystemType
    partition: dict
    post: dict

    def replay(self, t: Test, target: Test) -> bool:
        if not validate(self.dilation).ok:
            return False
        if any(not validate(p).ok for p in self.post.values()):
            return False
        discard = identity_event(t.output).tensor(deterministic_effect(self.env))
        marg = Test(t.input, t.output, [(z, ev.then(discard)) for z, ev in self.dilation])
        if coarse_grain(marg, self.partition) != t:
            return False
        for y, by in target:
            total = QMatrix.zeros(by.matrix.nrows, by.matrix.ncols)
            for z, cz in self.dilation:
                total = total + self.post[z][y].matrix @ cz.matrix
            if total != by.matrix:
                return False
        return True


@dataclass(frozen=True)
class Excludes:
    certificate: str
    verdict: str = field(default="excludes", init=False)


@dataclass(frozen=True)
class DoesNotExclude:
    witness: ExclusionWitness
    route: str
    verdict: str = field(default="does-not-exclude", init=False)


@dataclass(frozen=True)
class ExclusionUnknown:
    reason: str
    verdict: str = field(default="unknown", init=False)


def _identity_target(a: SystemType) -> Test:
    return Test(a, a, [((), identity_event(a))])


def _channel(ev: ClassicalEvent) -> Test:
    return Test(ev.input, ev.output, [((), ev)])


def _finish(t: Test, target: Test, w: ExclusionWitness, route: str) -> DoesNotExclude:
    if not w.replay(t, target):
        raise AssertionError(f"exclusion witness ({route}) failed to replay")
    return DoesNotExclude(w, route)


def _copy_dilation(t: Test) -> ExclusionWitness:
    """Classical dilation keeping a copy of the input: ``C_x = (T_x (x) id) copy``."""
    a = t.input
    cp = copy_channel(a).matrix
    ida = QMatrix.identity(a.dim)
    dil = Test(a, t.output * a, [(x, ClassicalEvent(a, t.output * a, ev.matrix.kron(ida) @ cp))
                                 for x, ev in t])
    keep_env = deterministic_effect(t.output).tensor(identity_event(a))
    post = {x: _channel(keep_env) for x in t.labels}
    return ExclusionWitness(dil, a, {x: [x] for x in t.labels}, post)


def _permutation_route(t: Test, weights: dict) -> ExclusionWitness | None:
    """Every nonzero event is ``p_x`` times a permutation of factors."""
    if t.input.dim != t.output.dim:
        return None
    post = {}
    fallback = None
    for x, ev in t:
        p = weights[x]
        if p == 0:
            continue
        m = ev.matrix.scale(1 / p)
        df = deterministic_form(ClassicalEvent(t.input, t.output, m))
        if df is None or df.a1.dim != 1 or df.s1.output != df.s2.input:
            return None
        s = df.s1.then(df.s2)
        post[x] = _channel(invert(s).event())
        fallback = fallback or post[x]
    for x in t.labels:
        post.setdefault(x, fallback)
    return ExclusionWitness(t, TRIVIAL, {x: [x] for x in t.labels}, post)


def _reprepare_route(t: Test) -> tuple | None:
    """All events are ``S2 (|sigma_z><u_{A'}| (x) id_E) S1`` for one routing.

    The dilation keeps ``A'`` as environment instead of discarding it; the
    postprocessing discards ``B'`` and undoes both permutations.
    """
    from .mct import extract_core, routings
    for rt in routings(t.input, t.output):
        maps = rt.maps()
        sigmas = []
        for _, ev in t:
            r = extract_core(ev.matrix, rt, maps)
            if r is None or any(r.col(j) != r.col(0) for j in range(1, r.ncols)):
                break
            sigmas.append(QMatrix(rt.b1.dim, 1, [r.col(0)]))
        else:
            return rt, sigmas
    return None


def _reprepare_witness(t: Test, rt, sigmas) -> ExclusionWitness:
    a1, e = rt.a1, rt.e
    d_e, d_a1 = e.dim, a1.dim
    map1, map2 = rt.maps()
    bdim = t.output.dim
    events = []
    for (z, _), sigma in zip(t, sigmas):
        # A -> (B' E via S2 = B) (x) A'
        cols = []
        for i in range(t.input.dim):
            a1i, ei = divmod(map1[i], d_e)
            cols.append({map2[b * d_e + ei] * d_a1 + a1i: v for b, v in sigma.col(0).items()})
        events.append((z, ClassicalEvent(t.input, t.output * a1,
                                         QMatrix(bdim * d_a1, t.input.dim, cols))))
    dil = Test(t.input, t.output * a1, events)
    # P: B A' -> A, discard B' and route A' E back through S1^{-1}
    inv2 = [0] * len(map2)
    for k, o in enumerate(map2):
        inv2[o] = k
    inv1 = [0] * len(map1)
    for i, j in enumerate(map1):
        inv1[j] = i
    cols = []
    for bo in range(bdim):
        _, ei = divmod(inv2[bo], d_e)
        for a1i in range(d_a1):
            cols.append({inv1[a1i * d_e + ei]: Fraction(1)})
    p = ClassicalEvent(t.output * a1, t.input, QMatrix(t.input.dim, bdim * d_a1, cols))
    post = {z: _channel(p) for z in t.labels}
    return ExclusionWitness(dil, a1, {z: [z] for z in t.labels}, post)


def excludes_identity(t: Test, within_mct: bool = True, ancilla_cap: int | None = None,
                      outcome_cap: int = 16):
    """Does ``t`` exclude the identity test on its input?

    Outside MCT the classical copy dilation always recovers the identity.
    Inside MCT the identity is atomic, so a test whose induced observation is
    not ``{p_x u}`` excludes it.  Otherwise two constructive routes are
    tried: events proportional to factor permutations (undo them), and
    destroy-and-reprepare events sharing one routing (keep the discarded
    part as environment).  Both dilations are checked for MCT membership
    and both postprocessings for the deterministic MCT form.
    """
    if ancilla_cap is None:
        ancilla_cap = t.input.dim * t.output.dim
    target = _identity_target(t.input)
    if not within_mct:
        return _finish(t, target, _copy_dilation(t), "copy-dilation")
    weights = is_trivial_observation(induced_observation(t))
    if weights is None:
        bad = next(format_label(x) or "()" for x, ev in induced_observation(t)
                   if ev.matrix.is_proportional_to(deterministic_effect(t.input).matrix) is None)
        return Excludes(
            f"induced observation effect {bad} is not proportional to u; the identity on "
            f"{t.input} is atomic in MCT, so no dilation can be postprocessed back to it")
    if len(t) > outcome_cap:
        return ExclusionUnknown(f"{len(t)} outcomes exceed the outcome cap {outcome_cap}")
    w = _permutation_route(t, weights)
    route = "permutation-inverse"
    if w is None:
        found = _reprepare_route(t)
        if found is not None:
            rt, sigmas = found
            if rt.a1.dim > ancilla_cap:
                return ExclusionUnknown(
                    f"environment of dimension {rt.a1.dim} exceeds the ancilla cap {ancilla_cap}")
            w = _reprepare_witness(t, rt, sigmas)
            route = "keep-discarded-part"
    if w is None:
        return ExclusionUnknown("no permutation or destroy-and-reprepare dilation found")
    if not isinstance(membership(w.dilation, outcome_cap=max(outcome_cap, len(t))), InMCT):
        return ExclusionUnknown("candidate dilation is not an MCT test")
    for p in w.post.values():
        if deterministic_form(p[()]) is None:
            return ExclusionUnknown("candidate postprocessing is not an MCT channel")
    return _finish(t, target, w, route)


def excludes(t: Test, target: Test, within_mct: bool = True, ancilla_cap: int | None = None,
             outcome_cap: int = 16):
    """Does ``t`` exclude ``target``?

    When ``t`` does not exclude the identity, postprocessing by the target
    gives ``P'^(z)_y = B_y P^(z)``.  A target made of destroy-and-reprepare
    events ``|sigma_y><u|`` is reached from any test directly.
    """
    if t.input != target.input:
        raise CompositionError(f"tests act on different inputs {t.input} and {target.input}")
    base = excludes_identity(t, within_mct, ancilla_cap, outcome_cap)
    if isinstance(base, DoesNotExclude):
        w = base.witness
        post = {z: compose_seq(p, target).relabel(lambda l, k=p.arity: l[k:])
                for z, p in w.post.items()}
        return _finish(t, target, ExclusionWitness(w.dilation, w.env, w.partition, post),
                       "composed-with-target")
    if _is_reprepare_test(target):
        ones = deterministic_effect(t.output).matrix
        post_events = []
        for y, by in target:
            sigma = QMatrix(by.matrix.nrows, 1, [by.matrix.col(0)])
            post_events.append((y, ClassicalEvent(t.output, target.output, sigma @ ones)))
        post = {x: Test(t.output, target.output, post_events) for x in t.labels}
        w = ExclusionWitness(t, TRIVIAL, {x: [x] for x in t.labels}, post)
        return _finish(t, target, w, "reprepare-target")
    if isinstance(base, Excludes) and _is_identity_test(target):
        return base
    return ExclusionUnknown(f"identity exclusion is {base.verdict}; target is neither the "
                            "identity nor a destroy-and-reprepare test")


def _is_reprepare_test(t: Test) -> bool:
    return all(all(ev.matrix.col(j) == ev.matrix.col(0) for j in range(ev.matrix.ncols))
               for _, ev in t)


def _is_identity_test(t: Test) -> bool:
    return (t.input == t.output and len(t) == 1
            and t.events[0][1].matrix == identity_event(t.input).matrix)


# -- no-information without disturbance ---------------------------------

def niwd_check(t: Test) -> bool:
    """True unless ``t`` is non-disturbing yet informative.

    Tests whose events do not sum to the identity satisfy the property
    vacuously.
    """
    if t.input != t.output:
        raise CompositionError("niwd_check needs a test from a system to itself")
    if full_coarse_graining(t).matrix != identity_event(t.input).matrix:
        return True
    return is_trivial_observation(induced_observation(t)) is not None


# -- broadcasting --------------------------------------------------------

def copy_channel(a: SystemType) -> ClassicalEvent:
    """``|j> -> |j>|j>``."""
    d = a.dim
    return ClassicalEvent(a, a * a, QMatrix(d * d, d, [{j * d + j: Fraction(1)} for j in range(d)]))


def is_broadcasting(ch: ClassicalEvent) -> bool:
    a = ch.input
    if ch.output != a * a:
        raise ValueError(f"broadcasting channel must map {a} to {a * a}, got {ch.output}")
    ident = identity_event(a).matrix
    u = deterministic_effect(a).matrix
    first = u.kron(ident) @ ch.matrix
    second = ident.kron(u) @ ch.matrix
    return first == ident and second == ident


@dataclass(frozen=True)
class BroadcastReport:
    dim: int
    samples: int
    counts: dict
    broadcasting: tuple
    copy_flagged: bool

    @property
    def ok(self) -> bool:
        return not self.broadcasting and self.copy_flagged


def _det_form_channel(a: SystemType, s1, s2, a1, b1, e, rho_vec) -> ClassicalEvent:
    df = DeterministicForm(s1, s2, a1, b1, e,
                           ClassicalEvent(TRIVIAL, b1, QMatrix.column(rho_vec)))
    return df.event()


def mct_no_broadcasting_sweep(dim: int, samples: int, seed: int = 0) -> BroadcastReport:
    """Sample MCT channels ``A -> AA`` and count broadcasting ones.

    Three streams: the input passed through beside a fresh preparation
    (either side), a destroy-and-reprepare channel, and full
    coarse-grainings of random MCT circuits ``A -> AA``.
    """
    if dim < 2:
        raise ValueError("no-broadcasting needs a system of dimension at least 2")
    from .circuit import evaluate
    from .sampling import case_rng, distribution, random_circuit
    a = SystemType((dim,))
    aa = a * a
    counts = {"prepare-beside": 0, "destroy-reprepare": 0, "random-circuit": 0}
    found = []
    for k in range(samples):
        rng = case_rng(seed, f"broadcast-{dim}", k)
        kind = k % 3
        if kind == 0:
            rho = distribution(rng, dim)
            side = rng.randrange(2)
            e = a
            # A' trivial, B' one factor; S2 puts the fresh factor left or right
            s1 = identity_perm(a)
            s2 = PermutationSpec(a * a, (0, 1) if side == 0 else (1, 0))
            ch = _det_form_channel(a, s1, s2, TRIVIAL, a, e, rho)
            counts["prepare-beside"] += 1
        elif kind == 1:
            rho = distribution(rng, dim * dim)
            ch = _det_form_channel(a, identity_perm(a), identity_perm(aa), a, aa, TRIVIAL, rho)
            counts["destroy-reprepare"] += 1
        else:
            src = random_circuit(rng, inp=a, out=aa, max_factors=3, max_dim=dim, depth=4)
            ch = full_coarse_graining(evaluate(src.circuit))
            counts["random-circuit"] += 1
        if is_broadcasting(ch):
            found.append(k)
    return BroadcastReport(dim, samples, counts, tuple(found), is_broadcasting(copy_channel(a)))


# -- operational norm ----------------------------------------------------

def op_norm(delta) -> Fraction:
    """Largest column l1 norm: the best single-vertex discrimination gap."""
    m = delta.matrix if isinstance(delta, ClassicalEvent) else delta
    best = Fraction(0)
    for j in range(m.ncols):
        s = sum((abs(v) for v in m.col(j).values()), Fraction(0))
        if s > best:
            best = s
    return best
