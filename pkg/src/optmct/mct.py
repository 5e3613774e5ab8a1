"""Minimal classical theory: canonical forms of generator circuits.

Every test built from identities, swaps, preparations and observations can
be rewritten as::

    A --S1--> A' E          prepare rho on C B'
    measure a on C A'       output B' E --S2--> B

i.e. the input is split by a permutation into a part ``A'`` that is
measured jointly with an ancilla ``C`` and a part ``E`` that passes
through; the ancilla is prepared together with a fresh output part ``B'``.
:class:`CanonicalForm` stores exactly that data.  :class:`FlatForm` is the
intermediate shape ``(a (x) id_B) . S . (rho (x) id_A)`` with one big
permutation, produced by pulling every state and effect out of a circuit.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Sequence

from .circuit import (Gate, Identity, Obs, Par, Permutation, Prep, Seq, Typed,
                      typecheck)
from .core import (ClassicalEvent, CompositionError, SystemType, TRIVIAL, Test,
                   coarse_grain, compose_par, format_label, full_coarse_graining,
                   identity_event)
from .linalg import QMatrix
from .permutations import (PermutationSpec, block_swap, decompose_bipartite)

__all__ = [
    "CanonicalForm", "FlatForm", "AncillaFreeForm", "DeterministicForm",
    "Routing", "NormalizationError",
    "normalize", "flatten", "semantics", "canonical_seq_compose", "canonical_par_compose",
    "canonical_from_test_parts", "eliminate_ancilla", "identity_refinement_weights",
    "is_atomic_identity_refinement", "deterministic_form", "routings",
    "extract_core", "membership", "InMCT", "NotInMCT", "Unknown", "Certificate",
    "stabilize_subsequence", "Stabilization", "to_circuit", "trivial_prep",
    "trivial_obs", "DEFAULT_OUTCOME_CAP",
]

DEFAULT_OUTCOME_CAP = 16


class NormalizationError(ValueError):
    pass


def trivial_prep() -> Test:
    return Test(TRIVIAL, TRIVIAL, [((), QMatrix.identity(1))])


trivial_obs = trivial_prep


def _tensor_all(tests: Sequence[Test]) -> Test:
    out = trivial_prep()
    for t in tests:
        out = compose_par(out, t)
    return out


def _reorder(atoms: tuple, order: tuple) -> tuple:
    return tuple(atoms[i] for i in order)


# -- forms ---------------------------------------------------------------

@dataclass(frozen=True)
class FlatForm:
    """``T = (obs (x) id_B) . perm . (prep (x) id_A)``.

    ``perm`` routes ``C' A`` to ``D' B`` where ``C'`` is the output of
    ``prep`` and ``D'`` the input of ``obs``.  ``label_order`` picks, for
    every atom of a final outcome label, its position in
    ``prep_label + obs_label``.
    """

    input: SystemType
    output: SystemType
    prep: Test
    perm: PermutationSpec
    obs: Test
    label_order: tuple

    def __post_init__(self):
        if self.perm.input != self.prep.output * self.input:
            raise NormalizationError(f"permutation input {self.perm.input} is not "
                                     f"{self.prep.output} (x) {self.input}")
        if self.perm.output != self.obs.input * self.output:
            raise NormalizationError(f"permutation output {self.perm.output} is not "
                                     f"{self.obs.input} (x) {self.output}")

    def semantics(self) -> Test:
        p = self.perm.matrix()
        ida = QMatrix.identity(self.input.dim)
        idb = QMatrix.identity(self.output.dim)
        events = []
        for x, rho in self.prep:
            mid = p @ rho.matrix.kron(ida)
            for y, a in self.obs:
                m = a.matrix.kron(idb) @ mid
                events.append((_reorder(x + y, self.label_order),
                               ClassicalEvent(self.input, self.output, m)))
        return Test(self.input, self.output, events)

    def to_canonical(self) -> "CanonicalForm":
        n_c = len(self.prep.output)
        n_d = len(self.obs.input)
        dec = decompose_bipartite(self.perm, n_c, n_d)
        map3 = dec.s3.index_map()
        prep = Test(TRIVIAL, dec.s3.output,
                    [(x, ClassicalEvent(TRIVIAL, dec.s3.output, rho.matrix.remap(row_map=map3)))
                     for x, rho in self.prep])
        p4 = dec.s4.matrix()
        obs = Test(dec.s4.input, TRIVIAL,
                   [(y, ClassicalEvent(dec.s4.input, TRIVIAL, a.matrix @ p4)) for y, a in self.obs])
        return CanonicalForm(input=self.input, output=self.output, s1=dec.s1, s2=dec.s2,
                             a1=dec.b1, b1=dec.a2, c=dec.a1, e=dec.b2,
                             prep=prep, obs=obs, label_order=self.label_order)


@dataclass(frozen=True)
class CanonicalForm:
    """``S2 . (a_y on C A') . swap(B', A') . (rho_x on C B') . S1``.

    ``s1: A -> A' E`` and ``s2: B' E -> B``; ``prep`` is a preparation test
    on ``C B'`` and ``obs`` an observation test on ``C A'``.
    """

    input: SystemType
    output: SystemType
    s1: PermutationSpec
    s2: PermutationSpec
    a1: SystemType          # A'
    b1: SystemType          # B'
    c: SystemType
    e: SystemType
    prep: Test
    obs: Test
    label_order: tuple = None

    def __post_init__(self):
        problems = []
        if self.s1.input != self.input:
            problems.append(f"S1 input {self.s1.input} != A {self.input}")
        if self.s1.output != self.a1 * self.e:
            problems.append(f"S1 output {self.s1.output} != A'E {self.a1 * self.e}")
        if self.s2.input != self.b1 * self.e:
            problems.append(f"S2 input {self.s2.input} != B'E {self.b1 * self.e}")
        if self.s2.output != self.output:
            problems.append(f"S2 output {self.s2.output} != B {self.output}")
        if self.prep.input != TRIVIAL or self.prep.output != self.c * self.b1:
            problems.append(f"prep must be a preparation test on {self.c * self.b1}")
        if self.obs.output != TRIVIAL or self.obs.input != self.c * self.a1:
            problems.append(f"obs must be an observation test on {self.c * self.a1}")
        if problems:
            raise NormalizationError("; ".join(problems))
        if self.label_order is None:
            object.__setattr__(self, "label_order",
                               tuple(range(self.prep.arity + self.obs.arity)))

    def signature(self) -> tuple:
        """Shape data ``(S1, S2, A', B', E)``; the ancilla and the tests are excluded."""
        return (self.s1, self.s2, self.a1, self.b1, self.e)

    def describe(self) -> dict:
        from .permutations import format_cycles
        return {
            "S1": f"{self.s1.input} {format_cycles(self.s1.mapping)}",
            "A'": str(self.a1), "C": str(self.c), "E": str(self.e), "B'": str(self.b1),
            "S2": f"{self.s2.input} {format_cycles(self.s2.mapping)}",
        }

    def to_flat(self) -> FlatForm:
        nc, na1, nb1 = len(self.c), len(self.a1), len(self.b1)
        mapping = list(range(nc))
        for k in range(nb1):
            mapping.append(nc + na1 + self.s2.mapping[k])
        for i in range(len(self.input)):
            p = self.s1.mapping[i]
            if p < na1:
                mapping.append(nc + p)
            else:
                mapping.append(nc + na1 + self.s2.mapping[nb1 + p - na1])
        perm = PermutationSpec(self.c * self.b1 * self.input, tuple(mapping))
        return FlatForm(self.input, self.output, self.prep, perm, self.obs, self.label_order)

    @property
    def is_deterministic(self) -> bool:
        return len(self.prep) == 1 and len(self.obs) == 1


def _embed(r: QMatrix, map1: list, map2: list, d_e: int, shape: tuple) -> QMatrix:
    """Matrix of ``S2 . (R (x) id_E) . S1`` from the index maps of the permutations."""
    nrows, ncols = shape
    cols = []
    rcols = [r.col(j) for j in range(r.ncols)]
    for i in range(ncols):
        a1, e = divmod(map1[i], d_e)
        cols.append({map2[b1 * d_e + e]: v for b1, v in rcols[a1].items()})
    return QMatrix(nrows, ncols, cols)


def _reshape(vector: QMatrix, rows: int, cols: int) -> QMatrix:
    """Reshape a column or row vector of length rows*cols, row-major."""
    out = [dict() for _ in range(cols)]
    for i, j, v in vector.entries():
        flat = i if vector.ncols == 1 else j
        r, c = divmod(flat, cols)
        out[c][r] = v
    return QMatrix(rows, cols, out)


def semantics(cf: CanonicalForm) -> Test:
    """The test described by a canonical form, event by event.

    Event ``(x, y)`` contracts the ancilla: its core ``R[b', a'] =
    sum_c rho_x[c, b'] a_y[c, a']`` is then wired through ``id_E`` and the
    two permutations.
    """
    d_c, d_a1, d_b1, d_e = cf.c.dim, cf.a1.dim, cf.b1.dim, cf.e.dim
    map1, map2 = cf.s1.index_map(), cf.s2.index_map()
    shape = (cf.output.dim, cf.input.dim)
    rhos = [(x, _reshape(rho.matrix, d_c, d_b1).transpose()) for x, rho in cf.prep]
    effs = [(y, _reshape(a.matrix, d_c, d_a1)) for y, a in cf.obs]
    events = []
    for x, rt in rhos:
        for y, am in effs:
            core = rt @ am
            m = _embed(core, map1, map2, d_e, shape)
            events.append((_reorder(x + y, cf.label_order),
                           ClassicalEvent(cf.input, cf.output, m)))
    return Test(cf.input, cf.output, events)


# -- normalisation -------------------------------------------------------

def flatten(ast) -> FlatForm:
    """Pull every effect and state of a generator circuit onto auxiliary lines.

    Each observation leaf is slid out to the top of the circuit as an effect
    on its own line, then each preparation leaf likewise, in evaluation
    order; what remains between them is a single permutation.
    """
    typed = ast if isinstance(ast, Typed) else typecheck(ast)
    fresh = iter(range(10 ** 9))
    dims: dict = {}
    preps: list = []     # (eval position, test, wires)
    observations: list = []
    counter = [0]

    def new_wire(dim):
        w = next(fresh)
        dims[w] = dim
        return w

    def walk(t: Typed, wires: list) -> list:
        node = t.node
        if isinstance(node, Identity):
            return wires
        if isinstance(node, Permutation):
            out = [None] * len(wires)
            for i, m in enumerate(node.spec.mapping):
                out[m] = wires[i]
            return out
        if isinstance(node, Prep):
            new = [new_wire(d) for d in node.test.output.factors]
            preps.append((counter[0], node.test, new))
            counter[0] += 1
            return wires + new
        if isinstance(node, Obs):
            observations.append((counter[0], node.test, list(wires)))
            counter[0] += 1
            return []
        if isinstance(node, Gate):
            raise NormalizationError(
                f"apply({node.name}) is not a generator; only id, swap/perm, prep and obs "
                "leaves can be normalised")
        a, b = t.children
        if isinstance(node, Seq):
            return walk(b, walk(a, wires))
        n_top = len(a.input)
        return walk(a, wires[:n_top]) + walk(b, wires[n_top:])

    inputs = [new_wire(d) for d in typed.input.factors]
    outputs = walk(typed, list(inputs))

    prep_wires = [w for _, _, ws in preps for w in ws]
    obs_wires = [w for _, _, ws in observations for w in ws]
    sources = prep_wires + inputs
    target_pos = {w: k for k, w in enumerate(obs_wires + outputs)}
    mapping = tuple(target_pos[w] for w in sources)
    perm = PermutationSpec(SystemType(tuple(dims[w] for w in sources)), mapping)

    prep = _tensor_all([t for _, t, _ in preps])
    obs = _tensor_all([t for _, t, _ in observations])

    # label atoms: prep leaves first, then obs leaves, each in evaluation order
    offsets = {}
    k = 0
    for pos, t, _ in preps:
        offsets[pos] = range(k, k + t.arity)
        k += t.arity
    for pos, t, _ in observations:
        offsets[pos] = range(k, k + t.arity)
        k += t.arity
    order = tuple(i for pos in sorted(offsets) for i in offsets[pos])
    return FlatForm(typed.input, typed.output, prep, perm, obs, order)


def normalize(ast) -> CanonicalForm:
    """Canonical form of a generator circuit."""
    return flatten(ast).to_canonical()


# -- closure under composition ------------------------------------------

def _merge_orders(f_order, g_order, rpf, rpg, rof) -> tuple:
    def f_raw(i):
        return i if i < rpf else rpf + rpg + (i - rpf)

    def g_raw(i):
        return rpf + i if i < rpg else rpf + rpg + rof + (i - rpg)

    return tuple(f_raw(i) for i in f_order) + tuple(g_raw(i) for i in g_order)


def canonical_seq_compose(f: CanonicalForm, g: CanonicalForm) -> CanonicalForm:
    """Canonical form of ``g`` after ``f``: preparations and observations merge."""
    if f.output != g.input:
        raise CompositionError(f"output {f.output} of the first form does not match "
                               f"input {g.input} of the second")
    ff, gf = f.to_flat(), g.to_flat()
    ncf, ncg = len(ff.prep.output), len(gf.prep.output)
    ndf = len(ff.obs.input)
    fm, gm = ff.perm.mapping, gf.perm.mapping

    def through_f(t):
        return t if t < ndf else ndf + gm[ncg + t - ndf]

    mapping = [through_f(fm[i]) for i in range(ncf)]
    mapping += [ndf + gm[i] for i in range(ncg)]
    mapping += [through_f(fm[ncf + i]) for i in range(len(f.input))]
    prep = compose_par(ff.prep, gf.prep)
    obs = compose_par(ff.obs, gf.obs)
    perm = PermutationSpec(prep.output * f.input, tuple(mapping))
    order = _merge_orders(ff.label_order, gf.label_order,
                          ff.prep.arity, gf.prep.arity, ff.obs.arity)
    return FlatForm(f.input, g.output, prep, perm, obs, order).to_canonical()


def canonical_par_compose(f: CanonicalForm, g: CanonicalForm) -> CanonicalForm:
    """Canonical form of ``f`` beside ``g``."""
    ff, gf = f.to_flat(), g.to_flat()
    ncf, ncg = len(ff.prep.output), len(gf.prep.output)
    ndf, ndg = len(ff.obs.input), len(gf.obs.input)
    nbf = len(f.output)
    fm, gm = ff.perm.mapping, gf.perm.mapping

    def from_f(t):
        return t if t < ndf else ndf + ndg + (t - ndf)

    def from_g(t):
        return ndf + t if t < ndg else ndf + ndg + nbf + (t - ndg)

    mapping = [from_f(fm[i]) for i in range(ncf)]
    mapping += [from_g(gm[i]) for i in range(ncg)]
    mapping += [from_f(fm[ncf + i]) for i in range(len(f.input))]
    mapping += [from_g(gm[ncg + i]) for i in range(len(g.input))]
    prep = compose_par(ff.prep, gf.prep)
    obs = compose_par(ff.obs, gf.obs)
    inp = f.input * g.input
    perm = PermutationSpec(prep.output * inp, tuple(mapping))
    order = _merge_orders(ff.label_order, gf.label_order,
                          ff.prep.arity, gf.prep.arity, ff.obs.arity)
    return FlatForm(inp, f.output * g.output, prep, perm, obs, order).to_canonical()


# -- ancilla elimination -------------------------------------------------

@dataclass(frozen=True)
class AncillaFreeForm:
    """A family of measure-and-prepare branches sharing one routing.

    Branch ``(label, state, effect)`` has event
    ``S2 . (|state><effect| (x) id_E) . S1`` with a sub-normalised state on
    ``B'`` and an effect on ``A'``; no ancilla is left.  ``partition``
    groups branches back into the outcomes of the original form.
    """

    input: SystemType
    output: SystemType
    s1: PermutationSpec
    s2: PermutationSpec
    a1: SystemType
    b1: SystemType
    e: SystemType
    branches: tuple
    partition: dict

    def semantics(self) -> Test:
        map1, map2 = self.s1.index_map(), self.s2.index_map()
        shape = (self.output.dim, self.input.dim)
        events = []
        for label, st, ef in self.branches:
            core = st.matrix @ ef.matrix
            events.append((label, ClassicalEvent(
                self.input, self.output, _embed(core, map1, map2, self.e.dim, shape))))
        return Test(self.input, self.output, events)

    def coarse_grained(self) -> Test:
        return coarse_grain(self.semantics(), self.partition)


def eliminate_ancilla(cf: CanonicalForm) -> AncillaFreeForm:
    """Expand the ancilla on simplex vertices and contract it away.

    Writing ``rho_x = sum_{m,i} p_{mi} |m>|i>`` and
    ``a_y = sum_{m',j} d_{m'j} <m'|<j|``, the ancilla contributes
    ``delta_{m m'}``, leaving branches ``(sum_i p_{mi}|i>)(sum_j d_{mj}<j|)``
    indexed by ``(x, y, m)``.
    """
    d_c, d_a1, d_b1 = cf.c.dim, cf.a1.dim, cf.b1.dim
    branches = []
    partition = {}
    for x, rho in cf.prep:
        rv = rho.vector()
        for y, a in cf.obs:
            av = a.vector()
            label = _reorder(x + y, cf.label_order)
            block = []
            for m in range(d_c):
                st = ClassicalEvent(TRIVIAL, cf.b1,
                                    QMatrix.column(rv[m * d_b1:(m + 1) * d_b1]))
                ef = ClassicalEvent(cf.a1, TRIVIAL,
                                    QMatrix.row(av[m * d_a1:(m + 1) * d_a1]))
                blabel = label if cf.c.is_trivial else label + (f"c{m}",)
                branches.append((blabel, st, ef))
                block.append(blabel)
            partition[label] = block
    return AncillaFreeForm(cf.input, cf.output, cf.s1, cf.s2, cf.a1, cf.b1, cf.e,
                           tuple(branches), partition)


# -- atomicity -----------------------------------------------------------

def identity_refinement_weights(t: Test) -> dict | None:
    """``{label: p}`` when every event of ``t`` is ``p * id`` and they sum to ``id``."""
    if t.input != t.output:
        return None
    ident = identity_event(t.input).matrix
    if full_coarse_graining(t).matrix != ident:
        return None
    weights = {}
    for label, ev in t:
        p = ev.matrix.is_proportional_to(ident)
        if p is None or p < 0:
            return None
        weights[label] = p
    return weights


def is_atomic_identity_refinement(t: Test) -> bool:
    return identity_refinement_weights(t) is not None


# -- routings, deterministic form and membership -------------------------

@dataclass(frozen=True)
class Routing:
    """How input factors reach the output: ``E`` passes through, the rest is cut."""

    s1: PermutationSpec
    s2: PermutationSpec
    a1: SystemType
    b1: SystemType
    e: SystemType

    def maps(self):
        return self.s1.index_map(), self.s2.index_map()


def routings(a: SystemType, b: SystemType):
    """Every way of passing input factors straight to output factors.

    Larger pass-through sets come first.  Within ``E`` factors are ordered
    by output slot; ``A'`` and ``B'`` keep slot order.
    """
    n, m = len(a.factors), len(b.factors)
    for k in range(min(n, m), -1, -1):
        for ins in combinations(range(n), k):
            for outs in permutations(range(m), k):
                if any(a.factors[i] != b.factors[o] for i, o in zip(ins, outs)):
                    continue
                pairs = sorted(zip(outs, ins))
                a1 = [i for i in range(n) if i not in ins]
                b1 = [o for o in range(m) if o not in outs]
                m1 = [0] * n
                for pos, i in enumerate(a1):
                    m1[i] = pos
                for pos, (_, i) in enumerate(pairs):
                    m1[i] = len(a1) + pos
                e = SystemType(tuple(a.factors[i] for _, i in pairs))
                b1_sys = b.sub(b1)
                s1 = PermutationSpec(a, tuple(m1))
                s2 = PermutationSpec(b1_sys * e, tuple(b1) + tuple(o for o, _ in pairs))
                yield Routing(s1, s2, a.sub(a1), b1_sys, e)


def extract_core(m: QMatrix, routing: Routing, maps=None) -> QMatrix | None:
    """``R`` with ``m == S2 (R (x) id_E) S1``, or None when ``m`` has another shape."""
    map1, map2 = maps or routing.maps()
    d_e, d_a1, d_b1 = routing.e.dim, routing.a1.dim, routing.b1.dim
    inv1 = [0] * len(map1)
    for i, j in enumerate(map1):
        inv1[j] = i
    inv2 = [0] * len(map2)
    for k, o in enumerate(map2):
        inv2[o] = k
    cols = []
    for a1 in range(d_a1):
        col = m.col(inv1[a1 * d_e])
        core = {}
        for o, v in col.items():
            b1, e = divmod(inv2[o], d_e)
            if e != 0:
                return None
            core[b1] = v
        cols.append(core)
    r = QMatrix(d_b1, d_a1, cols)
    if _embed(r, map1, map2, d_e, m.shape) != m:
        return None
    return r


@dataclass(frozen=True)
class DeterministicForm:
    """``T = S2 . (|rho><u|_{A'} (x) id_E) . S1``."""

    s1: PermutationSpec
    s2: PermutationSpec
    a1: SystemType
    b1: SystemType
    e: SystemType
    rho: ClassicalEvent

    def event(self) -> ClassicalEvent:
        ones = QMatrix.row([1] * self.a1.dim)
        core = self.rho.matrix @ ones
        m = _embed(core, self.s1.index_map(), self.s2.index_map(), self.e.dim,
                   (self.s2.output.dim, self.s1.input.dim))
        return ClassicalEvent(self.s1.input, self.s2.output, m)


def _constant_columns(r: QMatrix) -> bool:
    first = r.col(0) if r.ncols else {}
    return all(r.col(j) == first for j in range(1, r.ncols))


def deterministic_form(t: ClassicalEvent) -> DeterministicForm | None:
    """Destroy-and-reprepare decomposition of a deterministic event, if one exists.

    The search covers every routing, so ``None`` means the event is not of
    that shape for any choice of ``A'``, ``B'``, ``E`` and permutations.
    """
    if not t.is_deterministic:
        raise ValueError("deterministic_form needs a deterministic event")
    for rt in routings(t.input, t.output):
        r = extract_core(t.matrix, rt)
        if r is not None and _constant_columns(r):
            rho = ClassicalEvent(TRIVIAL, rt.b1, QMatrix(rt.b1.dim, 1, [r.col(0)]))
            return DeterministicForm(rt.s1, rt.s2, rt.a1, rt.b1, rt.e, rho)
    return None


@dataclass(frozen=True)
class Certificate:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True)
class InMCT:
    witness: CanonicalForm
    partition: dict
    verdict: str = field(default="in-mct", init=False)


@dataclass(frozen=True)
class NotInMCT:
    certificate: Certificate
    verdict: str = field(default="not-in-mct", init=False)


@dataclass(frozen=True)
class Unknown:
    reason: str
    verdict: str = field(default="unknown", init=False)


def canonical_from_test_parts(routing: Routing, cores: list, labels: list) -> tuple:
    """A canonical form realising cores ``R_z`` that sum to ``|rho><u|``.

    When every core is ``|rho><e_z|`` no ancilla is needed.  Otherwise the
    ancilla is a copy of the support of ``rho``: the preparation puts
    ``sum_b rho(b) |b>|b>`` on ``C B'`` and the observation reads
    ``a_z(b, a') = R_z[b, a'] / rho(b)``.  Returns ``(form, partition)``.
    """
    d_b1, d_a1 = routing.b1.dim, routing.a1.dim
    total = cores[0]
    for r in cores[1:]:
        total = total + r
    rho = [total[b, 0] for b in range(d_b1)]
    support = [b for b in range(d_b1) if rho[b]]
    rho_col = QMatrix(d_b1, 1, [{b: rho[b] for b in support}])
    b0 = support[0]
    effects = [QMatrix(1, d_a1, [{0: r[b0, j] / rho[b0]} if r[b0, j] else {}
                                 for j in range(d_a1)]) for r in cores]
    if all(rho_col @ e == r for e, r in zip(effects, cores)):
        # every core is |rho><e_z|: no ancilla needed
        c = TRIVIAL
        prep_vec = rho_col
    else:
        c = SystemType((len(support),))
        prep_vec = QMatrix(len(support) * d_b1, 1,
                           [{k * d_b1 + b: rho[b] for k, b in enumerate(support)}])
        effects = []
        for r in cores:
            cols = [dict() for _ in range(len(support) * d_a1)]
            for k, b in enumerate(support):
                for j in range(d_a1):
                    v = r[b, j]
                    if v:
                        cols[k * d_a1 + j][0] = v / rho[b]
            effects.append(QMatrix(1, len(support) * d_a1, cols))
    prep = Test(TRIVIAL, c * routing.b1, [((), prep_vec)])
    obs = Test(c * routing.a1, TRIVIAL, list(zip(labels, effects)))
    cf = CanonicalForm(input=routing.s1.input, output=routing.s2.output,
                       s1=routing.s1, s2=routing.s2, a1=routing.a1, b1=routing.b1,
                       c=c, e=routing.e, prep=prep, obs=obs)
    return cf, {label: [label] for label in labels}


def _ancilla_dim(cores, summed, d_b1) -> int:
    support = [b for b in range(d_b1) if summed[b, 0]]
    if len(support) <= 1:
        return 1
    rho_col = QMatrix(d_b1, 1, [{b: summed[b, 0] for b in support}])
    b0 = support[0]
    for r in cores:
        e = QMatrix(1, r.ncols, [{0: r[b0, j] / summed[b0, 0]} if r[b0, j] else {}
                                 for j in range(r.ncols)])
        if rho_col @ e != r:
            return len(support)
    return 1


def membership(t: Test, ancilla_cap: int | None = None,
               outcome_cap: int = DEFAULT_OUTCOME_CAP):
    """Decide whether ``t`` is a test of the minimal classical theory.

    Returns :class:`InMCT` with a replayed witness, :class:`NotInMCT` with a
    certificate, or :class:`Unknown` when a witness exists only beyond the
    caps.
    """
    if ancilla_cap is None:
        ancilla_cap = t.input.dim * t.output.dim
    if ancilla_cap < 0 or outcome_cap < 0:
        raise ValueError("caps must be non-negative")
    total = full_coarse_graining(t)
    if t.input == t.output and total.matrix == identity_event(t.input).matrix:
        if identity_refinement_weights(t) is None:
            bad = next(format_label(l) or "()" for l, ev in t
                       if ev.matrix.is_proportional_to(total.matrix) is None)
            return NotInMCT(Certificate(
                "atomicity",
                f"events sum to the identity on {t.input} but event {bad} is not "
                "proportional to the identity"))
    labels = list(t.labels)
    over_caps = None
    for rt in routings(t.input, t.output):
        maps = rt.maps()
        cores = []
        for _, ev in t:
            r = extract_core(ev.matrix, rt, maps)
            if r is None:
                break
            cores.append(r)
        else:
            summed = cores[0]
            for r in cores[1:]:
                summed = summed + r
            if not _constant_columns(summed):
                continue
            d_c = _ancilla_dim(cores, summed, rt.b1.dim)
            if d_c > ancilla_cap or len(labels) > outcome_cap:
                over_caps = over_caps or (
                    f"witness needs an ancilla of dimension {d_c} and {len(labels)} "
                    f"observation outcomes (caps {ancilla_cap}, {outcome_cap})")
                continue
            cf, partition = canonical_from_test_parts(rt, cores, labels)
            replay = coarse_grain(semantics(cf), partition)
            if replay != t:
                raise AssertionError("membership witness failed to replay")
            return InMCT(cf, partition)
    if over_caps:
        return Unknown(over_caps)
    if total.is_deterministic and deterministic_form(total) is None:
        return NotInMCT(Certificate(
            "deterministic-form",
            "the full coarse-graining is not S2 (|rho><u| (x) id_E) S1 for any routing"))
    return NotInMCT(Certificate(
        "canonical-form",
        "no routing of input factors makes every event S2 (R (x) id_E) S1 with the "
        "cores summing to |rho><u|"))


# -- stabilisation -------------------------------------------------------

@dataclass(frozen=True)
class Stabilization:
    signature: tuple
    indices: tuple
    states: tuple | None = None


def stabilize_subsequence(forms: Sequence[CanonicalForm]) -> Stabilization:
    """Largest subsequence sharing ``(S1, S2, A', B', E)``.

    Ties go to the shape that occurs first.  When every member of the class
    is deterministic the reprepared states on ``B'`` are returned as well.
    """
    if not forms:
        raise ValueError("stabilize_subsequence needs a non-empty sequence")
    counts = Counter(cf.signature() for cf in forms)
    first_seen = {}
    for k, cf in enumerate(forms):
        first_seen.setdefault(cf.signature(), k)
    best = max(counts, key=lambda s: (counts[s], -first_seen[s]))
    indices = tuple(k for k, cf in enumerate(forms) if cf.signature() == best)
    states = None
    if all(forms[k].is_deterministic for k in indices):
        states = tuple(_marginal_state(forms[k]) for k in indices)
    return Stabilization(best, indices, states)


def _marginal_state(cf: CanonicalForm) -> ClassicalEvent:
    rho = cf.prep.events[0][1].matrix
    d_b1 = cf.b1.dim
    core = _reshape(rho, cf.c.dim, d_b1)
    ones = QMatrix.row([1] * cf.c.dim)
    return ClassicalEvent(TRIVIAL, cf.b1, (ones @ core).transpose())


# -- serialisation -------------------------------------------------------

def to_circuit(cf: CanonicalForm, prep_name: str = "rho", obs_name: str = "a"):
    """The canonical form as an ``.opt`` source in template shape.

    The emitted circuit evaluates to the same events; its outcome labels list
    preparation atoms before observation atoms.
    """
    from .lang import CircuitSource
    a1e = cf.a1 * cf.e
    b1e = cf.b1 * cf.e
    body = Seq(Seq(Seq(Seq(
        Permutation(cf.s1),
        Par(Prep(prep_name, cf.prep), Identity(a1e))),
        Par(Par(Identity(cf.c), Permutation(block_swap(cf.b1, cf.a1))), Identity(cf.e))),
        Par(Obs(obs_name, cf.obs), Identity(b1e))),
        Permutation(cf.s2))
    return CircuitSource({}, {prep_name: ("ptest", cf.prep), obs_name: ("otest", cf.obs)}, body)
