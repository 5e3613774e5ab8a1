"""Seeded random systems, tests and generator circuits with exact entries.

Weights are drawn from a small integer grid and renormalised, so every
sample is an exact rational object satisfying the test constraints.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .circuit import Identity, Obs, Par, Permutation, Prep, Seq, par_all, seq_all
from .core import ClassicalEvent, SystemType, TRIVIAL, Test
from .lang import CircuitSource
from .linalg import QMatrix
from .permutations import PermutationSpec, invert

__all__ = [
    "case_rng", "distribution", "random_system", "random_state",
    "random_preparation_test", "random_observation_test", "random_test",
    "random_deterministic_event", "random_permutation", "random_circuit",
    "identity_wrapped_circuit", "reassociate", "CircuitBuilder",
]

GRID = 4


def case_rng(seed: int, suite: str, index: int) -> random.Random:
    """Independent generator for one case of a suite."""
    return random.Random(f"{seed}:{suite}:{index}")


def distribution(rng: random.Random, n: int, sparse: float = 0.3) -> list:
    """Exact probability vector of length ``n``; some entries may be zero."""
    while True:
        w = [0 if rng.random() < sparse else rng.randint(1, GRID) for _ in range(n)]
        total = sum(w)
        if total:
            return [Fraction(x, total) for x in w]


def random_system(rng: random.Random, max_factors: int = 3, max_dim: int = 3,
                  min_factors: int = 1, min_dim: int = 2) -> SystemType:
    n = rng.randint(min_factors, max_factors)
    return SystemType(tuple(rng.randint(min_dim, max_dim) for _ in range(n)))


def random_state(rng: random.Random, system: SystemType) -> ClassicalEvent:
    if rng.random() < 0.25:
        vec = [0] * system.dim
        vec[rng.randrange(system.dim)] = 1
    else:
        vec = distribution(rng, system.dim)
    return ClassicalEvent(TRIVIAL, system, QMatrix.column(vec))


def _labels(k: int) -> list:
    return [(str(i),) for i in range(k)]


def random_preparation_test(rng: random.Random, system: SystemType,
                            max_outcomes: int = 3) -> Test:
    k = rng.randint(1, max_outcomes)
    p = distribution(rng, k, sparse=0.1)
    events = []
    for label, px in zip(_labels(k), p):
        st = random_state(rng, system).matrix.scale(px)
        events.append((label, st))
    return Test(TRIVIAL, system, events)


def random_observation_test(rng: random.Random, system: SystemType,
                            max_outcomes: int = 3, min_outcomes: int = 1) -> Test:
    k = rng.randint(min_outcomes, max_outcomes)
    rows = [[Fraction(0)] * system.dim for _ in range(k)]
    sharp = rng.random() < 0.3
    for j in range(system.dim):
        if sharp:
            rows[rng.randrange(k)][j] = Fraction(1)
        else:
            for x, v in enumerate(distribution(rng, k)):
                rows[x][j] = v
    return Test(system, TRIVIAL, [(l, QMatrix.row(r)) for l, r in zip(_labels(k), rows)])


def random_test(rng: random.Random, a: SystemType, b: SystemType,
                max_outcomes: int = 3, min_outcomes: int = 1) -> Test:
    """Arbitrary classical test: each input column spreads over outcomes and outputs."""
    k = rng.randint(min_outcomes, max_outcomes)
    cols = [[dict() for _ in range(a.dim)] for _ in range(k)]
    for j in range(a.dim):
        w = distribution(rng, k * b.dim, sparse=0.6)
        for idx, v in enumerate(w):
            if v:
                x, i = divmod(idx, b.dim)
                cols[x][j][i] = v
    return Test(a, b, [(l, QMatrix(b.dim, a.dim, c)) for l, c in zip(_labels(k), cols)])


def random_deterministic_event(rng: random.Random, a: SystemType, b: SystemType) -> ClassicalEvent:
    cols = []
    for _ in range(a.dim):
        if rng.random() < 0.3:
            cols.append({rng.randrange(b.dim): Fraction(1)})
        else:
            cols.append({i: v for i, v in enumerate(distribution(rng, b.dim)) if v})
    return ClassicalEvent(a, b, QMatrix(b.dim, a.dim, cols))


def random_permutation(rng: random.Random, system: SystemType) -> PermutationSpec:
    mapping = list(range(len(system.factors)))
    rng.shuffle(mapping)
    return PermutationSpec(system, tuple(mapping))


class CircuitBuilder:
    """Layered random generator circuits.

    Every layer is either one permutation or a parallel row of identity,
    observation and preparation blocks; the number of factors never exceeds
    ``max_factors`` at any cut, and the number of prep/obs leaves is capped
    to keep the outcome count small.
    """

    def __init__(self, rng: random.Random, max_factors: int = 4, max_dim: int = 3,
                 max_leaves: int = 4, max_outcomes: int = 2):
        self.rng = rng
        self.max_factors = max_factors
        self.max_dim = max_dim
        self.max_leaves = max_leaves
        self.max_outcomes = max_outcomes
        self.tests: dict = {}

    def _name(self, prefix: str) -> str:
        return f"{prefix}{len(self.tests)}"

    def prep(self, system: SystemType) -> Prep:
        name = self._name("p")
        t = random_preparation_test(self.rng, system, self.max_outcomes)
        self.tests[name] = ("ptest", t)
        return Prep(name, t)

    def obs(self, system: SystemType) -> Obs:
        name = self._name("m")
        t = random_observation_test(self.rng, system, self.max_outcomes)
        self.tests[name] = ("otest", t)
        return Obs(name, t)

    @property
    def leaves_left(self) -> int:
        return self.max_leaves - len(self.tests)

    def layer(self, factors: list):
        rng = self.rng
        if len(factors) >= 2 and rng.random() < 0.35:
            spec = random_permutation(rng, SystemType(tuple(factors)))
            return Permutation(spec), list(spec.output.factors)
        blocks, out = [], []
        i = 0
        while i < len(factors):
            size = rng.randint(1, len(factors) - i)
            chunk = factors[i:i + size]
            if self.leaves_left > 0 and rng.random() < 0.3:
                blocks.append(self.obs(SystemType(tuple(chunk))))
            else:
                blocks.append(Identity(SystemType(tuple(chunk))))
                out += chunk
            i += size
        room = self.max_factors - len(out)
        if self.leaves_left > 0 and room > 0 and rng.random() < 0.45:
            new = [rng.randint(2, self.max_dim) for _ in range(rng.randint(1, min(2, room)))]
            pos = rng.randint(0, len(blocks))
            before = sum(len(_block_out(b)) for b in blocks[:pos])
            blocks.insert(pos, self.prep(SystemType(tuple(new))))
            out = out[:before] + new + out[before:]
        if not blocks:
            return Identity(TRIVIAL), []
        return par_all(*blocks), out

    def circuit(self, inp: SystemType, out: SystemType | None = None, depth: int = 6):
        factors = list(inp.factors)
        nodes = []
        for _ in range(self.rng.randint(1, depth)):
            node, factors = self.layer(factors)
            nodes.append(node)
        if out is not None and factors != list(out.factors):
            cur = SystemType(tuple(factors))
            if sorted(factors) == sorted(out.factors) and self.rng.random() < 0.7:
                nodes.append(Permutation(_sorting_perm(cur, out)))
            else:
                tail = []
                if factors:
                    tail.append(self.obs(cur))
                if out.factors:
                    tail.append(self.prep(out))
                nodes.append(seq_all(*tail) if tail else Identity(TRIVIAL))
        return seq_all(*nodes)


def _block_out(b) -> tuple:
    if isinstance(b, Identity):
        return b.system.factors
    if isinstance(b, Prep):
        return b.test.output.factors
    return ()


def _sorting_perm(cur: SystemType, target: SystemType) -> PermutationSpec:
    free = {}
    for slot, d in enumerate(target.factors):
        free.setdefault(d, []).append(slot)
    return PermutationSpec(cur, tuple(free[d].pop(0) for d in cur.factors))


def random_circuit(rng: random.Random, inp: SystemType | None = None,
                   out: SystemType | None = None, max_factors: int = 4,
                   max_dim: int = 3, depth: int = 6, max_leaves: int = 4,
                   max_outcomes: int = 2) -> CircuitSource:
    b = CircuitBuilder(rng, max_factors, max_dim, max_leaves, max_outcomes)
    if inp is None:
        inp = random_system(rng, max_factors, max_dim, min_factors=0)
    node = b.circuit(inp, out, depth)
    return CircuitSource({}, dict(b.tests), node)


def identity_wrapped_circuit(rng: random.Random, system: SystemType,
                             max_factors: int = 4, max_dim: int = 3) -> CircuitSource:
    """A circuit on ``system`` whose events sum to the identity.

    Closed scalar circuits run beside the system, sometimes with their
    ancilla routed across it and back, and the whole is optionally
    conjugated by a random permutation.
    """
    b = CircuitBuilder(rng, max_factors, max_dim, max_leaves=4, max_outcomes=2)
    pi = None
    inner = system
    if len(system.factors) >= 2 and rng.random() < 0.5:
        pi = random_permutation(rng, system)
        inner = pi.output
    room = max_factors - len(inner.factors)
    nodes = []
    for _ in range(rng.randint(1, 2)):
        if room > 0 and rng.random() < 0.6:
            aux = SystemType(tuple(rng.randint(2, max_dim)
                                   for _ in range(rng.randint(1, min(2, room)))))
            sigma = random_permutation(rng, inner * aux)
            nodes += [Par(Identity(inner), b.prep(aux)), Permutation(sigma),
                      Permutation(invert(sigma)), Par(Identity(inner), b.obs(aux))]
        else:
            aux = SystemType((rng.randint(2, max_dim),))
            closed = Seq(b.prep(aux), b.obs(aux))
            nodes.append(Par(closed, Identity(inner)) if rng.random() < 0.5
                         else Par(Identity(inner), closed))
    if pi is not None:
        nodes = [Permutation(pi)] + nodes + [Permutation(invert(pi))]
    return CircuitSource({}, dict(b.tests), seq_all(*nodes))


def reassociate(rng: random.Random, node):
    """A randomly re-bracketed circuit with the same leaves in the same order."""
    if isinstance(node, (Seq, Par)):
        kind = type(node)
        items = _flatten(node, kind)
        items = [reassociate(rng, n) for n in items]
        return _bracket(rng, items, kind)
    return node


def _flatten(node, kind) -> list:
    if isinstance(node, kind):
        return _flatten(node.first if kind is Seq else node.top, kind) + \
            _flatten(node.second if kind is Seq else node.bottom, kind)
    return [node]


def _bracket(rng, items, kind):
    if len(items) == 1:
        return items[0]
    k = rng.randint(1, len(items) - 1)
    return kind(_bracket(rng, items[:k], kind), _bracket(rng, items[k:], kind))
