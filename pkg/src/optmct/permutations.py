"""Permutations of system factors and their bipartite decomposition.

A :class:`PermutationSpec` is stored as a slot bijection: ``mapping[i]`` is
the output slot that input factor ``i`` is routed to.  Matrices are built on
demand from the induced mixed-radix index map.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import permutations as _iter_perms

from .core import ClassicalEvent, SystemType, Test, _as_system
from .linalg import QMatrix

__all__ = [
    "PermutationSpec", "BipartiteDecomposition", "PermutationError",
    "perm_from_generators", "transposition_word", "decompose_bipartite",
    "invert", "identity_perm", "block_swap", "stable_partition",
    "format_cycles", "parse_cycles", "all_permutations",
]


class PermutationError(ValueError):
    pass


@dataclass(frozen=True)
class PermutationSpec:
    input: SystemType
    mapping: tuple

    def __post_init__(self):
        inp = _as_system(self.input)
        mapping = tuple(int(m) for m in self.mapping)
        object.__setattr__(self, "input", inp)
        object.__setattr__(self, "mapping", mapping)
        if len(mapping) != len(inp.factors):
            raise PermutationError(
                f"mapping has {len(mapping)} slots but {inp} has {len(inp.factors)} factors")
        if sorted(mapping) != list(range(len(mapping))):
            raise PermutationError(f"mapping {list(mapping)} is not a bijection")

    @property
    def output(self) -> SystemType:
        out = [0] * len(self.mapping)
        for i, m in enumerate(self.mapping):
            out[m] = self.input.factors[i]
        return SystemType(tuple(out))

    @property
    def size(self) -> int:
        return len(self.mapping)

    @property
    def is_identity(self) -> bool:
        return all(i == m for i, m in enumerate(self.mapping))

    def then(self, after: "PermutationSpec") -> "PermutationSpec":
        """``after`` applied to the output of ``self``."""
        if self.output != after.input:
            raise PermutationError(f"cannot compose: {self.output} vs {after.input}")
        return PermutationSpec(self.input, tuple(after.mapping[m] for m in self.mapping))

    def tensor(self, other: "PermutationSpec") -> "PermutationSpec":
        n = self.size
        return PermutationSpec(self.input * other.input,
                               self.mapping + tuple(n + m for m in other.mapping))

    def index_map(self) -> list:
        """Flat index map: input basis index ``k`` goes to output index ``map[k]``."""
        inp, out = self.input, self.output
        # place value of every output slot
        place = [1] * len(out.factors)
        for s in range(len(out.factors) - 2, -1, -1):
            place[s] = place[s + 1] * out.factors[s + 1]
        weights = [place[m] for m in self.mapping]
        result = []
        for digits in inp.all_digits():
            result.append(sum(d * w for d, w in zip(digits, weights)))
        return result

    def matrix(self) -> QMatrix:
        return QMatrix.from_index_map(self.index_map())

    def event(self) -> ClassicalEvent:
        return ClassicalEvent(self.input, self.output, self.matrix())

    def test(self) -> Test:
        return Test(self.input, self.output, [((), self.event())])

    def __str__(self) -> str:
        return f"{self.input} {format_cycles(self.mapping)}"


def identity_perm(s) -> PermutationSpec:
    s = _as_system(s)
    return PermutationSpec(s, tuple(range(len(s.factors))))


def block_swap(a, b) -> PermutationSpec:
    """The swap of systems ``a`` and ``b``: ``a b -> b a``."""
    a, b = _as_system(a), _as_system(b)
    n, m = len(a.factors), len(b.factors)
    return PermutationSpec(a * b, tuple(m + i for i in range(n)) + tuple(range(m)))


def invert(s: PermutationSpec) -> PermutationSpec:
    inv = [0] * s.size
    for i, m in enumerate(s.mapping):
        inv[m] = i
    return PermutationSpec(s.output, tuple(inv))


def transposition_word(i: int, j: int) -> list:
    """Adjacent swaps realising the transposition of slots ``i`` and ``j``."""
    if i == j:
        return []
    i, j = min(i, j), max(i, j)
    up = [("swap", k, k + 1) for k in range(i, j)]
    down = [("swap", k, k + 1) for k in range(j - 2, i - 1, -1)]
    return up + down


def perm_from_generators(input, word) -> PermutationSpec:
    """Compose a word of generators acting on ``input``.

    Each letter is ``("id",)`` or ``("swap", i, i + 1)``: the swap of two
    neighbouring factor slots of the current system.
    """
    current = identity_perm(input)
    for letter in word:
        if letter[0] == "id":
            continue
        if letter[0] != "swap" or len(letter) != 3:
            raise PermutationError(f"unknown generator {letter!r}")
        _, i, j = letter
        n = current.size
        if not (0 <= i < n and 0 <= j < n):
            raise PermutationError(f"slot out of range in {letter!r} for {n} factors")
        if abs(i - j) != 1:
            raise PermutationError(
                f"swap of non-adjacent slots {i}, {j}; expand it with transposition_word")
        step = list(range(n))
        step[i], step[j] = j, i
        current = current.then(PermutationSpec(current.output, tuple(step)))
    return current


def stable_partition(slots, key) -> tuple:
    """Split ``slots`` into (key true, key false), keeping their order."""
    yes = [s for s in slots if key(s)]
    no = [s for s in slots if not key(s)]
    return yes, no


@dataclass(frozen=True)
class BipartiteDecomposition:
    """``S = (S4 (x) S2) . (id_A' (x) swap(A'', B') (x) id_B'') . (S3 (x) S1)``.

    ``S3`` sorts the top input into ``A'`` (bound for the top output) over
    ``A''``; ``S1`` sorts the bottom input into ``B'`` over ``B''``.  After
    exchanging ``A''`` and ``B'``, ``S4`` reorders ``A' B'`` into the top
    output and ``S2`` reorders ``A'' B''`` into the bottom output.
    """

    s1: PermutationSpec
    s2: PermutationSpec
    s3: PermutationSpec
    s4: PermutationSpec
    a1: SystemType   # A'
    a2: SystemType   # A''
    b1: SystemType   # B'
    b2: SystemType   # B''

    def middle(self) -> PermutationSpec:
        return identity_perm(self.a1).tensor(block_swap(self.a2, self.b1)).tensor(
            identity_perm(self.b2))

    def recompose(self) -> PermutationSpec:
        return self.s3.tensor(self.s1).then(self.middle()).then(self.s4.tensor(self.s2))


def decompose_bipartite(s: PermutationSpec, cut_in: int, cut_out: int) -> BipartiteDecomposition:
    """Split ``s`` across the cuts ``A|B`` (input) and ``C|D`` (output).

    ``cut_in`` is the number of leading input factors forming ``A``;
    ``cut_out`` the number of leading output factors forming ``C``.
    """
    n = s.size
    if not (0 <= cut_in <= n and 0 <= cut_out <= n):
        raise PermutationError(f"cuts {cut_in}|{cut_out} invalid for {n} factors")
    inp, out = s.input, s.output
    top_in = list(range(cut_in))
    bottom_in = list(range(cut_in, n))
    to_top = lambda slot: s.mapping[slot] < cut_out
    a1, a2 = stable_partition(top_in, to_top)
    b1, b2 = stable_partition(bottom_in, to_top)

    def sorter(slots, first, second):
        order = first + second
        mapping = [0] * len(slots)
        for pos, slot in enumerate(order):
            mapping[slot - slots[0] if slots else 0] = pos
        return PermutationSpec(inp.sub(slots), tuple(mapping))

    s3 = sorter(top_in, a1, a2)
    s1 = sorter(bottom_in, b1, b2)
    # after the middle swap the wires run A' B' A'' B''
    top_wires = a1 + b1
    bottom_wires = a2 + b2
    s4 = PermutationSpec(inp.sub(top_wires), tuple(s.mapping[w] for w in top_wires))
    s2 = PermutationSpec(inp.sub(bottom_wires),
                         tuple(s.mapping[w] - cut_out for w in bottom_wires))
    assert s4.output == out.sub(range(cut_out))
    assert s2.output == out.sub(range(cut_out, n))
    return BipartiteDecomposition(s1=s1, s2=s2, s3=s3, s4=s4,
                                  a1=inp.sub(a1), a2=inp.sub(a2),
                                  b1=inp.sub(b1), b2=inp.sub(b2))


def all_permutations(s) -> list:
    s = _as_system(s)
    return [PermutationSpec(s, p) for p in _iter_perms(range(len(s.factors)))]


# -- cycle notation ------------------------------------------------------

def format_cycles(mapping) -> str:
    """One-line cycle notation; fixed points omitted, identity is ``()``."""
    seen = set()
    cycles = []
    for start in range(len(mapping)):
        if start in seen or mapping[start] == start:
            seen.add(start)
            continue
        cyc = [start]
        seen.add(start)
        nxt = mapping[start]
        while nxt != start:
            cyc.append(nxt)
            seen.add(nxt)
            nxt = mapping[nxt]
        cycles.append("(" + " ".join(str(c) for c in cyc) + ")")
    return "".join(cycles) or "()"


_CYCLE = re.compile(r"\(\s*([0-9\s]*)\)")


def parse_cycles(text: str, n: int) -> tuple:
    text = text.strip()
    mapping = list(range(n))
    pos = 0
    touched = set()
    for m in _CYCLE.finditer(text):
        if text[pos:m.start()].strip():
            raise PermutationError(f"bad cycle notation {text!r}")
        pos = m.end()
        cyc = [int(x) for x in m.group(1).split()]
        for c in cyc:
            if not 0 <= c < n:
                raise PermutationError(f"slot {c} out of range for {n} factors")
            if c in touched:
                raise PermutationError(f"slot {c} repeated in {text!r}")
            touched.add(c)
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            mapping[a] = b
    if text[pos:].strip():
        raise PermutationError(f"bad cycle notation {text!r}")
    return tuple(mapping)
