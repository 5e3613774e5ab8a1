"""Systems, events and tests of a causal classical theory, in exact arithmetic.

A system is an ordered list of factor dimensions.  Composite indices are
row-major mixed radix with the leftmost factor most significant, so the
Kronecker product of matrices matches parallel composition of wires.

An event ``A -> B`` is a ``dim(B) x dim(A)`` non-negative matrix whose
columns sum to at most one.  A test is a finite, ordered, labelled family of
events on the same pair of systems whose sum is column-stochastic.

Outcome labels are tuples of strings.  Sequential and parallel composition
concatenate the tuples, which makes both compositions strictly associative
on labels too.  Labels render as dotted strings (``"x.y"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .linalg import QMatrix

__all__ = [
    "SystemType", "TRIVIAL", "ClassicalEvent", "Test", "Label",
    "CompositionError", "PartitionError",
    "compose_seq", "compose_par", "coarse_grain", "full_coarse_graining",
    "probability", "validate", "ValidityReport", "Violation",
    "deterministic_effect", "vertex_state", "vertex_effect",
    "identity_test", "identity_event", "state", "effect",
    "preparation_test", "observation_test", "deterministic_test",
    "as_label", "format_label",
]

Label = tuple


class CompositionError(ValueError):
    """Raised when two tests cannot be composed because their systems differ."""


class PartitionError(ValueError):
    pass


def as_label(label) -> tuple:
    """Normalise a user-supplied label: tuples pass through, strings split on dots."""
    if isinstance(label, tuple):
        atoms = label
    elif isinstance(label, str):
        atoms = tuple(label.split(".")) if label else ()
    elif isinstance(label, int):
        atoms = (str(label),)
    else:
        raise TypeError(f"bad outcome label {label!r}")
    for a in atoms:
        if not isinstance(a, str) or "." in a or not a:
            raise ValueError(f"bad label atom {a!r} in {label!r}")
    return atoms


def format_label(label: tuple) -> str:
    return ".".join(label)


@dataclass(frozen=True)
class SystemType:
    factors: tuple = ()

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if any(f < 1 for f in factors):
            raise ValueError(f"factor dimensions must be >= 1, got {list(factors)}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *dims: int) -> "SystemType":
        return cls(tuple(dims))

    @property
    def dim(self) -> int:
        d = 1
        for f in self.factors:
            d *= f
        return d

    @property
    def is_trivial(self) -> bool:
        return self.dim == 1 and not self.factors

    def __len__(self) -> int:
        return len(self.factors)

    def tensor(self, other: "SystemType") -> "SystemType":
        return SystemType(self.factors + other.factors)

    __mul__ = tensor

    def sub(self, slots: Iterable[int]) -> "SystemType":
        return SystemType(tuple(self.factors[s] for s in slots))

    def index(self, digits: Sequence[int]) -> int:
        """Flat index of a tuple of per-factor indices."""
        if len(digits) != len(self.factors):
            raise ValueError(f"expected {len(self.factors)} digits, got {len(digits)}")
        flat = 0
        for d, f in zip(digits, self.factors):
            if not 0 <= d < f:
                raise IndexError(f"digit {d} out of range for factor of dimension {f}")
            flat = flat * f + d
        return flat

    def digits(self, flat: int) -> tuple:
        if not 0 <= flat < self.dim:
            raise IndexError(f"index {flat} out of range for dimension {self.dim}")
        out = []
        for f in reversed(self.factors):
            flat, d = divmod(flat, f)
            out.append(d)
        return tuple(reversed(out))

    def all_digits(self) -> Iterator[tuple]:
        return product(*(range(f) for f in self.factors))

    def __str__(self) -> str:
        return "[" + ",".join(str(f) for f in self.factors) + "]"


TRIVIAL = SystemType(())


def _as_system(s) -> SystemType:
    if isinstance(s, SystemType):
        return s
    if isinstance(s, int):
        return SystemType((s,))
    return SystemType(tuple(s))


@dataclass(frozen=True)
class ClassicalEvent:
    """A transformation event ``input -> output`` as an exact matrix."""

    input: SystemType
    output: SystemType
    matrix: QMatrix

    def __post_init__(self):
        object.__setattr__(self, "input", _as_system(self.input))
        object.__setattr__(self, "output", _as_system(self.output))
        m = self.matrix
        if not isinstance(m, QMatrix):
            m = QMatrix.from_rows(m)
            object.__setattr__(self, "matrix", m)
        if m.shape != (self.output.dim, self.input.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not fit {self.input} -> {self.output}")

    def then(self, after: "ClassicalEvent") -> "ClassicalEvent":
        """``after`` applied to the output of ``self``."""
        if self.output != after.input:
            raise CompositionError(
                f"cannot feed output {self.output} into input {after.input}")
        return ClassicalEvent(self.input, after.output, after.matrix @ self.matrix)

    def tensor(self, other: "ClassicalEvent") -> "ClassicalEvent":
        return ClassicalEvent(self.input * other.input, self.output * other.output,
                              self.matrix.kron(other.matrix))

    def __add__(self, other: "ClassicalEvent") -> "ClassicalEvent":
        if (self.input, self.output) != (other.input, other.output):
            raise CompositionError(
                f"cannot add events {self.input}->{self.output} and {other.input}->{other.output}")
        return ClassicalEvent(self.input, self.output, self.matrix + other.matrix)

    def __sub__(self, other: "ClassicalEvent") -> "ClassicalEvent":
        return ClassicalEvent(self.input, self.output, self.matrix - other.matrix)

    def scale(self, factor) -> "ClassicalEvent":
        return ClassicalEvent(self.input, self.output, self.matrix.scale(factor))

    def column_sums(self) -> list:
        return self.matrix.column_sums()

    @property
    def is_deterministic(self) -> bool:
        return all(s == 1 for s in self.column_sums())

    @property
    def is_state(self) -> bool:
        return self.input.dim == 1

    @property
    def is_effect(self) -> bool:
        return self.output.dim == 1

    def vector(self) -> list:
        """Entries of a state (column) or effect (row)."""
        return self.matrix.flat()

    def weight(self) -> Fraction:
        """Total weight ``u . rho`` of a state."""
        return sum(self.matrix.column_sums(), Fraction(0))

    def __repr__(self) -> str:
        return f"ClassicalEvent({self.input}->{self.output}, {self.matrix!r})"


EventLike = Union[ClassicalEvent, QMatrix, Sequence]


class Test:
    """Outcome-labelled family of events sharing input and output systems.

    Construction only checks the shapes; :func:`validate` reports whether
    the family is an admissible test.
    """

    __slots__ = ("input", "output", "_events", "_index")

    def __init__(self, input, output, events):
        self.input = _as_system(input)
        self.output = _as_system(output)
        if isinstance(events, Mapping):
            events = events.items()
        pairs = []
        for label, ev in events:
            if not isinstance(ev, ClassicalEvent):
                ev = ClassicalEvent(self.input, self.output, ev)
            elif (ev.input, ev.output) != (self.input, self.output):
                raise CompositionError(
                    f"event {ev.input}->{ev.output} in a test {self.input}->{self.output}")
            pairs.append((as_label(label), ev))
        if not pairs:
            raise ValueError("a test needs at least one outcome")
        index = {}
        for k, (label, _) in enumerate(pairs):
            if label in index:
                raise ValueError(f"duplicate outcome label {format_label(label)!r}")
            index[label] = k
        arities = {len(label) for label, _ in pairs}
        if len(arities) != 1:
            raise ValueError("all outcome labels of a test must have the same arity")
        self._events = tuple(pairs)
        self._index = index

    @property
    def events(self) -> tuple:
        return self._events

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self._events)

    @property
    def arity(self) -> int:
        return len(self._events[0][0])

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, label) -> ClassicalEvent:
        return self._events[self._index[as_label(label)]][1]

    def __contains__(self, label) -> bool:
        return as_label(label) in self._index

    def matrices(self) -> dict:
        return {label: ev.matrix for label, ev in self._events}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Test):
            return NotImplemented
        # a test is a map from labels to events; listing order is presentation
        return (self.input == other.input and self.output == other.output
                and dict(self._events) == dict(other._events))

    def __hash__(self) -> int:
        return hash((self.input, self.output, frozenset(self._events)))

    def relabel(self, fn) -> "Test":
        return Test(self.input, self.output, [(fn(l), ev) for l, ev in self._events])

    def full_coarse_graining(self) -> ClassicalEvent:
        return full_coarse_graining(self)

    @property
    def is_preparation(self) -> bool:
        return self.input.dim == 1

    @property
    def is_observation(self) -> bool:
        return self.output.dim == 1

    def __repr__(self) -> str:
        labels = ", ".join(format_label(l) or "()" for l in self.labels)
        return f"Test({self.input}->{self.output}, outcomes=[{labels}])"


# -- constructors --------------------------------------------------------

def identity_event(s) -> ClassicalEvent:
    s = _as_system(s)
    return ClassicalEvent(s, s, QMatrix.identity(s.dim))


def identity_test(s) -> Test:
    s = _as_system(s)
    return Test(s, s, [((), identity_event(s))])


def deterministic_test(event: ClassicalEvent) -> Test:
    return Test(event.input, event.output, [((), event)])


def state(system, values) -> ClassicalEvent:
    system = _as_system(system)
    return ClassicalEvent(TRIVIAL, system, QMatrix.column(values))


def effect(system, values) -> ClassicalEvent:
    system = _as_system(system)
    return ClassicalEvent(system, TRIVIAL, QMatrix.row(values))


def preparation_test(system, states) -> Test:
    """Preparation test from ``{label: vector}`` (or a list of vectors)."""
    system = _as_system(system)
    if not isinstance(states, Mapping):
        states = {str(k): v for k, v in enumerate(states)}
    return Test(TRIVIAL, system,
                [(k, v if isinstance(v, ClassicalEvent) else state(system, v))
                 for k, v in states.items()])


def observation_test(system, effects) -> Test:
    """Observation test from ``{label: vector}`` (or a list of vectors)."""
    system = _as_system(system)
    if not isinstance(effects, Mapping):
        effects = {str(k): v for k, v in enumerate(effects)}
    return Test(system, TRIVIAL,
                [(k, v if isinstance(v, ClassicalEvent) else effect(system, v))
                 for k, v in effects.items()])


def deterministic_effect(s) -> ClassicalEvent:
    s = _as_system(s)
    return effect(s, [1] * s.dim)


def vertex_state(s, j: int) -> ClassicalEvent:
    s = _as_system(s)
    if not 0 <= j < s.dim:
        raise IndexError(f"vertex {j} out of range for system {s} of dimension {s.dim}")
    return ClassicalEvent(TRIVIAL, s, QMatrix(s.dim, 1, [{j: Fraction(1)}]))


def vertex_effect(s, j: int) -> ClassicalEvent:
    s = _as_system(s)
    if not 0 <= j < s.dim:
        raise IndexError(f"vertex {j} out of range for system {s} of dimension {s.dim}")
    cols = [{} for _ in range(s.dim)]
    cols[j] = {0: Fraction(1)}
    return ClassicalEvent(s, TRIVIAL, QMatrix(1, s.dim, cols))


# -- composition ---------------------------------------------------------

def compose_seq(first: Test, second: Test) -> Test:
    """Run ``first`` then ``second``; outcome ``x.y`` has event ``second[y] first[x]``."""
    if first.output != second.input:
        raise CompositionError(
            f"output system {first.output} of the first test does not match "
            f"input system {second.input} of the second")
    events = [(x + y, ClassicalEvent(first.input, second.output, g.matrix @ f.matrix))
              for x, f in first for y, g in second]
    return Test(first.input, second.output, events)


def compose_par(left: Test, right: Test) -> Test:
    """Run ``left`` on the leading factors and ``right`` on the trailing ones."""
    events = [(x + y, f.tensor(g)) for x, f in left for y, g in right]
    return Test(left.input * right.input, left.output * right.output, events)


def full_coarse_graining(t: Test) -> ClassicalEvent:
    total = None
    for _, ev in t:
        total = ev if total is None else total + ev
    return total


def coarse_grain(t: Test, partition) -> Test:
    """Merge outcomes of ``t`` block by block.

    ``partition`` is either a mapping ``new_label -> old labels`` or a
    sequence of blocks, in which case the new labels are ``"0"``, ``"1"``...
    Blocks must be disjoint, non-empty and cover every outcome.
    """
    if isinstance(partition, Mapping):
        blocks = [(as_label(k), list(v)) for k, v in partition.items()]
    else:
        blocks = [((str(k),), list(v)) for k, v in enumerate(partition)]
    seen = set()
    events = []
    for new, block in blocks:
        if not block:
            raise PartitionError(f"block {format_label(new)!r} is empty")
        total = None
        for old in block:
            old = as_label(old)
            if old not in t:
                raise PartitionError(f"unknown outcome {format_label(old)!r}")
            if old in seen:
                raise PartitionError(f"outcome {format_label(old)!r} appears in two blocks")
            seen.add(old)
            total = t[old] if total is None else total + t[old]
        events.append((new, total))
    missing = [l for l in t.labels if l not in seen]
    if missing:
        raise PartitionError(
            "partition does not cover outcomes " + ", ".join(format_label(l) for l in missing))
    return Test(t.input, t.output, events)


def probability(prep: ClassicalEvent, t: Test, obs: Test) -> dict:
    """Joint outcome distribution ``p(x, y) = <a_y| T_x |rho>`` keyed by ``x + y``."""
    if not prep.is_state:
        raise CompositionError(f"preparation must have trivial input, got {prep.input}")
    if prep.output != t.input:
        raise CompositionError(f"state on {prep.output} cannot feed a test on {t.input}")
    if not obs.is_observation:
        raise CompositionError(f"observation test must have trivial output, got {obs.output}")
    if t.output != obs.input:
        raise CompositionError(f"test output {t.output} does not match observation on {obs.input}")
    out = {}
    for x, ev in t:
        mid = ev.matrix @ prep.matrix
        for y, a in obs:
            out[x + y] = (a.matrix @ mid)[0, 0]
    return out


# -- validation ----------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    location: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.location}: {self.detail}"


@dataclass(frozen=True)
class ValidityReport:
    kind: str
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return f"valid {self.kind} test"
        return f"invalid {self.kind} test: " + "; ".join(str(v) for v in self.violations)


def validate(t: Test) -> ValidityReport:
    """Report every violated admissibility condition of ``t``.  Never raises."""
    if t.is_preparation and t.is_observation:
        kind = "scalar"
    elif t.is_preparation:
        kind = "preparation"
    elif t.is_observation:
        kind = "observation"
    else:
        kind = "transformation"
    found = []
    for label, ev in t:
        name = format_label(label) or "()"
        for i, j, v in ev.matrix.entries():
            if v < 0:
                found.append(Violation("negative entry", f"event {name} [{i},{j}]", f"{v} < 0"))
            elif kind == "observation" and v > 1:
                found.append(Violation("effect entry out of range", f"event {name} index {j}",
                                       f"{v} > 1"))
        for j, s in enumerate(ev.column_sums()):
            if s > 1:
                found.append(Violation("column sum exceeds 1", f"event {name} column {j}",
                                       f"{s} > 1"))
    for j, s in enumerate(full_coarse_graining(t).column_sums()):
        if s != 1:
            if kind == "observation":
                detail = f"effects sum to {s} at index {j}, not 1 (sum is not the deterministic effect)"
            elif kind == "preparation":
                detail = f"total weight {s} != 1"
            else:
                detail = f"column sum {s} != 1"
            found.append(Violation("coarse-graining not deterministic", f"column {j}", detail))
    return ValidityReport(kind, tuple(found))
